#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "msprompt/grid.hpp"
#include "msprompt/raster.hpp"

namespace msprompt {

// Listing order doubles as the canonical image order in prompts.
enum class ModalityKind : std::uint8_t { TrueColor, FalseColor, NDVI, NDWI, NDMI1, NDMI2 };

inline constexpr std::array<ModalityKind, 6> kAllModalities = {
    ModalityKind::TrueColor, ModalityKind::FalseColor, ModalityKind::NDVI,
    ModalityKind::NDWI,      ModalityKind::NDMI1,      ModalityKind::NDMI2};

// Bands in channel order for composites, (a, b) operand order for indices.
std::span<const BandId> dependencies(ModalityKind kind) noexcept;
bool is_composite(ModalityKind kind) noexcept;

// "true_color", "ndmi1", ...; used in file names and config files.
std::string_view modality_slug(ModalityKind kind) noexcept;
// "RGB", "NDMI-1", ...; used in tables and prompts.
std::string_view modality_display_name(ModalityKind kind) noexcept;
// Accepts slugs, display names and enumerator spellings, case-insensitively.
// Throws ConfigError.
ModalityKind parse_modality(std::string_view text);

// Text naming the constituent bands and what the rendering shows.
std::string_view modality_descriptor(ModalityKind kind) noexcept;

// (a - b) / (a + b); 0 where a + b == 0. Throws DimensionMismatch.
IndexGrid normalized_difference(const UnitGrid& a, const UnitGrid& b);

struct Rgb {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

using Rgb8 = std::array<std::uint8_t, 3>;

// round(255 * c) with halves away from zero; c is clamped to [0, 1] first.
std::uint8_t quantize_channel(double c) noexcept;
Rgb8 quantize(const Rgb& color) noexcept;

struct ColorStop {
  double value = 0.0;
  Rgb color;
};

// Piecewise-linear colormap over ascending stops; values outside the first
// and last stop clamp to the end colors.
class Colormap {
 public:
  // Throws ConfigError unless there are >= 2 strictly ascending stops.
  explicit Colormap(std::vector<ColorStop> stops);
  static Colormap linear(Rgb start, Rgb end, double domain_lo, double domain_hi);

  double domain_lo() const noexcept { return stops_.front().value; }
  double domain_hi() const noexcept { return stops_.back().value; }
  const std::vector<ColorStop>& stops() const noexcept { return stops_; }

  Rgb color_at(double v) const noexcept;
  Rgb8 quantized_at(double v) const noexcept { return quantize(color_at(v)); }

 private:
  std::vector<ColorStop> stops_;
};

// Red -> Yellow -> Green with stops at -1, 0, +1.
const Colormap& ndvi_colormap();
// White -> Blue over [-0.8, 0.8].
const Colormap& ndwi_colormap();
// Red -> Blue over [-1, 1].
const Colormap& ndmi_colormap();
const Colormap& colormap_for(ModalityKind kind);

struct PseudoImage {
  ModalityKind kind = ModalityKind::TrueColor;
  std::size_t width = 0;
  std::size_t height = 0;
  // Row-major interleaved RGB, width * height * 3 bytes.
  std::vector<std::uint8_t> pixels;
  std::string descriptor;

  Rgb8 pixel(std::size_t row, std::size_t col) const {
    const std::size_t i = (row * width + col) * 3;
    return {pixels[i], pixels[i + 1], pixels[i + 2]};
  }
};

// Returns interleaved RGB bytes for the grid.
std::vector<std::uint8_t> apply_colormap(const IndexGrid& index, const Colormap& map);

struct RenderConfig {
  NormalizationConfig normalization;
};

// Throws MissingBand or UnalignedScene.
PseudoImage render_composite(const MultiSpectralScene& scene, ModalityKind kind, const RenderConfig& config);
IndexGrid compute_index(const MultiSpectralScene& scene, ModalityKind kind, const RenderConfig& config);
PseudoImage render_modality(const MultiSpectralScene& scene, ModalityKind kind, const RenderConfig& config);

// Renders `kinds` in canonical order regardless of the order given.
std::vector<PseudoImage> render_modalities(const MultiSpectralScene& scene, std::span<const ModalityKind> kinds,
                                           const RenderConfig& config);

// Sorts into canonical order and removes duplicates.
std::vector<ModalityKind> canonical_order(std::span<const ModalityKind> kinds);

}  // namespace msprompt

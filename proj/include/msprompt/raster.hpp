#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "msprompt/grid.hpp"

namespace msprompt {

// Sentinel-2 L2A bands. B10 (cirrus) is not distributed at L2A and has no
// identifier here.
enum class BandId : std::uint8_t { B01, B02, B03, B04, B05, B06, B07, B08, B8A, B09, B11, B12 };

inline constexpr std::array<BandId, 12> kAllBands = {
    BandId::B01, BandId::B02, BandId::B03, BandId::B04, BandId::B05, BandId::B06,
    BandId::B07, BandId::B08, BandId::B8A, BandId::B09, BandId::B11, BandId::B12};

std::string_view band_code(BandId band) noexcept;
// Throws UnknownBandCode.
BandId parse_band_code(std::string_view code);
std::optional<BandId> try_parse_band_code(std::string_view code) noexcept;

// Ground sample distance of the band as distributed (10, 20 or 60 m).
int catalog_resolution_m(BandId band) noexcept;

struct BandRaster {
  BandId band = BandId::B02;
  std::size_t width = 0;
  std::size_t height = 0;
  // Digital numbers, row-major. Unsigned storage makes negatives unrepresentable.
  std::vector<std::uint16_t> values;
  // Current ground sample distance; equals the catalog value on load and the
  // target value after alignment.
  int resolution_m = 10;

  std::uint16_t at(std::size_t row, std::size_t col) const { return values[row * width + col]; }
  friend bool operator==(const BandRaster&, const BandRaster&) = default;
};

// Throws DecodeError when values.size() != width * height or resolution_m <= 0.
void validate(const BandRaster& raster);

class MultiSpectralScene {
 public:
  MultiSpectralScene() = default;
  explicit MultiSpectralScene(std::string scene_id) : scene_id_(std::move(scene_id)) {}

  const std::string& scene_id() const noexcept { return scene_id_; }
  const std::map<BandId, BandRaster>& bands() const noexcept { return bands_; }
  std::size_t band_count() const noexcept { return bands_.size(); }

  // Throws DuplicateBand if the band is already present.
  void add_band(BandRaster raster);
  bool has(BandId band) const noexcept { return bands_.contains(band); }
  // Throws MissingBand.
  const BandRaster& band(BandId band) const;

  // True when every band shares one width, height and resolution.
  bool is_aligned() const noexcept;
  // Meaningful only when aligned; 0 for an empty scene.
  std::size_t grid_width() const noexcept;
  std::size_t grid_height() const noexcept;

  friend bool operator==(const MultiSpectralScene&, const MultiSpectralScene&) = default;

 private:
  std::string scene_id_;
  std::map<BandId, BandRaster> bands_;
};

// Decoders turn a file into a band raster; the flat-matrix decoder is built in
// and used for every extension without a registered decoder.
using BandDecoder = std::function<BandRaster(const std::filesystem::path& path, BandId band)>;
void register_band_decoder(std::string extension, BandDecoder decoder);

// Flat-matrix format: raw little-endian u16 payload at `path`, sidecar JSON at
// `path` + ".json" with width/height/dtype/order.
BandRaster read_flat_band(const std::filesystem::path& path, BandId band);
void write_flat_band(const std::filesystem::path& path, const BandRaster& raster);

// Manifest: {"scene_id": str, "bands": [{"band": "B04", "path": "...",
// "resolution_m": optional int}]}. Relative paths resolve against the
// manifest's directory.
MultiSpectralScene load_scene(const std::filesystem::path& manifest_path);
void write_manifest(const std::filesystem::path& manifest_path, const std::string& scene_id,
                    const std::vector<std::pair<BandId, std::filesystem::path>>& band_files);

// Nearest-neighbour replication of every band onto a grid at target_m.
// Throws IncompatibleGeometry when a band resolution is not an integer
// multiple of target_m or the replicated sizes disagree.
MultiSpectralScene align_to_common_grid(const MultiSpectralScene& scene, int target_m);

struct NormalizationConfig {
  enum class Mode { SceneMinMax, FixedRange };
  Mode mode = Mode::SceneMinMax;
  // FixedRange: per-band (lo, hi); bands without an entry use default_range.
  std::map<BandId, std::pair<double, double>> ranges;
  std::pair<double, double> default_range{0.0, 10000.0};
};

struct NormalizationBounds {
  double lo = 0.0;
  double hi = 1.0;
};

NormalizationBounds resolve_bounds(const BandRaster& raster, const NormalizationConfig& config);

// clamp((v - lo) / (hi - lo), 0, 1). Throws DegenerateRange when hi <= lo.
UnitGrid normalize_band(const BandRaster& raster, double lo, double hi);

// Applies the configured bounds. A constant band under SceneMinMax maps to 0;
// FixedRange with hi <= lo throws DegenerateRange.
UnitGrid normalize_band(const BandRaster& raster, const NormalizationConfig& config);

}  // namespace msprompt

#include "msprompt/spectral.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "msprompt/errors.hpp"

namespace msprompt {

namespace {

struct ModalityInfo {
  ModalityKind kind;
  std::string_view slug;
  std::string_view display;
  std::string_view enumerator;
  std::array<BandId, 3> bands;
  std::size_t band_count;
  std::string_view descriptor;
};

// Descriptor wording keeps the band lists and colormap phrasing that the
// prompt fidelity tests look for.
constexpr std::array<ModalityInfo, 6> kModalities = {{
    {ModalityKind::TrueColor, "true_color", "RGB", "TrueColor", {BandId::B04, BandId::B03, BandId::B02}, 3,
     "RGB: Composited from B04, B03, B02. Natural color as seen by the eye."},
    {ModalityKind::FalseColor, "false_color", "False Color", "FalseColor", {BandId::B08, BandId::B04, BandId::B03}, 3,
     "False Color: Composited from B08, B04, B03. Near-infrared is shown as red, so healthy vegetation "
     "appears bright red."},
    {ModalityKind::NDVI, "ndvi", "NDVI", "NDVI", {BandId::B08, BandId::B04, BandId::B08}, 2,
     "NDVI: Normalized Difference Vegetation Index (Red-Yellow-Green map) using B08, B04. Green represents "
     "green vegetation, red represents bare or non-vegetated surfaces."},
    {ModalityKind::NDWI, "ndwi", "NDWI", "NDWI", {BandId::B03, BandId::B08, BandId::B03}, 2,
     "NDWI: Normalized Difference Water Index (range -0.8 to 0.8) using B03, B08 with linear colormap "
     "[(1, 1, 1) to (0, 0, 1)]. Blue is indicative of open water."},
    {ModalityKind::NDMI1, "ndmi1", "NDMI-1", "NDMI1", {BandId::B8A, BandId::B11, BandId::B8A}, 2,
     "NDMI-1: Moisture Index using B8A, B11 with linear colormap [(1, 0, 0) to (0, 0, 1)]. Blue is "
     "indicative of moisture, red of dry surfaces."},
    {ModalityKind::NDMI2, "ndmi2", "NDMI-2", "NDMI2", {BandId::B8A, BandId::B12, BandId::B8A}, 2,
     "NDMI-2: Moisture Index using B8A, B12 with linear colormap [(1, 0, 0) to (0, 0, 1)]. Blue is "
     "indicative of moisture, red of dry surfaces."},
}};

const ModalityInfo& info(ModalityKind kind) noexcept { return kModalities[static_cast<std::size_t>(kind)]; }

std::string fold(std::string_view s) {
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c)) out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

// Checks presence and shared geometry of the bands the modality reads.
void require_bands(const MultiSpectralScene& scene, ModalityKind kind) {
  const auto deps = dependencies(kind);
  const BandRaster* first = nullptr;
  for (BandId id : deps) {
    const BandRaster& b = scene.band(id);
    if (!first) {
      first = &b;
    } else if (b.width != first->width || b.height != first->height || b.resolution_m != first->resolution_m) {
      throw UnalignedScene("scene '" + scene.scene_id() + "': band " + std::string(band_code(id)) +
                           " is not on the same grid as " + std::string(band_code(first->band)) +
                           "; align the scene before rendering");
    }
  }
}

}  // namespace

std::span<const BandId> dependencies(ModalityKind kind) noexcept {
  const auto& m = info(kind);
  return {m.bands.data(), m.band_count};
}

bool is_composite(ModalityKind kind) noexcept {
  return kind == ModalityKind::TrueColor || kind == ModalityKind::FalseColor;
}

std::string_view modality_slug(ModalityKind kind) noexcept { return info(kind).slug; }
std::string_view modality_display_name(ModalityKind kind) noexcept { return info(kind).display; }
std::string_view modality_descriptor(ModalityKind kind) noexcept { return info(kind).descriptor; }

ModalityKind parse_modality(std::string_view text) {
  const std::string key = fold(text);
  for (const auto& m : kModalities) {
    if (key == fold(m.slug) || key == fold(m.display) || key == fold(m.enumerator)) return m.kind;
  }
  if (key == "truecolor" || key == "rgbonly") return ModalityKind::TrueColor;
  throw ConfigError("unknown modality: " + std::string(text));
}

IndexGrid normalized_difference(const UnitGrid& a, const UnitGrid& b) {
  if (!a.same_shape(b)) {
    throw DimensionMismatch("index operands differ in shape: " + std::to_string(a.width) + "x" +
                            std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                            std::to_string(b.height));
  }
  IndexGrid out(a.width, a.height);
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const double sum = a.values[i] + b.values[i];
    out.values[i] = sum > 0.0 ? std::clamp((a.values[i] - b.values[i]) / sum, -1.0, 1.0) : 0.0;
  }
  return out;
}

std::uint8_t quantize_channel(double c) noexcept {
  const double v = std::clamp(c, 0.0, 1.0) * 255.0;
  return static_cast<std::uint8_t>(std::lround(v));
}

Rgb8 quantize(const Rgb& color) noexcept {
  return {quantize_channel(color.r), quantize_channel(color.g), quantize_channel(color.b)};
}

Colormap::Colormap(std::vector<ColorStop> stops) : stops_(std::move(stops)) {
  if (stops_.size() < 2) throw ConfigError("colormap needs at least two stops");
  for (std::size_t i = 1; i < stops_.size(); ++i) {
    if (!(stops_[i].value > stops_[i - 1].value)) throw ConfigError("colormap stops must strictly ascend");
  }
}

Colormap Colormap::linear(Rgb start, Rgb end, double domain_lo, double domain_hi) {
  return Colormap({{domain_lo, start}, {domain_hi, end}});
}

Rgb Colormap::color_at(double v) const noexcept {
  if (!(v > stops_.front().value)) return stops_.front().color;  // also catches NaN
  if (v >= stops_.back().value) return stops_.back().color;
  std::size_t seg = 1;
  while (v > stops_[seg].value) ++seg;
  const ColorStop& s0 = stops_[seg - 1];
  const ColorStop& s1 = stops_[seg];
  const double t = std::clamp((v - s0.value) / (s1.value - s0.value), 0.0, 1.0);
  return {s0.color.r + t * (s1.color.r - s0.color.r), s0.color.g + t * (s1.color.g - s0.color.g),
          s0.color.b + t * (s1.color.b - s0.color.b)};
}

const Colormap& ndvi_colormap() {
  static const Colormap map({{-1.0, {1, 0, 0}}, {0.0, {1, 1, 0}}, {1.0, {0, 1, 0}}});
  return map;
}

const Colormap& ndwi_colormap() {
  static const Colormap map = Colormap::linear({1, 1, 1}, {0, 0, 1}, -0.8, 0.8);
  return map;
}

const Colormap& ndmi_colormap() {
  static const Colormap map = Colormap::linear({1, 0, 0}, {0, 0, 1}, -1.0, 1.0);
  return map;
}

const Colormap& colormap_for(ModalityKind kind) {
  switch (kind) {
    case ModalityKind::NDVI: return ndvi_colormap();
    case ModalityKind::NDWI: return ndwi_colormap();
    case ModalityKind::NDMI1:
    case ModalityKind::NDMI2: return ndmi_colormap();
    default: throw ConfigError("composite modality has no colormap: " + std::string(modality_slug(kind)));
  }
}

std::vector<std::uint8_t> apply_colormap(const IndexGrid& index, const Colormap& map) {
  std::vector<std::uint8_t> px(index.values.size() * 3);
  for (std::size_t i = 0; i < index.values.size(); ++i) {
    const Rgb8 c = map.quantized_at(index.values[i]);
    px[3 * i] = c[0];
    px[3 * i + 1] = c[1];
    px[3 * i + 2] = c[2];
  }
  return px;
}

PseudoImage render_composite(const MultiSpectralScene& scene, ModalityKind kind, const RenderConfig& config) {
  if (!is_composite(kind)) throw ConfigError(std::string(modality_slug(kind)) + " is not a composite");
  require_bands(scene, kind);
  const auto deps = dependencies(kind);

  std::array<UnitGrid, 3> channels;
  for (std::size_t c = 0; c < 3; ++c) channels[c] = normalize_band(scene.band(deps[c]), config.normalization);

  PseudoImage img{kind, channels[0].width, channels[0].height, {}, std::string(modality_descriptor(kind))};
  img.pixels.resize(img.width * img.height * 3);
  for (std::size_t i = 0; i < img.width * img.height; ++i) {
    for (std::size_t c = 0; c < 3; ++c) img.pixels[3 * i + c] = quantize_channel(channels[c].values[i]);
  }
  return img;
}

IndexGrid compute_index(const MultiSpectralScene& scene, ModalityKind kind, const RenderConfig& config) {
  if (is_composite(kind)) throw ConfigError(std::string(modality_slug(kind)) + " is not an index");
  require_bands(scene, kind);
  const auto deps = dependencies(kind);
  return normalized_difference(normalize_band(scene.band(deps[0]), config.normalization),
                               normalize_band(scene.band(deps[1]), config.normalization));
}

PseudoImage render_modality(const MultiSpectralScene& scene, ModalityKind kind, const RenderConfig& config) {
  if (is_composite(kind)) return render_composite(scene, kind, config);
  const IndexGrid index = compute_index(scene, kind, config);
  return {kind, index.width, index.height, apply_colormap(index, colormap_for(kind)),
          std::string(modality_descriptor(kind))};
}

std::vector<ModalityKind> canonical_order(std::span<const ModalityKind> kinds) {
  std::vector<ModalityKind> out(kinds.begin(), kinds.end());
  std::ranges::sort(out);
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<PseudoImage> render_modalities(const MultiSpectralScene& scene, std::span<const ModalityKind> kinds,
                                           const RenderConfig& config) {
  std::vector<PseudoImage> out;
  for (ModalityKind kind : canonical_order(kinds)) out.push_back(render_modality(scene, kind, config));
  return out;
}

}  // namespace msprompt

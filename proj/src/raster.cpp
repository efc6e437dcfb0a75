#include "msprompt/raster.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <mutex>

#include <nlohmann/json.hpp>

#include "msprompt/errors.hpp"

namespace msprompt {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct BandInfo {
  BandId id;
  std::string_view code;
  int resolution_m;
};

constexpr std::array<BandInfo, 12> kBandTable = {{
    {BandId::B01, "B01", 60},
    {BandId::B02, "B02", 10},
    {BandId::B03, "B03", 10},
    {BandId::B04, "B04", 10},
    {BandId::B05, "B05", 20},
    {BandId::B06, "B06", 20},
    {BandId::B07, "B07", 20},
    {BandId::B08, "B08", 10},
    {BandId::B8A, "B8A", 20},
    {BandId::B09, "B09", 60},
    {BandId::B11, "B11", 20},
    {BandId::B12, "B12", 20},
}};

const BandInfo& info(BandId band) noexcept { return kBandTable[static_cast<std::size_t>(band)]; }

std::string lower(std::string s) {
  std::ranges::transform(s, s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::mutex& registry_mutex() {
  static std::mutex m;
  return m;
}

std::map<std::string, BandDecoder>& registry() {
  static std::map<std::string, BandDecoder> decoders;
  return decoders;
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingFile("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DecodeError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

}  // namespace

std::string_view band_code(BandId band) noexcept { return info(band).code; }

std::optional<BandId> try_parse_band_code(std::string_view code) noexcept {
  for (const auto& entry : kBandTable) {
    if (entry.code == code) return entry.id;
  }
  return std::nullopt;
}

BandId parse_band_code(std::string_view code) {
  if (auto band = try_parse_band_code(code)) return *band;
  throw UnknownBandCode("unknown Sentinel-2 L2A band code: " + std::string(code));
}

int catalog_resolution_m(BandId band) noexcept { return info(band).resolution_m; }

void validate(const BandRaster& raster) {
  if (raster.values.size() != raster.width * raster.height) {
    throw DecodeError("band " + std::string(band_code(raster.band)) + ": " +
                      std::to_string(raster.values.size()) + " values for a " +
                      std::to_string(raster.width) + "x" + std::to_string(raster.height) + " grid");
  }
  if (raster.resolution_m <= 0) {
    throw DecodeError("band " + std::string(band_code(raster.band)) + ": non-positive resolution");
  }
}

void MultiSpectralScene::add_band(BandRaster raster) {
  validate(raster);
  const BandId id = raster.band;
  if (!bands_.try_emplace(id, std::move(raster)).second) {
    throw DuplicateBand("band listed twice: " + std::string(band_code(id)));
  }
}

const BandRaster& MultiSpectralScene::band(BandId id) const {
  auto it = bands_.find(id);
  if (it == bands_.end()) {
    throw MissingBand("scene '" + scene_id_ + "' has no band " + std::string(band_code(id)));
  }
  return it->second;
}

bool MultiSpectralScene::is_aligned() const noexcept {
  if (bands_.empty()) return true;
  const auto& first = bands_.begin()->second;
  return std::ranges::all_of(bands_, [&](const auto& kv) {
    const auto& b = kv.second;
    return b.width == first.width && b.height == first.height && b.resolution_m == first.resolution_m;
  });
}

std::size_t MultiSpectralScene::grid_width() const noexcept {
  return bands_.empty() ? 0 : bands_.begin()->second.width;
}

std::size_t MultiSpectralScene::grid_height() const noexcept {
  return bands_.empty() ? 0 : bands_.begin()->second.height;
}

void register_band_decoder(std::string extension, BandDecoder decoder) {
  std::lock_guard lock(registry_mutex());
  registry()[lower(std::move(extension))] = std::move(decoder);
}

BandRaster read_flat_band(const fs::path& path, BandId band) {
  fs::path sidecar = path;
  sidecar += ".json";
  if (!fs::exists(path)) throw MissingFile("band payload not found: " + path.string());
  if (!fs::exists(sidecar)) throw MissingFile("band sidecar not found: " + sidecar.string());

  const json meta = read_json_file(sidecar);
  BandRaster raster;
  raster.band = band;
  try {
    raster.width = meta.at("width").get<std::size_t>();
    raster.height = meta.at("height").get<std::size_t>();
    if (meta.value("dtype", "u16") != "u16") throw DecodeError("unsupported dtype in " + sidecar.string());
    if (meta.value("order", "row-major") != "row-major") {
      throw DecodeError("unsupported order in " + sidecar.string());
    }
  } catch (const json::exception& e) {
    throw DecodeError("bad sidecar " + sidecar.string() + ": " + e.what());
  }

  const std::size_t count = raster.width * raster.height;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFile("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() != count * 2) {
    throw DecodeError(path.string() + ": expected " + std::to_string(count * 2) + " bytes, found " +
                      std::to_string(bytes.size()));
  }
  raster.values.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    raster.values[i] = static_cast<std::uint16_t>(bytes[2 * i] | (bytes[2 * i + 1] << 8));
  }
  raster.resolution_m = catalog_resolution_m(band);
  return raster;
}

void write_flat_band(const fs::path& path, const BandRaster& raster) {
  validate(raster);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::vector<char> bytes(raster.values.size() * 2);
  for (std::size_t i = 0; i < raster.values.size(); ++i) {
    bytes[2 * i] = static_cast<char>(raster.values[i] & 0xFF);
    bytes[2 * i + 1] = static_cast<char>(raster.values[i] >> 8);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  fs::path sidecar = path;
  sidecar += ".json";
  std::ofstream meta(sidecar, std::ios::trunc);
  meta << json{{"width", raster.width}, {"height", raster.height}, {"dtype", "u16"}, {"order", "row-major"}}
              .dump(2)
       << '\n';
  if (!out || !meta) throw StorageError("failed writing " + path.string());
}

MultiSpectralScene load_scene(const fs::path& manifest_path) {
  const json manifest = read_json_file(manifest_path);
  const fs::path base = manifest_path.parent_path();

  std::string scene_id;
  try {
    scene_id = manifest.at("scene_id").get<std::string>();
  } catch (const json::exception& e) {
    throw DecodeError("manifest " + manifest_path.string() + ": " + e.what());
  }
  MultiSpectralScene scene(scene_id);

  const auto bands_it = manifest.find("bands");
  if (bands_it == manifest.end() || !bands_it->is_array()) {
    throw DecodeError("manifest " + manifest_path.string() + " has no 'bands' array");
  }
  for (const auto& entry : *bands_it) {
    std::string code;
    std::string rel;
    try {
      code = entry.at("band").get<std::string>();
      rel = entry.at("path").get<std::string>();
    } catch (const json::exception& e) {
      throw DecodeError("manifest " + manifest_path.string() + ": " + e.what());
    }
    const BandId id = parse_band_code(code);
    if (scene.has(id)) throw DuplicateBand("band listed twice: " + code);

    fs::path file = rel;
    if (file.is_relative()) file = base / file;

    BandDecoder decoder;
    {
      std::lock_guard lock(registry_mutex());
      auto it = registry().find(lower(file.extension().string()));
      if (it != registry().end()) decoder = it->second;
    }
    BandRaster raster = decoder ? decoder(file, id) : read_flat_band(file, id);
    // Pre-resampled products (EuroSAT ships every band at 10 m) declare it here.
    if (auto res = entry.find("resolution_m"); res != entry.end()) raster.resolution_m = res->get<int>();
    scene.add_band(std::move(raster));
  }
  return scene;
}

void write_manifest(const fs::path& manifest_path, const std::string& scene_id,
                    const std::vector<std::pair<BandId, fs::path>>& band_files) {
  json doc{{"scene_id", scene_id}, {"bands", json::array()}};
  for (const auto& [band, path] : band_files) {
    doc["bands"].push_back({{"band", band_code(band)}, {"path", path.generic_string()}});
  }
  if (manifest_path.has_parent_path()) fs::create_directories(manifest_path.parent_path());
  std::ofstream out(manifest_path, std::ios::trunc);
  out << doc.dump(2) << '\n';
  if (!out) throw StorageError("failed writing " + manifest_path.string());
}

MultiSpectralScene align_to_common_grid(const MultiSpectralScene& scene, int target_m) {
  if (target_m <= 0) throw IncompatibleGeometry("target resolution must be positive");

  MultiSpectralScene out(scene.scene_id());
  std::optional<std::pair<std::size_t, std::size_t>> grid;
  for (const auto& [id, src] : scene.bands()) {
    if (src.resolution_m < target_m || src.resolution_m % target_m != 0) {
      throw IncompatibleGeometry("band " + std::string(band_code(id)) + " at " +
                                 std::to_string(src.resolution_m) + " m cannot be replicated onto a " +
                                 std::to_string(target_m) + " m grid");
    }
    const auto k = static_cast<std::size_t>(src.resolution_m / target_m);
    const std::size_t w = src.width * k;
    const std::size_t h = src.height * k;
    if (!grid) {
      grid.emplace(w, h);
    } else if (grid->first != w || grid->second != h) {
      throw IncompatibleGeometry("band " + std::string(band_code(id)) + " resolves to " + std::to_string(w) +
                                 "x" + std::to_string(h) + ", expected " + std::to_string(grid->first) + "x" +
                                 std::to_string(grid->second));
    }

    if (k == 1) {
      out.add_band(src);
      continue;
    }
    BandRaster dst{id, w, h, std::vector<std::uint16_t>(w * h), target_m};
    for (std::size_t r = 0; r < h; ++r) {
      const std::uint16_t* src_row = src.values.data() + (r / k) * src.width;
      std::uint16_t* dst_row = dst.values.data() + r * w;
      for (std::size_t c = 0; c < w; ++c) dst_row[c] = src_row[c / k];
    }
    out.add_band(std::move(dst));
  }
  return out;
}

NormalizationBounds resolve_bounds(const BandRaster& raster, const NormalizationConfig& config) {
  if (config.mode == NormalizationConfig::Mode::FixedRange) {
    auto it = config.ranges.find(raster.band);
    const auto [lo, hi] = it != config.ranges.end() ? it->second : config.default_range;
    return {lo, hi};
  }
  if (raster.values.empty()) return {0.0, 0.0};
  const auto [mn, mx] = std::ranges::minmax_element(raster.values);
  return {static_cast<double>(*mn), static_cast<double>(*mx)};
}

UnitGrid normalize_band(const BandRaster& raster, double lo, double hi) {
  if (!(hi > lo)) {
    throw DegenerateRange("normalization range [" + std::to_string(lo) + ", " + std::to_string(hi) +
                          "] is empty for band " + std::string(band_code(raster.band)));
  }
  UnitGrid out(raster.width, raster.height);
  const double span = hi - lo;
  for (std::size_t i = 0; i < raster.values.size(); ++i) {
    out.values[i] = std::clamp((static_cast<double>(raster.values[i]) - lo) / span, 0.0, 1.0);
  }
  return out;
}

UnitGrid normalize_band(const BandRaster& raster, const NormalizationConfig& config) {
  const auto bounds = resolve_bounds(raster, config);
  if (config.mode == NormalizationConfig::Mode::SceneMinMax && !(bounds.hi > bounds.lo)) {
    return UnitGrid(raster.width, raster.height, 0.0);
  }
  return normalize_band(raster, bounds.lo, bounds.hi);
}

}  // namespace msprompt

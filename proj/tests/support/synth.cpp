#include "synth.hpp"

#include <fstream>
#include <sstream>

#include "msprompt/bench.hpp"

namespace msprompt::testing {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string& prefix) {
  std::random_device rd;
  for (int attempt = 0; attempt < 100; ++attempt) {
    auto candidate = fs::temp_directory_path() / (prefix + "-" + std::to_string(rd()) + std::to_string(rd()));
    if (fs::create_directory(candidate)) {
      path_ = candidate;
      return;
    }
  }
  throw std::runtime_error("cannot create temporary directory");
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

namespace {

BandRaster random_band(std::mt19937_64& rng, BandId band, std::size_t w, std::size_t h, int res,
                       std::uint16_t max_value) {
  std::uniform_int_distribution<int> dist(0, max_value);
  BandRaster r;
  r.band = band;
  r.width = w;
  r.height = h;
  r.resolution_m = res;
  r.values.resize(w * h);
  for (auto& v : r.values) v = static_cast<std::uint16_t>(dist(rng));
  return r;
}

}  // namespace

MultiSpectralScene random_aligned_scene(std::mt19937_64& rng, const std::string& id, std::size_t width,
                                        std::size_t height, std::uint16_t max_value) {
  MultiSpectralScene scene(id);
  for (auto band : kAllBands) scene.add_band(random_band(rng, band, width, height, 10, max_value));
  return scene;
}

MultiSpectralScene random_native_scene(std::mt19937_64& rng, const std::string& id, std::size_t grid,
                                       std::uint16_t max_value) {
  MultiSpectralScene scene(id);
  for (auto band : kAllBands) {
    const int res = catalog_resolution_m(band);
    const std::size_t n = grid * 10 / static_cast<std::size_t>(res);
    scene.add_band(random_band(rng, band, n, n, res, max_value));
  }
  return scene;
}

fs::path write_scene(const MultiSpectralScene& scene, const fs::path& dir) {
  fs::create_directories(dir);
  std::vector<std::pair<BandId, fs::path>> files;
  for (const auto& [band, raster] : scene.bands()) {
    const fs::path file = std::string(band_code(band)) + ".u16";
    write_flat_band(dir / file, raster);
    files.emplace_back(band, file);
  }
  const fs::path manifest = dir / "manifest.json";
  write_manifest(manifest, scene.scene_id(), files);
  return manifest;
}

fs::path write_dataset(const fs::path& dir, const std::vector<SyntheticSample>& samples, std::uint64_t seed,
                       std::size_t grid) {
  std::mt19937_64 rng(seed);
  fs::create_directories(dir);
  std::ostringstream index;
  index << "sample_id,manifest,labels\n";
  for (const auto& s : samples) {
    const auto scene = random_native_scene(rng, s.id, grid);
    write_scene(scene, dir / "scenes" / s.id);
    std::string labels;
    for (const auto& l : s.labels) labels += (labels.empty() ? "" : ";") + l;
    index << csv_field(s.id) << "," << csv_field("scenes/" + s.id + "/manifest.json") << "," << csv_field(labels)
          << "\n";
  }
  const fs::path path = dir / "index.csv";
  std::ofstream(path) << index.str();
  return path;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace msprompt::testing

#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "msprompt/raster.hpp"

namespace msprompt::testing {

// Removes itself on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& prefix = "msprompt");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Every band already on a shared 10 m grid of width x height.
MultiSpectralScene random_aligned_scene(std::mt19937_64& rng, const std::string& id, std::size_t width,
                                        std::size_t height, std::uint16_t max_value = 10000);

// Bands at their catalog resolutions for a 10 m grid of `grid` pixels
// (grid must be a multiple of 6).
MultiSpectralScene random_native_scene(std::mt19937_64& rng, const std::string& id, std::size_t grid,
                                       std::uint16_t max_value = 10000);

// Writes every band as a flat file next to a manifest; returns the manifest path.
std::filesystem::path write_scene(const MultiSpectralScene& scene, const std::filesystem::path& dir);

struct SyntheticSample {
  std::string id;
  std::vector<std::string> labels;
};

// Writes `samples` scenes plus index.csv under dir; returns the index path.
std::filesystem::path write_dataset(const std::filesystem::path& dir, const std::vector<SyntheticSample>& samples,
                                    std::uint64_t seed, std::size_t grid = 6);

std::string read_file(const std::filesystem::path& path);

}  // namespace msprompt::testing

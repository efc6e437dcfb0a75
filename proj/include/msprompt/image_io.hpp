#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "msprompt/spectral.hpp"

namespace msprompt {

// 8-bit RGB PNG, no alpha. Output bytes depend only on the pixels.
std::vector<std::uint8_t> encode_png(const PseudoImage& image);

struct DecodedPng {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> rgb;
};
// Accepts 8-bit RGB PNGs as produced by encode_png. Throws DecodeError.
DecodedPng decode_png(std::span<const std::uint8_t> bytes);

// "<scene_id>_<slug>.png"
std::string png_file_name(const std::string& scene_id, ModalityKind kind);
// Throws StorageError.
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace msprompt

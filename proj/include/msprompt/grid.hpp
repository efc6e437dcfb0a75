#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace msprompt {

// Row-major 2-D grid. Tag keeps grids with different value semantics
// (unit-interval reflectance vs. index values) from being mixed up.
template <typename T, typename Tag>
struct Grid {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<T> values;

  Grid() = default;
  Grid(std::size_t w, std::size_t h, T fill = T{}) : width(w), height(h), values(w * h, fill) {}

  std::size_t size() const noexcept { return values.size(); }
  T& at(std::size_t row, std::size_t col) { return values[row * width + col]; }
  const T& at(std::size_t row, std::size_t col) const { return values[row * width + col]; }
  std::span<const T> view() const noexcept { return values; }

  bool same_shape(const auto& other) const noexcept {
    return width == other.width && height == other.height;
  }

  friend bool operator==(const Grid&, const Grid&) = default;
};

struct UnitTag;
struct IndexTag;

// Values in [0, 1] after band normalization.
using UnitGrid = Grid<double, UnitTag>;
// Normalized-difference values in [-1, 1].
using IndexGrid = Grid<double, IndexTag>;

}  // namespace msprompt

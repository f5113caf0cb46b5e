#pragma once

#include <cstddef>
#include <vector>

namespace fovex {

// Continuous image coordinate; (0,0) is the center of the top-left pixel.
struct Point {
  double row = 0.0;
  double col = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

struct Pixel {
  std::size_t row = 0;
  std::size_t col = 0;

  friend bool operator==(const Pixel&, const Pixel&) = default;
};

struct BoundingBox {
  std::size_t top = 0;
  std::size_t left = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  bool contains(std::size_t r, std::size_t c) const {
    return r >= top && r < top + height && c >= left && c < left + width;
  }
  bool fits(std::size_t image_height, std::size_t image_width) const {
    return height > 0 && width > 0 && top + height <= image_height && left + width <= image_width;
  }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

}  // namespace fovex

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dvio/errors.hpp"

namespace dvio {

// Row-major 8-bit grayscale frame.
class Image8 {
 public:
  Image8() = default;
  Image8(int width, int height, uint8_t fill = 0)
      : width_(width), height_(height), data_(checked_size(width, height), fill) {}
  Image8(int width, int height, std::vector<uint8_t> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (data_.size() != checked_size(width, height))
      throw DimensionError("image data length does not match width*height");
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return data_.empty(); }

  uint8_t operator()(int x, int y) const noexcept { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  uint8_t& operator()(int x, int y) noexcept { return data_[static_cast<std::size_t>(y) * width_ + x]; }

  std::span<const uint8_t> row(int y) const noexcept {
    return {data_.data() + static_cast<std::size_t>(y) * width_, static_cast<std::size_t>(width_)};
  }
  std::span<const uint8_t> pixels() const noexcept { return data_; }
  std::span<uint8_t> pixels() noexcept { return data_; }

  bool operator==(const Image8&) const = default;

 private:
  static std::size_t checked_size(int w, int h) {
    if (w <= 0 || h <= 0) throw DimensionError("image dimensions must be positive");
    return static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<uint8_t> data_;
};

// Signed 16-bit map with the same layout as Image8.
struct Map16 {
  int width = 0;
  int height = 0;
  std::vector<int16_t> data;

  int16_t operator()(int x, int y) const noexcept { return data[static_cast<std::size_t>(y) * width + x]; }
  int16_t& operator()(int x, int y) noexcept { return data[static_cast<std::size_t>(y) * width + x]; }
};

struct GradientPair {
  Map16 ix;
  Map16 iy;
};

// Feature correspondence between consecutive frames, pixel coordinates with
// the origin at the image center (x right, y down).
struct TrackedMatch {
  double px = 0.0, py = 0.0;
  double cx = 0.0, cy = 0.0;
};

inline double center_x(int x, int width) { return x - width / 2.0; }
inline double center_y(int y, int height) { return y - height / 2.0; }

}  // namespace dvio

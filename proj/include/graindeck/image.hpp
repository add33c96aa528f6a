#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace graindeck {

using Rgb = std::array<std::uint8_t, 3>;

/// Interleaved 8-bit RGB image, row-major.
class Image {
 public:
  Image() = default;
  Image(int height, int width, Rgb fill = {0, 0, 0});

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  bool empty() const noexcept { return height_ == 0 || width_ == 0; }

  std::uint8_t& at(int row, int col, int channel) {
    return data_[(static_cast<std::size_t>(row) * width_ + col) * 3 + channel];
  }
  std::uint8_t at(int row, int col, int channel) const {
    return data_[(static_cast<std::size_t>(row) * width_ + col) * 3 + channel];
  }
  Rgb pixel(int row, int col) const;
  void set_pixel(int row, int col, Rgb value);

  std::span<std::uint8_t> data() noexcept { return data_; }
  std::span<const std::uint8_t> data() const noexcept { return data_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> data_;
};

/// Single-channel 8-bit map. Binary masks hold 0/1.
class Mask {
 public:
  Mask() = default;
  Mask(int height, int width, std::uint8_t fill = 0);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }

  std::uint8_t& at(int row, int col) { return data_[static_cast<std::size_t>(row) * width_ + col]; }
  std::uint8_t at(int row, int col) const {
    return data_[static_cast<std::size_t>(row) * width_ + col];
  }

  std::span<std::uint8_t> data() noexcept { return data_; }
  std::span<const std::uint8_t> data() const noexcept { return data_; }

  std::size_t count_nonzero() const noexcept;

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> data_;
};

/// Single-channel float map (probabilities, resampling intermediates).
struct FloatMap {
  int height = 0;
  int width = 0;
  std::vector<float> values;

  FloatMap() = default;
  FloatMap(int h, int w, float fill = 0.0f)
      : height(h), width(w), values(static_cast<std::size_t>(h) * w, fill) {}

  float& at(int row, int col) { return values[static_cast<std::size_t>(row) * width + col]; }
  float at(int row, int col) const { return values[static_cast<std::size_t>(row) * width + col]; }
};

std::string shape_string(int height, int width);

/// Per-channel median over the outermost ring of pixels.
Rgb border_median(const Image& image);

/// Center-aligned bilinear resampling to (height, width).
Image resize_bilinear(const Image& image, int height, int width);
FloatMap resize_bilinear(const FloatMap& map, int height, int width);

/// Centers the image on a square canvas of side max(h, w) filled with `fill`.
Image pad_to_square(const Image& image, Rgb fill);

/// Half-open crop [row0, row1) x [col0, col1).
Image crop(const Image& image, int row0, int col0, int row1, int col1);

}  // namespace graindeck

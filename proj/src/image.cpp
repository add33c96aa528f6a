#include "graindeck/image.hpp"

#include <algorithm>
#include <cmath>

#include "graindeck/error.hpp"

namespace graindeck {

Image::Image(int height, int width, Rgb fill)
    : height_(height), width_(width), data_(static_cast<std::size_t>(height) * width * 3) {
  if (height < 0 || width < 0) throw ConfigError("negative image size");
  for (std::size_t i = 0; i < data_.size(); i += 3) {
    data_[i] = fill[0];
    data_[i + 1] = fill[1];
    data_[i + 2] = fill[2];
  }
}

Rgb Image::pixel(int row, int col) const {
  const std::size_t i = (static_cast<std::size_t>(row) * width_ + col) * 3;
  return {data_[i], data_[i + 1], data_[i + 2]};
}

void Image::set_pixel(int row, int col, Rgb value) {
  const std::size_t i = (static_cast<std::size_t>(row) * width_ + col) * 3;
  data_[i] = value[0];
  data_[i + 1] = value[1];
  data_[i + 2] = value[2];
}

Mask::Mask(int height, int width, std::uint8_t fill)
    : height_(height), width_(width), data_(static_cast<std::size_t>(height) * width, fill) {
  if (height < 0 || width < 0) throw ConfigError("negative mask size");
}

std::size_t Mask::count_nonzero() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(data_.begin(), data_.end(), [](std::uint8_t v) { return v != 0; }));
}

std::string shape_string(int height, int width) {
  return std::to_string(height) + "x" + std::to_string(width);
}

Rgb border_median(const Image& image) {
  if (image.empty()) return {0, 0, 0};
  std::array<std::vector<std::uint8_t>, 3> ring;
  auto push = [&](int r, int c) {
    for (int ch = 0; ch < 3; ++ch) ring[ch].push_back(image.at(r, c, ch));
  };
  const int h = image.height();
  const int w = image.width();
  for (int c = 0; c < w; ++c) {
    push(0, c);
    if (h > 1) push(h - 1, c);
  }
  for (int r = 1; r + 1 < h; ++r) {
    push(r, 0);
    if (w > 1) push(r, w - 1);
  }
  Rgb out{};
  for (int ch = 0; ch < 3; ++ch) {
    auto& v = ring[ch];
    auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    out[ch] = *mid;
  }
  return out;
}

namespace {

struct Tap {
  int i0;
  int i1;
  float t;
};

// Center-aligned sample positions for one axis.
std::vector<Tap> make_taps(int src, int dst) {
  std::vector<Tap> taps(static_cast<std::size_t>(dst));
  const double ratio = static_cast<double>(src) / dst;
  for (int i = 0; i < dst; ++i) {
    double x = (i + 0.5) * ratio - 0.5;
    x = std::clamp(x, 0.0, static_cast<double>(src - 1));
    const int i0 = static_cast<int>(std::floor(x));
    const int i1 = std::min(i0 + 1, src - 1);
    taps[i] = {i0, i1, static_cast<float>(x - i0)};
  }
  return taps;
}

}  // namespace

Image resize_bilinear(const Image& image, int height, int width) {
  if (height <= 0 || width <= 0) throw ConfigError("resize target must be positive");
  if (image.height() == height && image.width() == width) return image;
  const auto ty = make_taps(image.height(), height);
  const auto tx = make_taps(image.width(), width);
  Image out(height, width);
  for (int r = 0; r < height; ++r) {
    const Tap& y = ty[r];
    for (int c = 0; c < width; ++c) {
      const Tap& x = tx[c];
      for (int ch = 0; ch < 3; ++ch) {
        const float top = image.at(y.i0, x.i0, ch) * (1 - x.t) + image.at(y.i0, x.i1, ch) * x.t;
        const float bot = image.at(y.i1, x.i0, ch) * (1 - x.t) + image.at(y.i1, x.i1, ch) * x.t;
        const float v = top * (1 - y.t) + bot * y.t;
        out.at(r, c, ch) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return out;
}

FloatMap resize_bilinear(const FloatMap& map, int height, int width) {
  if (height <= 0 || width <= 0) throw ConfigError("resize target must be positive");
  if (map.height == height && map.width == width) return map;
  const auto ty = make_taps(map.height, height);
  const auto tx = make_taps(map.width, width);
  FloatMap out(height, width);
  for (int r = 0; r < height; ++r) {
    const Tap& y = ty[r];
    for (int c = 0; c < width; ++c) {
      const Tap& x = tx[c];
      const float top = map.at(y.i0, x.i0) * (1 - x.t) + map.at(y.i0, x.i1) * x.t;
      const float bot = map.at(y.i1, x.i0) * (1 - x.t) + map.at(y.i1, x.i1) * x.t;
      out.at(r, c) = top * (1 - y.t) + bot * y.t;
    }
  }
  return out;
}

Image pad_to_square(const Image& image, Rgb fill) {
  const int side = std::max(image.height(), image.width());
  if (image.height() == side && image.width() == side) return image;
  Image out(side, side, fill);
  const int r0 = (side - image.height()) / 2;
  const int c0 = (side - image.width()) / 2;
  for (int r = 0; r < image.height(); ++r) {
    for (int c = 0; c < image.width(); ++c) out.set_pixel(r + r0, c + c0, image.pixel(r, c));
  }
  return out;
}

Image crop(const Image& image, int row0, int col0, int row1, int col1) {
  if (row0 < 0 || col0 < 0 || row1 > image.height() || col1 > image.width() || row0 >= row1 ||
      col0 >= col1) {
    throw ShapeError("crop box outside image " + shape_string(image.height(), image.width()));
  }
  Image out(row1 - row0, col1 - col0);
  for (int r = row0; r < row1; ++r) {
    for (int c = col0; c < col1; ++c) out.set_pixel(r - row0, c - col0, image.pixel(r, c));
  }
  return out;
}

}  // namespace graindeck

#include "graindeck/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "graindeck/error.hpp"

namespace graindeck::augment {

void AugmentConfig::validate() const {
  if (!(rotation_min <= rotation_max)) throw ConfigError("rotation interval is reversed");
  if (!(scale_min <= scale_max) || scale_min <= 0.0) {
    throw ConfigError("scale interval must be positive and ordered");
  }
  for (double p : {hflip_prob, vflip_prob}) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("flip probabilities must lie in [0, 1]");
  }
  if (quarter_turns.empty()) throw ConfigError("quarter_turns must not be empty");
  for (int q : quarter_turns) {
    if (q % 90 != 0) throw ConfigError("quarter turns must be multiples of 90 degrees");
  }
}

AugmentConfig AugmentConfig::identity() {
  AugmentConfig c;
  c.rotation_min = c.rotation_max = 0.0;
  c.quarter_turns = {0};
  c.scale_min = c.scale_max = 1.0;
  c.hflip_prob = c.vflip_prob = 0.0;
  return c;
}

Image flip(const Image& image, Axis axis) {
  const int h = image.height();
  const int w = image.width();
  Image out(h, w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const int sr = axis == Axis::Vertical ? h - 1 - r : r;
      const int sc = axis == Axis::Horizontal ? w - 1 - c : c;
      out.set_pixel(r, c, image.pixel(sr, sc));
    }
  }
  return out;
}

namespace {

Image rotate_quarter(const Image& image, int quarters) {
  quarters = ((quarters % 4) + 4) % 4;
  const int h = image.height();
  const int w = image.width();
  switch (quarters) {
    case 0:
      return image;
    case 2: {
      Image out(h, w);
      for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) out.set_pixel(r, c, image.pixel(h - 1 - r, w - 1 - c));
      }
      return out;
    }
    case 1: {
      Image out(w, h);
      for (int r = 0; r < w; ++r) {
        for (int c = 0; c < h; ++c) out.set_pixel(r, c, image.pixel(c, w - 1 - r));
      }
      return out;
    }
    default: {
      Image out(w, h);
      for (int r = 0; r < w; ++r) {
        for (int c = 0; c < h; ++c) out.set_pixel(r, c, image.pixel(h - 1 - c, r));
      }
      return out;
    }
  }
}

bool is_quarter_multiple(double degrees, int& quarters) {
  const double q = degrees / 90.0;
  const double rq = std::round(q);
  if (std::abs(q - rq) > 1e-12) return false;
  quarters = static_cast<int>(std::fmod(rq, 4.0));
  return true;
}

}  // namespace

Image rotate_on_canvas(const Image& image, double degrees, Rgb fill) {
  const int h = image.height();
  const int w = image.width();
  const double theta = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(theta);
  const double sn = std::sin(theta);
  const double cy = (h - 1) / 2.0;
  const double cx = (w - 1) / 2.0;
  constexpr double kSnap = 1e-6;
  Image out(h, w, fill);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double dy = r - cy;
      const double dx = c - cx;
      double sy = cy + dx * sn + dy * cs;
      double sx = cx + dx * cs - dy * sn;
      if (sy < -kSnap || sx < -kSnap || sy > h - 1 + kSnap || sx > w - 1 + kSnap) continue;
      sy = std::clamp(sy, 0.0, static_cast<double>(h - 1));
      sx = std::clamp(sx, 0.0, static_cast<double>(w - 1));
      const int y0 = static_cast<int>(std::floor(sy));
      const int x0 = static_cast<int>(std::floor(sx));
      const int y1 = std::min(y0 + 1, h - 1);
      const int x1 = std::min(x0 + 1, w - 1);
      const double ty = sy - y0;
      const double tx = sx - x0;
      for (int ch = 0; ch < 3; ++ch) {
        const double top = image.at(y0, x0, ch) * (1 - tx) + image.at(y0, x1, ch) * tx;
        const double bot = image.at(y1, x0, ch) * (1 - tx) + image.at(y1, x1, ch) * tx;
        const double v = top * (1 - ty) + bot * ty;
        out.at(r, c, ch) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return out;
}

Image rotate(const Image& image, double degrees) {
  int quarters = 0;
  if (is_quarter_multiple(degrees, quarters)) return rotate_quarter(image, quarters);
  return rotate_on_canvas(image, degrees, border_median(image));
}

Image scale(const Image& image, double factor) {
  if (!(factor > 0.0)) throw ConfigError("scale factor must be positive");
  if (factor == 1.0) return image;
  const int h = image.height();
  const int w = image.width();
  const int sh = std::max(1, static_cast<int>(std::lround(h * factor)));
  const int sw = std::max(1, static_cast<int>(std::lround(w * factor)));
  const Image resized = resize_bilinear(image, sh, sw);
  Image out(h, w, border_median(image));
  // Centre alignment: offset of the resized image inside the output canvas
  // (negative when cropping).
  const int r_off = (h - sh) / 2;
  const int c_off = (w - sw) / 2;
  for (int r = 0; r < h; ++r) {
    const int sr = r - r_off;
    if (sr < 0 || sr >= sh) continue;
    for (int c = 0; c < w; ++c) {
      const int sc = c - c_off;
      if (sc < 0 || sc >= sw) continue;
      out.set_pixel(r, c, resized.pixel(sr, sc));
    }
  }
  return out;
}

AugmentDraw draw(const AugmentConfig& config, Rng& rng) {
  AugmentDraw d;
  // Always consume the same number of draws so streams stay aligned.
  d.scale = rng.uniform(config.scale_min, config.scale_max);
  d.quarter_turn = config.quarter_turns[rng.index(config.quarter_turns.size())];
  d.angle = rng.uniform(config.rotation_min, config.rotation_max);
  d.hflip = rng.bernoulli(config.hflip_prob);
  d.vflip = rng.bernoulli(config.vflip_prob);
  if (config.scale_min == config.scale_max) d.scale = config.scale_min;
  if (config.rotation_min == config.rotation_max) d.angle = config.rotation_min;
  return d;
}

Image apply(const Image& image, const AugmentDraw& params) {
  Image out = scale(image, params.scale);
  const bool square = out.height() == out.width();
  const int quarters = ((params.quarter_turn / 90) % 4 + 4) % 4;
  if (square || quarters % 2 == 0) {
    out = rotate_quarter(out, quarters);
    if (params.angle != 0.0) out = rotate_on_canvas(out, params.angle, border_median(out));
  } else {
    // An odd quarter turn would transpose a non-square canvas.
    out = rotate_on_canvas(out, params.quarter_turn + params.angle, border_median(out));
  }
  if (params.hflip) out = flip(out, Axis::Horizontal);
  if (params.vflip) out = flip(out, Axis::Vertical);
  return out;
}

LabeledImage random_augment(const LabeledImage& sample, const AugmentConfig& config, Rng& rng) {
  config.validate();
  const AugmentDraw d = draw(config, rng);
  return {apply(sample.pixels, d), sample.label, sample.source_id};
}

}  // namespace graindeck::augment

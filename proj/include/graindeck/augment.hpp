#pragma once

#include <cstdint>
#include <vector>

#include "graindeck/corpus.hpp"
#include "graindeck/image.hpp"
#include "graindeck/rng.hpp"

namespace graindeck::augment {

enum class Axis { Horizontal, Vertical };

struct AugmentConfig {
  double rotation_min = -15.0;
  double rotation_max = 15.0;
  /// Quarter turns drawn uniformly, in degrees (multiples of 90).
  std::vector<int> quarter_turns{0, 90, 180, 270};
  double scale_min = 0.9;
  double scale_max = 1.1;
  double hflip_prob = 0.5;
  double vflip_prob = 0.5;
  std::uint64_t seed = 0;

  /// Throws ConfigError on reversed intervals, probabilities outside [0,1],
  /// non-positive scales or quarter turns that are not multiples of 90.
  void validate() const;

  /// Configuration under which random_augment is the identity.
  static AugmentConfig identity();
};

/// Parameters of one augmentation draw.
struct AugmentDraw {
  double scale = 1.0;
  int quarter_turn = 0;
  double angle = 0.0;
  bool hflip = false;
  bool vflip = false;
};

/// Horizontal mirrors columns, vertical mirrors rows.
Image flip(const Image& image, Axis axis);

/// Counter-clockwise rotation. Multiples of 90 degrees are exact pixel
/// permutations (90/270 swap height and width); other angles resample
/// bilinearly onto the same canvas, filling with the border median.
Image rotate(const Image& image, double degrees);

/// Bilinear rotation about the canvas centre, keeping the shape.
Image rotate_on_canvas(const Image& image, double degrees, Rgb fill);

/// Bilinear resample by `factor`, then centre-crop or pad (border-median
/// fill) back to the original shape. Throws ConfigError when factor <= 0.
Image scale(const Image& image, double factor);

AugmentDraw draw(const AugmentConfig& config, Rng& rng);

/// flip ∘ rotate ∘ scale with the given parameters. Output shape equals
/// input shape.
Image apply(const Image& image, const AugmentDraw& params);

LabeledImage random_augment(const LabeledImage& sample, const AugmentConfig& config, Rng& rng);

}  // namespace graindeck::augment

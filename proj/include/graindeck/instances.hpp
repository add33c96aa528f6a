#pragma once

#include <cstdint>
#include <vector>

#include "graindeck/image.hpp"

namespace graindeck::instances {

enum class Connectivity : int { Four = 4, Eight = 8 };

/// Label map: 0 for background, components numbered 1..count in the raster
/// order of their first pixel.
struct LabelMap {
  int height = 0;
  int width = 0;
  int count = 0;
  std::vector<std::int32_t> labels;

  std::int32_t at(int row, int col) const {
    return labels[static_cast<std::size_t>(row) * width + col];
  }
};

/// Half-open box [row0, row1) x [col0, col1).
struct BoundingBox {
  int row0 = 0;
  int col0 = 0;
  int row1 = 0;
  int col1 = 0;

  int height() const noexcept { return row1 - row0; }
  int width() const noexcept { return col1 - col0; }
  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct ExtractParams {
  Connectivity connectivity = Connectivity::Eight;
  int min_area = 30;
  int pad = 4;

  /// Throws ConfigError when min_area < 1 or pad < 0.
  void validate() const;
};

struct GrainInstance {
  int component_id = 0;
  std::int64_t pixel_count = 0;
  BoundingBox bounding_box;  // tight box of the component, before padding
  BoundingBox crop_box;      // padded and clamped to the image
  Image crop;
};

/// Any nonzero mask value is foreground.
LabelMap connected_components(const Mask& mask, Connectivity connectivity);

/// Splits the foreground into per-component crops. Components smaller than
/// `min_area` are dropped; pixels inside a crop that do not belong to the
/// component are replaced by the median of the crop's background border.
/// Throws ShapeError when image and mask differ in shape.
std::vector<GrainInstance> extract_grains(const Image& image, const Mask& mask,
                                          const ExtractParams& params);

}  // namespace graindeck::instances

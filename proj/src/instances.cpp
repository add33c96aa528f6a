#include "graindeck/instances.hpp"

#include <algorithm>
#include <array>
#include <limits>

#include "graindeck/error.hpp"

namespace graindeck::instances {

void ExtractParams::validate() const {
  if (connectivity != Connectivity::Four && connectivity != Connectivity::Eight) {
    throw ConfigError("connectivity must be 4 or 8");
  }
  if (min_area < 1) throw ConfigError("min_area must be at least 1");
  if (pad < 0) throw ConfigError("pad must be non-negative");
}

LabelMap connected_components(const Mask& mask, Connectivity connectivity) {
  LabelMap out;
  out.height = mask.height();
  out.width = mask.width();
  out.labels.assign(static_cast<std::size_t>(out.height) * out.width, 0);

  static constexpr std::array<std::array<int, 2>, 8> kOffsets = {{
      {-1, 0}, {1, 0}, {0, -1}, {0, 1}, {-1, -1}, {-1, 1}, {1, -1}, {1, 1},
  }};
  const int neighbours = connectivity == Connectivity::Eight ? 8 : 4;

  std::vector<std::size_t> stack;
  const auto src = mask.data();
  for (int r = 0; r < out.height; ++r) {
    for (int c = 0; c < out.width; ++c) {
      const std::size_t seed = static_cast<std::size_t>(r) * out.width + c;
      if (src[seed] == 0 || out.labels[seed] != 0) continue;
      const std::int32_t label = ++out.count;
      out.labels[seed] = label;
      stack.push_back(seed);
      while (!stack.empty()) {
        const std::size_t p = stack.back();
        stack.pop_back();
        const int pr = static_cast<int>(p / out.width);
        const int pc = static_cast<int>(p % out.width);
        for (int k = 0; k < neighbours; ++k) {
          const int nr = pr + kOffsets[k][0];
          const int nc = pc + kOffsets[k][1];
          if (nr < 0 || nc < 0 || nr >= out.height || nc >= out.width) continue;
          const std::size_t q = static_cast<std::size_t>(nr) * out.width + nc;
          if (src[q] != 0 && out.labels[q] == 0) {
            out.labels[q] = label;
            stack.push_back(q);
          }
        }
      }
    }
  }
  return out;
}

namespace {

std::uint8_t median_of(std::vector<std::uint8_t>& v) {
  auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

// Median colour of the crop border, preferring pixels that are background
// in the mask; falls back to the full border when the crop is saturated.
Rgb crop_fill(const Image& image, const Mask& mask, const BoundingBox& box) {
  std::array<std::vector<std::uint8_t>, 3> bg;
  std::array<std::vector<std::uint8_t>, 3> all;
  auto visit = [&](int r, int c) {
    for (int ch = 0; ch < 3; ++ch) {
      all[ch].push_back(image.at(r, c, ch));
      if (mask.at(r, c) == 0) bg[ch].push_back(image.at(r, c, ch));
    }
  };
  for (int c = box.col0; c < box.col1; ++c) {
    visit(box.row0, c);
    if (box.row1 - 1 > box.row0) visit(box.row1 - 1, c);
  }
  for (int r = box.row0 + 1; r + 1 < box.row1; ++r) {
    visit(r, box.col0);
    if (box.col1 - 1 > box.col0) visit(r, box.col1 - 1);
  }
  auto& src = bg[0].empty() ? all : bg;
  return {median_of(src[0]), median_of(src[1]), median_of(src[2])};
}

}  // namespace

std::vector<GrainInstance> extract_grains(const Image& image, const Mask& mask,
                                          const ExtractParams& params) {
  params.validate();
  if (image.height() != mask.height() || image.width() != mask.width()) {
    throw ShapeError("image " + shape_string(image.height(), image.width()) + " vs mask " +
                     shape_string(mask.height(), mask.width()));
  }
  const LabelMap labels = connected_components(mask, params.connectivity);

  struct Accum {
    std::int64_t count = 0;
    BoundingBox box{std::numeric_limits<int>::max(), std::numeric_limits<int>::max(), 0, 0};
  };
  std::vector<Accum> acc(static_cast<std::size_t>(labels.count) + 1);
  for (int r = 0; r < labels.height; ++r) {
    for (int c = 0; c < labels.width; ++c) {
      const auto l = labels.at(r, c);
      if (l == 0) continue;
      Accum& a = acc[static_cast<std::size_t>(l)];
      ++a.count;
      a.box.row0 = std::min(a.box.row0, r);
      a.box.col0 = std::min(a.box.col0, c);
      a.box.row1 = std::max(a.box.row1, r + 1);
      a.box.col1 = std::max(a.box.col1, c + 1);
    }
  }

  std::vector<GrainInstance> out;
  for (int id = 1; id <= labels.count; ++id) {
    const Accum& a = acc[static_cast<std::size_t>(id)];
    if (a.count < params.min_area) continue;
    GrainInstance g;
    g.component_id = id;
    g.pixel_count = a.count;
    g.bounding_box = a.box;
    g.crop_box = {std::max(0, a.box.row0 - params.pad), std::max(0, a.box.col0 - params.pad),
                  std::min(image.height(), a.box.row1 + params.pad),
                  std::min(image.width(), a.box.col1 + params.pad)};
    const Rgb fill = crop_fill(image, mask, g.crop_box);
    g.crop = crop(image, g.crop_box.row0, g.crop_box.col0, g.crop_box.row1, g.crop_box.col1);
    for (int r = g.crop_box.row0; r < g.crop_box.row1; ++r) {
      for (int c = g.crop_box.col0; c < g.crop_box.col1; ++c) {
        if (labels.at(r, c) != id) g.crop.set_pixel(r - g.crop_box.row0, c - g.crop_box.col0, fill);
      }
    }
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace graindeck::instances

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include "graindeck/corpus.hpp"
#include "graindeck/image.hpp"
#include "graindeck/variety.hpp"

namespace graindeck::synth {

/// Visual parameters of one synthetic variety. Axes are full lengths in
/// pixels; `curvature` bends the grain along its major axis.
struct GrainStyle {
  RiceVariety variety = RiceVariety::AliKazemi;
  double major_axis = 24.0;
  double minor_axis = 9.0;
  Rgb base_color{220, 220, 220};
  double speckle_density = 0.0;
  double curvature = 0.0;

  /// Throws ConfigError unless major > minor > 0 and the fractions are in
  /// range.
  void validate() const;
};

/// Minimum pairwise separation between styles: two styles are separated
/// when their mean foreground colours differ by at least `mean_color`
/// (Euclidean, 8-bit RGB) or their axis ratios by at least `axis_ratio`.
struct SeparationFloor {
  double mean_color = 20.0;
  double axis_ratio = 0.3;
};

struct StyleSet {
  std::array<GrainStyle, kNumVarieties> styles;
  Rgb background{58, 62, 72};
  int background_noise = 10;  // uniform amplitude per channel
  SeparationFloor separation;

  const GrainStyle& of(RiceVariety v) const { return styles[static_cast<std::size_t>(index_of(v))]; }
  void validate() const;
};

/// The checked-in default styles (identical to data/styles.json).
const StyleSet& default_styles();

StyleSet styles_from_json(const std::string& text);
std::string styles_to_json(const StyleSet& set);
StyleSet load_styles(const std::filesystem::path& path);

struct RenderedGrain {
  LabeledImage image;
  Mask coverage;  // 1 where the grain renderer wrote a pixel
};

/// One grain, randomly rotated with jittered axes, on a noisy square canvas
/// framed around its footprint (side >= 32). Pure function of its inputs.
RenderedGrain render_grain(const GrainStyle& style, std::uint64_t seed,
                           const StyleSet& set = default_styles());

LabeledImage gen_grain(const GrainStyle& style, std::uint64_t seed,
                       const StyleSet& set = default_styles());

struct SceneSpec {
  int height = 128;
  int width = 128;
  CompositionCounts counts;
  bool allow_touching = false;
  std::uint64_t seed = 0;
  /// When touching is disallowed, grains stay at least this many background
  /// pixels apart (Chebyshev).
  int min_gap = 3;
  /// Placement attempts per grain before giving up.
  int max_attempts = 4000;

  /// Throws ConfigError for canvases below 128x128, negative counts or an
  /// empty scene.
  void validate() const;
  int total() const;
};

/// Renders a bulk scene. The mask is exactly the union of grain footprints
/// and `composition` equals `spec.counts`. Throws CapacityError when the
/// grains cannot be placed.
BulkSample gen_bulk_scene(const SceneSpec& spec, const StyleSet& set = default_styles());

/// Ranges for randomly composed scenes.
struct SceneMix {
  int min_grains = 8;
  int max_grains = 12;
  int min_varieties = 2;
  int max_varieties = 4;

  void validate() const;
};

/// Draws a variety subset and grain total from `mix` and spreads the grains
/// over the chosen varieties (each gets at least one).
CompositionCounts random_composition(const SceneMix& mix, std::uint64_t seed);

/// gen_bulk_scene on a random composition. A placement failure is retried
/// with derived seeds (same composition) a few times before the
/// CapacityError propagates.
BulkSample gen_random_scene(const SceneMix& mix, int height, int width, bool allow_touching,
                            std::uint64_t seed, const StyleSet& set = default_styles());

}  // namespace graindeck::synth

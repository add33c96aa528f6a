#pragma once

#include <array>
#include <string>
#include <vector>

#include <json.hpp>

#include "graindeck/classifier.hpp"
#include "graindeck/corpus.hpp"
#include "graindeck/instances.hpp"
#include "graindeck/segmenter.hpp"

namespace graindeck::bulk {

struct GrainPrediction {
  instances::BoundingBox bbox;
  RiceVariety variety = RiceVariety::AliKazemi;
  double confidence = 0.0;  // max class probability
};

struct CompositionReport {
  std::array<int, kNumVarieties> counts{};
  /// counts / total, or all zero when total is 0.
  std::array<double, kNumVarieties> fractions{};
  int total = 0;
  /// Sorted by (row0, col0, row1, col1).
  std::vector<GrainPrediction> grains;
};

struct CompositionError {
  /// predicted - true, per variety.
  std::array<int, kNumVarieties> count_delta{};
  /// Σ |predicted fraction - true fraction|, in [0, 2].
  double l1_fraction_error = 0.0;
};

/// Builds counts, total and fractions from per-grain predictions. The result
/// does not depend on the order of `grains`.
CompositionReport aggregate(std::vector<GrainPrediction> grains);

/// Report with the given counts and no per-grain entries.
CompositionReport report_from_counts(const CompositionCounts& counts);

/// Segment, binarize at `threshold`, extract instances, classify each crop.
CompositionReport predict_bulk(const Image& image, const segmenter::Segmenter& segmenter_model,
                               const classifier::Classifier& classifier_model,
                               const instances::ExtractParams& params, double threshold);

/// Throws DataError on negative truth counts. A zero truth total gives all
/// true fractions 0.
CompositionError compare_composition(const CompositionReport& report,
                                     const CompositionCounts& truth);

/// {counts, fractions, total, grains: [{bbox: [row0, col0, row1, col1],
/// variety, confidence}]}
nlohmann::ordered_json to_json(const CompositionReport& report);
nlohmann::ordered_json to_json(const CompositionError& error);

/// One "Variety  count  percent" line per variety, percentages to 1 decimal.
std::string render(const CompositionReport& report);

}  // namespace graindeck::bulk

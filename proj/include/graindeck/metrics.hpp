#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "graindeck/image.hpp"
#include "graindeck/variety.hpp"
#include "json.hpp"

namespace graindeck::metrics {

/// 7x7 count grid; rows are the true class, columns the predicted class.
class ConfusionMatrix {
 public:
  using Grid = std::array<std::array<std::int64_t, kNumVarieties>, kNumVarieties>;

  ConfusionMatrix() = default;
  /// Throws DataError on negative entries.
  explicit ConfusionMatrix(const Grid& counts);

  std::int64_t at(RiceVariety truth, RiceVariety predicted) const {
    return counts_[index_of(truth)][index_of(predicted)];
  }
  std::int64_t at(std::size_t row, std::size_t col) const { return counts_[row][col]; }
  void add(RiceVariety truth, RiceVariety predicted, std::int64_t n = 1);

  std::int64_t row_sum(std::size_t row) const;
  std::int64_t col_sum(std::size_t col) const;
  std::int64_t total() const;
  std::int64_t trace() const;
  const Grid& counts() const noexcept { return counts_; }

  /// CSV with a header row and a leading column of variety names.
  std::string to_csv() const;

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  Grid counts_{};
};

struct ClassStats {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::int64_t tn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

using ClassMetrics = std::array<ClassStats, kNumVarieties>;

struct MetricsSummary {
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  double weighted_precision = 0.0;
  double weighted_recall = 0.0;
  double weighted_f1 = 0.0;
};

/// Throws DataError on an empty list.
ConfusionMatrix confusion_from_predictions(
    std::span<const std::pair<RiceVariety, RiceVariety>> pairs);

/// Per-class one-vs-rest counts and P/R/F1. 0/0 ratios are defined as 0.
/// Throws DataError when the matrix is empty.
ClassMetrics class_metrics(const ConfusionMatrix& cm);

double accuracy(const ConfusionMatrix& cm);

/// Macro = unweighted class mean; weighted = mean weighted by row support.
MetricsSummary summary(const ConfusionMatrix& cm);

/// |A ∩ B| / |A ∪ B| over nonzero pixels; two empty masks give 1.
/// Throws ShapeError on mismatched shapes.
double iou(const Mask& a, const Mask& b);

struct DatasetIou {
  double mean_per_image = 0.0;
  double aggregate = 0.0;
};

/// Mean of per-image IoU and the pooled ratio Σ|∩| / Σ|∪|.
DatasetIou dataset_iou(std::span<const std::pair<Mask, Mask>> pairs);

/// The reference 446-observation confusion matrix for the seven varieties
/// (rows true, columns predicted).
ConfusionMatrix reference_confusion();

/// Per-class precision/recall/F1 published alongside the reference matrix,
/// rounded to two decimals, canonical class order.
struct RoundedRow {
  double precision;
  double recall;
  double f1;
};
std::array<RoundedRow, kNumVarieties> reference_class_table();

/// Round half away from zero to `decimals` places.
double round_to(double value, int decimals);

nlohmann::json to_json(const ClassMetrics& per_class, const MetricsSummary& s);

}  // namespace graindeck::metrics

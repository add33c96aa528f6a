#include "graindeck/metrics.hpp"

#include <cmath>
#include <sstream>

#include "graindeck/error.hpp"
#include "graindeck/fileutil.hpp"

namespace graindeck::metrics {

namespace {

double ratio(std::int64_t num, std::int64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

ConfusionMatrix::ConfusionMatrix(const Grid& counts) : counts_(counts) {
  for (const auto& row : counts_) {
    for (auto v : row) {
      if (v < 0) throw DataError("confusion matrix entries must be non-negative");
    }
  }
}

void ConfusionMatrix::add(RiceVariety truth, RiceVariety predicted, std::int64_t n) {
  auto& cell = counts_[index_of(truth)][index_of(predicted)];
  if (cell + n < 0) throw DataError("confusion matrix entries must be non-negative");
  cell += n;
}

std::int64_t ConfusionMatrix::row_sum(std::size_t row) const {
  std::int64_t s = 0;
  for (auto v : counts_[row]) s += v;
  return s;
}

std::int64_t ConfusionMatrix::col_sum(std::size_t col) const {
  std::int64_t s = 0;
  for (const auto& row : counts_) s += row[col];
  return s;
}

std::int64_t ConfusionMatrix::total() const {
  std::int64_t s = 0;
  for (std::size_t r = 0; r < kNumVarieties; ++r) s += row_sum(r);
  return s;
}

std::int64_t ConfusionMatrix::trace() const {
  std::int64_t s = 0;
  for (std::size_t i = 0; i < kNumVarieties; ++i) s += counts_[i][i];
  return s;
}

std::string ConfusionMatrix::to_csv() const {
  std::ostringstream out;
  out << "true\\predicted";
  for (auto v : kAllVarieties) out << ',' << name_of(v);
  out << '\n';
  for (std::size_t r = 0; r < kNumVarieties; ++r) {
    out << name_of(kAllVarieties[r]);
    for (auto v : counts_[r]) out << ',' << v;
    out << '\n';
  }
  return out.str();
}

ConfusionMatrix confusion_from_predictions(
    std::span<const std::pair<RiceVariety, RiceVariety>> pairs) {
  if (pairs.empty()) throw DataError("no predictions to tabulate");
  ConfusionMatrix cm;
  for (const auto& [truth, predicted] : pairs) cm.add(truth, predicted);
  return cm;
}

ClassMetrics class_metrics(const ConfusionMatrix& cm) {
  const std::int64_t total = cm.total();
  if (total <= 0) throw DataError("confusion matrix is empty");
  ClassMetrics out{};
  for (std::size_t c = 0; c < kNumVarieties; ++c) {
    ClassStats& s = out[c];
    s.tp = cm.at(c, c);
    s.fp = cm.col_sum(c) - s.tp;
    s.fn = cm.row_sum(c) - s.tp;
    s.tn = total - s.tp - s.fp - s.fn;
    s.precision = ratio(s.tp, s.tp + s.fp);
    s.recall = ratio(s.tp, s.tp + s.fn);
    const double pr = s.precision + s.recall;
    s.f1 = pr == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / pr;
  }
  return out;
}

double accuracy(const ConfusionMatrix& cm) {
  const std::int64_t total = cm.total();
  if (total <= 0) throw DataError("confusion matrix is empty");
  return ratio(cm.trace(), total);
}

MetricsSummary summary(const ConfusionMatrix& cm) {
  const ClassMetrics per = class_metrics(cm);
  const double total = static_cast<double>(cm.total());
  MetricsSummary s;
  s.accuracy = accuracy(cm);
  for (std::size_t c = 0; c < kNumVarieties; ++c) {
    const double w = static_cast<double>(cm.row_sum(c)) / total;
    s.macro_precision += per[c].precision;
    s.macro_recall += per[c].recall;
    s.macro_f1 += per[c].f1;
    s.weighted_precision += w * per[c].precision;
    s.weighted_recall += w * per[c].recall;
    s.weighted_f1 += w * per[c].f1;
  }
  const double k = static_cast<double>(kNumVarieties);
  s.macro_precision /= k;
  s.macro_recall /= k;
  s.macro_f1 /= k;
  return s;
}

namespace {

std::pair<std::int64_t, std::int64_t> overlap_union(const Mask& a, const Mask& b) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw ShapeError("IoU shape mismatch: " + shape_string(a.height(), a.width()) + " vs " +
                     shape_string(b.height(), b.width()));
  }
  std::int64_t inter = 0;
  std::int64_t uni = 0;
  const auto da = a.data();
  const auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) {
    const bool x = da[i] != 0;
    const bool y = db[i] != 0;
    inter += (x && y) ? 1 : 0;
    uni += (x || y) ? 1 : 0;
  }
  return {inter, uni};
}

}  // namespace

double iou(const Mask& a, const Mask& b) {
  const auto [inter, uni] = overlap_union(a, b);
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

DatasetIou dataset_iou(std::span<const std::pair<Mask, Mask>> pairs) {
  if (pairs.empty()) throw DataError("no mask pairs to evaluate");
  DatasetIou out;
  std::int64_t inter_sum = 0;
  std::int64_t union_sum = 0;
  for (const auto& [pred, truth] : pairs) {
    const auto [inter, uni] = overlap_union(pred, truth);
    out.mean_per_image += uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
    inter_sum += inter;
    union_sum += uni;
  }
  out.mean_per_image /= static_cast<double>(pairs.size());
  out.aggregate =
      union_sum == 0 ? 1.0 : static_cast<double>(inter_sum) / static_cast<double>(union_sum);
  return out;
}

ConfusionMatrix reference_confusion() {
  return ConfusionMatrix(ConfusionMatrix::Grid{{
      {36, 3, 5, 4, 11, 0, 0},
      {5, 56, 0, 5, 0, 0, 2},
      {6, 0, 34, 2, 12, 1, 6},
      {7, 6, 6, 37, 5, 0, 8},
      {10, 0, 2, 5, 44, 1, 4},
      {9, 4, 9, 1, 27, 5, 4},
      {10, 2, 3, 5, 11, 0, 33},
  }});
}

std::array<RoundedRow, kNumVarieties> reference_class_table() {
  return {{
      {0.43, 0.61, 0.51},
      {0.79, 0.82, 0.81},
      {0.58, 0.56, 0.57},
      {0.63, 0.54, 0.58},
      {0.40, 0.67, 0.50},
      {0.71, 0.08, 0.15},
      {0.58, 0.52, 0.55},
  }};
}

double round_to(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::round(value * scale) / scale;
}

nlohmann::json to_json(const ClassMetrics& per_class, const MetricsSummary& s) {
  nlohmann::json classes = nlohmann::json::object();
  for (std::size_t c = 0; c < kNumVarieties; ++c) {
    const ClassStats& k = per_class[c];
    classes[std::string(name_of(kAllVarieties[c]))] = {
        {"tp", k.tp},
        {"fp", k.fp},
        {"fn", k.fn},
        {"tn", k.tn},
        {"precision", round_sig6(k.precision)},
        {"recall", round_sig6(k.recall)},
        {"f1", round_sig6(k.f1)},
    };
  }
  return {
      {"accuracy", round_sig6(s.accuracy)},
      {"macro", {{"precision", round_sig6(s.macro_precision)},
                 {"recall", round_sig6(s.macro_recall)},
                 {"f1", round_sig6(s.macro_f1)}}},
      {"weighted", {{"precision", round_sig6(s.weighted_precision)},
                    {"recall", round_sig6(s.weighted_recall)},
                    {"f1", round_sig6(s.weighted_f1)}}},
      {"classes", classes},
  };
}

}  // namespace graindeck::metrics

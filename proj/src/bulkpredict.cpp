#include "graindeck/bulkpredict.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <tuple>

#include "graindeck/error.hpp"
#include "graindeck/fileutil.hpp"

namespace graindeck::bulk {

namespace {

void fill_fractions(CompositionReport& r) {
  r.total = 0;
  for (int c : r.counts) r.total += c;
  for (std::size_t i = 0; i < r.counts.size(); ++i) {
    r.fractions[i] = r.total > 0 ? static_cast<double>(r.counts[i]) / r.total : 0.0;
  }
}

auto box_key(const instances::BoundingBox& b) { return std::tie(b.row0, b.col0, b.row1, b.col1); }

}  // namespace

CompositionReport aggregate(std::vector<GrainPrediction> grains) {
  std::sort(grains.begin(), grains.end(), [](const GrainPrediction& a, const GrainPrediction& b) {
    return box_key(a.bbox) < box_key(b.bbox);
  });
  CompositionReport r;
  for (const auto& g : grains) ++r.counts[static_cast<std::size_t>(index_of(g.variety))];
  r.grains = std::move(grains);
  fill_fractions(r);
  return r;
}

CompositionReport report_from_counts(const CompositionCounts& counts) {
  CompositionReport r;
  for (const auto& [v, n] : counts) {
    if (n < 0) throw DataError("negative count for " + std::string(name_of(v)));
    r.counts[static_cast<std::size_t>(index_of(v))] = n;
  }
  fill_fractions(r);
  return r;
}

CompositionReport predict_bulk(const Image& image, const segmenter::Segmenter& segmenter_model,
                               const classifier::Classifier& classifier_model,
                               const instances::ExtractParams& params, double threshold) {
  params.validate();
  const Mask mask = segmenter::binarize(segmenter::predict_mask(segmenter_model, image), threshold);
  const auto found = instances::extract_grains(image, mask, params);
  std::vector<const Image*> crops;
  crops.reserve(found.size());
  for (const auto& g : found) crops.push_back(&g.crop);
  const auto probs = classifier::predict_batch(classifier_model, crops);
  std::vector<GrainPrediction> grains;
  grains.reserve(found.size());
  for (std::size_t i = 0; i < found.size(); ++i) {
    const RiceVariety v = classifier::predict_label(probs[i]);
    grains.push_back({found[i].bounding_box, v, probs[i].probs[static_cast<std::size_t>(index_of(v))]});
  }
  return aggregate(std::move(grains));
}

CompositionError compare_composition(const CompositionReport& report,
                                     const CompositionCounts& truth) {
  const CompositionReport t = report_from_counts(truth);
  CompositionError e;
  for (std::size_t i = 0; i < e.count_delta.size(); ++i) {
    e.count_delta[i] = report.counts[i] - t.counts[i];
    e.l1_fraction_error += std::abs(report.fractions[i] - t.fractions[i]);
  }
  return e;
}

nlohmann::ordered_json to_json(const CompositionReport& report) {
  nlohmann::ordered_json counts = nlohmann::ordered_json::object();
  nlohmann::ordered_json fractions = nlohmann::ordered_json::object();
  for (RiceVariety v : kAllVarieties) {
    const auto i = static_cast<std::size_t>(index_of(v));
    counts[std::string(name_of(v))] = report.counts[i];
    fractions[std::string(name_of(v))] = round_sig6(report.fractions[i]);
  }
  nlohmann::ordered_json grains = nlohmann::ordered_json::array();
  for (const auto& g : report.grains) {
    grains.push_back({{"bbox", {g.bbox.row0, g.bbox.col0, g.bbox.row1, g.bbox.col1}},
                      {"variety", std::string(name_of(g.variety))},
                      {"confidence", round_sig6(g.confidence)}});
  }
  nlohmann::ordered_json j;
  j["counts"] = std::move(counts);
  j["fractions"] = std::move(fractions);
  j["total"] = report.total;
  j["grains"] = std::move(grains);
  return j;
}

nlohmann::ordered_json to_json(const CompositionError& error) {
  nlohmann::ordered_json delta = nlohmann::ordered_json::object();
  for (RiceVariety v : kAllVarieties) {
    delta[std::string(name_of(v))] = error.count_delta[static_cast<std::size_t>(index_of(v))];
  }
  return {{"count_delta", delta}, {"l1_fraction_error", round_sig6(error.l1_fraction_error)}};
}

std::string render(const CompositionReport& report) {
  std::string out;
  char line[96];
  for (RiceVariety v : kAllVarieties) {
    const auto i = static_cast<std::size_t>(index_of(v));
    std::snprintf(line, sizeof line, "%-15s %4d %6.1f%%\n", std::string(name_of(v)).c_str(),
                  report.counts[i], report.fractions[i] * 100.0);
    out += line;
  }
  std::snprintf(line, sizeof line, "%-15s %4d\n", "total", report.total);
  out += line;
  return out;
}

}  // namespace graindeck::bulk

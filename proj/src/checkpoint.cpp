#include "graindeck/checkpoint.hpp"

#include <set>

#include "graindeck/error.hpp"
#include "graindeck/fileutil.hpp"
#include "graindeck/nn/weights_io.hpp"

namespace graindeck::checkpoint {

namespace {

void reject_unknown(const Json& j, const std::set<std::string>& known, const std::string& what) {
  if (!j.is_object()) throw ConfigError(what + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown " + what + " key '" + key + "'");
  }
}

template <typename V>
void read_key(const Json& j, const char* key, V& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<V>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config key '") + key + "' has the wrong type");
  }
}

Json class_order() {
  Json order = Json::array();
  for (RiceVariety v : kAllVarieties) order.push_back(std::string(name_of(v)));
  return order;
}

Json base_manifest(const char* kind, Json config, std::uint64_t seed, const Json& metrics) {
  Json m;
  m["format_version"] = kFormatVersion;
  m["model_kind"] = kind;
  m["config"] = std::move(config);
  m["class_order"] = class_order();
  m["training_seed"] = seed;
  m["metrics"] = metrics.is_null() ? Json::object() : metrics;
  m["weights"] = {{"file", kWeightsFile}, {"format", "GDWT"}, {"version", nn::kWeightsVersion}};
  return m;
}

Json checked_manifest(const std::filesystem::path& dir, const std::string& kind) {
  Json m = read_manifest(dir);
  if (m.value("format_version", 0) != kFormatVersion) {
    throw DataError(dir.string() + ": unsupported checkpoint format_version");
  }
  if (m.value("model_kind", std::string()) != kind) {
    throw DataError(dir.string() + ": expected a " + kind + " checkpoint, found model_kind '" +
                    m.value("model_kind", std::string()) + "'");
  }
  if (m.value("class_order", Json()) != class_order()) {
    throw DataError(dir.string() + ": class order differs from this build");
  }
  if (!m.contains("config")) throw DataError(dir.string() + ": manifest lacks config");
  return m;
}

}  // namespace

Json to_json(const classifier::ClassifierConfig& c) {
  Json j;
  j["input_size"] = c.input_size;
  j["stage_widths"] = c.stage_widths;
  j["blocks_per_stage"] = c.blocks_per_stage;
  j["num_classes"] = c.num_classes;
  j["head_only_epochs"] = c.head_only_epochs;
  j["stem_stride"] = c.stem_stride;
  return j;
}

Json to_json(const segmenter::SegmenterConfig& c) {
  Json j;
  j["input_size"] = c.input_size;
  j["depth"] = c.depth;
  j["base_channels"] = c.base_channels;
  j["threshold"] = c.threshold;
  return j;
}

classifier::ClassifierConfig classifier_config_from_json(const Json& j) {
  reject_unknown(j,
                 {"input_size", "stage_widths", "blocks_per_stage", "num_classes",
                  "head_only_epochs", "stem_stride"},
                 "classifier");
  classifier::ClassifierConfig c;
  read_key(j, "input_size", c.input_size);
  read_key(j, "stage_widths", c.stage_widths);
  read_key(j, "blocks_per_stage", c.blocks_per_stage);
  read_key(j, "num_classes", c.num_classes);
  read_key(j, "head_only_epochs", c.head_only_epochs);
  read_key(j, "stem_stride", c.stem_stride);
  c.validate();
  return c;
}

segmenter::SegmenterConfig segmenter_config_from_json(const Json& j) {
  reject_unknown(j, {"input_size", "depth", "base_channels", "threshold"}, "segmenter");
  segmenter::SegmenterConfig c;
  read_key(j, "input_size", c.input_size);
  read_key(j, "depth", c.depth);
  read_key(j, "base_channels", c.base_channels);
  read_key(j, "threshold", c.threshold);
  c.validate();
  return c;
}

Json read_manifest(const std::filesystem::path& dir) {
  const auto path = dir / kManifestFile;
  if (!std::filesystem::exists(path)) throw DataError(path.string() + " does not exist");
  try {
    return Json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void save_classifier(const std::filesystem::path& dir, classifier::Classifier& model,
                     std::uint64_t training_seed, const Json& metrics) {
  nn::save_weights(dir / kWeightsFile, model.state());
  const Json m = base_manifest("classifier", to_json(model.config()), training_seed, metrics);
  write_file_atomic(dir / kManifestFile, m.dump(2) + "\n");
}

void save_segmenter(const std::filesystem::path& dir, segmenter::Segmenter& model,
                    std::uint64_t training_seed, const Json& metrics) {
  nn::save_weights(dir / kWeightsFile, model.state());
  const Json m = base_manifest("segmenter", to_json(model.config()), training_seed, metrics);
  write_file_atomic(dir / kManifestFile, m.dump(2) + "\n");
}

classifier::Classifier load_classifier(const std::filesystem::path& dir) {
  const Json m = checked_manifest(dir, "classifier");
  classifier::Classifier model(classifier_config_from_json(m.at("config")), 0);
  nn::load_weights(dir / kWeightsFile, model.state());
  return model;
}

segmenter::Segmenter load_segmenter(const std::filesystem::path& dir) {
  const Json m = checked_manifest(dir, "segmenter");
  segmenter::Segmenter model(segmenter_config_from_json(m.at("config")), 0);
  nn::load_weights(dir / kWeightsFile, model.state());
  return model;
}

}  // namespace graindeck::checkpoint

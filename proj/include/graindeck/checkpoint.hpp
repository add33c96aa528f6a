#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "graindeck/classifier.hpp"
#include "graindeck/segmenter.hpp"

namespace graindeck::checkpoint {

// A checkpoint is a directory holding
//   manifest.json  {format_version, model_kind, config, class_order,
//                   training_seed, metrics, weights}
//   weights.bin    tensors in the layout described in nn/weights_io.hpp
// model_kind is "classifier" or "segmenter".

inline constexpr int kFormatVersion = 1;
inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kWeightsFile = "weights.bin";

using Json = nlohmann::ordered_json;

Json to_json(const classifier::ClassifierConfig& config);
Json to_json(const segmenter::SegmenterConfig& config);
/// Missing keys keep their defaults; unknown keys throw ConfigError.
classifier::ClassifierConfig classifier_config_from_json(const Json& j);
segmenter::SegmenterConfig segmenter_config_from_json(const Json& j);

void save_classifier(const std::filesystem::path& dir, classifier::Classifier& model,
                     std::uint64_t training_seed, const Json& metrics);
void save_segmenter(const std::filesystem::path& dir, segmenter::Segmenter& model,
                    std::uint64_t training_seed, const Json& metrics);

/// Throw DataError when the directory is not a checkpoint of that kind.
classifier::Classifier load_classifier(const std::filesystem::path& dir);
segmenter::Segmenter load_segmenter(const std::filesystem::path& dir);

Json read_manifest(const std::filesystem::path& dir);

}  // namespace graindeck::checkpoint

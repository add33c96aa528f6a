#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "graindeck/image.hpp"
#include "graindeck/variety.hpp"

namespace graindeck {

/// One single-grain photograph and its variety.
struct LabeledImage {
  Image pixels;
  RiceVariety label = RiceVariety::AliKazemi;
  std::string source_id;
};

using CompositionCounts = std::map<RiceVariety, int>;

/// A bulk photograph with its binary grain mask (0 background, 1 grain).
struct BulkSample {
  Image pixels;
  Mask mask;
  std::string source_id;
  std::optional<CompositionCounts> composition;
};

namespace corpus {

inline constexpr int kMinImageSide = 32;
inline constexpr int kMaskThreshold = 127;

/// Indices into the sample list handed to stratified_split.
struct DatasetSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
  std::uint64_t seed = 0;
  std::array<double, 3> ratios{0.70, 0.15, 0.15};
};

/// Reads `<root>/<VarietyName>/*.{png,jpg,jpeg}`. Exactly the seven
/// variety directories must exist. Items are ordered by (variety, file
/// name). Throws LayoutError or DataError naming the offending path.
std::vector<LabeledImage> load_grain_dataset(const std::filesystem::path& root);

/// Reads `<root>/images/<id>.png` paired with `<root>/masks/<id>.png` and the
/// optional `<root>/composition.json`. Masks are binarized at value > 127.
std::vector<BulkSample> load_bulk_dataset(const std::filesystem::path& root);

/// Writes `<root>/<Variety>/<Variety>_NNNN.png`, numbering each variety's
/// samples from 1 in the given order. Returns the written paths.
std::vector<std::filesystem::path> write_grain_dataset(const std::filesystem::path& root,
                                                       const std::vector<LabeledImage>& samples);

/// Writes images/, masks/ (0/255) and, when any sample carries one,
/// composition.json, keyed by source_id.
void write_bulk_dataset(const std::filesystem::path& root, const std::vector<BulkSample>& samples);

/// value > 127 -> 1, else 0.
Mask binarize_mask(const Mask& gray);

/// Per-class seeded shuffle followed by contiguous assignment into
/// train/validation/test. Each class contributes round(n * ratio) items to
/// validation and test (train takes the rest). Throws InsufficientDataError
/// when a class with nonzero validation or test share has fewer than 3
/// samples, ConfigError on invalid ratios.
DatasetSplit stratified_split(const std::vector<LabeledImage>& samples,
                              const std::array<double, 3>& ratios, std::uint64_t seed);

/// composition.json helpers: {"<id>": {"<Variety>": count, ...}, ...}
std::map<std::string, CompositionCounts> parse_composition(const std::string& json_text);
std::string composition_to_json(const std::map<std::string, CompositionCounts>& table);

}  // namespace corpus
}  // namespace graindeck

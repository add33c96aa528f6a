#include "graindeck/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "graindeck/error.hpp"
#include "graindeck/fileutil.hpp"
#include "graindeck/imageio.hpp"
#include "graindeck/rng.hpp"
#include "json.hpp"

namespace graindeck::corpus {

namespace fs = std::filesystem;

namespace {

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

std::vector<fs::path> sorted_image_files(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });
  return files;
}

void require_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw LayoutError("missing directory '" + dir.string() + "'");
}

}  // namespace

std::vector<LabeledImage> load_grain_dataset(const fs::path& root) {
  require_dir(root);
  std::set<std::string> present;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (!entry.is_directory()) continue;
    const std::string name = entry.path().filename().string();
    if (!parse_variety(name)) {
      throw LayoutError("unexpected class directory '" + name + "' in '" + root.string() + "'");
    }
    present.insert(name);
  }
  std::vector<std::string> missing;
  for (auto v : kAllVarieties) {
    if (!present.contains(std::string(name_of(v)))) missing.emplace_back(name_of(v));
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw LayoutError("missing class director" + std::string(missing.size() == 1 ? "y" : "ies") +
                      " in '" + root.string() + "': " + list);
  }

  std::vector<LabeledImage> out;
  for (auto v : kAllVarieties) {
    const fs::path dir = root / std::string(name_of(v));
    for (const auto& file : sorted_image_files(dir)) {
      LabeledImage item;
      item.pixels = read_image(file);
      if (item.pixels.height() < kMinImageSide || item.pixels.width() < kMinImageSide) {
        throw DataError("image '" + file.string() + "' is smaller than 32x32");
      }
      item.label = v;
      item.source_id = std::string(name_of(v)) + "/" + file.filename().string();
      out.push_back(std::move(item));
    }
  }
  return out;
}

Mask binarize_mask(const Mask& gray) {
  Mask out(gray.height(), gray.width());
  auto src = gray.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] > kMaskThreshold ? 1 : 0;
  return out;
}

std::vector<BulkSample> load_bulk_dataset(const fs::path& root) {
  const fs::path images_dir = root / "images";
  const fs::path masks_dir = root / "masks";
  require_dir(images_dir);
  require_dir(masks_dir);

  const auto images = sorted_image_files(images_dir);
  const auto masks = sorted_image_files(masks_dir);
  std::set<fs::path> mask_names;
  for (const auto& m : masks) mask_names.insert(m.filename());
  std::set<fs::path> image_names;
  for (const auto& i : images) image_names.insert(i.filename());
  for (const auto& i : images) {
    if (!mask_names.contains(i.filename())) {
      throw PairingError("image '" + i.string() + "' has no mask");
    }
  }
  for (const auto& m : masks) {
    if (!image_names.contains(m.filename())) {
      throw PairingError("mask '" + m.string() + "' has no image");
    }
  }

  std::map<std::string, CompositionCounts> composition;
  const fs::path comp_path = root / "composition.json";
  if (fs::exists(comp_path)) composition = parse_composition(read_file(comp_path));

  std::vector<BulkSample> out;
  for (const auto& path : images) {
    BulkSample s;
    s.pixels = read_image(path);
    const Mask gray = read_gray(masks_dir / path.filename());
    if (gray.height() != s.pixels.height() || gray.width() != s.pixels.width()) {
      throw ShapeError("mask for '" + path.filename().string() + "' is " +
                       shape_string(gray.height(), gray.width()) + " but image is " +
                       shape_string(s.pixels.height(), s.pixels.width()));
    }
    s.mask = binarize_mask(gray);
    s.source_id = path.stem().string();
    if (auto it = composition.find(s.source_id); it != composition.end()) {
      s.composition = it->second;
    }
    out.push_back(std::move(s));
  }
  return out;
}

DatasetSplit stratified_split(const std::vector<LabeledImage>& samples,
                              const std::array<double, 3>& ratios, std::uint64_t seed) {
  double sum = 0.0;
  int positive_parts = 0;
  for (double r : ratios) {
    if (!(r >= 0.0) || r > 1.0) throw ConfigError("split ratios must lie in [0, 1]");
    sum += r;
    positive_parts += r > 0.0 ? 1 : 0;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
  if (ratios[0] <= 0.0) throw ConfigError("train ratio must be positive");

  std::array<std::vector<std::size_t>, kNumVarieties> by_class;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    by_class[static_cast<std::size_t>(index_of(samples[i].label))].push_back(i);
  }

  DatasetSplit split;
  split.seed = seed;
  split.ratios = ratios;
  for (std::size_t c = 0; c < kNumVarieties; ++c) {
    auto& members = by_class[c];
    const std::size_t n = members.size();
    if (positive_parts > 1 && n < 3) {
      throw InsufficientDataError("class " + std::string(name_of(kAllVarieties[c])) + " has " +
                                  std::to_string(n) + " samples; at least 3 are required");
    }
    // Largest-remainder apportionment of n over the three parts. Ties in
    // the remainder alternate direction with the class index so totals stay
    // balanced.
    std::array<std::size_t, 3> counts{};
    std::array<double, 3> remainder{};
    std::size_t assigned = 0;
    for (int p = 0; p < 3; ++p) {
      const double ideal = static_cast<double>(n) * ratios[p];
      counts[p] = static_cast<std::size_t>(std::floor(ideal + 1e-9));
      remainder[p] = ideal - static_cast<double>(counts[p]);
      assigned += counts[p];
    }
    std::array<int, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      if (std::abs(remainder[a] - remainder[b]) > 1e-9) return remainder[a] > remainder[b];
      return c % 2 == 0 ? a < b : a > b;
    });
    for (int k = 0; assigned < n; ++k, ++assigned) ++counts[order[k % 3]];

    Rng rng(mix_seed(seed, c));
    rng.shuffle(std::span<std::size_t>(members));
    auto it = members.begin();
    auto take = [&](std::vector<std::size_t>& part, std::size_t k) {
      part.insert(part.end(), it, it + static_cast<std::ptrdiff_t>(k));
      it += static_cast<std::ptrdiff_t>(k);
    };
    take(split.train, counts[0]);
    take(split.validation, counts[1]);
    take(split.test, counts[2]);
  }
  return split;
}

std::map<std::string, CompositionCounts> parse_composition(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("composition.json: ") + e.what());
  }
  if (!j.is_object()) throw DataError("composition.json must be an object");
  std::map<std::string, CompositionCounts> out;
  for (const auto& [id, counts] : j.items()) {
    if (!counts.is_object()) throw DataError("composition for '" + id + "' must be an object");
    CompositionCounts c;
    for (const auto& [name, value] : counts.items()) {
      if (!value.is_number_integer() || value.get<int>() < 0) {
        throw DataError("composition count for '" + id + "/" + name +
                        "' must be a non-negative integer");
      }
      c[variety_from_name(name)] = value.get<int>();
    }
    out[id] = std::move(c);
  }
  return out;
}

std::string composition_to_json(const std::map<std::string, CompositionCounts>& table) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [id, counts] : table) {
    nlohmann::ordered_json c = nlohmann::ordered_json::object();
    for (const auto& [v, n] : counts) c[std::string(name_of(v))] = n;
    j[id] = std::move(c);
  }
  return j.dump(2) + "\n";
}

std::vector<fs::path> write_grain_dataset(const fs::path& root,
                                          const std::vector<LabeledImage>& samples) {
  std::array<int, kNumVarieties> next{};
  std::vector<fs::path> written;
  written.reserve(samples.size());
  for (RiceVariety v : kAllVarieties) fs::create_directories(root / std::string(name_of(v)));
  for (const auto& s : samples) {
    const std::string name(name_of(s.label));
    char file[64];
    std::snprintf(file, sizeof file, "%s_%04d.png", name.c_str(),
                  ++next[static_cast<std::size_t>(index_of(s.label))]);
    const fs::path path = root / name / file;
    write_png(path, s.pixels);
    written.push_back(path);
  }
  return written;
}

void write_bulk_dataset(const fs::path& root, const std::vector<BulkSample>& samples) {
  std::map<std::string, CompositionCounts> table;
  std::set<std::string> ids;
  fs::create_directories(root / "images");
  fs::create_directories(root / "masks");
  for (const auto& s : samples) {
    if (s.source_id.empty() || !ids.insert(s.source_id).second) {
      throw DataError("bulk samples need unique, non-empty source ids ('" + s.source_id + "')");
    }
    write_png(root / "images" / (s.source_id + ".png"), s.pixels);
    write_png(root / "masks" / (s.source_id + ".png"), s.mask, true);
    if (s.composition) table[s.source_id] = *s.composition;
  }
  if (!table.empty()) write_file_atomic(root / "composition.json", composition_to_json(table));
}

}  // namespace graindeck::corpus

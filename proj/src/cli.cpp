#include "graindeck/cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>

#include "graindeck/augment.hpp"
#include "graindeck/bulkpredict.hpp"
#include "graindeck/checkpoint.hpp"
#include "graindeck/classifier.hpp"
#include "graindeck/corpus.hpp"
#include "graindeck/error.hpp"
#include "graindeck/fileutil.hpp"
#include "graindeck/imageio.hpp"
#include "graindeck/instances.hpp"
#include "graindeck/metrics.hpp"
#include "graindeck/segmenter.hpp"
#include "graindeck/synth.hpp"

namespace graindeck::cli {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

// ---------------------------------------------------------------------------
// Config sections. Every section is a JSON object; missing keys keep their
// defaults and unknown keys are rejected.

const std::set<std::string> kTopLevelKeys = {
    "tool",    "format_version", "command", "seed",  "data",  "classifier",
    "segmenter", "hyper",        "augment", "extract", "split", "synth", "segmenter_training"};

const Json& section(const Json& cfg, const char* name) {
  static const Json empty = Json::object();
  if (!cfg.contains(name)) return empty;
  const Json& s = cfg.at(name);
  if (!s.is_object()) throw ConfigError(std::string("config section '") + name + "' must be an object");
  return s;
}

void reject_unknown(const Json& s, std::initializer_list<const char*> keys, const char* what) {
  std::set<std::string> known(keys.begin(), keys.end());
  for (const auto& [key, value] : s.items()) {
    if (!known.count(key)) throw ConfigError(std::string("unknown ") + what + " key '" + key + "'");
  }
}

template <typename V>
void read_key(const Json& s, const char* key, V& out) {
  if (!s.contains(key)) return;
  try {
    out = s.at(key).get<V>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config key '") + key + "' has the wrong type");
  }
}

TrainHyper hyper_from(const Json& s, TrainHyper h) {
  reject_unknown(s,
                 {"learning_rate", "batch_size", "epochs", "momentum", "weight_decay", "lr_step",
                  "lr_gamma"},
                 "hyper");
  read_key(s, "learning_rate", h.learning_rate);
  read_key(s, "batch_size", h.batch_size);
  read_key(s, "epochs", h.epochs);
  read_key(s, "momentum", h.momentum);
  read_key(s, "weight_decay", h.weight_decay);
  read_key(s, "lr_step", h.lr_step);
  read_key(s, "lr_gamma", h.lr_gamma);
  h.validate();
  return h;
}

Json to_json(const TrainHyper& h) {
  return {{"learning_rate", h.learning_rate}, {"batch_size", h.batch_size},
          {"epochs", h.epochs},               {"momentum", h.momentum},
          {"weight_decay", h.weight_decay},   {"lr_step", h.lr_step},
          {"lr_gamma", h.lr_gamma}};
}

augment::AugmentConfig augment_from(const Json& s) {
  reject_unknown(s,
                 {"rotation_min", "rotation_max", "quarter_turns", "scale_min", "scale_max",
                  "hflip_prob", "vflip_prob"},
                 "augment");
  augment::AugmentConfig a;
  read_key(s, "rotation_min", a.rotation_min);
  read_key(s, "rotation_max", a.rotation_max);
  read_key(s, "quarter_turns", a.quarter_turns);
  read_key(s, "scale_min", a.scale_min);
  read_key(s, "scale_max", a.scale_max);
  read_key(s, "hflip_prob", a.hflip_prob);
  read_key(s, "vflip_prob", a.vflip_prob);
  a.validate();
  return a;
}

Json to_json(const augment::AugmentConfig& a) {
  return {{"rotation_min", a.rotation_min}, {"rotation_max", a.rotation_max},
          {"quarter_turns", a.quarter_turns}, {"scale_min", a.scale_min},
          {"scale_max", a.scale_max},       {"hflip_prob", a.hflip_prob},
          {"vflip_prob", a.vflip_prob}};
}

instances::ExtractParams extract_from(const Json& s) {
  reject_unknown(s, {"connectivity", "min_area", "pad"}, "extract");
  instances::ExtractParams p;
  int conn = static_cast<int>(p.connectivity);
  read_key(s, "connectivity", conn);
  if (conn != 4 && conn != 8) throw ConfigError("connectivity must be 4 or 8");
  p.connectivity = static_cast<instances::Connectivity>(conn);
  read_key(s, "min_area", p.min_area);
  read_key(s, "pad", p.pad);
  p.validate();
  return p;
}

Json to_json(const instances::ExtractParams& p) {
  return {{"connectivity", static_cast<int>(p.connectivity)},
          {"min_area", p.min_area},
          {"pad", p.pad}};
}

std::array<double, 3> split_from(const Json& s) {
  reject_unknown(s, {"ratios"}, "split");
  std::array<double, 3> r{0.70, 0.15, 0.15};
  if (s.contains("ratios")) {
    std::vector<double> v;
    read_key(s, "ratios", v);
    if (v.size() != 3) throw ConfigError("split ratios need exactly three values");
    std::copy(v.begin(), v.end(), r.begin());
  }
  return r;
}

struct SynthSettings {
  int grains = 70;
  int scenes = 10;
  int scene_size = 128;
  bool allow_touching = false;
  synth::SceneMix mix;
  std::string styles;
};

SynthSettings synth_from(const Json& s) {
  reject_unknown(s,
                 {"grains", "scenes", "scene_size", "allow_touching", "min_grains", "max_grains",
                  "min_varieties", "max_varieties", "styles"},
                 "synth");
  SynthSettings out;
  read_key(s, "grains", out.grains);
  read_key(s, "scenes", out.scenes);
  read_key(s, "scene_size", out.scene_size);
  read_key(s, "allow_touching", out.allow_touching);
  read_key(s, "min_grains", out.mix.min_grains);
  read_key(s, "max_grains", out.mix.max_grains);
  read_key(s, "min_varieties", out.mix.min_varieties);
  read_key(s, "max_varieties", out.mix.max_varieties);
  read_key(s, "styles", out.styles);
  if (out.grains < 0 || out.scenes < 0) throw ConfigError("grain and scene counts must be >= 0");
  if (out.scenes > 0) out.mix.validate();
  return out;
}

Json to_json(const SynthSettings& s) {
  return {{"grains", s.grains},
          {"scenes", s.scenes},
          {"scene_size", s.scene_size},
          {"allow_touching", s.allow_touching},
          {"min_grains", s.mix.min_grains},
          {"max_grains", s.mix.max_grains},
          {"min_varieties", s.mix.min_varieties},
          {"max_varieties", s.mix.max_varieties},
          {"styles", s.styles}};
}

/// A referenced input path; must exist.
fs::path input_path(const Json& cfg, const char* key, const char* flag) {
  const Json& d = section(cfg, "data");
  if (!d.contains(key) || !d.at(key).is_string() || d.at(key).get<std::string>().empty()) {
    throw ConfigError(std::string("missing required input ") + flag);
  }
  const fs::path p = d.at(key).get<std::string>();
  if (!fs::exists(p)) throw DataError(p.string() + " does not exist");
  return p;
}

std::optional<fs::path> optional_input(const Json& cfg, const char* key) {
  const Json& d = section(cfg, "data");
  if (!d.contains(key) || !d.at(key).is_string() || d.at(key).get<std::string>().empty()) {
    return std::nullopt;
  }
  const fs::path p = d.at(key).get<std::string>();
  if (!fs::exists(p)) throw DataError(p.string() + " does not exist");
  return p;
}

Json data_section(const Json& cfg, std::initializer_list<const char*> keys) {
  const Json& d = section(cfg, "data");
  reject_unknown(d, keys, "data");
  return d;
}

void write_json(const fs::path& path, const Json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

// ---------------------------------------------------------------------------
// Flag overrides: each flag writes into one (section, key) of the config
// when given on the command line.

class Overrides {
 public:
  template <typename V>
  void add(CLI::App* app, const std::string& flag, const char* section_name, const char* key,
           const std::string& help) {
    auto value = std::make_shared<V>();
    CLI::Option* opt = app->add_option(flag, *value, help);
    items_.push_back({opt, [=](Json& cfg) { cfg[section_name][key] = *value; }});
  }

  void add_flag(CLI::App* app, const std::string& flag, const char* section_name, const char* key,
                const std::string& help) {
    auto value = std::make_shared<bool>(false);
    CLI::Option* opt = app->add_flag(flag, *value, help);
    items_.push_back({opt, [=](Json& cfg) { cfg[section_name][key] = *value; }});
  }

  void apply(Json& cfg) const {
    for (const auto& item : items_) {
      if (item.option->count() > 0) item.write(cfg);
    }
  }

 private:
  struct Item {
    CLI::Option* option;
    std::function<void(Json&)> write;
  };
  std::vector<Item> items_;
};

void add_hyper_flags(Overrides& o, CLI::App* sub) {
  o.add<int>(sub, "--epochs", "hyper", "epochs", "training epochs");
  o.add<int>(sub, "--batch-size", "hyper", "batch_size", "mini-batch size");
  o.add<double>(sub, "--lr", "hyper", "learning_rate", "base learning rate");
  o.add<int>(sub, "--lr-step", "hyper", "lr_step", "epochs between learning-rate decays (0: none)");
  o.add<double>(sub, "--lr-gamma", "hyper", "lr_gamma", "learning-rate decay factor");
  o.add<double>(sub, "--momentum", "hyper", "momentum", "SGD momentum");
  o.add<double>(sub, "--weight-decay", "hyper", "weight_decay", "L2 weight decay");
}

struct Context {
  Json cfg;
  std::uint64_t seed = 0;
  fs::path out_dir;
  std::ostream& out;
  std::ostream& err;
};

void write_run_manifest(const Context& ctx, const std::string& command, Json resolved) {
  Json m;
  m["tool"] = "graindeck";
  m["format_version"] = 1;
  m["command"] = command;
  m["seed"] = ctx.seed;
  for (auto& [key, value] : resolved.items()) m[key] = value;
  write_json(ctx.out_dir / "run-manifest.json", m);
}

std::function<void(const EpochRecord&)> progress(std::ostream& err, const char* metric) {
  return [&err, metric](const EpochRecord& r) {
    char line[160];
    std::snprintf(line, sizeof line, "epoch %3d  lr %.4g  train_loss %.4f  val_loss %.4f  %s %.4f\n",
                  r.epoch, r.learning_rate, r.train_loss, r.val_loss, metric, r.val_metric);
    err << line << std::flush;
  };
}

Json classification_json(const metrics::ConfusionMatrix& cm) {
  const auto per_class = metrics::class_metrics(cm);
  Json j = metrics::to_json(per_class, metrics::summary(cm));
  j["count"] = cm.total();
  return j;
}

void print_class_table(std::ostream& out, const metrics::ConfusionMatrix& cm) {
  const auto per_class = metrics::class_metrics(cm);
  const auto s = metrics::summary(cm);
  char line[128];
  std::snprintf(line, sizeof line, "%-15s %9s %7s %6s\n", "variety", "precision", "recall", "f1");
  out << line;
  for (std::size_t c = 0; c < kNumVarieties; ++c) {
    std::snprintf(line, sizeof line, "%-15s %9.2f %7.2f %6.2f\n",
                  std::string(name_of(kAllVarieties[c])).c_str(),
                  metrics::round_to(per_class[c].precision, 2), metrics::round_to(per_class[c].recall, 2),
                  metrics::round_to(per_class[c].f1, 2));
    out << line;
  }
  std::snprintf(line, sizeof line, "%-15s %9.2f %7.2f %6.2f\naccuracy %.4f\n", "macro avg",
                metrics::round_to(s.macro_precision, 2), metrics::round_to(s.macro_recall, 2),
                metrics::round_to(s.macro_f1, 2), s.accuracy);
  out << line;
}

// ---------------------------------------------------------------------------
// Subcommands

void cmd_synth_gen(const Context& ctx) {
  data_section(ctx.cfg, {});
  const SynthSettings s = synth_from(section(ctx.cfg, "synth"));
  if (!s.styles.empty() && !fs::exists(s.styles)) throw DataError(s.styles + " does not exist");
  const synth::StyleSet styles =
      s.styles.empty() ? synth::default_styles() : synth::load_styles(s.styles);
  write_run_manifest(ctx, "synth-gen", {{"synth", to_json(s)}});

  if (s.grains > 0) {
    std::vector<LabeledImage> grains;
    std::string index = "file,variety,seed\n";
    std::array<int, kNumVarieties> per_variety{};
    for (int k = 0; k < s.grains; ++k) ++per_variety[static_cast<std::size_t>(k % kNumVarieties)];
    for (RiceVariety v : kAllVarieties) {
      for (int i = 0; i < per_variety[static_cast<std::size_t>(index_of(v))]; ++i) {
        const std::uint64_t gseed =
            mix_seed(mix_seed(ctx.seed, 0x6A1), static_cast<std::uint64_t>(index_of(v)) * 100000 + i);
        grains.push_back(synth::gen_grain(styles.of(v), gseed, styles));
        char row[96];
        std::snprintf(row, sizeof row, "%s/%s_%04d.png,%s,%llu\n", std::string(name_of(v)).c_str(),
                      std::string(name_of(v)).c_str(), i + 1, std::string(name_of(v)).c_str(),
                      static_cast<unsigned long long>(gseed));
        index += row;
      }
    }
    corpus::write_grain_dataset(ctx.out_dir / "grains", grains);
    write_file_atomic(ctx.out_dir / "grains" / "index.csv", index);
  }
  if (s.scenes > 0) {
    std::vector<BulkSample> scenes;
    for (int j = 0; j < s.scenes; ++j) {
      BulkSample scene = synth::gen_random_scene(s.mix, s.scene_size, s.scene_size, s.allow_touching,
                                                 mix_seed(mix_seed(ctx.seed, 0x5CE), j), styles);
      char id[32];
      std::snprintf(id, sizeof id, "scene_%04d", j + 1);
      scene.source_id = id;
      scenes.push_back(std::move(scene));
    }
    corpus::write_bulk_dataset(ctx.out_dir / "bulk", scenes);
  }
  ctx.out << "wrote " << s.grains << " grain images and " << s.scenes << " scenes to "
          << ctx.out_dir.string() << "\n";
}

TrainHyper classifier_default_hyper() {
  TrainHyper h;
  h.learning_rate = 0.05;
  h.batch_size = 32;
  h.epochs = 15;
  h.lr_step = 10;
  h.lr_gamma = 0.1;
  return h;
}

TrainHyper segmenter_default_hyper() {
  TrainHyper h;
  h.learning_rate = 0.05;
  h.batch_size = 4;
  h.epochs = 15;
  h.lr_step = 10;
  h.lr_gamma = 0.1;
  return h;
}

void cmd_train_classifier(const Context& ctx) {
  data_section(ctx.cfg, {"grains"});
  const fs::path data = input_path(ctx.cfg, "grains", "--data");
  Json cls_json = section(ctx.cfg, "classifier");
  const auto config = checkpoint::classifier_config_from_json(cls_json);
  TrainHyper hyper = hyper_from(section(ctx.cfg, "hyper"), classifier_default_hyper());
  hyper.seed = ctx.seed;
  augment::AugmentConfig aug = augment_from(section(ctx.cfg, "augment"));
  aug.seed = ctx.seed;
  const auto ratios = split_from(section(ctx.cfg, "split"));
  write_run_manifest(ctx, "train-classifier",
                     {{"data", {{"grains", data.string()}}},
                      {"classifier", checkpoint::to_json(config)},
                      {"hyper", to_json(hyper)},
                      {"augment", to_json(aug)},
                      {"split", {{"ratios", ratios}}}});

  const auto samples = corpus::load_grain_dataset(data);
  const auto split = corpus::stratified_split(samples, ratios, ctx.seed);
  auto model = classifier::build_classifier(config, ctx.seed);
  const TrainHistory history = classifier::train_classifier(model, samples, split, hyper, aug,
                                                            progress(ctx.err, "val_accuracy"));

  auto evaluate = [&](const std::vector<std::size_t>& idx) {
    std::vector<const Image*> images;
    for (std::size_t i : idx) images.push_back(&samples[i].pixels);
    const auto probs = classifier::predict_batch(model, images);
    metrics::ConfusionMatrix cm;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      cm.add(samples[idx[k]].label, classifier::predict_label(probs[k]));
    }
    return cm;
  };
  const auto val_cm = evaluate(split.validation);
  Json m;
  m["best_epoch"] = history.best_epoch;
  m["validation"] = classification_json(val_cm);
  metrics::ConfusionMatrix report_cm = val_cm;
  if (!split.test.empty()) {
    report_cm = evaluate(split.test);
    m["test"] = classification_json(report_cm);
  }
  checkpoint::save_classifier(ctx.out_dir / "classifier", model, ctx.seed,
                              {{"best_epoch", history.best_epoch},
                               {"val_accuracy", round_sig6(history.best_metric)}});
  write_file_atomic(ctx.out_dir / "history.csv", history.to_csv());
  write_json(ctx.out_dir / "metrics.json", m);
  write_file_atomic(ctx.out_dir / "confusion.csv", report_cm.to_csv());
  print_class_table(ctx.out, report_cm);
}

void cmd_train_segmenter(const Context& ctx) {
  data_section(ctx.cfg, {"bulk"});
  const fs::path data = input_path(ctx.cfg, "bulk", "--data");
  const auto config = checkpoint::segmenter_config_from_json(section(ctx.cfg, "segmenter"));
  TrainHyper hyper = hyper_from(section(ctx.cfg, "hyper"), segmenter_default_hyper());
  hyper.seed = ctx.seed;
  const Json& st = section(ctx.cfg, "segmenter_training");
  reject_unknown(st, {"validation_fraction"}, "segmenter_training");
  double val_fraction = 0.2;
  read_key(st, "validation_fraction", val_fraction);
  write_run_manifest(ctx, "train-segmenter",
                     {{"data", {{"bulk", data.string()}}},
                      {"segmenter", checkpoint::to_json(config)},
                      {"hyper", to_json(hyper)},
                      {"segmenter_training", {{"validation_fraction", val_fraction}}}});

  const auto pairs = corpus::load_bulk_dataset(data);
  auto model = segmenter::build_unet(config, ctx.seed);
  const TrainHistory history = segmenter::train_segmenter(model, pairs, hyper, val_fraction,
                                                          progress(ctx.err, "val_iou"));
  checkpoint::save_segmenter(ctx.out_dir / "segmenter", model, ctx.seed,
                             {{"best_epoch", history.best_epoch},
                              {"val_iou", round_sig6(history.best_metric)}});
  write_file_atomic(ctx.out_dir / "history.csv", history.to_csv());
  write_json(ctx.out_dir / "metrics.json",
             {{"best_epoch", history.best_epoch}, {"val_iou", round_sig6(history.best_metric)}});
  ctx.out << "best epoch " << history.best_epoch << ", validation IoU " << history.best_metric
          << "\n";
}

std::vector<std::pair<RiceVariety, RiceVariety>> read_prediction_csv(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  std::vector<std::pair<RiceVariety, RiceVariety>> out;
  int line_no = 0;
  auto parse = [&](const std::string& field) {
    if (auto v = parse_variety(field)) return *v;
    if (!field.empty() && std::all_of(field.begin(), field.end(), ::isdigit)) {
      const int idx = std::stoi(field);
      if (idx < static_cast<int>(kNumVarieties)) return variety_from_index(idx);
    }
    throw DataError(path.string() + ":" + std::to_string(line_no) + ": unknown variety '" + field +
                    "'");
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected 'true,predicted'");
    }
    std::string a = line.substr(0, comma);
    std::string b = line.substr(comma + 1);
    if (line_no == 1 && a == "true") continue;
    out.emplace_back(parse(a), parse(b));
  }
  return out;
}

void cmd_eval_classifier(const Context& ctx) {
  data_section(ctx.cfg, {"model", "grains", "predictions", "subset"});
  const auto predictions = optional_input(ctx.cfg, "predictions");
  metrics::ConfusionMatrix cm;
  if (predictions) {
    write_run_manifest(ctx, "eval-classifier", {{"data", {{"predictions", predictions->string()}}}});
    const auto pairs = read_prediction_csv(*predictions);
    cm = metrics::confusion_from_predictions(pairs);
  } else {
    const fs::path model_dir = input_path(ctx.cfg, "model", "--model or --predictions");
    const fs::path data = input_path(ctx.cfg, "grains", "--data");
    std::string subset = "all";
    read_key(section(ctx.cfg, "data"), "subset", subset);
    if (subset != "all" && subset != "train" && subset != "validation" && subset != "test") {
      throw ConfigError("--subset must be all, train, validation or test");
    }
    const auto ratios = split_from(section(ctx.cfg, "split"));
    write_run_manifest(ctx, "eval-classifier",
                       {{"data",
                         {{"model", model_dir.string()}, {"grains", data.string()}, {"subset", subset}}},
                        {"split", {{"ratios", ratios}}}});
    const auto model = checkpoint::load_classifier(model_dir);
    const auto samples = corpus::load_grain_dataset(data);
    std::vector<std::size_t> idx;
    if (subset == "all") {
      for (std::size_t i = 0; i < samples.size(); ++i) idx.push_back(i);
    } else {
      const auto split = corpus::stratified_split(samples, ratios, ctx.seed);
      idx = subset == "train" ? split.train : subset == "validation" ? split.validation : split.test;
    }
    if (idx.empty()) throw DataError("no samples in the selected subset");
    std::vector<const Image*> images;
    for (std::size_t i : idx) images.push_back(&samples[i].pixels);
    const auto probs = classifier::predict_batch(model, images);
    std::string csv = "source_id,true,predicted,confidence\n";
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const RiceVariety p = classifier::predict_label(probs[k]);
      cm.add(samples[idx[k]].label, p);
      std::ostringstream row;
      row.precision(6);
      row << samples[idx[k]].source_id << ',' << name_of(samples[idx[k]].label) << ',' << name_of(p)
          << ',' << round_sig6(probs[k].probs[static_cast<std::size_t>(index_of(p))]) << '\n';
      csv += row.str();
    }
    write_file_atomic(ctx.out_dir / "predictions.csv", csv);
  }
  write_json(ctx.out_dir / "metrics.json", classification_json(cm));
  write_file_atomic(ctx.out_dir / "confusion.csv", cm.to_csv());
  print_class_table(ctx.out, cm);
}

void cmd_eval_segmenter(const Context& ctx) {
  data_section(ctx.cfg, {"model", "bulk", "save_masks"});
  const fs::path model_dir = input_path(ctx.cfg, "model", "--model");
  const fs::path data = input_path(ctx.cfg, "bulk", "--data");
  const auto model = checkpoint::load_segmenter(model_dir);
  double threshold = model.config().threshold;
  const Json& seg = section(ctx.cfg, "segmenter");
  reject_unknown(seg, {"threshold"}, "eval-segmenter segmenter");
  read_key(seg, "threshold", threshold);
  bool save_masks = false;
  read_key(section(ctx.cfg, "data"), "save_masks", save_masks);
  write_run_manifest(ctx, "eval-segmenter",
                     {{"data",
                       {{"model", model_dir.string()}, {"bulk", data.string()}, {"save_masks", save_masks}}},
                      {"segmenter", {{"threshold", threshold}}}});

  const auto samples = corpus::load_bulk_dataset(data);
  if (samples.empty()) throw DataError(data.string() + " holds no bulk samples");
  std::vector<std::pair<Mask, Mask>> pairs;
  Json per_image = Json::array();
  for (const auto& s : samples) {
    Mask pred = segmenter::binarize(segmenter::predict_mask(model, s.pixels), threshold);
    per_image.push_back({{"id", s.source_id}, {"iou", round_sig6(metrics::iou(pred, s.mask))}});
    if (save_masks) write_png(ctx.out_dir / "masks" / (s.source_id + ".png"), pred, true);
    pairs.emplace_back(std::move(pred), s.mask);
  }
  const auto d = metrics::dataset_iou(pairs);
  write_json(ctx.out_dir / "metrics.json",
             {{"count", samples.size()},
              {"mean_per_image_iou", round_sig6(d.mean_per_image)},
              {"aggregate_iou", round_sig6(d.aggregate)},
              {"images", per_image}});
  ctx.out << "IoU mean per image " << d.mean_per_image << ", aggregate " << d.aggregate << "\n";
}

void cmd_predict_grain(const Context& ctx) {
  data_section(ctx.cfg, {"model", "image"});
  const fs::path model_dir = input_path(ctx.cfg, "model", "--model");
  const fs::path image_path = input_path(ctx.cfg, "image", "--image");
  write_run_manifest(ctx, "predict-grain",
                     {{"data", {{"model", model_dir.string()}, {"image", image_path.string()}}}});
  const auto model = checkpoint::load_classifier(model_dir);
  const auto p = classifier::predict(model, read_image(image_path));
  const RiceVariety v = classifier::predict_label(p);
  Json probs = Json::object();
  for (RiceVariety w : kAllVarieties) {
    probs[std::string(name_of(w))] = round_sig6(p.probs[static_cast<std::size_t>(index_of(w))]);
  }
  write_json(ctx.out_dir / "prediction.json",
             {{"variety", std::string(name_of(v))},
              {"confidence", round_sig6(p.probs[static_cast<std::size_t>(index_of(v))])},
              {"probabilities", probs}});
  ctx.out << name_of(v) << "\n";
}

void cmd_predict_bulk(const Context& ctx) {
  data_section(ctx.cfg, {"image", "segmenter", "classifier", "truth"});
  const fs::path image_path = input_path(ctx.cfg, "image", "--image");
  const fs::path seg_dir = input_path(ctx.cfg, "segmenter", "--segmenter");
  const fs::path cls_dir = input_path(ctx.cfg, "classifier", "--classifier");
  const auto truth_path = optional_input(ctx.cfg, "truth");
  const auto params = extract_from(section(ctx.cfg, "extract"));
  const auto seg_model = checkpoint::load_segmenter(seg_dir);
  const auto cls_model = checkpoint::load_classifier(cls_dir);
  double threshold = seg_model.config().threshold;
  const Json& seg = section(ctx.cfg, "segmenter");
  reject_unknown(seg, {"threshold"}, "predict-bulk segmenter");
  read_key(seg, "threshold", threshold);
  Json data = {{"image", image_path.string()},
               {"segmenter", seg_dir.string()},
               {"classifier", cls_dir.string()}};
  if (truth_path) data["truth"] = truth_path->string();
  write_run_manifest(ctx, "predict-bulk",
                     {{"data", data},
                      {"extract", to_json(params)},
                      {"segmenter", {{"threshold", threshold}}}});

  const auto report =
      bulk::predict_bulk(read_image(image_path), seg_model, cls_model, params, threshold);
  write_json(ctx.out_dir / "composition.json", bulk::to_json(report));
  if (truth_path) {
    CompositionCounts truth;
    try {
      const Json t = Json::parse(read_file(*truth_path));
      for (const auto& [name, count] : t.items()) truth[variety_from_name(name)] = count.get<int>();
    } catch (const nlohmann::json::exception& e) {
      throw DataError(truth_path->string() + ": " + e.what());
    }
    write_json(ctx.out_dir / "composition-error.json",
               bulk::to_json(bulk::compare_composition(report, truth)));
  }
  ctx.out << bulk::render(report);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"graindeck: rice grain classification, segmentation and bulk composition"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  std::string config_path;
  std::string out_dir;
  app.add_option("--seed", seed, "random seed (required)")->required();
  app.add_option("--config", config_path, "JSON config file; flags override its values");
  app.add_option("--out", out_dir, "output directory (default: $GRAINDECK_OUT)");

  Overrides o;
  std::map<CLI::App*, std::function<void(const Context&)>> handlers;

  auto* synth_gen = app.add_subcommand("synth-gen", "generate a synthetic grain corpus and scenes");
  o.add<int>(synth_gen, "--grains", "synth", "grains", "single-grain images (spread over varieties)");
  o.add<int>(synth_gen, "--scenes", "synth", "scenes", "bulk scenes");
  o.add<int>(synth_gen, "--scene-size", "synth", "scene_size", "scene side in pixels");
  o.add<int>(synth_gen, "--min-grains", "synth", "min_grains", "fewest grains per scene");
  o.add<int>(synth_gen, "--max-grains", "synth", "max_grains", "most grains per scene");
  o.add<int>(synth_gen, "--min-varieties", "synth", "min_varieties", "fewest varieties per scene");
  o.add<int>(synth_gen, "--max-varieties", "synth", "max_varieties", "most varieties per scene");
  o.add_flag(synth_gen, "--touching", "synth", "allow_touching", "allow grains to touch");
  o.add<std::string>(synth_gen, "--styles", "synth", "styles", "style JSON file");
  handlers[synth_gen] = cmd_synth_gen;

  auto* train_cls = app.add_subcommand("train-classifier", "train the grain classifier");
  o.add<std::string>(train_cls, "--data", "data", "grains", "single-grain dataset root");
  add_hyper_flags(o, train_cls);
  o.add<int>(train_cls, "--input-size", "classifier", "input_size", "network input side");
  o.add<std::vector<int>>(train_cls, "--widths", "classifier", "stage_widths", "stage widths");
  o.add<std::vector<int>>(train_cls, "--blocks", "classifier", "blocks_per_stage", "blocks per stage");
  o.add<int>(train_cls, "--head-only-epochs", "classifier", "head_only_epochs",
             "initial epochs that train only the head");
  o.add<std::vector<double>>(train_cls, "--split", "split", "ratios", "train/validation/test ratios");
  bool paper_scale = false;
  train_cls->add_flag("--paper-scale", paper_scale, "start from the 50-layer-sized layout");
  handlers[train_cls] = cmd_train_classifier;

  auto* train_seg = app.add_subcommand("train-segmenter", "train the grain segmenter");
  o.add<std::string>(train_seg, "--data", "data", "bulk", "bulk dataset root");
  add_hyper_flags(o, train_seg);
  o.add<int>(train_seg, "--input-size", "segmenter", "input_size", "network input side");
  o.add<int>(train_seg, "--depth", "segmenter", "depth", "down/up levels");
  o.add<int>(train_seg, "--base-channels", "segmenter", "base_channels", "channels at level 0");
  o.add<double>(train_seg, "--threshold", "segmenter", "threshold", "binarization threshold");
  o.add<double>(train_seg, "--val-fraction", "segmenter_training", "validation_fraction",
                "share of pairs held out for validation");
  handlers[train_seg] = cmd_train_segmenter;

  auto* eval_cls = app.add_subcommand("eval-classifier", "classification metrics");
  o.add<std::string>(eval_cls, "--model", "data", "model", "classifier checkpoint directory");
  o.add<std::string>(eval_cls, "--data", "data", "grains", "single-grain dataset root");
  o.add<std::string>(eval_cls, "--subset", "data", "subset", "all, train, validation or test");
  o.add<std::vector<double>>(eval_cls, "--split", "split", "ratios", "train/validation/test ratios");
  o.add<std::string>(eval_cls, "--predictions", "data", "predictions",
                     "CSV of true,predicted pairs instead of a model");
  handlers[eval_cls] = cmd_eval_classifier;

  auto* eval_seg = app.add_subcommand("eval-segmenter", "segmentation IoU");
  o.add<std::string>(eval_seg, "--model", "data", "model", "segmenter checkpoint directory");
  o.add<std::string>(eval_seg, "--data", "data", "bulk", "bulk dataset root");
  o.add<double>(eval_seg, "--threshold", "segmenter", "threshold", "binarization threshold");
  o.add_flag(eval_seg, "--save-masks", "data", "save_masks", "write predicted masks");
  handlers[eval_seg] = cmd_eval_segmenter;

  auto* predict_grain = app.add_subcommand("predict-grain", "classify one grain image");
  o.add<std::string>(predict_grain, "--model", "data", "model", "classifier checkpoint directory");
  o.add<std::string>(predict_grain, "--image", "data", "image", "grain image");
  handlers[predict_grain] = cmd_predict_grain;

  auto* predict_bulk = app.add_subcommand("predict-bulk", "composition of a bulk image");
  o.add<std::string>(predict_bulk, "--image", "data", "image", "bulk image");
  o.add<std::string>(predict_bulk, "--segmenter", "data", "segmenter", "segmenter checkpoint");
  o.add<std::string>(predict_bulk, "--classifier", "data", "classifier", "classifier checkpoint");
  o.add<std::string>(predict_bulk, "--truth", "data", "truth", "JSON {variety: count} to compare");
  o.add<double>(predict_bulk, "--threshold", "segmenter", "threshold", "binarization threshold");
  o.add<int>(predict_bulk, "--min-area", "extract", "min_area", "smallest grain in pixels");
  o.add<int>(predict_bulk, "--pad", "extract", "pad", "crop padding in pixels");
  o.add<int>(predict_bulk, "--connectivity", "extract", "connectivity", "4 or 8");
  handlers[predict_bulk] = cmd_predict_bulk;

  for (auto& [sub, handler] : handlers) sub->fallthrough();

  std::vector<const char*> argv;
  argv.push_back("graindeck");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (out_dir.empty()) {
      const char* env = std::getenv("GRAINDECK_OUT");
      if (env == nullptr || *env == '\0') {
        throw ConfigError("no output directory: pass --out or set GRAINDECK_OUT");
      }
      out_dir = env;
    }
    Json cfg = Json::object();
    if (!config_path.empty()) {
      if (!fs::exists(config_path)) throw DataError(config_path + " does not exist");
      try {
        cfg = Json::parse(read_file(config_path));
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(config_path + ": " + e.what());
      }
      if (!cfg.is_object()) throw ConfigError(config_path + ": expected a JSON object");
      for (const auto& [key, value] : cfg.items()) {
        if (!kTopLevelKeys.count(key)) throw ConfigError("unknown config section '" + key + "'");
      }
    }
    if (paper_scale) {
      Json preset = checkpoint::to_json(classifier::ClassifierConfig::paper_scale());
      for (const auto& [key, value] : section(cfg, "classifier").items()) preset[key] = value;
      cfg["classifier"] = preset;
    }
    o.apply(cfg);

    for (auto& [sub, handler] : handlers) {
      if (sub->parsed()) {
        fs::create_directories(out_dir);
        handler(Context{cfg, seed, out_dir, out, err});
        return kExitOk;
      }
    }
    err << app.help();
    return kExitUsage;
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace graindeck::cli

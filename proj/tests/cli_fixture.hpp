#pragma once

#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "graindeck/cli.hpp"
#include "graindeck/fileutil.hpp"

namespace graindeck::testing {

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

inline CliResult run_cli(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  CliResult r;
  r.code = cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

/// Relative path -> file bytes for every regular file below `root`.
inline std::map<std::string, std::string> snapshot_tree(const std::filesystem::path& root) {
  std::map<std::string, std::string> files;
  if (!std::filesystem::exists(root)) return files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[std::filesystem::relative(e.path(), root).string()] = read_file(e.path());
  }
  return files;
}

struct StepOutcome {
  std::string command;
  int code_a = -1;
  int code_b = -1;
  std::size_t files = 0;
  bool identical = false;
  std::string detail;
};

/// Runs each subcommand on a tiny configuration twice, into <root>/<cmd>/a
/// and <root>/<cmd>/b, and compares the two output trees byte for byte.
/// Later steps read the "a" outputs of earlier ones.
inline std::vector<StepOutcome> run_every_subcommand_twice(const std::filesystem::path& root,
                                                           const std::string& seed) {
  namespace fs = std::filesystem;
  const std::string synth = (root / "synth-gen" / "a").string();
  const std::string grains = synth + "/grains";
  const std::string bulk = synth + "/bulk";
  const std::string cls = (root / "train-classifier" / "a" / "classifier").string();
  const std::string seg = (root / "train-segmenter" / "a" / "segmenter").string();
  const std::string truth = (root / "truth.json").string();

  struct Step {
    std::string command;
    std::vector<std::string> args;
  };
  const std::vector<Step> steps{
      {"synth-gen",
       {"--grains", "28", "--scenes", "3", "--scene-size", "128", "--min-grains", "3", "--max-grains",
        "5"}},
      {"train-classifier",
       {"--data", grains, "--input-size", "32", "--widths", "4", "8", "--blocks", "1", "1", "--epochs",
        "2", "--batch-size", "8", "--split", "0.5", "0.25", "0.25"}},
      {"train-segmenter",
       {"--data", bulk, "--input-size", "32", "--depth", "2", "--base-channels", "4", "--epochs", "1",
        "--batch-size", "2"}},
      {"eval-classifier",
       {"--model", cls, "--data", grains, "--subset", "test", "--split", "0.5", "0.25", "0.25"}},
      {"eval-segmenter", {"--model", seg, "--data", bulk, "--save-masks"}},
      {"predict-grain", {"--model", cls, "--image", grains + "/Hashemi/Hashemi_0001.png"}},
      {"predict-bulk",
       {"--image", bulk + "/images/scene_0001.png", "--segmenter", seg, "--classifier", cls, "--truth",
        truth, "--min-area", "10"}},
  };

  std::vector<StepOutcome> outcomes;
  for (const auto& step : steps) {
    if (step.command == "predict-bulk") {
      // Truth for the first scene, in the {variety: count} form.
      const std::string comp = read_file(fs::path(bulk) / "composition.json");
      const auto start = comp.find('{', comp.find("scene_0001"));
      const auto end = comp.find('}', start);
      write_file_atomic(truth, comp.substr(start, end - start + 1));
    }
    StepOutcome o;
    o.command = step.command;
    std::map<std::string, std::string> trees[2];
    for (int k = 0; k < 2; ++k) {
      const fs::path out = root / step.command / (k == 0 ? "a" : "b");
      std::vector<std::string> args{"--seed", seed, "--out", out.string(), step.command};
      args.insert(args.end(), step.args.begin(), step.args.end());
      const CliResult r = run_cli(args);
      (k == 0 ? o.code_a : o.code_b) = r.code;
      if (r.code != 0 && o.detail.empty()) o.detail = r.err;
      trees[k] = snapshot_tree(out);
    }
    o.files = trees[0].size();
    o.identical = o.code_a == 0 && o.code_b == 0 && !trees[0].empty() && trees[0] == trees[1];
    if (!o.identical && o.detail.empty()) {
      for (const auto& [name, bytes] : trees[0]) {
        auto it = trees[1].find(name);
        if (it == trees[1].end() || it->second != bytes) {
          o.detail = "differs: " + name;
          break;
        }
      }
    }
    outcomes.push_back(o);
  }
  return outcomes;
}

}  // namespace graindeck::testing

// serkit/serkit_main.cpp
//
// Command-line front end: synth, extract, train, grid, report, manifest.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "serkit/harness.hpp"
#include "serkit/synth.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

namespace {

using namespace serkit;

// Common experiment flags. Values land in `pending` as (config key, value)
// pairs so explicit flags override the config file regardless of parse
// order.
struct CommonOpts {
  std::string config_file;
  std::vector<std::pair<std::string, std::string>> pending;

  void addTo(CLI::App* cmd, bool with_arch) {
    cmd->add_option_function<std::string>(
        "--config", [this](const std::string& v) { config_file = v; },
        "flat key = value config file");
    auto bind = [this, cmd](const std::string& flag, const std::string& key,
                            const std::string& help) {
      cmd->add_option_function<std::string>(
          flag,
          [this, key](const std::string& v) { pending.emplace_back(key, v); },
          help);
    };
    bind("--manifest", "manifest", "corpus manifest csv");
    bind("--task", "task", "emotion or intensity");
    bind("--representation", "representation", "mfcc, gfcc or both");
    bind("--out", "out_dir", "output directory");
    bind("--workers", "workers", "concurrent experiments");
    if (with_arch) {
      bind("--arch", "architectures",
           "architecture list, e.g. \"F(800),L(200)/A\"");
    }
    cmd->add_option_function<std::string>(
        "--seed",
        [this](const std::string& v) {
          pending.emplace_back("split_seed", v);
          pending.emplace_back("train_seed", v);
        },
        "base seed for both the split and training");
  }

  ExperimentConfig build() const {
    ExperimentConfig cfg;
    if (!config_file.empty()) {
      loadConfigFile(cfg, config_file);
    }
    for (const auto& [key, value] : pending) {
      applyConfigKey(cfg, key, value);
    }
    return cfg;
  }
};

int runSynth(const SynthConfig& synth) {
  const std::string manifest = generateSynthCorpus(synth);
  std::cout << "wrote " << manifest << "\n";
  return 0;
}

int runExtract(const CommonOpts& opts) {
  ExperimentConfig cfg = opts.build();
  if (cfg.manifest.empty()) {
    throw ConfigError("extract: --manifest is required");
  }
  const std::string cache = cfg.effectiveCacheDir();
  if (cache.empty()) {
    throw ConfigError("extract: caching is disabled (cache_dir = none)");
  }
  const std::vector<CorpusEntry> entries = loadManifest(cfg.manifest);
  std::vector<FilterKind> kinds;
  if (cfg.representation == "mfcc" || cfg.representation == "both") {
    kinds.push_back(FilterKind::kMel);
  }
  if (cfg.representation == "gfcc" || cfg.representation == "both") {
    kinds.push_back(FilterKind::kGammatone);
  }
  for (FilterKind kind : kinds) {
    PipelineConfig pipeline = cfg.pipeline;
    pipeline.kind = kind;
    loadFeatures(entries, cfg.manifest, pipeline, cache, &std::cout);
  }
  std::cout << "feature cache: " << cache << "\n";
  return 0;
}

int runTrainCmd(const CommonOpts& opts) {
  ExperimentConfig cfg = opts.build();
  if (cfg.manifest.empty()) {
    throw ConfigError("train: --manifest is required");
  }
  if (cfg.architectures.size() != 1) {
    throw ConfigError("train: pass exactly one --arch");
  }
  if (cfg.representation == "both") {
    throw ConfigError("train: pick --representation mfcc or gfcc");
  }
  cfg.save_checkpoints = true;
  const FilterKind kind = filterKindFromString(cfg.representation);
  const ExperimentResult result =
      runExperiment(cfg, cfg.architectures.front(), kind, &std::cout);
  if (!result.ok()) {
    std::cerr << "experiment failed: " << result.error << "\n";
    return 1;
  }

  // Keep results.csv in sync: replace this cell if present, then re-render.
  namespace fs = std::filesystem;
  const std::string csv =
      (fs::path(cfg.out_dir) / "results.csv").string();
  std::vector<ExperimentResult> all;
  if (fs::exists(csv)) {
    for (ExperimentResult& r : readResultsCsv(csv)) {
      if (r.task == result.task && r.model == result.model &&
          r.representation == result.representation) {
        continue;
      }
      all.push_back(std::move(r));
    }
  }
  all.push_back(result);
  emitReport(all, cfg.out_dir, cfg.architectures);
  std::cout << "results: " << csv << "\n";
  return 0;
}

int runGridCmd(const CommonOpts& opts) {
  ExperimentConfig cfg = opts.build();
  if (cfg.manifest.empty()) {
    throw ConfigError("grid: --manifest is required");
  }
  const std::vector<ExperimentResult> results = runGrid(cfg, &std::cout);
  std::size_t failed = 0;
  for (const ExperimentResult& r : results) {
    if (!r.ok()) ++failed;
  }
  std::cout << results.size() << " cells, " << failed << " failed; report in "
            << cfg.out_dir << "\n";
  return failed == 0 ? 0 : 1;
}

int runReport(const std::string& results_path, const std::string& out_dir) {
  const std::vector<ExperimentResult> results = readResultsCsv(results_path);
  emitReport(results, out_dir, paperArchitectures());
  std::cout << "report: " << (std::filesystem::path(out_dir) / "report.md")
            << "\n";
  return 0;
}

int runManifestCmd(const std::string& ravdess_dir, const std::string& out) {
  const std::vector<CorpusEntry> entries = buildRavdessManifest(ravdess_dir);
  writeManifest(out, entries);
  std::cout << "wrote " << out << " (" << entries.size() << " entries)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "serkit: gammatone vs mel cepstral speech classification toolkit"};
  app.require_subcommand(1);

  // synth
  SynthConfig synth;
  CLI::App* synth_cmd =
      app.add_subcommand("synth", "generate a synthetic labeled tone corpus");
  synth_cmd->add_option("--out", synth.out_dir, "corpus directory")
      ->required();
  synth_cmd->add_option("--seed", synth.seed, "corpus seed");
  synth_cmd->add_option("--per-class", synth.per_class,
                        "utterances per emotion");
  synth_cmd->add_option("--sample-rate", synth.sample_rate, "Hz");
  synth_cmd->add_option("--speakers", synth.speakers, "fake speaker count");

  // extract
  CommonOpts extract_opts;
  CLI::App* extract_cmd =
      app.add_subcommand("extract", "extract features into the cache");
  extract_opts.addTo(extract_cmd, /*with_arch=*/false);

  // train
  CommonOpts train_opts;
  CLI::App* train_cmd =
      app.add_subcommand("train", "run a single experiment cell");
  train_opts.addTo(train_cmd, /*with_arch=*/true);

  // grid
  CommonOpts grid_opts;
  CLI::App* grid_cmd =
      app.add_subcommand("grid", "run the full architecture grid");
  grid_opts.addTo(grid_cmd, /*with_arch=*/true);

  // report
  std::string report_results, report_out = "serkit-out";
  CLI::App* report_cmd =
      app.add_subcommand("report", "re-render the report from a results csv");
  report_cmd->add_option("--results", report_results, "results.csv path")
      ->required();
  report_cmd->add_option("--out", report_out, "output directory");

  // manifest
  std::string ravdess_dir, manifest_out = "manifest.csv";
  CLI::App* manifest_cmd = app.add_subcommand(
      "manifest", "build a manifest from a RAVDESS directory tree");
  manifest_cmd->add_option("--ravdess-dir", ravdess_dir, "RAVDESS root")
      ->required();
  manifest_cmd->add_option("--out", manifest_out, "manifest path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth_cmd->parsed()) return runSynth(synth);
    if (extract_cmd->parsed()) return runExtract(extract_opts);
    if (train_cmd->parsed()) return runTrainCmd(train_opts);
    if (grid_cmd->parsed()) return runGridCmd(grid_opts);
    if (report_cmd->parsed()) return runReport(report_results, report_out);
    if (manifest_cmd->parsed()) {
      return runManifestCmd(ravdess_dir, manifest_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

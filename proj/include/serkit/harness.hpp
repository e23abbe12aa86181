// serkit/harness.hpp
//
// Experiment grid runner: the cross of {mfcc, gfcc} x architectures x
// {emotion, intensity}, with cached features, per-cell derived seeds,
// incremental CSV results and a rendered comparison report.
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

#ifndef SERKIT_HARNESS_HPP
#define SERKIT_HARNESS_HPP

#include "serkit/cepstra.hpp"
#include "serkit/dataset.hpp"
#include "serkit/train.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace serkit {

// The 13 architecture rows of the comparison tables.
std::vector<std::string> paperArchitectures();

struct ExperimentConfig {
  std::string manifest;
  Task task = Task::kEmotion;
  std::string representation = "both";  // mfcc | gfcc | both
  std::vector<std::string> architectures = paperArchitectures();
  PipelineConfig pipeline;  // kind is overridden per experiment
  Scalar split_ratio = 0.75;
  SplitMode split_mode = SplitMode::kStratified;
  std::uint64_t split_seed = 42;
  std::uint64_t train_seed = 42;
  std::string out_dir = "serkit-out";
  std::string cache_dir;  // empty = <out_dir>/features; "none" disables
  int workers = 1;
  TrainConfig training;
  bool save_checkpoints = false;

  std::string effectiveCacheDir() const;
};

// Applies one `key = value` setting; unknown keys are errors.
void applyConfigKey(ExperimentConfig& config, const std::string& key,
                    const std::string& value);

// Flat key/value file, one `key = value` per line, '#' comments.
void loadConfigFile(ExperimentConfig& config, const std::string& path);

// Per-cell seed; a pure function of its arguments, so adding rows to a grid
// never perturbs existing rows.
std::uint64_t experimentSeed(std::uint64_t base, const std::string& model,
                             const std::string& representation,
                             const std::string& task);

struct ExperimentResult {
  std::string task;
  std::string model;
  std::string representation;
  Scalar loss = std::numeric_limits<Scalar>::quiet_NaN();
  Scalar accuracy = std::numeric_limits<Scalar>::quiet_NaN();
  Scalar frame_accuracy = std::numeric_limits<Scalar>::quiet_NaN();
  int epochs = 0;
  std::uint64_t seed = 0;
  std::string error;  // empty on success

  bool ok() const { return error.empty(); }
};

// Features for every manifest entry, in manifest order. Relative manifest
// paths resolve against the manifest's directory. Uses the on-disk cache
// when cache_dir is non-empty.
std::vector<Matrix> loadFeatures(const std::vector<CorpusEntry>& entries,
                                 const std::string& manifest_path,
                                 const PipelineConfig& pipeline,
                                 const std::string& cache_dir,
                                 std::ostream* log);

// One grid cell: extract/load features, split, normalize, train, evaluate.
// Failures land in the error field instead of propagating.
ExperimentResult runExperiment(const ExperimentConfig& config,
                               const std::string& model_name, FilterKind kind,
                               std::ostream* log = nullptr);

// Every (architecture, representation) cell of the config. Results append
// to <out_dir>/results.csv as cells finish; cells already present there are
// not re-run, so interrupted grids resume. Ends by rewriting the sorted CSV
// and the markdown report.
std::vector<ExperimentResult> runGrid(const ExperimentConfig& config,
                                      std::ostream* log = nullptr);

// --- results & report -----------------------------------------------------

std::string resultsCsvHeader();
void writeResultsCsv(const std::string& path,
                     const std::vector<ExperimentResult>& results);
std::vector<ExperimentResult> readResultsCsv(const std::string& path);

// Tables grouped like the comparison grid: one row per architecture with
// loss/accuracy columns for each representation plus the per-row and mean
// GFCC - MFCC accuracy deltas. Numbers are rendered to 3 decimals.
std::string renderMarkdownReport(const std::vector<ExperimentResult>& results,
                                 const std::vector<std::string>& arch_order);

// Mean of (gfcc accuracy - mfcc accuracy) over architectures of `task`
// having both representations.
Scalar meanAccuracyDelta(const std::vector<ExperimentResult>& results,
                         const std::string& task);

// Writes results.csv (full precision) and report.md into out_dir.
void emitReport(const std::vector<ExperimentResult>& results,
                const std::string& out_dir,
                const std::vector<std::string>& arch_order);

// Scans a RAVDESS directory tree (Modality-Channel-Emotion-Intensity-
// Statement-Repetition-Actor.wav) into corpus entries with absolute paths.
std::vector<CorpusEntry> buildRavdessManifest(const std::string& root_dir);

}  // namespace serkit

#endif  // SERKIT_HARNESS_HPP

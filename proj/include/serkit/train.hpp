// serkit/train.hpp
//
// Training protocol: mini-batches of 60 through Adam, accuracy-monitored
// early stopping (min delta 0.0005, patience 15), best-epoch parameter
// snapshots. Fully connected models train per frame and are scored per
// utterance by averaging frame posteriors; recurrent models train per
// utterance directly.
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

#ifndef SERKIT_TRAIN_HPP
#define SERKIT_TRAIN_HPP

#include "serkit/dataset.hpp"
#include "serkit/nn.hpp"

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace serkit {

// Stops once the monitored metric has gone `patience` consecutive epochs
// without exceeding the best value by more than min_delta.
struct EarlyStopping {
  Scalar min_delta = 0.0005;
  int patience = 15;

  Scalar best = -std::numeric_limits<Scalar>::infinity();
  int best_epoch = -1;
  int stalled = 0;

  // Returns true when the metric improved (resets the stall counter).
  bool update(Scalar metric, int epoch) {
    if (metric > best + min_delta) {
      best = metric;
      best_epoch = epoch;
      stalled = 0;
      return true;
    }
    ++stalled;
    return false;
  }

  bool shouldStop() const { return stalled >= patience; }
};

struct TrainConfig {
  std::uint64_t seed = 42;
  std::size_t batch_size = 60;
  AdamConfig adam;
  int max_epochs = 500;
  Scalar min_delta = 0.0005;
  int patience = 15;
  // 0 monitors training accuracy itself; > 0 holds out that fraction of the
  // training utterances and monitors them instead.
  Scalar monitor_holdout = 0.0;
  Index pad_target = 820;
  bool shuffle = true;
  std::ostream* log = nullptr;
};

struct EpochStats {
  int epoch = 0;
  Scalar mean_batch_loss = 0.0;
  Scalar monitored_accuracy = 0.0;
};

struct TrainedModel {
  ModelSpec spec;
  ParamSet parameters;  // snapshot from the best monitored epoch
  std::vector<EpochStats> train_log;
  int epochs_trained = 0;
  int best_epoch = -1;
};

TrainedModel train(const ModelSpec& spec, const SampleSet& train_set,
                   const TrainConfig& config);

struct EvalResult {
  Scalar loss = 0.0;      // mean cross-entropy of utterance posteriors
  Scalar accuracy = 0.0;  // utterance-level
  Scalar frame_accuracy = 0.0;  // per-frame vote accuracy; equals accuracy
                                // for recurrent models
};

// Deterministic: dropout off, argmax ties resolved to the lowest class
// index.
EvalResult evaluate(const ModelSpec& spec, const ParamSet& parameters,
                    const SampleSet& test_set, Index pad_target = 820);

// Utterance-level accuracy only (the early-stopping monitor).
Scalar utteranceAccuracy(const Model& model, const SampleSet& samples,
                         Index pad_target);

// --- checkpoints --------------------------------------------------------
//
// Binary: magic "SERMODL1", u32 version, spec fields, u64 pipeline config
// hash, i32 epochs trained, u32 tensor count, then per tensor a
// length-prefixed name, u32 rows, u32 cols and little-endian doubles in
// column-major order.

void saveModel(const std::string& path, const TrainedModel& model,
               std::uint64_t pipeline_hash);

struct LoadedModel {
  ModelSpec spec;
  ParamSet parameters;
  std::uint64_t pipeline_hash = 0;
  int epochs_trained = 0;
};

LoadedModel loadModel(const std::string& path);

}  // namespace serkit

#endif  // SERKIT_TRAIN_HPP

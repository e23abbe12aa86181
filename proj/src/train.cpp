// serkit/train.cpp
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

#include "serkit/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace serkit {

namespace {

void validateSampleSet(const SampleSet& samples, const ModelSpec& spec,
                       const char* what) {
  if (samples.size() == 0) {
    throw ConfigError(std::string(what) + ": empty sample set");
  }
  if (samples.reps.size() != samples.labels.size()) {
    throw ConfigError(std::string(what) + ": reps/labels size mismatch");
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples.labels[i] < 0 || samples.labels[i] >= spec.num_classes) {
      throw InputError(std::string(what) + ": label " +
                       std::to_string(samples.labels[i]) +
                       " out of range for " +
                       std::to_string(spec.num_classes) + " classes");
    }
    if (samples.reps[i]->cols() != spec.input_dim) {
      throw InputError(std::string(what) + ": feature width " +
                       std::to_string(samples.reps[i]->cols()) +
                       " does not match model input " +
                       std::to_string(spec.input_dim));
    }
    if (samples.reps[i]->rows() < 1) {
      throw InputError(std::string(what) + ": sample " + std::to_string(i) +
                       " has no frames");
    }
  }
}

Index clampedLength(const Matrix& rep, Index pad_target) {
  return std::min(rep.rows(), pad_target);
}

// All real frames of the set stacked row-wise, each carrying its
// utterance's label. This is the training view for the F(w) family.
struct FrameDataset {
  Matrix frames;
  std::vector<int> labels;
};

FrameDataset buildFrameDataset(const SampleSet& samples, Index pad_target) {
  Index total = 0;
  for (const Matrix* rep : samples.reps) {
    total += clampedLength(*rep, pad_target);
  }
  FrameDataset out;
  out.frames.resize(total, samples.dim());
  out.labels.reserve(static_cast<std::size_t>(total));
  Index row = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Index len = clampedLength(*samples.reps[i], pad_target);
    out.frames.middleRows(row, len) = samples.reps[i]->topRows(len);
    out.labels.insert(out.labels.end(), static_cast<std::size_t>(len),
                      samples.labels[i]);
    row += len;
  }
  return out;
}

Matrix batchPosteriorsRecurrent(const Model& model, const SampleSet& samples,
                                Index pad_target, std::size_t batch_size) {
  Matrix posteriors(samples.size(), model.spec().num_classes);
  std::size_t start = 0;
  while (start < samples.size()) {
    const std::size_t count = std::min(batch_size, samples.size() - start);
    std::vector<const Matrix*> reps(count);
    std::vector<Index> lengths(count);
    for (std::size_t i = 0; i < count; ++i) {
      reps[i] = samples.reps[start + i];
      lengths[i] = clampedLength(*reps[i], pad_target);
    }
    posteriors.middleRows(static_cast<Index>(start),
                          static_cast<Index>(count)) =
        model.sequencePosteriors(reps, lengths);
    start += count;
  }
  return posteriors;
}

}  // namespace

Scalar utteranceAccuracy(const Model& model, const SampleSet& samples,
                         Index pad_target) {
  std::size_t correct = 0;
  if (model.spec().isRecurrent()) {
    const Matrix posteriors =
        batchPosteriorsRecurrent(model, samples, pad_target, 60);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (argmaxLowest(posteriors.row(static_cast<Index>(i))) ==
          samples.labels[i]) {
        ++correct;
      }
    }
  } else {
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const Index len = clampedLength(*samples.reps[i], pad_target);
      const Matrix probs =
          model.framePosteriors(samples.reps[i]->topRows(len));
      const RowVector mean = probs.colwise().mean();
      if (argmaxLowest(mean) == samples.labels[i]) ++correct;
    }
  }
  return static_cast<Scalar>(correct) / static_cast<Scalar>(samples.size());
}

TrainedModel train(const ModelSpec& spec, const SampleSet& train_set,
                   const TrainConfig& config) {
  validateSampleSet(train_set, spec, "train");

  Model model(spec, deriveSeed(config.seed, "init"));
  Adam adam(config.adam);
  Rng dropout_rng(deriveSeed(config.seed, "dropout"));

  // Optionally hold out a fraction of the utterances as the monitored set;
  // by default the training set monitors itself.
  SampleSet fit_set;
  SampleSet monitor_set;
  fit_set.num_classes = monitor_set.num_classes = spec.num_classes;
  if (config.monitor_holdout > 0.0) {
    std::vector<std::size_t> order = epochOrder(
        train_set.size(), deriveSeed(config.seed, "monitor-split"), 0, true);
    const std::size_t held = std::max<std::size_t>(
        1, static_cast<std::size_t>(
               std::lround(config.monitor_holdout * train_set.size())));
    if (held >= train_set.size()) {
      throw ConfigError("train: monitor_holdout leaves no training data");
    }
    for (std::size_t i = 0; i < order.size(); ++i) {
      SampleSet& dst = i < held ? monitor_set : fit_set;
      dst.reps.push_back(train_set.reps[order[i]]);
      dst.labels.push_back(train_set.labels[order[i]]);
    }
  } else {
    fit_set = train_set;
    monitor_set = train_set;
  }

  FrameDataset frame_data;
  if (!spec.isRecurrent()) {
    frame_data = buildFrameDataset(fit_set, config.pad_target);
  }
  const std::size_t num_samples = spec.isRecurrent()
                                      ? fit_set.size()
                                      : frame_data.labels.size();

  EarlyStopping stopping{config.min_delta, config.patience};
  ParamSet best_params = model.params();
  std::vector<EpochStats> log;

  const std::uint64_t shuffle_seed = deriveSeed(config.seed, "shuffle");
  int epochs_run = 0;
  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    const std::vector<std::size_t> order =
        epochOrder(num_samples, shuffle_seed, epoch, config.shuffle);

    Scalar loss_sum = 0.0;
    std::size_t batches = 0;
    std::size_t start = 0;
    while (start < order.size()) {
      const std::size_t count =
          std::min(config.batch_size, order.size() - start);
      Scalar loss;
      if (spec.isRecurrent()) {
        std::vector<const Matrix*> reps(count);
        std::vector<Index> lengths(count);
        std::vector<int> labels(count);
        for (std::size_t i = 0; i < count; ++i) {
          const std::size_t idx = order[start + i];
          reps[i] = fit_set.reps[idx];
          lengths[i] = clampedLength(*reps[i], config.pad_target);
          labels[i] = fit_set.labels[idx];
        }
        loss = model.lossAndGradSequences(reps, lengths, labels);
      } else {
        Matrix x(static_cast<Index>(count), frame_data.frames.cols());
        std::vector<int> labels(count);
        for (std::size_t i = 0; i < count; ++i) {
          const std::size_t idx = order[start + i];
          x.row(static_cast<Index>(i)) =
              frame_data.frames.row(static_cast<Index>(idx));
          labels[i] = frame_data.labels[idx];
        }
        loss = model.lossAndGradFrames(x, labels, &dropout_rng);
      }
      if (!std::isfinite(loss)) {
        throw std::runtime_error(
            "train: loss diverged (non-finite) at epoch " +
            std::to_string(epoch) + ", batch " + std::to_string(batches) +
            " of " + spec.name());
      }
      adam.step(model.params(), model.grads());
      loss_sum += loss;
      ++batches;
      start += count;
    }

    const Scalar accuracy =
        utteranceAccuracy(model, monitor_set, config.pad_target);
    log.push_back({epoch, loss_sum / static_cast<Scalar>(batches), accuracy});
    if (config.log != nullptr) {
      (*config.log) << "epoch " << epoch << " loss "
                    << loss_sum / static_cast<Scalar>(batches) << " acc "
                    << accuracy << "\n";
    }

    epochs_run = epoch + 1;
    if (stopping.update(accuracy, epoch)) {
      best_params = model.params();
    }
    if (stopping.shouldStop()) break;
  }

  TrainedModel out;
  out.spec = spec;
  out.parameters = std::move(best_params);
  out.train_log = std::move(log);
  out.epochs_trained = epochs_run;
  out.best_epoch = stopping.best_epoch;
  return out;
}

EvalResult evaluate(const ModelSpec& spec, const ParamSet& parameters,
                    const SampleSet& test_set, Index pad_target) {
  validateSampleSet(test_set, spec, "evaluate");
  Model model(spec, /*init_seed=*/0);
  model.setParams(parameters);

  const std::size_t n = test_set.size();
  EvalResult result;
  Scalar loss_sum = 0.0;
  std::size_t correct = 0;
  std::size_t frames_correct = 0;
  std::size_t frames_total = 0;

  Matrix posteriors;
  if (spec.isRecurrent()) {
    posteriors = batchPosteriorsRecurrent(model, test_set, pad_target, 60);
  } else {
    posteriors.resize(static_cast<Index>(n), spec.num_classes);
    for (std::size_t i = 0; i < n; ++i) {
      const Index len = clampedLength(*test_set.reps[i], pad_target);
      const Matrix probs =
          model.framePosteriors(test_set.reps[i]->topRows(len));
      posteriors.row(static_cast<Index>(i)) = probs.colwise().mean();
      for (Index t = 0; t < probs.rows(); ++t) {
        if (argmaxLowest(probs.row(t)) == test_set.labels[i]) {
          ++frames_correct;
        }
      }
      frames_total += static_cast<std::size_t>(len);
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    const RowVector row = posteriors.row(static_cast<Index>(i));
    if (argmaxLowest(row) == test_set.labels[i]) ++correct;
    const Scalar p = std::max(row(test_set.labels[i]), 1e-300);
    loss_sum -= std::log(p);
  }

  result.loss = loss_sum / static_cast<Scalar>(n);
  result.accuracy = static_cast<Scalar>(correct) / static_cast<Scalar>(n);
  result.frame_accuracy =
      spec.isRecurrent()
          ? result.accuracy
          : static_cast<Scalar>(frames_correct) /
                static_cast<Scalar>(frames_total);
  return result;
}

// --- checkpoints ------------------------------------------------------------

namespace {

constexpr char kModelMagic[8] = {'S', 'E', 'R', 'M', 'O', 'D', 'L', '1'};
constexpr std::uint32_t kModelVersion = 1;

template <typename T>
void putRaw(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(value));
}

template <typename T>
void getRaw(std::istream& in, T& value, const std::string& path) {
  in.read(reinterpret_cast<char*>(&value), sizeof(value));
  if (!in) {
    throw IoError("loadModel: truncated file " + path);
  }
}

void putString(std::ostream& out, const std::string& s) {
  putRaw(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string getString(std::istream& in, const std::string& path) {
  std::uint32_t size = 0;
  getRaw(in, size, path);
  if (size > 4096) {
    throw IoError("loadModel: implausible string length in " + path);
  }
  std::string s(size, '\0');
  in.read(s.data(), size);
  if (!in) {
    throw IoError("loadModel: truncated file " + path);
  }
  return s;
}

}  // namespace

void saveModel(const std::string& path, const TrainedModel& model,
               std::uint64_t pipeline_hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("saveModel: cannot open " + path);
  }
  out.write(kModelMagic, sizeof(kModelMagic));
  putRaw(out, kModelVersion);
  putString(out, model.spec.name());
  putRaw(out, static_cast<std::int32_t>(model.spec.num_classes));
  putRaw(out, static_cast<std::int32_t>(model.spec.input_dim));
  putRaw(out, pipeline_hash);
  putRaw(out, static_cast<std::int32_t>(model.epochs_trained));
  putRaw(out, static_cast<std::uint32_t>(model.parameters.size()));
  for (const Tensor& t : model.parameters) {
    putString(out, t.name);
    putRaw(out, static_cast<std::uint32_t>(t.value.rows()));
    putRaw(out, static_cast<std::uint32_t>(t.value.cols()));
    for (Index j = 0; j < t.value.cols(); ++j) {
      for (Index i = 0; i < t.value.rows(); ++i) {
        putRaw(out, t.value(i, j));
      }
    }
  }
  if (!out) {
    throw IoError("saveModel: write failed for " + path);
  }
}

LoadedModel loadModel(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("loadModel: cannot open " + path);
  }
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kModelMagic, sizeof(magic)) != 0) {
    throw IoError("loadModel: " + path + " is not a model checkpoint");
  }
  std::uint32_t version = 0;
  getRaw(in, version, path);
  if (version != kModelVersion) {
    throw IoError("loadModel: unsupported version in " + path);
  }

  const std::string arch = getString(in, path);
  std::int32_t num_classes = 0, input_dim = 0;
  getRaw(in, num_classes, path);
  getRaw(in, input_dim, path);

  LoadedModel loaded;
  loaded.spec = ModelSpec::parse(arch, num_classes, input_dim);
  getRaw(in, loaded.pipeline_hash, path);
  std::int32_t epochs = 0;
  getRaw(in, epochs, path);
  loaded.epochs_trained = epochs;

  std::uint32_t count = 0;
  getRaw(in, count, path);
  for (std::uint32_t k = 0; k < count; ++k) {
    Tensor t;
    t.name = getString(in, path);
    std::uint32_t rows = 0, cols = 0;
    getRaw(in, rows, path);
    getRaw(in, cols, path);
    t.value.resize(rows, cols);
    for (std::uint32_t j = 0; j < cols; ++j) {
      for (std::uint32_t i = 0; i < rows; ++i) {
        getRaw(in, t.value(i, j), path);
      }
    }
    loaded.parameters.push_back(std::move(t));
  }
  return loaded;
}

}  // namespace serkit

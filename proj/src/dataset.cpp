// serkit/dataset.cpp
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

#include "serkit/dataset.hpp"

#include "serkit/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace serkit {

namespace {

constexpr std::array<const char*, kNumEmotions> kEmotionNames = {
    "anger",   "calm",    "disgust",  "fear",
    "happiness", "sadness", "surprise", "neutral"};

constexpr std::array<const char*, kNumIntensities> kIntensityNames = {
    "normal", "strong"};

}  // namespace

std::string toString(Emotion e) { return kEmotionNames[static_cast<int>(e)]; }
std::string toString(Intensity i) {
  return kIntensityNames[static_cast<int>(i)];
}
std::string toString(Task t) {
  return t == Task::kEmotion ? "emotion" : "intensity";
}

Emotion emotionFromString(const std::string& name) {
  for (int i = 0; i < kNumEmotions; ++i) {
    if (name == kEmotionNames[i]) return static_cast<Emotion>(i);
  }
  throw ParseError("unknown emotion '" + name + "'");
}

Intensity intensityFromString(const std::string& name) {
  for (int i = 0; i < kNumIntensities; ++i) {
    if (name == kIntensityNames[i]) return static_cast<Intensity>(i);
  }
  throw ParseError("unknown intensity '" + name + "'");
}

Task taskFromString(const std::string& name) {
  if (name == "emotion") return Task::kEmotion;
  if (name == "intensity") return Task::kIntensity;
  throw ParseError("unknown task '" + name +
                   "' (expected emotion or intensity)");
}

std::vector<CorpusEntry> loadManifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("loadManifest: cannot open " + path);
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError("loadManifest: " + path + " is empty");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "path,emotion,intensity,speaker") {
    throw ParseError("loadManifest: " + path +
                     " line 1: expected header 'path,emotion,intensity,"
                     "speaker', got '" +
                     line + "'");
  }

  std::vector<CorpusEntry> entries;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    std::array<std::string, 4> fields;
    std::size_t start = 0;
    for (int f = 0; f < 4; ++f) {
      const std::size_t comma = line.find(',', start);
      if (f < 3) {
        if (comma == std::string::npos) {
          throw ParseError("loadManifest: " + path + " line " +
                           std::to_string(line_no) + ": expected 4 fields");
        }
        fields[f] = line.substr(start, comma - start);
        start = comma + 1;
      } else {
        if (comma != std::string::npos) {
          throw ParseError("loadManifest: " + path + " line " +
                           std::to_string(line_no) + ": expected 4 fields");
        }
        fields[f] = line.substr(start);
      }
    }

    CorpusEntry entry;
    entry.path = fields[0];
    try {
      entry.emotion = emotionFromString(fields[1]);
      entry.intensity = intensityFromString(fields[2]);
    } catch (const ParseError& e) {
      throw ParseError("loadManifest: " + path + " line " +
                       std::to_string(line_no) + ": " + e.what());
    }
    entry.speaker = fields[3];
    if (entry.path.empty() || entry.speaker.empty()) {
      throw ParseError("loadManifest: " + path + " line " +
                       std::to_string(line_no) + ": empty path or speaker");
    }
    if (entry.emotion == Emotion::kNeutral &&
        entry.intensity != Intensity::kNormal) {
      throw ParseError("loadManifest: " + path + " line " +
                       std::to_string(line_no) +
                       ": neutral entries must have intensity 'normal'");
    }
    entries.push_back(std::move(entry));
  }
  return entries;
}

void writeManifest(const std::string& path,
                   const std::vector<CorpusEntry>& entries) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("writeManifest: cannot open " + path);
  }
  out << "path,emotion,intensity,speaker\n";
  for (const CorpusEntry& e : entries) {
    out << e.path << ',' << toString(e.emotion) << ',' << toString(e.intensity)
        << ',' << e.speaker << '\n';
  }
  if (!out) {
    throw IoError("writeManifest: write failed for " + path);
  }
}

std::pair<std::vector<CorpusEntry>, std::vector<CorpusEntry>> splitTrainTest(
    const std::vector<CorpusEntry>& entries, Scalar ratio,
    std::uint64_t seed) {
  if (entries.empty()) {
    throw ConfigError("splitTrainTest: corpus is empty");
  }
  if (!(ratio >= 0.0 && ratio <= 1.0)) {
    throw ConfigError("splitTrainTest: ratio must be in [0, 1], got " +
                      std::to_string(ratio));
  }

  // Group indices by stratum, keyed (emotion, intensity) in canonical order.
  std::map<std::pair<int, int>, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    strata[{static_cast<int>(entries[i].emotion),
            static_cast<int>(entries[i].intensity)}]
        .push_back(i);
  }

  // An emotion present at only part of its expected intensity grid means a
  // stratum is empty: a manifest labeling bug, not a smaller corpus.
  for (int e = 0; e < kNumEmotions; ++e) {
    const Emotion emotion = static_cast<Emotion>(e);
    const bool present = strata.count({e, 0}) > 0 || strata.count({e, 1}) > 0;
    if (!present || emotion == Emotion::kNeutral) continue;
    for (int i = 0; i < kNumIntensities; ++i) {
      if (strata.count({e, i}) == 0) {
        throw ConfigError("splitTrainTest: empty stratum (" +
                          toString(emotion) + ", " +
                          toString(static_cast<Intensity>(i)) + ")");
      }
    }
  }

  std::vector<CorpusEntry> train, test;
  for (auto& [key, indices] : strata) {
    Rng rng(deriveSeed(seed, "split-stratum",
                       static_cast<std::uint64_t>(key.first) * 16 +
                           static_cast<std::uint64_t>(key.second)));
    rng.shuffle(indices);
    const std::size_t take =
        static_cast<std::size_t>(std::lround(ratio * indices.size()));
    for (std::size_t i = 0; i < indices.size(); ++i) {
      (i < take ? train : test).push_back(entries[indices[i]]);
    }
  }
  return {std::move(train), std::move(test)};
}

std::pair<std::vector<CorpusEntry>, std::vector<CorpusEntry>>
splitBySpeaker(const std::vector<CorpusEntry>& entries, Scalar ratio,
               std::uint64_t seed) {
  if (entries.empty()) {
    throw ConfigError("splitBySpeaker: corpus is empty");
  }
  std::vector<std::string> speakers;
  for (const CorpusEntry& e : entries) {
    if (std::find(speakers.begin(), speakers.end(), e.speaker) ==
        speakers.end()) {
      speakers.push_back(e.speaker);
    }
  }
  Rng rng(deriveSeed(seed, "split-speakers"));
  rng.shuffle(speakers);
  const std::size_t take =
      static_cast<std::size_t>(std::lround(ratio * speakers.size()));
  std::vector<std::string> train_speakers(speakers.begin(),
                                          speakers.begin() + take);

  std::vector<CorpusEntry> train, test;
  for (const CorpusEntry& e : entries) {
    const bool in_train =
        std::find(train_speakers.begin(), train_speakers.end(), e.speaker) !=
        train_speakers.end();
    (in_train ? train : test).push_back(e);
  }
  return {std::move(train), std::move(test)};
}

int numClasses(Task task) { return task == Task::kEmotion ? kNumEmotions : 2; }

int labelFor(Task task, const CorpusEntry& entry) {
  if (task == Task::kEmotion) {
    return static_cast<int>(entry.emotion);
  }
  if (entry.emotion == Emotion::kNeutral) {
    throw InputError(
        "labelFor: neutral entries carry no intensity label; exclude them "
        "from the intensity task");
  }
  return static_cast<int>(entry.intensity);
}

std::string labelName(Task task, int label) {
  if (task == Task::kEmotion) {
    return toString(static_cast<Emotion>(label));
  }
  return toString(static_cast<Intensity>(label));
}

Matrix Normalizer::apply(const Matrix& features) const {
  if (features.cols() != mean.size()) {
    throw ConfigError("Normalizer: fitted on " + std::to_string(mean.size()) +
                      " dims, input has " + std::to_string(features.cols()));
  }
  return ((features.rowwise() - mean.transpose()).array().rowwise() /
          std.transpose().array())
      .matrix();
}

Normalizer fitNormalizer(const std::vector<const Matrix*>& train_reps,
                         Scalar std_floor) {
  if (!(std_floor > 0.0)) {
    throw ConfigError("fitNormalizer: std_floor must be positive");
  }
  Index dim = -1;
  Index total = 0;
  for (const Matrix* rep : train_reps) {
    if (dim < 0) dim = rep->cols();
    if (rep->cols() != dim) {
      throw ConfigError("fitNormalizer: inconsistent feature widths");
    }
    total += rep->rows();
  }
  if (total < 2) {
    throw ConfigError("fitNormalizer: need at least 2 training frames, got " +
                      std::to_string(total));
  }

  Vector sum = Vector::Zero(dim);
  Vector sum_sq = Vector::Zero(dim);
  for (const Matrix* rep : train_reps) {
    sum += rep->colwise().sum().transpose();
    sum_sq += rep->array().square().matrix().colwise().sum().transpose();
  }

  Normalizer norm;
  norm.mean = sum / static_cast<Scalar>(total);
  const Vector variance =
      (sum_sq / static_cast<Scalar>(total) - norm.mean.cwiseProduct(norm.mean))
          .cwiseMax(0.0);
  norm.std = variance.cwiseSqrt().cwiseMax(std_floor);
  return norm;
}

PaddedFeatures padOrTruncate(const Matrix& rep, Index target) {
  if (target < 1) {
    throw ConfigError("padOrTruncate: target must be >= 1");
  }
  PaddedFeatures out;
  out.true_length = std::min(rep.rows(), target);
  out.rows = Matrix::Zero(target, rep.cols());
  out.rows.topRows(out.true_length) = rep.topRows(out.true_length);
  return out;
}

BatchIterator::BatchIterator(const SampleSet& samples, std::size_t batch_size,
                             Index pad_target, std::uint64_t seed, int epoch,
                             bool shuffle)
    : samples_(samples), batch_size_(batch_size), pad_target_(pad_target) {
  if (samples.size() == 0) {
    throw ConfigError("BatchIterator: dataset is empty");
  }
  if (batch_size_ == 0) {
    throw ConfigError("BatchIterator: batch_size must be >= 1");
  }
  order_ = epochOrder(samples.size(), seed, epoch, shuffle);
}

std::size_t BatchIterator::numBatches() const {
  return (order_.size() + batch_size_ - 1) / batch_size_;
}

std::optional<PaddedBatch> BatchIterator::next() {
  if (cursor_ >= order_.size()) return std::nullopt;
  const std::size_t count = std::min(batch_size_, order_.size() - cursor_);

  PaddedBatch batch;
  batch.inputs.reserve(count);
  batch.true_lengths.reserve(count);
  batch.labels.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t idx = order_[cursor_ + i];
    PaddedFeatures padded = padOrTruncate(*samples_.reps[idx], pad_target_);
    batch.inputs.push_back(std::move(padded.rows));
    batch.true_lengths.push_back(padded.true_length);
    batch.labels.push_back(samples_.labels[idx]);
  }
  cursor_ += count;
  return batch;
}

}  // namespace serkit

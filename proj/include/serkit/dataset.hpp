// serkit/dataset.hpp
//
// Corpus ingestion and dataset mechanics: the manifest format, the
// stratified 75/25 split, train-set normalization, fixed-length padding and
// deterministic batch iteration.
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

#ifndef SERKIT_DATASET_HPP
#define SERKIT_DATASET_HPP

#include "serkit/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace serkit {

// Class index order is fixed; it defines label indices everywhere.
enum class Emotion {
  kAnger = 0,
  kCalm,
  kDisgust,
  kFear,
  kHappiness,
  kSadness,
  kSurprise,
  kNeutral,
};
inline constexpr int kNumEmotions = 8;

enum class Intensity { kNormal = 0, kStrong = 1 };
inline constexpr int kNumIntensities = 2;

enum class Task { kEmotion, kIntensity };

std::string toString(Emotion e);
std::string toString(Intensity i);
std::string toString(Task t);
Emotion emotionFromString(const std::string& name);
Intensity intensityFromString(const std::string& name);
Task taskFromString(const std::string& name);

struct CorpusEntry {
  std::string path;
  Emotion emotion = Emotion::kNeutral;
  Intensity intensity = Intensity::kNormal;
  std::string speaker;
};

// CSV with header `path,emotion,intensity,speaker`. Label strings are
// validated against the closed sets; neutral must carry intensity normal.
// Parse failures name the offending line.
std::vector<CorpusEntry> loadManifest(const std::string& path);

void writeManifest(const std::string& path,
                   const std::vector<CorpusEntry>& entries);

enum class SplitMode { kStratified, kSpeakerDisjoint };

// Stratified split: within each (emotion, intensity) stratum,
// round(ratio * count) entries go to train, the rest to test. Deterministic
// in (entries order, seed). An emotion present at only one of its expected
// intensities is a configuration error (empty stratum).
std::pair<std::vector<CorpusEntry>, std::vector<CorpusEntry>> splitTrainTest(
    const std::vector<CorpusEntry>& entries, Scalar ratio, std::uint64_t seed);

// Speaker-disjoint variant: round(ratio * #speakers) whole speakers go to
// train.
std::pair<std::vector<CorpusEntry>, std::vector<CorpusEntry>>
splitBySpeaker(const std::vector<CorpusEntry>& entries, Scalar ratio,
               std::uint64_t seed);

int numClasses(Task task);
// Class index of an entry under the task. Neutral has no intensity
// contrast, so it carries no intensity label; callers exclude it first.
int labelFor(Task task, const CorpusEntry& entry);
std::string labelName(Task task, int label);

// Per-dimension standardization fitted on training frames only.
struct Normalizer {
  Vector mean;
  Vector std;  // every entry >= the floor used at fit time

  Matrix apply(const Matrix& features) const;
};

Normalizer fitNormalizer(const std::vector<const Matrix*>& train_reps,
                         Scalar std_floor = 1e-8);

struct PaddedFeatures {
  Matrix rows;        // target x D; rows beyond true_length are zero
  Index true_length;  // <= target
};

// T < target appends zero rows; T >= target keeps the first target rows.
PaddedFeatures padOrTruncate(const Matrix& rep, Index target);

// A labeled set of variable-length utterance features (true length, no
// padding). Matrices are owned elsewhere and must outlive the set.
struct SampleSet {
  std::vector<const Matrix*> reps;
  std::vector<int> labels;
  int num_classes = 0;

  std::size_t size() const { return reps.size(); }
  Index dim() const { return reps.empty() ? 0 : reps.front()->cols(); }
};

struct PaddedBatch {
  std::vector<Matrix> inputs;       // B matrices, each pad_target x D
  std::vector<Index> true_lengths;  // <= pad_target
  std::vector<int> labels;

  std::size_t size() const { return inputs.size(); }
};

// Yields every sample exactly once per epoch in batches of batch_size (the
// final batch may be smaller). The visiting order is a deterministic
// function of (seed, epoch) when shuffling, manifest order otherwise.
class BatchIterator {
 public:
  BatchIterator(const SampleSet& samples, std::size_t batch_size,
                Index pad_target, std::uint64_t seed, int epoch, bool shuffle);

  std::optional<PaddedBatch> next();
  std::size_t numBatches() const;

 private:
  const SampleSet& samples_;
  std::size_t batch_size_;
  Index pad_target_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

}  // namespace serkit

#endif  // SERKIT_DATASET_HPP

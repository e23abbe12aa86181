// serkit/harness.cpp
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

#include "serkit/rng.hpp"
#include "serkit/wav.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace serkit {

namespace fs = std::filesystem;

std::vector<std::string> paperArchitectures() {
  return {"F(800)", "F(400)", "F(200)", "F(800)/F(800)", "F(400)/F(400)",
          "F(200)/F(200)", "L(800)", "L(400)", "L(200)", "L(800)/A",
          "L(400)/A", "L(200)/A", "L(100)/A"};
}

std::string ExperimentConfig::effectiveCacheDir() const {
  if (cache_dir == "none") return {};
  if (cache_dir.empty()) return (fs::path(out_dir) / "features").string();
  return cache_dir;
}

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

Scalar parseScalar(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const Scalar v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ParseError("config: key '" + key + "' has non-numeric value '" +
                     value + "'");
  }
}

int parseInt(const std::string& key, const std::string& value) {
  const Scalar v = parseScalar(key, value);
  if (v != std::floor(v)) {
    throw ParseError("config: key '" + key + "' expects an integer, got '" +
                     value + "'");
  }
  return static_cast<int>(v);
}

std::uint64_t parseSeed(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const std::uint64_t v = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ParseError("config: key '" + key + "' has non-integer value '" +
                     value + "'");
  }
}

bool parseBool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ParseError("config: key '" + key + "' expects true/false, got '" +
                   value + "'");
}

std::vector<std::string> splitList(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

void applyConfigKey(ExperimentConfig& config, const std::string& key,
                    const std::string& value) {
  if (key == "manifest") {
    config.manifest = value;
  } else if (key == "task") {
    config.task = taskFromString(value);
  } else if (key == "representation") {
    if (value != "mfcc" && value != "gfcc" && value != "both") {
      throw ParseError("config: representation must be mfcc, gfcc or both");
    }
    config.representation = value;
  } else if (key == "architectures") {
    config.architectures = splitList(value);
    if (config.architectures.empty()) {
      throw ParseError("config: architectures list is empty");
    }
    for (const std::string& a : config.architectures) {
      ModelSpec::parse(a, 2, 1);  // validates the notation
    }
  } else if (key == "out_dir") {
    config.out_dir = value;
  } else if (key == "cache_dir") {
    config.cache_dir = value;
  } else if (key == "workers") {
    config.workers = std::max(1, parseInt(key, value));
  } else if (key == "preemphasis") {
    config.pipeline.preemphasis = parseScalar(key, value);
  } else if (key == "frame_len_ms") {
    config.pipeline.frame_len_s = parseScalar(key, value) / 1000.0;
  } else if (key == "hop_ms") {
    config.pipeline.hop_s = parseScalar(key, value) / 1000.0;
  } else if (key == "mel_filters") {
    config.pipeline.mel_filters = parseInt(key, value);
  } else if (key == "gammatone_filters") {
    config.pipeline.gammatone_filters = parseInt(key, value);
  } else if (key == "fmin") {
    config.pipeline.fmin = parseScalar(key, value);
  } else if (key == "fmax") {
    config.pipeline.fmax = parseScalar(key, value);
  } else if (key == "log_floor") {
    config.pipeline.log_floor = parseScalar(key, value);
  } else if (key == "num_coeffs") {
    config.pipeline.num_coeffs = parseInt(key, value);
  } else if (key == "delta_window") {
    config.pipeline.delta_window = parseInt(key, value);
  } else if (key == "context") {
    config.pipeline.context = parseInt(key, value);
  } else if (key == "split_ratio") {
    config.split_ratio = parseScalar(key, value);
  } else if (key == "split_mode") {
    if (value == "stratified") {
      config.split_mode = SplitMode::kStratified;
    } else if (value == "speaker") {
      config.split_mode = SplitMode::kSpeakerDisjoint;
    } else {
      throw ParseError("config: split_mode must be stratified or speaker");
    }
  } else if (key == "split_seed") {
    config.split_seed = parseSeed(key, value);
  } else if (key == "train_seed") {
    config.train_seed = parseSeed(key, value);
  } else if (key == "batch_size") {
    config.training.batch_size =
        static_cast<std::size_t>(std::max(1, parseInt(key, value)));
  } else if (key == "learning_rate") {
    config.training.adam.learning_rate = parseScalar(key, value);
  } else if (key == "max_epochs") {
    config.training.max_epochs = parseInt(key, value);
  } else if (key == "patience") {
    config.training.patience = parseInt(key, value);
  } else if (key == "min_delta") {
    config.training.min_delta = parseScalar(key, value);
  } else if (key == "monitor_holdout") {
    config.training.monitor_holdout = parseScalar(key, value);
  } else if (key == "pad_frames") {
    config.training.pad_target = parseInt(key, value);
  } else if (key == "save_checkpoints") {
    config.save_checkpoints = parseBool(key, value);
  } else {
    throw ParseError("config: unknown key '" + key + "'");
  }
}

void loadConfigFile(ExperimentConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("loadConfigFile: cannot open " + path);
  }
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError("loadConfigFile: " + path + " line " +
                       std::to_string(line_no) + ": expected key = value");
    }
    try {
      applyConfigKey(config, trim(line.substr(0, eq)),
                     trim(line.substr(eq + 1)));
    } catch (const std::exception& e) {
      throw ParseError("loadConfigFile: " + path + " line " +
                       std::to_string(line_no) + ": " + e.what());
    }
  }
}

std::uint64_t experimentSeed(std::uint64_t base, const std::string& model,
                             const std::string& representation,
                             const std::string& task) {
  return mix64(base ^ fnv1a64(task + "|" + representation + "|" + model));
}

std::vector<Matrix> loadFeatures(const std::vector<CorpusEntry>& entries,
                                 const std::string& manifest_path,
                                 const PipelineConfig& pipeline,
                                 const std::string& cache_dir,
                                 std::ostream* log) {
  const fs::path base = fs::path(manifest_path).parent_path();
  const std::uint64_t hash = pipeline.configHash();

  std::vector<Matrix> features;
  features.reserve(entries.size());
  std::size_t cache_hits = 0;
  for (const CorpusEntry& entry : entries) {
    const fs::path wav_path = fs::path(entry.path).is_absolute()
                                  ? fs::path(entry.path)
                                  : base / entry.path;
    std::string cache_file;
    if (!cache_dir.empty()) {
      cache_file = featureCachePath(cache_dir, hash, entry.path);
      if (fs::exists(cache_file)) {
        features.push_back(readFeatureFile(cache_file, hash).frames);
        ++cache_hits;
        continue;
      }
    }
    const Waveform wave = readWav(wav_path.string());
    ContextRepresentation rep = extractFeatures(wave, pipeline);
    if (!cache_file.empty()) {
      fs::create_directories(fs::path(cache_file).parent_path());
      writeFeatureFile(cache_file, rep, hash);
    }
    features.push_back(std::move(rep.frames));
  }
  if (log != nullptr) {
    (*log) << "features[" << toString(pipeline.kind) << "]: "
           << entries.size() << " utterances, " << cache_hits
           << " from cache\n";
  }
  return features;
}

namespace {

std::string sanitizeCsvField(std::string s) {
  for (char& c : s) {
    if (c == ',') c = ';';
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

std::string fullPrecision(Scalar v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fixed3(Scalar v) {
  if (std::isnan(v)) return "-";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

std::string checkpointName(const std::string& task, const std::string& rep,
                           const std::string& model) {
  std::string arch;
  for (char c : model) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      arch += c;
    } else if (c == '/') {
      arch += '-';
    }
  }
  return task + "_" + rep + "_" + arch + ".smdl";
}

}  // namespace

ExperimentResult runExperiment(const ExperimentConfig& config,
                               const std::string& model_name, FilterKind kind,
                               std::ostream* log) {
  ExperimentResult result;
  result.task = toString(config.task);
  result.representation = toString(kind);
  result.model = model_name;
  try {
    const ModelSpec probe = ModelSpec::parse(model_name, 2, 1);
    result.model = probe.name();
    result.seed = experimentSeed(config.train_seed, result.model,
                                 result.representation, result.task);

    PipelineConfig pipeline = config.pipeline;
    pipeline.kind = kind;

    const std::vector<CorpusEntry> entries = loadManifest(config.manifest);
    {
      std::set<std::string> seen;
      for (const CorpusEntry& e : entries) {
        if (!seen.insert(e.path).second) {
          throw ConfigError("manifest lists path '" + e.path +
                            "' more than once");
        }
      }
    }

    std::vector<Matrix> all_features = loadFeatures(
        entries, config.manifest, pipeline, config.effectiveCacheDir(), log);
    std::map<std::string, std::size_t> index_of;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      index_of[entries[i].path] = i;
    }

    auto [train_entries, test_entries] =
        config.split_mode == SplitMode::kStratified
            ? splitTrainTest(entries, config.split_ratio, config.split_seed)
            : splitBySpeaker(entries, config.split_ratio, config.split_seed);

    if (config.task == Task::kIntensity) {
      // Neutral has no intensity contrast.
      const auto drop_neutral = [](std::vector<CorpusEntry>& v) {
        std::erase_if(v, [](const CorpusEntry& e) {
          return e.emotion == Emotion::kNeutral;
        });
      };
      drop_neutral(train_entries);
      drop_neutral(test_entries);
    }
    if (train_entries.empty() || test_entries.empty()) {
      throw ConfigError("split left an empty train or test set (ratio " +
                        std::to_string(config.split_ratio) + ")");
    }

    auto gather = [&](const std::vector<CorpusEntry>& side,
                      std::vector<Matrix>* feats, std::vector<int>* labels) {
      feats->reserve(side.size());
      labels->reserve(side.size());
      for (const CorpusEntry& e : side) {
        feats->push_back(all_features[index_of.at(e.path)]);
        labels->push_back(labelFor(config.task, e));
      }
    };
    std::vector<Matrix> train_feats, test_feats;
    std::vector<int> train_labels, test_labels;
    gather(train_entries, &train_feats, &train_labels);
    gather(test_entries, &test_feats, &test_labels);
    all_features.clear();

    std::vector<const Matrix*> train_ptrs;
    for (const Matrix& m : train_feats) train_ptrs.push_back(&m);
    const Normalizer norm = fitNormalizer(train_ptrs);
    for (Matrix& m : train_feats) m = norm.apply(m);
    for (Matrix& m : test_feats) m = norm.apply(m);

    SampleSet train_set, test_set;
    train_set.num_classes = test_set.num_classes = numClasses(config.task);
    for (const Matrix& m : train_feats) train_set.reps.push_back(&m);
    train_set.labels = train_labels;
    for (const Matrix& m : test_feats) test_set.reps.push_back(&m);
    test_set.labels = test_labels;

    const ModelSpec spec = ModelSpec::parse(
        model_name, numClasses(config.task), pipeline.contextWidth());

    TrainConfig training = config.training;
    training.seed = result.seed;
    const TrainedModel trained = train(spec, train_set, training);
    const EvalResult eval =
        evaluate(spec, trained.parameters, test_set, training.pad_target);

    result.loss = eval.loss;
    result.accuracy = eval.accuracy;
    result.frame_accuracy = eval.frame_accuracy;
    result.epochs = trained.epochs_trained;

    if (config.save_checkpoints) {
      const fs::path dir = fs::path(config.out_dir) / "models";
      fs::create_directories(dir);
      saveModel((dir / checkpointName(result.task, result.representation,
                                      result.model))
                    .string(),
                trained, pipeline.configHash());
    }
    if (log != nullptr) {
      (*log) << result.task << " " << result.model << " "
             << result.representation << ": loss " << fixed3(result.loss)
             << " accuracy " << fixed3(result.accuracy);
      if (!spec.isRecurrent()) {
        (*log) << " (frame accuracy " << fixed3(result.frame_accuracy) << ")";
      }
      (*log) << " epochs " << result.epochs << " seed " << result.seed
             << "\n";
    }
  } catch (const std::exception& e) {
    result.error = sanitizeCsvField(e.what());
    if (log != nullptr) {
      (*log) << result.task << " " << result.model << " "
             << result.representation << ": FAILED: " << result.error << "\n";
    }
  }
  return result;
}

// --- results & report -----------------------------------------------------

std::string resultsCsvHeader() {
  return "task,model,representation,loss,accuracy,epochs,seed,error";
}

namespace {

std::string toCsvRow(const ExperimentResult& r) {
  std::ostringstream out;
  out << r.task << ',' << r.model << ',' << r.representation << ','
      << fullPrecision(r.loss) << ',' << fullPrecision(r.accuracy) << ','
      << r.epochs << ',' << r.seed << ',' << sanitizeCsvField(r.error);
  return out.str();
}

ExperimentResult fromCsvRow(const std::string& line, int line_no) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (int i = 0; i < 7; ++i) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      throw ParseError("results csv line " + std::to_string(line_no) +
                       ": expected 8 fields");
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  fields.push_back(line.substr(start));

  ExperimentResult r;
  r.task = fields[0];
  r.model = fields[1];
  r.representation = fields[2];
  r.loss = std::stod(fields[3]);
  r.accuracy = std::stod(fields[4]);
  r.epochs = std::stoi(fields[5]);
  r.seed = std::stoull(fields[6]);
  r.error = fields[7];
  return r;
}

}  // namespace

void writeResultsCsv(const std::string& path,
                     const std::vector<ExperimentResult>& results) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("writeResultsCsv: cannot open " + path);
  }
  out << resultsCsvHeader() << '\n';
  for (const ExperimentResult& r : results) {
    out << toCsvRow(r) << '\n';
  }
  if (!out) {
    throw IoError("writeResultsCsv: write failed for " + path);
  }
}

std::vector<ExperimentResult> readResultsCsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("readResultsCsv: cannot open " + path);
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError("readResultsCsv: " + path + " is empty");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != resultsCsvHeader()) {
    throw ParseError("readResultsCsv: " + path + " has unexpected header");
  }
  std::vector<ExperimentResult> results;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    results.push_back(fromCsvRow(line, line_no));
  }
  return results;
}

namespace {

// Architecture display order: the configured list first, then anything else
// in first-seen order.
std::vector<std::string> displayOrder(
    const std::vector<ExperimentResult>& results,
    const std::vector<std::string>& arch_order, const std::string& task) {
  std::vector<std::string> order;
  auto add = [&](const std::string& name) {
    if (std::find(order.begin(), order.end(), name) == order.end()) {
      order.push_back(name);
    }
  };
  for (const std::string& a : arch_order) {
    for (const ExperimentResult& r : results) {
      if (r.task == task && r.model == a) {
        add(a);
        break;
      }
    }
  }
  for (const ExperimentResult& r : results) {
    if (r.task == task) add(r.model);
  }
  return order;
}

const ExperimentResult* findCell(const std::vector<ExperimentResult>& results,
                                 const std::string& task,
                                 const std::string& model,
                                 const std::string& rep) {
  for (const ExperimentResult& r : results) {
    if (r.task == task && r.model == model && r.representation == rep) {
      return &r;
    }
  }
  return nullptr;
}

}  // namespace

Scalar meanAccuracyDelta(const std::vector<ExperimentResult>& results,
                         const std::string& task) {
  std::vector<std::string> order = displayOrder(results, paperArchitectures(),
                                                task);
  Scalar sum = 0.0;
  int count = 0;
  for (const std::string& model : order) {
    const ExperimentResult* mfcc = findCell(results, task, model, "mfcc");
    const ExperimentResult* gfcc = findCell(results, task, model, "gfcc");
    if (mfcc != nullptr && gfcc != nullptr && mfcc->ok() && gfcc->ok()) {
      sum += gfcc->accuracy - mfcc->accuracy;
      ++count;
    }
  }
  return count > 0 ? sum / count : std::numeric_limits<Scalar>::quiet_NaN();
}

std::string renderMarkdownReport(const std::vector<ExperimentResult>& results,
                                 const std::vector<std::string>& arch_order) {
  std::ostringstream out;
  out << "# Experiment report\n";

  for (const std::string& task : {std::string("emotion"),
                                  std::string("intensity")}) {
    const std::vector<std::string> order =
        displayOrder(results, arch_order, task);
    if (order.empty()) continue;

    out << "\n## " << (task == "emotion" ? "Emotion" : "Intensity")
        << " classification\n\n";
    out << "| Model | Activation | Dropout | MFCC loss | MFCC accuracy | "
           "GFCC loss | GFCC accuracy | GFCC-MFCC |\n";
    out << "|---|---|---|---|---|---|---|---|\n";

    std::vector<std::string> failures;
    for (const std::string& model : order) {
      std::string activation = "-";
      std::string dropout = "-";
      try {
        const ModelSpec spec = ModelSpec::parse(model, 2, 1);
        activation =
            spec.activation == Activation::kSigmoid ? "sigmoid" : "tanh";
        dropout = fixed3(spec.dropout).substr(0, 3);  // "0.2" / "0.0"
      } catch (const std::exception&) {
      }

      const ExperimentResult* mfcc = findCell(results, task, model, "mfcc");
      const ExperimentResult* gfcc = findCell(results, task, model, "gfcc");
      auto cell = [&](const ExperimentResult* r, bool loss) {
        if (r == nullptr) return std::string("-");
        if (!r->ok()) return std::string("(failed)");
        return fixed3(loss ? r->loss : r->accuracy);
      };
      std::string delta = "-";
      if (mfcc != nullptr && gfcc != nullptr && mfcc->ok() && gfcc->ok()) {
        delta = fixed3(gfcc->accuracy - mfcc->accuracy);
      }
      out << "| " << model << " | " << activation << " | " << dropout
          << " | " << cell(mfcc, true) << " | " << cell(mfcc, false) << " | "
          << cell(gfcc, true) << " | " << cell(gfcc, false) << " | " << delta
          << " |\n";

      for (const ExperimentResult* r : {mfcc, gfcc}) {
        if (r != nullptr && !r->ok()) {
          failures.push_back(model + " / " + r->representation + ": " +
                             r->error);
        }
      }
    }

    const Scalar mean_delta = meanAccuracyDelta(results, task);
    if (!std::isnan(mean_delta)) {
      out << "\nMean GFCC-MFCC accuracy delta: " << fixed3(mean_delta)
          << "\n";
    }
    if (!failures.empty()) {
      out << "\nFailed cells:\n";
      for (const std::string& f : failures) {
        out << "- " << f << "\n";
      }
    }
  }
  return out.str();
}

void emitReport(const std::vector<ExperimentResult>& results,
                const std::string& out_dir,
                const std::vector<std::string>& arch_order) {
  if (results.empty()) {
    throw ConfigError("emitReport: no results");
  }
  fs::create_directories(out_dir);
  writeResultsCsv((fs::path(out_dir) / "results.csv").string(), results);
  const std::string report = renderMarkdownReport(results, arch_order);
  const std::string path = (fs::path(out_dir) / "report.md").string();
  std::ofstream out(path);
  if (!out) {
    throw IoError("emitReport: cannot open " + path);
  }
  out << report;
  if (!out) {
    throw IoError("emitReport: write failed for " + path);
  }
}

// --- grid -----------------------------------------------------------------

std::vector<ExperimentResult> runGrid(const ExperimentConfig& config,
                                      std::ostream* log) {
  struct Cell {
    std::string model;
    FilterKind kind;
  };
  std::vector<FilterKind> kinds;
  if (config.representation == "mfcc" || config.representation == "both") {
    kinds.push_back(FilterKind::kMel);
  }
  if (config.representation == "gfcc" || config.representation == "both") {
    kinds.push_back(FilterKind::kGammatone);
  }
  std::vector<Cell> cells;
  for (const std::string& arch : config.architectures) {
    for (FilterKind kind : kinds) {
      cells.push_back({arch, kind});
    }
  }

  fs::create_directories(config.out_dir);
  const std::string csv_path =
      (fs::path(config.out_dir) / "results.csv").string();

  // Resume: completed cells in an existing results file are kept as-is;
  // failed ones are retried.
  std::vector<ExperimentResult> completed;
  if (fs::exists(csv_path)) {
    for (ExperimentResult& r : readResultsCsv(csv_path)) {
      if (r.ok()) completed.push_back(std::move(r));
    }
  }
  auto already_done = [&](const Cell& cell) {
    std::string canonical = cell.model;
    try {
      canonical = ModelSpec::parse(cell.model, 2, 1).name();
    } catch (const std::exception&) {
    }
    return findCell(completed, toString(config.task), canonical,
                    toString(cell.kind)) != nullptr;
  };
  std::erase_if(cells, already_done);

  // Warm the feature cache once before workers race on it.
  if (!cells.empty() && !config.effectiveCacheDir().empty()) {
    const std::vector<CorpusEntry> entries = loadManifest(config.manifest);
    for (FilterKind kind : kinds) {
      PipelineConfig pipeline = config.pipeline;
      pipeline.kind = kind;
      loadFeatures(entries, config.manifest, pipeline,
                   config.effectiveCacheDir(), log);
    }
  }

  std::ofstream csv(csv_path, std::ios::trunc);
  if (!csv) {
    throw IoError("runGrid: cannot open " + csv_path);
  }
  csv << resultsCsvHeader() << '\n';
  for (const ExperimentResult& r : completed) {
    csv << toCsvRow(r) << '\n';
  }
  csv.flush();

  std::vector<ExperimentResult> fresh(cells.size());
  std::mutex io_mutex;
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) break;
      ExperimentResult r;
      {
        std::ostringstream local_log;
        r = runExperiment(config, cells[i].model, cells[i].kind, &local_log);
        std::lock_guard<std::mutex> lock(io_mutex);
        if (log != nullptr) (*log) << local_log.str();
        csv << toCsvRow(r) << '\n';
        csv.flush();
      }
      fresh[i] = std::move(r);
    }
  };

  const int workers = std::max(1, std::min<int>(config.workers,
                                                static_cast<int>(cells.size())));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  csv.close();

  std::vector<ExperimentResult> all = std::move(completed);
  for (ExperimentResult& r : fresh) all.push_back(std::move(r));

  // Canonical order: task, configured architecture rank, mfcc before gfcc.
  auto arch_rank = [&](const std::string& model) {
    for (std::size_t i = 0; i < config.architectures.size(); ++i) {
      std::string canonical = config.architectures[i];
      try {
        canonical = ModelSpec::parse(canonical, 2, 1).name();
      } catch (const std::exception&) {
      }
      if (canonical == model) return i;
    }
    return config.architectures.size();
  };
  std::sort(all.begin(), all.end(),
            [&](const ExperimentResult& a, const ExperimentResult& b) {
              if (a.task != b.task) return a.task < b.task;
              const std::size_t ra = arch_rank(a.model), rb = arch_rank(b.model);
              if (ra != rb) return ra < rb;
              if (a.model != b.model) return a.model < b.model;
              return a.representation > b.representation;  // mfcc first
            });

  emitReport(all, config.out_dir, config.architectures);
  if (log != nullptr) {
    const Scalar delta = meanAccuracyDelta(all, toString(config.task));
    if (!std::isnan(delta)) {
      (*log) << "mean GFCC-MFCC accuracy delta (" << toString(config.task)
             << "): " << fixed3(delta) << "\n";
    }
  }
  return all;
}

// --- RAVDESS helper ---------------------------------------------------------

std::vector<CorpusEntry> buildRavdessManifest(const std::string& root_dir) {
  if (!fs::is_directory(root_dir)) {
    throw IoError("buildRavdessManifest: " + root_dir + " is not a directory");
  }

  // Filename convention: Modality-VocalChannel-Emotion-Intensity-Statement-
  // Repetition-Actor.wav with two-digit numeric fields.
  const auto emotion_of = [](const std::string& code) -> Emotion {
    if (code == "01") return Emotion::kNeutral;
    if (code == "02") return Emotion::kCalm;
    if (code == "03") return Emotion::kHappiness;
    if (code == "04") return Emotion::kSadness;
    if (code == "05") return Emotion::kAnger;
    if (code == "06") return Emotion::kFear;
    if (code == "07") return Emotion::kDisgust;
    if (code == "08") return Emotion::kSurprise;
    throw ParseError("unknown emotion code '" + code + "'");
  };

  std::vector<fs::path> wavs;
  for (const auto& item : fs::recursive_directory_iterator(root_dir)) {
    if (item.is_regular_file() && item.path().extension() == ".wav") {
      wavs.push_back(item.path());
    }
  }
  std::sort(wavs.begin(), wavs.end());

  std::vector<CorpusEntry> entries;
  for (const fs::path& wav : wavs) {
    const std::string stem = wav.stem().string();
    std::vector<std::string> fields;
    std::stringstream ss(stem);
    std::string field;
    while (std::getline(ss, field, '-')) fields.push_back(field);
    if (fields.size() != 7) continue;  // not a RAVDESS-named file

    CorpusEntry entry;
    try {
      entry.emotion = emotion_of(fields[2]);
      if (fields[3] == "01") {
        entry.intensity = Intensity::kNormal;
      } else if (fields[3] == "02") {
        entry.intensity = Intensity::kStrong;
      } else {
        throw ParseError("unknown intensity code '" + fields[3] + "'");
      }
    } catch (const ParseError& e) {
      throw ParseError("buildRavdessManifest: " + wav.string() + ": " +
                       e.what());
    }
    entry.path = fs::absolute(wav).string();
    entry.speaker = "Actor_" + fields[6];
    entries.push_back(std::move(entry));
  }
  if (entries.empty()) {
    throw ConfigError("buildRavdessManifest: no RAVDESS-named .wav files in " +
                      root_dir);
  }
  return entries;
}

}  // namespace serkit

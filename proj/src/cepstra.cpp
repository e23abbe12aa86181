// serkit/cepstra.cpp
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

#include "serkit/cepstra.hpp"

#include "serkit/dsp.hpp"
#include "serkit/rng.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace serkit {

std::uint64_t PipelineConfig::configHash() const {
  std::ostringstream canon;
  canon.precision(17);
  canon << "kind=" << toString(kind) << ";preemphasis=" << preemphasis
        << ";frame_len_s=" << frame_len_s << ";hop_s=" << hop_s
        << ";mel_filters=" << mel_filters
        << ";gammatone_filters=" << gammatone_filters << ";fmin=" << fmin
        << ";fmax=" << fmax << ";log_floor=" << log_floor
        << ";num_coeffs=" << num_coeffs << ";delta_window=" << delta_window
        << ";context=" << context;
  return fnv1a64(canon.str());
}

Matrix logCompress(const Matrix& energies, Scalar floor) {
  if (!(floor > 0.0)) {
    throw ConfigError("logCompress: floor must be positive, got " +
                      std::to_string(floor));
  }
  return energies.array().max(floor).log().matrix();
}

Matrix dctMatrix(Index n_out, Index num_channels) {
  Matrix basis(n_out, num_channels);
  const Scalar s0 = std::sqrt(1.0 / static_cast<Scalar>(num_channels));
  const Scalar sk = std::sqrt(2.0 / static_cast<Scalar>(num_channels));
  for (Index k = 0; k < n_out; ++k) {
    const Scalar scale = k == 0 ? s0 : sk;
    for (Index m = 0; m < num_channels; ++m) {
      basis(k, m) =
          scale * std::cos(M_PI * k * (2.0 * m + 1.0) / (2.0 * num_channels));
    }
  }
  return basis;
}

Matrix dct2Reduce(const Matrix& log_energies, int n_coeffs) {
  if (log_energies.cols() < n_coeffs) {
    throw ConfigError("dct2Reduce: " + std::to_string(log_energies.cols()) +
                      " filter channels cannot yield " +
                      std::to_string(n_coeffs) + " coefficients");
  }
  const Matrix basis = dctMatrix(n_coeffs, log_energies.cols());
  return log_energies * basis.transpose();
}

Matrix computeDeltas(const Matrix& coeffs, int window) {
  if (window < 1) {
    throw ConfigError("computeDeltas: window must be >= 1");
  }
  const Index num_frames = coeffs.rows();
  Scalar denom = 0.0;
  for (int n = 1; n <= window; ++n) denom += static_cast<Scalar>(n) * n;
  denom *= 2.0;

  // Indices beyond the ends replicate the edge frames.
  auto clamped = [&](Index t) {
    return std::min(std::max<Index>(t, 0), num_frames - 1);
  };

  Matrix deltas(num_frames, coeffs.cols());
  for (Index t = 0; t < num_frames; ++t) {
    RowVector acc = RowVector::Zero(coeffs.cols());
    for (int n = 1; n <= window; ++n) {
      acc += n * (coeffs.row(clamped(t + n)) - coeffs.row(clamped(t - n)));
    }
    deltas.row(t) = acc / denom;
  }
  return deltas;
}

Matrix assembleContext(const Matrix& features, int context) {
  if (context < 0) {
    throw ConfigError("assembleContext: context must be >= 0");
  }
  const Index num_frames = features.rows();
  const Index width = features.cols();
  Matrix out(num_frames, (2 * context + 1) * width);
  for (Index t = 0; t < num_frames; ++t) {
    for (int j = -context; j <= context; ++j) {
      const Index src = std::min(std::max<Index>(t + j, 0), num_frames - 1);
      out.row(t).segment((j + context) * width, width) = features.row(src);
    }
  }
  return out;
}

namespace {

template <typename Fn>
auto stage(const char* name, Fn&& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    throw std::runtime_error("extractFeatures/" + std::string(name) + ": " +
                             e.what());
  }
}

}  // namespace

ContextRepresentation extractFeatures(const Waveform& wave,
                                      const PipelineConfig& config) {
  const Waveform emphasized = stage(
      "pre_emphasis", [&] { return preEmphasize(wave, config.preemphasis); });
  const FrameMatrix frames = stage("framing", [&] {
    return frameSignal(emphasized, config.frame_len_s, config.hop_s);
  });
  const FrameMatrix windowed =
      stage("windowing", [&] { return applyHamming(frames); });
  const int fft_size =
      nextPowerOfTwo(static_cast<int>(windowed.frameLength()));
  const PowerSpectrogram spec =
      stage("dft", [&] { return powerSpectrum(windowed, fft_size); });

  const Matrix energies = stage("filter_bank", [&] {
    const Scalar fmax = config.effectiveFmax(wave.sample_rate);
    const FilterBank bank =
        config.kind == FilterKind::kMel
            ? buildMelFilterBank(config.mel_filters, fft_size,
                                 wave.sample_rate, config.fmin, fmax)
            : buildGammatoneFilterBank(config.gammatone_filters, fft_size,
                                       wave.sample_rate, config.fmin, fmax);
    return applyFilterBank(spec, bank);
  });

  const Matrix log_energies = stage(
      "log_compression", [&] { return logCompress(energies, config.log_floor); });
  const Matrix cepstra = stage(
      "dct", [&] { return dct2Reduce(log_energies, config.num_coeffs); });

  const Matrix deltas = stage(
      "deltas", [&] { return computeDeltas(cepstra, config.delta_window); });
  const Matrix ddeltas = stage(
      "deltas", [&] { return computeDeltas(deltas, config.delta_window); });

  Matrix per_frame(cepstra.rows(), 3 * cepstra.cols());
  per_frame << cepstra, deltas, ddeltas;

  ContextRepresentation rep;
  rep.kind = config.kind;
  rep.frames = stage(
      "context", [&] { return assembleContext(per_frame, config.context); });
  return rep;
}

// --- feature cache -----------------------------------------------------

namespace {

constexpr char kFeatureMagic[8] = {'S', 'E', 'R', 'F', 'E', 'A', 'T', '1'};
constexpr std::uint32_t kFeatureVersion = 1;

template <typename T>
void writeRaw(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(value));
}

template <typename T>
void readRaw(std::istream& in, T& value, const std::string& path) {
  in.read(reinterpret_cast<char*>(&value), sizeof(value));
  if (!in) {
    throw IoError("readFeatureFile: truncated file " + path);
  }
}

}  // namespace

void writeFeatureFile(const std::string& path,
                      const ContextRepresentation& rep,
                      std::uint64_t config_hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("writeFeatureFile: cannot open " + path);
  }
  out.write(kFeatureMagic, sizeof(kFeatureMagic));
  writeRaw(out, kFeatureVersion);
  const std::uint32_t kind = rep.kind == FilterKind::kMel ? 0u : 1u;
  writeRaw(out, kind);
  writeRaw(out, config_hash);
  const std::uint32_t rows = static_cast<std::uint32_t>(rep.frames.rows());
  const std::uint32_t cols = static_cast<std::uint32_t>(rep.frames.cols());
  writeRaw(out, rows);
  writeRaw(out, cols);
  for (Index t = 0; t < rep.frames.rows(); ++t) {
    for (Index j = 0; j < rep.frames.cols(); ++j) {
      writeRaw(out, rep.frames(t, j));
    }
  }
  if (!out) {
    throw IoError("writeFeatureFile: write failed for " + path);
  }
}

ContextRepresentation readFeatureFile(const std::string& path,
                                      std::uint64_t expected_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("readFeatureFile: cannot open " + path);
  }
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kFeatureMagic, sizeof(magic)) != 0) {
    throw IoError("readFeatureFile: " + path + " is not a feature file");
  }
  std::uint32_t version = 0;
  readRaw(in, version, path);
  if (version != kFeatureVersion) {
    throw IoError("readFeatureFile: unsupported version " +
                  std::to_string(version) + " in " + path);
  }
  std::uint32_t kind = 0;
  readRaw(in, kind, path);
  std::uint64_t hash = 0;
  readRaw(in, hash, path);
  if (expected_hash != 0 && hash != expected_hash) {
    throw IoError("readFeatureFile: " + path +
                  " was produced with a different pipeline config");
  }
  std::uint32_t rows = 0, cols = 0;
  readRaw(in, rows, path);
  readRaw(in, cols, path);

  ContextRepresentation rep;
  rep.kind = kind == 0 ? FilterKind::kMel : FilterKind::kGammatone;
  rep.frames.resize(rows, cols);
  for (std::uint32_t t = 0; t < rows; ++t) {
    for (std::uint32_t j = 0; j < cols; ++j) {
      readRaw(in, rep.frames(t, j), path);
    }
  }
  return rep;
}

std::string featureCachePath(const std::string& cache_dir,
                             std::uint64_t config_hash,
                             const std::string& utterance_path) {
  std::ostringstream name;
  name << std::hex << config_hash;
  const std::filesystem::path dir =
      std::filesystem::path(cache_dir) / name.str();
  std::ostringstream file;
  file << std::hex << fnv1a64(utterance_path) << ".feat";
  return (dir / file.str()).string();
}

}  // namespace serkit

// serkit/cepstra.hpp
//
// Completes the cepstral pipeline (log compression, DCT) and builds the
// context representation: 13 coefficients + deltas + double deltas = 39 per
// frame, concatenated over 19 frames = 741 per frame.
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

#ifndef SERKIT_CEPSTRA_HPP
#define SERKIT_CEPSTRA_HPP

#include "serkit/filterbank.hpp"
#include "serkit/types.hpp"

#include <cstdint>
#include <string>

namespace serkit {

// Everything the waveform -> context-representation pipeline depends on.
// Two runs with equal configs (and equal audio) produce bit-identical
// features; configHash() keys the on-disk feature cache.
struct PipelineConfig {
  FilterKind kind = FilterKind::kMel;
  Scalar preemphasis = 0.97;
  Scalar frame_len_s = 0.025;
  Scalar hop_s = 0.010;
  int mel_filters = 26;
  int gammatone_filters = 64;
  Scalar fmin = 50.0;
  Scalar fmax = 0.0;  // 0 = Nyquist of each utterance
  Scalar log_floor = 1e-10;
  int num_coeffs = 13;
  int delta_window = 2;
  int context = 9;

  int numFilters() const {
    return kind == FilterKind::kMel ? mel_filters : gammatone_filters;
  }
  // 13 statics + deltas + double deltas.
  int frameFeatureWidth() const { return 3 * num_coeffs; }
  // 19 x 39 = 741 with the defaults.
  int contextWidth() const { return (2 * context + 1) * frameFeatureWidth(); }
  Scalar effectiveFmax(int sample_rate) const {
    return fmax > 0.0 ? fmax : sample_rate / 2.0;
  }
  std::uint64_t configHash() const;
};

// Per-utterance feature matrix; rows() is the true frame count before any
// padding.
struct ContextRepresentation {
  Matrix frames;  // T x contextWidth()
  FilterKind kind = FilterKind::kMel;

  Index trueLength() const { return frames.rows(); }
};

// ln(max(energy, floor)) elementwise; floor absorbs exact zeros.
Matrix logCompress(const Matrix& energies, Scalar floor);

// Orthonormal DCT-II basis, n_out x num_channels. B * B^T = I when
// n_out == num_channels.
Matrix dctMatrix(Index n_out, Index num_channels);

// Keeps coefficients 0..n_coeffs-1 of the orthonormal DCT-II over the filter
// channels of each frame.
Matrix dct2Reduce(const Matrix& log_energies, int n_coeffs);

// HTK-style regression deltas with edge replication:
//   d_t = sum_n n (c_{t+n} - c_{t-n}) / (2 sum_n n^2),  n = 1..window.
Matrix computeDeltas(const Matrix& coeffs, int window);

// Row t = concat of feature rows t-context..t+context, indices clamped to
// [0, T-1].
Matrix assembleContext(const Matrix& features, int context);

// Full composition: pre-emphasis -> framing -> Hamming -> power spectrum ->
// filter bank -> log -> DCT -> deltas/double deltas -> context windows.
// Stage failures are rethrown with the stage name prefixed.
ContextRepresentation extractFeatures(const Waveform& wave,
                                      const PipelineConfig& config);

// --- feature cache -----------------------------------------------------
//
// One file per utterance: magic "SERFEAT1", u32 version, u32 kind,
// u64 config hash, u32 rows, u32 cols, then rows*cols little-endian
// doubles in row-major order.

void writeFeatureFile(const std::string& path, const ContextRepresentation& rep,
                      std::uint64_t config_hash);

// Validates magic, version and (when expected_hash != 0) the config hash.
ContextRepresentation readFeatureFile(const std::string& path,
                                      std::uint64_t expected_hash);

// <cache_dir>/<config-hash-hex>/<fnv1a(utterance path)-hex>.feat
std::string featureCachePath(const std::string& cache_dir,
                             std::uint64_t config_hash,
                             const std::string& utterance_path);

}  // namespace serkit

#endif  // SERKIT_CEPSTRA_HPP

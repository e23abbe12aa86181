// serkit/filterbank.hpp
//
// Mel triangular and ERB-spaced gammatone filter banks, realized as
// frequency-sampled magnitude weights over FFT bins so both cepstral
// pipelines share the same spectrum -> energies step. Banks are immutable
// after construction and safe to share across threads.
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

#ifndef SERKIT_FILTERBANK_HPP
#define SERKIT_FILTERBANK_HPP

#include "serkit/dsp.hpp"
#include "serkit/types.hpp"

#include <string>
#include <vector>

namespace serkit {

enum class FilterKind { kMel, kGammatone };

std::string toString(FilterKind kind);
FilterKind filterKindFromString(const std::string& name);

struct FilterBank {
  Matrix weights;             // M x (K/2 + 1), each row peak-normalized to 1
  FilterKind kind = FilterKind::kMel;
  Vector center_freqs;        // Hz, strictly increasing
  std::vector<Index> peak_bins;
  Scalar fmin = 0.0;
  Scalar fmax = 0.0;
  int fft_size = 0;
  int sample_rate = 0;

  Index numFilters() const { return weights.rows(); }
};

// mel = 2595 log10(1 + f / 700)
Scalar hzToMel(Scalar f);
Scalar melToHz(Scalar mel);

// Glasberg-Moore: ERB(f) = 24.7 (4.37 f / 1000 + 1) Hz.
Scalar erbBandwidth(Scalar f);

// ERB-rate scale and its inverse; used to place gammatone centers.
Scalar hzToErbRate(Scalar f);
Scalar erbRateToHz(Scalar rate);

// M triangles with peaks at the M interior points of an (M+2)-point uniform
// mel grid spanning [fmin, fmax]. Triangles are evaluated at bin frequencies
// and peak-normalized, so each row has max weight exactly 1. Throws
// ConfigError when adjacent centers collapse onto one FFT bin (M too large
// for fft_size).
FilterBank buildMelFilterBank(int num_filters, int fft_size, int sample_rate,
                              Scalar fmin, Scalar fmax);

// M fourth-order gammatone magnitude responses
//   |H(f)| = (1 + ((f - fc) / b)^2)^-2,  b = 1.019 ERB(fc)
// with centers at the M interior points of an (M+2)-point uniform ERB-rate
// grid spanning [fmin, fmax], each row peak-normalized to 1.
FilterBank buildGammatoneFilterBank(int num_filters, int fft_size,
                                    int sample_rate, Scalar fmin, Scalar fmax);

// energies = spec.bins * weights^T; T x M, nonnegative.
Matrix applyFilterBank(const PowerSpectrogram& spec, const FilterBank& bank);

// Debug export: one row per filter, center_freq followed by the K/2+1
// weights.
void writeFilterBankCsv(const FilterBank& bank, const std::string& path);

}  // namespace serkit

#endif  // SERKIT_FILTERBANK_HPP

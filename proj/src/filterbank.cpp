// serkit/filterbank.cpp
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

#include "serkit/filterbank.hpp"

#include <cmath>
#include <fstream>

namespace serkit {

std::string toString(FilterKind kind) {
  return kind == FilterKind::kMel ? "mfcc" : "gfcc";
}

FilterKind filterKindFromString(const std::string& name) {
  if (name == "mfcc" || name == "mel") return FilterKind::kMel;
  if (name == "gfcc" || name == "gammatone") return FilterKind::kGammatone;
  throw ParseError("unknown representation '" + name +
                   "' (expected mfcc or gfcc)");
}

Scalar hzToMel(Scalar f) {
  if (f < 0.0) {
    throw InputError("hzToMel: frequency must be >= 0, got " +
                     std::to_string(f));
  }
  return 2595.0 * std::log10(1.0 + f / 700.0);
}

Scalar melToHz(Scalar mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

Scalar erbBandwidth(Scalar f) {
  if (f < 0.0) {
    throw InputError("erbBandwidth: frequency must be >= 0, got " +
                     std::to_string(f));
  }
  return 24.7 * (4.37 * f / 1000.0 + 1.0);
}

Scalar hzToErbRate(Scalar f) {
  if (f < 0.0) {
    throw InputError("hzToErbRate: frequency must be >= 0, got " +
                     std::to_string(f));
  }
  return 21.4 * std::log10(1.0 + 0.00437 * f);
}

Scalar erbRateToHz(Scalar rate) {
  return (std::pow(10.0, rate / 21.4) - 1.0) / 0.00437;
}

namespace {

void validateBankParams(const char* what, int num_filters, int fft_size,
                        int sample_rate, Scalar fmin, Scalar fmax) {
  if (num_filters < 2) {
    throw ConfigError(std::string(what) + ": need at least 2 filters");
  }
  if (fft_size < 2 || sample_rate <= 0) {
    throw ConfigError(std::string(what) + ": bad fft_size or sample_rate");
  }
  if (!(fmin >= 0.0) || !(fmin < fmax)) {
    throw ConfigError(std::string(what) + ": need 0 <= fmin < fmax, got " +
                      std::to_string(fmin) + " / " + std::to_string(fmax));
  }
  if (fmax > sample_rate / 2.0 + 1e-9) {
    throw ConfigError(std::string(what) + ": fmax " + std::to_string(fmax) +
                      " exceeds Nyquist " + std::to_string(sample_rate / 2.0));
  }
}

// Peak-normalizes each row and records the peak bin.
void normalizeRows(FilterBank& bank, const char* what) {
  const Index num_bins = bank.weights.cols();
  bank.peak_bins.resize(static_cast<std::size_t>(bank.weights.rows()));
  for (Index m = 0; m < bank.weights.rows(); ++m) {
    Index peak = 0;
    Scalar best = 0.0;
    for (Index b = 0; b < num_bins; ++b) {
      if (bank.weights(m, b) > best) {
        best = bank.weights(m, b);
        peak = b;
      }
    }
    if (best <= 0.0) {
      throw ConfigError(std::string(what) + ": filter " + std::to_string(m) +
                        " covers no FFT bin; too many filters for fft_size " +
                        std::to_string(bank.fft_size));
    }
    bank.weights.row(m) /= best;
    bank.peak_bins[static_cast<std::size_t>(m)] = peak;
  }
}

}  // namespace

FilterBank buildMelFilterBank(int num_filters, int fft_size, int sample_rate,
                              Scalar fmin, Scalar fmax) {
  validateBankParams("buildMelFilterBank", num_filters, fft_size, sample_rate,
                     fmin, fmax);

  const Scalar mel_lo = hzToMel(fmin);
  const Scalar mel_hi = hzToMel(fmax);

  // M + 2 boundary points, uniform in mel; centers are the interior points.
  // Endpoints are pinned to fmin/fmax exactly rather than round-tripped
  // through the mel scale.
  Vector grid(num_filters + 2);
  grid(0) = fmin;
  grid(num_filters + 1) = fmax;
  for (int i = 1; i <= num_filters; ++i) {
    grid(i) = melToHz(mel_lo + (mel_hi - mel_lo) * i / (num_filters + 1));
  }

  FilterBank bank;
  bank.kind = FilterKind::kMel;
  bank.fmin = fmin;
  bank.fmax = fmax;
  bank.fft_size = fft_size;
  bank.sample_rate = sample_rate;
  bank.center_freqs = grid.segment(1, num_filters);

  const Index num_bins = fft_size / 2 + 1;
  const Scalar bin_width = static_cast<Scalar>(sample_rate) / fft_size;

  for (int m = 0; m + 1 < num_filters; ++m) {
    const long bin_a = std::lround(grid(m + 1) / bin_width);
    const long bin_b = std::lround(grid(m + 2) / bin_width);
    if (bin_a == bin_b) {
      throw ConfigError(
          "buildMelFilterBank: centers of filters " + std::to_string(m) +
          " and " + std::to_string(m + 1) + " collapse onto FFT bin " +
          std::to_string(bin_a) + "; too many filters for fft_size " +
          std::to_string(fft_size));
    }
  }

  bank.weights = Matrix::Zero(num_filters, num_bins);
  for (int m = 0; m < num_filters; ++m) {
    const Scalar lo = grid(m);
    const Scalar center = grid(m + 1);
    const Scalar hi = grid(m + 2);
    for (Index b = 0; b < num_bins; ++b) {
      const Scalar f = b * bin_width;
      if (f <= lo || f >= hi) continue;
      bank.weights(m, b) =
          f <= center ? (f - lo) / (center - lo) : (hi - f) / (hi - center);
    }
  }
  normalizeRows(bank, "buildMelFilterBank");
  return bank;
}

FilterBank buildGammatoneFilterBank(int num_filters, int fft_size,
                                    int sample_rate, Scalar fmin,
                                    Scalar fmax) {
  validateBankParams("buildGammatoneFilterBank", num_filters, fft_size,
                     sample_rate, fmin, fmax);
  const Index num_bins = fft_size / 2 + 1;
  if (num_filters > num_bins) {
    throw ConfigError("buildGammatoneFilterBank: " +
                      std::to_string(num_filters) + " filters exceed the " +
                      std::to_string(num_bins) + " available FFT bins");
  }

  const Scalar rate_lo = hzToErbRate(fmin);
  const Scalar rate_hi = hzToErbRate(fmax);

  FilterBank bank;
  bank.kind = FilterKind::kGammatone;
  bank.fmin = fmin;
  bank.fmax = fmax;
  bank.fft_size = fft_size;
  bank.sample_rate = sample_rate;
  bank.center_freqs.resize(num_filters);
  for (int m = 0; m < num_filters; ++m) {
    bank.center_freqs(m) =
        erbRateToHz(rate_lo + (rate_hi - rate_lo) * (m + 1) / (num_filters + 1));
  }

  const Scalar bin_width = static_cast<Scalar>(sample_rate) / fft_size;
  bank.weights.resize(num_filters, num_bins);
  for (int m = 0; m < num_filters; ++m) {
    const Scalar fc = bank.center_freqs(m);
    const Scalar b = 1.019 * erbBandwidth(fc);
    for (Index k = 0; k < num_bins; ++k) {
      const Scalar d = (k * bin_width - fc) / b;
      const Scalar u = 1.0 + d * d;
      bank.weights(m, k) = 1.0 / (u * u);
    }
  }
  normalizeRows(bank, "buildGammatoneFilterBank");
  return bank;
}

Matrix applyFilterBank(const PowerSpectrogram& spec, const FilterBank& bank) {
  if (spec.fft_size != bank.fft_size || spec.sample_rate != bank.sample_rate ||
      spec.bins.cols() != bank.weights.cols()) {
    throw ConfigError(
        "applyFilterBank: bank built for fft_size " +
        std::to_string(bank.fft_size) + " @ " +
        std::to_string(bank.sample_rate) + " Hz, spectrogram has fft_size " +
        std::to_string(spec.fft_size) + " @ " +
        std::to_string(spec.sample_rate) + " Hz");
  }
  return spec.bins * bank.weights.transpose();
}

void writeFilterBankCsv(const FilterBank& bank, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("writeFilterBankCsv: cannot open " + path);
  }
  out.precision(12);
  for (Index m = 0; m < bank.numFilters(); ++m) {
    out << bank.center_freqs(m);
    for (Index b = 0; b < bank.weights.cols(); ++b) {
      out << ',' << bank.weights(m, b);
    }
    out << '\n';
  }
  if (!out) {
    throw IoError("writeFilterBankCsv: write failed for " + path);
  }
}

}  // namespace serkit

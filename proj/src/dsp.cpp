// serkit/dsp.cpp
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

#include "serkit/dsp.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <string>

namespace serkit {

void validateWaveform(const Waveform& wave, const std::string& context) {
  if (wave.samples.size() == 0) {
    throw InputError(context + ": waveform is empty");
  }
  if (wave.sample_rate <= 0) {
    throw InputError(context + ": sample rate must be positive, got " +
                     std::to_string(wave.sample_rate));
  }
  if (!wave.samples.allFinite()) {
    throw InputError(context + ": waveform contains non-finite samples");
  }
}

Waveform preEmphasize(const Waveform& wave, Scalar alpha) {
  validateWaveform(wave, "preEmphasize");
  if (!std::isfinite(alpha) || alpha < 0.0 || alpha >= 1.0) {
    throw InputError("preEmphasize: alpha must be in [0, 1), got " +
                     std::to_string(alpha));
  }
  Waveform out;
  out.sample_rate = wave.sample_rate;
  const Index n = wave.samples.size();
  out.samples.resize(n);
  out.samples(0) = wave.samples(0);
  if (n > 1) {
    out.samples.tail(n - 1) =
        wave.samples.tail(n - 1) - alpha * wave.samples.head(n - 1);
  }
  return out;
}

FrameMatrix frameSignal(const Waveform& wave, Scalar frame_len_s,
                        Scalar hop_s) {
  validateWaveform(wave, "frameSignal");
  if (!(hop_s > 0.0) || frame_len_s < hop_s) {
    throw ConfigError("frameSignal: need frame_len_s >= hop_s > 0, got " +
                      std::to_string(frame_len_s) + " / " +
                      std::to_string(hop_s));
  }
  const Index frame_len = std::lround(frame_len_s * wave.sample_rate);
  const Index hop = std::lround(hop_s * wave.sample_rate);
  if (frame_len < 1 || hop < 1) {
    throw ConfigError("frameSignal: frame or hop rounds to zero samples");
  }

  const Index length = wave.samples.size();
  const Index num_frames =
      1 + std::max<Index>(0, length - frame_len) / hop;

  FrameMatrix out;
  out.frame_len_s = frame_len_s;
  out.hop_s = hop_s;
  out.sample_rate = wave.sample_rate;
  out.frames = Matrix::Zero(num_frames, frame_len);
  for (Index t = 0; t < num_frames; ++t) {
    const Index start = t * hop;
    const Index avail = std::min(frame_len, length - start);
    out.frames.row(t).head(avail) =
        wave.samples.segment(start, avail).transpose();
  }
  return out;
}

Vector hammingWindow(Index length) {
  if (length < 1) {
    throw InputError("hammingWindow: length must be >= 1");
  }
  if (length == 1) {
    return Vector::Ones(1);
  }
  Vector w(length);
  const Scalar step = 2.0 * M_PI / static_cast<Scalar>(length - 1);
  for (Index n = 0; n < length; ++n) {
    w(n) = 0.54 - 0.46 * std::cos(step * n);
  }
  return w;
}

FrameMatrix applyHamming(const FrameMatrix& frames) {
  FrameMatrix out = frames;
  const Vector w = hammingWindow(frames.frameLength());
  out.frames = frames.frames.array().rowwise() *
               w.transpose().array();
  return out;
}

int nextPowerOfTwo(int n) {
  int k = 1;
  while (k < n) k *= 2;
  return k;
}

PowerSpectrogram powerSpectrum(const FrameMatrix& frames, int fft_size) {
  const Index frame_len = frames.frameLength();
  if (fft_size < frame_len) {
    throw ConfigError("powerSpectrum: fft_size " + std::to_string(fft_size) +
                      " < frame length " + std::to_string(frame_len));
  }
  if (fft_size < 1 || (fft_size & (fft_size - 1)) != 0) {
    throw ConfigError("powerSpectrum: fft_size must be a power of two, got " +
                      std::to_string(fft_size));
  }

  const Index num_frames = frames.numFrames();
  const Index num_bins = fft_size / 2 + 1;

  PowerSpectrogram out;
  out.fft_size = fft_size;
  out.sample_rate = frames.sample_rate;
  out.bins.resize(num_frames, num_bins);

  Eigen::FFT<Scalar> fft;
  std::vector<Scalar> padded(static_cast<std::size_t>(fft_size), 0.0);
  std::vector<std::complex<Scalar>> spectrum;
  for (Index t = 0; t < num_frames; ++t) {
    for (Index n = 0; n < frame_len; ++n) {
      padded[static_cast<std::size_t>(n)] = frames.frames(t, n);
    }
    fft.fwd(spectrum, padded);
    for (Index b = 0; b < num_bins; ++b) {
      out.bins(t, b) = std::norm(spectrum[static_cast<std::size_t>(b)]);
    }
  }
  return out;
}

}  // namespace serkit

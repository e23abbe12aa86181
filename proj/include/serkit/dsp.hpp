// serkit/dsp.hpp
//
// Waveform -> per-frame power spectrum: pre-emphasis, framing, Hamming
// window, DFT. All functions are pure; safe to call concurrently across
// utterances.
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

#ifndef SERKIT_DSP_HPP
#define SERKIT_DSP_HPP

#include "serkit/types.hpp"

namespace serkit {

// T x N frame rows cut from one waveform.
struct FrameMatrix {
  Matrix frames;         // T x N
  Scalar frame_len_s = 0.0;
  Scalar hop_s = 0.0;
  int sample_rate = 0;

  Index numFrames() const { return frames.rows(); }
  Index frameLength() const { return frames.cols(); }
};

// |DFT|^2 of each frame, bins 0..K/2. Bin b sits at b * sample_rate / K Hz.
struct PowerSpectrogram {
  Matrix bins;           // T x (K/2 + 1), nonnegative
  int fft_size = 0;
  int sample_rate = 0;

  Index numFrames() const { return bins.rows(); }
  Index numBins() const { return bins.cols(); }
  Scalar binWidth() const {
    return static_cast<Scalar>(sample_rate) / fft_size;
  }
};

// y[0] = x[0], y[n] = x[n] - alpha * x[n-1]. alpha in [0, 1).
Waveform preEmphasize(const Waveform& wave, Scalar alpha);

// Slices the signal into frames of frame_len_s seconds every hop_s seconds.
// Frame count is 1 + floor(max(0, L - N) / H); the trailing partial frame is
// zero-padded, and a signal shorter than one frame yields a single padded
// frame.
FrameMatrix frameSignal(const Waveform& wave, Scalar frame_len_s,
                        Scalar hop_s);

// Pointwise w[n] = 0.54 - 0.46 cos(2 pi n / (N - 1)). N = 1 degenerates to
// w = [1].
FrameMatrix applyHamming(const FrameMatrix& frames);

Vector hammingWindow(Index length);

// Smallest power of two >= n.
int nextPowerOfTwo(int n);

// Zero-pads each frame to fft_size and squares the DFT magnitudes of bins
// 0..K/2. fft_size must be a power of two >= frame length.
PowerSpectrogram powerSpectrum(const FrameMatrix& frames, int fft_size);

}  // namespace serkit

#endif  // SERKIT_DSP_HPP

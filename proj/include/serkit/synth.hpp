// serkit/synth.hpp
//
// Synthetic labeled corpus of amplitude/frequency-modulated tones. Each
// emotion label maps to a distinct carrier/modulation recipe and each
// intensity to a loudness level, giving a corpus on which the full
// pipeline is exercised end to end without any licensed audio.
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

#ifndef SERKIT_SYNTH_HPP
#define SERKIT_SYNTH_HPP

#include "serkit/dataset.hpp"
#include "serkit/types.hpp"

#include <cstdint>
#include <string>

namespace serkit {

struct SynthConfig {
  std::string out_dir;
  std::uint64_t seed = 7;
  int per_class = 40;        // utterances per emotion
  int sample_rate = 16000;
  int speakers = 4;
  Scalar min_duration_s = 0.7;
  Scalar max_duration_s = 1.1;
  Scalar noise_level = 0.005;
};

// Writes <out_dir>/clips/*.wav and <out_dir>/manifest.csv; returns the
// manifest path. Non-neutral emotions split per_class evenly between the
// two intensities; neutral is all normal. Deterministic in the seed, down
// to the WAV bytes.
std::string generateSynthCorpus(const SynthConfig& config);

// The tone for one utterance; exposed for tests.
Waveform synthesizeUtterance(Emotion emotion, Intensity intensity,
                             int utterance_index, const SynthConfig& config);

}  // namespace serkit

#endif  // SERKIT_SYNTH_HPP

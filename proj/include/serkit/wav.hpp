// serkit/wav.hpp
//
// Minimal RIFF/WAVE reader and writer. Reads PCM 16-bit and IEEE float
// 32-bit with any channel count (downmixed by arithmetic mean); writes
// mono PCM 16-bit.
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

#ifndef SERKIT_WAV_HPP
#define SERKIT_WAV_HPP

#include "serkit/types.hpp"

#include <string>

namespace serkit {

// 16-bit samples scale by 1/32768; floats pass through. Throws IoError on
// truncated or malformed files and on unsupported encodings.
Waveform readWav(const std::string& path);

// Clamps to [-1, 1] and rounds to 16-bit PCM.
void writeWavPcm16(const std::string& path, const Waveform& wave);

}  // namespace serkit

#endif  // SERKIT_WAV_HPP

// serkit/wav.cpp
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

#include "serkit/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

namespace serkit {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatIeeeFloat = 3;

std::uint32_t readU32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 |
         static_cast<std::uint32_t>(p[3]) << 24;
}

std::uint16_t readU16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}

float readF32(const unsigned char* p) {
  const std::uint32_t bits = readU32(p);
  float value;
  std::memcpy(&value, &bits, sizeof(value));
  return value;
}

}  // namespace

Waveform readWav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("readWav: cannot open " + path);
  }
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw IoError("readWav: " + path + " is not a RIFF/WAVE file");
  }

  std::uint16_t format = 0, channels = 0, bits_per_sample = 0;
  std::uint32_t sample_rate = 0;
  bool have_fmt = false;
  const unsigned char* data = nullptr;
  std::uint32_t data_size = 0;

  // Chunk walk; chunks are word-aligned.
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const char* id = reinterpret_cast<const char*>(bytes.data() + pos);
    const std::uint32_t size = readU32(bytes.data() + pos + 4);
    if (pos + 8 + size > bytes.size()) {
      throw IoError("readWav: truncated chunk in " + path);
    }
    const unsigned char* body = bytes.data() + pos + 8;
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (size < 16) {
        throw IoError("readWav: malformed fmt chunk in " + path);
      }
      format = readU16(body);
      channels = readU16(body + 2);
      sample_rate = readU32(body + 4);
      bits_per_sample = readU16(body + 14);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      data = body;
      data_size = size;
    }
    pos += 8 + size + (size & 1);
  }

  if (!have_fmt) {
    throw IoError("readWav: missing fmt chunk in " + path);
  }
  if (data == nullptr || data_size == 0) {
    throw IoError("readWav: empty or missing data chunk in " + path);
  }
  if (channels == 0 || sample_rate == 0) {
    throw IoError("readWav: malformed fmt fields in " + path);
  }

  std::size_t bytes_per_sample;
  if (format == kFormatPcm && bits_per_sample == 16) {
    bytes_per_sample = 2;
  } else if (format == kFormatIeeeFloat && bits_per_sample == 32) {
    bytes_per_sample = 4;
  } else {
    throw IoError("readWav: unsupported encoding in " + path + " (format " +
                  std::to_string(format) + ", " +
                  std::to_string(bits_per_sample) + " bits)");
  }

  const std::size_t frame_bytes = bytes_per_sample * channels;
  if (data_size % frame_bytes != 0) {
    throw IoError("readWav: data chunk size not a whole number of frames in " +
                  path);
  }
  const std::size_t num_frames = data_size / frame_bytes;

  Waveform wave;
  wave.sample_rate = static_cast<int>(sample_rate);
  wave.samples.resize(static_cast<Index>(num_frames));
  for (std::size_t i = 0; i < num_frames; ++i) {
    Scalar acc = 0.0;
    const unsigned char* frame = data + i * frame_bytes;
    for (std::uint16_t c = 0; c < channels; ++c) {
      const unsigned char* s = frame + c * bytes_per_sample;
      if (bytes_per_sample == 2) {
        const std::int16_t v =
            static_cast<std::int16_t>(readU16(s));
        acc += v / 32768.0;
      } else {
        acc += readF32(s);
      }
    }
    wave.samples(static_cast<Index>(i)) = acc / channels;
  }
  return wave;
}

void writeWavPcm16(const std::string& path, const Waveform& wave) {
  validateWaveform(wave, "writeWavPcm16");
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("writeWavPcm16: cannot open " + path);
  }

  const std::uint32_t num_samples = static_cast<std::uint32_t>(wave.size());
  const std::uint32_t data_size = num_samples * 2;
  const std::uint32_t sample_rate = static_cast<std::uint32_t>(wave.sample_rate);

  auto putU32 = [&](std::uint32_t v) {
    const char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8),
                       static_cast<char>(v >> 16), static_cast<char>(v >> 24)};
    out.write(b, 4);
  };
  auto putU16 = [&](std::uint16_t v) {
    const char b[2] = {static_cast<char>(v), static_cast<char>(v >> 8)};
    out.write(b, 2);
  };

  out.write("RIFF", 4);
  putU32(36 + data_size);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  putU32(16);
  putU16(kFormatPcm);
  putU16(1);  // mono
  putU32(sample_rate);
  putU32(sample_rate * 2);  // byte rate
  putU16(2);                // block align
  putU16(16);               // bits per sample
  out.write("data", 4);
  putU32(data_size);

  // Mirror of the reader's 1/32768 scaling, clamped to the int16 range.
  for (Index i = 0; i < wave.size(); ++i) {
    const long scaled = std::lround(wave.samples(i) * 32768.0);
    const std::int16_t v = static_cast<std::int16_t>(
        std::clamp<long>(scaled, -32768, 32767));
    putU16(static_cast<std::uint16_t>(v));
  }
  if (!out) {
    throw IoError("writeWavPcm16: write failed for " + path);
  }
}

}  // namespace serkit

// serkit/synth.cpp
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

#include "serkit/synth.hpp"

#include "serkit/rng.hpp"
#include "serkit/wav.hpp"

#include <cmath>
#include <filesystem>

namespace serkit {

namespace {

constexpr Scalar kTwoPi = 6.283185307179586476925286766559;

struct ToneRecipe {
  Scalar carrier_hz;
  Scalar vibrato_hz;
  Scalar vibrato_depth_hz;
  Scalar tremolo_hz;
  Scalar harmonic_mix;
};

// One recipe per emotion; carriers are spaced widely enough that every
// class lands in different filter-bank channels.
ToneRecipe recipeFor(Emotion emotion) {
  const int k = static_cast<int>(emotion);
  return ToneRecipe{
      .carrier_hz = 350.0 + 170.0 * k,
      .vibrato_hz = 2.0 + 0.9 * k,
      .vibrato_depth_hz = 12.0 + 5.0 * k,
      .tremolo_hz = 1.3 + 0.8 * ((k * 3) % 8),
      .harmonic_mix = 0.12 + 0.06 * k,
  };
}

}  // namespace

Waveform synthesizeUtterance(Emotion emotion, Intensity intensity,
                             int utterance_index, const SynthConfig& config) {
  Rng rng(deriveSeed(config.seed,
                     toString(emotion) + "/" + toString(intensity),
                     static_cast<std::uint64_t>(utterance_index)));
  const ToneRecipe recipe = recipeFor(emotion);

  const Scalar duration =
      rng.uniform(config.min_duration_s, config.max_duration_s);
  const Scalar carrier = recipe.carrier_hz + rng.uniform(-10.0, 10.0);
  const Scalar vibrato_hz = recipe.vibrato_hz * rng.uniform(0.95, 1.05);
  const Scalar tremolo_hz = recipe.tremolo_hz * rng.uniform(0.95, 1.05);
  const Scalar phase = rng.uniform(0.0, kTwoPi);
  const Scalar harmonic_phase = rng.uniform(0.0, kTwoPi);

  const bool strong = intensity == Intensity::kStrong;
  const Scalar amplitude = strong ? 0.75 : 0.28;
  const Scalar tremolo_depth = strong ? 0.45 : 0.25;

  Waveform wave;
  wave.sample_rate = config.sample_rate;
  const Index num_samples =
      static_cast<Index>(std::lround(duration * config.sample_rate));
  wave.samples.resize(num_samples);

  const Scalar ramp_s = 0.02;
  const Scalar fm_scale = recipe.vibrato_depth_hz / vibrato_hz;
  for (Index n = 0; n < num_samples; ++n) {
    const Scalar t = static_cast<Scalar>(n) / config.sample_rate;
    // Vibrato enters through the phase integral of the modulated frequency.
    const Scalar angle =
        kTwoPi * carrier * t + fm_scale * std::sin(kTwoPi * vibrato_hz * t) +
        phase;
    Scalar s = (1.0 - recipe.harmonic_mix) * std::sin(angle) +
               recipe.harmonic_mix * std::sin(2.0 * angle + harmonic_phase);
    const Scalar tremolo =
        1.0 - tremolo_depth * 0.5 * (1.0 - std::cos(kTwoPi * tremolo_hz * t));
    Scalar envelope = 1.0;
    const Scalar remaining = duration - t;
    if (t < ramp_s) envelope = t / ramp_s;
    if (remaining < ramp_s) envelope = std::min(envelope, remaining / ramp_s);
    s = amplitude * tremolo * envelope * s +
        config.noise_level * rng.normal();
    wave.samples(n) = s;
  }
  return wave;
}

std::string generateSynthCorpus(const SynthConfig& config) {
  if (config.per_class < 2 || config.speakers < 1) {
    throw ConfigError("generateSynthCorpus: need per_class >= 2 and >= 1 "
                      "speaker");
  }
  namespace fs = std::filesystem;
  const fs::path root(config.out_dir);
  const fs::path clips = root / "clips";
  fs::create_directories(clips);

  std::vector<CorpusEntry> entries;
  int speaker_cursor = 0;
  for (int e = 0; e < kNumEmotions; ++e) {
    const Emotion emotion = static_cast<Emotion>(e);
    for (int i = 0; i < config.per_class; ++i) {
      // Neutral has no intensity contrast; other emotions alternate.
      const Intensity intensity =
          emotion == Emotion::kNeutral || i < config.per_class / 2
              ? Intensity::kNormal
              : Intensity::kStrong;
      const Waveform wave = synthesizeUtterance(emotion, intensity, i, config);

      char name[96];
      std::snprintf(name, sizeof(name), "%s_%s_%03d.wav",
                    toString(emotion).c_str(), toString(intensity).c_str(), i);
      const fs::path wav_path = clips / name;
      writeWavPcm16(wav_path.string(), wave);

      CorpusEntry entry;
      entry.path = (fs::path("clips") / name).string();
      entry.emotion = emotion;
      entry.intensity = intensity;
      char speaker[16];
      std::snprintf(speaker, sizeof(speaker), "spk%02d",
                    speaker_cursor % config.speakers);
      ++speaker_cursor;
      entry.speaker = speaker;
      entries.push_back(std::move(entry));
    }
  }

  const std::string manifest = (root / "manifest.csv").string();
  writeManifest(manifest, entries);
  return manifest;
}

}  // namespace serkit

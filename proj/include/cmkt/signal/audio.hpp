// Copyright 2026 The CMKT-SE Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace cmkt::signal {

inline constexpr int kDefaultSampleRate = 16000;

/// Mono waveform with amplitudes nominally in [-1, 1].
struct Waveform {
  std::vector<double> samples;
  int sample_rate = kDefaultSampleRate;

  std::size_t size() const { return samples.size(); }
};

/// Reads a RIFF/WAVE file. Only 16-bit PCM, mono, little-endian is accepted;
/// anything else (stereo, float, 24-bit) raises a FormatError.
Waveform ReadWav(const std::filesystem::path &path);

/// Writes 16-bit PCM mono. Samples are clipped to the int16 range.
void WriteWav(const std::filesystem::path &path, const Waveform &wave);

double MeanPower(const std::vector<double> &x);
double Rms(const std::vector<double> &x);

/// Result of MixAtSnr. `gain` is the factor applied to the noise segment and
/// `noise_offset` the sample index where the (possibly tiled) noise was cut.
struct Mixture {
  Waveform noisy;
  std::vector<double> scaled_noise;
  double gain = 0.0;
  std::size_t noise_offset = 0;
};

/// noisy = clean + g * noise_segment with g chosen so that the power ratio of
/// clean to scaled noise is exactly snr_db. Noise longer than the clean signal
/// is cropped at an offset drawn from `seed`; shorter noise is tiled first.
Mixture MixAtSnr(const Waveform &clean, const Waveform &noise, double snr_db,
                 std::uint64_t seed);

/// 10*log10(P_clean / P_noise) over whole signals.
double MeasureSnrDb(const std::vector<double> &clean,
                    const std::vector<double> &noise);

}  // namespace cmkt::signal

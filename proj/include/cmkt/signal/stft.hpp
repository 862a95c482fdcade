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

#include <Eigen/Dense>
#include <vector>

#include "cmkt/signal/audio.hpp"

namespace cmkt::signal {

using RealMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Analysis parameters. Defaults are 25 ms Hamming frames with a 6.25 ms hop
/// at 16 kHz, giving 201 frequency bins.
struct StftConfig {
  int win_len = 400;
  int hop = 100;
  int n_fft = 400;
  double log_floor = 1e-5;

  int bins() const { return n_fft / 2 + 1; }
  int NumFrames(std::size_t num_samples) const;
  std::size_t NumSamples(int num_frames) const;
  void Validate() const;
};

/// Periodic Hamming window of length win_len.
std::vector<double> HammingWindow(int win_len);

/// Frames x bins natural-log amplitude plus the phase it came with.
struct Spectrogram {
  RealMatrix log_amp;
  RealMatrix phase;
  StftConfig config;

  int frames() const { return static_cast<int>(log_amp.rows()); }
  int bins() const { return static_cast<int>(log_amp.cols()); }
  RealMatrix Magnitude() const { return log_amp.array().exp().matrix(); }
};

/// No center padding: frames = 1 + (len - win_len) / hop.
Spectrogram Stft(const Waveform &wave, const StftConfig &cfg);

/// Weighted overlap-add, normalized by the summed squared window. Output has
/// (frames - 1) * hop + win_len samples.
Waveform Istft(const RealMatrix &magnitude, const RealMatrix &phase,
               const StftConfig &cfg, int sample_rate = kDefaultSampleRate);

/// Convenience: Istft(exp(log_amp), phase).
Waveform Resynthesize(const Spectrogram &spec,
                      int sample_rate = kDefaultSampleRate);

enum class MaskDomain { kMagnitude, kLog };

/// kMagnitude scales linear magnitude and re-applies the log floor; kLog
/// multiplies the log amplitude directly. Phase is copied unchanged.
Spectrogram ApplyMask(const Spectrogram &spec, const RealMatrix &mask,
                      MaskDomain domain = MaskDomain::kMagnitude);

}  // namespace cmkt::signal

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

#include <vector>

#include "cmkt/signal/audio.hpp"

namespace cmkt::eval {

/// Short-time objective intelligibility of `degraded` against `clean`.
/// Both signals are resampled to 10 kHz, frames more than 40 dB below the
/// loudest clean frame are dropped, and 30-frame segments of 15 one-third
/// octave band envelopes are correlated after normalization and clipping
/// at -15 dB SDR. Returns 1e-5 when fewer than 30 frames survive.
double Stoi(const signal::Waveform &clean, const signal::Waveform &degraded);

namespace stoi_detail {

/// Rational resampler by up/down with a Kaiser-windowed sinc (60 dB
/// rejection, transition 1/10 of the stopband edge), normalized to unit DC
/// gain and applied polyphase with the output aligned to the filter centre.
std::vector<double> Resample(const std::vector<double> &x, int up, int down);

/// Drops 256-sample frames (hop 128, Hann window) whose energy is more than
/// `dyn_range` dB below the loudest frame of x, then overlap-adds the rest.
void RemoveSilentFrames(const std::vector<double> &x, const std::vector<double> &y, double dyn_range,
                        std::vector<double> &x_out, std::vector<double> &y_out);

}  // namespace stoi_detail
}  // namespace cmkt::eval

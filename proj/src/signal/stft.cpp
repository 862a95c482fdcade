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

#include "cmkt/signal/stft.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include "cmkt/error.hpp"

namespace cmkt::signal {

int StftConfig::NumFrames(std::size_t num_samples) const {
  if (num_samples < static_cast<std::size_t>(win_len)) return 0;
  return 1 + static_cast<int>((num_samples - win_len) / hop);
}

std::size_t StftConfig::NumSamples(int num_frames) const {
  if (num_frames <= 0) return 0;
  return static_cast<std::size_t>(num_frames - 1) * hop + win_len;
}

void StftConfig::Validate() const {
  if (win_len <= 0 || hop <= 0 || n_fft <= 0) {
    Fail(ErrorKind::kConfig, "STFT sizes must be positive");
  }
  if (hop > win_len) Fail(ErrorKind::kConfig, "hop must not exceed win_len");
  if (n_fft < win_len) Fail(ErrorKind::kConfig, "n_fft must be >= win_len");
  if (!(log_floor > 0.0)) Fail(ErrorKind::kConfig, "log_floor must be positive");
}

std::vector<double> HammingWindow(int win_len) {
  std::vector<double> w(win_len);
  for (int n = 0; n < win_len; ++n) {
    w[n] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * n / win_len);
  }
  return w;
}

Spectrogram Stft(const Waveform &wave, const StftConfig &cfg) {
  cfg.Validate();
  const int frames = cfg.NumFrames(wave.size());
  if (frames == 0) {
    Fail(ErrorKind::kInputTooShort,
         "waveform has " + std::to_string(wave.size()) +
             " samples, need at least " + std::to_string(cfg.win_len));
  }
  const int bins = cfg.bins();
  const auto window = HammingWindow(cfg.win_len);
  const double log_floor = std::log(cfg.log_floor);

  Spectrogram spec;
  spec.config = cfg;
  spec.log_amp.resize(frames, bins);
  spec.phase.resize(frames, bins);

  Eigen::FFT<double> fft;
  std::vector<double> frame(cfg.n_fft, 0.0);
  std::vector<std::complex<double>> bins_out;
  for (int t = 0; t < frames; ++t) {
    const std::size_t start = static_cast<std::size_t>(t) * cfg.hop;
    for (int n = 0; n < cfg.win_len; ++n) {
      frame[n] = wave.samples[start + n] * window[n];
    }
    fft.fwd(bins_out, frame);
    for (int f = 0; f < bins; ++f) {
      const double mag = std::abs(bins_out[f]);
      spec.log_amp(t, f) = mag > cfg.log_floor ? std::log(mag) : log_floor;
      spec.phase(t, f) = std::arg(bins_out[f]);
    }
  }
  return spec;
}

Waveform Istft(const RealMatrix &magnitude, const RealMatrix &phase,
               const StftConfig &cfg, int sample_rate) {
  cfg.Validate();
  if (magnitude.rows() != phase.rows() || magnitude.cols() != phase.cols()) {
    Fail(ErrorKind::kShape, "magnitude and phase shapes differ");
  }
  if (magnitude.cols() != cfg.bins()) {
    Fail(ErrorKind::kShape, "expected " + std::to_string(cfg.bins()) +
                                " bins, got " + std::to_string(magnitude.cols()));
  }
  if ((magnitude.array() < 0.0).any()) {
    Fail(ErrorKind::kInput, "negative magnitude");
  }
  const int frames = static_cast<int>(magnitude.rows());
  const int bins = cfg.bins();
  const auto window = HammingWindow(cfg.win_len);

  Waveform out;
  out.sample_rate = sample_rate;
  out.samples.assign(cfg.NumSamples(frames), 0.0);
  std::vector<double> norm(out.samples.size(), 0.0);

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> full(cfg.n_fft);
  std::vector<std::complex<double>> time;
  for (int t = 0; t < frames; ++t) {
    for (int f = 0; f < bins; ++f) {
      full[f] = std::polar(magnitude(t, f), phase(t, f));
    }
    for (int f = bins; f < cfg.n_fft; ++f) full[f] = std::conj(full[cfg.n_fft - f]);
    fft.inv(time, full);
    const std::size_t start = static_cast<std::size_t>(t) * cfg.hop;
    for (int n = 0; n < cfg.win_len; ++n) {
      out.samples[start + n] += time[n].real() * window[n];
      norm[start + n] += window[n] * window[n];
    }
  }
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    if (norm[i] > 0.0) out.samples[i] /= norm[i];
  }
  return out;
}

Waveform Resynthesize(const Spectrogram &spec, int sample_rate) {
  return Istft(spec.Magnitude(), spec.phase, spec.config, sample_rate);
}

Spectrogram ApplyMask(const Spectrogram &spec, const RealMatrix &mask,
                      MaskDomain domain) {
  if (mask.rows() != spec.log_amp.rows() || mask.cols() != spec.log_amp.cols()) {
    Fail(ErrorKind::kShape, "mask shape does not match spectrogram");
  }
  if (!((mask.array() > 0.0).all() && (mask.array() < 1.0).all())) {
    Fail(ErrorKind::kMaskRange, "mask values must lie strictly inside (0, 1)");
  }
  Spectrogram out;
  out.config = spec.config;
  out.phase = spec.phase;
  if (domain == MaskDomain::kLog) {
    out.log_amp = mask.cwiseProduct(spec.log_amp);
  } else {
    const double floor = std::log(spec.config.log_floor);
    out.log_amp = (mask.array().log() + spec.log_amp.array()).max(floor).matrix();
  }
  return out;
}

}  // namespace cmkt::signal

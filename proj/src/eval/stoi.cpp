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

#include "cmkt/eval/stoi.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>

#include "cmkt/error.hpp"

namespace cmkt::eval {
namespace {

constexpr int kFs = 10000;
constexpr int kFrame = 256;
constexpr int kHop = 128;
constexpr int kNfft = 512;
constexpr int kBands = 15;
constexpr double kMinFreq = 150.0;
constexpr int kSegment = 30;
constexpr double kBeta = -15.0;
constexpr double kDynRange = 40.0;
constexpr double kEps = std::numeric_limits<double>::epsilon();

// Hann window of length n without the zero end points.
std::vector<double> Hann(int n) {
  std::vector<double> w(n);
  const double m = n + 1;
  for (int i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * (i + 1) / m);
  return w;
}

double Sinc(double x) {
  if (x == 0.0) return 1.0;
  return std::sin(M_PI * x) / (M_PI * x);
}

// Band matrix as [first, last) bin ranges.
std::vector<std::pair<int, int>> ThirdOctaveBands() {
  const int bins = kNfft / 2 + 1;
  std::vector<double> f(bins);
  for (int k = 0; k < bins; ++k) f[k] = static_cast<double>(kFs) * k / kNfft;
  auto nearest = [&](double target) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int k = 0; k < bins; ++k) {
      const double d = (f[k] - target) * (f[k] - target);
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    return best;
  };
  std::vector<std::pair<int, int>> bands;
  for (int i = 0; i < kBands; ++i) {
    const double lo = kMinFreq * std::pow(2.0, (2.0 * i - 1.0) / 6.0);
    const double hi = kMinFreq * std::pow(2.0, (2.0 * i + 1.0) / 6.0);
    bands.emplace_back(nearest(lo), nearest(hi));
  }
  return bands;
}

// Band envelopes, [bands x frames].
std::vector<std::vector<double>> BandEnvelopes(const std::vector<double> &x) {
  static const auto bands = ThirdOctaveBands();
  static const auto window = Hann(kFrame);
  Eigen::FFT<double> fft;
  std::vector<double> frame(kNfft, 0.0);
  std::vector<std::complex<double>> spec;
  std::vector<std::vector<double>> env(kBands);
  const long len = static_cast<long>(x.size());
  for (long start = 0; start < len - kFrame; start += kHop) {
    std::fill(frame.begin(), frame.end(), 0.0);
    for (int i = 0; i < kFrame; ++i) frame[i] = window[i] * x[start + i];
    fft.fwd(spec, frame);
    for (int b = 0; b < kBands; ++b) {
      double power = 0.0;
      for (int k = bands[b].first; k < bands[b].second; ++k) power += std::norm(spec[k]);
      env[b].push_back(std::sqrt(power));
    }
  }
  return env;
}

long FloorDiv(long a, long b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

double Norm(const double *v, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += v[i] * v[i];
  return std::sqrt(s);
}

}  // namespace

namespace stoi_detail {

std::vector<double> Resample(const std::vector<double> &x, int up, int down) {
  const int g = std::gcd(up, down);
  up /= g;
  down /= g;
  if (up == 1 && down == 1) return x;

  const double cutoff = 1.0 / (2.0 * std::max(up, down));
  const double roll_off = cutoff / 10.0;
  const double rejection_db = 60.0;
  const long half = static_cast<long>(std::ceil((rejection_db - 8.0) / (28.714 * roll_off)));
  const double beta = 0.1102 * (rejection_db - 8.7);
  const long taps = 2 * half + 1;
  std::vector<double> h(taps);
  const double i0_beta = std::cyl_bessel_i(0.0, beta);
  double sum = 0.0;
  for (long n = 0; n < taps; ++n) {
    const double t = static_cast<double>(n - half);
    const double ratio = 2.0 * n / (taps - 1) - 1.0;
    const double kaiser = std::cyl_bessel_i(0.0, beta * std::sqrt(std::max(0.0, 1.0 - ratio * ratio))) / i0_beta;
    h[n] = kaiser * 2.0 * up * cutoff * Sinc(2.0 * cutoff * t);
    sum += h[n];
  }
  for (auto &v : h) v = v / sum * up;

  // Output sample m sits at upsampled index (pre_remove + m) * down of the
  // filter padded by pre_pad zeros in front.
  const long n_in = static_cast<long>(x.size());
  const long n_out = (n_in * up + down - 1) / down;
  const long pre_pad = down - half % down;
  const long pre_remove = (half + pre_pad) / down;
  std::vector<double> y(n_out, 0.0);
  for (long m = 0; m < n_out; ++m) {
    const long pos = (pre_remove + m) * down - pre_pad;  // index into h for k = 0
    // Valid k satisfy 0 <= pos - k * up < taps.
    const long k_lo = std::max(0L, FloorDiv(pos - taps, up) + 1);
    const long k_hi = std::min(n_in - 1, FloorDiv(pos, up));
    double acc = 0.0;
    for (long k = k_lo; k <= k_hi; ++k) acc += x[k] * h[pos - k * up];
    y[m] = acc;
  }
  return y;
}

void RemoveSilentFrames(const std::vector<double> &x, const std::vector<double> &y, double dyn_range,
                        std::vector<double> &x_out, std::vector<double> &y_out) {
  static const auto window = Hann(kFrame);
  const long len = static_cast<long>(x.size());
  std::vector<long> starts;
  for (long s = 0; s < len - kFrame; s += kHop) starts.push_back(s);
  std::vector<double> energy(starts.size());
  double max_energy = -std::numeric_limits<double>::infinity();
  std::vector<double> frame(kFrame);
  for (std::size_t f = 0; f < starts.size(); ++f) {
    for (int i = 0; i < kFrame; ++i) frame[i] = window[i] * x[starts[f] + i];
    energy[f] = 20.0 * std::log10(Norm(frame.data(), kFrame) + kEps);
    max_energy = std::max(max_energy, energy[f]);
  }
  std::vector<long> kept;
  for (std::size_t f = 0; f < starts.size(); ++f) {
    if (max_energy - dyn_range - energy[f] < 0.0) kept.push_back(starts[f]);
  }
  const std::size_t out_len = kept.empty() ? 0 : (kept.size() - 1) * kHop + kFrame;
  x_out.assign(out_len, 0.0);
  y_out.assign(out_len, 0.0);
  for (std::size_t j = 0; j < kept.size(); ++j) {
    for (int i = 0; i < kFrame; ++i) {
      x_out[j * kHop + i] += window[i] * x[kept[j] + i];
      y_out[j * kHop + i] += window[i] * y[kept[j] + i];
    }
  }
}

}  // namespace stoi_detail

double Stoi(const signal::Waveform &clean, const signal::Waveform &degraded) {
  if (clean.size() != degraded.size()) Fail(ErrorKind::kShape, "STOI inputs differ in length");
  if (clean.sample_rate != degraded.sample_rate) Fail(ErrorKind::kShape, "STOI inputs differ in sample rate");
  if (std::all_of(clean.samples.begin(), clean.samples.end(), [](double v) { return v == 0.0; })) {
    Fail(ErrorKind::kDegenerateSignal, "STOI reference is silent");
  }
  std::vector<double> x = stoi_detail::Resample(clean.samples, kFs, clean.sample_rate);
  std::vector<double> y = stoi_detail::Resample(degraded.samples, kFs, degraded.sample_rate);
  if (static_cast<long>(x.size()) <= kFrame) Fail(ErrorKind::kInputTooShort, "STOI input shorter than one frame");

  std::vector<double> xs, ys;
  stoi_detail::RemoveSilentFrames(x, y, kDynRange, xs, ys);
  const auto x_env = BandEnvelopes(xs);
  const auto y_env = BandEnvelopes(ys);
  const int frames = static_cast<int>(x_env[0].size());
  if (frames < kSegment) return 1e-5;

  const double clip = std::pow(10.0, -kBeta / 20.0);
  double total = 0.0;
  std::vector<double> xv(kSegment), yv(kSegment);
  const int segments = frames - kSegment + 1;
  for (int m = 0; m < segments; ++m) {
    for (int b = 0; b < kBands; ++b) {
      for (int t = 0; t < kSegment; ++t) {
        xv[t] = x_env[b][m + t];
        yv[t] = y_env[b][m + t];
      }
      const double alpha = Norm(xv.data(), kSegment) / (Norm(yv.data(), kSegment) + kEps);
      for (int t = 0; t < kSegment; ++t) yv[t] = std::min(yv[t] * alpha, xv[t] * (1.0 + clip));
      const double ym = std::accumulate(yv.begin(), yv.end(), 0.0) / kSegment;
      const double xm = std::accumulate(xv.begin(), xv.end(), 0.0) / kSegment;
      for (int t = 0; t < kSegment; ++t) {
        yv[t] -= ym;
        xv[t] -= xm;
      }
      const double yn = Norm(yv.data(), kSegment) + kEps;
      const double xn = Norm(xv.data(), kSegment) + kEps;
      double corr = 0.0;
      for (int t = 0; t < kSegment; ++t) corr += (yv[t] / yn) * (xv[t] / xn);
      total += corr;
    }
  }
  return total / (static_cast<double>(segments) * kBands);
}

}  // namespace cmkt::eval

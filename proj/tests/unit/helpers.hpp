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

// Shared fixtures for the unit tests.

#pragma once

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "cmkt/ag/ops.hpp"
#include "cmkt/error.hpp"
#include "cmkt/model/config.hpp"
#include "cmkt/rng.hpp"
#include "cmkt/signal/audio.hpp"
#include "cmkt/transfer/cmt.hpp"

namespace cmkt::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string &tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("cmkt_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path &path() const { return path_; }
  std::filesystem::path operator/(const std::string &name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline signal::Waveform RandomWave(std::size_t n, std::uint64_t seed, double scale = 0.3) {
  std::mt19937_64 rng(seed);
  signal::Waveform w;
  w.samples.resize(n);
  for (auto &x : w.samples) x = scale * Gaussian(rng);
  return w;
}

/// Harmonic tone with a slow envelope; stands in for voiced speech.
inline signal::Waveform ToneWave(std::size_t n, double f0, std::uint64_t seed, std::size_t lead_silence = 0) {
  std::mt19937_64 rng(seed);
  signal::Waveform w;
  w.samples.assign(n, 0.0);
  for (std::size_t i = lead_silence; i < n; ++i) {
    const double t = static_cast<double>(i) / w.sample_rate;
    double s = 0.0;
    for (int k = 1; k * f0 < 6000; ++k) s += std::sin(2 * M_PI * k * f0 * t + k) / k;
    w.samples[i] = 0.2 * s * (0.6 + 0.4 * std::sin(2 * M_PI * 3.0 * t));
  }
  (void)rng;
  return w;
}

template <typename T>
ag::Mat<T> RandomMat(Eigen::Index r, Eigen::Index c, std::mt19937_64 &rng, double lo = -1.0, double hi = 1.0) {
  ag::Mat<T> m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(UniformIn(rng, lo, hi));
  return m;
}

/// Tiny enhancement network used across tests.
inline model::ModelConfig TinyModel(model::BlockKind kind = model::BlockKind::kConformer) {
  auto m = model::ModelConfig::ForKind(kind);
  m.n_blocks = 1;
  m.d_a = 16;
  m.bins = 201;
  m.heads = 2;
  m.ffn_dim = 32;
  m.conv_kernel = 3;
  m.cnn_channels = {2, 2};
  m.d_t = 16;
  m.dropout = 0.0;
  m.lstm_hidden = 8;
  return m;
}

inline transfer::CmtConfig TinyCmt(int d_model = 16) {
  transfer::CmtConfig c;
  c.layers = 2;
  c.d_model = d_model;
  c.heads = 2;
  c.ffn_dim = 32;
  c.dropout = 0.0;
  return c;
}

/// Max relative error of reverse-mode gradients of `f` w.r.t. each input,
/// against central differences.
template <typename F>
double MaxGradError(F &&f, std::vector<ag::Var<double>> inputs, double h = 1e-6) {
  for (auto &in : inputs) in.ZeroGrad();
  ag::Backward(f(inputs));
  double worst = 0.0;
  for (auto &in : inputs) {
    const ag::Mat<double> analytic =
        in.has_grad() ? in.grad() : ag::Mat<double>::Zero(in.rows(), in.cols());
    for (Eigen::Index k = 0; k < in.value().size(); ++k) {
      double &v = in.mutable_value().data()[k];
      const double saved = v;
      double plus, minus;
      {
        ag::NoGradGuard guard;
        v = saved + h;
        plus = f(inputs).item();
        v = saved - h;
        minus = f(inputs).item();
      }
      v = saved;
      const double numeric = (plus - minus) / (2 * h);
      const double a = analytic.data()[k];
      worst = std::max(worst, std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6}));
    }
  }
  return worst;
}

#define CHECK_THROWS_KIND(expr, expected_kind)                   \
  do {                                                           \
    bool cmkt_thrown = false;                                    \
    try {                                                        \
      (void)(expr);                                              \
    } catch (const ::cmkt::Error &cmkt_e) {                      \
      cmkt_thrown = true;                                        \
      CHECK_MESSAGE(cmkt_e.kind() == (expected_kind), cmkt_e.what()); \
    }                                                            \
    CHECK_MESSAGE(cmkt_thrown, "expected an error from " #expr); \
  } while (0)

}  // namespace cmkt::testing

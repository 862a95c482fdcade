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

#include "cmkt/model/se_model.hpp"

#include <cmath>
#include <string>

namespace cmkt::model {
namespace {
using U32 = std::uint32_t;

std::string BlockPrefix(int i) { return "blocks." + std::to_string(i); }
}  // namespace

template <typename T>
ParamStore<T> InitParams(const ModelConfig &cfg, std::uint64_t seed) {
  cfg.Validate();
  std::mt19937_64 rng(seed);
  ParamStore<T> store;

  int in_ch = 1;
  for (std::size_t i = 0; i < cfg.cnn_channels.size(); ++i) {
    const int out_ch = cfg.cnn_channels[i];
    const int fan_in = in_ch * cfg.cnn_kernel * cfg.cnn_kernel;
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    ag::Mat<T> w(out_ch, fan_in), b(1, out_ch);
    for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = static_cast<T>(dist(rng));
    for (Eigen::Index k = 0; k < b.size(); ++k) b.data()[k] = static_cast<T>(dist(rng));
    const std::string p = "encoder.conv" + std::to_string(i);
    store.Add(p + ".weight", {U32(out_ch), U32(in_ch), U32(cfg.cnn_kernel), U32(cfg.cnn_kernel)}, std::move(w));
    store.Add(p + ".bias", {U32(out_ch)}, std::move(b));
    in_ch = out_ch;
  }
  AddLinear(store, "encoder.proj", in_ch * cfg.bins, cfg.d_a, rng);

  for (int i = 0; i < cfg.n_blocks; ++i) {
    switch (cfg.block) {
      case BlockKind::kConformer:
        AddConformerBlock(store, BlockPrefix(i), cfg.d_a, cfg.ffn_dim, cfg.conv_kernel, rng);
        break;
      case BlockKind::kTransformer:
        AddTransformerBlock(store, BlockPrefix(i), cfg.d_a, cfg.ffn_dim, rng);
        break;
      case BlockKind::kBlstm:
        AddBlstmBlock(store, BlockPrefix(i), cfg.d_a, cfg.lstm_hidden, rng);
        break;
    }
  }

  AddLinear(store, "residual.fc1", cfg.d_a, cfg.d_t, rng);
  AddLayerNorm(store, "residual.ln1", cfg.d_t);
  AddLinear(store, "residual.fc2", cfg.d_t, cfg.d_a, rng);
  AddLayerNorm(store, "residual.ln2", cfg.d_a);
  AddLinear(store, "regression.fc", cfg.d_a, cfg.bins, rng);
  return store;
}

template <typename T>
ag::Var<T> CnnEncode(const ParamStore<T> &store, const ModelConfig &cfg, const ag::Var<T> &log_amp) {
  if (log_amp.cols() != cfg.bins) {
    Fail(ErrorKind::kShape, "spectrogram has " + std::to_string(log_amp.cols()) +
                                " bins, model expects " + std::to_string(cfg.bins));
  }
  const Eigen::Index frames = log_amp.rows();
  // Activations are kept as [(frames*bins) x channels]; the single input
  // channel is a plain reshape of the spectrogram.
  ag::Var<T> x = ag::Reshape(log_amp, frames * cfg.bins, 1);
  for (std::size_t i = 0; i < cfg.cnn_channels.size(); ++i) {
    const std::string p = "encoder.conv" + std::to_string(i);
    x = ag::Relu(ag::Conv2dSame(x, frames, cfg.bins, store.Get(p + ".weight"), store.Get(p + ".bias"),
                                cfg.cnn_kernel));
  }
  x = ag::Reshape(x, frames, cfg.bins * cfg.cnn_channels.back());
  return LinearLayer(store, "encoder.proj", x);
}

template <typename T>
ag::Var<T> AddPositionEncoding(const ag::Var<T> &h) {
  return ag::Add(h, ag::Constant(SinusoidalEncoding<T>(h.rows(), h.cols())));
}

template <typename T>
ag::Var<T> SeBlocksForward(const ParamStore<T> &store, const ModelConfig &cfg, const ag::Var<T> &a_in,
                           const RunContext<T> &ctx) {
  ag::Var<T> x = a_in;
  for (int i = 0; i < cfg.n_blocks; ++i) {
    switch (cfg.block) {
      case BlockKind::kConformer:
        x = ConformerBlock(store, BlockPrefix(i), x, cfg.heads, ctx).a4;
        break;
      case BlockKind::kTransformer:
        x = TransformerBlock(store, BlockPrefix(i), x, cfg.heads, ctx);
        break;
      case BlockKind::kBlstm:
        x = BlstmBlock(store, BlockPrefix(i), x, ctx);
        break;
    }
  }
  return x;
}

template <typename T>
std::pair<ag::Var<T>, ag::Var<T>> ResidualModule(const ParamStore<T> &store, const ag::Var<T> &a4) {
  auto e_a = LinearLayer(store, "residual.fc1", a4);
  auto back = LayerNormLayer(store, "residual.ln2",
                             LinearLayer(store, "residual.fc2", LayerNormLayer(store, "residual.ln1", e_a)));
  return {e_a, ag::Add(a4, back)};
}

template <typename T>
std::pair<ag::Var<T>, ag::Var<T>> RegressionMask(const ParamStore<T> &store, const ag::Var<T> &a_r) {
  auto logits = LinearLayer(store, "regression.fc", a_r);
  return {logits, ag::Sigmoid(logits)};
}

template <typename T>
AcousticState<T> ForwardAcoustic(const ParamStore<T> &store, const ModelConfig &cfg,
                                 const ag::Mat<T> &log_amp, const RunContext<T> &ctx) {
  AcousticState<T> s;
  s.h = CnnEncode(store, cfg, ag::Constant(log_amp));
  s.a_in = AddPositionEncoding(s.h);
  s.a4 = SeBlocksForward(store, cfg, s.a_in, ctx);
  std::tie(s.e_a, s.a_r) = ResidualModule(store, s.a4);
  std::tie(s.logits, s.mask) = RegressionMask(store, s.a_r);
  return s;
}

template <typename T>
EnhanceResult EnhanceForward(const signal::Spectrogram &noisy, const ParamStore<T> &params,
                             const ModelConfig &cfg) {
  ag::NoGradGuard no_grad;
  std::vector<ag::Mat<T>> attention;
  RunContext<T> ctx;
  ctx.attention = &attention;
  const auto state = ForwardAcoustic(params, cfg, noisy.log_amp.cast<T>().eval(), ctx);

  EnhanceResult out;
  out.mask = state.mask.value().template cast<double>();
  out.speech_embedding = state.e_a.value().template cast<double>();
  out.enhanced = signal::ApplyMask(noisy, out.mask, cfg.mask_domain);
  out.attention.reserve(attention.size());
  for (const auto &a : attention) out.attention.push_back(a.template cast<double>());
  return out;
}

#define CMKT_INSTANTIATE_SE(T)                                                                      \
  template ParamStore<T> InitParams<T>(const ModelConfig &, std::uint64_t);                         \
  template ag::Var<T> CnnEncode<T>(const ParamStore<T> &, const ModelConfig &, const ag::Var<T> &); \
  template ag::Var<T> AddPositionEncoding<T>(const ag::Var<T> &);                                   \
  template ag::Var<T> SeBlocksForward<T>(const ParamStore<T> &, const ModelConfig &,                \
                                         const ag::Var<T> &, const RunContext<T> &);                \
  template std::pair<ag::Var<T>, ag::Var<T>> ResidualModule<T>(const ParamStore<T> &,               \
                                                               const ag::Var<T> &);                 \
  template std::pair<ag::Var<T>, ag::Var<T>> RegressionMask<T>(const ParamStore<T> &,               \
                                                               const ag::Var<T> &);                 \
  template AcousticState<T> ForwardAcoustic<T>(const ParamStore<T> &, const ModelConfig &,          \
                                               const ag::Mat<T> &, const RunContext<T> &);          \
  template EnhanceResult EnhanceForward<T>(const signal::Spectrogram &, const ParamStore<T> &,      \
                                           const ModelConfig &);

CMKT_INSTANTIATE_SE(float)
CMKT_INSTANTIATE_SE(double)

}  // namespace cmkt::model

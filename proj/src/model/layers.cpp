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

#include "cmkt/model/layers.hpp"

#include <cmath>

namespace cmkt::model {
namespace {

using U32 = std::uint32_t;

template <typename T>
ag::Mat<T> Uniform(Eigen::Index rows, Eigen::Index cols, double bound, std::mt19937_64 &rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  ag::Mat<T> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(dist(rng));
  return m;
}

}  // namespace

template <typename T>
void AddLinear(ParamStore<T> &store, const std::string &prefix, int in, int out, std::mt19937_64 &rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  store.Add(prefix + ".weight", {U32(in), U32(out)}, Uniform<T>(in, out, bound, rng));
  store.Add(prefix + ".bias", {U32(out)}, Uniform<T>(1, out, bound, rng));
}

template <typename T>
void AddLayerNorm(ParamStore<T> &store, const std::string &prefix, int dim) {
  store.Add(prefix + ".gain", {U32(dim)}, ag::Mat<T>::Ones(1, dim));
  store.Add(prefix + ".bias", {U32(dim)}, ag::Mat<T>::Zero(1, dim));
}

template <typename T>
void AddFeedForward(ParamStore<T> &store, const std::string &prefix, int dim, int hidden,
                    bool pre_norm, std::mt19937_64 &rng) {
  if (pre_norm) AddLayerNorm(store, prefix + ".ln", dim);
  AddLinear(store, prefix + ".fc1", dim, hidden, rng);
  AddLinear(store, prefix + ".fc2", hidden, dim, rng);
}

template <typename T>
void AddAttention(ParamStore<T> &store, const std::string &prefix, int dim, std::mt19937_64 &rng) {
  for (const char *proj : {".q", ".k", ".v", ".o"}) AddLinear(store, prefix + proj, dim, dim, rng);
}

template <typename T>
void AddConformerBlock(ParamStore<T> &store, const std::string &prefix, int dim, int ffn_dim,
                       int conv_kernel, std::mt19937_64 &rng) {
  AddFeedForward(store, prefix + ".ffn1", dim, ffn_dim, true, rng);
  AddLayerNorm(store, prefix + ".mhsa_ln", dim);
  AddAttention(store, prefix + ".mhsa", dim, rng);
  AddLayerNorm(store, prefix + ".conv.ln", dim);
  AddLinear(store, prefix + ".conv.pw1", dim, 2 * dim, rng);
  const double bound = 1.0 / std::sqrt(static_cast<double>(conv_kernel));
  store.Add(prefix + ".conv.dw.weight", {U32(conv_kernel), U32(dim)},
            Uniform<T>(conv_kernel, dim, bound, rng));
  store.Add(prefix + ".conv.dw.bias", {U32(dim)}, Uniform<T>(1, dim, bound, rng));
  AddLayerNorm(store, prefix + ".conv.norm", dim);
  AddLinear(store, prefix + ".conv.pw2", dim, dim, rng);
  AddFeedForward(store, prefix + ".ffn2", dim, ffn_dim, true, rng);
  AddLayerNorm(store, prefix + ".final_ln", dim);
}

template <typename T>
void AddTransformerBlock(ParamStore<T> &store, const std::string &prefix, int dim, int ffn_dim,
                         std::mt19937_64 &rng) {
  AddAttention(store, prefix + ".mhsa", dim, rng);
  AddLayerNorm(store, prefix + ".ln1", dim);
  AddFeedForward(store, prefix + ".ffn", dim, ffn_dim, false, rng);
  AddLayerNorm(store, prefix + ".ln2", dim);
}

template <typename T>
void AddBlstmBlock(ParamStore<T> &store, const std::string &prefix, int dim, int hidden,
                   std::mt19937_64 &rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (const char *dir : {".fwd", ".bwd"}) {
    const std::string p = prefix + dir;
    store.Add(p + ".w_ih", {U32(dim), U32(4 * hidden)}, Uniform<T>(dim, 4 * hidden, bound, rng));
    store.Add(p + ".w_hh", {U32(hidden), U32(4 * hidden)}, Uniform<T>(hidden, 4 * hidden, bound, rng));
    store.Add(p + ".bias", {U32(4 * hidden)}, Uniform<T>(1, 4 * hidden, bound, rng));
  }
  AddLinear(store, prefix + ".proj", 2 * hidden, dim, rng);
}

template <typename T>
ag::Var<T> LinearLayer(const ParamStore<T> &store, const std::string &prefix, const ag::Var<T> &x) {
  return ag::Linear(x, store.Get(prefix + ".weight"), store.Get(prefix + ".bias"));
}

template <typename T>
ag::Var<T> LayerNormLayer(const ParamStore<T> &store, const std::string &prefix, const ag::Var<T> &x) {
  return ag::LayerNorm(x, store.Get(prefix + ".gain"), store.Get(prefix + ".bias"));
}

template <typename T>
ag::Var<T> FeedForward(const ParamStore<T> &store, const std::string &prefix, const ag::Var<T> &x,
                       Activation act, bool pre_norm, const RunContext<T> &ctx) {
  ag::Var<T> h = pre_norm ? LayerNormLayer(store, prefix + ".ln", x) : x;
  h = LinearLayer(store, prefix + ".fc1", h);
  h = act == Activation::kSwish ? ag::Swish(h) : ag::Relu(h);
  h = ag::Dropout(h, ctx.DropRate(), ctx.rng);
  h = LinearLayer(store, prefix + ".fc2", h);
  return ag::Dropout(h, ctx.DropRate(), ctx.rng);
}

template <typename T>
ag::Var<T> MultiHeadAttention(const ParamStore<T> &store, const std::string &prefix,
                              const ag::Var<T> &query, const ag::Var<T> &memory, int heads,
                              const RunContext<T> &ctx) {
  if (memory.rows() == 0) Fail(ErrorKind::kInput, "attention over an empty key sequence");
  const Eigen::Index dim = query.cols();
  if (dim % heads != 0) Fail(ErrorKind::kConfig, "attention width not divisible by heads");
  const Eigen::Index head_dim = dim / heads;
  const auto q = LinearLayer(store, prefix + ".q", query);
  const auto k = LinearLayer(store, prefix + ".k", memory);
  const auto v = LinearLayer(store, prefix + ".v", memory);
  const T scale = T(1) / std::sqrt(static_cast<T>(head_dim));
  std::vector<ag::Var<T>> outputs;
  outputs.reserve(heads);
  for (int h = 0; h < heads; ++h) {
    const auto qh = ag::ColSlice(q, h * head_dim, head_dim);
    const auto kh = ag::ColSlice(k, h * head_dim, head_dim);
    const auto vh = ag::ColSlice(v, h * head_dim, head_dim);
    auto weights = ag::SoftmaxRows(ag::Scale(ag::MatMulNT(qh, kh), scale));
    if (ctx.attention) ctx.attention->push_back(weights.value());
    weights = ag::Dropout(weights, ctx.DropRate(), ctx.rng);
    outputs.push_back(ag::MatMul(weights, vh));
  }
  const auto merged = heads == 1 ? outputs.front() : ag::ConcatCols(outputs);
  return LinearLayer(store, prefix + ".o", merged);
}

template <typename T>
ConformerStages<T> ConformerBlock(const ParamStore<T> &store, const std::string &prefix,
                                  const ag::Var<T> &x, int heads, const RunContext<T> &ctx) {
  ConformerStages<T> s;
  const T half = T(0.5);
  s.a1 = ag::Add(x, ag::Scale(FeedForward(store, prefix + ".ffn1", x, Activation::kSwish, true, ctx), half));

  const auto normed = LayerNormLayer(store, prefix + ".mhsa_ln", s.a1);
  auto attended = MultiHeadAttention(store, prefix + ".mhsa", normed, normed, heads, ctx);
  s.a2 = ag::Add(s.a1, ag::Dropout(attended, ctx.DropRate(), ctx.rng));

  // Convolution module: LN, pointwise + GLU, depthwise over time, LN, swish, pointwise.
  auto c = LayerNormLayer(store, prefix + ".conv.ln", s.a2);
  c = ag::Glu(LinearLayer(store, prefix + ".conv.pw1", c));
  c = ag::DepthwiseConvTime(c, store.Get(prefix + ".conv.dw.weight"), store.Get(prefix + ".conv.dw.bias"));
  c = ag::Swish(LayerNormLayer(store, prefix + ".conv.norm", c));
  c = LinearLayer(store, prefix + ".conv.pw2", c);
  s.a3 = ag::Add(s.a2, ag::Dropout(c, ctx.DropRate(), ctx.rng));

  const auto ffn2 = FeedForward(store, prefix + ".ffn2", s.a3, Activation::kSwish, true, ctx);
  s.a4 = LayerNormLayer(store, prefix + ".final_ln", ag::Add(s.a3, ag::Scale(ffn2, half)));
  return s;
}

template <typename T>
ag::Var<T> TransformerBlock(const ParamStore<T> &store, const std::string &prefix,
                            const ag::Var<T> &x, int heads, const RunContext<T> &ctx) {
  auto attended = MultiHeadAttention(store, prefix + ".mhsa", x, x, heads, ctx);
  auto y = LayerNormLayer(store, prefix + ".ln1", ag::Add(x, ag::Dropout(attended, ctx.DropRate(), ctx.rng)));
  auto f = FeedForward(store, prefix + ".ffn", y, Activation::kRelu, false, ctx);
  return LayerNormLayer(store, prefix + ".ln2", ag::Add(y, f));
}

template <typename T>
ag::Var<T> BlstmBlock(const ParamStore<T> &store, const std::string &prefix, const ag::Var<T> &x,
                      const RunContext<T> &ctx) {
  const auto fwd = ag::Lstm(x, store.Get(prefix + ".fwd.w_ih"), store.Get(prefix + ".fwd.w_hh"),
                            store.Get(prefix + ".fwd.bias"), false);
  const auto bwd = ag::Lstm(x, store.Get(prefix + ".bwd.w_ih"), store.Get(prefix + ".bwd.w_hh"),
                            store.Get(prefix + ".bwd.bias"), true);
  auto both = ag::Dropout(ag::ConcatCols<T>({fwd, bwd}), ctx.DropRate(), ctx.rng);
  return LinearLayer(store, prefix + ".proj", both);
}

template <typename T>
ag::Mat<T> SinusoidalEncoding(Eigen::Index rows, Eigen::Index dim) {
  ag::Mat<T> pe(rows, dim);
  for (Eigen::Index p = 0; p < rows; ++p) {
    for (Eigen::Index i = 0; i < dim; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(dim));
      const double angle = static_cast<double>(p) * rate;
      pe(p, i) = static_cast<T>(i % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  }
  return pe;
}

#define CMKT_INSTANTIATE_LAYERS(T)                                                                  \
  template void AddLinear<T>(ParamStore<T> &, const std::string &, int, int, std::mt19937_64 &);    \
  template void AddLayerNorm<T>(ParamStore<T> &, const std::string &, int);                         \
  template void AddFeedForward<T>(ParamStore<T> &, const std::string &, int, int, bool,             \
                                  std::mt19937_64 &);                                               \
  template void AddAttention<T>(ParamStore<T> &, const std::string &, int, std::mt19937_64 &);      \
  template void AddConformerBlock<T>(ParamStore<T> &, const std::string &, int, int, int,           \
                                     std::mt19937_64 &);                                            \
  template void AddTransformerBlock<T>(ParamStore<T> &, const std::string &, int, int,              \
                                       std::mt19937_64 &);                                          \
  template void AddBlstmBlock<T>(ParamStore<T> &, const std::string &, int, int, std::mt19937_64 &); \
  template ag::Var<T> LinearLayer<T>(const ParamStore<T> &, const std::string &, const ag::Var<T> &); \
  template ag::Var<T> LayerNormLayer<T>(const ParamStore<T> &, const std::string &,                 \
                                        const ag::Var<T> &);                                        \
  template ag::Var<T> FeedForward<T>(const ParamStore<T> &, const std::string &, const ag::Var<T> &, \
                                     Activation, bool, const RunContext<T> &);                      \
  template ag::Var<T> MultiHeadAttention<T>(const ParamStore<T> &, const std::string &,             \
                                            const ag::Var<T> &, const ag::Var<T> &, int,            \
                                            const RunContext<T> &);                                 \
  template ConformerStages<T> ConformerBlock<T>(const ParamStore<T> &, const std::string &,         \
                                                const ag::Var<T> &, int, const RunContext<T> &);    \
  template ag::Var<T> TransformerBlock<T>(const ParamStore<T> &, const std::string &,               \
                                          const ag::Var<T> &, int, const RunContext<T> &);          \
  template ag::Var<T> BlstmBlock<T>(const ParamStore<T> &, const std::string &, const ag::Var<T> &, \
                                    const RunContext<T> &);                                         \
  template ag::Mat<T> SinusoidalEncoding<T>(Eigen::Index, Eigen::Index);

CMKT_INSTANTIATE_LAYERS(float)
CMKT_INSTANTIATE_LAYERS(double)

}  // namespace cmkt::model

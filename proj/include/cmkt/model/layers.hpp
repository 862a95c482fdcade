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

// Building blocks shared by the enhancement network and the cross-modality
// transformer. Each block has an Add* initializer that registers its
// parameters under a name prefix and a forward function reading them back.

#pragma once

#include <random>
#include <string>
#include <vector>

#include "cmkt/ag/ops.hpp"
#include "cmkt/model/param_store.hpp"

namespace cmkt::model {

/// Per-call forward settings. Dropout is active only when training and an
/// rng is supplied; attention maps are appended to `attention` when set.
template <typename T>
struct RunContext {
  bool training = false;
  std::mt19937_64 *rng = nullptr;
  double dropout = 0.0;
  std::vector<ag::Mat<T>> *attention = nullptr;

  double DropRate() const { return training && rng != nullptr ? dropout : 0.0; }
};

enum class Activation { kRelu, kSwish };

// Initializers. Linear and conv weights draw from U(-1/sqrt(fan_in), +..);
// layer-norm gains start at 1 and biases at 0.
template <typename T>
void AddLinear(ParamStore<T> &store, const std::string &prefix, int in, int out, std::mt19937_64 &rng);
template <typename T>
void AddLayerNorm(ParamStore<T> &store, const std::string &prefix, int dim);
template <typename T>
void AddFeedForward(ParamStore<T> &store, const std::string &prefix, int dim, int hidden,
                    bool pre_norm, std::mt19937_64 &rng);
template <typename T>
void AddAttention(ParamStore<T> &store, const std::string &prefix, int dim, std::mt19937_64 &rng);
template <typename T>
void AddConformerBlock(ParamStore<T> &store, const std::string &prefix, int dim, int ffn_dim,
                       int conv_kernel, std::mt19937_64 &rng);
template <typename T>
void AddTransformerBlock(ParamStore<T> &store, const std::string &prefix, int dim, int ffn_dim,
                         std::mt19937_64 &rng);
template <typename T>
void AddBlstmBlock(ParamStore<T> &store, const std::string &prefix, int dim, int hidden,
                   std::mt19937_64 &rng);

template <typename T>
ag::Var<T> LinearLayer(const ParamStore<T> &store, const std::string &prefix, const ag::Var<T> &x);
template <typename T>
ag::Var<T> LayerNormLayer(const ParamStore<T> &store, const std::string &prefix, const ag::Var<T> &x);

/// Two-layer position-wise network. With `pre_norm` a layer norm is applied
/// to the input first (Conformer macaron style).
template <typename T>
ag::Var<T> FeedForward(const ParamStore<T> &store, const std::string &prefix, const ag::Var<T> &x,
                       Activation act, bool pre_norm, const RunContext<T> &ctx);

/// Scaled dot-product attention with `heads` heads. Queries come from
/// `query`, keys and values from `memory` (pass the same Var for self
/// attention). Output width equals the query width.
template <typename T>
ag::Var<T> MultiHeadAttention(const ParamStore<T> &store, const std::string &prefix,
                              const ag::Var<T> &query, const ag::Var<T> &memory, int heads,
                              const RunContext<T> &ctx);

/// Intermediate streams of one Conformer block:
///   a1 = x + FFN1(x)/2, a2 = a1 + MHSA(a1), a3 = a2 + Conv(a2),
///   a4 = LN(a3 + FFN2(a3)/2).
template <typename T>
struct ConformerStages {
  ag::Var<T> a1, a2, a3, a4;
};

template <typename T>
ConformerStages<T> ConformerBlock(const ParamStore<T> &store, const std::string &prefix,
                                  const ag::Var<T> &x, int heads, const RunContext<T> &ctx);

/// Post-LN encoder layer: LN(x + MHSA(x)) then LN(y + FFN(y)).
template <typename T>
ag::Var<T> TransformerBlock(const ParamStore<T> &store, const std::string &prefix,
                            const ag::Var<T> &x, int heads, const RunContext<T> &ctx);

/// Forward and backward LSTMs, concatenated and projected back to the input width.
template <typename T>
ag::Var<T> BlstmBlock(const ParamStore<T> &store, const std::string &prefix, const ag::Var<T> &x,
                      const RunContext<T> &ctx);

/// Absolute sinusoidal position encoding, [rows x dim]. Row p depends only on p.
template <typename T>
ag::Mat<T> SinusoidalEncoding(Eigen::Index rows, Eigen::Index dim);

}  // namespace cmkt::model

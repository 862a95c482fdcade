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

// Masking enhancement network: CNN encoder -> SE-blocks -> residual module
// (which also emits the speech embedding used for knowledge transfer) ->
// sigmoid mask regression.

#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "cmkt/model/config.hpp"
#include "cmkt/model/layers.hpp"
#include "cmkt/signal/stft.hpp"

namespace cmkt::model {

/// Registers every SE-network parameter. Deterministic for a given seed.
template <typename T>
ParamStore<T> InitParams(const ModelConfig &cfg, std::uint64_t seed);

/// Graph handles for one utterance.
template <typename T>
struct AcousticState {
  ag::Var<T> h;       // CNN encoder output
  ag::Var<T> a_in;    // h + position encoding
  ag::Var<T> a4;      // last SE-block output
  ag::Var<T> e_a;     // speech embedding [frames x d_t]
  ag::Var<T> a_r;     // residual module output
  ag::Var<T> logits;  // mask pre-activation
  ag::Var<T> mask;    // [frames x bins], strictly inside (0, 1)
};

/// Two same-padded 2-D convolutions with ReLU, flatten, linear to d_a.
/// Returns h; the caller adds the position encoding.
template <typename T>
ag::Var<T> CnnEncode(const ParamStore<T> &store, const ModelConfig &cfg, const ag::Var<T> &log_amp);

template <typename T>
ag::Var<T> AddPositionEncoding(const ag::Var<T> &h);

template <typename T>
ag::Var<T> SeBlocksForward(const ParamStore<T> &store, const ModelConfig &cfg, const ag::Var<T> &a_in,
                           const RunContext<T> &ctx);

/// e_a = FC1(a4); a_r = a4 + LN(FC2(LN(e_a))).
template <typename T>
std::pair<ag::Var<T>, ag::Var<T>> ResidualModule(const ParamStore<T> &store, const ag::Var<T> &a4);

/// Returns {logits, sigmoid(logits)}.
template <typename T>
std::pair<ag::Var<T>, ag::Var<T>> RegressionMask(const ParamStore<T> &store, const ag::Var<T> &a_r);

template <typename T>
AcousticState<T> ForwardAcoustic(const ParamStore<T> &store, const ModelConfig &cfg,
                                 const ag::Mat<T> &log_amp, const RunContext<T> &ctx);

struct EnhanceResult {
  signal::Spectrogram enhanced;
  signal::RealMatrix speech_embedding;
  signal::RealMatrix mask;
  /// SE self-attention maps, one per (block, head), each [frames x frames].
  std::vector<signal::RealMatrix> attention;
};

/// Inference path: audio in, enhanced spectrogram out. Takes no text input;
/// the enhanced phase is the noisy phase. Runs in eval mode without dropout.
template <typename T>
EnhanceResult EnhanceForward(const signal::Spectrogram &noisy, const ParamStore<T> &params,
                             const ModelConfig &cfg);

}  // namespace cmkt::model

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

// Training-only text branch: token queries attend over the speech embedding
// through a stack of cross-attention encoder layers, and the result is pulled
// towards language-model embeddings with a cosine loss. None of this is
// reachable from the inference path.

#pragma once

#include <nlohmann/json.hpp>

#include <atomic>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cmkt/model/layers.hpp"
#include "cmkt/transfer/archive.hpp"

namespace cmkt::transfer {

/// Number of calls made into this module's operations on any thread.
/// Used to prove that inference never touches the text branch.
std::uint64_t CallCount();

struct TokenSequence {
  std::vector<std::uint32_t> ids;  // real tokens only
  std::uint32_t bos_id = 0;
  std::uint32_t eos_id = 1;
};

/// Tokens beyond this many are dropped (targets are cut identically).
inline constexpr std::size_t kMaxTokens = 512;

struct CmtConfig {
  int layers = 3;
  int d_model = 768;
  int heads = 12;
  int ffn_dim = 2048;
  double dropout = 0.1;
  bool train_embedding = false;

  void Validate() const;
};

void to_json(nlohmann::json &j, const CmtConfig &cfg);
void from_json(const nlohmann::json &j, CmtConfig &cfg);

enum class AlignMode { kAligned, kLeftShift, kRightShift };

AlignMode ParseAlignMode(const std::string &name);
std::string AlignModeName(AlignMode mode);

/// Registers the cross-modality transformer parameters under "cmt.". When
/// cfg.train_embedding is set, `table` is also registered as
/// "cmt.embedding" so it is optimized jointly.
template <typename T>
void InitCmtParams(model::ParamStore<T> &store, const CmtConfig &cfg, std::uint64_t seed,
                   const ag::Mat<float> *table = nullptr);

/// [BOS; ids; EOS] looked up in `table`, plus sinusoidal position encoding.
/// Result has N + 2 rows.
template <typename T>
ag::Var<T> BuildTextQueries(const TokenSequence &tokens, const ag::Var<T> &table);

struct CmtAttention {
  /// weights[layer][head] is [(N+2) x frames]; rows are text positions.
  std::vector<std::vector<ag::Mat<double>>> weights;
};

/// Each layer: y = LN(x + MHCA(x, speech)); x' = LN(y + FFN(y)). The speech
/// embedding supplies keys and values for every layer.
template <typename T>
ag::Var<T> CmtForward(const ag::Var<T> &text_queries, const ag::Var<T> &speech_embedding,
                      const model::ParamStore<T> &store, const CmtConfig &cfg,
                      const model::RunContext<T> &ctx, CmtAttention *attention = nullptr);

/// Selects the N loss pairs from Z (N+2 rows, BOS at 0, EOS at N+1) against
/// the N target rows:
///   aligned:     Z[1..N]   <-> targets[0..N-1]
///   right shift: Z[0..N-1] <-> targets   (position t predicts the next token)
///   left shift:  Z[2..N+1] <-> targets   (position t predicts the previous token)
/// Every mode yields exactly N pairs. Throws EmptyText when N == 0.
template <typename T>
std::pair<ag::Var<T>, ag::Mat<T>> ShiftPairs(const ag::Var<T> &z, const ag::Mat<T> &targets,
                                             AlignMode mode);

/// sum over pairs of (1 - cos). Zero-norm rows raise DegenerateEmbedding.
template <typename T>
ag::Var<T> CmaLoss(const ag::Var<T> &z_selected, const ag::Mat<T> &targets);

/// Applies the kMaxTokens cap to a record, warning when it truncates.
UtteranceRecord CapTokens(const UtteranceRecord &record, std::size_t cap = kMaxTokens);

}  // namespace cmkt::transfer

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

#include "cmkt/transfer/cmt.hpp"

#include <spdlog/spdlog.h>

#include "cmkt/error.hpp"

namespace cmkt::transfer {
namespace {

std::atomic<std::uint64_t> g_calls{0};

void Touch() { g_calls.fetch_add(1, std::memory_order_relaxed); }

std::string LayerPrefix(int i) { return "cmt.layers." + std::to_string(i); }

}  // namespace

std::uint64_t CallCount() { return g_calls.load(std::memory_order_relaxed); }

void CmtConfig::Validate() const {
  if (layers < 1) Fail(ErrorKind::kConfig, "cmt layers must be >= 1");
  if (d_model < 1 || ffn_dim < 1) Fail(ErrorKind::kConfig, "cmt dimensions must be positive");
  if (heads < 1 || d_model % heads != 0) {
    Fail(ErrorKind::kConfig, "cmt d_model must be divisible by heads");
  }
  if (dropout < 0.0 || dropout >= 1.0) Fail(ErrorKind::kConfig, "cmt dropout must be in [0, 1)");
}

void to_json(nlohmann::json &j, const CmtConfig &cfg) {
  j = nlohmann::json{{"layers", cfg.layers},   {"d_model", cfg.d_model},
                     {"heads", cfg.heads},     {"ffn_dim", cfg.ffn_dim},
                     {"dropout", cfg.dropout}, {"train_embedding", cfg.train_embedding}};
}

void from_json(const nlohmann::json &j, CmtConfig &cfg) {
  CmtConfig out;
  out.layers = j.value("layers", out.layers);
  out.d_model = j.value("d_model", out.d_model);
  out.heads = j.value("heads", out.heads);
  out.ffn_dim = j.value("ffn_dim", out.ffn_dim);
  out.dropout = j.value("dropout", out.dropout);
  out.train_embedding = j.value("train_embedding", out.train_embedding);
  cfg = out;
}

AlignMode ParseAlignMode(const std::string &name) {
  if (name == "aligned") return AlignMode::kAligned;
  if (name == "left") return AlignMode::kLeftShift;
  if (name == "right") return AlignMode::kRightShift;
  Fail(ErrorKind::kConfig, "unknown alignment mode '" + name + "' (aligned|left|right)");
}

std::string AlignModeName(AlignMode mode) {
  switch (mode) {
    case AlignMode::kAligned: return "aligned";
    case AlignMode::kLeftShift: return "left";
    case AlignMode::kRightShift: return "right";
  }
  return "aligned";
}

template <typename T>
void InitCmtParams(model::ParamStore<T> &store, const CmtConfig &cfg, std::uint64_t seed,
                   const ag::Mat<float> *table) {
  cfg.Validate();
  std::mt19937_64 rng(seed);
  for (int i = 0; i < cfg.layers; ++i) {
    const std::string p = LayerPrefix(i);
    model::AddAttention(store, p + ".mhca", cfg.d_model, rng);
    model::AddLayerNorm(store, p + ".ln1", cfg.d_model);
    model::AddFeedForward(store, p + ".ffn", cfg.d_model, cfg.ffn_dim, false, rng);
    model::AddLayerNorm(store, p + ".ln2", cfg.d_model);
  }
  if (cfg.train_embedding) {
    if (table == nullptr) Fail(ErrorKind::kConfig, "trainable embedding requested without a table");
    if (table->cols() != cfg.d_model) Fail(ErrorKind::kShape, "embedding table width differs from cmt d_model");
    store.Add("cmt.embedding", {std::uint32_t(table->rows()), std::uint32_t(table->cols())},
              table->cast<T>());
  }
}

template <typename T>
ag::Var<T> BuildTextQueries(const TokenSequence &tokens, const ag::Var<T> &table) {
  Touch();
  std::vector<std::uint32_t> framed;
  framed.reserve(tokens.ids.size() + 2);
  framed.push_back(tokens.bos_id);
  framed.insert(framed.end(), tokens.ids.begin(), tokens.ids.end());
  framed.push_back(tokens.eos_id);
  for (auto id : framed) {
    if (id >= table.rows()) {
      Fail(ErrorKind::kVocab, "token id " + std::to_string(id) + " outside vocabulary of " +
                                  std::to_string(table.rows()));
    }
  }
  const auto embedded = ag::GatherRows(table, framed);
  return ag::Add(embedded, ag::Constant(model::SinusoidalEncoding<T>(embedded.rows(), embedded.cols())));
}

template <typename T>
ag::Var<T> CmtForward(const ag::Var<T> &text_queries, const ag::Var<T> &speech_embedding,
                      const model::ParamStore<T> &store, const CmtConfig &cfg,
                      const model::RunContext<T> &ctx, CmtAttention *attention) {
  Touch();
  if (speech_embedding.rows() == 0) Fail(ErrorKind::kInput, "empty speech embedding");
  if (text_queries.cols() != cfg.d_model || speech_embedding.cols() != cfg.d_model) {
    Fail(ErrorKind::kShape, "text queries and speech embedding must both be d_model wide");
  }
  model::RunContext<T> layer_ctx = ctx;
  layer_ctx.dropout = cfg.dropout;
  std::vector<ag::Mat<T>> maps;
  layer_ctx.attention = attention ? &maps : nullptr;
  if (attention) attention->weights.clear();

  ag::Var<T> x = text_queries;
  for (int i = 0; i < cfg.layers; ++i) {
    const std::string p = LayerPrefix(i);
    maps.clear();
    auto cross = model::MultiHeadAttention(store, p + ".mhca", x, speech_embedding, cfg.heads, layer_ctx);
    cross = ag::Dropout(cross, layer_ctx.DropRate(), layer_ctx.rng);
    auto y = model::LayerNormLayer(store, p + ".ln1", ag::Add(x, cross));
    auto f = model::FeedForward(store, p + ".ffn", y, model::Activation::kRelu, false, layer_ctx);
    x = model::LayerNormLayer(store, p + ".ln2", ag::Add(y, f));
    if (attention) {
      std::vector<ag::Mat<double>> layer;
      for (const auto &m : maps) layer.push_back(m.template cast<double>());
      attention->weights.push_back(std::move(layer));
    }
  }
  return x;
}

template <typename T>
std::pair<ag::Var<T>, ag::Mat<T>> ShiftPairs(const ag::Var<T> &z, const ag::Mat<T> &targets,
                                             AlignMode mode) {
  Touch();
  const Eigen::Index n = targets.rows();
  if (n == 0) Fail(ErrorKind::kEmptyText, "no tokens to align");
  if (z.rows() != n + 2) {
    Fail(ErrorKind::kShape, "expected " + std::to_string(n + 2) + " cross-modal rows, got " +
                                std::to_string(z.rows()));
  }
  if (z.cols() != targets.cols()) Fail(ErrorKind::kShape, "cross-modal and target widths differ");
  Eigen::Index start = 1;
  switch (mode) {
    case AlignMode::kAligned: start = 1; break;
    case AlignMode::kRightShift: start = 0; break;
    case AlignMode::kLeftShift: start = 2; break;
  }
  return {ag::RowSlice(z, start, n), targets};
}

template <typename T>
ag::Var<T> CmaLoss(const ag::Var<T> &z_selected, const ag::Mat<T> &targets) {
  Touch();
  return ag::CosineDistanceSum(z_selected, ag::Constant(targets));
}

UtteranceRecord CapTokens(const UtteranceRecord &record, std::size_t cap) {
  if (record.ids.size() <= cap) return record;
  spdlog::warn("utterance '{}' has {} tokens; truncating to {}", record.id, record.ids.size(), cap);
  UtteranceRecord out = record;
  out.ids.resize(cap);
  if (out.has_target) out.z_hat = record.z_hat.topRows(static_cast<Eigen::Index>(cap));
  return out;
}

#define CMKT_INSTANTIATE_CMT(T)                                                                      \
  template void InitCmtParams<T>(model::ParamStore<T> &, const CmtConfig &, std::uint64_t,           \
                                 const ag::Mat<float> *);                                            \
  template ag::Var<T> BuildTextQueries<T>(const TokenSequence &, const ag::Var<T> &);                \
  template ag::Var<T> CmtForward<T>(const ag::Var<T> &, const ag::Var<T> &,                          \
                                    const model::ParamStore<T> &, const CmtConfig &,                 \
                                    const model::RunContext<T> &, CmtAttention *);                   \
  template std::pair<ag::Var<T>, ag::Mat<T>> ShiftPairs<T>(const ag::Var<T> &, const ag::Mat<T> &, \
                                                           AlignMode);                               \
  template ag::Var<T> CmaLoss<T>(const ag::Var<T> &, const ag::Mat<T> &);

CMKT_INSTANTIATE_CMT(float)
CMKT_INSTANTIATE_CMT(double)

}  // namespace cmkt::transfer

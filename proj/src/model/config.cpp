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

#include "cmkt/model/config.hpp"

#include "cmkt/error.hpp"

namespace cmkt::model {

BlockKind ParseBlockKind(const std::string &name) {
  if (name == "conformer") return BlockKind::kConformer;
  if (name == "transformer") return BlockKind::kTransformer;
  if (name == "blstm") return BlockKind::kBlstm;
  Fail(ErrorKind::kConfig, "unknown SE-block kind '" + name + "'");
}

std::string BlockKindName(BlockKind kind) {
  switch (kind) {
    case BlockKind::kConformer: return "conformer";
    case BlockKind::kTransformer: return "transformer";
    case BlockKind::kBlstm: return "blstm";
  }
  return "conformer";
}

signal::MaskDomain ParseMaskDomain(const std::string &name) {
  if (name == "magnitude") return signal::MaskDomain::kMagnitude;
  if (name == "log") return signal::MaskDomain::kLog;
  Fail(ErrorKind::kConfig, "unknown mask domain '" + name + "'");
}

std::string MaskDomainName(signal::MaskDomain domain) {
  return domain == signal::MaskDomain::kLog ? "log" : "magnitude";
}

ModelConfig ModelConfig::ForKind(BlockKind kind) {
  ModelConfig cfg;
  cfg.block = kind;
  cfg.n_blocks = kind == BlockKind::kBlstm ? 5 : 4;
  return cfg;
}

void ModelConfig::Validate() const {
  if (n_blocks < 1) Fail(ErrorKind::kConfig, "n_blocks must be >= 1");
  if (d_a < 1 || bins < 1 || d_t < 1 || ffn_dim < 1) {
    Fail(ErrorKind::kConfig, "model dimensions must be positive");
  }
  if (heads < 1 || d_a % heads != 0) {
    Fail(ErrorKind::kConfig, "d_a must be divisible by the number of attention heads");
  }
  if (conv_kernel % 2 == 0) Fail(ErrorKind::kConfig, "conv_kernel must be odd");
  if (cnn_kernel % 2 == 0) Fail(ErrorKind::kConfig, "cnn_kernel must be odd");
  if (cnn_stride != 1) Fail(ErrorKind::kConfig, "only cnn_stride = 1 is supported");
  if (cnn_channels.empty()) Fail(ErrorKind::kConfig, "cnn_channels must not be empty");
  for (int c : cnn_channels) {
    if (c < 1) Fail(ErrorKind::kConfig, "cnn channel counts must be positive");
  }
  if (dropout < 0.0 || dropout >= 1.0) Fail(ErrorKind::kConfig, "dropout must be in [0, 1)");
  if (lstm_hidden < 1) Fail(ErrorKind::kConfig, "lstm_hidden must be positive");
}

void to_json(nlohmann::json &j, const ModelConfig &cfg) {
  j = nlohmann::json{
      {"se_block_kind", BlockKindName(cfg.block)},
      {"n_blocks", cfg.n_blocks},
      {"d_a", cfg.d_a},
      {"bins", cfg.bins},
      {"attn_heads", cfg.heads},
      {"ffn_dim", cfg.ffn_dim},
      {"conv_kernel", cfg.conv_kernel},
      {"cnn_channels", cfg.cnn_channels},
      {"cnn_kernel", cfg.cnn_kernel},
      {"cnn_stride", cfg.cnn_stride},
      {"d_t", cfg.d_t},
      {"dropout", cfg.dropout},
      {"lstm_hidden", cfg.lstm_hidden},
      {"mask_domain", MaskDomainName(cfg.mask_domain)},
  };
}

void from_json(const nlohmann::json &j, ModelConfig &cfg) {
  ModelConfig out;
  if (j.contains("se_block_kind")) out = ModelConfig::ForKind(ParseBlockKind(j.at("se_block_kind")));
  out.n_blocks = j.value("n_blocks", out.n_blocks);
  out.d_a = j.value("d_a", out.d_a);
  out.bins = j.value("bins", out.bins);
  out.heads = j.value("attn_heads", out.heads);
  out.ffn_dim = j.value("ffn_dim", out.ffn_dim);
  out.conv_kernel = j.value("conv_kernel", out.conv_kernel);
  out.cnn_channels = j.value("cnn_channels", out.cnn_channels);
  out.cnn_kernel = j.value("cnn_kernel", out.cnn_kernel);
  out.cnn_stride = j.value("cnn_stride", out.cnn_stride);
  out.d_t = j.value("d_t", out.d_t);
  out.dropout = j.value("dropout", out.dropout);
  out.lstm_hidden = j.value("lstm_hidden", out.lstm_hidden);
  if (j.contains("mask_domain")) out.mask_domain = ParseMaskDomain(j.at("mask_domain"));
  cfg = out;
}

}  // namespace cmkt::model

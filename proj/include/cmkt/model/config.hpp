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

#pragma once

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

#include "cmkt/signal/stft.hpp"

namespace cmkt::model {

enum class BlockKind { kConformer, kTransformer, kBlstm };

BlockKind ParseBlockKind(const std::string &name);
std::string BlockKindName(BlockKind kind);

signal::MaskDomain ParseMaskDomain(const std::string &name);
std::string MaskDomainName(signal::MaskDomain domain);

/// Shape of the enhancement network. Defaults are the full-size configuration;
/// `d_a` is the SE-block stream width, which must equal the attention width.
struct ModelConfig {
  BlockKind block = BlockKind::kConformer;
  int n_blocks = 4;
  int d_a = 256;
  int bins = 201;
  int heads = 4;
  int ffn_dim = 2048;
  int conv_kernel = 15;
  std::vector<int> cnn_channels{16, 16};
  int cnn_kernel = 3;
  int cnn_stride = 1;
  int d_t = 768;
  double dropout = 0.1;
  int lstm_hidden = 256;
  signal::MaskDomain mask_domain = signal::MaskDomain::kMagnitude;

  /// Default block counts: 4 for Conformer/Transformer, 5 for BLSTM.
  static ModelConfig ForKind(BlockKind kind);
  void Validate() const;
};

void to_json(nlohmann::json &j, const ModelConfig &cfg);
void from_json(const nlohmann::json &j, ModelConfig &cfg);

}  // namespace cmkt::model

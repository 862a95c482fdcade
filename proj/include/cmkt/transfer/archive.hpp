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

// Embedding archive ("CMKE" v1), the whole text-side interface. Layout,
// little-endian throughout:
//
//   magic "CMKE" | version u32 = 1 | d_t u32 | vocab_size u32 (0: no table)
//   bos_id u32 | eos_id u32 | target_layer i32 (-1: final) | flags u32
//   [table f32 vocab_size x d_t, present iff flags bit 0]
//   utt_count u32, then per utterance:
//     id (u32 byte length + UTF-8) | N u32 | ids u32 x N | has_target u8
//     [z_hat f32 N x d_t, present iff has_target]
//
// flags bit 1 marks targets that were projected down to d_t by the producer;
// it carries no extra payload and is preserved on round trip.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cmkt/ag/tensor.hpp"

namespace cmkt::transfer {

inline constexpr std::uint32_t kArchiveFlagTable = 1u << 0;
inline constexpr std::uint32_t kArchiveFlagProjected = 1u << 1;

struct UtteranceRecord {
  std::string id;
  std::vector<std::uint32_t> ids;  // real tokens only, no BOS/EOS
  bool has_target = false;
  ag::Mat<float> z_hat;            // [N x d_t] when has_target
};

struct EmbeddingArchive {
  std::uint32_t d_t = 768;
  std::uint32_t bos_id = 0;
  std::uint32_t eos_id = 1;
  std::int32_t target_layer = -1;
  std::uint32_t flags = 0;
  std::optional<ag::Mat<float>> table;  // [vocab x d_t]
  std::vector<UtteranceRecord> utterances;

  std::uint32_t vocab_size() const { return table ? static_cast<std::uint32_t>(table->rows()) : 0; }
  const UtteranceRecord *Find(const std::string &id) const;
  void Reindex();

 private:
  std::map<std::string, std::size_t> index_;
};

EmbeddingArchive ReadArchive(const std::filesystem::path &path);
void WriteArchive(const std::filesystem::path &path, const EmbeddingArchive &archive);

/// Serialized bytes, for comparing archives without touching the filesystem.
std::string EncodeArchive(const EmbeddingArchive &archive);
EmbeddingArchive DecodeArchive(std::string bytes, const std::string &source = "<memory>");

}  // namespace cmkt::transfer

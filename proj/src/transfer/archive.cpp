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

#include "cmkt/transfer/archive.hpp"

#include "cmkt/binary_io.hpp"
#include "cmkt/error.hpp"

namespace cmkt::transfer {
namespace {
constexpr char kMagic[4] = {'C', 'M', 'K', 'E'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

const UtteranceRecord *EmbeddingArchive::Find(const std::string &id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &utterances[it->second];
}

void EmbeddingArchive::Reindex() {
  index_.clear();
  for (std::size_t i = 0; i < utterances.size(); ++i) {
    if (!index_.emplace(utterances[i].id, i).second) {
      Fail(ErrorKind::kFormat, "duplicate utterance id '" + utterances[i].id + "' in archive");
    }
  }
}

std::string EncodeArchive(const EmbeddingArchive &archive) {
  io::ByteWriter w;
  w.Raw(kMagic, 4);
  w.U32(kVersion);
  w.U32(archive.d_t);
  w.U32(archive.vocab_size());
  w.U32(archive.bos_id);
  w.U32(archive.eos_id);
  w.I32(archive.target_layer);
  std::uint32_t flags = archive.flags & ~kArchiveFlagTable;
  if (archive.table) flags |= kArchiveFlagTable;
  w.U32(flags);
  if (archive.table) {
    if (archive.table->cols() != archive.d_t) Fail(ErrorKind::kShape, "table width differs from d_t");
    w.F32Array(archive.table->data(), static_cast<std::size_t>(archive.table->size()));
  }
  w.U32(static_cast<std::uint32_t>(archive.utterances.size()));
  for (const auto &u : archive.utterances) {
    w.String(u.id);
    w.U32(static_cast<std::uint32_t>(u.ids.size()));
    for (auto id : u.ids) w.U32(id);
    w.U8(u.has_target ? 1 : 0);
    if (u.has_target) {
      if (u.z_hat.rows() != static_cast<Eigen::Index>(u.ids.size()) || u.z_hat.cols() != archive.d_t) {
        Fail(ErrorKind::kShape, "utterance '" + u.id + "': target rows must equal token count");
      }
      w.F32Array(u.z_hat.data(), static_cast<std::size_t>(u.z_hat.size()));
    }
  }
  return w.bytes();
}

void WriteArchive(const std::filesystem::path &path, const EmbeddingArchive &archive) {
  io::ByteWriter w;
  const std::string bytes = EncodeArchive(archive);
  w.Raw(bytes.data(), bytes.size());
  w.WriteFile(path);
}

EmbeddingArchive DecodeArchive(std::string bytes, const std::string &source) {
  io::ByteReader r(std::move(bytes), source);
  if (r.Bytes(4) != std::string(kMagic, 4)) Fail(ErrorKind::kFormat, source + ": bad magic, not a CMKE archive");
  const auto version = r.U32();
  if (version != kVersion) Fail(ErrorKind::kFormat, source + ": unsupported archive version " + std::to_string(version));

  EmbeddingArchive a;
  a.d_t = r.U32();
  const auto vocab = r.U32();
  a.bos_id = r.U32();
  a.eos_id = r.U32();
  a.target_layer = r.I32();
  a.flags = r.U32();
  if (a.d_t == 0) Fail(ErrorKind::kFormat, source + ": d_t is zero");
  if (a.flags & kArchiveFlagTable) {
    if (vocab == 0) Fail(ErrorKind::kFormat, source + ": table flag set but vocab_size is 0");
    ag::Mat<float> table(vocab, a.d_t);
    r.F32Array(table.data(), static_cast<std::size_t>(table.size()));
    a.table = std::move(table);
  }
  const auto count = r.U32();
  a.utterances.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    UtteranceRecord u;
    u.id = r.String();
    const auto n = r.U32();
    if (static_cast<std::size_t>(n) * 4 > r.remaining()) Fail(ErrorKind::kFormat, source + ": truncated token ids");
    u.ids.resize(n);
    for (auto &id : u.ids) id = r.U32();
    u.has_target = r.U8() != 0;
    if (u.has_target) {
      u.z_hat.resize(n, a.d_t);
      r.F32Array(u.z_hat.data(), static_cast<std::size_t>(u.z_hat.size()));
    }
    a.utterances.push_back(std::move(u));
  }
  if (!r.AtEnd()) Fail(ErrorKind::kFormat, source + ": trailing bytes after last utterance");
  a.Reindex();
  return a;
}

EmbeddingArchive ReadArchive(const std::filesystem::path &path) {
  return DecodeArchive(io::ReadFileBytes(path), path.string());
}

}  // namespace cmkt::transfer

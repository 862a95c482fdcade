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

#include "cmkt/binary_io.hpp"
#include "cmkt/model/param_store.hpp"

namespace cmkt::model {
namespace {
constexpr char kMagic[4] = {'C', 'M', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

void SaveCheckpoint(const std::filesystem::path &path, const ParamStore<float> &store) {
  io::ByteWriter w;
  w.Raw(kMagic, 4);
  w.U32(kVersion);
  w.U32(static_cast<std::uint32_t>(store.size()));
  for (const auto &e : store.entries()) {
    w.String(e.name);
    w.U32(static_cast<std::uint32_t>(e.shape.size()));
    for (auto d : e.shape) w.U32(d);
    w.F32Array(e.var.value().data(), static_cast<std::size_t>(e.var.value().size()));
  }
  w.WriteFile(path);
}

ParamStore<float> LoadCheckpoint(const std::filesystem::path &path) {
  auto r = io::ByteReader::FromFile(path);
  if (r.Bytes(4) != std::string(kMagic, 4)) {
    Fail(ErrorKind::kCheckpoint, path.string() + ": bad magic, not a CMKP checkpoint");
  }
  const auto version = r.U32();
  if (version != kVersion) {
    Fail(ErrorKind::kCheckpoint, path.string() + ": unsupported version " + std::to_string(version));
  }
  ParamStore<float> store;
  const auto count = r.U32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.String();
    const auto rank = r.U32();
    if (rank > 8) Fail(ErrorKind::kCheckpoint, path.string() + ": implausible rank for " + name);
    Shape shape(rank);
    for (auto &d : shape) d = r.U32();
    const auto [rows, cols] = StorageDims(shape);
    ag::Mat<float> value(rows, cols);
    r.F32Array(value.data(), static_cast<std::size_t>(value.size()));
    store.Add(name, std::move(shape), std::move(value));
  }
  if (!r.AtEnd()) Fail(ErrorKind::kCheckpoint, path.string() + ": trailing bytes");
  return store;
}

}  // namespace cmkt::model

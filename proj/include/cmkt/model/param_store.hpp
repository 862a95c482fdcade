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

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cmkt/ag/tensor.hpp"
#include "cmkt/error.hpp"

namespace cmkt::model {

using Shape = std::vector<std::uint32_t>;

/// Storage layout for a logical shape: rank 1 is a row vector, higher ranks
/// keep the leading dimension as rows and flatten the rest row-major.
inline std::pair<Eigen::Index, Eigen::Index> StorageDims(const Shape &shape) {
  if (shape.empty()) return {1, 1};
  if (shape.size() == 1) return {1, shape[0]};
  Eigen::Index cols = 1;
  for (std::size_t i = 1; i < shape.size(); ++i) cols *= shape[i];
  return {shape[0], cols};
}

/// Named trainable tensors in insertion order. Names are unique and shapes
/// are fixed once added; the unit of checkpointing and averaging.
template <typename T>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Shape shape;
    ag::Var<T> var;
  };

  ag::Var<T> &Add(const std::string &name, Shape shape, ag::Mat<T> value) {
    if (index_.count(name)) Fail(ErrorKind::kConfig, "duplicate parameter '" + name + "'");
    const auto [rows, cols] = StorageDims(shape);
    if (value.rows() != rows || value.cols() != cols) {
      Fail(ErrorKind::kShape, "parameter '" + name + "' value does not match its shape");
    }
    index_[name] = entries_.size();
    entries_.push_back(Entry{name, std::move(shape), ag::Var<T>(std::move(value), true)});
    return entries_.back().var;
  }

  bool Contains(const std::string &name) const { return index_.count(name) != 0; }

  const ag::Var<T> &Get(const std::string &name) const {
    auto it = index_.find(name);
    if (it == index_.end()) Fail(ErrorKind::kConfig, "no parameter named '" + name + "'");
    return entries_[it->second].var;
  }
  ag::Var<T> &Get(const std::string &name) {
    return const_cast<ag::Var<T> &>(static_cast<const ParamStore &>(*this).Get(name));
  }

  std::vector<Entry> &entries() { return entries_; }
  const std::vector<Entry> &entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  std::size_t NumScalars() const {
    std::size_t n = 0;
    for (const auto &e : entries_) n += static_cast<std::size_t>(e.var.value().size());
    return n;
  }

  void ZeroGrad() {
    for (auto &e : entries_) e.var.ZeroGrad();
  }

  /// Deep copy, optionally converting precision. Gradients are not copied.
  template <typename U>
  ParamStore<U> Cast() const {
    ParamStore<U> out;
    for (const auto &e : entries_) out.Add(e.name, e.shape, e.var.value().template cast<U>());
    out.step = step;
    return out;
  }

  ParamStore Clone() const { return Cast<T>(); }

  std::int64_t step = 0;

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
};

/// Binary checkpoint ("CMKP" v1): little-endian, f32 values, insertion order.
void SaveCheckpoint(const std::filesystem::path &path, const ParamStore<float> &store);
ParamStore<float> LoadCheckpoint(const std::filesystem::path &path);

}  // namespace cmkt::model

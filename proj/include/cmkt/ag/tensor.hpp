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

// Minimal tape-free reverse-mode differentiation over row-major matrices.
// Every value is a 2-D matrix; ops build a DAG of shared nodes and Backward()
// walks it in reverse topological order.

#pragma once

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

namespace cmkt::ag {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
struct Node {
  Mat<T> value;
  Mat<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node &)> backward;

  // Lazily sized gradient buffer.
  Mat<T> &Grad() {
    if (grad.rows() != value.rows() || grad.cols() != value.cols()) {
      grad = Mat<T>::Zero(value.rows(), value.cols());
    }
    return grad;
  }
  Node &parent(std::size_t i) { return *parents[i]; }
};

namespace detail {
inline bool &GradEnabledFlag() {
  thread_local bool enabled = true;
  return enabled;
}
}  // namespace detail

inline bool GradEnabled() { return detail::GradEnabledFlag(); }

/// Disables graph construction on this thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::GradEnabledFlag()) {
    detail::GradEnabledFlag() = false;
  }
  ~NoGradGuard() { detail::GradEnabledFlag() = previous_; }
  NoGradGuard(const NoGradGuard &) = delete;
  NoGradGuard &operator=(const NoGradGuard &) = delete;

 private:
  bool previous_;
};

template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(Mat<T> value, bool requires_grad = false)
      : node_(std::make_shared<Node<T>>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }
  explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  bool defined() const { return node_ != nullptr; }
  const Mat<T> &value() const { return node_->value; }
  Mat<T> &mutable_value() { return node_->value; }
  const Mat<T> &grad() const { return node_->grad; }
  bool has_grad() const { return node_->grad.size() == node_->value.size() && node_->grad.size() > 0; }
  bool requires_grad() const { return node_->requires_grad; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  T item() const { return node_->value(0, 0); }

  void ZeroGrad() { node_->grad.resize(0, 0); }
  Node<T> *node() const { return node_.get(); }
  const std::shared_ptr<Node<T>> &shared() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

/// Builds an op result. When no parent needs a gradient (or grad mode is off)
/// the result is a plain constant and `backward` is dropped.
template <typename T>
Var<T> MakeOp(Mat<T> value, std::initializer_list<Var<T>> parents,
              std::function<void(Node<T> &)> backward) {
  Var<T> out(std::move(value));
  if (!GradEnabled()) return out;
  bool any = false;
  for (const auto &p : parents) any = any || (p.defined() && p.requires_grad());
  if (!any) return out;
  auto *node = out.node();
  node->requires_grad = true;
  for (const auto &p : parents) node->parents.push_back(p.shared());
  node->backward = std::move(backward);
  return out;
}

template <typename T>
Var<T> MakeOp(Mat<T> value, const std::vector<Var<T>> &parents,
              std::function<void(Node<T> &)> backward) {
  Var<T> out(std::move(value));
  if (!GradEnabled()) return out;
  bool any = false;
  for (const auto &p : parents) any = any || (p.defined() && p.requires_grad());
  if (!any) return out;
  auto *node = out.node();
  node->requires_grad = true;
  for (const auto &p : parents) node->parents.push_back(p.shared());
  node->backward = std::move(backward);
  return out;
}

/// True if parent i exists and wants a gradient.
template <typename T>
inline bool Wants(Node<T> &self, std::size_t i) {
  return i < self.parents.size() && self.parents[i] && self.parents[i]->requires_grad;
}

/// Seeds d(root)/d(root) = 1 and accumulates gradients into every reachable
/// node that requires them. Root must be 1x1.
template <typename T>
void Backward(const Var<T> &root) {
  if (!root.requires_grad()) return;
  std::vector<Node<T> *> order;
  std::unordered_set<Node<T> *> seen;
  std::vector<std::pair<Node<T> *, std::size_t>> stack;
  stack.emplace_back(root.node(), 0);
  seen.insert(root.node());
  while (!stack.empty()) {
    auto &[node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T> *p = node->parents[next++].get();
      if (p && p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root.node()->Grad().setOnes();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T> *node = *it;
    if (node->backward && node->grad.size() > 0) node->backward(*node);
  }
}

}  // namespace cmkt::ag

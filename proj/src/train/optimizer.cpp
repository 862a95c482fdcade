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

#include "cmkt/train/optimizer.hpp"

#include <cmath>

namespace cmkt::train {

template <typename T>
AdamState<T> AdamState<T>::ForStore(const model::ParamStore<T> &store) {
  AdamState<T> s;
  for (const auto &e : store.entries()) {
    s.m.push_back(ag::Mat<T>::Zero(e.var.rows(), e.var.cols()));
    s.v.push_back(ag::Mat<T>::Zero(e.var.rows(), e.var.cols()));
  }
  return s;
}

template <typename T>
double GlobalGradNorm(const model::ParamStore<T> &store) {
  double sq = 0.0;
  for (const auto &e : store.entries()) {
    if (!e.var.has_grad()) continue;
    sq += e.var.grad().template cast<double>().squaredNorm();
  }
  return std::sqrt(sq);
}

template <typename T>
double AdamStep(model::ParamStore<T> &store, AdamState<T> &state, double lr, double grad_clip) {
  if (state.m.size() != store.size()) Fail(ErrorKind::kConfig, "optimizer state does not match parameters");
  const double norm = GlobalGradNorm(store);
  if (!std::isfinite(norm)) Fail(ErrorKind::kNumerics, "non-finite gradient; step aborted");

  const double clip = norm > grad_clip ? grad_clip / norm : 1.0;
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  const T b1 = static_cast<T>(state.beta1), b2 = static_cast<T>(state.beta2);
  const T step_size = static_cast<T>(lr / bc1);
  const T inv_sqrt_bc2 = static_cast<T>(1.0 / std::sqrt(bc2));
  const T eps = static_cast<T>(state.eps);
  const T scale = static_cast<T>(clip);

  auto &entries = store.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto &var = entries[i].var;
    if (!var.has_grad()) continue;
    const ag::Mat<T> g = clip < 1.0 ? (var.grad() * scale).eval() : var.grad();
    state.m[i] = b1 * state.m[i] + (T(1) - b1) * g;
    state.v[i] = b2 * state.v[i] + (T(1) - b2) * g.cwiseProduct(g);
    var.mutable_value().array() -=
        step_size * state.m[i].array() / ((state.v[i].array().sqrt() * inv_sqrt_bc2) + eps);
  }
  ++store.step;
  return norm;
}

template struct AdamState<float>;
template struct AdamState<double>;
template double GlobalGradNorm<float>(const model::ParamStore<float> &);
template double GlobalGradNorm<double>(const model::ParamStore<double> &);
template double AdamStep<float>(model::ParamStore<float> &, AdamState<float> &, double, double);
template double AdamStep<double>(model::ParamStore<double> &, AdamState<double> &, double, double);

}  // namespace cmkt::train

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

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "cmkt/ag/tensor.hpp"
#include "cmkt/error.hpp"

namespace cmkt::ag {

namespace detail {

template <typename T>
void CheckSameShape(const Var<T> &a, const Var<T> &b, const char *op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    Fail(ErrorKind::kShape,
         std::string(op) + ": shape " + std::to_string(a.rows()) + "x" +
             std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
             "x" + std::to_string(b.cols()));
  }
}

template <typename T>
T SigmoidScalar(T x) {
  // Clamped so the result is strictly inside (0, 1) in the working precision.
  const T s = x >= T(0) ? T(1) / (T(1) + std::exp(-x))
                        : std::exp(x) / (T(1) + std::exp(x));
  return std::clamp(s, std::numeric_limits<T>::min(),
                    T(1) - std::numeric_limits<T>::epsilon() / T(2));
}

}  // namespace detail

template <typename T>
Var<T> Constant(Mat<T> value) {
  return Var<T>(std::move(value), false);
}

// ---------------------------------------------------------------------------
// Linear algebra

template <typename T>
Var<T> MatMul(const Var<T> &a, const Var<T> &b) {
  if (a.cols() != b.rows()) Fail(ErrorKind::kShape, "MatMul inner dimension mismatch");
  return MakeOp<T>(a.value() * b.value(), {a, b}, [](Node<T> &self) {
    const Mat<T> &g = self.grad;
    if (Wants(self, 0)) self.parent(0).Grad().noalias() += g * self.parent(1).value.transpose();
    if (Wants(self, 1)) self.parent(1).Grad().noalias() += self.parent(0).value.transpose() * g;
  });
}

/// a * b^T
template <typename T>
Var<T> MatMulNT(const Var<T> &a, const Var<T> &b) {
  if (a.cols() != b.cols()) Fail(ErrorKind::kShape, "MatMulNT inner dimension mismatch");
  return MakeOp<T>(a.value() * b.value().transpose(), {a, b}, [](Node<T> &self) {
    const Mat<T> &g = self.grad;
    if (Wants(self, 0)) self.parent(0).Grad().noalias() += g * self.parent(1).value;
    if (Wants(self, 1)) self.parent(1).Grad().noalias() += g.transpose() * self.parent(0).value;
  });
}

/// x * w + b, with w stored as [in x out] and b as [1 x out].
template <typename T>
Var<T> Linear(const Var<T> &x, const Var<T> &w, const Var<T> &b) {
  if (x.cols() != w.rows()) {
    Fail(ErrorKind::kShape, "Linear: input width " + std::to_string(x.cols()) +
                                " vs weight rows " + std::to_string(w.rows()));
  }
  Mat<T> y = x.value() * w.value();
  y.rowwise() += b.value().row(0);
  return MakeOp<T>(std::move(y), {x, w, b}, [](Node<T> &self) {
    const Mat<T> &g = self.grad;
    if (Wants(self, 0)) self.parent(0).Grad().noalias() += g * self.parent(1).value.transpose();
    if (Wants(self, 1)) self.parent(1).Grad().noalias() += self.parent(0).value.transpose() * g;
    if (Wants(self, 2)) self.parent(2).Grad() += g.colwise().sum();
  });
}

// ---------------------------------------------------------------------------
// Elementwise

template <typename T>
Var<T> Add(const Var<T> &a, const Var<T> &b) {
  detail::CheckSameShape(a, b, "Add");
  return MakeOp<T>(a.value() + b.value(), {a, b}, [](Node<T> &self) {
    if (Wants(self, 0)) self.parent(0).Grad() += self.grad;
    if (Wants(self, 1)) self.parent(1).Grad() += self.grad;
  });
}

template <typename T>
Var<T> Sub(const Var<T> &a, const Var<T> &b) {
  detail::CheckSameShape(a, b, "Sub");
  return MakeOp<T>(a.value() - b.value(), {a, b}, [](Node<T> &self) {
    if (Wants(self, 0)) self.parent(0).Grad() += self.grad;
    if (Wants(self, 1)) self.parent(1).Grad() -= self.grad;
  });
}

template <typename T>
Var<T> Mul(const Var<T> &a, const Var<T> &b) {
  detail::CheckSameShape(a, b, "Mul");
  return MakeOp<T>(a.value().cwiseProduct(b.value()), {a, b}, [](Node<T> &self) {
    if (Wants(self, 0)) self.parent(0).Grad() += self.grad.cwiseProduct(self.parent(1).value);
    if (Wants(self, 1)) self.parent(1).Grad() += self.grad.cwiseProduct(self.parent(0).value);
  });
}

template <typename T>
Var<T> Scale(const Var<T> &a, T s) {
  return MakeOp<T>(a.value() * s, {a}, [s](Node<T> &self) {
    self.parent(0).Grad() += self.grad * s;
  });
}

/// Adds a [1 x cols] row to every row of a.
template <typename T>
Var<T> AddRow(const Var<T> &a, const Var<T> &row) {
  if (row.rows() != 1 || row.cols() != a.cols()) Fail(ErrorKind::kShape, "AddRow shape mismatch");
  Mat<T> y = a.value();
  y.rowwise() += row.value().row(0);
  return MakeOp<T>(std::move(y), {a, row}, [](Node<T> &self) {
    if (Wants(self, 0)) self.parent(0).Grad() += self.grad;
    if (Wants(self, 1)) self.parent(1).Grad() += self.grad.colwise().sum();
  });
}

template <typename T>
Var<T> Relu(const Var<T> &a) {
  return MakeOp<T>(a.value().cwiseMax(T(0)), {a}, [](Node<T> &self) {
    auto &x = self.parent(0).value;
    self.parent(0).Grad() += (x.array() > T(0)).select(self.grad, T(0)).matrix();
  });
}

template <typename T>
Var<T> Sigmoid(const Var<T> &a) {
  Mat<T> y = a.value().unaryExpr([](T v) { return detail::SigmoidScalar(v); });
  return MakeOp<T>(std::move(y), {a}, [](Node<T> &self) {
    const auto &s = self.value.array();
    self.parent(0).Grad().array() += self.grad.array() * s * (T(1) - s);
  });
}

template <typename T>
Var<T> Tanh(const Var<T> &a) {
  return MakeOp<T>(a.value().array().tanh().matrix(), {a}, [](Node<T> &self) {
    const auto &y = self.value.array();
    self.parent(0).Grad().array() += self.grad.array() * (T(1) - y * y);
  });
}

/// x * sigmoid(x)
template <typename T>
Var<T> Swish(const Var<T> &a) {
  Mat<T> s = a.value().unaryExpr([](T v) { return detail::SigmoidScalar(v); });
  Mat<T> y = a.value().cwiseProduct(s);
  return MakeOp<T>(std::move(y), {a}, [s = std::move(s)](Node<T> &self) {
    const auto &x = self.parent(0).value.array();
    self.parent(0).Grad().array() +=
        self.grad.array() * (s.array() + x * s.array() * (T(1) - s.array()));
  });
}

/// Gated linear unit over columns: first half * sigmoid(second half).
template <typename T>
Var<T> Glu(const Var<T> &a) {
  if (a.cols() % 2 != 0) Fail(ErrorKind::kShape, "Glu needs an even width");
  const Eigen::Index h = a.cols() / 2;
  Mat<T> gate = a.value().rightCols(h).unaryExpr([](T v) { return detail::SigmoidScalar(v); });
  Mat<T> y = a.value().leftCols(h).cwiseProduct(gate);
  return MakeOp<T>(std::move(y), {a}, [h, gate = std::move(gate)](Node<T> &self) {
    auto &x = self.parent(0).value;
    auto &g = self.parent(0).Grad();
    g.leftCols(h) += self.grad.cwiseProduct(gate);
    g.rightCols(h).array() += self.grad.array() * x.leftCols(h).array() *
                              gate.array() * (T(1) - gate.array());
  });
}

/// Inverted dropout. Identity when rate == 0 or rng is null.
template <typename T>
Var<T> Dropout(const Var<T> &a, double rate, std::mt19937_64 *rng) {
  if (rate <= 0.0 || rng == nullptr) return a;
  std::bernoulli_distribution keep(1.0 - rate);
  const T scale = T(1) / static_cast<T>(1.0 - rate);
  Mat<T> mask(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(*rng) ? scale : T(0);
  Mat<T> y = a.value().cwiseProduct(mask);
  return MakeOp<T>(std::move(y), {a}, [mask = std::move(mask)](Node<T> &self) {
    self.parent(0).Grad() += self.grad.cwiseProduct(mask);
  });
}

// ---------------------------------------------------------------------------
// Normalization and attention pieces

/// Row-wise layer normalization with [1 x cols] gain and bias.
template <typename T>
Var<T> LayerNorm(const Var<T> &x, const Var<T> &gain, const Var<T> &bias, T eps = T(1e-5)) {
  const Eigen::Index n = x.cols();
  if (gain.cols() != n || bias.cols() != n) Fail(ErrorKind::kShape, "LayerNorm parameter width");
  Mat<T> xhat(x.rows(), n);
  Eigen::Matrix<T, Eigen::Dynamic, 1> inv_std(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const auto row = x.value().row(r).array();
    const T mean = row.mean();
    const T var = (row - mean).square().mean();
    inv_std(r) = T(1) / std::sqrt(var + eps);
    xhat.row(r) = ((row - mean) * inv_std(r)).matrix();
  }
  Mat<T> y = xhat.array().rowwise() * gain.value().row(0).array();
  y.rowwise() += bias.value().row(0);
  return MakeOp<T>(std::move(y), {x, gain, bias},
                   [xhat = std::move(xhat), inv_std = std::move(inv_std), n](Node<T> &self) {
    const Mat<T> &g = self.grad;
    if (Wants(self, 1)) self.parent(1).Grad() += g.cwiseProduct(xhat).colwise().sum();
    if (Wants(self, 2)) self.parent(2).Grad() += g.colwise().sum();
    if (Wants(self, 0)) {
      auto &dx = self.parent(0).Grad();
      const auto gain_row = self.parent(1).value.row(0).array();
      for (Eigen::Index r = 0; r < g.rows(); ++r) {
        const Eigen::Array<T, 1, Eigen::Dynamic> dxhat = g.row(r).array() * gain_row;
        const T sum = dxhat.sum();
        const T dot = (dxhat * xhat.row(r).array()).sum();
        dx.row(r).array() += (inv_std(r) / T(n)) *
                             (T(n) * dxhat - sum - xhat.row(r).array() * dot);
      }
    }
  });
}

template <typename T>
Var<T> SoftmaxRows(const Var<T> &x) {
  Mat<T> y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const T m = x.value().row(r).maxCoeff();
    y.row(r) = (x.value().row(r).array() - m).exp().matrix();
    y.row(r) /= y.row(r).sum();
  }
  return MakeOp<T>(std::move(y), {x}, [](Node<T> &self) {
    const Mat<T> &y = self.value;
    const auto dot = (self.grad.cwiseProduct(y)).rowwise().sum();
    self.parent(0).Grad().array() +=
        y.array() * (self.grad.colwise() - dot).array();
  });
}

// ---------------------------------------------------------------------------
// Shape manipulation

template <typename T>
Var<T> ColSlice(const Var<T> &x, Eigen::Index start, Eigen::Index len) {
  if (start < 0 || start + len > x.cols()) Fail(ErrorKind::kShape, "ColSlice out of range");
  return MakeOp<T>(x.value().middleCols(start, len), {x}, [start, len](Node<T> &self) {
    self.parent(0).Grad().middleCols(start, len) += self.grad;
  });
}

template <typename T>
Var<T> RowSlice(const Var<T> &x, Eigen::Index start, Eigen::Index len) {
  if (start < 0 || start + len > x.rows()) Fail(ErrorKind::kShape, "RowSlice out of range");
  return MakeOp<T>(x.value().middleRows(start, len), {x}, [start, len](Node<T> &self) {
    self.parent(0).Grad().middleRows(start, len) += self.grad;
  });
}

template <typename T>
Var<T> ConcatCols(const std::vector<Var<T>> &parts) {
  Eigen::Index cols = 0;
  for (const auto &p : parts) {
    if (p.rows() != parts.front().rows()) Fail(ErrorKind::kShape, "ConcatCols row mismatch");
    cols += p.cols();
  }
  Mat<T> y(parts.front().rows(), cols);
  std::vector<Eigen::Index> offsets;
  Eigen::Index at = 0;
  for (const auto &p : parts) {
    y.middleCols(at, p.cols()) = p.value();
    offsets.push_back(at);
    at += p.cols();
  }
  return MakeOp<T>(std::move(y), parts, [offsets](Node<T> &self) {
    for (std::size_t i = 0; i < self.parents.size(); ++i) {
      if (!Wants(self, i)) continue;
      auto &p = self.parent(i);
      p.Grad() += self.grad.middleCols(offsets[i], p.value.cols());
    }
  });
}

/// out.row(i) = table.row(index[i]); gradients scatter-add back.
template <typename T>
Var<T> GatherRows(const Var<T> &table, const std::vector<std::uint32_t> &index) {
  Mat<T> y(static_cast<Eigen::Index>(index.size()), table.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= table.rows()) Fail(ErrorKind::kVocab, "row index out of range");
    y.row(static_cast<Eigen::Index>(i)) = table.value().row(index[i]);
  }
  return MakeOp<T>(std::move(y), {table}, [index](Node<T> &self) {
    auto &g = self.parent(0).Grad();
    for (std::size_t i = 0; i < index.size(); ++i) g.row(index[i]) += self.grad.row(static_cast<Eigen::Index>(i));
  });
}

/// Reinterprets the row-major buffer with a new shape.
template <typename T>
Var<T> Reshape(const Var<T> &x, Eigen::Index rows, Eigen::Index cols) {
  if (rows * cols != x.value().size()) Fail(ErrorKind::kShape, "Reshape size mismatch");
  Mat<T> y = Eigen::Map<const Mat<T>>(x.value().data(), rows, cols);
  return MakeOp<T>(std::move(y), {x}, [](Node<T> &self) {
    auto &p = self.parent(0);
    p.Grad() += Eigen::Map<const Mat<T>>(self.grad.data(), p.value.rows(), p.value.cols());
  });
}

// ---------------------------------------------------------------------------
// Convolutions

/// 2-D convolution with "same" zero padding and stride 1 over a (time, freq)
/// plane. `x` is laid out as [(frames*bins) x in_channels]; the weight is
/// [out_channels x (in_channels*k*k)] flattened as (c, dt, df); the result is
/// [(frames*bins) x out_channels].
template <typename T>
Var<T> Conv2dSame(const Var<T> &x, Eigen::Index frames, Eigen::Index bins,
                  const Var<T> &w, const Var<T> &b, int k) {
  const Eigen::Index cin = x.cols();
  if (x.rows() != frames * bins) Fail(ErrorKind::kShape, "Conv2dSame input rows");
  if (w.cols() != cin * k * k) Fail(ErrorKind::kShape, "Conv2dSame weight width");
  const int pad = k / 2;
  Mat<T> cols = Mat<T>::Zero(frames * bins, cin * k * k);
  const Mat<T> &xv = x.value();
  for (Eigen::Index t = 0; t < frames; ++t) {
    for (Eigen::Index f = 0; f < bins; ++f) {
      T *dst = cols.row(t * bins + f).data();
      for (int dt = 0; dt < k; ++dt) {
        const Eigen::Index st = t + dt - pad;
        if (st < 0 || st >= frames) continue;
        for (int df = 0; df < k; ++df) {
          const Eigen::Index sf = f + df - pad;
          if (sf < 0 || sf >= bins) continue;
          const T *src = xv.row(st * bins + sf).data();
          for (Eigen::Index c = 0; c < cin; ++c) dst[(c * k + dt) * k + df] = src[c];
        }
      }
    }
  }
  Mat<T> y = cols * w.value().transpose();
  y.rowwise() += b.value().row(0);
  return MakeOp<T>(std::move(y), {x, w, b},
                   [cols = std::move(cols), frames, bins, cin, k, pad](Node<T> &self) {
    const Mat<T> &g = self.grad;
    if (Wants(self, 1)) self.parent(1).Grad().noalias() += g.transpose() * cols;
    if (Wants(self, 2)) self.parent(2).Grad() += g.colwise().sum();
    if (!Wants(self, 0)) return;
    const Mat<T> dcols = g * self.parent(1).value;
    auto &dx = self.parent(0).Grad();
    for (Eigen::Index t = 0; t < frames; ++t) {
      for (Eigen::Index f = 0; f < bins; ++f) {
        const T *src = dcols.row(t * bins + f).data();
        for (int dt = 0; dt < k; ++dt) {
          const Eigen::Index st = t + dt - pad;
          if (st < 0 || st >= frames) continue;
          for (int df = 0; df < k; ++df) {
            const Eigen::Index sf = f + df - pad;
            if (sf < 0 || sf >= bins) continue;
            T *dst = dx.row(st * bins + sf).data();
            for (Eigen::Index c = 0; c < cin; ++c) dst[c] += src[(c * k + dt) * k + df];
          }
        }
      }
    }
  });
}

/// Per-channel convolution along rows (time) with "same" padding.
/// x: [frames x channels], w: [kernel x channels], b: [1 x channels].
template <typename T>
Var<T> DepthwiseConvTime(const Var<T> &x, const Var<T> &w, const Var<T> &b) {
  const Eigen::Index frames = x.rows();
  const Eigen::Index k = w.rows();
  if (w.cols() != x.cols() || b.cols() != x.cols()) Fail(ErrorKind::kShape, "DepthwiseConvTime widths");
  const Eigen::Index pad = k / 2;
  Mat<T> y(frames, x.cols());
  y.rowwise() = b.value().row(0);
  for (Eigen::Index t = 0; t < frames; ++t) {
    for (Eigen::Index j = 0; j < k; ++j) {
      const Eigen::Index s = t + j - pad;
      if (s < 0 || s >= frames) continue;
      y.row(t).array() += x.value().row(s).array() * w.value().row(j).array();
    }
  }
  return MakeOp<T>(std::move(y), {x, w, b}, [frames, k, pad](Node<T> &self) {
    const Mat<T> &g = self.grad;
    const Mat<T> &xv = self.parent(0).value;
    const Mat<T> &wv = self.parent(1).value;
    if (Wants(self, 2)) self.parent(2).Grad() += g.colwise().sum();
    const bool want_x = Wants(self, 0), want_w = Wants(self, 1);
    for (Eigen::Index t = 0; t < frames; ++t) {
      for (Eigen::Index j = 0; j < k; ++j) {
        const Eigen::Index s = t + j - pad;
        if (s < 0 || s >= frames) continue;
        if (want_x) self.parent(0).Grad().row(s).array() += g.row(t).array() * wv.row(j).array();
        if (want_w) self.parent(1).Grad().row(j).array() += g.row(t).array() * xv.row(s).array();
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Recurrent

/// Single-direction LSTM over rows. Gate layout in the 4H columns is
/// (input, forget, cell, output). x: [T x D], w_ih: [D x 4H], w_hh: [H x 4H],
/// b: [1 x 4H]. With `reverse` the sequence is consumed last-to-first and the
/// output row t still corresponds to input row t.
template <typename T>
Var<T> Lstm(const Var<T> &x, const Var<T> &w_ih, const Var<T> &w_hh, const Var<T> &b,
            bool reverse) {
  const Eigen::Index steps = x.rows();
  const Eigen::Index h = w_hh.rows();
  if (w_ih.cols() != 4 * h || w_hh.cols() != 4 * h || b.cols() != 4 * h || w_ih.rows() != x.cols()) {
    Fail(ErrorKind::kShape, "Lstm weight shapes");
  }
  Mat<T> gates = x.value() * w_ih.value();
  gates.rowwise() += b.value().row(0);
  Mat<T> hidden = Mat<T>::Zero(steps, h);
  Mat<T> cell = Mat<T>::Zero(steps, h);
  Mat<T> cell_tanh = Mat<T>::Zero(steps, h);
  Mat<T> prev_hidden = Mat<T>::Zero(steps, h);
  Mat<T> prev_cell = Mat<T>::Zero(steps, h);
  Eigen::Matrix<T, 1, Eigen::Dynamic> hp = Eigen::Matrix<T, 1, Eigen::Dynamic>::Zero(h);
  Eigen::Matrix<T, 1, Eigen::Dynamic> cp = Eigen::Matrix<T, 1, Eigen::Dynamic>::Zero(h);
  for (Eigen::Index i = 0; i < steps; ++i) {
    const Eigen::Index t = reverse ? steps - 1 - i : i;
    prev_hidden.row(t) = hp;
    prev_cell.row(t) = cp;
    gates.row(t).noalias() += hp * w_hh.value();
    auto row = gates.row(t);
    for (Eigen::Index j = 0; j < h; ++j) {
      row(j) = detail::SigmoidScalar(row(j));
      row(h + j) = detail::SigmoidScalar(row(h + j));
      row(2 * h + j) = std::tanh(row(2 * h + j));
      row(3 * h + j) = detail::SigmoidScalar(row(3 * h + j));
    }
    cp = row.segment(h, h).cwiseProduct(cp) + row.segment(0, h).cwiseProduct(row.segment(2 * h, h));
    cell.row(t) = cp;
    cell_tanh.row(t) = cp.array().tanh().matrix();
    hp = row.segment(3 * h, h).cwiseProduct(cell_tanh.row(t));
    hidden.row(t) = hp;
  }
  return MakeOp<T>(hidden, {x, w_ih, w_hh, b},
                   [gates = std::move(gates), cell_tanh = std::move(cell_tanh),
                    prev_hidden = std::move(prev_hidden), prev_cell = std::move(prev_cell),
                    steps, h, reverse](Node<T> &self) {
    const Mat<T> &w_hh_v = self.parent(2).value;
    Mat<T> dz(steps, 4 * h);
    Eigen::Matrix<T, 1, Eigen::Dynamic> dh_next = Eigen::Matrix<T, 1, Eigen::Dynamic>::Zero(h);
    Eigen::Matrix<T, 1, Eigen::Dynamic> dc_next = Eigen::Matrix<T, 1, Eigen::Dynamic>::Zero(h);
    for (Eigen::Index i = steps - 1; i >= 0; --i) {
      const Eigen::Index t = reverse ? steps - 1 - i : i;
      const auto gi = gates.row(t).segment(0, h).array();
      const auto gf = gates.row(t).segment(h, h).array();
      const auto gg = gates.row(t).segment(2 * h, h).array();
      const auto go = gates.row(t).segment(3 * h, h).array();
      const auto ct = cell_tanh.row(t).array();
      const Eigen::Array<T, 1, Eigen::Dynamic> dh = self.grad.row(t).array() + dh_next.array();
      const Eigen::Array<T, 1, Eigen::Dynamic> dc = dh * go * (T(1) - ct * ct) + dc_next.array();
      dz.row(t).segment(0, h) = (dc * gg * gi * (T(1) - gi)).matrix();
      dz.row(t).segment(h, h) = (dc * prev_cell.row(t).array() * gf * (T(1) - gf)).matrix();
      dz.row(t).segment(2 * h, h) = (dc * gi * (T(1) - gg * gg)).matrix();
      dz.row(t).segment(3 * h, h) = (dh * ct * go * (T(1) - go)).matrix();
      dc_next = (dc * gf).matrix();
      dh_next.noalias() = dz.row(t) * w_hh_v.transpose();
    }
    if (Wants(self, 0)) self.parent(0).Grad().noalias() += dz * self.parent(1).value.transpose();
    if (Wants(self, 1)) self.parent(1).Grad().noalias() += self.parent(0).value.transpose() * dz;
    if (Wants(self, 2)) self.parent(2).Grad().noalias() += prev_hidden.transpose() * dz;
    if (Wants(self, 3)) self.parent(3).Grad() += dz.colwise().sum();
  });
}

// ---------------------------------------------------------------------------
// Reductions and losses

template <typename T>
Var<T> Sum(const Var<T> &x) {
  Mat<T> y(1, 1);
  y(0, 0) = x.value().sum();
  return MakeOp<T>(std::move(y), {x}, [](Node<T> &self) {
    self.parent(0).Grad().array() += self.grad(0, 0);
  });
}

/// Sum over rows with row_valid[r] != 0 of |pred - target|. An empty
/// row_valid means every row counts. d|x|/dx is taken as 0 at x == 0.
template <typename T>
Var<T> SumAbsDiff(const Var<T> &pred, const Mat<T> &target, const std::vector<char> &row_valid) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    Fail(ErrorKind::kShape, "SumAbsDiff shape mismatch");
  }
  if (!row_valid.empty() && static_cast<Eigen::Index>(row_valid.size()) != pred.rows()) {
    Fail(ErrorKind::kShape, "frame mask length does not match frames");
  }
  Mat<T> sign = (pred.value() - target).array().sign().matrix();
  if (!row_valid.empty()) {
    for (Eigen::Index r = 0; r < sign.rows(); ++r) {
      if (!row_valid[r]) sign.row(r).setZero();
    }
  }
  Mat<T> y(1, 1);
  y(0, 0) = (pred.value() - target).cwiseAbs().cwiseProduct(sign.cwiseAbs()).sum();
  return MakeOp<T>(std::move(y), {pred}, [sign = std::move(sign)](Node<T> &self) {
    self.parent(0).Grad() += sign * self.grad(0, 0);
  });
}

/// sum_t (1 - cos(a_t, b_t)) over paired rows. Zero-norm rows are rejected.
template <typename T>
Var<T> CosineDistanceSum(const Var<T> &a, const Var<T> &b) {
  detail::CheckSameShape(a, b, "CosineDistanceSum");
  const Eigen::Index n = a.rows();
  Eigen::Matrix<T, Eigen::Dynamic, 1> na(n), nb(n), dots(n);
  T total = 0;
  for (Eigen::Index r = 0; r < n; ++r) {
    na(r) = a.value().row(r).norm();
    nb(r) = b.value().row(r).norm();
    if (na(r) == T(0) || nb(r) == T(0)) {
      Fail(ErrorKind::kDegenerateEmbedding, "zero-norm embedding at row " + std::to_string(r));
    }
    dots(r) = a.value().row(r).dot(b.value().row(r));
    total += T(1) - dots(r) / (na(r) * nb(r));
  }
  Mat<T> y(1, 1);
  y(0, 0) = total;
  return MakeOp<T>(std::move(y), {a, b}, [na, nb, dots](Node<T> &self) {
    const T g = self.grad(0, 0);
    const auto &av = self.parent(0).value;
    const auto &bv = self.parent(1).value;
    for (Eigen::Index r = 0; r < av.rows(); ++r) {
      const T inv = T(1) / (na(r) * nb(r));
      const T c = dots(r) * inv;
      if (Wants(self, 0)) {
        self.parent(0).Grad().row(r) -= g * (bv.row(r) * inv - av.row(r) * (c / (na(r) * na(r))));
      }
      if (Wants(self, 1)) {
        self.parent(1).Grad().row(r) -= g * (av.row(r) * inv - bv.row(r) * (c / (nb(r) * nb(r))));
      }
    }
  });
}

/// Applies a mask to a fixed noisy log-amplitude inside the graph.
/// magnitude domain: max(log(mask) + log_amp, log_floor); log domain:
/// mask * log_amp.
template <typename T>
Var<T> MaskLogAmplitude(const Var<T> &mask, const Mat<T> &log_amp, T log_floor, bool log_domain) {
  if (mask.rows() != log_amp.rows() || mask.cols() != log_amp.cols()) {
    Fail(ErrorKind::kShape, "mask shape does not match spectrogram");
  }
  if (log_domain) {
    return MakeOp<T>(mask.value().cwiseProduct(log_amp), {mask}, [log_amp](Node<T> &self) {
      self.parent(0).Grad() += self.grad.cwiseProduct(log_amp);
    });
  }
  Mat<T> raw = mask.value().array().log().matrix() + log_amp;
  Mat<T> y = raw.cwiseMax(log_floor);
  return MakeOp<T>(std::move(y), {mask}, [log_floor, raw = std::move(raw)](Node<T> &self) {
    auto &m = self.parent(0).value;
    self.parent(0).Grad().array() +=
        (raw.array() > log_floor).select(self.grad.array() / m.array(), T(0));
  });
}

}  // namespace cmkt::ag

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

#include "cmkt/train/grad_check.hpp"

#include <cmath>
#include <random>

#include "cmkt/error.hpp"
#include "cmkt/rng.hpp"
#include "cmkt/train/losses.hpp"

namespace cmkt::train {

std::string LossSelectorName(LossSelector s) {
  switch (s) {
    case LossSelector::kSeOnly: return "se";
    case LossSelector::kCmaOnly: return "cma";
    case LossSelector::kCombined: return "combined";
  }
  return "se";
}

LossSelector ParseLossSelector(const std::string &name) {
  if (name == "se") return LossSelector::kSeOnly;
  if (name == "cma") return LossSelector::kCmaOnly;
  if (name == "combined") return LossSelector::kCombined;
  Fail(ErrorKind::kConfig, "unknown loss selector '" + name + "' (se|cma|combined)");
}

GradCheckReport GradCheck(model::BlockKind kind, LossSelector selector, std::uint64_t seed, double alpha,
                          double floor) {
  constexpr int kFrames = 8;
  constexpr int kVocab = 7;
  const double h = 1e-4;

  BranchSetup setup;
  auto &mc = setup.model;
  mc = model::ModelConfig::ForKind(kind);
  mc.n_blocks = 1;
  mc.d_a = 16;
  mc.bins = 9;
  mc.heads = 2;
  mc.ffn_dim = 16;
  mc.conv_kernel = 3;
  mc.cnn_channels = {2, 2};
  mc.d_t = 12;
  mc.dropout = 0.0;
  mc.lstm_hidden = 8;
  auto &cc = setup.cmt;
  cc.layers = 1;
  cc.d_model = mc.d_t;
  cc.heads = 2;
  cc.ffn_dim = 16;
  cc.dropout = 0.0;
  cc.train_embedding = true;

  std::mt19937_64 rng(DeriveSeed(seed, {0x67636bULL}));
  auto uniform = [&](Eigen::Index r, Eigen::Index c, double lo, double hi) {
    ag::Mat<double> m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = UniformIn(rng, lo, hi);
    return m;
  };

  ag::Mat<float> table = uniform(kVocab, mc.d_t, -1.0, 1.0).cast<float>();
  auto store = model::InitParams<double>(mc, seed);
  transfer::InitCmtParams(store, cc, DeriveSeed(seed, {1}), &table);

  const ag::Mat<double> noisy = uniform(kFrames, mc.bins, -2.0, 1.0);
  const ag::Mat<double> clean = uniform(kFrames, mc.bins, -3.0, 0.0);
  transfer::UtteranceRecord record;
  record.id = "gc";
  record.ids = {2, 5, 3, 6};
  record.has_target = true;
  const ag::Mat<double> targets = uniform(static_cast<Eigen::Index>(record.ids.size()), mc.d_t, -1.0, 1.0);
  record.z_hat = targets.cast<float>();

  const bool with_text = selector != LossSelector::kSeOnly;
  const model::RunContext<double> ctx{};
  auto loss = [&]() {
    UtteranceInput<double> input{&noisy, &clean, &record, &targets};
    std::vector<UtteranceTerms<double>> terms;
    terms.push_back(ScoreUtterance(store, setup, store.Get("cmt.embedding"), input,
                                   transfer::AlignMode::kAligned, with_text, ctx, ctx));
    switch (selector) {
      case LossSelector::kSeOnly: return BatchObjective(terms, 1.0, true);
      case LossSelector::kCmaOnly: return terms.front().cma;
      case LossSelector::kCombined: break;
    }
    return BatchObjective(terms, alpha, true);
  };

  store.ZeroGrad();
  ag::Backward(loss());

  GradCheckReport report;
  for (auto &entry : store.entries()) {
    auto &value = entry.var.mutable_value();
    const bool has = entry.var.has_grad();
    const ag::Mat<double> analytic = has ? entry.var.grad() : ag::Mat<double>::Zero(value.rows(), value.cols());
    for (Eigen::Index k = 0; k < value.size(); ++k) {
      const double saved = value.data()[k];
      // Five-point central stencil, O(h^4) truncation.
      double f[4];
      {
        ag::NoGradGuard guard;
        const double offsets[4] = {-2.0, -1.0, 1.0, 2.0};
        for (int i = 0; i < 4; ++i) {
          value.data()[k] = saved + offsets[i] * h;
          f[i] = loss().item();
        }
      }
      value.data()[k] = saved;
      const double numeric = (f[0] - 8.0 * f[1] + 8.0 * f[2] - f[3]) / (12.0 * h);
      const double a = analytic.data()[k];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_param = entry.name + "[" + std::to_string(k) + "]";
      }
      ++report.checked;
    }
  }
  return report;
}

}  // namespace cmkt::train

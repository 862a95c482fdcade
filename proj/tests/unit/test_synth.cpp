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

#include <doctest.h>

#include <fstream>
#include <sstream>

#include "cmkt/signal/audio.hpp"
#include "cmkt/synth.hpp"
#include "cmkt/train/data.hpp"
#include "cmkt/transfer/archive.hpp"
#include "helpers.hpp"

using namespace cmkt;
using cmkt::testing::TempDir;

namespace {

SynthConfig Small() {
  SynthConfig s;
  s.n_utts = 12;
  s.vocab = 10;
  s.d_t = 8;
  s.min_seconds = 0.5;
  s.max_seconds = 0.8;
  return s;
}

std::string Slurp(const std::filesystem::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("synthetic corpus is a pure function of config and seed") {
  TempDir a("synth_a"), b("synth_b"), c("synth_c");
  const auto oa = GenerateSynth(a.path(), Small(), 3);
  const auto ob = GenerateSynth(b.path(), Small(), 3);
  const auto oc = GenerateSynth(c.path(), Small(), 4);
  CHECK(Slurp(oa.archive) == Slurp(ob.archive));
  CHECK(Slurp(oa.manifest) == Slurp(ob.manifest));
  CHECK(Slurp(a / "clean/syn00003.wav") == Slurp(b / "clean/syn00003.wav"));
  CHECK(Slurp(oa.archive) != Slurp(oc.archive));
}

TEST_CASE("synthetic manifest and archive agree") {
  TempDir dir("synth");
  const auto cfg = Small();
  const auto out = GenerateSynth(dir.path(), cfg, 1);
  const auto items = train::ReadManifest(out.manifest);
  const auto archive = transfer::ReadArchive(out.archive);
  REQUIRE(items.size() == static_cast<std::size_t>(cfg.n_utts));
  REQUIRE(archive.table.has_value());
  CHECK(archive.vocab_size() == static_cast<std::uint32_t>(cfg.vocab));
  CHECK(archive.d_t == static_cast<std::uint32_t>(cfg.d_t));
  for (Eigen::Index r = 0; r < archive.table->rows(); ++r) {
    CHECK(archive.table->row(r).norm() == doctest::Approx(1.0).epsilon(1e-5));
  }
  for (const auto &item : items) {
    REQUIRE(item.snr_db.has_value());
    CHECK(*item.snr_db >= train::kMinRandomSnrDb);
    CHECK(*item.snr_db <= train::kMaxRandomSnrDb);
    const auto *rec = archive.Find(item.id);
    REQUIRE(rec != nullptr);
    CHECK(rec->has_target);
    CHECK(rec->ids.size() >= static_cast<std::size_t>(cfg.min_tokens));
    CHECK(rec->ids.size() <= static_cast<std::size_t>(cfg.max_tokens));
    CHECK(rec->z_hat.rows() == static_cast<Eigen::Index>(rec->ids.size()));
    REQUIRE(item.transcript.has_value());
    std::istringstream words(*item.transcript);
    std::size_t n = 0;
    for (std::string w; words >> w; ++n) CHECK(w == "t" + std::to_string(rec->ids[n]));
    CHECK(n == rec->ids.size());
    for (auto id : rec->ids) {
      CHECK(id >= 2);
      CHECK(id < static_cast<std::uint32_t>(cfg.vocab));
    }
    const auto clean = signal::ReadWav(dir / item.clean);
    const auto noise = signal::ReadWav(dir / item.noise);
    CHECK(noise.size() >= clean.size());
    CHECK(clean.size() >= static_cast<std::size_t>(cfg.min_seconds * cfg.sample_rate));
    CHECK(clean.size() <= static_cast<std::size_t>(cfg.max_seconds * cfg.sample_rate) + 1);
  }
}

TEST_CASE("targets sit near their table rows") {
  TempDir dir("synth_targets");
  const auto out = GenerateSynth(dir.path(), Small(), 2);
  const auto archive = transfer::ReadArchive(out.archive);
  for (const auto &rec : archive.utterances) {
    for (std::size_t i = 0; i < rec.ids.size(); ++i) {
      const auto diff = (rec.z_hat.row(static_cast<Eigen::Index>(i)) - archive.table->row(rec.ids[i])).norm();
      CHECK(diff < 0.5);
    }
  }
}

TEST_CASE("text-free share writes utterances without targets") {
  TempDir dir("synth_free");
  auto cfg = Small();
  cfg.text_free_fraction = 1.0;
  const auto out = GenerateSynth(dir.path(), cfg, 1);
  for (const auto &item : train::ReadManifest(out.manifest)) CHECK_FALSE(item.transcript.has_value());
  for (const auto &rec : transfer::ReadArchive(out.archive).utterances) CHECK_FALSE(rec.has_target);
}

TEST_CASE("synth config validation") {
  auto cfg = Small();
  cfg.vocab = 2;
  CHECK_THROWS_KIND(cfg.Validate(), ErrorKind::kConfig);
  cfg = Small();
  cfg.min_tokens = 5;
  cfg.max_tokens = 4;
  CHECK_THROWS_KIND(cfg.Validate(), ErrorKind::kConfig);
  cfg = Small();
  cfg.text_free_fraction = 1.5;
  CHECK_THROWS_KIND(cfg.Validate(), ErrorKind::kConfig);
}

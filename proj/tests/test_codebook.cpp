// tests/test_codebook.cpp
//
// Copyright 2026 The dynavq Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "dynavq/codebook.hpp"
#include "dynavq/rng.hpp"

using namespace dynavq;

namespace {

Codebook book_from(const std::vector<std::vector<double>>& entries) {
  Codebook b(entries[0].size());
  for (const auto& e : entries)
    b.add_entry(std::vector<double>(e), Origin::kSeed, 0, GrowthTrigger::kSeedInit);
  return b;
}

// independent oracle: exhaustive scan over squared distances
std::size_t brute_nearest(const std::vector<std::vector<double>>& entries,
                          const std::vector<double>& z) {
  std::size_t best = 0;
  double best_d = 1e300;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    double d = 0.0;
    for (std::size_t j = 0; j < z.size(); ++j)
      d += (z[j] - entries[i][j]) * (z[j] - entries[i][j]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("nearest basic examples") {
  Codebook b = book_from({{0, 0}, {1, 1}});
  CHECK(b.nearest(std::vector<double>{0.1, 0.0}) == 0);

  Codebook b2 = book_from({{0.3, -0.2}, {2, 2}, {5, 5}});
  CHECK(b2.nearest(std::vector<double>{2.0, 2.0}) == 1);

  // exact tie breaks to the lowest index
  Codebook b3 = book_from({{0, 0}, {1, 0}});
  CHECK(b3.nearest(std::vector<double>{0.5, 0.0}) == 0);
}

TEST_CASE("nearest errors") {
  Codebook empty(2);
  CHECK_THROWS(empty.nearest(std::vector<double>{0.0, 0.0}));
  Codebook b = book_from({{0, 0}});
  CHECK_THROWS_AS(b.nearest(std::vector<double>{0.0, 0.0, 0.0}), std::invalid_argument);
}

TEST_CASE("nearest agrees with exhaustive scan") {
  Rng rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    std::size_t n = 1 + rng.below(64);
    std::size_t d = 1 + rng.below(16);
    std::vector<std::vector<double>> entries(n, std::vector<double>(d));
    for (auto& e : entries)
      for (double& v : e) v = rng.uniform(-2, 2);
    Codebook b = book_from(entries);
    std::vector<double> z(d);
    for (double& v : z) v = rng.uniform(-2, 2);
    REQUIRE(b.nearest(z) == brute_nearest(entries, z));
  }
}

TEST_CASE("posterior basic shapes and values") {
  SECTION("single entry") {
    Codebook b = book_from({{1.0, 2.0}});
    Posterior p = b.posterior(std::vector<double>{5.0, 5.0}, 1.0);
    REQUIRE(p.probs.size() == 1);
    CHECK(p.probs[0] == Catch::Approx(1.0));
  }
  SECTION("two equidistant entries") {
    Codebook b = book_from({{-1.0, 0.0}, {1.0, 0.0}});
    Posterior p = b.posterior(std::vector<double>{0.0, 0.7}, 0.5);
    CHECK(p.probs[0] == Catch::Approx(0.5).margin(1e-12));
    CHECK(p.probs[1] == Catch::Approx(0.5).margin(1e-12));
  }
  SECTION("hand-computed softmax at distances 0 and 1") {
    Codebook b = book_from({{0.0}, {1.0}});
    Posterior p = b.posterior(std::vector<double>{0.0}, 1.0);
    CHECK(p.probs[0] == Catch::Approx(0.7311).margin(1e-4));
    CHECK(p.probs[1] == Catch::Approx(0.2689).margin(1e-4));
  }
}

TEST_CASE("posterior rows sum to one") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t n = 1 + rng.below(32);
    std::size_t d = 1 + rng.below(8);
    std::vector<std::vector<double>> entries(n, std::vector<double>(d));
    for (auto& e : entries)
      for (double& v : e) v = rng.uniform(-3, 3);
    Codebook b = book_from(entries);
    std::vector<double> z(d);
    for (double& v : z) v = rng.uniform(-3, 3);
    double tau = rng.uniform(0.05, 2.0);
    Posterior p = b.posterior(z, tau);
    double s = 0.0;
    for (double v : p.probs) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      s += v;
    }
    REQUIRE(s == Catch::Approx(1.0).margin(1e-9));
  }
}

TEST_CASE("sharpening: lower tau raises the max posterior") {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t d = 1 + rng.below(6);
    std::vector<std::vector<double>> entries(4, std::vector<double>(d));
    for (auto& e : entries)
      for (double& v : e) v = rng.uniform(-2, 2);
    Codebook b = book_from(entries);
    std::vector<double> z = entries[rng.below(4)];
    for (double& v : z) v += rng.uniform(-0.05, 0.05);  // strict unique nearest
    double p10 = b.posterior(z, 1.0).max();
    double p05 = b.posterior(z, 0.5).max();
    double p01 = b.posterior(z, 0.1).max();
    REQUIRE(p05 > p10);
    REQUIRE(p01 > p05);
  }
}

TEST_CASE("posterior parameter validation") {
  Codebook b = book_from({{0.0}});
  CHECK_THROWS_AS(b.posterior(std::vector<double>{0.0}, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(b.posterior(std::vector<double>{0.0}, -1.0), std::invalid_argument);
  Codebook empty(1);
  CHECK_THROWS(empty.posterior(std::vector<double>{0.0}, 1.0));
}

TEST_CASE("posterior_op matches the value path and is differentiable") {
  Rng rng(23);
  std::size_t n = 5, d = 3;
  std::vector<std::vector<double>> entries(n, std::vector<double>(d));
  for (auto& e : entries)
    for (double& v : e) v = rng.uniform(-1, 1);
  Codebook book = book_from(entries);
  std::vector<double> z(d);
  for (double& v : z) v = rng.uniform(-1, 1);

  for (bool squared : {false, true}) {
    Posterior plain = book.posterior(z, 0.7, squared);
    Tape tape;
    Var zv = tape.constant(Tensor::vec(std::vector<double>(z)));
    Var bk = book.entries_on_tape(tape);
    Var pv = posterior_op(tape, zv, bk, 0.7, squared);
    for (std::size_t i = 0; i < n; ++i)
      REQUIRE(tape.val(pv).at(i) == Catch::Approx(plain.probs[i]).margin(1e-14));
  }

  // gradient to the latent
  Tensor w = Tensor::vec({0.3, -1.2, 0.4, 0.9, -0.5});
  Tensor bmat = Tensor::zeros({n, d});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) bmat.at(i, j) = entries[i][j];
  auto f_z = [&](Tape& t, Var x) {
    Var bk = t.constant(bmat);
    return t.dot(posterior_op(t, x, bk, 0.7), t.constant(w));
  };
  CHECK(grad_check(f_z, Tensor::vec(std::vector<double>(z)), 1e-5) <= 1e-4);

  // gradient to the codebook entries
  auto f_b = [&](Tape& t, Var x) {
    Var zv = t.constant(Tensor::vec(std::vector<double>(z)));
    return t.dot(posterior_op(t, zv, x, 0.7), t.constant(w));
  };
  CHECK(grad_check(f_b, bmat, 1e-5) <= 1e-4);

  auto f_b_sq = [&](Tape& t, Var x) {
    Var zv = t.constant(Tensor::vec(std::vector<double>(z)));
    return t.dot(posterior_op(t, zv, x, 0.7, true), t.constant(w));
  };
  CHECK(grad_check(f_b_sq, bmat, 1e-5) <= 1e-4);
}

TEST_CASE("straight-through forward is bit-equal to the codeword") {
  Codebook b = book_from({{0.1, -0.7, 0.33}});
  Tape tape;
  Var z = tape.constant(Tensor::vec({5.0, 5.0, 5.0}));
  Var bk = b.entries_on_tape(tape);
  Var q = tape.straight_through(z, tape.row(bk, 0));
  const Tensor& entry = b.entry(0);
  for (std::size_t j = 0; j < 3; ++j) CHECK(tape.val(q).at(j) == entry.at(j));
}

TEST_CASE("dynamic_update: add branch") {
  // eight entries on a circle around the frame -> equal distances, max
  // posterior exactly 1/8 < 0.2
  std::vector<std::vector<double>> entries;
  for (int i = 0; i < 8; ++i) {
    double a = 2.0 * 3.14159265358979 * i / 8.0;
    entries.push_back({5.0 * std::cos(a), 5.0 * std::sin(a)});
  }
  Codebook b = book_from(entries);
  LabelSequence pseudo = label_from_string("a", LabelSource::kPseudo);
  std::vector<std::vector<double>> frames = {{0.0, 0.0}};
  UpdateReport r = b.dynamic_update(frames, pseudo, 0.2, 0.9, 0.5, 7);
  CHECK(r.added == 1);
  CHECK(b.size() == 9);
  CHECK(b.origin_of(8) == Origin::kUnpairedAdded);
  REQUIRE(b.growth_log().back().step == 7);
  CHECK(b.growth_log().back().trigger == GrowthTrigger::kLowPosteriorAdd);
  // the added entry is the frame latent itself
  CHECK(b.entry(8).at(0) == 0.0);
  CHECK(b.entry(8).at(1) == 0.0);
}

TEST_CASE("dynamic_update: refine branch") {
  // frame sits exactly on entry 0 of a well-separated book
  Codebook b = book_from({{0.0, 0.0}, {10.0, 0.0}, {0.0, 12.0}});
  // oracle check that the sharpened max posterior clears 0.9
  Posterior p = b.posterior(std::vector<double>{0.0, 0.0}, 0.5);
  REQUIRE(p.max() > 0.9);

  b.assign_phonemes({{0, 3}}, LabelSource::kGroundTruth);  // entry 0 -> /d/
  LabelSequence pseudo = label_from_string("a", LabelSource::kPseudo);
  std::vector<std::vector<double>> frames = {{0.0, 0.0}};
  UpdateReport r = b.dynamic_update(frames, pseudo, 0.1, 0.9, 0.5, 1);
  CHECK(r.refined == 1);
  CHECK(b.size() == 3);
  CHECK(r.frames[0].label_modified);
  CHECK(pseudo.phonemes[0] == 3);  // overwritten with the trusted mapping
}

TEST_CASE("dynamic_update: refine without a trusted mapping records only") {
  Codebook b = book_from({{0.0, 0.0}, {10.0, 0.0}, {0.0, 12.0}});
  b.assign_phonemes({{0, 3}}, LabelSource::kPseudo);  // pseudo-sourced mapping
  LabelSequence pseudo = label_from_string("a", LabelSource::kPseudo);
  std::vector<std::vector<double>> frames = {{0.0, 0.0}};
  UpdateReport r = b.dynamic_update(frames, pseudo, 0.1, 0.9, 0.5, 1);
  CHECK(r.refined == 1);
  CHECK_FALSE(r.frames[0].label_modified);
  CHECK(pseudo.phonemes[0] == 0);  // untouched
}

TEST_CASE("dynamic_update: drop branch and conservation") {
  Rng rng(3);
  Codebook b = book_from({{0.0, 0.0}, {2.0, 0.0}, {0.0, 2.0}, {-2.0, 0.0}});
  LabelSequence pseudo = label_from_string("a b", LabelSource::kPseudo);
  std::vector<std::vector<double>> frames;
  for (int t = 0; t < 40; ++t)
    frames.push_back({rng.uniform(-6, 6), rng.uniform(-6, 6)});
  std::size_t before = b.size();
  UpdateReport r = b.dynamic_update(frames, pseudo, 0.3, 0.9, 0.5, 2);
  CHECK(r.added + r.refined + r.dropped == frames.size());
  CHECK(r.frames.size() == frames.size());
  CHECK(b.size() >= before);
  CHECK(b.size() == before + r.added);
}

TEST_CASE("dynamic_update: degenerate thresholds") {
  Rng rng(4);
  std::vector<std::vector<double>> entries(6, std::vector<double>(3));
  for (auto& e : entries)
    for (double& v : e) v = rng.uniform(-1, 1);
  std::vector<std::vector<double>> frames(30, std::vector<double>(3));
  for (auto& f : frames)
    for (double& v : f) v = rng.uniform(-4, 4);

  SECTION("delta_low = 0 never adds") {
    Codebook b = book_from(entries);
    LabelSequence pseudo = label_from_string("a b c", LabelSource::kPseudo);
    UpdateReport r = b.dynamic_update(frames, pseudo, 0.0, 0.9, 0.5, 0);
    CHECK(r.added == 0);
    CHECK(b.size() == entries.size());
  }
  SECTION("delta_high = 1 never refines") {
    Codebook b = book_from(entries);
    LabelSequence pseudo = label_from_string("a b c", LabelSource::kPseudo);
    UpdateReport r = b.dynamic_update(frames, pseudo, 0.1, 1.0, 0.5, 0);
    CHECK(r.refined == 0);
  }
  SECTION("ordering violations rejected") {
    Codebook b = book_from(entries);
    LabelSequence pseudo;
    CHECK_THROWS_AS(b.dynamic_update(frames, pseudo, 0.9, 0.1, 0.5, 0),
                    std::invalid_argument);
    CHECK_THROWS_AS(b.dynamic_update(frames, pseudo, 0.5, 0.5, 0.5, 0),
                    std::invalid_argument);
  }
}

TEST_CASE("dynamic_update: duplicate frames are not added twice") {
  // frame coincides with an entry while the max posterior still falls below
  // delta_low (many duplicated entriesshare the distance)
  std::vector<std::vector<double>> entries(8, std::vector<double>{1.0, 1.0});
  Codebook b = book_from(entries);
  LabelSequence pseudo;
  std::vector<std::vector<double>> frames = {{1.0, 1.0}};
  UpdateReport r = b.dynamic_update(frames, pseudo, 0.2, 0.9, 0.5, 0);
  CHECK(r.added == 0);
  CHECK(r.dropped == 1);
  CHECK(b.size() == 8);
}

TEST_CASE("growth monotonicity under replayed frame order") {
  // Replay the same frames against the fixed initial book (a delta_low = 0
  // run never grows), then count would-be additions per threshold.
  Rng rng(31);
  std::vector<std::vector<double>> entries(10, std::vector<double>(4));
  for (auto& e : entries)
    for (double& v : e) v = rng.uniform(-1, 1);
  Codebook b = book_from(entries);
  std::vector<double> p_hats;
  for (int t = 0; t < 100; ++t) {
    std::vector<double> z(4);
    for (double& v : z) v = rng.uniform(-5, 5);
    p_hats.push_back(b.posterior(z, 0.5).max());
  }
  std::size_t prev = 0;
  for (double dl : {0.05, 0.1, 0.2, 0.4, 0.8}) {
    std::size_t added = 0;
    for (double p : p_hats)
      if (p < dl) ++added;
    REQUIRE(added >= prev);
    prev = added;
  }
}

TEST_CASE("assign_phonemes majority vote and precedence") {
  Codebook b = book_from({{0, 0}, {1, 1}, {2, 2}});

  std::vector<std::pair<std::size_t, int>> pairs;
  for (int i = 0; i < 10; ++i) pairs.push_back({0, 0});  // 10x /a/
  for (int i = 0; i < 2; ++i) pairs.push_back({0, 1});   // 2x /b/
  b.assign_phonemes(pairs, LabelSource::kGroundTruth);
  CHECK(b.phoneme_of(0) == 0);
  CHECK(b.origin_of(0) == Origin::kPairedLearned);  // seed learned from labels
  CHECK(b.phoneme_of(1) == -1);                     // no evidence -> unassigned
  CHECK(b.phoneme_of(2) == -1);

  // pseudo evidence cannot overturn a ground-truth assignment
  std::vector<std::pair<std::size_t, int>> pseudo_pairs(50, {0, 1});
  b.assign_phonemes(pseudo_pairs, LabelSource::kPseudo);
  CHECK(b.phoneme_of(0) == 0);

  // but it does fill unassigned entries
  b.assign_phonemes({{1, 2}, {1, 2}, {1, 3}}, LabelSource::kPseudo);
  CHECK(b.phoneme_of(1) == 2);
  CHECK(b.assignment_source(1) == LabelSource::kPseudo);

  // later ground-truth evidence upgrades a pseudo assignment
  b.assign_phonemes({{1, 3}, {1, 3}}, LabelSource::kGroundTruth);
  CHECK(b.phoneme_of(1) == 3);
  CHECK(b.assignment_source(1) == LabelSource::kGroundTruth);
}

TEST_CASE("lookup_phoneme_codewords") {
  Codebook b = book_from({{0, 0}, {1, 1}, {2, 2}});
  std::vector<std::pair<std::size_t, int>> pairs;
  for (int i = 0; i < 7; ++i) pairs.push_back({1, 0});  // entry 1 <- /a/ x7
  for (int i = 0; i < 3; ++i) pairs.push_back({2, 0});  // entry 2 <- /a/ x3
  pairs.push_back({0, 1});                              // entry 0 <- /b/
  b.assign_phonemes(pairs, LabelSource::kGroundTruth);

  SECTION("unique and frequency-based selection") {
    auto idx = b.lookup_phoneme_codewords({1});
    REQUIRE(idx == std::vector<std::size_t>{0});
    auto idx2 = b.lookup_phoneme_codewords({0});
    REQUIRE(idx2 == std::vector<std::size_t>{1});  // 7 beats 3
  }
  SECTION("unmapped phoneme is a named error") {
    try {
      b.lookup_phoneme_codewords({5});
      FAIL("expected an error");
    } catch (const std::exception& e) {
      CHECK(std::string(e.what()).find("'f'") != std::string::npos);
    }
  }
}

TEST_CASE("codebook serialization round trip") {
  Codebook b = Codebook::seeded(5, 4, 77);
  b.assign_phonemes({{0, 2}, {0, 2}, {3, 7}}, LabelSource::kGroundTruth);
  LabelSequence pseudo = label_from_string("a", LabelSource::kPseudo);
  std::vector<std::vector<double>> far = {{30.0, 30.0, 30.0, 30.0},
                                          {-30.0, 30.0, -30.0, 30.0}};
  b.dynamic_update(far, pseudo, 0.5, 0.95, 0.5, 11);

  std::string bytes = b.serialize();
  Codebook c = Codebook::deserialize(bytes);
  REQUIRE(c.size() == b.size());
  REQUIRE(c.dim() == b.dim());
  for (std::size_t i = 0; i < b.size(); ++i) {
    CHECK(c.phoneme_of(i) == b.phoneme_of(i));
    CHECK(c.origin_of(i) == b.origin_of(i));
    for (std::size_t j = 0; j < b.dim(); ++j)
      CHECK(c.entry(i).at(j) == b.entry(i).at(j));  // bit-exact floats
  }
  REQUIRE(c.growth_log().size() == b.growth_log().size());
  for (std::size_t i = 0; i < b.growth_log().size(); ++i) {
    CHECK(c.growth_log()[i].step == b.growth_log()[i].step);
    CHECK(c.growth_log()[i].entry == b.growth_log()[i].entry);
    CHECK(c.growth_log()[i].trigger == b.growth_log()[i].trigger);
  }
  // and the bytes themselves are stable
  CHECK(c.serialize() == bytes);
}

TEST_CASE("seeded codebooks are deterministic") {
  Codebook a = Codebook::seeded(6, 3, 123);
  Codebook b = Codebook::seeded(6, 3, 123);
  CHECK(a.serialize() == b.serialize());
  Codebook c = Codebook::seeded(6, 3, 124);
  CHECK(a.serialize() != c.serialize());
}

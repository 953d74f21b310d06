// tests/test_corpus.cpp
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

#include <filesystem>
#include <set>

#include "dynavq/corpus.hpp"
#include "dynavq/corpus_io.hpp"

using namespace dynavq;

namespace {

CorpusSpec small_spec() {
  CorpusSpec s;
  s.alphabet_size = 10;
  s.feat_dim = 4;
  s.paired_phonemes = 5;
  s.unpaired_phonemes = 10;
  s.paired_frames = 300;
  s.unpaired_frames = 600;
  s.eval_utterances = 8;
  s.seed = 2026;
  return s;
}

bool same_frames(const std::vector<std::vector<double>>& a,
                 const std::vector<std::vector<double>>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

}  // namespace

TEST_CASE("alphabet prototypes respect the margin") {
  PhonemeAlphabet a = PhonemeAlphabet::make(26, 8, 1.0, 99);
  REQUIRE(a.prototypes.size() == 26);
  CHECK(a.min_pairwise_distance() >= 1.0);
  // default corpus keeps the margin at 6x the noise level or more
  CorpusSpec def;
  CHECK(def.margin >= 6.0 * def.noise);
}

TEST_CASE("noiseless unit-duration corpus emits bare prototypes") {
  CorpusSpec s = small_spec();
  s.noise = 0.0;
  s.dur_min = s.dur_max = 1;
  Corpus c = gen_corpus(s);
  REQUIRE(!c.paired.empty());
  for (const auto& u : c.paired) {
    REQUIRE(u.label.has_value());
    REQUIRE(u.frames.size() == u.label->size());  // one frame per phoneme
    for (std::size_t i = 0; i < u.frames.size(); ++i)
      CHECK(u.frames[i] == c.alphabet.prototypes[u.label->phonemes[i]]);
  }
}

TEST_CASE("generation is deterministic per seed") {
  CorpusSpec s = small_spec();
  Corpus a = gen_corpus(s);
  Corpus b = gen_corpus(s);
  REQUIRE(a.paired.size() == b.paired.size());
  REQUIRE(a.unpaired.size() == b.unpaired.size());
  for (std::size_t i = 0; i < a.paired.size(); ++i) {
    CHECK(a.paired[i].id == b.paired[i].id);
    CHECK(same_frames(a.paired[i].frames, b.paired[i].frames));
    CHECK(a.paired[i].label->phonemes == b.paired[i].label->phonemes);
  }
  for (std::size_t i = 0; i < a.unpaired.size(); ++i)
    CHECK(same_frames(a.unpaired[i].frames, b.unpaired[i].frames));

  s.seed += 1;
  Corpus c = gen_corpus(s);
  CHECK_FALSE(same_frames(a.paired[0].frames, c.paired[0].frames));
}

TEST_CASE("coverage sets are respected") {
  CorpusSpec s = small_spec();
  Corpus c = gen_corpus(s);
  for (const auto& u : c.paired)
    for (int ph : u.label->phonemes) CHECK(ph < static_cast<int>(s.paired_phonemes));
  // unpaired truth may use the full coverage and does in practice
  std::set<int> seen;
  for (const auto& u : c.unpaired) {
    const TruthRecord& t = c.truth.at(u.id);
    for (int ph : t.label.phonemes) {
      CHECK(ph < static_cast<int>(s.unpaired_phonemes));
      seen.insert(ph);
    }
  }
  CHECK(seen.size() > s.paired_phonemes);
}

TEST_CASE("frame budgets are met within one utterance") {
  CorpusSpec s = small_spec();
  Corpus c = gen_corpus(s);
  std::size_t paired_total = 0;
  for (const auto& u : c.paired) paired_total += u.num_frames();
  std::size_t max_utt = s.utt_phonemes_max * s.dur_max;
  CHECK(paired_total >= s.paired_frames);
  CHECK(paired_total < s.paired_frames + max_utt);
}

TEST_CASE("unpaired utterances never expose their labels") {
  Corpus c = gen_corpus(small_spec());
  REQUIRE(!c.unpaired.empty());
  for (const auto& u : c.unpaired) {
    CHECK_FALSE(u.label.has_value());
    CHECK(c.truth.count(u.id) == 1);  // truth lives only in the sidecar
  }
  for (const auto& u : c.eval_set) {
    CHECK(u.label.has_value());
    // every label phoneme produced at least one frame
    const TruthRecord& t = c.truth.at(u.id);
    REQUIRE(t.durations.size() == t.label.size());
    std::size_t total = 0;
    for (std::size_t d : t.durations) {
      CHECK(d >= 1);
      total += d;
    }
    CHECK(total == u.num_frames());
  }
}

TEST_CASE("invalid corpus specs are rejected") {
  CorpusSpec s = small_spec();
  s.paired_phonemes = 11;  // exceeds unpaired coverage
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = small_spec();
  s.paired_frames = 0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = small_spec();
  s.dur_min = 4;
  s.dur_max = 2;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

TEST_CASE("pseudo labels at error rate zero equal the truth") {
  LabelSequence truth = label_from_string("a b c d e", LabelSource::kGroundTruth);
  LabelSequence p = pseudo_label(truth, 0.0, 7, 10);
  CHECK(p.phonemes == truth.phonemes);
  CHECK(p.source == LabelSource::kPseudo);
}

TEST_CASE("pseudo labels are deterministic per seed") {
  LabelSequence truth = label_from_string("a b c d e f g", LabelSource::kGroundTruth);
  LabelSequence p1 = pseudo_label(truth, 0.5, 42, 10);
  LabelSequence p2 = pseudo_label(truth, 0.5, 42, 10);
  CHECK(p1.phonemes == p2.phonemes);
}

TEST_CASE("pseudo label corruption rate matches the configured rate") {
  // single-position truths: any edit changes the output sequence
  const double rate = 1.0 / 3.0;
  int corrupted = 0;
  const int trials = 20000;
  for (int i = 0; i < trials; ++i) {
    LabelSequence truth;
    truth.phonemes = {static_cast<int>(i % 10)};
    LabelSequence p = pseudo_label(truth, rate, 1000 + i, 10);
    if (p.phonemes != truth.phonemes) ++corrupted;
  }
  double measured = static_cast<double>(corrupted) / trials;
  CHECK(measured == Catch::Approx(rate).margin(0.05));
}

TEST_CASE("corpus file round trip") {
  namespace fs = std::filesystem;
  CorpusSpec s = small_spec();
  s.paired_frames = 60;
  s.unpaired_frames = 60;
  s.eval_utterances = 2;
  Corpus c = gen_corpus(s);

  for (bool text : {false, true}) {
    fs::path dir = fs::temp_directory_path() /
                   (text ? "dynavq_corpus_text" : "dynavq_corpus_b64");
    fs::remove_all(dir);
    write_corpus(c, dir.string(), text);
    Corpus r = read_corpus(dir.string());
    REQUIRE(r.paired.size() == c.paired.size());
    REQUIRE(r.unpaired.size() == c.unpaired.size());
    REQUIRE(r.eval_set.size() == c.eval_set.size());
    for (std::size_t i = 0; i < c.paired.size(); ++i) {
      CHECK(r.paired[i].id == c.paired[i].id);
      CHECK(same_frames(r.paired[i].frames, c.paired[i].frames));
      CHECK(r.paired[i].label->phonemes == c.paired[i].label->phonemes);
    }
    for (std::size_t i = 0; i < c.unpaired.size(); ++i) {
      CHECK(same_frames(r.unpaired[i].frames, c.unpaired[i].frames));
      CHECK_FALSE(r.unpaired[i].label.has_value());
    }
    REQUIRE(r.truth.size() == c.truth.size());
    for (const auto& [id, rec] : c.truth) {
      CHECK(r.truth.at(id).label.phonemes == rec.label.phonemes);
      CHECK(r.truth.at(id).durations == rec.durations);
    }
    fs::remove_all(dir);
  }
}

// include/dynavq/corpus.hpp
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

#ifndef DYNAVQ_CORPUS_HPP_
#define DYNAVQ_CORPUS_HPP_

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dynavq/label.hpp"
#include "dynavq/rng.hpp"
#include "dynavq/tensor.hpp"

namespace dynavq {

// Synthetic phoneme inventory: one prototype feature vector per phoneme,
// all pairwise prototype distances at least `margin` apart.
struct PhonemeAlphabet {
  std::size_t size = 0;
  std::size_t feat_dim = 0;
  double margin = 0.0;
  std::vector<std::vector<double>> prototypes;

  static PhonemeAlphabet make(std::size_t p, std::size_t f, double margin,
                              std::uint64_t seed) {
    if (p < 2) throw std::invalid_argument("PhonemeAlphabet: need at least 2 phonemes");
    PhonemeAlphabet a;
    a.size = p;
    a.feat_dim = f;
    a.margin = margin;
    Rng rng(seed);
    int attempts = 0;
    while (a.prototypes.size() < p) {
      if (++attempts > 10000)
        throw std::runtime_error("PhonemeAlphabet: margin unreachable; lower it");
      std::vector<double> cand(f);
      for (double& v : cand) v = rng.gaussian();
      bool ok = true;
      for (const auto& proto : a.prototypes) {
        double d2 = 0.0;
        for (std::size_t j = 0; j < f; ++j)
          d2 += (cand[j] - proto[j]) * (cand[j] - proto[j]);
        if (std::sqrt(d2) < margin) {
          ok = false;
          break;
        }
      }
      if (ok) a.prototypes.push_back(std::move(cand));
    }
    return a;
  }

  double min_pairwise_distance() const {
    double best = 1e300;
    for (std::size_t i = 0; i < prototypes.size(); ++i)
      for (std::size_t j = i + 1; j < prototypes.size(); ++j) {
        double d2 = 0.0;
        for (std::size_t k = 0; k < feat_dim; ++k)
          d2 += (prototypes[i][k] - prototypes[j][k]) *
                (prototypes[i][k] - prototypes[j][k]);
        best = std::min(best, std::sqrt(d2));
      }
    return best;
  }
};

struct Utterance {
  std::string id;
  std::vector<std::vector<double>> frames;  // T x F
  std::optional<LabelSequence> label;       // absent on unpaired data

  std::size_t num_frames() const { return frames.size(); }
};

struct CorpusSpec {
  std::size_t alphabet_size = 26;
  std::size_t feat_dim = 8;
  std::size_t paired_phonemes = 15;    // coverage: the first K phonemes
  std::size_t unpaired_phonemes = 26;  // must contain the paired coverage
  std::size_t paired_frames = 2400;    // frame budgets per split
  std::size_t unpaired_frames = 7200;
  std::size_t eval_utterances = 40;    // labeled held-out split
  std::size_t dur_min = 2, dur_max = 6;
  std::size_t utt_phonemes_min = 3, utt_phonemes_max = 8;
  double noise = 0.1;
  double margin = 1.0;
  std::uint64_t seed = 1;

  void validate() const {
    if (alphabet_size < 2 || feat_dim == 0)
      throw std::invalid_argument("CorpusSpec: bad alphabet/feature dims");
    if (paired_phonemes < 1 || paired_phonemes > unpaired_phonemes ||
        unpaired_phonemes > alphabet_size)
      throw std::invalid_argument(
          "CorpusSpec: need paired coverage <= unpaired coverage <= alphabet");
    if (paired_frames == 0 || unpaired_frames == 0)
      throw std::invalid_argument("CorpusSpec: frame budgets must be positive");
    if (dur_min == 0 || dur_min > dur_max)
      throw std::invalid_argument("CorpusSpec: bad duration range");
    if (utt_phonemes_min == 0 || utt_phonemes_min > utt_phonemes_max)
      throw std::invalid_argument("CorpusSpec: bad utterance length range");
    if (noise < 0.0) throw std::invalid_argument("CorpusSpec: negative noise");
  }
};

// Evaluation-only record of what an unpaired or held-out utterance really
// contains. Never handed to the trainer.
struct TruthRecord {
  LabelSequence label;
  std::vector<std::size_t> durations;  // frames per label position
};

struct Corpus {
  CorpusSpec spec;
  PhonemeAlphabet alphabet;
  std::vector<Utterance> paired;
  std::vector<Utterance> unpaired;
  std::vector<Utterance> eval_set;  // labeled, drawn from the unpaired coverage
  std::map<std::string, TruthRecord> truth;
};

namespace corpus_detail {

struct DrawnUtterance {
  LabelSequence label;
  std::vector<std::size_t> durations;
  std::vector<std::vector<double>> frames;
};

inline DrawnUtterance draw_utterance(const CorpusSpec& spec,
                                     const PhonemeAlphabet& alphabet,
                                     std::size_t coverage, Rng& rng) {
  DrawnUtterance u;
  std::size_t len = static_cast<std::size_t>(
      rng.range(static_cast<long>(spec.utt_phonemes_min),
                static_cast<long>(spec.utt_phonemes_max)));
  for (std::size_t i = 0; i < len; ++i) {
    int ph = static_cast<int>(rng.below(coverage));
    std::size_t dur = static_cast<std::size_t>(rng.range(
        static_cast<long>(spec.dur_min), static_cast<long>(spec.dur_max)));
    u.label.phonemes.push_back(ph);
    u.durations.push_back(dur);
    for (std::size_t d = 0; d < dur; ++d) {
      std::vector<double> frame = alphabet.prototypes[ph];
      for (double& v : frame) v += spec.noise * rng.gaussian();
      u.frames.push_back(std::move(frame));
    }
  }
  return u;
}

}  // namespace corpus_detail

// Fully deterministic given the spec (which includes the seed). Paired and
// eval utterances carry labels; unpaired utterances carry none, their truth
// goes into the sidecar table.
inline Corpus gen_corpus(const CorpusSpec& spec) {
  spec.validate();
  Corpus corpus;
  corpus.spec = spec;
  corpus.alphabet = PhonemeAlphabet::make(spec.alphabet_size, spec.feat_dim,
                                          spec.margin, derive_seed(spec.seed, "alphabet"));

  auto fill_split = [&](std::vector<Utterance>& out, const char* prefix,
                        std::size_t coverage, std::size_t frame_budget,
                        std::size_t utt_budget, bool labeled, Rng& rng) {
    std::size_t frames = 0, count = 0;
    while ((frame_budget > 0 && frames < frame_budget) ||
           (frame_budget == 0 && count < utt_budget)) {
      corpus_detail::DrawnUtterance d =
          corpus_detail::draw_utterance(spec, corpus.alphabet, coverage, rng);
      Utterance u;
      u.id = prefix + std::to_string(count);
      u.frames = std::move(d.frames);
      if (labeled) u.label = d.label;
      corpus.truth[u.id] = TruthRecord{d.label, d.durations};
      frames += u.num_frames();
      ++count;
      out.push_back(std::move(u));
    }
  };

  Rng paired_rng(derive_seed(spec.seed, "paired"));
  Rng unpaired_rng(derive_seed(spec.seed, "unpaired"));
  Rng eval_rng(derive_seed(spec.seed, "eval"));
  fill_split(corpus.paired, "p", spec.paired_phonemes, spec.paired_frames, 0, true,
             paired_rng);
  fill_split(corpus.unpaired, "u", spec.unpaired_phonemes, spec.unpaired_frames, 0,
             false, unpaired_rng);
  fill_split(corpus.eval_set, "e", spec.unpaired_phonemes, 0, spec.eval_utterances,
             true, eval_rng);
  return corpus;
}

// Simulated ASR transcript: each position is independently substituted,
// deleted, or followed by an insertion, each with probability
// error_rate / 3. Deterministic per seed.
inline LabelSequence pseudo_label(const LabelSequence& truth, double error_rate,
                                  std::uint64_t seed, std::size_t alphabet) {
  if (error_rate < 0.0 || error_rate >= 1.0)
    throw std::invalid_argument("pseudo_label: error_rate must be in [0, 1)");
  Rng rng(seed);
  LabelSequence out;
  out.source = LabelSource::kPseudo;
  for (int ph : truth.phonemes) {
    double r = rng.uniform();
    if (r < error_rate / 3.0) {
      // substitution: any other phoneme
      int sub = static_cast<int>(rng.below(alphabet - 1));
      if (sub >= ph) ++sub;
      out.phonemes.push_back(sub);
    } else if (r < 2.0 * error_rate / 3.0) {
      // deletion
    } else if (r < error_rate) {
      // insertion after the true symbol
      out.phonemes.push_back(ph);
      out.phonemes.push_back(static_cast<int>(rng.below(alphabet)));
    } else {
      out.phonemes.push_back(ph);
    }
  }
  return out;
}

}  // namespace dynavq

#endif  // DYNAVQ_CORPUS_HPP_

// include/dynavq/codebook.hpp
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

#ifndef DYNAVQ_CODEBOOK_HPP_
#define DYNAVQ_CODEBOOK_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dynavq/adam.hpp"
#include "dynavq/label.hpp"
#include "dynavq/rng.hpp"
#include "dynavq/serialize.hpp"
#include "dynavq/tape.hpp"
#include "dynavq/tensor.hpp"

namespace dynavq {

enum class Origin : std::uint8_t {
  kSeed = 0,
  kPairedLearned = 1,
  kUnpairedAdded = 2,
};

enum class GrowthTrigger : std::uint8_t {
  kSeedInit = 0,
  kLowPosteriorAdd = 1,
};

struct GrowthEvent {
  std::int64_t step;
  std::size_t entry;
  GrowthTrigger trigger;
};

// Posterior of one frame latent over the codebook entries.
struct Posterior {
  std::vector<double> probs;
  double temperature = 1.0;

  std::size_t argmax() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < probs.size(); ++i)
      if (probs[i] > probs[best]) best = i;  // ties keep the lowest index
    return best;
  }
  double max() const { return probs[argmax()]; }
};

enum class UpdateDecision : std::uint8_t { kAdded = 0, kRefined = 1, kDropped = 2 };

struct FrameDecision {
  UpdateDecision decision;
  std::size_t entry;     // added entry or the winning entry
  double p_hat;          // max sharpened posterior
  bool label_modified;   // refinements only
};

struct UpdateReport {
  std::size_t added = 0;
  std::size_t refined = 0;
  std::size_t dropped = 0;
  std::vector<FrameDecision> frames;
};

// The dynamic codebook. Entries are trainable parameters; growth appends
// entries and never removes them, so indices are stable for the lifetime
// of a training run. Single writer; concurrent reads are safe between
// updates.
class Codebook {
 public:
  static constexpr double kDedupDistance = 1e-6;

  explicit Codebook(std::size_t dim) : dim_(dim) {
    if (dim == 0) throw std::invalid_argument("Codebook: dimension must be > 0");
  }

  // K seed entries drawn from a unit Gaussian.
  static Codebook seeded(std::size_t n_seed, std::size_t dim, std::uint64_t seed) {
    Codebook book(dim);
    Rng rng(seed);
    for (std::size_t i = 0; i < n_seed; ++i) {
      std::vector<double> v(dim);
      for (double& x : v) x = rng.gaussian();
      book.add_entry(std::move(v), Origin::kSeed, 0, GrowthTrigger::kSeedInit);
    }
    return book;
  }

  std::size_t size() const { return entries_.size(); }
  std::size_t dim() const { return dim_; }

  const Tensor& entry(std::size_t i) const { return entries_.at(i).value; }
  Parameter& entry_param(std::size_t i) { return entries_.at(i); }

  int phoneme_of(std::size_t i) const { return phoneme_of_.at(i); }
  Origin origin_of(std::size_t i) const { return origin_.at(i); }
  LabelSource assignment_source(std::size_t i) const { return assign_source_.at(i); }
  bool assigned(std::size_t i) const { return phoneme_of_.at(i) >= 0; }
  const std::vector<GrowthEvent>& growth_log() const { return growth_log_; }

  std::size_t assigned_count() const {
    std::size_t n = 0;
    for (int p : phoneme_of_)
      if (p >= 0) ++n;
    return n;
  }

  // Distinct phonemes with at least one assigned entry.
  std::vector<int> covered_phonemes() const {
    std::vector<int> out;
    for (int p : phoneme_of_)
      if (p >= 0 && std::find(out.begin(), out.end(), p) == out.end())
        out.push_back(p);
    std::sort(out.begin(), out.end());
    return out;
  }

  std::size_t add_entry(std::vector<double> v, Origin origin, std::int64_t step,
                        GrowthTrigger trigger) {
    if (v.size() != dim_)
      throw std::invalid_argument("Codebook::add_entry: dimension mismatch");
    std::size_t idx = entries_.size();
    entries_.emplace_back("codebook." + std::to_string(idx),
                          Tensor({dim_}, std::move(v)));
    phoneme_of_.push_back(-1);
    origin_.push_back(origin);
    assign_source_.push_back(LabelSource::kPseudo);
    align_counts_.emplace_back();
    growth_log_.push_back({step, idx, trigger});
    return idx;
  }

  // ---- quantization --------------------------------------------------------

  // Index of the entry with minimal squared L2 distance; ties break to the
  // lowest index.
  std::size_t nearest(std::span<const double> z) const {
    require_frame(z);
    if (entries_.empty()) throw std::runtime_error("Codebook::nearest: empty codebook");
    std::size_t best = 0;
    double best_d = sq_distance(z, 0);
    for (std::size_t i = 1; i < entries_.size(); ++i) {
      double d = sq_distance(z, i);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    return best;
  }

  // P(b_i | z) = softmax over entries of -||z - b_i|| / tau. The exponent
  // uses the plain L2 norm; set squared for the squared-distance variant.
  Posterior posterior(std::span<const double> z, double tau,
                      bool squared = false) const {
    require_frame(z);
    if (entries_.empty())
      throw std::runtime_error("Codebook::posterior: empty codebook");
    if (tau <= 0.0) throw std::invalid_argument("Codebook::posterior: tau must be > 0");
    Posterior post;
    post.temperature = tau;
    post.probs.resize(entries_.size());
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      double d = sq_distance(z, i);
      post.probs[i] = -(squared ? d : std::sqrt(d)) / tau;
    }
    softmax_in_place(post.probs);
    return post;
  }

  // ---- Alg.-style codebook update over one unpaired utterance ---------------
  //
  // Per frame, against the codebook as grown so far in this call:
  //   max sharpened posterior < delta_low   -> append the frame as a new entry
  //   max sharpened posterior > delta_high  -> refine the pseudo label at the
  //                                            frame's position
  //   otherwise                             -> drop the frame
  //
  // Refinement overwrites the pseudo phoneme aligned to this frame with the
  // winning entry's phoneme only when that assignment came from ground-truth
  // labels; otherwise the event is recorded without modification. Frames are
  // mapped to pseudo-label positions length-proportionally.
  UpdateReport dynamic_update(const std::vector<std::vector<double>>& frames,
                              LabelSequence& pseudo, double delta_low,
                              double delta_high, double tau, std::int64_t step) {
    if (!(delta_low >= 0.0 && delta_low < delta_high && delta_high <= 1.0))
      throw std::invalid_argument(
          "dynamic_update: thresholds must satisfy 0 <= delta_low < delta_high <= 1");
    UpdateReport report;
    report.frames.reserve(frames.size());
    const std::size_t t_total = frames.size();
    for (std::size_t t = 0; t < t_total; ++t) {
      const auto& z = frames[t];
      Posterior post = posterior(z, tau);
      std::size_t win = post.argmax();
      double p_hat = post.probs[win];
      if (p_hat < delta_low) {
        // duplicate guard, reachable only with degenerate temperatures
        if (std::sqrt(sq_distance(z, nearest(z))) < kDedupDistance) {
          report.dropped++;
          report.frames.push_back({UpdateDecision::kDropped, win, p_hat, false});
          continue;
        }
        std::size_t idx = add_entry(std::vector<double>(z.begin(), z.end()),
                                    Origin::kUnpairedAdded, step,
                                    GrowthTrigger::kLowPosteriorAdd);
        report.added++;
        report.frames.push_back({UpdateDecision::kAdded, idx, p_hat, false});
      } else if (p_hat > delta_high) {
        bool modified = false;
        if (assigned(win) && assign_source_[win] == LabelSource::kGroundTruth &&
            !pseudo.empty()) {
          std::size_t pos = t * pseudo.size() / t_total;
          if (pseudo.phonemes[pos] != phoneme_of_[win]) {
            pseudo.phonemes[pos] = phoneme_of_[win];
            modified = true;
          }
        }
        report.refined++;
        report.frames.push_back({UpdateDecision::kRefined, win, p_hat, modified});
      } else {
        report.dropped++;
        report.frames.push_back({UpdateDecision::kDropped, win, p_hat, false});
      }
    }
    return report;
  }

  // ---- codeword -> phoneme mapping ------------------------------------------

  // Alignment evidence: per-frame (entry index, phoneme) pairs. Counts are
  // cumulative across calls. Unassigned entries receive their most frequent
  // phoneme; ground-truth evidence upgrades pseudo assignments but a
  // ground-truth assignment is immutable afterwards.
  void assign_phonemes(const std::vector<std::pair<std::size_t, int>>& alignments,
                       LabelSource source) {
    for (const auto& [entry, phoneme] : alignments) {
      if (entry >= entries_.size())
        throw std::invalid_argument("assign_phonemes: entry index out of range");
      if (phoneme < 0)
        throw std::invalid_argument("assign_phonemes: invalid phoneme id");
      auto& counts = align_counts_[entry];
      auto& slot = counts[phoneme];
      if (source == LabelSource::kGroundTruth)
        slot.first += 1;
      else
        slot.second += 1;
    }
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      bool gt_assigned =
          assigned(i) && assign_source_[i] == LabelSource::kGroundTruth;
      if (gt_assigned) continue;
      if (assigned(i) && source == LabelSource::kPseudo) continue;
      int best = majority_phoneme(i, source);
      if (best < 0) continue;
      phoneme_of_[i] = best;
      assign_source_[i] = source;
      if (source == LabelSource::kGroundTruth && origin_[i] == Origin::kSeed)
        origin_[i] = Origin::kPairedLearned;
    }
  }

  // Per-phoneme representative entries. Errors on a phoneme with no
  // assigned entry; among several, picks the most frequently aligned
  // (ties to the lowest index).
  std::vector<std::size_t> lookup_phoneme_codewords(
      const std::vector<int>& phonemes) const {
    std::vector<std::size_t> out;
    out.reserve(phonemes.size());
    for (int ph : phonemes) out.push_back(entry_for_phoneme(ph));
    return out;
  }

  std::size_t entry_for_phoneme(int phoneme) const {
    long best = -1;
    long best_count = -1;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (phoneme_of_[i] != phoneme) continue;
      long c = total_count(i, phoneme);
      if (c > best_count) {
        best_count = c;
        best = static_cast<long>(i);
      }
    }
    if (best < 0)
      throw std::runtime_error("no codeword assigned to phoneme '" +
                               phoneme_name(phoneme) + "'");
    return static_cast<std::size_t>(best);
  }

  bool phoneme_mapped(int phoneme) const {
    for (std::size_t i = 0; i < entries_.size(); ++i)
      if (phoneme_of_[i] == phoneme) return true;
    return false;
  }

  bool label_mapped(const LabelSequence& l) const {
    for (int p : l.phonemes)
      if (!phoneme_mapped(p)) return false;
    return true;
  }

  // ---- tape integration ------------------------------------------------------

  // Stack the current entries as one tracked (N x D) matrix. Row i is
  // entry i; gradients accumulated on the stack map back per entry via
  // the Row/StackRows backward rules.
  Var entries_on_tape(Tape& tape) {
    std::vector<Var> rows;
    rows.reserve(entries_.size());
    for (auto& p : entries_) rows.push_back(tape.leaf(p.value));
    entry_vars_ = rows;
    return tape.stack_rows(rows);
  }

  const std::vector<Var>& entry_vars() const { return entry_vars_; }

  // ---- serialization ----------------------------------------------------------
  //
  // Flat binary layout, little endian:
  //   magic   "DVQB"
  //   u32     format version (1)
  //   u64     N entries, u64 D dimension
  //   N x  [ D x f64 codeword | i32 phoneme id (-1 if unassigned) | u8 origin ]
  //   u64     G growth events
  //   G x  [ u64 training step | u64 entry index | u8 trigger ]

  std::string serialize() const {
    std::string out;
    out += "DVQB";
    put_u32_le(out, 1);
    put_u64_le(out, entries_.size());
    put_u64_le(out, dim_);
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      for (double v : entries_[i].value.data) put_f64_le(out, v);
      put_i32_le(out, phoneme_of_[i]);
      put_u8(out, static_cast<std::uint8_t>(origin_[i]));
    }
    put_u64_le(out, growth_log_.size());
    for (const auto& ev : growth_log_) {
      put_u64_le(out, static_cast<std::uint64_t>(ev.step));
      put_u64_le(out, ev.entry);
      put_u8(out, static_cast<std::uint8_t>(ev.trigger));
    }
    return out;
  }

  static Codebook deserialize(const std::string& bytes) {
    ByteReader r(bytes);
    if (r.raw(4) != "DVQB") throw std::runtime_error("codebook: bad magic");
    std::uint32_t version = r.u32_le();
    if (version != 1) throw std::runtime_error("codebook: unsupported version");
    std::uint64_t n = r.u64_le();
    std::uint64_t d = r.u64_le();
    Codebook book(d);
    for (std::uint64_t i = 0; i < n; ++i) {
      std::vector<double> v(d);
      for (double& x : v) x = r.f64_le();
      std::int32_t ph = r.i32_le();
      Origin origin = static_cast<Origin>(r.u8());
      book.add_entry(std::move(v), origin, 0, GrowthTrigger::kSeedInit);
      book.phoneme_of_[i] = ph;
      if (ph >= 0)
        book.assign_source_[i] = origin == Origin::kUnpairedAdded
                                     ? LabelSource::kPseudo
                                     : LabelSource::kGroundTruth;
    }
    book.growth_log_.clear();
    std::uint64_t g = r.u64_le();
    for (std::uint64_t i = 0; i < g; ++i) {
      std::int64_t step = static_cast<std::int64_t>(r.u64_le());
      std::uint64_t entry = r.u64_le();
      GrowthTrigger trig = static_cast<GrowthTrigger>(r.u8());
      if (entry >= n) throw std::runtime_error("codebook: growth log index out of range");
      book.growth_log_.push_back({step, entry, trig});
    }
    return book;
  }

  // Alignment counts and assignment sources are run state, not part of the
  // interchange format; the checkpoint stores them alongside the codebook
  // bytes and restores them through these accessors.
  using AlignCounts = std::vector<std::map<int, std::pair<long, long>>>;
  const AlignCounts& align_counts() const { return align_counts_; }
  void restore_run_state(AlignCounts counts, std::vector<LabelSource> sources) {
    if (counts.size() != entries_.size() || sources.size() != entries_.size())
      throw std::invalid_argument("restore_run_state: size mismatch");
    align_counts_ = std::move(counts);
    assign_source_ = std::move(sources);
  }

 private:
  std::size_t dim_;
  std::vector<Parameter> entries_;
  std::vector<int> phoneme_of_;
  std::vector<Origin> origin_;
  std::vector<LabelSource> assign_source_;
  // per entry: phoneme -> (ground-truth count, pseudo count)
  std::vector<std::map<int, std::pair<long, long>>> align_counts_;
  std::vector<GrowthEvent> growth_log_;
  std::vector<Var> entry_vars_;

  void require_frame(std::span<const double> z) const {
    if (z.size() != dim_)
      throw std::invalid_argument("Codebook: latent dimension mismatch");
  }

  double sq_distance(std::span<const double> z, std::size_t i) const {
    const Tensor& b = entries_[i].value;
    double s = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) {
      double d = z[j] - b.data[j];
      s += d * d;
    }
    return s;
  }

  static void softmax_in_place(std::vector<double>& scores) {
    double mx = *std::max_element(scores.begin(), scores.end());
    double z = 0.0;
    for (double& v : scores) {
      v = std::exp(v - mx);
      z += v;
    }
    for (double& v : scores) v /= z;
  }

  long total_count(std::size_t entry, int phoneme) const {
    auto it = align_counts_[entry].find(phoneme);
    if (it == align_counts_[entry].end()) return 0;
    return it->second.first + it->second.second;
  }

  int majority_phoneme(std::size_t entry, LabelSource source) const {
    int best = -1;
    long best_count = 0;
    for (const auto& [ph, cnt] : align_counts_[entry]) {
      long c = source == LabelSource::kGroundTruth ? cnt.first : cnt.second;
      if (c > best_count) {
        best_count = c;
        best = ph;
      }
    }
    return best;
  }
};

// Differentiable posterior of one frame latent against a stacked codebook
// matrix (rows are entries). The forward value matches Codebook::posterior
// on the same numbers; gradients flow to both the latent and the entries.
inline Var posterior_op(Tape& tape, Var z, Var book, double tau,
                        bool squared = false) {
  const Tensor& vz = tape.val(z);
  const Tensor& vb = tape.val(book);
  if (vz.rank() != 1 || vb.rank() != 2 || vb.cols() != vz.numel())
    throw std::invalid_argument("posterior_op: shape mismatch");
  if (tau <= 0.0) throw std::invalid_argument("posterior_op: tau must be > 0");
  const std::size_t n = vb.rows(), d = vb.cols();

  std::vector<double> dist(n);  // L2 norm (or squared distance)
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      double diff = vz.at(j) - vb.at(i, j);
      s += diff * diff;
    }
    dist[i] = squared ? s : std::sqrt(s);
  }
  std::vector<double> probs(n);
  for (std::size_t i = 0; i < n; ++i) probs[i] = -dist[i] / tau;
  double mx = *std::max_element(probs.begin(), probs.end());
  double zsum = 0.0;
  for (double& v : probs) {
    v = std::exp(v - mx);
    zsum += v;
  }
  for (double& v : probs) v /= zsum;

  Tensor value({n}, std::vector<double>(probs));
  return tape.custom(
      std::move(value), {z, book},
      [dist = std::move(dist), probs = std::move(probs), tau, squared, n,
       d](Tape& t, const Tensor& g, const std::vector<Var>& ins) {
        const Tensor& zval = t.val(ins[0]);
        const Tensor& bval = t.val(ins[1]);
        double gdotp = 0.0;
        for (std::size_t i = 0; i < n; ++i) gdotp += g.at(i) * probs[i];
        Tensor gz = Tensor::zeros({d});
        Tensor gb = Tensor::zeros({n, d});
        for (std::size_t i = 0; i < n; ++i) {
          double gscore = probs[i] * (g.at(i) - gdotp);  // softmax backward
          double gdist = -gscore / tau;
          double coef;
          if (squared) {
            coef = 2.0 * gdist;
          } else {
            if (dist[i] <= 0.0) continue;  // derivative left at 0 on a codeword
            coef = gdist / dist[i];
          }
          for (std::size_t j = 0; j < d; ++j) {
            double diff = zval.at(j) - bval.at(i, j);
            gz.at(j) += coef * diff;
            gb.at(i, j) -= coef * diff;
          }
        }
        t.accumulate_grad(ins[0], gz);
        t.accumulate_grad(ins[1], gb);
      });
}

}  // namespace dynavq

#endif  // DYNAVQ_CODEBOOK_HPP_

// include/dynavq/ctc.hpp
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

#ifndef DYNAVQ_CTC_HPP_
#define DYNAVQ_CTC_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dynavq/codebook.hpp"
#include "dynavq/label.hpp"
#include "dynavq/tape.hpp"
#include "dynavq/tensor.hpp"

namespace dynavq {

// Frame-level phoneme probabilities: T rows over the alphabet plus a final
// blank column, each row summing to 1.
struct FramePosteriorGrid {
  Tensor probs;            // T x (alphabet + 1)
  std::size_t alphabet;    // blank sits at column `alphabet`

  std::size_t frames() const { return probs.rows(); }
  std::size_t blank() const { return alphabet; }
};

namespace ctc_detail {

constexpr double kLogZero = -std::numeric_limits<double>::infinity();
constexpr double kProbFloor = 1e-30;
constexpr double kMaxAbsGrad = 1e6;

inline double lse(double a, double b) {
  if (a == kLogZero) return b;
  if (b == kLogZero) return a;
  double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

inline double log_prob(double y) { return std::log(std::max(y, kProbFloor)); }

// Extended label: blanks interleaved around every target symbol.
inline std::vector<int> extend_target(const std::vector<int>& target, int blank) {
  std::vector<int> ext(2 * target.size() + 1, blank);
  for (std::size_t i = 0; i < target.size(); ++i) ext[2 * i + 1] = target[i];
  return ext;
}

}  // namespace ctc_detail

// Fewest frames that can realize the target: one per symbol plus one blank
// between equal neighbors.
inline std::size_t ctc_min_frames(const std::vector<int>& target) {
  std::size_t n = target.size();
  for (std::size_t i = 1; i < target.size(); ++i)
    if (target[i] == target[i - 1]) ++n;
  return n;
}

// -log P(target | grid), summing over all frame alignments that collapse to
// the target. Log-space forward recursion; optional per-cell alpha output
// for the gradient path.
inline double ctc_loss_value(const FramePosteriorGrid& grid,
                             const std::vector<int>& target,
                             std::vector<double>* alphas_out = nullptr) {
  using namespace ctc_detail;
  const std::size_t t_len = grid.frames();
  const int blank = static_cast<int>(grid.blank());
  for (int p : target)
    if (p < 0 || p >= blank)
      throw std::invalid_argument("ctc_loss: target symbol outside the alphabet");
  if (t_len < ctc_min_frames(target))
    throw std::runtime_error("ctc_loss: target of length " +
                             std::to_string(target.size()) +
                             " is not alignable within " + std::to_string(t_len) +
                             " frames");

  const std::vector<int> ext = extend_target(target, blank);
  const std::size_t u = ext.size();
  std::vector<double> la(t_len * u, kLogZero);
  auto ly = [&](std::size_t t, int sym) {
    return log_prob(grid.probs.at(t, static_cast<std::size_t>(sym)));
  };

  la[0] = ly(0, ext[0]);
  if (u > 1) la[1] = ly(0, ext[1]);
  for (std::size_t t = 1; t < t_len; ++t) {
    for (std::size_t s = 0; s < u; ++s) {
      double acc = la[(t - 1) * u + s];
      if (s >= 1) acc = lse(acc, la[(t - 1) * u + s - 1]);
      if (s >= 2 && ext[s] != blank && ext[s] != ext[s - 2])
        acc = lse(acc, la[(t - 1) * u + s - 2]);
      la[t * u + s] = acc == kLogZero ? kLogZero : acc + ly(t, ext[s]);
    }
  }
  double lp = la[(t_len - 1) * u + u - 1];
  if (u > 1) lp = lse(lp, la[(t_len - 1) * u + u - 2]);
  if (alphas_out) *alphas_out = std::move(la);
  return -lp;
}

// Gradient of ctc_loss_value w.r.t. every grid probability.
inline Tensor ctc_loss_grad(const FramePosteriorGrid& grid,
                            const std::vector<int>& target) {
  using namespace ctc_detail;
  std::vector<double> la;
  double loss = ctc_loss_value(grid, target, &la);
  double lp = -loss;

  const std::size_t t_len = grid.frames();
  const int blank = static_cast<int>(grid.blank());
  const std::vector<int> ext = extend_target(target, blank);
  const std::size_t u = ext.size();
  auto ly = [&](std::size_t t, int sym) {
    return log_prob(grid.probs.at(t, static_cast<std::size_t>(sym)));
  };

  std::vector<double> lb(t_len * u, kLogZero);
  lb[(t_len - 1) * u + u - 1] = ly(t_len - 1, ext[u - 1]);
  if (u > 1) lb[(t_len - 1) * u + u - 2] = ly(t_len - 1, ext[u - 2]);
  for (std::size_t t = t_len - 1; t-- > 0;) {
    for (std::size_t s = 0; s < u; ++s) {
      double acc = lb[(t + 1) * u + s];
      if (s + 1 < u) acc = lse(acc, lb[(t + 1) * u + s + 1]);
      if (s + 2 < u && ext[s + 2] != blank && ext[s + 2] != ext[s])
        acc = lse(acc, lb[(t + 1) * u + s + 2]);
      lb[t * u + s] = acc == kLogZero ? kLogZero : acc + ly(t, ext[s]);
    }
  }

  Tensor grad = Tensor::zeros(grid.probs.shape);
  if (lp == kLogZero) return grad;  // no mass on the target; flat region
  const std::size_t cols = grid.probs.cols();
  std::vector<double> acc(cols);
  for (std::size_t t = 0; t < t_len; ++t) {
    std::fill(acc.begin(), acc.end(), kLogZero);
    for (std::size_t s = 0; s < u; ++s) {
      double v = la[t * u + s] + lb[t * u + s];
      if (v == kLogZero) continue;
      auto k = static_cast<std::size_t>(ext[s]);
      acc[k] = lse(acc[k], v);
    }
    for (std::size_t k = 0; k < cols; ++k) {
      if (acc[k] == kLogZero) continue;
      double lg = acc[k] - lp - 2.0 * log_prob(grid.probs.at(t, k));
      double g = -std::exp(lg);
      grad.at(t, k) = std::clamp(g, -kMaxAbsGrad, kMaxAbsGrad);
    }
  }
  return grad;
}

// Tape node for the CTC loss; differentiable back through the grid.
inline Var ctc_loss_op(Tape& tape, Var grid_var, std::size_t alphabet,
                       const std::vector<int>& target) {
  FramePosteriorGrid grid{tape.val(grid_var), alphabet};
  double loss = ctc_loss_value(grid, target);
  std::vector<int> tgt = target;
  return tape.custom(
      Tensor::scalar(loss), {grid_var},
      [tgt, alphabet](Tape& t, const Tensor& g, const std::vector<Var>& ins) {
        FramePosteriorGrid grd{t.val(ins[0]), alphabet};
        Tensor gg = ctc_loss_grad(grd, tgt);
        double up = g.at(0);
        for (double& v : gg.data) v *= up;
        t.accumulate_grad(ins[0], gg);
      });
}

// Per-frame argmax (ties to the lowest symbol index) and its CTC collapse:
// merge repeats, then drop blanks.
inline std::pair<std::vector<int>, std::vector<int>> best_path(
    const FramePosteriorGrid& grid) {
  std::vector<int> framewise;
  framewise.reserve(grid.frames());
  for (std::size_t t = 0; t < grid.frames(); ++t) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < grid.probs.cols(); ++k)
      if (grid.probs.at(t, k) > grid.probs.at(t, best)) best = k;
    framewise.push_back(static_cast<int>(best));
  }
  std::vector<int> collapsed;
  int blank = static_cast<int>(grid.blank());
  int prev = -1;
  for (int v : framewise) {
    if (v != prev && v != blank) collapsed.push_back(v);
    prev = v;
  }
  return {framewise, collapsed};
}

// Plain product of per-frame probabilities of a frame-level symbol sequence;
// the degenerate S = T case with no alignment sum.
inline double frame_sequence_probability(const FramePosteriorGrid& grid,
                                         const std::vector<int>& framewise) {
  if (framewise.size() != grid.frames())
    throw std::invalid_argument("frame_sequence_probability: length mismatch");
  double p = 1.0;
  for (std::size_t t = 0; t < framewise.size(); ++t)
    p *= grid.probs.at(t, static_cast<std::size_t>(framewise[t]));
  return p;
}

// ---- codeword posterior -> phoneme grid -------------------------------------

// Entry mass routes to the entry's assigned phoneme; unassigned mass goes to
// blank. Rows renormalized to 1.
inline FramePosteriorGrid project_to_phonemes(
    const std::vector<Posterior>& posteriors, const Codebook& book,
    std::size_t alphabet) {
  if (posteriors.empty())
    throw std::invalid_argument("project_to_phonemes: empty posterior sequence");
  FramePosteriorGrid grid;
  grid.alphabet = alphabet;
  grid.probs = Tensor::zeros({posteriors.size(), alphabet + 1});
  for (std::size_t t = 0; t < posteriors.size(); ++t) {
    const auto& probs = posteriors[t].probs;
    if (probs.size() != book.size())
      throw std::invalid_argument("project_to_phonemes: posterior size mismatch");
    for (std::size_t i = 0; i < probs.size(); ++i) {
      int ph = book.phoneme_of(i);
      std::size_t col = ph >= 0 ? static_cast<std::size_t>(ph) : alphabet;
      if (ph >= 0 && col >= alphabet)
        throw std::invalid_argument("project_to_phonemes: phoneme outside alphabet");
      grid.probs.at(t, col) += probs[i];
    }
    double s = 0.0;
    for (std::size_t k = 0; k <= alphabet; ++k) s += grid.probs.at(t, k);
    for (std::size_t k = 0; k <= alphabet; ++k) grid.probs.at(t, k) /= s;
  }
  return grid;
}

// Constant routing matrix for the differentiable projection: row i carries a
// single 1 in the column of entry i's phoneme (blank when unassigned).
inline Tensor phoneme_routing_matrix(const Codebook& book, std::size_t alphabet) {
  Tensor a = Tensor::zeros({book.size(), alphabet + 1});
  for (std::size_t i = 0; i < book.size(); ++i) {
    int ph = book.phoneme_of(i);
    std::size_t col = ph >= 0 ? static_cast<std::size_t>(ph) : alphabet;
    if (ph >= 0 && col >= alphabet)
      throw std::invalid_argument("phoneme_routing_matrix: phoneme outside alphabet");
    a.at(i, col) = 1.0;
  }
  return a;
}

inline Var project_to_phonemes_op(Tape& tape, Var posterior_rows,
                                  const Codebook& book, std::size_t alphabet) {
  Var routing = tape.constant(phoneme_routing_matrix(book, alphabet));
  return tape.normalize_rows(tape.matmul(posterior_rows, routing));
}

}  // namespace dynavq

#endif  // DYNAVQ_CTC_HPP_

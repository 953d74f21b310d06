// include/dynavq/segmentation.hpp
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

#ifndef DYNAVQ_SEGMENTATION_HPP_
#define DYNAVQ_SEGMENTATION_HPP_

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "dynavq/tape.hpp"
#include "dynavq/tensor.hpp"

namespace dynavq {

// One phoneme-level segment: a run of frames quantized to the same codeword.
struct Segment {
  std::vector<double> mean;  // arithmetic mean of the run's quantized latents
  std::size_t codeword;
  std::size_t begin;  // frame span [begin, end)
  std::size_t end;
};

struct SegmentSequence {
  std::vector<Segment> segments;
  std::size_t total_frames = 0;

  std::size_t size() const { return segments.size(); }

  std::vector<std::size_t> spans() const {
    std::vector<std::size_t> out;
    out.reserve(segments.size());
    for (const auto& s : segments) out.push_back(s.end - s.begin);
    return out;
  }

  std::vector<std::size_t> index_sequence() const {
    std::vector<std::size_t> out;
    out.reserve(segments.size());
    for (const auto& s : segments) out.push_back(s.codeword);
    return out;
  }
};

// Run-length structure of a codeword index sequence (no vectors attached).
inline SegmentSequence find_runs(const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw std::invalid_argument("find_runs: empty input");
  SegmentSequence seq;
  seq.total_frames = indices.size();
  std::size_t start = 0;
  for (std::size_t t = 1; t <= indices.size(); ++t) {
    if (t == indices.size() || indices[t] != indices[start]) {
      seq.segments.push_back({{}, indices[start], start, t});
      start = t;
    }
  }
  return seq;
}

// Merge runs of identical adjacent codewords into phoneme-level vectors,
// each the mean of its run. Value-level variant used outside training.
inline SegmentSequence combine(const std::vector<std::vector<double>>& quantized,
                               const std::vector<std::size_t>& indices) {
  if (quantized.size() != indices.size())
    throw std::invalid_argument("combine: length mismatch");
  SegmentSequence seq = find_runs(indices);
  const std::size_t d = quantized[0].size();
  for (auto& seg : seq.segments) {
    std::vector<double> mean(d, 0.0);
    for (std::size_t t = seg.begin; t < seg.end; ++t) {
      if (quantized[t].size() != d)
        throw std::invalid_argument("combine: ragged latent dimensions");
      for (std::size_t j = 0; j < d; ++j) mean[j] += quantized[t][j];
    }
    double inv = 1.0 / static_cast<double>(seg.end - seg.begin);
    for (double& v : mean) v *= inv;
    seg.mean = std::move(mean);
  }
  return seq;
}

// Differentiable segment mean over stacked quantized latents (T x D).
// Forward: row s is the mean of rows [begin_s, end_s). Backward: each
// member frame receives 1/runlength of the segment's upstream gradient.
inline Var segment_mean_op(Tape& tape, Var quantized, const SegmentSequence& seq) {
  const Tensor& q = tape.val(quantized);
  if (q.rank() != 2) throw std::invalid_argument("segment_mean_op: expected T x D");
  if (q.rows() != seq.total_frames)
    throw std::invalid_argument("segment_mean_op: frame count mismatch");
  const std::size_t s_count = seq.size(), d = q.cols();
  Tensor out = Tensor::zeros({s_count, d});
  for (std::size_t s = 0; s < s_count; ++s) {
    const Segment& seg = seq.segments[s];
    double inv = 1.0 / static_cast<double>(seg.end - seg.begin);
    for (std::size_t t = seg.begin; t < seg.end; ++t)
      for (std::size_t j = 0; j < d; ++j) out.at(s, j) += q.at(t, j);
    for (std::size_t j = 0; j < d; ++j) out.at(s, j) *= inv;
  }
  std::vector<Segment> segs = seq.segments;
  return tape.custom(std::move(out), {quantized},
                     [segs, d](Tape& t, const Tensor& g, const std::vector<Var>& ins) {
                       Tensor gq = Tensor::zeros(t.val(ins[0]).shape);
                       for (std::size_t s = 0; s < segs.size(); ++s) {
                         double inv = 1.0 / static_cast<double>(segs[s].end - segs[s].begin);
                         for (std::size_t f = segs[s].begin; f < segs[s].end; ++f)
                           for (std::size_t j = 0; j < d; ++j)
                             gq.at(f, j) += inv * g.at(s, j);
                       }
                       t.accumulate_grad(ins[0], gq);
                     });
}

// Repeat row i of an (S x D) matrix repeats[i] times. Backward sums the
// gradients of all copies back onto the source row.
inline Var repeat_rows_op(Tape& tape, Var m, const std::vector<std::size_t>& repeats) {
  const Tensor& vm = tape.val(m);
  if (vm.rank() != 2) throw std::invalid_argument("repeat_rows_op: expected S x D");
  if (repeats.size() != vm.rows())
    throw std::invalid_argument("repeat_rows_op: repeat count mismatch");
  std::size_t total = 0;
  for (std::size_t r : repeats) {
    if (r == 0) throw std::invalid_argument("repeat_rows_op: zero repeat");
    total += r;
  }
  const std::size_t d = vm.cols();
  Tensor out = Tensor::zeros({total, d});
  std::size_t row = 0;
  for (std::size_t s = 0; s < repeats.size(); ++s)
    for (std::size_t k = 0; k < repeats[s]; ++k, ++row)
      for (std::size_t j = 0; j < d; ++j) out.at(row, j) = vm.at(s, j);
  std::vector<std::size_t> reps = repeats;
  return tape.custom(std::move(out), {m},
                     [reps, d](Tape& t, const Tensor& g, const std::vector<Var>& ins) {
                       Tensor gm = Tensor::zeros(t.val(ins[0]).shape);
                       std::size_t row = 0;
                       for (std::size_t s = 0; s < reps.size(); ++s)
                         for (std::size_t k = 0; k < reps[s]; ++k, ++row)
                           for (std::size_t j = 0; j < d; ++j)
                             gm.at(s, j) += g.at(row, j);
                       t.accumulate_grad(ins[0], gm);
                     });
}

// Length-proportional repeats: segment i covers [i*T/S, (i+1)*T/S).
inline std::vector<std::size_t> even_repeats(std::size_t s, std::size_t t) {
  if (s == 0 || t < s)
    throw std::invalid_argument("even_repeats: need 1 <= S <= T");
  std::vector<std::size_t> out(s);
  for (std::size_t i = 0; i < s; ++i)
    out[i] = (i + 1) * t / s - i * t / s;
  return out;
}

}  // namespace dynavq

#endif  // DYNAVQ_SEGMENTATION_HPP_

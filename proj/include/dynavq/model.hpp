// include/dynavq/model.hpp
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

#ifndef DYNAVQ_MODEL_HPP_
#define DYNAVQ_MODEL_HPP_

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "dynavq/adam.hpp"
#include "dynavq/rng.hpp"
#include "dynavq/segmentation.hpp"
#include "dynavq/tape.hpp"
#include "dynavq/tensor.hpp"

namespace dynavq {

struct ModelConfig {
  std::size_t feat_dim = 8;       // input frame features
  std::size_t latent_dim = 16;    // D, equals the codebook dimension
  std::size_t conv_channels = 32;
  std::size_t conv_width = 3;     // odd
  std::size_t hidden = 32;        // recurrent width, encoder and decoder

  void validate() const {
    if (feat_dim == 0 || latent_dim == 0 || conv_channels == 0 || hidden == 0)
      throw std::invalid_argument("ModelConfig: dimensions must be positive");
    if (conv_width == 0 || conv_width % 2 == 0)
      throw std::invalid_argument("ModelConfig: conv_width must be odd");
  }
};

// 1-D convolution over time with edge-replication padding, so the output
// length equals T and a constant input stays constant across frames.
// x: (T x F), w: (C x F x k) -> (T x C)
inline Var conv1d_same_op(Tape& tape, Var x, Var w) {
  const Tensor& vx = tape.val(x);
  const Tensor& vw = tape.val(w);
  if (vx.rank() != 2 || vw.rank() != 3 || vw.shape[1] != vx.cols())
    throw std::invalid_argument("conv1d_same_op: shape mismatch");
  const std::size_t t_len = vx.rows(), f_dim = vx.cols();
  const std::size_t c_dim = vw.shape[0], k = vw.shape[2];
  if (k % 2 == 0) throw std::invalid_argument("conv1d_same_op: width must be odd");
  const long half = static_cast<long>(k / 2);

  auto clamp_t = [t_len](long t) {
    if (t < 0) return static_cast<std::size_t>(0);
    if (t >= static_cast<long>(t_len)) return t_len - 1;
    return static_cast<std::size_t>(t);
  };
  auto w_at = [f_dim, k](const Tensor& wt, std::size_t c, std::size_t f, std::size_t dt) {
    return wt.data[(c * f_dim + f) * k + dt];
  };

  Tensor out = Tensor::zeros({t_len, c_dim});
  for (std::size_t t = 0; t < t_len; ++t)
    for (std::size_t dt = 0; dt < k; ++dt) {
      std::size_t src = clamp_t(static_cast<long>(t) + static_cast<long>(dt) - half);
      for (std::size_t c = 0; c < c_dim; ++c) {
        double acc = 0.0;
        for (std::size_t f = 0; f < f_dim; ++f)
          acc += vx.at(src, f) * w_at(vw, c, f, dt);
        out.at(t, c) += acc;
      }
    }

  return tape.custom(
      std::move(out), {x, w},
      [t_len, f_dim, c_dim, k, half, clamp_t](Tape& t, const Tensor& g,
                                              const std::vector<Var>& ins) {
        const Tensor& xv = t.val(ins[0]);
        const Tensor& wv = t.val(ins[1]);
        Tensor gx = Tensor::zeros({t_len, f_dim});
        Tensor gw = Tensor::zeros({c_dim, f_dim, k});
        for (std::size_t tt = 0; tt < t_len; ++tt)
          for (std::size_t dt = 0; dt < k; ++dt) {
            std::size_t src =
                clamp_t(static_cast<long>(tt) + static_cast<long>(dt) - half);
            for (std::size_t c = 0; c < c_dim; ++c) {
              double gc = g.at(tt, c);
              if (gc == 0.0) continue;
              for (std::size_t f = 0; f < f_dim; ++f) {
                gx.at(src, f) += gc * wv.data[(c * f_dim + f) * k + dt];
                gw.data[(c * f_dim + f) * k + dt] += gc * xv.at(src, f);
              }
            }
          }
        t.accumulate_grad(ins[0], gx);
        t.accumulate_grad(ins[1], gw);
      });
}

namespace model_detail {

inline Tensor gaussian_init(std::vector<std::size_t> shape, double stddev, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.data) v = stddev * rng.gaussian();
  return t;
}

}  // namespace model_detail

// Conv -> tanh -> unidirectional recurrent layer -> linear projection to the
// latent dimension. Time length is preserved.
struct EncoderParams {
  Parameter conv_w, conv_b, w_ih, w_hh, b_h, w_out, b_out;

  static EncoderParams init(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    using model_detail::gaussian_init;
    EncoderParams p;
    double conv_std = 1.0 / std::sqrt(static_cast<double>(cfg.feat_dim * cfg.conv_width));
    p.conv_w = Parameter("enc.conv_w", gaussian_init({cfg.conv_channels, cfg.feat_dim,
                                                      cfg.conv_width},
                                                     conv_std, rng));
    p.conv_b = Parameter("enc.conv_b", Tensor::zeros({cfg.conv_channels}));
    p.w_ih = Parameter("enc.w_ih",
                       gaussian_init({cfg.conv_channels, cfg.hidden},
                                     1.0 / std::sqrt(double(cfg.conv_channels)), rng));
    p.w_hh = Parameter("enc.w_hh", gaussian_init({cfg.hidden, cfg.hidden},
                                                 0.5 / std::sqrt(double(cfg.hidden)), rng));
    p.b_h = Parameter("enc.b_h", Tensor::zeros({cfg.hidden}));
    p.w_out = Parameter("enc.w_out", gaussian_init({cfg.hidden, cfg.latent_dim},
                                                   1.0 / std::sqrt(double(cfg.hidden)), rng));
    p.b_out = Parameter("enc.b_out", Tensor::zeros({cfg.latent_dim}));
    return p;
  }

  std::vector<Parameter*> params() {
    return {&conv_w, &conv_b, &w_ih, &w_hh, &b_h, &w_out, &b_out};
  }
};

// Recurrent layer over the (upsampled) segment sequence plus a projection
// back to the frame feature dimension.
struct DecoderParams {
  Parameter w_ih, w_hh, b_h, w_out, b_out;

  static DecoderParams init(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    using model_detail::gaussian_init;
    DecoderParams p;
    p.w_ih = Parameter("dec.w_ih",
                       gaussian_init({cfg.latent_dim, cfg.hidden},
                                     1.0 / std::sqrt(double(cfg.latent_dim)), rng));
    p.w_hh = Parameter("dec.w_hh", gaussian_init({cfg.hidden, cfg.hidden},
                                                 0.5 / std::sqrt(double(cfg.hidden)), rng));
    p.b_h = Parameter("dec.b_h", Tensor::zeros({cfg.hidden}));
    p.w_out = Parameter("dec.w_out", gaussian_init({cfg.hidden, cfg.feat_dim},
                                                   1.0 / std::sqrt(double(cfg.hidden)), rng));
    p.b_out = Parameter("dec.b_out", Tensor::zeros({cfg.feat_dim}));
    return p;
  }

  std::vector<Parameter*> params() {
    return {&w_ih, &w_hh, &b_h, &w_out, &b_out};
  }
};

// Tape handles for one forward pass over the bound parameters.
struct EncoderBinding {
  Var conv_w, conv_b, w_ih, w_hh, b_h, w_out, b_out;
};
struct DecoderBinding {
  Var w_ih, w_hh, b_h, w_out, b_out;
};

inline EncoderBinding bind(Tape& tape, EncoderParams& p) {
  return {tape.leaf(p.conv_w.value), tape.leaf(p.conv_b.value),
          tape.leaf(p.w_ih.value),   tape.leaf(p.w_hh.value),
          tape.leaf(p.b_h.value),    tape.leaf(p.w_out.value),
          tape.leaf(p.b_out.value)};
}
inline DecoderBinding bind(Tape& tape, DecoderParams& p) {
  return {tape.leaf(p.w_ih.value), tape.leaf(p.w_hh.value), tape.leaf(p.b_h.value),
          tape.leaf(p.w_out.value), tape.leaf(p.b_out.value)};
}

namespace model_detail {

// h_t = tanh(u_t W_ih + h_{t-1} W_hh + b); returns the stacked hidden rows.
inline Var recurrent_rows(Tape& tape, Var input_rows, Var w_ih, Var w_hh, Var b_h) {
  const std::size_t t_len = tape.val(input_rows).rows();
  const std::size_t hidden = tape.val(w_hh).rows();
  Var h = tape.constant(Tensor::zeros({hidden}));
  std::vector<Var> hs;
  hs.reserve(t_len);
  for (std::size_t t = 0; t < t_len; ++t) {
    Var u = tape.row(input_rows, t);
    Var pre = tape.add(tape.add(tape.vecmat(u, w_ih), tape.vecmat(h, w_hh)), b_h);
    h = tape.tanh(pre);
    hs.push_back(h);
  }
  return tape.stack_rows(hs);
}

}  // namespace model_detail

// X (T x F) -> frame latents (T x D), deterministic given parameters.
inline Var encode_op(Tape& tape, const Tensor& x, const EncoderBinding& enc) {
  if (x.rank() != 2 || x.rows() == 0)
    throw std::invalid_argument("encode_op: expected a nonempty T x F input");
  if (x.cols() != tape.val(enc.conv_w).shape[1])
    throw std::invalid_argument("encode_op: feature dimension mismatch");
  Var xin = tape.constant(x);
  Var conv = conv1d_same_op(tape, xin, enc.conv_w);
  conv = tape.tanh(tape.add_rowvec(conv, enc.conv_b));
  Var hmat = model_detail::recurrent_rows(tape, conv, enc.w_ih, enc.w_hh, enc.b_h);
  return tape.add_rowvec(tape.matmul(hmat, enc.w_out), enc.b_out);
}

// sequence (M x D) -> reconstructed frames (M x F)
inline Var decode_op(Tape& tape, Var seq, const DecoderBinding& dec) {
  if (tape.val(seq).rank() != 2 || tape.val(seq).rows() == 0)
    throw std::invalid_argument("decode_op: expected a nonempty M x D input");
  Var hmat = model_detail::recurrent_rows(tape, seq, dec.w_ih, dec.w_hh, dec.b_h);
  return tape.add_rowvec(tape.matmul(hmat, dec.w_out), dec.b_out);
}

// segments (S x D) upsampled by per-segment repeats, then decoded. Training
// uses true spans; synthesis uses a fixed repeat factor; scoring against a
// reference of known length uses even repetition.
inline Var decode_upsampled_op(Tape& tape, Var segments,
                               const std::vector<std::size_t>& repeats,
                               const DecoderBinding& dec) {
  return decode_op(tape, repeat_rows_op(tape, segments, repeats), dec);
}

}  // namespace dynavq

#endif  // DYNAVQ_MODEL_HPP_

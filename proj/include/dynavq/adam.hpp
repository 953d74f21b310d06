// include/dynavq/adam.hpp
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

#ifndef DYNAVQ_ADAM_HPP_
#define DYNAVQ_ADAM_HPP_

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "dynavq/tensor.hpp"

namespace dynavq {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-6;
};

// Per-parameter Adam accumulators. Moments are lazily shaped on the first
// step; the step counter increases strictly with each update.
struct AdamState {
  Tensor m;
  Tensor v;
  std::int64_t t = 0;
  AdamHyper hyper;
};

// One bias-corrected Adam update. With zero moments a zero gradient yields
// a zero step, so parameters are untouched until the first real gradient.
inline void adam_step(AdamState& state, Tensor& param, const Tensor& grad) {
  if (!param.same_shape(grad))
    throw std::invalid_argument("adam_step: param/grad shape mismatch " +
                                param.shape_str() + " vs " + grad.shape_str());
  if (state.m.data.empty()) state.m = Tensor::zeros(param.shape);
  if (state.v.data.empty()) state.v = Tensor::zeros(param.shape);
  if (!state.m.same_shape(param) || !state.v.same_shape(param))
    throw std::invalid_argument("adam_step: accumulator shape mismatch");

  const AdamHyper& h = state.hyper;
  state.t += 1;
  double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.t));
  double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < param.numel(); ++i) {
    double g = grad.data[i];
    state.m.data[i] = h.beta1 * state.m.data[i] + (1.0 - h.beta1) * g;
    state.v.data[i] = h.beta2 * state.v.data[i] + (1.0 - h.beta2) * g * g;
    double mhat = state.m.data[i] / bc1;
    double vhat = state.v.data[i] / bc2;
    param.data[i] -= h.lr * mhat / (std::sqrt(vhat) + h.eps);
  }
}

// A named trainable tensor with its optimizer slots.
struct Parameter {
  std::string name;
  Tensor value;
  AdamState opt;

  Parameter() = default;
  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)) {
    value.requires_grad = true;
  }
};

}  // namespace dynavq

#endif  // DYNAVQ_ADAM_HPP_

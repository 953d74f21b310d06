// include/dynavq/tensor.hpp
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

#ifndef DYNAVQ_TENSOR_HPP_
#define DYNAVQ_TENSOR_HPP_

#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dynavq {

// Dense row-major array of 64-bit floats. Rank 0 (scalar), 1 (vector) and
// 2 (matrix) are the only ranks the rest of the library uses.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;
  bool requires_grad = false;

  Tensor() = default;
  Tensor(std::vector<std::size_t> s, std::vector<double> d)
      : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != numel_of(shape))
      throw std::invalid_argument("Tensor: data length does not match shape");
  }

  static std::size_t numel_of(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
  }

  static Tensor zeros(std::vector<std::size_t> s) {
    std::size_t n = numel_of(s);
    return Tensor(std::move(s), std::vector<double>(n, 0.0));
  }
  static Tensor full(std::vector<std::size_t> s, double v) {
    std::size_t n = numel_of(s);
    return Tensor(std::move(s), std::vector<double>(n, v));
  }
  static Tensor scalar(double v) { return Tensor({}, {v}); }
  static Tensor vec(std::vector<double> d) {
    std::size_t n = d.size();
    return Tensor({n}, std::move(d));
  }

  std::size_t numel() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  bool is_scalar() const { return shape.empty(); }

  std::size_t rows() const {
    if (rank() != 2) throw std::invalid_argument("Tensor::rows: rank != 2");
    return shape[0];
  }
  std::size_t cols() const {
    if (rank() != 2) throw std::invalid_argument("Tensor::cols: rank != 2");
    return shape[1];
  }

  double& at(std::size_t i) { return data[i]; }
  double at(std::size_t i) const { return data[i]; }
  double& at(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  std::string shape_str() const {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape.size(); ++i)
      os << shape[i] << (i + 1 < shape.size() ? "," : "");
    os << ")";
    return os.str();
  }
};

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                a.shape_str() + " vs " + b.shape_str());
}

}  // namespace dynavq

#endif  // DYNAVQ_TENSOR_HPP_

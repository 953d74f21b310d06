// include/dynavq/tape.hpp
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

#ifndef DYNAVQ_TAPE_HPP_
#define DYNAVQ_TAPE_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dynavq/tensor.hpp"

namespace dynavq {

// Reverse-mode tape. Built fresh for every forward pass (define-by-run):
// node ids are assigned in creation order, which is already a topological
// order, so backward() is a single reverse sweep visiting each node once.
// Gradients flow only through nodes whose `track` flag is set; leaves track
// iff their Tensor carries requires_grad.
//
// Values are stored in the node at creation; Tensors on the tape are never
// mutated afterwards. Single-threaded per tape.

class Tape;

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

class Tape {
 public:
  using CustomBackward =
      std::function<void(Tape&, const Tensor& upstream, const std::vector<Var>& inputs)>;

  Tape() { nodes_.reserve(1024); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // ---- leaves -------------------------------------------------------------

  Var leaf(Tensor t) {
    bool track = t.requires_grad;
    return push(Op::kLeaf, std::move(t), {}, track);
  }
  Var constant(Tensor t) {
    t.requires_grad = false;
    return push(Op::kLeaf, std::move(t), {}, false);
  }
  Var constant(double v) { return constant(Tensor::scalar(v)); }

  // ---- elementwise --------------------------------------------------------

  Var add(Var a, Var b) {
    check_same_shape(val(a), val(b), "add");
    Tensor out = val(a);
    const Tensor& vb = val(b);
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] += vb.data[i];
    return push(Op::kAdd, std::move(out), {a, b});
  }

  Var sub(Var a, Var b) {
    check_same_shape(val(a), val(b), "sub");
    Tensor out = val(a);
    const Tensor& vb = val(b);
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] -= vb.data[i];
    return push(Op::kSub, std::move(out), {a, b});
  }

  Var mul(Var a, Var b) {
    check_same_shape(val(a), val(b), "mul");
    Tensor out = val(a);
    const Tensor& vb = val(b);
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] *= vb.data[i];
    return push(Op::kMul, std::move(out), {a, b});
  }

  Var scale(Var a, double c) {
    Tensor out = val(a);
    for (double& v : out.data) v *= c;
    Var r = push(Op::kScale, std::move(out), {a});
    nodes_[r.id].scalar_arg = c;
    return r;
  }

  Var neg(Var a) { return scale(a, -1.0); }

  Var exp(Var a) {
    Tensor out = val(a);
    for (double& v : out.data) v = std::exp(v);
    return push(Op::kExp, std::move(out), {a});
  }

  Var log(Var a) {
    Tensor out = val(a);
    for (double& v : out.data) v = std::log(v);
    return push(Op::kLog, std::move(out), {a});
  }

  Var sqrt(Var a) {
    Tensor out = val(a);
    for (double& v : out.data) v = std::sqrt(v);
    return push(Op::kSqrt, std::move(out), {a});
  }

  Var tanh(Var a) {
    Tensor out = val(a);
    for (double& v : out.data) v = std::tanh(v);
    return push(Op::kTanh, std::move(out), {a});
  }

  // ---- linear algebra -----------------------------------------------------

  // (m x k) @ (k x n) -> (m x n)
  Var matmul(Var a, Var b) {
    const Tensor& va = val(a);
    const Tensor& vb = val(b);
    if (va.rank() != 2 || vb.rank() != 2 || va.cols() != vb.rows())
      throw std::invalid_argument("matmul: incompatible shapes " + va.shape_str() +
                                  " @ " + vb.shape_str());
    std::size_t m = va.rows(), k = va.cols(), n = vb.cols();
    Tensor out = Tensor::zeros({m, n});
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < k; ++p) {
        double aip = va.at(i, p);
        if (aip == 0.0) continue;
        for (std::size_t j = 0; j < n; ++j) out.at(i, j) += aip * vb.at(p, j);
      }
    return push(Op::kMatMul, std::move(out), {a, b});
  }

  // vector (k) times matrix (k x n) -> vector (n)
  Var vecmat(Var v, Var m) {
    const Tensor& vv = val(v);
    const Tensor& vm = val(m);
    if (vv.rank() != 1 || vm.rank() != 2 || vm.rows() != vv.numel())
      throw std::invalid_argument("vecmat: incompatible shapes " + vv.shape_str() +
                                  " x " + vm.shape_str());
    std::size_t k = vm.rows(), n = vm.cols();
    Tensor out = Tensor::zeros({n});
    for (std::size_t p = 0; p < k; ++p) {
      double vp = vv.at(p);
      if (vp == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) out.at(j) += vp * vm.at(p, j);
    }
    return push(Op::kVecMat, std::move(out), {v, m});
  }

  // (m x n) + broadcast row vector (n)
  Var add_rowvec(Var m, Var v) {
    const Tensor& vm = val(m);
    const Tensor& vv = val(v);
    if (vm.rank() != 2 || vv.rank() != 1 || vm.cols() != vv.numel())
      throw std::invalid_argument("add_rowvec: incompatible shapes");
    Tensor out = vm;
    for (std::size_t i = 0; i < vm.rows(); ++i)
      for (std::size_t j = 0; j < vm.cols(); ++j) out.at(i, j) += vv.at(j);
    return push(Op::kAddRowVec, std::move(out), {m, v});
  }

  // extract row i of a matrix as a vector
  Var row(Var m, std::size_t i) {
    const Tensor& vm = val(m);
    if (vm.rank() != 2 || i >= vm.rows())
      throw std::invalid_argument("row: index out of range");
    std::size_t n = vm.cols();
    Tensor out = Tensor::zeros({n});
    for (std::size_t j = 0; j < n; ++j) out.at(j) = vm.at(i, j);
    Var r = push(Op::kRow, std::move(out), {m});
    nodes_[r.id].index_arg = i;
    return r;
  }

  // stack equal-length vectors into a matrix, one per row
  Var stack_rows(const std::vector<Var>& rows) {
    if (rows.empty()) throw std::invalid_argument("stack_rows: empty input");
    std::size_t n = val(rows[0]).numel();
    Tensor out = Tensor::zeros({rows.size(), n});
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const Tensor& r = val(rows[i]);
      if (r.rank() != 1 || r.numel() != n)
        throw std::invalid_argument("stack_rows: row shape mismatch");
      for (std::size_t j = 0; j < n; ++j) out.at(i, j) = r.at(j);
    }
    return push_multi(Op::kStackRows, std::move(out), rows);
  }

  // stack scalars into a vector
  Var stack_scalars(const std::vector<Var>& xs) {
    if (xs.empty()) throw std::invalid_argument("stack_scalars: empty input");
    Tensor out = Tensor::zeros({xs.size()});
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (!val(xs[i]).is_scalar())
        throw std::invalid_argument("stack_scalars: non-scalar input");
      out.at(i) = val(xs[i]).at(0);
    }
    return push_multi(Op::kStackScalars, std::move(out), xs);
  }

  // ---- reductions ---------------------------------------------------------

  Var sum(Var a) {
    double s = 0.0;
    for (double v : val(a).data) s += v;
    return push(Op::kSum, Tensor::scalar(s), {a});
  }

  Var mean(Var a) {
    double s = 0.0;
    for (double v : val(a).data) s += v;
    return push(Op::kMean, Tensor::scalar(s / static_cast<double>(val(a).numel())), {a});
  }

  Var dot(Var a, Var b) {
    check_same_shape(val(a), val(b), "dot");
    double s = 0.0;
    const Tensor& va = val(a);
    const Tensor& vb = val(b);
    for (std::size_t i = 0; i < va.numel(); ++i) s += va.data[i] * vb.data[i];
    return push(Op::kDot, Tensor::scalar(s), {a, b});
  }

  // mean of squared differences over all entries
  Var mse(Var a, Var b) {
    Var d = sub(a, b);
    return mean(mul(d, d));
  }

  // ---- nonlinear vector ops -----------------------------------------------

  // softmax of a vector, computed with max subtraction
  Var softmax(Var a) {
    const Tensor& va = val(a);
    if (va.rank() != 1) throw std::invalid_argument("softmax: expected a vector");
    Tensor out = va;
    double mx = *std::max_element(out.data.begin(), out.data.end());
    double z = 0.0;
    for (double& v : out.data) {
      v = std::exp(v - mx);
      z += v;
    }
    for (double& v : out.data) v /= z;
    return push(Op::kSoftmax, std::move(out), {a});
  }

  // scale every row of a nonnegative matrix so it sums to 1
  Var normalize_rows(Var m) {
    const Tensor& vm = val(m);
    if (vm.rank() != 2) throw std::invalid_argument("normalize_rows: expected a matrix");
    Tensor out = vm;
    for (std::size_t i = 0; i < vm.rows(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < vm.cols(); ++j) s += vm.at(i, j);
      if (s <= 0.0) throw std::invalid_argument("normalize_rows: nonpositive row sum");
      for (std::size_t j = 0; j < vm.cols(); ++j) out.at(i, j) /= s;
    }
    return push(Op::kNormalizeRows, std::move(out), {m});
  }

  // ---- gradient routing ---------------------------------------------------

  // identity forward, zero backward
  Var stop_grad(Var a) {
    Tensor out = val(a);
    return push(Op::kStopGrad, std::move(out), {a});
  }

  // Straight-through estimator: forward value is a bit-exact copy of the
  // codeword b; the upstream gradient passes unchanged to both z and b.
  Var straight_through(Var z, Var b) {
    check_same_shape(val(z), val(b), "straight_through");
    Tensor out = val(b);
    return push(Op::kStraightThrough, std::move(out), {z, b});
  }

  // ---- custom ops ---------------------------------------------------------

  // Escape hatch for composite kernels (convolution, CTC, posterior, ...).
  // The closure receives the upstream gradient and accumulates into the
  // inputs via accumulate_grad().
  Var custom(Tensor value, const std::vector<Var>& inputs, CustomBackward bw) {
    Var r = push_multi(Op::kCustom, std::move(value), inputs);
    nodes_[r.id].custom_bw = std::move(bw);
    return r;
  }

  // ---- access ---------------------------------------------------------------

  const Tensor& val(Var v) const { return nodes_.at(check_id(v)).value; }

  bool tracked(Var v) const { return nodes_.at(check_id(v)).track; }

  bool has_grad(Var v) const {
    std::size_t id = check_id(v);
    return id < grads_.size() && !grads_[id].data.empty();
  }

  const Tensor& grad(Var v) const {
    if (!has_grad(v))
      throw std::runtime_error("grad: no gradient recorded for this node");
    return grads_[check_id(v)];
  }

  // Zero-filled gradient for nodes the sweep never reached.
  Tensor grad_or_zero(Var v) const {
    if (has_grad(v)) return grads_[check_id(v)];
    return Tensor::zeros(val(v).shape);
  }

  std::size_t size() const { return nodes_.size(); }

  void accumulate_grad(Var v, const Tensor& g) {
    std::size_t id = check_id(v);
    if (!nodes_[id].track) return;
    Tensor& slot = grad_slot(id);
    check_same_shape(slot, g, "accumulate_grad");
    for (std::size_t i = 0; i < g.numel(); ++i) slot.data[i] += g.data[i];
  }

  // ---- backward -------------------------------------------------------------

  // Reverse sweep from a scalar loss. Each node is visited exactly once, in
  // reverse creation order; re-entrant calls reset previous gradients.
  void backward(Var loss) {
    const Tensor& lv = val(loss);
    if (!lv.is_scalar()) throw std::invalid_argument("backward: loss is not scalar");
    grads_.assign(nodes_.size(), Tensor{});
    if (!nodes_[loss.id].track) return;  // loss independent of all parameters
    grad_slot(loss.id).at(0) = 1.0;
    for (int id = loss.id; id >= 0; --id) {
      Node& n = nodes_[id];
      if (!n.track || id >= static_cast<int>(grads_.size()) || grads_[id].data.empty())
        continue;
      step_backward(static_cast<std::size_t>(id));
    }
  }

 private:
  enum class Op : std::uint8_t {
    kLeaf,
    kAdd,
    kSub,
    kMul,
    kScale,
    kExp,
    kLog,
    kSqrt,
    kTanh,
    kMatMul,
    kVecMat,
    kAddRowVec,
    kRow,
    kStackRows,
    kStackScalars,
    kSum,
    kMean,
    kDot,
    kSoftmax,
    kNormalizeRows,
    kStopGrad,
    kStraightThrough,
    kCustom,
  };

  struct Node {
    Op op;
    Tensor value;
    bool track = false;
    int in0 = -1, in1 = -1;
    std::vector<Var> multi_in;  // kStackRows / kStackScalars / kCustom
    double scalar_arg = 0.0;
    std::size_t index_arg = 0;
    CustomBackward custom_bw;
  };

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;

  std::size_t check_id(Var v) const {
    if (!v.valid() || v.id >= static_cast<int>(nodes_.size()))
      throw std::invalid_argument("Tape: invalid Var");
    return static_cast<std::size_t>(v.id);
  }

  Tensor& grad_slot(std::size_t id) {
    if (grads_.size() < nodes_.size()) grads_.resize(nodes_.size());
    if (grads_[id].data.empty()) grads_[id] = Tensor::zeros(nodes_[id].value.shape);
    return grads_[id];
  }

  Var push(Op op, Tensor value, std::initializer_list<Var> ins, bool leaf_track = false) {
    Node n;
    n.op = op;
    n.value = std::move(value);
    bool track = leaf_track;
    int k = 0;
    for (Var v : ins) {
      check_id(v);
      if (op != Op::kStopGrad) track = track || nodes_[v.id].track;
      if (k == 0)
        n.in0 = v.id;
      else
        n.in1 = v.id;
      ++k;
    }
    n.track = track;
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size() - 1)};
  }

  Var push_multi(Op op, Tensor value, const std::vector<Var>& ins) {
    Node n;
    n.op = op;
    n.value = std::move(value);
    for (Var v : ins) {
      check_id(v);
      n.track = n.track || nodes_[v.id].track;
    }
    n.multi_in = ins;
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size() - 1)};
  }

  void add_to(int id, const std::vector<double>& g) {
    if (id < 0 || !nodes_[id].track) return;
    Tensor& slot = grad_slot(static_cast<std::size_t>(id));
    for (std::size_t i = 0; i < g.size(); ++i) slot.data[i] += g[i];
  }

  void add_scaled_to(int id, const Tensor& g, double c) {
    if (id < 0 || !nodes_[id].track) return;
    Tensor& slot = grad_slot(static_cast<std::size_t>(id));
    for (std::size_t i = 0; i < g.numel(); ++i) slot.data[i] += c * g.data[i];
  }

  void step_backward(std::size_t id) {
    Node& n = nodes_[id];
    const Tensor g = grads_[id];  // copy: grad_slot() may reallocate grads_
    switch (n.op) {
      case Op::kLeaf:
      case Op::kStopGrad:
        break;
      case Op::kAdd:
        add_scaled_to(n.in0, g, 1.0);
        add_scaled_to(n.in1, g, 1.0);
        break;
      case Op::kSub:
        add_scaled_to(n.in0, g, 1.0);
        add_scaled_to(n.in1, g, -1.0);
        break;
      case Op::kMul: {
        const Tensor& a = nodes_[n.in0].value;
        const Tensor& b = nodes_[n.in1].value;
        if (nodes_[n.in0].track) {
          Tensor& s = grad_slot(n.in0);
          for (std::size_t i = 0; i < g.numel(); ++i) s.data[i] += g.data[i] * b.data[i];
        }
        if (nodes_[n.in1].track) {
          Tensor& s = grad_slot(n.in1);
          for (std::size_t i = 0; i < g.numel(); ++i) s.data[i] += g.data[i] * a.data[i];
        }
        break;
      }
      case Op::kScale:
        add_scaled_to(n.in0, g, n.scalar_arg);
        break;
      case Op::kExp: {
        if (!nodes_[n.in0].track) break;
        Tensor& s = grad_slot(n.in0);
        for (std::size_t i = 0; i < g.numel(); ++i) s.data[i] += g.data[i] * n.value.data[i];
        break;
      }
      case Op::kLog: {
        if (!nodes_[n.in0].track) break;
        const Tensor& a = nodes_[n.in0].value;
        Tensor& s = grad_slot(n.in0);
        for (std::size_t i = 0; i < g.numel(); ++i) s.data[i] += g.data[i] / a.data[i];
        break;
      }
      case Op::kSqrt: {
        if (!nodes_[n.in0].track) break;
        Tensor& s = grad_slot(n.in0);
        for (std::size_t i = 0; i < g.numel(); ++i) {
          // derivative left at 0 for a zero argument
          if (n.value.data[i] > 0.0) s.data[i] += g.data[i] * 0.5 / n.value.data[i];
        }
        break;
      }
      case Op::kTanh: {
        if (!nodes_[n.in0].track) break;
        Tensor& s = grad_slot(n.in0);
        for (std::size_t i = 0; i < g.numel(); ++i)
          s.data[i] += g.data[i] * (1.0 - n.value.data[i] * n.value.data[i]);
        break;
      }
      case Op::kMatMul: {
        const Tensor& a = nodes_[n.in0].value;
        const Tensor& b = nodes_[n.in1].value;
        std::size_t m = a.rows(), k = a.cols(), cols = b.cols();
        if (nodes_[n.in0].track) {
          Tensor& s = grad_slot(n.in0);  // g @ B^T
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < cols; ++j) {
              double gij = g.at(i, j);
              if (gij == 0.0) continue;
              for (std::size_t p = 0; p < k; ++p) s.at(i, p) += gij * b.at(p, j);
            }
        }
        if (nodes_[n.in1].track) {
          Tensor& s = grad_slot(n.in1);  // A^T @ g
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
              double aip = a.at(i, p);
              if (aip == 0.0) continue;
              for (std::size_t j = 0; j < cols; ++j) s.at(p, j) += aip * g.at(i, j);
            }
        }
        break;
      }
      case Op::kVecMat: {
        const Tensor& v = nodes_[n.in0].value;
        const Tensor& m = nodes_[n.in1].value;
        std::size_t k = m.rows(), cols = m.cols();
        if (nodes_[n.in0].track) {
          Tensor& s = grad_slot(n.in0);  // g @ M^T
          for (std::size_t p = 0; p < k; ++p) {
            double acc = 0.0;
            for (std::size_t j = 0; j < cols; ++j) acc += g.at(j) * m.at(p, j);
            s.at(p) += acc;
          }
        }
        if (nodes_[n.in1].track) {
          Tensor& s = grad_slot(n.in1);  // outer(v, g)
          for (std::size_t p = 0; p < k; ++p) {
            double vp = v.at(p);
            if (vp == 0.0) continue;
            for (std::size_t j = 0; j < cols; ++j) s.at(p, j) += vp * g.at(j);
          }
        }
        break;
      }
      case Op::kAddRowVec: {
        add_scaled_to(n.in0, g, 1.0);
        if (nodes_[n.in1].track) {
          Tensor& s = grad_slot(n.in1);
          for (std::size_t i = 0; i < g.rows(); ++i)
            for (std::size_t j = 0; j < g.cols(); ++j) s.at(j) += g.at(i, j);
        }
        break;
      }
      case Op::kRow: {
        if (!nodes_[n.in0].track) break;
        Tensor& s = grad_slot(n.in0);
        std::size_t i = n.index_arg;
        for (std::size_t j = 0; j < g.numel(); ++j) s.at(i, j) += g.at(j);
        break;
      }
      case Op::kStackRows: {
        for (std::size_t i = 0; i < n.multi_in.size(); ++i) {
          int src = n.multi_in[i].id;
          if (!nodes_[src].track) continue;
          Tensor& s = grad_slot(src);
          for (std::size_t j = 0; j < g.cols(); ++j) s.at(j) += g.at(i, j);
        }
        break;
      }
      case Op::kStackScalars: {
        for (std::size_t i = 0; i < n.multi_in.size(); ++i) {
          int src = n.multi_in[i].id;
          if (!nodes_[src].track) continue;
          grad_slot(src).at(0) += g.at(i);
        }
        break;
      }
      case Op::kSum:
        if (nodes_[n.in0].track) {
          Tensor& s = grad_slot(n.in0);
          for (double& v : s.data) v += g.at(0);
        }
        break;
      case Op::kMean:
        if (nodes_[n.in0].track) {
          Tensor& s = grad_slot(n.in0);
          double c = g.at(0) / static_cast<double>(s.numel());
          for (double& v : s.data) v += c;
        }
        break;
      case Op::kDot: {
        const Tensor& a = nodes_[n.in0].value;
        const Tensor& b = nodes_[n.in1].value;
        add_scaled_to(n.in0, b, g.at(0));
        add_scaled_to(n.in1, a, g.at(0));
        break;
      }
      case Op::kSoftmax: {
        if (!nodes_[n.in0].track) break;
        const Tensor& y = n.value;
        double gy = 0.0;
        for (std::size_t i = 0; i < y.numel(); ++i) gy += g.data[i] * y.data[i];
        Tensor& s = grad_slot(n.in0);
        for (std::size_t i = 0; i < y.numel(); ++i)
          s.data[i] += y.data[i] * (g.data[i] - gy);
        break;
      }
      case Op::kNormalizeRows: {
        if (!nodes_[n.in0].track) break;
        const Tensor& x = nodes_[n.in0].value;
        const Tensor& y = n.value;
        Tensor& s = grad_slot(n.in0);
        for (std::size_t i = 0; i < x.rows(); ++i) {
          double rs = 0.0, gy = 0.0;
          for (std::size_t j = 0; j < x.cols(); ++j) {
            rs += x.at(i, j);
            gy += g.at(i, j) * y.at(i, j);
          }
          for (std::size_t j = 0; j < x.cols(); ++j)
            s.at(i, j) += (g.at(i, j) - gy) / rs;
        }
        break;
      }
      case Op::kStraightThrough:
        add_scaled_to(n.in0, g, 1.0);
        add_scaled_to(n.in1, g, 1.0);
        break;
      case Op::kCustom:
        if (n.custom_bw) n.custom_bw(*this, g, n.multi_in);
        break;
    }
  }
};

// Central finite-difference check of a scalar-valued differentiable function
// against its tape gradient. Returns max over coordinates of
// |analytic - central difference| / max(1, |analytic|).
inline double grad_check(const std::function<Var(Tape&, Var)>& f, const Tensor& x,
                         double step) {
  if (step <= 0.0) throw std::invalid_argument("grad_check: step must be > 0");

  Tensor x0 = x;
  x0.requires_grad = true;
  Tape tape;
  Var in = tape.leaf(x0);
  Var loss = f(tape, in);
  if (!tape.val(loss).is_scalar())
    throw std::invalid_argument("grad_check: f must return a scalar");
  if (!std::isfinite(tape.val(loss).at(0)))
    throw std::runtime_error("grad_check: non-finite function value");
  tape.backward(loss);
  Tensor analytic = tape.grad_or_zero(in);

  auto eval = [&](const Tensor& probe) {
    Tensor p = probe;
    p.requires_grad = false;
    Tape t;
    Var v = t.leaf(std::move(p));
    double y = t.val(f(t, v)).at(0);
    if (!std::isfinite(y))
      throw std::runtime_error("grad_check: non-finite function value at probe point");
    return y;
  };

  double worst = 0.0;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    Tensor xp = x, xm = x;
    xp.data[i] += step;
    xm.data[i] -= step;
    double fd = (eval(xp) - eval(xm)) / (2.0 * step);
    double err = std::abs(analytic.data[i] - fd) /
                 std::max(1.0, std::abs(analytic.data[i]));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace dynavq

#endif  // DYNAVQ_TAPE_HPP_

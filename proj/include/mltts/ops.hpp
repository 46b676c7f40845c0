// Copyright 2026 The mltts Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "mltts/rng.hpp"
#include "mltts/tape.hpp"

// Differentiable operations over tape tensors. Matrix products go through
// Eigen; every backward rule is written out here. All reductions run in a
// fixed sequential order so results reproduce bit-for-bit.
namespace mltts::ad {

namespace detail {

template <typename S>
using EMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using MapM = Eigen::Map<EMat<S>>;
template <typename S>
using CMapM = Eigen::Map<const EMat<S>>;

// C (+)= op(A) * op(B)
template <typename S>
void gemm(const Array<S>& a, bool ta, const Array<S>& b, bool tb, Array<S>& c, bool accumulate) {
  const int am = a.rows(), an = a.cols(), bm = b.rows(), bn = b.cols();
  CMapM<S> ma(a.v.data(), am, an);
  CMapM<S> mb(b.v.data(), bm, bn);
  MapM<S> mc(c.v.data(), c.rows(), c.cols());
  if (!ta && !tb) {
    if (accumulate) mc.noalias() += ma * mb; else mc.noalias() = ma * mb;
  } else if (ta && !tb) {
    if (accumulate) mc.noalias() += ma.transpose() * mb; else mc.noalias() = ma.transpose() * mb;
  } else if (!ta && tb) {
    if (accumulate) mc.noalias() += ma * mb.transpose(); else mc.noalias() = ma * mb.transpose();
  } else {
    if (accumulate) mc.noalias() += ma.transpose() * mb.transpose();
    else mc.noalias() = ma.transpose() * mb.transpose();
  }
}

template <typename S>
void axpy(Array<S>& dst, const Array<S>& src) {
  for (size_t i = 0; i < dst.v.size(); ++i) dst.v[i] += src.v[i];
}

template <typename S>
void require_same_tape(Tensor<S> a, Tensor<S> b, const char* op) {
  if (a.tape() != b.tape())
    throw ConfigError(std::string(op) + ": operands recorded on different tapes");
}

inline void axis_extents(const std::vector<int>& shape, int axis, int64_t& outer, int64_t& n,
                         int64_t& inner) {
  if (axis < 0 || axis >= static_cast<int>(shape.size()))
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                         shape_str(shape));
  outer = 1;
  inner = 1;
  for (int i = 0; i < axis; ++i) outer *= shape[static_cast<size_t>(i)];
  n = shape[static_cast<size_t>(axis)];
  for (size_t i = static_cast<size_t>(axis) + 1; i < shape.size(); ++i) inner *= shape[i];
}

} // namespace detail

// ---------------------------------------------------------------------------
// Elementwise

template <typename S>
Tensor<S> add(Tensor<S> a, Tensor<S> b) {
  detail::require_same_tape(a, b, "add");
  if (!a.value().same_shape(b.value()))
    throw DimensionError("add: shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  Array<S> out = a.value();
  detail::axpy(out, b.value());
  return a.tape()->make(std::move(out), {a, b}, "add", [an = a.node(), bn = b.node()](Node<S>& n) {
    if (an->requires_grad) detail::axpy(an->g(), n.g());
    if (bn->requires_grad) detail::axpy(bn->g(), n.g());
  });
}

template <typename S>
Tensor<S> sub(Tensor<S> a, Tensor<S> b) {
  detail::require_same_tape(a, b, "sub");
  if (!a.value().same_shape(b.value()))
    throw DimensionError("sub: shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  Array<S> out = a.value();
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] -= b.value().v[i];
  return a.tape()->make(std::move(out), {a, b}, "sub", [an = a.node(), bn = b.node()](Node<S>& n) {
    if (an->requires_grad) detail::axpy(an->g(), n.g());
    if (bn->requires_grad)
      for (size_t i = 0; i < n.g().v.size(); ++i) bn->g().v[i] -= n.g().v[i];
  });
}

template <typename S>
Tensor<S> mul(Tensor<S> a, Tensor<S> b) {
  detail::require_same_tape(a, b, "mul");
  if (!a.value().same_shape(b.value()))
    throw DimensionError("mul: shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  Array<S> out = a.value();
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] *= b.value().v[i];
  return a.tape()->make(std::move(out), {a, b}, "mul", [an = a.node(), bn = b.node()](Node<S>& n) {
    if (an->requires_grad)
      for (size_t i = 0; i < n.g().v.size(); ++i) an->g().v[i] += n.g().v[i] * bn->val().v[i];
    if (bn->requires_grad)
      for (size_t i = 0; i < n.g().v.size(); ++i) bn->g().v[i] += n.g().v[i] * an->val().v[i];
  });
}

template <typename S>
Tensor<S> scale(Tensor<S> a, S c) {
  Array<S> out = a.value();
  for (auto& x : out.v) x *= c;
  return a.tape()->make(std::move(out), {a}, "scale", [an = a.node(), c](Node<S>& n) {
    if (an->requires_grad)
      for (size_t i = 0; i < n.g().v.size(); ++i) an->g().v[i] += c * n.g().v[i];
  });
}

template <typename S>
Tensor<S> tanh_op(Tensor<S> a) {
  Array<S> out = a.value();
  for (auto& x : out.v) x = std::tanh(x);
  return a.tape()->make(std::move(out), {a}, "tanh", [an = a.node()](Node<S>& n) {
    if (!an->requires_grad) return;
    for (size_t i = 0; i < n.g().v.size(); ++i) {
      const S y = n.value.v[i];
      an->g().v[i] += n.g().v[i] * (S(1) - y * y);
    }
  });
}

template <typename S>
Tensor<S> sigmoid_op(Tensor<S> a) {
  Array<S> out = a.value();
  for (auto& x : out.v) {
    if (x >= S(0)) {
      x = S(1) / (S(1) + std::exp(-x));
    } else {
      const S e = std::exp(x);
      x = e / (S(1) + e);
    }
  }
  return a.tape()->make(std::move(out), {a}, "sigmoid", [an = a.node()](Node<S>& n) {
    if (!an->requires_grad) return;
    for (size_t i = 0; i < n.g().v.size(); ++i) {
      const S y = n.value.v[i];
      an->g().v[i] += n.g().v[i] * y * (S(1) - y);
    }
  });
}

template <typename S>
Tensor<S> relu_op(Tensor<S> a) {
  Array<S> out = a.value();
  for (auto& x : out.v) x = x > S(0) ? x : S(0);
  return a.tape()->make(std::move(out), {a}, "relu", [an = a.node()](Node<S>& n) {
    if (!an->requires_grad) return;
    for (size_t i = 0; i < n.g().v.size(); ++i)
      if (an->val().v[i] > S(0)) an->g().v[i] += n.g().v[i];
  });
}

// ---------------------------------------------------------------------------
// Matrix / shape ops

template <typename S>
Tensor<S> matmul(Tensor<S> a, Tensor<S> b) {
  detail::require_same_tape(a, b, "matmul");
  if (a.value().ndim() != 2 || b.value().ndim() != 2 || a.value().cols() != b.value().rows())
    throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  Array<S> out({a.value().rows(), b.value().cols()});
  detail::gemm(a.value(), false, b.value(), false, out, false);
  return a.tape()->make(std::move(out), {a, b}, "matmul",
                        [an = a.node(), bn = b.node()](Node<S>& n) {
                          if (an->requires_grad) detail::gemm(n.g(), false, bn->val(), true, an->g(), true);
                          if (bn->requires_grad) detail::gemm(an->val(), true, n.g(), false, bn->g(), true);
                        });
}

template <typename S>
Tensor<S> reshape(Tensor<S> a, std::vector<int> new_shape) {
  if (Array<S>::numel_of(new_shape) != a.numel())
    throw DimensionError("reshape: cannot view " + shape_str(a.shape()) + " as " +
                         shape_str(new_shape));
  Array<S> out(std::move(new_shape), a.value().v);
  return a.tape()->make(std::move(out), {a}, "reshape", [an = a.node()](Node<S>& n) {
    if (an->requires_grad)
      for (size_t i = 0; i < n.g().v.size(); ++i) an->g().v[i] += n.g().v[i];
  });
}

// Numerically stabilized softmax along `axis`; rows sum to one.
template <typename S>
Tensor<S> softmax(Tensor<S> a, int axis) {
  if (!a.value().finite())
    throw NumericError("softmax: non-finite input");
  int64_t outer, len, inner;
  detail::axis_extents(a.shape(), axis, outer, len, inner);
  Array<S> out = a.value();
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t i = 0; i < inner; ++i) {
      S mx = -std::numeric_limits<S>::infinity();
      for (int64_t k = 0; k < len; ++k) mx = std::max(mx, out.v[(o * len + k) * inner + i]);
      S sum = S(0);
      for (int64_t k = 0; k < len; ++k) {
        S& x = out.v[(o * len + k) * inner + i];
        x = std::exp(x - mx);
        sum += x;
      }
      for (int64_t k = 0; k < len; ++k) out.v[(o * len + k) * inner + i] /= sum;
    }
  }
  return a.tape()->make(std::move(out), {a}, "softmax",
                        [an = a.node(), outer, len, inner](Node<S>& n) {
                          if (!an->requires_grad) return;
                          for (int64_t o = 0; o < outer; ++o) {
                            for (int64_t i = 0; i < inner; ++i) {
                              S dot = S(0);
                              for (int64_t k = 0; k < len; ++k) {
                                const size_t at = (o * len + k) * inner + i;
                                dot += n.g().v[at] * n.value.v[at];
                              }
                              for (int64_t k = 0; k < len; ++k) {
                                const size_t at = (o * len + k) * inner + i;
                                an->g().v[at] += n.value.v[at] * (n.g().v[at] - dot);
                              }
                            }
                          }
                        });
}

template <typename S>
Tensor<S> concat(const std::vector<Tensor<S>>& parts, int axis) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  Tape<S>* tape = parts[0].tape();
  const std::vector<int>& ref = parts[0].shape();
  int total = 0;
  for (const auto& p : parts) {
    if (p.tape() != tape) throw ConfigError("concat: operands recorded on different tapes");
    if (p.shape().size() != ref.size())
      throw DimensionError("concat: rank mismatch " + shape_str(ref) + " vs " +
                           shape_str(p.shape()));
    for (size_t d = 0; d < ref.size(); ++d) {
      if (static_cast<int>(d) == axis) continue;
      if (p.shape()[d] != ref[d])
        throw DimensionError("concat: off-axis dimension mismatch " + shape_str(ref) + " vs " +
                             shape_str(p.shape()));
    }
    total += p.shape()[static_cast<size_t>(axis)];
  }
  std::vector<int> out_shape = ref;
  out_shape[static_cast<size_t>(axis)] = total;
  int64_t outer, len, inner;
  detail::axis_extents(out_shape, axis, outer, len, inner);
  (void)len;
  Array<S> out(out_shape);
  int64_t offset = 0;
  for (const auto& p : parts) {
    const int64_t plen = p.shape()[static_cast<size_t>(axis)];
    for (int64_t o = 0; o < outer; ++o) {
      const S* src = p.value().v.data() + o * plen * inner;
      S* dst = out.v.data() + (o * total + offset) * inner;
      std::copy(src, src + plen * inner, dst);
    }
    offset += plen;
  }
  std::vector<Node<S>*> pnodes;
  pnodes.reserve(parts.size());
  for (const auto& p : parts) pnodes.push_back(p.node());
  auto bw = [pnodes, outer, inner, total, axis](Node<S>& n) {
    int64_t offset = 0;
    for (Node<S>* pn : pnodes) {
      const int64_t plen = pn->val().shape[static_cast<size_t>(axis)];
      if (pn->requires_grad) {
        for (int64_t o = 0; o < outer; ++o) {
          const S* src = n.g().v.data() + (o * total + offset) * inner;
          S* dst = pn->g().v.data() + o * plen * inner;
          for (int64_t i = 0; i < plen * inner; ++i) dst[i] += src[i];
        }
      }
      offset += plen;
    }
  };
  return tape->make(std::move(out), parts, "concat", bw);
}

template <typename S>
Tensor<S> slice(Tensor<S> a, int axis, int start, int len) {
  int64_t outer, total, inner;
  detail::axis_extents(a.shape(), axis, outer, total, inner);
  if (start < 0 || len < 0 || start + len > total)
    throw DimensionError("slice: range [" + std::to_string(start) + "," +
                         std::to_string(start + len) + ") out of bounds for axis size " +
                         std::to_string(total));
  std::vector<int> out_shape = a.shape();
  out_shape[static_cast<size_t>(axis)] = len;
  Array<S> out(out_shape);
  for (int64_t o = 0; o < outer; ++o) {
    const S* src = a.value().v.data() + (o * total + start) * inner;
    std::copy(src, src + static_cast<int64_t>(len) * inner, out.v.data() + o * len * inner);
  }
  return a.tape()->make(std::move(out), {a}, "slice",
                        [an = a.node(), outer, total, inner, start, len](Node<S>& n) {
                          if (!an->requires_grad) return;
                          for (int64_t o = 0; o < outer; ++o) {
                            const S* src = n.g().v.data() + o * len * inner;
                            S* dst = an->g().v.data() + (o * total + start) * inner;
                            for (int64_t i = 0; i < static_cast<int64_t>(len) * inner; ++i)
                              dst[i] += src[i];
                          }
                        });
}

// table: [V, d]; ids index rows. Backward scatters into looked-up rows only,
// summing duplicates.
template <typename S>
Tensor<S> embedding_lookup(Tensor<S> table, const std::vector<int>& ids) {
  if (table.value().ndim() != 2)
    throw DimensionError("embedding_lookup: table must be 2-d, got " + shape_str(table.shape()));
  const int v = table.value().rows(), d = table.value().cols();
  for (int id : ids)
    if (id < 0 || id >= v)
      throw DataError("embedding_lookup: id " + std::to_string(id) + " out of range [0," +
                      std::to_string(v) + ")");
  Array<S> out({static_cast<int>(ids.size()), d});
  for (size_t i = 0; i < ids.size(); ++i)
    std::copy(table.value().v.begin() + static_cast<int64_t>(ids[i]) * d,
              table.value().v.begin() + static_cast<int64_t>(ids[i] + 1) * d,
              out.v.begin() + static_cast<int64_t>(i) * d);
  return table.tape()->make(std::move(out), {table}, "embedding_lookup",
                            [tn = table.node(), ids, d](Node<S>& n) {
                              if (!tn->requires_grad) return;
                              for (size_t i = 0; i < ids.size(); ++i) {
                                S* dst = tn->g().v.data() + static_cast<int64_t>(ids[i]) * d;
                                const S* src = n.g().v.data() + static_cast<int64_t>(i) * d;
                                for (int c = 0; c < d; ++c) dst[c] += src[c];
                              }
                            });
}

// Repeat a [1, C] row R times -> [R, C].
template <typename S>
Tensor<S> broadcast_row(Tensor<S> r, int rows) {
  if (r.value().ndim() != 2 || r.value().rows() != 1)
    throw DimensionError("broadcast_row: expected [1,C], got " + shape_str(r.shape()));
  const int c = r.value().cols();
  Array<S> out({rows, c});
  for (int i = 0; i < rows; ++i)
    std::copy(r.value().v.begin(), r.value().v.end(), out.v.begin() + static_cast<int64_t>(i) * c);
  return r.tape()->make(std::move(out), {r}, "broadcast_row", [rn = r.node(), rows, c](Node<S>& n) {
    if (!rn->requires_grad) return;
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < c; ++j) rn->g().v[j] += n.g().v[static_cast<int64_t>(i) * c + j];
  });
}

// m: [R, C], r: [1, C] broadcast-added to every row.
template <typename S>
Tensor<S> add_rowwise(Tensor<S> m, Tensor<S> r) {
  detail::require_same_tape(m, r, "add_rowwise");
  if (m.value().ndim() != 2 || r.value().ndim() != 2 || r.value().rows() != 1 ||
      r.value().cols() != m.value().cols())
    throw DimensionError("add_rowwise: incompatible shapes " + shape_str(m.shape()) + " and " +
                         shape_str(r.shape()));
  const int rows = m.value().rows(), cols = m.value().cols();
  Array<S> out = m.value();
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) out.v[static_cast<int64_t>(i) * cols + j] += r.value().v[j];
  return m.tape()->make(std::move(out), {m, r}, "add_rowwise",
                        [mn = m.node(), rn = r.node(), rows, cols](Node<S>& n) {
                          if (mn->requires_grad) detail::axpy(mn->g(), n.g());
                          if (rn->requires_grad)
                            for (int i = 0; i < rows; ++i)
                              for (int j = 0; j < cols; ++j)
                                rn->g().v[j] += n.g().v[static_cast<int64_t>(i) * cols + j];
                        });
}

// ---------------------------------------------------------------------------
// Reductions and losses

template <typename S>
Tensor<S> reduce_sum(Tensor<S> a) {
  S sum = S(0);
  for (S x : a.value().v) sum += x;
  Array<S> out({1});
  out.v[0] = sum;
  return a.tape()->make(std::move(out), {a}, "reduce_sum", [an = a.node()](Node<S>& n) {
    if (!an->requires_grad) return;
    for (auto& gx : an->g().v) gx += n.g().v[0];
  });
}

template <typename S>
Tensor<S> reduce_mean(Tensor<S> a) {
  const S inv = S(1) / static_cast<S>(a.numel());
  S sum = S(0);
  for (S x : a.value().v) sum += x;
  Array<S> out({1});
  out.v[0] = sum * inv;
  return a.tape()->make(std::move(out), {a}, "reduce_mean", [an = a.node(), inv](Node<S>& n) {
    if (!an->requires_grad) return;
    for (auto& gx : an->g().v) gx += n.g().v[0] * inv;
  });
}

template <typename S>
Tensor<S> l1_loss(Tensor<S> pred, Tensor<S> target) {
  detail::require_same_tape(pred, target, "l1_loss");
  if (!pred.value().same_shape(target.value()))
    throw DimensionError("l1_loss: shape mismatch " + shape_str(pred.shape()) + " vs " +
                         shape_str(target.shape()));
  const S inv = S(1) / static_cast<S>(pred.numel());
  S sum = S(0);
  for (size_t i = 0; i < pred.value().v.size(); ++i)
    sum += std::abs(pred.value().v[i] - target.value().v[i]);
  Array<S> out({1});
  out.v[0] = sum * inv;
  return pred.tape()->make(std::move(out), {pred, target}, "l1_loss",
                           [pn = pred.node(), tn = target.node(), inv](Node<S>& n) {
                             const S g = n.g().v[0] * inv;
                             for (size_t i = 0; i < pn->val().v.size(); ++i) {
                               const S diff = pn->val().v[i] - tn->val().v[i];
                               const S s = diff > S(0) ? S(1) : (diff < S(0) ? S(-1) : S(0));
                               if (pn->requires_grad) pn->g().v[i] += g * s;
                               if (tn->requires_grad) tn->g().v[i] -= g * s;
                             }
                           });
}

template <typename S>
Tensor<S> mse_loss(Tensor<S> pred, Tensor<S> target) {
  detail::require_same_tape(pred, target, "mse_loss");
  if (!pred.value().same_shape(target.value()))
    throw DimensionError("mse_loss: shape mismatch " + shape_str(pred.shape()) + " vs " +
                         shape_str(target.shape()));
  const S inv = S(1) / static_cast<S>(pred.numel());
  S sum = S(0);
  for (size_t i = 0; i < pred.value().v.size(); ++i) {
    const S d = pred.value().v[i] - target.value().v[i];
    sum += d * d;
  }
  Array<S> out({1});
  out.v[0] = sum * inv;
  return pred.tape()->make(std::move(out), {pred, target}, "mse_loss",
                           [pn = pred.node(), tn = target.node(), inv](Node<S>& n) {
                             const S g = n.g().v[0] * inv;
                             for (size_t i = 0; i < pn->val().v.size(); ++i) {
                               const S d = S(2) * (pn->val().v[i] - tn->val().v[i]);
                               if (pn->requires_grad) pn->g().v[i] += g * d;
                               if (tn->requires_grad) tn->g().v[i] -= g * d;
                             }
                           });
}

// Binary cross-entropy on probabilities (clamped away from {0,1}). Exact
// predictions give exactly zero loss.
template <typename S>
Tensor<S> bce_loss(Tensor<S> probs, Tensor<S> targets) {
  detail::require_same_tape(probs, targets, "bce_loss");
  if (!probs.value().same_shape(targets.value()))
    throw DimensionError("bce_loss: shape mismatch " + shape_str(probs.shape()) + " vs " +
                         shape_str(targets.shape()));
  const S eps = static_cast<S>(1e-7);
  const S inv = S(1) / static_cast<S>(probs.numel());
  S sum = S(0);
  for (size_t i = 0; i < probs.value().v.size(); ++i) {
    const S p = std::clamp(probs.value().v[i], eps, S(1) - eps);
    const S y = targets.value().v[i];
    if (probs.value().v[i] == y) continue; // exact hit contributes zero
    sum += -(y * std::log(p) + (S(1) - y) * std::log(S(1) - p));
  }
  Array<S> out({1});
  out.v[0] = sum * inv;
  return probs.tape()->make(std::move(out), {probs, targets}, "bce_loss",
                            [pn = probs.node(), tn = targets.node(), inv, eps](Node<S>& n) {
                              const S g = n.g().v[0] * inv;
                              for (size_t i = 0; i < pn->val().v.size(); ++i) {
                                const S p = std::clamp(pn->val().v[i], eps, S(1) - eps);
                                const S y = tn->val().v[i];
                                if (pn->requires_grad)
                                  pn->g().v[i] += g * (p - y) / (p * (S(1) - p));
                                if (tn->requires_grad)
                                  tn->g().v[i] += g * (std::log(S(1) - p) - std::log(p));
                              }
                            });
}

// ---------------------------------------------------------------------------
// Dropout (inverted scaling; identity in eval mode)

template <typename S>
Tensor<S> dropout(Tensor<S> a, double p, bool train, Rng& rng) {
  if (p < 0.0 || p >= 1.0) throw ConfigError("dropout: rate must be in [0,1)");
  if (!train || p == 0.0) return a;
  auto mask = std::make_shared<std::vector<S>>(a.value().v.size());
  const S keep_scale = static_cast<S>(1.0 / (1.0 - p));
  Array<S> out = a.value();
  for (size_t i = 0; i < out.v.size(); ++i) {
    (*mask)[i] = rng.uniform() >= p ? keep_scale : S(0);
    out.v[i] *= (*mask)[i];
  }
  return a.tape()->make(std::move(out), {a}, "dropout", [an = a.node(), mask](Node<S>& n) {
    if (!an->requires_grad) return;
    for (size_t i = 0; i < n.g().v.size(); ++i) an->g().v[i] += n.g().v[i] * (*mask)[i];
  });
}

// ---------------------------------------------------------------------------
// 1-d convolution over time. x: [T, Cin], w: [K*Cin, Cout], b: [1, Cout];
// zero padding keeps T ('same', K odd). Lowered to im2col + gemm.

template <typename S>
Tensor<S> conv1d(Tensor<S> x, Tensor<S> w, Tensor<S> b, int kernel) {
  detail::require_same_tape(x, w, "conv1d");
  detail::require_same_tape(x, b, "conv1d");
  if (kernel < 1 || kernel % 2 == 0) throw ConfigError("conv1d: kernel must be odd and >= 1");
  if (x.value().ndim() != 2 || w.value().ndim() != 2)
    throw DimensionError("conv1d: expected 2-d input/weight, got " + shape_str(x.shape()) +
                         " and " + shape_str(w.shape()));
  const int t = x.value().rows(), cin = x.value().cols();
  if (w.value().rows() != kernel * cin)
    throw DimensionError("conv1d: weight rows " + std::to_string(w.value().rows()) +
                         " do not match kernel*Cin = " + std::to_string(kernel * cin));
  const int cout = w.value().cols();
  if (b.value().numel() != cout)
    throw DimensionError("conv1d: bias length " + std::to_string(b.value().numel()) +
                         " does not match Cout " + std::to_string(cout));
  const int half = kernel / 2;

  auto cols = std::make_shared<Array<S>>(std::vector<int>{t, kernel * cin});
  for (int i = 0; i < t; ++i) {
    for (int a = 0; a < kernel; ++a) {
      const int src_row = i + a - half;
      if (src_row < 0 || src_row >= t) continue;
      const S* src = x.value().v.data() + static_cast<int64_t>(src_row) * cin;
      S* dst = cols->v.data() + (static_cast<int64_t>(i) * kernel + a) * cin;
      std::copy(src, src + cin, dst);
    }
  }
  Array<S> out({t, cout});
  detail::gemm(*cols, false, w.value(), false, out, false);
  for (int i = 0; i < t; ++i)
    for (int j = 0; j < cout; ++j) out.v[static_cast<int64_t>(i) * cout + j] += b.value().v[j];

  auto bw = [xn = x.node(), wn = w.node(), bn = b.node(), cols, t, cin, cout, kernel,
             half](Node<S>& n) {
    if (wn->requires_grad) detail::gemm(*cols, true, n.g(), false, wn->g(), true);
    if (bn->requires_grad)
      for (int i = 0; i < t; ++i)
        for (int j = 0; j < cout; ++j) bn->g().v[j] += n.g().v[static_cast<int64_t>(i) * cout + j];
    if (xn->requires_grad) {
      Array<S> dcols({t, kernel * cin});
      detail::gemm(n.g(), false, wn->val(), true, dcols, false);
      for (int i = 0; i < t; ++i) {
        for (int a = 0; a < kernel; ++a) {
          const int src_row = i + a - half;
          if (src_row < 0 || src_row >= t) continue;
          S* dst = xn->g().v.data() + static_cast<int64_t>(src_row) * cin;
          const S* src = dcols.v.data() + (static_cast<int64_t>(i) * kernel + a) * cin;
          for (int c = 0; c < cin; ++c) dst[c] += src[c];
        }
      }
    }
  };
  Tensor<S> result = x.tape()->make(std::move(out), {x, w, b}, "conv1d", bw);
  return result;
}

// ---------------------------------------------------------------------------
// Affine layer: x [R, K] * w [K, N] + b [1, N]

template <typename S>
Tensor<S> affine(Tensor<S> x, Tensor<S> w, Tensor<S> b) {
  return add_rowwise(matmul(x, w), b);
}

// ---------------------------------------------------------------------------
// Recurrent cells (built from primitives, so gradients come for free)

enum class RnnKind { GRU, LSTM };

template <typename S>
struct RnnState {
  Tensor<S> h; // [1, H]
  Tensor<S> c; // [1, H]; LSTM only
};

// LSTM step. w_ih: [Din, 4H], w_hh: [H, 4H], bias: [1, 4H]; gate order
// (input, forget, cell, output).
template <typename S>
RnnState<S> lstm_step(Tensor<S> x, RnnState<S> state, Tensor<S> w_ih, Tensor<S> w_hh,
                      Tensor<S> bias) {
  const int hidden = state.h.value().cols();
  if (w_ih.value().cols() != 4 * hidden || w_hh.value().rows() != hidden)
    throw DimensionError("lstm_step: weight shapes " + shape_str(w_ih.shape()) + "/" +
                         shape_str(w_hh.shape()) + " do not match hidden size " +
                         std::to_string(hidden));
  if (x.value().cols() != w_ih.value().rows())
    throw DimensionError("lstm_step: input width " + std::to_string(x.value().cols()) +
                         " does not match weight rows " + std::to_string(w_ih.value().rows()));
  Tensor<S> gates = add_rowwise(add(matmul(x, w_ih), matmul(state.h, w_hh)), bias);
  Tensor<S> gi = sigmoid_op(slice(gates, 1, 0, hidden));
  Tensor<S> gf = sigmoid_op(slice(gates, 1, hidden, hidden));
  Tensor<S> gg = tanh_op(slice(gates, 1, 2 * hidden, hidden));
  Tensor<S> go = sigmoid_op(slice(gates, 1, 3 * hidden, hidden));
  Tensor<S> c_next = add(mul(gf, state.c), mul(gi, gg));
  Tensor<S> h_next = mul(go, tanh_op(c_next));
  return {h_next, c_next};
}

// GRU step. w_ih: [Din, 3H], w_hh: [H, 3H], b_ih/b_hh: [1, 3H]; gate order
// (reset, update, candidate); reset applies to the hidden contribution.
template <typename S>
Tensor<S> gru_step(Tensor<S> x, Tensor<S> h, Tensor<S> w_ih, Tensor<S> w_hh, Tensor<S> b_ih,
                   Tensor<S> b_hh) {
  const int hidden = h.value().cols();
  if (w_ih.value().cols() != 3 * hidden || w_hh.value().rows() != hidden)
    throw DimensionError("gru_step: weight shapes " + shape_str(w_ih.shape()) + "/" +
                         shape_str(w_hh.shape()) + " do not match hidden size " +
                         std::to_string(hidden));
  if (x.value().cols() != w_ih.value().rows())
    throw DimensionError("gru_step: input width " + std::to_string(x.value().cols()) +
                         " does not match weight rows " + std::to_string(w_ih.value().rows()));
  Tensor<S> gi = add_rowwise(matmul(x, w_ih), b_ih);
  Tensor<S> gh = add_rowwise(matmul(h, w_hh), b_hh);
  Tensor<S> r = sigmoid_op(add(slice(gi, 1, 0, hidden), slice(gh, 1, 0, hidden)));
  Tensor<S> z = sigmoid_op(add(slice(gi, 1, hidden, hidden), slice(gh, 1, hidden, hidden)));
  Tensor<S> ncand =
      tanh_op(add(slice(gi, 1, 2 * hidden, hidden), mul(r, slice(gh, 1, 2 * hidden, hidden))));
  // h' = (1-z)*n + z*h
  Tensor<S> one = h.tape()->constant(Array<S>::full({1, hidden}, S(1)));
  return add(mul(sub(one, z), ncand), mul(z, h));
}

// Uniform entry point matching the (kind, input, state) -> (output, state)
// contract. GRU ignores/forwards no cell state.
template <typename S>
RnnState<S> rnn_cell_step(RnnKind kind, Tensor<S> x, RnnState<S> state, Tensor<S> w_ih,
                          Tensor<S> w_hh, Tensor<S> b_ih, Tensor<S> b_hh) {
  if (kind == RnnKind::LSTM) return lstm_step(x, state, w_ih, w_hh, b_ih);
  Tensor<S> h = gru_step(x, state.h, w_ih, w_hh, b_ih, b_hh);
  return {h, Tensor<S>()};
}

} // namespace mltts::ad

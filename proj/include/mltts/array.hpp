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

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "mltts/errors.hpp"

namespace mltts {

inline std::string shape_str(const std::vector<int>& s) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << ',';
    os << s[i];
  }
  os << ']';
  return os.str();
}

// Dense row-major n-d array. Plain storage, no gradient machinery; the
// autodiff layer wraps these.
template <typename S>
struct Array {
  std::vector<int> shape;
  std::vector<S> v;

  Array() = default;

  explicit Array(std::vector<int> sh) : shape(std::move(sh)) {
    v.assign(static_cast<size_t>(numel_of(shape)), S(0));
  }

  Array(std::vector<int> sh, std::vector<S> data) : shape(std::move(sh)), v(std::move(data)) {
    if (static_cast<int64_t>(v.size()) != numel_of(shape))
      throw DimensionError("array data length " + std::to_string(v.size()) +
                           " does not match shape " + shape_str(shape));
  }

  static int64_t numel_of(const std::vector<int>& sh) {
    int64_t n = 1;
    for (int d : sh) {
      if (d < 0) throw DimensionError("negative dimension in shape " + shape_str(sh));
      n *= d;
    }
    return n;
  }

  static Array zeros(std::vector<int> sh) { return Array(std::move(sh)); }

  static Array full(std::vector<int> sh, S x) {
    Array a(std::move(sh));
    a.fill(x);
    return a;
  }

  int64_t numel() const { return static_cast<int64_t>(v.size()); }
  int ndim() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }

  int rows() const { return ndim() == 2 ? shape[0] : (ndim() == 1 ? 1 : -1); }
  int cols() const { return ndim() == 2 ? shape[1] : (ndim() == 1 ? shape[0] : -1); }

  S& at(int r, int c) { return v[static_cast<size_t>(r) * cols() + c]; }
  S at(int r, int c) const { return v[static_cast<size_t>(r) * cols() + c]; }

  bool same_shape(const Array& o) const { return shape == o.shape; }

  bool finite() const {
    for (S x : v)
      if (!std::isfinite(static_cast<double>(x))) return false;
    return true;
  }

  void fill(S x) {
    for (auto& e : v) e = x;
  }

  template <typename T>
  Array<T> cast() const {
    Array<T> out;
    out.shape = shape;
    out.v.resize(v.size());
    for (size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<T>(v[i]);
    return out;
  }
};

} // namespace mltts

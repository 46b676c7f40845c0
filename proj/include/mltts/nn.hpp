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
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "mltts/rng.hpp"
#include "mltts/tape.hpp"

namespace mltts::ad {

enum class Init { Zeros, Ones, XavierUniform, UniformFanIn, Normal };

// Named parameter collection. Registration order is fixed by construction,
// which pins both the RNG draw order at init and the checkpoint layout.
template <typename S>
class ParamStore {
public:
  Variable<S>& create(const std::string& name, std::vector<int> shape, Init init, Rng& rng,
                      double init_arg = 0.0) {
    if (by_name_.count(name)) throw ConfigError("parameter registered twice: " + name);
    auto var = std::make_unique<Variable<S>>(name, Array<S>(std::move(shape)));
    Variable<S>* p = var.get();
    initialize(*p, init, rng, init_arg);
    by_name_[name] = p;
    order_.push_back(std::move(var));
    return *p;
  }

  Variable<S>& at(const std::string& name) {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) throw ConfigError("unknown parameter: " + name);
    return *it->second;
  }

  const Variable<S>& at(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) throw ConfigError("unknown parameter: " + name);
    return *it->second;
  }

  bool contains(const std::string& name) const { return by_name_.count(name) != 0; }

  std::vector<Variable<S>*> all() {
    std::vector<Variable<S>*> out;
    out.reserve(order_.size());
    for (auto& v : order_) out.push_back(v.get());
    return out;
  }

  std::vector<const Variable<S>*> all() const {
    std::vector<const Variable<S>*> out;
    out.reserve(order_.size());
    for (auto& v : order_) out.push_back(v.get());
    return out;
  }

  void zero_grad() {
    for (auto& v : order_) v->zero_grad();
  }

  // group = name prefix up to the first '.'
  static std::string group_of(const std::string& name) {
    const auto dot = name.find('.');
    return dot == std::string::npos ? name : name.substr(0, dot);
  }

  void set_trainable_by_group(const std::map<std::string, bool>& group_mask, bool dflt) {
    for (auto& v : order_) {
      auto it = group_mask.find(group_of(v->name));
      v->trainable = it == group_mask.end() ? dflt : it->second;
    }
  }

  uint64_t value_hash() const {
    uint64_t h = 1469598103934665603ull;
    for (const auto& v : order_)
      h = fnv1a(v->value.v.data(), v->value.v.size() * sizeof(S), h);
    return h;
  }

  uint64_t value_hash_of_group(const std::string& group) const {
    uint64_t h = 1469598103934665603ull;
    for (const auto& v : order_)
      if (group_of(v->name) == group) h = fnv1a(v->value.v.data(), v->value.v.size() * sizeof(S), h);
    return h;
  }

private:
  void initialize(Variable<S>& p, Init init, Rng& rng, double arg) {
    const auto& shape = p.value.shape;
    switch (init) {
      case Init::Zeros:
        break;
      case Init::Ones:
        p.value.fill(S(1));
        break;
      case Init::XavierUniform: {
        const int fan_in = shape.size() >= 2 ? shape[0] : 1;
        const int fan_out = shape.size() >= 2 ? shape[1] : shape[0];
        const double s = std::sqrt(6.0 / (fan_in + fan_out));
        for (auto& x : p.value.v) x = static_cast<S>(rng.uniform(-s, s));
        break;
      }
      case Init::UniformFanIn: {
        const int fan_in = shape.size() >= 2 ? shape[0] : shape.empty() ? 1 : shape[0];
        const double s = 1.0 / std::sqrt(std::max(1, fan_in));
        for (auto& x : p.value.v) x = static_cast<S>(rng.uniform(-s, s));
        break;
      }
      case Init::Normal:
        for (auto& x : p.value.v) x = static_cast<S>(rng.normal() * arg);
        break;
    }
  }

  std::vector<std::unique_ptr<Variable<S>>> order_;
  std::map<std::string, Variable<S>*> by_name_;
};

// Adam with bias correction. A parameter whose gradient has stayed exactly
// zero since construction keeps zero moments, so its values never move.
template <typename S>
class Adam {
public:
  Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }
  int64_t steps() const { return t_; }

  void step(const std::vector<Variable<S>*>& params) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (Variable<S>* p : params) {
      if (!p->trainable) continue;
      if (p->adam_m.numel() == 0) {
        p->adam_m = Array<S>::zeros(p->value.shape);
        p->adam_v = Array<S>::zeros(p->value.shape);
      }
      for (size_t i = 0; i < p->value.v.size(); ++i) {
        const double g = static_cast<double>(p->grad.v[i]);
        double m = beta1_ * static_cast<double>(p->adam_m.v[i]) + (1.0 - beta1_) * g;
        double v = beta2_ * static_cast<double>(p->adam_v.v[i]) + (1.0 - beta2_) * g * g;
        p->adam_m.v[i] = static_cast<S>(m);
        p->adam_v.v[i] = static_cast<S>(v);
        const double mh = m / bc1;
        const double vh = v / bc2;
        p->value.v[i] -= static_cast<S>(lr_ * mh / (std::sqrt(vh) + eps_));
      }
    }
  }

private:
  double lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
};

} // namespace mltts::ad

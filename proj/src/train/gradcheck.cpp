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

#include "mltts/gradcheck.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <future>
#include <iomanip>
#include <sstream>

#include "mltts/model.hpp"

namespace mltts::train {

using namespace mltts::ad;
using namespace mltts::tts;

namespace {

double rel_err(double a, double b) {
  const double denom = std::max({std::abs(a), std::abs(b), 1e-6});
  return std::abs(a - b) / denom;
}

Array<double> random_arr(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Array<double> a(std::move(shape));
  for (auto& x : a.v) x = rng.uniform(lo, hi);
  return a;
}

using BuildFn = std::function<Tensor<double>(Tape<double>&, std::vector<Tensor<double>>&)>;

double check_op(const std::vector<Array<double>>& inputs, const BuildFn& build, double h = 1e-5) {
  std::vector<size_t> offsets;
  size_t total = 0;
  for (const auto& a : inputs) {
    offsets.push_back(total);
    total += a.v.size();
  }
  const auto eval = [&](const std::vector<double>& flat) {
    Tape<double> tape;
    std::vector<Tensor<double>> ts;
    for (size_t k = 0; k < inputs.size(); ++k) {
      Array<double> a = inputs[k];
      std::copy(flat.begin() + static_cast<int64_t>(offsets[k]),
                flat.begin() + static_cast<int64_t>(offsets[k] + a.v.size()), a.v.begin());
      ts.push_back(tape.input(std::move(a), true));
    }
    return build(tape, ts).value().v[0];
  };

  std::vector<double> flat(total);
  for (size_t k = 0; k < inputs.size(); ++k)
    std::copy(inputs[k].v.begin(), inputs[k].v.end(), flat.begin() + static_cast<int64_t>(offsets[k]));

  Tape<double> tape;
  std::vector<Tensor<double>> ts;
  for (const auto& a : inputs) ts.push_back(tape.input(a, true));
  Tensor<double> loss = build(tape, ts);
  tape.backward(loss);

  double max_rel = 0.0;
  for (size_t i = 0; i < total; ++i) {
    const double keep = flat[i];
    flat[i] = keep + h;
    const double fp = eval(flat);
    flat[i] = keep - h;
    const double fm = eval(flat);
    flat[i] = keep;
    const double numeric = (fp - fm) / (2.0 * h);
    size_t k = 0;
    while (k + 1 < offsets.size() && offsets[k + 1] <= i) ++k;
    const double analytic = ts[k].grad().v[i - offsets[k]];
    max_rel = std::max(max_rel, rel_err(analytic, numeric));
  }
  return max_rel;
}

Tensor<double> weighted_sum(Tape<double>& tape, Tensor<double> x) {
  Array<double> w(x.value().shape);
  for (size_t i = 0; i < w.v.size(); ++i) w.v[i] = 0.3 + 0.1 * std::sin(0.7 * double(i) + 0.4);
  return reduce_sum(mul(x, tape.constant(std::move(w))));
}

ModelConfig grid_config(AttentionVariant v, SpeakerPlacement p) {
  ModelConfig c;
  c.phoneme_vocab = 12;
  c.embedding_dim = 8;
  c.encoder_dim = 8;
  c.decoder_dim = 10;
  c.attention_dim = 6;
  c.speaker_count = 3;
  c.speaker_dim = 4;
  c.attention_variant = v;
  c.speaker_placement = p;
  c.reduction_factor = 2;
  c.prenet_dims = {12, 9};
  c.prenet_dropout = 0.0;
  c.encoder_conv_kernel = 3;
  c.postnet_dim = 7;
  c.postnet_conv_kernel = 3;
  c.mel_dim = 5;
  c.linear_dim = 9;
  return c;
}

GradCheckEntry check_grid_cell(AttentionVariant v, SpeakerPlacement p, uint64_t seed) {
  const ModelConfig cfg = grid_config(v, p);
  TtsModel<double> model(cfg, seed);
  const std::vector<int> ids = {4, 6, 9, 1};
  Rng data_rng(seed ^ 0xabcdef);
  const Array<double> mel = random_arr({6, cfg.mel_dim}, data_rng, 0.2, 0.8);
  const Array<double> lin = random_arr({6, cfg.linear_dim}, data_rng, 0.2, 0.8);
  const int speaker = 1;

  // Nudge every parameter off its init point: zero biases would otherwise
  // put relu pre-activations exactly on the kink for the all-zero go frame,
  // where central differences are one-sided.
  Rng nudge(seed ^ 0x77aa55);
  for (auto* param : model.params().all())
    for (auto& x : param->value.v) x += 0.02 * nudge.uniform(0.4, 1.0) * (nudge.integer(2) ? 1 : -1);

  const auto eval = [&]() {
    Tape<double> tape;
    ForwardOptions<double> opts;
    const auto out = model.forward_teacher_forced(tape, ids, speaker, mel, lin, opts);
    return out.loss_total.value().v[0];
  };

  model.params().zero_grad();
  Tape<double> tape;
  ForwardOptions<double> opts;
  const auto out = model.forward_teacher_forced(tape, ids, speaker, mel, lin, opts);
  tape.backward(out.loss_total);

  GradCheckEntry entry;
  entry.name = "e2e " + attention_variant_name(v) + "/" + speaker_placement_name(p);
  entry.tolerance = 1e-3;
  const double h = 1e-5;
  Rng pick(seed ^ 0x1234567);
  for (auto* param : model.params().all()) {
    const size_t n = param->value.v.size();
    if (n == 0) continue;
    const int probes = static_cast<int>(std::min<size_t>(n, 4));
    for (int k = 0; k < probes; ++k) {
      const size_t at = static_cast<size_t>(pick.integer(n));
      const double keep = param->value.v[at];
      param->value.v[at] = keep + h;
      const double fp = eval();
      param->value.v[at] = keep - h;
      const double fm = eval();
      param->value.v[at] = keep;
      const double numeric = (fp - fm) / (2.0 * h);
      entry.max_rel_err = std::max(entry.max_rel_err, rel_err(param->grad.v[at], numeric));
    }
  }
  entry.pass = entry.max_rel_err < entry.tolerance;
  return entry;
}

} // namespace

GradCheckReport run_op_gradchecks(uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(seed);
  GradCheckReport report;

  struct Case {
    const char* name;
    std::vector<Array<double>> inputs;
    BuildFn build;
  };
  std::vector<Case> cases;
  cases.push_back({"add", {random_arr({3, 2}, rng), random_arr({3, 2}, rng)},
                   [](Tape<double>& tp, std::vector<Tensor<double>>& t) {
                     return weighted_sum(tp, add(t[0], t[1]));
                   }});
  cases.push_back({"sub", {random_arr({3, 2}, rng), random_arr({3, 2}, rng)},
                   [](Tape<double>& tp, std::vector<Tensor<double>>& t) {
                     return weighted_sum(tp, sub(t[0], t[1]));
                   }});
  cases.push_back({"mul", {random_arr({7}, rng), random_arr({7}, rng)},
                   [](Tape<double>& tp, std::vector<Tensor<double>>& t) {
                     return weighted_sum(tp, mul(t[0], t[1]));
                   }});
  cases.push_back({"scale", {random_arr({5}, rng)},
                   [](Tape<double>& tp, std::vector<Tensor<double>>& t) {
                     return weighted_sum(tp, scale(t[0], -1.7));
                   }});
  cases.push_back({"tanh", {random_arr({6}, rng, -2, 2)},
                   [](Tape<double>& tp, std::vector<Tensor<double>>& t) {
                     return weighted_sum(tp, tanh_op(t[0]));
                   }});
  cases.push_back({"sigmoid", {random_arr({6}, rng, -3, 3)},
                   [](Tape<double>& tp, std::vector<Tensor<double>>& t) {
                     return weighted_sum(tp, sigmoid_op(t[0]));
                   }});
  cases.push_back({"relu", {random_arr({8}, rng, 0.2, 2.0)},
                   [](Tape<double>& tp, std::vector<Tensor<double>>& t) {
                     return weighted_sum(tp, relu_op(t[0]));
                   }});
  cases.push_back({"matmul", {random_arr({2, 3}, rng), random_arr({3, 4}, rng)},
                   [](Tape<double>& tp, std::vector<Tensor<double>>& t) {
                     return weighted_sum(tp, matmul(t[0], t[1]));
                   }});
  cases.push_back({"softmax", {random_arr({2, 5}, rng, -2, 2)},
                   [](Tape<double>& tp, std::vector<Tensor<double>>& t) {
                     return weighted_sum(tp, softmax(t[0], 1));
                   }});
  cases.push_back({"concat", {random_arr({2, 2}, rng), random_arr({2, 3}, rng)},
                   [](Tape<double>& tp, std::vector<Tensor<double>>& t) {
                     return weighted_sum(tp, concat<double>({t[0], t[1]}, 1));
                   }});
  cases.push_back({"slice", {random_arr({3, 5}, rng)},
                   [](Tape<double>& tp, std::vector<Tensor<double>>& t) {
                     return weighted_sum(tp, slice(t[0], 1, 1, 3));
                   }});
  cases.push_back({"reshape", {random_arr({3, 4}, rng)},
                   [](Tape<double>& tp, std::vector<Tensor<double>>& t) {
                     return weighted_sum(tp, reshape(t[0], {2, 6}));
                   }});
  cases.push_back({"embedding_lookup", {random_arr({5, 3}, rng)},
                   [](Tape<double>& tp, std::vector<Tensor<double>>& t) {
                     return weighted_sum(tp, embedding_lookup(t[0], {1, 1, 4, 0}));
                   }});
  cases.push_back({"broadcast_row", {random_arr({1, 4}, rng)},
                   [](Tape<double>& tp, std::vector<Tensor<double>>& t) {
                     return weighted_sum(tp, broadcast_row(t[0], 3));
                   }});
  cases.push_back({"add_rowwise", {random_arr({3, 4}, rng), random_arr({1, 4}, rng)},
                   [](Tape<double>& tp, std::vector<Tensor<double>>& t) {
                     return weighted_sum(tp, add_rowwise(t[0], t[1]));
                   }});
  cases.push_back({"affine", {random_arr({2, 3}, rng), random_arr({3, 4}, rng),
                              random_arr({1, 4}, rng)},
                   [](Tape<double>& tp, std::vector<Tensor<double>>& t) {
                     return weighted_sum(tp, affine(t[0], t[1], t[2]));
                   }});
  cases.push_back({"conv1d", {random_arr({5, 2}, rng), random_arr({6, 3}, rng),
                              random_arr({1, 3}, rng)},
                   [](Tape<double>& tp, std::vector<Tensor<double>>& t) {
                     return weighted_sum(tp, conv1d(t[0], t[1], t[2], 3));
                   }});
  cases.push_back({"dropout", {random_arr({10}, rng, 0.5, 1.5)},
                   [](Tape<double>& tp, std::vector<Tensor<double>>& t) {
                     Rng mask_rng(7);
                     return weighted_sum(tp, dropout(t[0], 0.4, true, mask_rng));
                   }});
  cases.push_back({"reduce_mean", {random_arr({3, 3}, rng)},
                   [](Tape<double>&, std::vector<Tensor<double>>& t) {
                     return reduce_mean(t[0]);
                   }});
  cases.push_back({"l1_loss",
                   {random_arr({4, 2}, rng, 0.5, 1.5), random_arr({4, 2}, rng, -1.5, -0.5)},
                   [](Tape<double>&, std::vector<Tensor<double>>& t) {
                     return l1_loss(t[0], t[1]);
                   }});
  cases.push_back({"mse_loss", {random_arr({4, 2}, rng), random_arr({4, 2}, rng, 2, 3)},
                   [](Tape<double>&, std::vector<Tensor<double>>& t) {
                     return mse_loss(t[0], t[1]);
                   }});
  cases.push_back({"bce_loss",
                   {random_arr({6}, rng, 0.2, 0.8), random_arr({6}, rng, 0.1, 0.9)},
                   [](Tape<double>&, std::vector<Tensor<double>>& t) {
                     return bce_loss(t[0], t[1]);
                   }});
  {
    const int h = 3, din = 2;
    cases.push_back({"lstm_step",
                     {random_arr({1, din}, rng), random_arr({1, h}, rng), random_arr({1, h}, rng),
                      random_arr({din, 4 * h}, rng), random_arr({h, 4 * h}, rng),
                      random_arr({1, 4 * h}, rng)},
                     [h](Tape<double>& tp, std::vector<Tensor<double>>& t) {
                       RnnState<double> st{t[1], t[2]};
                       return weighted_sum(tp, lstm_step(t[0], st, t[3], t[4], t[5]).h);
                     }});
    cases.push_back({"gru_step",
                     {random_arr({1, din}, rng), random_arr({1, h}, rng),
                      random_arr({din, 3 * h}, rng), random_arr({h, 3 * h}, rng),
                      random_arr({1, 3 * h}, rng), random_arr({1, 3 * h}, rng)},
                     [](Tape<double>& tp, std::vector<Tensor<double>>& t) {
                       return weighted_sum(tp, gru_step(t[0], t[1], t[2], t[3], t[4], t[5]));
                     }});
  }

  for (auto& c : cases) {
    GradCheckEntry entry;
    entry.name = c.name;
    entry.tolerance = 1e-4;
    entry.max_rel_err = check_op(c.inputs, c.build);
    entry.pass = entry.max_rel_err < entry.tolerance;
    report.all_pass = report.all_pass && entry.pass;
    report.entries.push_back(std::move(entry));
  }
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

GradCheckReport run_grid_gradcheck(uint64_t seed, int jobs) {
  const auto t0 = std::chrono::steady_clock::now();
  GradCheckReport report;
  std::vector<std::pair<AttentionVariant, SpeakerPlacement>> grid;
  for (auto v : {AttentionVariant::BASE, AttentionVariant::PECV, AttentionVariant::RES})
    for (auto p : {SpeakerPlacement::NONE, SpeakerPlacement::SE_ENC, SpeakerPlacement::SE_DEC})
      grid.emplace_back(v, p);

  if (jobs > 1) {
    std::vector<std::future<GradCheckEntry>> futures;
    for (const auto& [v, p] : grid)
      futures.push_back(std::async(std::launch::async, check_grid_cell, v, p, seed));
    for (auto& f : futures) report.entries.push_back(f.get());
  } else {
    for (const auto& [v, p] : grid) report.entries.push_back(check_grid_cell(v, p, seed));
  }
  for (const auto& e : report.entries) report.all_pass = report.all_pass && e.pass;
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

std::string format_report(const GradCheckReport& report) {
  std::ostringstream os;
  os << std::left << std::setw(24) << "check" << std::setw(14) << "max_rel_err" << std::setw(12)
     << "tolerance" << "status\n";
  for (const auto& e : report.entries) {
    os << std::left << std::setw(24) << e.name << std::setw(14) << std::scientific
       << std::setprecision(3) << e.max_rel_err << std::setw(12) << e.tolerance
       << (e.pass ? "pass" : "FAIL") << "\n";
  }
  os << (report.all_pass ? "all checks passed" : "FAILURES present") << " ("
     << std::fixed << std::setprecision(2) << report.seconds << " s)\n";
  return os.str();
}

} // namespace mltts::train

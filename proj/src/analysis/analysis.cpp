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

#include "mltts/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "mltts/rng.hpp"

namespace mltts::analysis {

using text::Language;
using text::PhonemeInventory;
using text::UtteranceRecord;
using tts::TtsModel;

std::string dump_source_name(DumpSource s) {
  return s == DumpSource::PHONEME_EMBEDDING ? "phoneme_embedding" : "encoder_output";
}

DumpSource dump_source_from_name(const std::string& s) {
  if (s == "phoneme_embedding" || s == "phoneme") return DumpSource::PHONEME_EMBEDDING;
  if (s == "encoder_output" || s == "encoder") return DumpSource::ENCODER_OUTPUT;
  throw ConfigError("unknown dump source '" + s + "' (expected phoneme or encoder)");
}

EmbeddingDump dump_embeddings(const TtsModel<float>& model, const PhonemeInventory& inv,
                              const std::vector<UtteranceRecord>& sample, DumpSource source) {
  if (model.config().phoneme_vocab != inv.size())
    throw ConfigError("dump: model vocabulary does not match inventory");

  // occurrences per phoneme type, SPECIAL excluded
  std::map<int, std::vector<Array<double>>> collected;
  if (source == DumpSource::PHONEME_EMBEDDING) {
    const auto& table = model.params().at("phoneme_embedding.table").value;
    std::map<int, bool> seen;
    for (const auto& rec : sample)
      for (int id : rec.phoneme_ids)
        if (inv.symbol(id).language != Language::SPECIAL) seen[id] = true;
    for (const auto& [id, _] : seen) {
      Array<double> row({table.cols()});
      for (int d = 0; d < table.cols(); ++d) row.v[static_cast<size_t>(d)] = table.at(id, d);
      collected[id].push_back(std::move(row));
    }
  } else {
    for (const auto& rec : sample) {
      ad::Tape<float> tape;
      tape.set_grad_enabled(false);
      auto leaves = model.bind(tape);
      const auto enc = model.encode(tape, leaves, rec.phoneme_ids,
                                    std::min(rec.speaker, model.config().speaker_count - 1));
      const auto& h = enc.encoder_outputs.value();
      for (size_t j = 0; j < rec.phoneme_ids.size(); ++j) {
        const int id = rec.phoneme_ids[j];
        if (inv.symbol(id).language == Language::SPECIAL) continue;
        Array<double> row({h.cols()});
        for (int d = 0; d < h.cols(); ++d)
          row.v[static_cast<size_t>(d)] = static_cast<double>(h.at(static_cast<int>(j), d));
        collected[id].push_back(std::move(row));
      }
    }
  }

  EmbeddingDump dump;
  dump.source = source;
  if (collected.empty()) throw DataError("dump: sample covers no language phonemes");
  const int dim = static_cast<int>(collected.begin()->second.front().numel());
  dump.points = Array<double>({static_cast<int>(collected.size()), dim});
  int row = 0;
  for (const auto& [id, rows] : collected) {
    for (int d = 0; d < dim; ++d) {
      double acc = 0;
      for (const auto& r : rows) acc += r.v[static_cast<size_t>(d)];
      dump.points.at(row, d) = acc / static_cast<double>(rows.size());
    }
    dump.labels.push_back(inv.symbol(id));
    ++row;
  }
  for (int id = 0; id < inv.size(); ++id)
    if (inv.symbol(id).language != Language::SPECIAL && !collected.count(id))
      dump.missing.push_back(inv.symbol(id).label);
  return dump;
}

void TsneConfig::validate(int n_points) const {
  if (n_points < 4) throw DataError("t-SNE: need at least 4 points");
  if (!(perplexity > 0) || perplexity >= n_points / 3.0)
    throw ConfigError("t-SNE: perplexity must satisfy 0 < perplexity < n/3, got " +
                      std::to_string(perplexity) + " for n=" + std::to_string(n_points));
  if (n_iters < 250) throw ConfigError("t-SNE: n_iters must be >= 250");
  if (learning_rate <= 0) throw ConfigError("t-SNE: learning rate must be positive");
}

namespace {

// Canonical per-point identity: a content hash drives both the seeded init
// and the reduction order, making the whole run equivariant to input
// reordering.
std::vector<uint64_t> content_hashes(const Array<double>& x) {
  std::vector<uint64_t> h(static_cast<size_t>(x.rows()));
  for (int i = 0; i < x.rows(); ++i)
    h[static_cast<size_t>(i)] =
        fnv1a(x.v.data() + static_cast<size_t>(i) * x.cols(), sizeof(double) * static_cast<size_t>(x.cols()));
  return h;
}

} // namespace

TsneResult tsne_points(const Array<double>& x, const TsneConfig& cfg) {
  const int n = x.rows();
  const int dim = x.cols();
  if (!x.finite()) throw NumericError("t-SNE: non-finite input");

  // degenerate input: every point identical
  bool all_same = true;
  for (int i = 1; i < n && all_same; ++i)
    for (int d = 0; d < dim; ++d)
      if (x.at(i, d) != x.at(0, d)) {
        all_same = false;
        break;
      }
  if (n > 1 && all_same) throw DataError("t-SNE: all points identical");
  cfg.validate(n);

  const auto hashes = content_hashes(x);
  // canonical processing order: by content hash, ties by coordinates
  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (hashes[static_cast<size_t>(a)] != hashes[static_cast<size_t>(b)])
      return hashes[static_cast<size_t>(a)] < hashes[static_cast<size_t>(b)];
    for (int d = 0; d < dim; ++d)
      if (x.at(a, d) != x.at(b, d)) return x.at(a, d) < x.at(b, d);
    return false;
  });

  // pairwise squared distances
  Array<double> d2({n, n});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double acc = 0;
      for (int d = 0; d < dim; ++d) {
        const double diff = x.at(i, d) - x.at(j, d);
        acc += diff * diff;
      }
      d2.at(i, j) = acc;
    }

  // per-point precision calibrated to H(P_i) = ln(perplexity)
  const double target_entropy = std::log(cfg.perplexity);
  Array<double> p_cond({n, n});
  TsneResult result;
  result.calibrated_entropies.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    double beta = 1.0, beta_lo = 0.0, beta_hi = std::numeric_limits<double>::infinity();
    double entropy = 0;
    for (int it = 0; it < 200; ++it) {
      double sum = 0;
      for (int jj = 0; jj < n; ++jj) {
        const int j = order[static_cast<size_t>(jj)];
        if (j == i) continue;
        sum += std::exp(-beta * d2.at(i, j));
      }
      double h = 0;
      if (sum > 0) {
        for (int jj = 0; jj < n; ++jj) {
          const int j = order[static_cast<size_t>(jj)];
          if (j == i) continue;
          const double pj = std::exp(-beta * d2.at(i, j)) / sum;
          if (pj > 0) h -= pj * std::log(pj);
        }
      }
      entropy = h;
      if (std::abs(h - target_entropy) < 1e-7) break;
      if (h > target_entropy) {
        beta_lo = beta;
        beta = std::isinf(beta_hi) ? beta * 2 : 0.5 * (beta + beta_hi);
      } else {
        beta_hi = beta;
        beta = beta_lo > 0 ? 0.5 * (beta + beta_lo) : beta / 2;
      }
    }
    result.calibrated_entropies[static_cast<size_t>(i)] = entropy;
    double sum = 0;
    for (int jj = 0; jj < n; ++jj) {
      const int j = order[static_cast<size_t>(jj)];
      if (j == i) continue;
      sum += std::exp(-beta * d2.at(i, j));
    }
    double row_sum = 0.0;
    for (int j = 0; j < n; ++j) {
      p_cond.at(i, j) = (j == i || sum <= 0) ? 0.0 : std::exp(-beta * d2.at(i, j)) / sum;
      row_sum += p_cond.at(i, j);
    }
    result.affinity_row_sum_max_dev =
        std::max(result.affinity_row_sum_max_dev, std::abs(row_sum - 1.0));
  }

  // symmetrize
  Array<double> p({n, n});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      p.at(i, j) = std::max((p_cond.at(i, j) + p_cond.at(j, i)) / (2.0 * n), 1e-12);

  // content-seeded init
  Array<double> y({n, 2});
  for (int i = 0; i < n; ++i) {
    Rng rng(cfg.seed ^ hashes[static_cast<size_t>(i)]);
    y.at(i, 0) = 1e-4 * rng.normal();
    y.at(i, 1) = 1e-4 * rng.normal();
  }

  Array<double> step({n, 2});
  Array<double> gains = Array<double>::full({n, 2}, 1.0);
  Array<double> num({n, n});

  for (int iter = 0; iter < cfg.n_iters; ++iter) {
    const double exagg = iter < cfg.exaggeration_iters ? cfg.early_exaggeration : 1.0;

    double z = 0;
    for (int ii = 0; ii < n; ++ii) {
      const int i = order[static_cast<size_t>(ii)];
      for (int jj = 0; jj < n; ++jj) {
        const int j = order[static_cast<size_t>(jj)];
        if (j == i) {
          num.at(i, j) = 0;
          continue;
        }
        const double dy0 = y.at(i, 0) - y.at(j, 0);
        const double dy1 = y.at(i, 1) - y.at(j, 1);
        num.at(i, j) = 1.0 / (1.0 + dy0 * dy0 + dy1 * dy1);
        z += num.at(i, j);
      }
    }
    z = std::max(z, 1e-12);

    // KL against the true (un-exaggerated) P
    double kl = 0;
    for (int ii = 0; ii < n; ++ii) {
      const int i = order[static_cast<size_t>(ii)];
      for (int jj = 0; jj < n; ++jj) {
        const int j = order[static_cast<size_t>(jj)];
        if (j == i) continue;
        const double q = std::max(num.at(i, j) / z, 1e-12);
        kl += p.at(i, j) * std::log(p.at(i, j) / q);
      }
    }
    result.kl_history.push_back(kl);

    for (int ii = 0; ii < n; ++ii) {
      const int i = order[static_cast<size_t>(ii)];
      double g0 = 0, g1 = 0;
      for (int jj = 0; jj < n; ++jj) {
        const int j = order[static_cast<size_t>(jj)];
        if (j == i) continue;
        const double coeff = 4.0 * (exagg * p.at(i, j) - num.at(i, j) / z) * num.at(i, j);
        g0 += coeff * (y.at(i, 0) - y.at(j, 0));
        g1 += coeff * (y.at(i, 1) - y.at(j, 1));
      }
      const double momentum = iter < 250 ? 0.5 : 0.8;
      for (int d = 0; d < 2; ++d) {
        const double g = d == 0 ? g0 : g1;
        const bool same_sign = (g > 0) == (step.at(i, d) > 0);
        gains.at(i, d) = same_sign ? std::max(gains.at(i, d) * 0.8, 0.01) : gains.at(i, d) + 0.2;
        step.at(i, d) = momentum * step.at(i, d) - cfg.learning_rate * gains.at(i, d) * g;
        y.at(i, d) += step.at(i, d);
      }
    }

    // recenter (canonical order keeps this permutation-stable)
    double m0 = 0, m1 = 0;
    for (int ii = 0; ii < n; ++ii) {
      const int i = order[static_cast<size_t>(ii)];
      m0 += y.at(i, 0);
      m1 += y.at(i, 1);
    }
    m0 /= n;
    m1 /= n;
    for (int i = 0; i < n; ++i) {
      y.at(i, 0) -= m0;
      y.at(i, 1) -= m1;
    }
  }

  result.points = std::move(y);
  return result;
}

TsneResult tsne(const EmbeddingDump& dump, const TsneConfig& cfg) {
  return tsne_points(dump.points, cfg);
}

double silhouette_by_labels(const Array<double>& points, const std::vector<int>& labels) {
  const int n = points.rows();
  if (static_cast<int>(labels.size()) != n)
    throw DimensionError("silhouette: label count does not match points");
  std::map<int, int> cluster_sizes;
  for (int l : labels) ++cluster_sizes[l];
  if (cluster_sizes.size() < 2) throw DataError("silhouette: need at least two clusters");

  const auto dist = [&](int i, int j) {
    double acc = 0;
    for (int d = 0; d < points.cols(); ++d) {
      const double diff = points.at(i, d) - points.at(j, d);
      acc += diff * diff;
    }
    return std::sqrt(acc);
  };

  double total = 0;
  for (int i = 0; i < n; ++i) {
    if (cluster_sizes.at(labels[static_cast<size_t>(i)]) <= 1) continue; // s(i) = 0 by convention
    std::map<int, std::pair<double, int>> sums; // cluster -> (sum dist, count)
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      auto& [s, cnt] = sums[labels[static_cast<size_t>(j)]];
      s += dist(i, j);
      ++cnt;
    }
    const auto& own = sums.at(labels[static_cast<size_t>(i)]);
    const double a = own.first / own.second;
    double b = std::numeric_limits<double>::infinity();
    for (const auto& [label, sc] : sums)
      if (label != labels[static_cast<size_t>(i)]) b = std::min(b, sc.first / sc.second);
    const double denom = std::max(a, b);
    if (denom > 0) total += (b - a) / denom;
  }
  return total / n;
}

double language_separation_score(const EmbeddingDump& dump) {
  bool man = false, eng = false;
  std::vector<int> labels;
  labels.reserve(dump.labels.size());
  for (const auto& sym : dump.labels) {
    labels.push_back(sym.language == Language::MAN ? 0 : 1);
    man = man || sym.language == Language::MAN;
    eng = eng || sym.language == Language::ENG;
  }
  if (!man || !eng)
    throw DataError("separation score: dump covers only one language");
  return silhouette_by_labels(dump.points, labels);
}

void write_dump_csv(const std::string& path, const EmbeddingDump& dump) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write dump CSV: " + path);
  f << "phoneme,language";
  for (int d = 0; d < dump.points.cols(); ++d) f << ",d" << d;
  f << "\n";
  for (int i = 0; i < dump.points.rows(); ++i) {
    f << dump.labels[static_cast<size_t>(i)].label << ','
      << text::language_name(dump.labels[static_cast<size_t>(i)].language);
    for (int d = 0; d < dump.points.cols(); ++d) f << ',' << dump.points.at(i, d);
    f << "\n";
  }
}

} // namespace mltts::analysis

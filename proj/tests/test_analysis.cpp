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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mltts/analysis.hpp"
#include "mltts/svg.hpp"
#include "support.hpp"

using namespace mltts;
using namespace mltts::analysis;
using namespace mltts::text;
using mltts::testing::TempDir;

namespace {

// three Gaussian blobs in high dimension
Array<double> gaussian_clusters(int per_cluster, int dim, double spread, double separation,
                                uint64_t seed, std::vector<int>* labels) {
  Rng rng(seed);
  Array<double> x({3 * per_cluster, dim});
  for (int c = 0; c < 3; ++c) {
    std::vector<double> center(static_cast<size_t>(dim));
    for (auto& v : center) v = separation * rng.normal();
    for (int k = 0; k < per_cluster; ++k) {
      const int i = c * per_cluster + k;
      for (int d = 0; d < dim; ++d) x.at(i, d) = center[static_cast<size_t>(d)] + spread * rng.normal();
      if (labels) labels->push_back(c);
    }
  }
  return x;
}

// k-NN label purity of the 2-d layout: fraction of points whose majority
// 5-neighborhood label matches their own.
double knn_purity(const Array<double>& y, const std::vector<int>& labels, int k) {
  const int n = y.rows();
  int good = 0;
  for (int i = 0; i < n; ++i) {
    std::vector<std::pair<double, int>> dist;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const double dx = y.at(i, 0) - y.at(j, 0);
      const double dy = y.at(i, 1) - y.at(j, 1);
      dist.push_back({dx * dx + dy * dy, labels[static_cast<size_t>(j)]});
    }
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
    std::map<int, int> votes;
    for (int kk = 0; kk < k; ++kk) ++votes[dist[static_cast<size_t>(kk)].second];
    int best = -1, best_count = -1;
    for (const auto& [label, count] : votes)
      if (count > best_count) {
        best = label;
        best_count = count;
      }
    if (best == labels[static_cast<size_t>(i)]) ++good;
  }
  return static_cast<double>(good) / n;
}

// minimal well-formedness scan: tag stack balance
bool xml_well_formed(const std::string& doc) {
  std::vector<std::string> stack;
  size_t pos = 0;
  while ((pos = doc.find('<', pos)) != std::string::npos) {
    const size_t end = doc.find('>', pos);
    if (end == std::string::npos) return false;
    std::string tag = doc.substr(pos + 1, end - pos - 1);
    pos = end + 1;
    if (tag.empty()) return false;
    if (tag[0] == '?' || tag[0] == '!') continue;
    const bool closing = tag[0] == '/';
    const bool self_closing = tag.back() == '/';
    if (closing) tag = tag.substr(1);
    if (self_closing) tag.pop_back();
    const std::string name = tag.substr(0, tag.find_first_of(" \t\n"));
    if (name.empty()) return false;
    if (closing) {
      if (stack.empty() || stack.back() != name) return false;
      stack.pop_back();
    } else if (!self_closing) {
      stack.push_back(name);
    }
  }
  return stack.empty();
}

} // namespace

TEST_CASE("tsne separates three gaussian clusters with > 0.9 purity") {
  std::vector<int> labels;
  const auto x = gaussian_clusters(10, 64, 0.3, 3.0, 71, &labels);
  TsneConfig cfg;
  cfg.perplexity = 8.0;
  cfg.n_iters = 600;
  cfg.seed = 5;
  const auto result = tsne_points(x, cfg);
  REQUIRE(result.points.shape == std::vector<int>{30, 2});
  const double purity = knn_purity(result.points, labels, 5);
  INFO("purity ", purity);
  CHECK(purity > 0.9);
}

TEST_CASE("tsne perplexity calibration hits the target entropy") {
  std::vector<int> labels;
  const auto x = gaussian_clusters(10, 16, 0.5, 2.0, 73, &labels);
  TsneConfig cfg;
  cfg.perplexity = 7.0;
  cfg.n_iters = 250;
  const auto result = tsne_points(x, cfg);
  const double target = std::log(cfg.perplexity);
  for (double h : result.calibrated_entropies) CHECK(std::abs(h - target) < 1e-4);
  // affinity rows are valid distributions after calibration
  CHECK(result.affinity_row_sum_max_dev < 1e-9);
}

TEST_CASE("tsne KL decreases across 50-iteration windows after exaggeration") {
  std::vector<int> labels;
  const auto x = gaussian_clusters(12, 32, 0.4, 2.5, 79, &labels);
  TsneConfig cfg;
  cfg.perplexity = 9.0;
  cfg.n_iters = 500;
  const auto result = tsne_points(x, cfg);
  REQUIRE(result.kl_history.size() == 500);
  for (size_t w = static_cast<size_t>(cfg.exaggeration_iters); w + 50 < result.kl_history.size();
       w += 50) {
    INFO("window at ", w);
    CHECK(result.kl_history[w + 50] <= result.kl_history[w] + 1e-8);
  }
}

TEST_CASE("tsne output is equivariant to input reordering") {
  std::vector<int> labels;
  const auto x = gaussian_clusters(8, 16, 0.4, 2.5, 83, &labels);
  TsneConfig cfg;
  cfg.perplexity = 6.0;
  cfg.n_iters = 300;
  const auto direct = tsne_points(x, cfg);

  // reverse the rows
  Array<double> reversed(x.shape);
  const int n = x.rows();
  for (int i = 0; i < n; ++i)
    for (int d = 0; d < x.cols(); ++d) reversed.at(i, d) = x.at(n - 1 - i, d);
  const auto perm = tsne_points(reversed, cfg);
  for (int i = 0; i < n; ++i) {
    CHECK(perm.points.at(i, 0) == direct.points.at(n - 1 - i, 0));
    CHECK(perm.points.at(i, 1) == direct.points.at(n - 1 - i, 1));
  }
}

TEST_CASE("tsne config validation and degenerate input") {
  std::vector<int> labels;
  const auto x = gaussian_clusters(4, 8, 0.4, 2.0, 89, &labels);
  TsneConfig cfg;
  cfg.perplexity = 20.0; // >= n/3
  CHECK_THROWS_AS(tsne_points(x, cfg), ConfigError);
  cfg.perplexity = 3.0;
  cfg.n_iters = 100;
  CHECK_THROWS_AS(tsne_points(x, cfg), ConfigError);
  cfg.n_iters = 250;
  CHECK_NOTHROW(tsne_points(x, cfg));

  Array<double> same = Array<double>::full({10, 4}, 1.25);
  TsneConfig degenerate_cfg;
  degenerate_cfg.perplexity = 3.0;
  CHECK_THROWS_AS(tsne_points(same, degenerate_cfg), DataError);
}

namespace {

EmbeddingDump two_mass_dump(double separation, uint64_t seed) {
  Rng rng(seed);
  EmbeddingDump dump;
  dump.points = Array<double>({20, 8});
  for (int i = 0; i < 20; ++i) {
    const bool eng = i >= 10;
    PhonemeSymbol sym;
    sym.label = (eng ? "E" : "M") + std::to_string(i);
    sym.language = eng ? Language::ENG : Language::MAN;
    sym.id = i;
    dump.labels.push_back(sym);
    for (int d = 0; d < 8; ++d)
      dump.points.at(i, d) = (eng ? separation : 0.0) + 0.01 * rng.normal();
  }
  return dump;
}

} // namespace

TEST_CASE("separation score: point masses, permuted labels, symmetry, rotation") {
  auto dump = two_mass_dump(50.0, 3);
  const double score = language_separation_score(dump);
  CHECK(score > 0.98);

  // label swap symmetry
  for (auto& sym : dump.labels)
    sym.language = sym.language == Language::MAN ? Language::ENG : Language::MAN;
  CHECK(language_separation_score(dump) == doctest::Approx(score).epsilon(1e-12));

  // random labels on a diffuse cloud collapse the score toward zero
  for (uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed * 131 + 7);
    EmbeddingDump diffuse;
    diffuse.points = Array<double>({24, 8});
    for (auto& v : diffuse.points.v) v = rng.normal();
    for (int i = 0; i < 24; ++i) {
      PhonemeSymbol sym;
      sym.label = "p" + std::to_string(i);
      sym.language = rng.integer(2) ? Language::MAN : Language::ENG;
      sym.id = i;
      diffuse.labels.push_back(sym);
    }
    bool man = false, eng = false;
    for (const auto& s : diffuse.labels) {
      man = man || s.language == Language::MAN;
      eng = eng || s.language == Language::ENG;
    }
    if (!man || !eng) continue;
    CHECK(std::abs(language_separation_score(diffuse)) < 0.1);
  }

  // rotation of the point cloud leaves the score unchanged
  auto rotated = two_mass_dump(50.0, 3);
  const double c = std::cos(0.7), s = std::sin(0.7);
  for (int i = 0; i < rotated.points.rows(); ++i) {
    const double a = rotated.points.at(i, 0), b = rotated.points.at(i, 1);
    rotated.points.at(i, 0) = c * a - s * b;
    rotated.points.at(i, 1) = s * a + c * b;
  }
  CHECK(language_separation_score(rotated) == doctest::Approx(score).epsilon(1e-9));

  // single-language dump is an error
  auto mono = two_mass_dump(50.0, 3);
  for (auto& sym : mono.labels) sym.language = Language::MAN;
  CHECK_THROWS_AS(language_separation_score(mono), DataError);
}

TEST_CASE("dump_embeddings: table rows, averaging, missing list") {
  const auto inv = PhonemeInventory::default_inventory();
  tts::ModelConfig cfg;
  cfg.phoneme_vocab = inv.size();
  cfg.embedding_dim = 16;
  cfg.encoder_dim = 16;
  cfg.decoder_dim = 20;
  cfg.attention_dim = 12;
  cfg.speaker_count = 2;
  cfg.speaker_dim = 4;
  cfg.prenet_dims = {16, 12};
  cfg.postnet_dim = 8;
  cfg.mel_dim = 5;
  cfg.linear_dim = 9;
  cfg.encoder_conv_kernel = 3;
  cfg.postnet_conv_kernel = 3;
  tts::TtsModel<float> model(cfg, 91);

  std::vector<UtteranceRecord> sample(2);
  sample[0].id = "a";
  sample[0].speaker = 0;
  sample[0].phonemes = "|MAN| a1 i3 SIL a1";
  sample[0].phoneme_ids = inv.parse(sample[0].phonemes);
  sample[1].id = "b";
  sample[1].speaker = 1;
  sample[1].phonemes = "|ENG| K";
  sample[1].phoneme_ids = inv.parse(sample[1].phonemes);

  const auto dump = dump_embeddings(model, inv, sample, DumpSource::PHONEME_EMBEDDING);
  CHECK(dump.points.rows() == 3); // a1, i3, K; SPECIAL excluded
  CHECK(dump.points.rows() <= inv.size());
  CHECK(dump.missing.size() == static_cast<size_t>(235 - 3)); // 235 language phonemes
  const auto& table = model.params().at("phoneme_embedding.table").value;
  for (int i = 0; i < dump.points.rows(); ++i) {
    const int id = dump.labels[static_cast<size_t>(i)].id;
    for (int d = 0; d < 16; ++d)
      CHECK(dump.points.at(i, d) == doctest::Approx(static_cast<double>(table.at(id, d))));
  }

  // encoder dump: a phoneme occurring once equals its raw encoder vector
  const auto enc_dump = dump_embeddings(model, inv, sample, DumpSource::ENCODER_OUTPUT);
  REQUIRE(enc_dump.points.rows() == 3);
  ad::Tape<float> tape;
  tape.set_grad_enabled(false);
  auto leaves = model.bind(tape);
  const auto enc = model.encode(tape, leaves, sample[1].phoneme_ids, 1);
  int row_k = -1;
  for (int i = 0; i < enc_dump.points.rows(); ++i)
    if (enc_dump.labels[static_cast<size_t>(i)].label == "K") row_k = i;
  REQUIRE(row_k >= 0);
  for (int d = 0; d < 16; ++d)
    CHECK(enc_dump.points.at(row_k, d) ==
          doctest::Approx(static_cast<double>(enc.encoder_outputs.value().at(0, d))));
}

TEST_CASE("dump CSV header and shape") {
  TempDir tmp("dumpcsv");
  auto dump = two_mass_dump(5.0, 9);
  const std::string path = (tmp.path() / "dump.csv").string();
  write_dump_csv(path, dump);
  const std::string content = mltts::testing::read_file(path);
  CHECK(content.rfind("phoneme,language,d0,d1,d2,d3,d4,d5,d6,d7\n", 0) == 0);
  CHECK(std::count(content.begin(), content.end(), '\n') == 21);
}

TEST_CASE("svg documents are well-formed") {
  auto dump = two_mass_dump(5.0, 11);
  TsneConfig cfg;
  cfg.perplexity = 5.0;
  cfg.n_iters = 250;
  const auto layout = tsne(dump, cfg);
  const std::string scatter = scatter_svg(layout.points, dump.labels, "embedding layout");
  CHECK(xml_well_formed(scatter));
  CHECK(scatter.find("Mandarin") != std::string::npos);

  // empty point set still yields a valid document with axes
  const std::string empty = scatter_svg(Array<double>(), {}, "empty");
  CHECK(xml_well_formed(empty));
  CHECK(empty.find("<rect") != std::string::npos);

  // heatmap cell count equals steps x T
  std::vector<tts::AttentionTrace<float>> traces(6);
  for (auto& t : traces) t.weights = Array<float>::full({9}, 1.0f / 9);
  const std::string heat = alignment_svg(traces, "alignment");
  CHECK(xml_well_formed(heat));
  size_t cells = 0, pos = 0;
  while ((pos = heat.find("class=\"cell\"", pos)) != std::string::npos) {
    ++cells;
    pos += 4;
  }
  CHECK(cells == 54);
}

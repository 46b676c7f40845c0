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

#include <string>
#include <vector>

#include "mltts/manifest.hpp"
#include "mltts/model.hpp"

namespace mltts::analysis {

enum class DumpSource { PHONEME_EMBEDDING, ENCODER_OUTPUT };

std::string dump_source_name(DumpSource s);
DumpSource dump_source_from_name(const std::string& s);

// One point per phoneme type covered by the sample; SPECIAL symbols are
// excluded. ENCODER_OUTPUT vectors are averaged over all occurrences.
struct EmbeddingDump {
  Array<double> points; // [n, d]
  std::vector<text::PhonemeSymbol> labels;
  DumpSource source = DumpSource::PHONEME_EMBEDDING;
  std::vector<std::string> missing; // covered by the inventory, absent from the sample
};

EmbeddingDump dump_embeddings(const tts::TtsModel<float>& model,
                              const text::PhonemeInventory& inv,
                              const std::vector<text::UtteranceRecord>& sample,
                              DumpSource source);

struct TsneConfig {
  double perplexity = 15.0;
  int n_iters = 1000;
  double learning_rate = 10.0;
  uint64_t seed = 1;
  double early_exaggeration = 4.0;
  int exaggeration_iters = 100;

  void validate(int n_points) const;
};

struct TsneResult {
  Array<double> points; // [n, 2]
  std::vector<double> kl_history; // KL against the un-exaggerated P per iteration
  std::vector<double> calibrated_entropies; // nats, one per point
  double affinity_row_sum_max_dev = 0.0; // max |sum(P_i) - 1| after calibration
};

// Exact t-SNE (no tree approximation): per-point perplexity calibration via
// binary search, then KL gradient descent with early exaggeration, momentum
// and adaptive gains. Initialization and all reductions are keyed on a
// content hash of each point, so reordering the input permutes the output
// bit-for-bit.
TsneResult tsne_points(const Array<double>& points, const TsneConfig& cfg);
TsneResult tsne(const EmbeddingDump& dump, const TsneConfig& cfg);

// Mean silhouette over points with integer cluster labels (Euclidean).
double silhouette_by_labels(const Array<double>& points, const std::vector<int>& labels);

// Silhouette with language as the cluster label on full-dimensional points;
// quantifies how separated the two languages are.
double language_separation_score(const EmbeddingDump& dump);

// CSV: header "phoneme,language,d0..d{d-1}".
void write_dump_csv(const std::string& path, const EmbeddingDump& dump);

} // namespace mltts::analysis

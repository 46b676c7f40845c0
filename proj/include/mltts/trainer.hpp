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

#include "mltts/feature_prep.hpp"
#include "mltts/model.hpp"

namespace mltts::train {

enum class Regime { AVM_POOLED, AVM_SPK_EMB_INCLUDE_TARGET, AVM_EXCLUDE_THEN_RETRAIN };

std::string regime_name(Regime r);
Regime regime_from_name(const std::string& s);

struct TrainingSchedule {
  int steps = 200;
  int phase2_steps = 100; // AVM_EXCLUDE_THEN_RETRAIN only
  double lr = 1e-3;
  double lr_decay = 0.9995; // per-step multiplier
  int batch_size = 8;
  double teacher_forcing = 1.0;
  uint64_t seed = 1;
};

// Declarative training run, loadable from a single JSON config.
struct TrainingRegime {
  Regime regime = Regime::AVM_SPK_EMB_INCLUDE_TARGET;
  int target_speaker = -1;
  std::string avm_manifest;
  std::string target_manifest; // optional for AVM_POOLED
  std::string features_dir;
  std::string inventory_path; // empty -> shipped default inventory
  tts::ModelConfig model;
  TrainingSchedule schedule;
  // which parameter groups stay frozen while the decoder side retrains
  std::vector<std::string> freeze_phase2 = {"encoder", "phoneme_embedding"};
  bool keep_traces = false;
  bool verify_exclusion = true;

  static TrainingRegime from_json(const std::string& text);
  std::string to_json() const;
};

struct StepLog {
  int step = 0;
  int phase = 1;
  double loss_total = 0, loss_mel = 0, loss_linear = 0, loss_stop = 0;
  double grad_norm = 0;
  double attention_entropy = 0;
  double forward_motion = 0;
  double lr = 0;
};

// One teacher-forced pass worth of attention evidence, kept for offline
// verification of the weight-sharing contract.
struct StoredTraceSet {
  int step = 0;
  std::string utterance_id;
  Array<float> phoneme_embeddings; // [T, d_p] at that step
  std::vector<tts::AttentionTrace<float>> traces;
};

struct TrainingResult {
  std::string checkpoint_path;
  std::string phase1_checkpoint_path; // empty unless two-phase
  std::string log_path;
  std::vector<StepLog> log;
  std::vector<StoredTraceSet> stored_traces;
  double initial_loss = 0;
  double final_loss = 0;
  uint64_t final_checkpoint_hash = 0;
  // exclusion soundness: largest |grad| ever seen on the excluded speaker row
  double max_excluded_row_grad = 0.0;
  std::map<std::string, uint64_t> phase1_group_hashes;
};

TrainingResult train(const TrainingRegime& regime, const std::string& out_dir);

struct AttentionDiagnostics {
  double entropy = 0.0;        // mean over steps, in [0, ln T]
  double forward_motion = 0.0; // fraction of non-decreasing argmax steps
};

template <typename S>
AttentionDiagnostics attention_diagnostics(const std::vector<tts::AttentionTrace<S>>& traces) {
  if (traces.empty()) throw DataError("attention_diagnostics: empty trace list");
  double entropy_sum = 0.0;
  int non_decreasing = 0;
  int prev_argmax = -1;
  for (size_t i = 0; i < traces.size(); ++i) {
    const auto& w = traces[i].weights;
    double h = 0.0;
    int argmax = 0;
    for (size_t j = 0; j < w.v.size(); ++j) {
      const double p = static_cast<double>(w.v[j]);
      if (p > 0.0) h -= p * std::log(p);
      if (w.v[j] > w.v[static_cast<size_t>(argmax)]) argmax = static_cast<int>(j);
    }
    entropy_sum += h;
    if (i > 0 && argmax >= prev_argmax) ++non_decreasing;
    prev_argmax = argmax;
  }
  AttentionDiagnostics d;
  d.entropy = entropy_sum / static_cast<double>(traces.size());
  d.forward_motion =
      traces.size() > 1 ? static_cast<double>(non_decreasing) / static_cast<double>(traces.size() - 1)
                        : 1.0;
  return d;
}

// Seeded subset of a source corpus restricted to one utterance language;
// writes the manifest plus a .provenance.json sidecar.
struct CorpusRegimeSpec {
  std::string source_manifest;
  text::UttLanguage target_set = text::UttLanguage::MAN;
  int size = 0;
  uint64_t seed = 1;
  std::string out_manifest;
};

text::CorpusStats build_corpus_regime(const CorpusRegimeSpec& spec,
                                      const text::PhonemeInventory& inv);

void write_training_log(const std::string& path, const std::vector<StepLog>& log,
                        const std::vector<std::pair<std::string, uint64_t>>& checkpoints);

} // namespace mltts::train

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

#include "mltts/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "mltts/checkpoint.hpp"

namespace mltts::train {

namespace fs = std::filesystem;
using namespace mltts::ad;
using namespace mltts::tts;

std::string regime_name(Regime r) {
  switch (r) {
    case Regime::AVM_POOLED: return "avm_pooled";
    case Regime::AVM_SPK_EMB_INCLUDE_TARGET: return "avm_spk_emb_include_target";
    case Regime::AVM_EXCLUDE_THEN_RETRAIN: return "avm_exclude_then_retrain";
  }
  return "avm_pooled";
}

Regime regime_from_name(const std::string& s) {
  if (s == "avm_pooled" || s == "AVM_POOLED") return Regime::AVM_POOLED;
  if (s == "avm_spk_emb_include_target" || s == "AVM_SPK_EMB_INCLUDE_TARGET")
    return Regime::AVM_SPK_EMB_INCLUDE_TARGET;
  if (s == "avm_exclude_then_retrain" || s == "AVM_EXCLUDE_THEN_RETRAIN")
    return Regime::AVM_EXCLUDE_THEN_RETRAIN;
  throw ConfigError("unknown training regime '" + s + "'");
}

std::string TrainingRegime::to_json() const {
  nlohmann::json j;
  j["version"] = 1;
  j["regime"] = regime_name(regime);
  j["target_speaker"] = target_speaker;
  j["avm_manifest"] = avm_manifest;
  j["target_manifest"] = target_manifest;
  j["features_dir"] = features_dir;
  j["inventory"] = inventory_path;
  j["model"] = nlohmann::json::parse(model.to_json());
  j["schedule"] = {{"steps", schedule.steps},
                   {"phase2_steps", schedule.phase2_steps},
                   {"lr", schedule.lr},
                   {"lr_decay", schedule.lr_decay},
                   {"batch_size", schedule.batch_size},
                   {"teacher_forcing", schedule.teacher_forcing},
                   {"seed", schedule.seed}};
  j["freeze_phase2"] = freeze_phase2;
  j["keep_traces"] = keep_traces;
  j["verify_exclusion"] = verify_exclusion;
  return j.dump(2);
}

TrainingRegime TrainingRegime::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad regime JSON: ") + e.what());
  }
  TrainingRegime r;
  try {
    if (j.contains("regime")) r.regime = regime_from_name(j["regime"].get<std::string>());
    r.target_speaker = j.value("target_speaker", r.target_speaker);
    r.avm_manifest = j.value("avm_manifest", std::string());
    r.target_manifest = j.value("target_manifest", std::string());
    r.features_dir = j.value("features_dir", std::string());
    r.inventory_path = j.value("inventory", std::string());
    if (j.contains("model")) r.model = ModelConfig::from_json(j["model"].dump());
    if (j.contains("schedule")) {
      const auto& s = j["schedule"];
      r.schedule.steps = s.value("steps", r.schedule.steps);
      r.schedule.phase2_steps = s.value("phase2_steps", r.schedule.phase2_steps);
      r.schedule.lr = s.value("lr", r.schedule.lr);
      r.schedule.lr_decay = s.value("lr_decay", r.schedule.lr_decay);
      r.schedule.batch_size = s.value("batch_size", r.schedule.batch_size);
      r.schedule.teacher_forcing = s.value("teacher_forcing", r.schedule.teacher_forcing);
      r.schedule.seed = s.value("seed", r.schedule.seed);
    }
    if (j.contains("freeze_phase2"))
      r.freeze_phase2 = j["freeze_phase2"].get<std::vector<std::string>>();
    r.keep_traces = j.value("keep_traces", r.keep_traces);
    r.verify_exclusion = j.value("verify_exclusion", r.verify_exclusion);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad regime field: ") + e.what());
  }
  return r;
}

namespace {

struct LoadedUtterance {
  text::UtteranceRecord record;
  Array<float> mel;
  Array<float> linear;
};

std::vector<LoadedUtterance> load_utterances(const std::vector<text::UtteranceRecord>& records,
                                             const std::string& features_dir,
                                             const ModelConfig& cfg) {
  std::vector<LoadedUtterance> out;
  out.reserve(records.size());
  for (const auto& rec : records) {
    const std::string path = (fs::path(features_dir) / (rec.id + ".ptfp")).string();
    dsp::FeaturePair fp = dsp::read_feature_cache(path);
    if (fp.mel.cols() != cfg.mel_dim || fp.linear.cols() != cfg.linear_dim)
      throw DataError("features for " + rec.id + " have dims " + std::to_string(fp.mel.cols()) +
                      "/" + std::to_string(fp.linear.cols()) + ", model expects " +
                      std::to_string(cfg.mel_dim) + "/" + std::to_string(cfg.linear_dim));
    if (rec.speaker >= cfg.speaker_count)
      throw ConfigError("speaker id " + std::to_string(rec.speaker) +
                        " exceeds configured speaker_count " + std::to_string(cfg.speaker_count));
    LoadedUtterance u;
    u.record = rec;
    u.mel = std::move(fp.mel);
    u.linear = std::move(fp.linear);
    out.push_back(std::move(u));
  }
  return out;
}

Array<float> to_float(const Array<float>& a) { return a; }

template <typename S>
AttentionTrace<float> trace_to_float(const AttentionTrace<S>& t) {
  const auto cast_arr = [](const Array<S>& a) {
    Array<float> out(a.shape);
    for (size_t i = 0; i < a.v.size(); ++i) out.v[i] = static_cast<float>(a.v[i]);
    return out;
  };
  AttentionTrace<float> out;
  out.scores = cast_arr(t.scores);
  out.weights = cast_arr(t.weights);
  out.context = cast_arr(t.context);
  if (t.pecv.numel() > 0) out.pecv = cast_arr(t.pecv);
  out.combined = cast_arr(t.combined);
  return out;
}

// One optimization phase over a fixed utterance list.
struct PhaseOutcome {
  double initial_loss = 0;
  double final_loss = 0;
};

PhaseOutcome run_phase(TtsModel<float>& model, std::vector<LoadedUtterance>& data,
                       const TrainingRegime& regime, int phase, int steps, Rng& order_rng,
                       Rng& train_rng, Adam<float>& adam, int& global_step,
                       std::vector<StepLog>& log, std::vector<StoredTraceSet>& stored,
                       double& max_excluded_grad) {
  PhaseOutcome outcome;
  if (steps <= 0 || data.empty()) return outcome;
  const auto& sched = regime.schedule;
  const int batch = std::max(1, std::min<int>(sched.batch_size, static_cast<int>(data.size())));

  std::vector<size_t> order(data.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  size_t cursor = order.size(); // forces a reshuffle on first use

  auto params = model.params().all();
  const bool watch_exclusion = regime.verify_exclusion &&
                               regime.regime == Regime::AVM_EXCLUDE_THEN_RETRAIN && phase == 1 &&
                               regime.target_speaker >= 0 &&
                               model.params().contains("speaker_embedding.table");

  for (int step = 0; step < steps; ++step) {
    model.params().zero_grad();
    double batch_loss = 0, batch_mel = 0, batch_lin = 0, batch_stop = 0;
    double entropy = 0, fmotion = 0;
    for (int b = 0; b < batch; ++b) {
      if (cursor >= order.size()) {
        order_rng.shuffle(order);
        cursor = 0;
      }
      LoadedUtterance& utt = data[order[cursor++]];
      Tape<float> tape;
      ForwardOptions<float> opts;
      opts.train = true;
      opts.teacher_forcing = sched.teacher_forcing;
      opts.rng = &train_rng;
      opts.keep_traces = true;
      const Array<float> mel = to_float(utt.mel);
      const Array<float> lin = to_float(utt.linear);
      auto out = model.forward_teacher_forced(tape, utt.record.phoneme_ids, utt.record.speaker,
                                              mel, lin, opts);
      tape.backward(out.loss_total);
      batch_loss += out.loss_total.value().v[0];
      batch_mel += out.loss_mel.value().v[0];
      batch_lin += out.loss_linear.value().v[0];
      batch_stop += out.loss_stop.value().v[0];
      const auto diag = attention_diagnostics(out.traces);
      entropy += diag.entropy;
      fmotion += diag.forward_motion;
      if (regime.keep_traces) {
        StoredTraceSet set;
        set.step = global_step;
        set.utterance_id = utt.record.id;
        set.phoneme_embeddings = out.phoneme_embedding_values;
        for (auto& t : out.traces) set.traces.push_back(trace_to_float(t));
        stored.push_back(std::move(set));
      }
    }

    if (watch_exclusion) {
      const auto& table = model.params().at("speaker_embedding.table");
      if (regime.target_speaker < table.value.shape[0]) {
        const int d = table.value.shape[1];
        for (int j = 0; j < d; ++j)
          max_excluded_grad = std::max(
              max_excluded_grad,
              std::abs(static_cast<double>(
                  table.grad.v[static_cast<size_t>(regime.target_speaker) * d + j])));
      }
    }

    double grad_norm_sq = 0;
    for (const auto* p : params) {
      if (!p->trainable) continue;
      for (float g : p->grad.v) grad_norm_sq += static_cast<double>(g) * g;
    }

    adam.set_lr(sched.lr * std::pow(sched.lr_decay, static_cast<double>(global_step)));
    adam.step(params);

    StepLog entry;
    entry.step = global_step++;
    entry.phase = phase;
    entry.loss_total = batch_loss / batch;
    entry.loss_mel = batch_mel / batch;
    entry.loss_linear = batch_lin / batch;
    entry.loss_stop = batch_stop / batch;
    entry.grad_norm = std::sqrt(grad_norm_sq);
    entry.attention_entropy = entropy / batch;
    entry.forward_motion = fmotion / batch;
    entry.lr = adam.lr();
    if (step == 0) outcome.initial_loss = entry.loss_total;
    outcome.final_loss = entry.loss_total;
    log.push_back(entry);
  }
  return outcome;
}

} // namespace

TrainingResult train(const TrainingRegime& regime, const std::string& out_dir) {
  regime.model.validate();
  fs::create_directories(out_dir);

  const text::PhonemeInventory inv =
      regime.inventory_path.empty()
          ? text::PhonemeInventory::default_inventory()
          : text::PhonemeInventory::from_json([&] {
              std::ifstream f(regime.inventory_path);
              if (!f) throw IoError("cannot open inventory: " + regime.inventory_path);
              return std::string((std::istreambuf_iterator<char>(f)),
                                 std::istreambuf_iterator<char>());
            }());
  if (regime.model.phoneme_vocab != inv.size())
    throw ConfigError("model phoneme_vocab " + std::to_string(regime.model.phoneme_vocab) +
                      " does not match inventory size " + std::to_string(inv.size()));

  if (regime.regime == Regime::AVM_POOLED &&
      regime.model.speaker_placement != SpeakerPlacement::NONE)
    throw ConfigError("AVM_POOLED treats all data as one speaker; set speaker_placement none");

  std::vector<text::UtteranceRecord> avm_records, target_records;
  if (!regime.avm_manifest.empty()) avm_records = text::load_manifest(regime.avm_manifest, inv);
  if (!regime.target_manifest.empty())
    target_records = text::load_manifest(regime.target_manifest, inv);

  if (regime.regime == Regime::AVM_EXCLUDE_THEN_RETRAIN) {
    if (regime.target_speaker < 0)
      throw ConfigError("AVM_EXCLUDE_THEN_RETRAIN requires target_speaker");
    for (const auto& rec : avm_records)
      if (rec.speaker == regime.target_speaker)
        throw ConfigError("target speaker " + std::to_string(regime.target_speaker) +
                          " present in the exclusion-phase manifest (utterance " + rec.id + ")");
    if (regime.target_manifest.empty())
      throw ConfigError("AVM_EXCLUDE_THEN_RETRAIN requires a target_manifest");
  }

  // Assemble phase datasets.
  std::vector<text::UtteranceRecord> phase1_records = avm_records;
  if (regime.regime == Regime::AVM_SPK_EMB_INCLUDE_TARGET || regime.regime == Regime::AVM_POOLED)
    phase1_records.insert(phase1_records.end(), target_records.begin(), target_records.end());
  if (regime.regime == Regime::AVM_POOLED)
    for (auto& rec : phase1_records) rec.speaker = 0; // one pooled voice

  auto phase1_data = load_utterances(phase1_records, regime.features_dir, regime.model);

  TtsModel<float> model(regime.model, regime.schedule.seed);
  Adam<float> adam(regime.schedule.lr);
  Rng order_rng(regime.schedule.seed ^ 0x5851f42d4c957f2dull);
  Rng train_rng(regime.schedule.seed ^ 0x14057b7ef767814full);

  TrainingResult result;
  int global_step = 0;

  const auto phase1 =
      run_phase(model, phase1_data, regime, 1, regime.schedule.steps, order_rng, train_rng, adam,
                global_step, result.log, result.stored_traces, result.max_excluded_row_grad);
  result.initial_loss = phase1.initial_loss;
  result.final_loss = phase1.final_loss;

  nlohmann::json aux;
  aux["inventory"] = nlohmann::json::parse(inv.to_json());
  aux["regime"] = regime_name(regime.regime);
  aux["seed"] = regime.schedule.seed;
  const std::string stats_path = (fs::path(regime.features_dir) / "stats.json").string();
  if (fs::exists(stats_path)) {
    std::ifstream f(stats_path);
    nlohmann::json stats_json;
    f >> stats_json;
    aux["feature_stats"] = stats_json;
  }

  std::vector<std::pair<std::string, uint64_t>> checkpoints;
  if (regime.regime == Regime::AVM_EXCLUDE_THEN_RETRAIN) {
    result.phase1_checkpoint_path = (fs::path(out_dir) / "phase1.ptck").string();
    save_checkpoint(result.phase1_checkpoint_path, model, aux.dump());
    checkpoints.emplace_back(result.phase1_checkpoint_path,
                             checkpoint_file_hash(result.phase1_checkpoint_path));
    for (const auto& group : regime.freeze_phase2)
      result.phase1_group_hashes[group] = model.params().value_hash_of_group(group);

    std::map<std::string, bool> mask;
    for (const auto& group : regime.freeze_phase2) mask[group] = false;
    model.params().set_trainable_by_group(mask, true);

    auto phase2_data = load_utterances(target_records, regime.features_dir, regime.model);
    Adam<float> adam2(regime.schedule.lr);
    const auto phase2 = run_phase(model, phase2_data, regime, 2, regime.schedule.phase2_steps,
                                  order_rng, train_rng, adam2, global_step, result.log,
                                  result.stored_traces, result.max_excluded_row_grad);
    if (regime.schedule.phase2_steps > 0) result.final_loss = phase2.final_loss;
  }

  result.checkpoint_path = (fs::path(out_dir) / "final.ptck").string();
  save_checkpoint(result.checkpoint_path, model, aux.dump());
  result.final_checkpoint_hash = checkpoint_file_hash(result.checkpoint_path);
  checkpoints.emplace_back(result.checkpoint_path, result.final_checkpoint_hash);

  result.log_path = (fs::path(out_dir) / "training_log.jsonl").string();
  write_training_log(result.log_path, result.log, checkpoints);
  return result;
}

text::CorpusStats build_corpus_regime(const CorpusRegimeSpec& spec,
                                      const text::PhonemeInventory& inv) {
  if (spec.size < 0) throw ConfigError("corpus regime: size must be nonnegative");
  const auto records = text::load_manifest(spec.source_manifest, inv);
  std::vector<size_t> candidates;
  for (size_t i = 0; i < records.size(); ++i)
    if (records[i].language == spec.target_set) candidates.push_back(i);
  if (static_cast<int>(candidates.size()) < spec.size)
    throw DataError("corpus regime: requested " + std::to_string(spec.size) + " " +
                    text::utt_language_name(spec.target_set) + " utterances, only " +
                    std::to_string(candidates.size()) + " available");

  Rng rng(spec.seed);
  rng.shuffle(candidates);
  candidates.resize(static_cast<size_t>(spec.size));
  std::sort(candidates.begin(), candidates.end());

  std::vector<text::UtteranceRecord> subset;
  subset.reserve(candidates.size());
  for (size_t idx : candidates) subset.push_back(records[idx]);
  text::write_manifest(spec.out_manifest, subset);

  nlohmann::json prov;
  prov["source"] = spec.source_manifest;
  prov["target_set"] = text::utt_language_name(spec.target_set);
  prov["size"] = spec.size;
  prov["seed"] = spec.seed;
  std::ofstream pf(spec.out_manifest + ".provenance.json");
  pf << prov.dump(2) << "\n";

  return text::corpus_stats(subset);
}

void write_training_log(const std::string& path, const std::vector<StepLog>& log,
                        const std::vector<std::pair<std::string, uint64_t>>& checkpoints) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write training log: " + path);
  for (const auto& e : log) {
    nlohmann::json j;
    j["step"] = e.step;
    j["phase"] = e.phase;
    j["loss"] = e.loss_total;
    j["loss_mel"] = e.loss_mel;
    j["loss_linear"] = e.loss_linear;
    j["loss_stop"] = e.loss_stop;
    j["grad_norm"] = e.grad_norm;
    j["attention_entropy"] = e.attention_entropy;
    j["forward_motion"] = e.forward_motion;
    j["lr"] = e.lr;
    f << j.dump() << "\n";
  }
  for (const auto& [ckpt, hash] : checkpoints) {
    nlohmann::json j;
    j["event"] = "checkpoint";
    // file name only: the log sits next to its checkpoints, and artifacts
    // must be byte-identical across output directories
    j["file"] = fs::path(ckpt).filename().string();
    j["hash"] = hash;
    f << j.dump() << "\n";
  }
}

} // namespace mltts::train

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

#include "mltts/checkpoint.hpp"
#include "mltts/model.hpp"
#include "support.hpp"

using namespace mltts;
using namespace mltts::ad;
using namespace mltts::tts;
using mltts::testing::TempDir;

namespace {

ModelConfig micro_config(AttentionVariant v = AttentionVariant::BASE,
                         SpeakerPlacement p = SpeakerPlacement::NONE) {
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
  c.max_decoder_steps = 30;
  return c;
}

template <typename S>
Array<S> random_target(int rows, int cols, uint64_t seed) {
  Rng rng(seed);
  Array<S> a({rows, cols});
  for (auto& x : a.v) x = static_cast<S>(0.2 + 0.6 * rng.uniform());
  return a;
}

const std::vector<int> kToyIds = {4, 7, 9, 1};

} // namespace

TEST_CASE("RES config requires matching embedding and encoder dims at build") {
  ModelConfig c = micro_config(AttentionVariant::RES);
  c.embedding_dim = 6; // != encoder_dim 8
  CHECK_THROWS_WITH_AS((TtsModel<double>(c, 1)), doctest::Contains("RES"), ConfigError);
}

TEST_CASE("encode shapes, SE-ENC memory width and determinism") {
  const ModelConfig cfg = micro_config(AttentionVariant::BASE, SpeakerPlacement::SE_ENC);
  TtsModel<double> model(cfg, 7);
  Tape<double> tape;
  auto leaves = model.bind(tape);
  const auto enc = model.encode(tape, leaves, kToyIds, 1);
  CHECK(enc.length == 4);
  CHECK(enc.phoneme_embeddings.shape() == std::vector<int>{4, 8});
  CHECK(enc.encoder_outputs.shape() == std::vector<int>{4, 8});
  CHECK(enc.memory.shape() == std::vector<int>{4, 12}); // d_h + d_spk for every step
  CHECK(enc.memory_proj.shape() == std::vector<int>{4, 6});

  // bit-identical on repeat
  Tape<double> tape2;
  auto leaves2 = model.bind(tape2);
  const auto enc2 = model.encode(tape2, leaves2, kToyIds, 1);
  CHECK(enc.memory.value().v == enc2.memory.value().v);
}

TEST_CASE("encode rejects invalid speaker ids naming the range") {
  TtsModel<double> model(micro_config(AttentionVariant::BASE, SpeakerPlacement::SE_DEC), 7);
  Tape<double> tape;
  auto leaves = model.bind(tape);
  CHECK_THROWS_WITH_AS(model.encode(tape, leaves, kToyIds, 5), doctest::Contains("[0,3)"),
                       ConfigError);
}

TEST_CASE("RES equals BASE bit-for-bit when the phoneme table is zeroed") {
  const ModelConfig base_cfg = micro_config(AttentionVariant::BASE);
  ModelConfig res_cfg = base_cfg;
  res_cfg.attention_variant = AttentionVariant::RES;
  // identical parameter sets and RNG draw order -> identical remaining params
  TtsModel<double> base(base_cfg, 42);
  TtsModel<double> res(res_cfg, 42);
  base.params().at("phoneme_embedding.table").value.fill(0.0);
  res.params().at("phoneme_embedding.table").value.fill(0.0);

  const auto mel = random_target<double>(6, 5, 3);
  const auto lin = random_target<double>(6, 9, 4);
  Tape<double> tb, tr;
  ForwardOptions<double> opts;
  const auto out_b = base.forward_teacher_forced(tb, kToyIds, 0, mel, lin, opts);
  const auto out_r = res.forward_teacher_forced(tr, kToyIds, 0, mel, lin, opts);
  CHECK(out_b.mel.value().v == out_r.mel.value().v);
  CHECK(out_b.linear.value().v == out_r.linear.value().v);
  CHECK(out_b.stop_probs.value().v == out_r.stop_probs.value().v);

  // and with a nonzero table they genuinely differ
  TtsModel<double> res2(res_cfg, 42);
  Tape<double> tr2;
  const auto out_r2 = res2.forward_teacher_forced(tr2, kToyIds, 0, mel, lin, opts);
  CHECK(out_r2.mel.value().v != out_b.mel.value().v);
}

TEST_CASE("speaker_dim zero degenerates SE-ENC and SE-DEC to NONE exactly") {
  ModelConfig none_cfg = micro_config(AttentionVariant::BASE, SpeakerPlacement::NONE);
  none_cfg.speaker_dim = 0;
  const auto mel = random_target<double>(6, 5, 5);
  const auto lin = random_target<double>(6, 9, 6);

  TtsModel<double> none(none_cfg, 11);
  Tape<double> tn;
  ForwardOptions<double> opts;
  const auto out_none = none.forward_teacher_forced(tn, kToyIds, 0, mel, lin, opts);

  for (SpeakerPlacement p : {SpeakerPlacement::SE_ENC, SpeakerPlacement::SE_DEC}) {
    ModelConfig cfg = none_cfg;
    cfg.speaker_placement = p;
    TtsModel<double> model(cfg, 11);
    Tape<double> tape;
    const auto out = model.forward_teacher_forced(tape, kToyIds, 1, mel, lin, opts);
    CHECK(out.mel.value().v == out_none.mel.value().v);
    CHECK(out.linear.value().v == out_none.linear.value().v);
    CHECK(out.stop_probs.value().v == out_none.stop_probs.value().v);
  }
}

TEST_CASE("attention: identical memory rows make the context that row (convexity)") {
  const ModelConfig cfg = micro_config();
  TtsModel<double> model(cfg, 13);
  Tape<double> tape;
  auto leaves = model.bind(tape);

  EncodedUtterance<double> enc;
  enc.length = 5;
  Rng rng(3);
  Array<double> row({1, cfg.encoder_dim});
  for (auto& x : row.v) x = rng.uniform(-1, 1);
  Array<double> mem({5, cfg.encoder_dim});
  for (int t = 0; t < 5; ++t)
    std::copy(row.v.begin(), row.v.end(), mem.v.begin() + t * cfg.encoder_dim);
  enc.memory = tape.constant(mem);
  enc.encoder_outputs = enc.memory;
  enc.phoneme_embeddings = tape.constant(Array<double>::zeros({5, cfg.embedding_dim}));
  enc.memory_proj = matmul(enc.memory, leaves.at("attention.memory_w"));

  auto s_prev = tape.constant(random_target<double>(1, cfg.decoder_dim, 17));
  const auto att = model.attention_step(leaves, s_prev, enc);
  for (int j = 0; j < cfg.encoder_dim; ++j)
    CHECK(att.context.value().v[static_cast<size_t>(j)] ==
          doctest::Approx(row.v[static_cast<size_t>(j)]).epsilon(1e-12));
}

TEST_CASE("one-hot weights pick out h_1 and p_1 exactly") {
  // Eq.1/Eq.4 contract at the op level: a convex combination with a one-hot
  // weight row is exact row selection.
  Rng rng(19);
  Tape<double> tape;
  Array<double> h({4, 6}), p({4, 3});
  for (auto& x : h.v) x = rng.uniform(-1, 1);
  for (auto& x : p.v) x = rng.uniform(-1, 1);
  auto ht = tape.constant(h), pt = tape.constant(p);
  auto onehot = tape.constant(Array<double>({1, 4}, {1, 0, 0, 0}));
  const auto c = matmul(onehot, ht);
  const auto cp = matmul(onehot, pt);
  for (int j = 0; j < 6; ++j) CHECK(c.value().v[static_cast<size_t>(j)] == h.at(0, j));
  for (int j = 0; j < 3; ++j) CHECK(cp.value().v[static_cast<size_t>(j)] == p.at(0, j));
}

TEST_CASE("attention weights are a distribution on every step") {
  for (auto variant : {AttentionVariant::BASE, AttentionVariant::PECV, AttentionVariant::RES}) {
    TtsModel<double> model(micro_config(variant, SpeakerPlacement::SE_DEC), 23);
    Tape<double> tape;
    const auto mel = random_target<double>(8, 5, 31);
    const auto lin = random_target<double>(8, 9, 32);
    ForwardOptions<double> opts;
    const auto out = model.forward_teacher_forced(tape, kToyIds, 0, mel, lin, opts);
    REQUIRE(!out.traces.empty());
    for (const auto& trace : out.traces) {
      double sum = 0;
      for (double w : trace.weights.v) {
        CHECK(w >= 0.0);
        CHECK(w <= 1.0);
        sum += w;
      }
      CHECK(std::abs(sum - 1.0) < 1e-5);
    }
  }
}

TEST_CASE("PECV weight sharing: offline recomputation matches stored pecv") {
  TtsModel<double> model(micro_config(AttentionVariant::PECV, SpeakerPlacement::SE_DEC), 29);
  Tape<double> tape;
  const auto mel = random_target<double>(8, 5, 33);
  const auto lin = random_target<double>(8, 9, 34);
  ForwardOptions<double> opts;
  const auto out = model.forward_teacher_forced(tape, kToyIds, 1, mel, lin, opts);
  const auto& p = out.phoneme_embedding_values; // [T, d_p]
  for (const auto& trace : out.traces) {
    REQUIRE(trace.pecv.numel() == p.cols());
    for (int d = 0; d < p.cols(); ++d) {
      double acc = 0;
      for (int j = 0; j < p.rows(); ++j)
        acc += trace.weights.v[static_cast<size_t>(j)] * p.at(j, d);
      CHECK(std::abs(acc - trace.pecv.v[static_cast<size_t>(d)]) < 1e-6);
    }
  }
}

TEST_CASE("forward output shapes and stop targets") {
  TtsModel<double> model(micro_config(), 37);
  Tape<double> tape;
  const int t_frames = 7; // odd: padded to 8 with r=2
  const auto mel = random_target<double>(t_frames, 5, 41);
  const auto lin = random_target<double>(t_frames, 9, 42);
  ForwardOptions<double> opts;
  const auto out = model.forward_teacher_forced(tape, kToyIds, 0, mel, lin, opts);
  CHECK(out.n_frames_padded == 8);
  CHECK(out.mel.shape() == std::vector<int>{8, 5});
  CHECK(out.linear.shape() == std::vector<int>{8, 9});
  CHECK(out.stop_probs.shape() == std::vector<int>{4, 1});
  CHECK(out.traces.size() == 4);
  CHECK(out.loss_total.value().v[0] > 0.0);
}

TEST_CASE("decoder input width includes prenet, speaker and context slots") {
  const ModelConfig cfg = micro_config(AttentionVariant::BASE, SpeakerPlacement::SE_DEC);
  TtsModel<double> model(cfg, 43);
  const auto& w_ih = model.params().at("decoder.lstm.w_ih").value;
  CHECK(w_ih.shape[0] == cfg.prenet_dims.back() + cfg.speaker_dim + cfg.context_dim());

  // PECV projects the concatenated context back to encoder_dim
  const ModelConfig pcfg = micro_config(AttentionVariant::PECV, SpeakerPlacement::SE_ENC);
  TtsModel<double> pecv(pcfg, 43);
  CHECK(pecv.params().at("decoder.lstm.w_ih").value.shape[0] ==
        pcfg.prenet_dims.back() + pcfg.encoder_dim);
  CHECK(pecv.params().at("attention.ctx_proj.w").value.shape ==
        std::vector<int>{pcfg.memory_dim() + pcfg.embedding_dim, pcfg.encoder_dim});
}

TEST_CASE("perfect-oracle predictions give zero loss") {
  const auto mel = random_target<double>(6, 5, 51);
  const auto lin = random_target<double>(6, 9, 52);
  Array<double> stop({3, 1}, {0.0, 0.0, 1.0});
  const auto losses = eval_losses(mel, mel, lin, lin, stop, stop);
  CHECK(losses.mel == 0.0);
  CHECK(losses.linear == 0.0);
  CHECK(losses.stop == 0.0);
  CHECK(losses.total == 0.0);
}

TEST_CASE("end-to-end gradient of the loss wrt the phoneme embedding table") {
  // 3-phoneme, 4-frame toy instance at 64-bit against central differences.
  const ModelConfig cfg = micro_config(AttentionVariant::PECV, SpeakerPlacement::SE_DEC);
  TtsModel<double> model(cfg, 61);
  const std::vector<int> ids = {4, 6, 1};
  const auto mel = random_target<double>(4, 5, 62);
  const auto lin = random_target<double>(4, 9, 63);

  const auto eval = [&]() {
    Tape<double> tape;
    ForwardOptions<double> opts;
    const auto out = model.forward_teacher_forced(tape, ids, 1, mel, lin, opts);
    return out.loss_total.value().v[0];
  };

  model.params().zero_grad();
  Tape<double> tape;
  ForwardOptions<double> opts;
  const auto out = model.forward_teacher_forced(tape, ids, 1, mel, lin, opts);
  tape.backward(out.loss_total);

  auto& table = model.params().at("phoneme_embedding.table");
  const double h = 1e-5;
  double max_rel = 0.0;
  // all rows touched by the utterance, a few coordinates each
  for (int id : {4, 6, 1}) {
    for (int d = 0; d < cfg.embedding_dim; d += 3) {
      const size_t at = static_cast<size_t>(id) * cfg.embedding_dim + d;
      const double keep = table.value.v[at];
      table.value.v[at] = keep + h;
      const double fp = eval();
      table.value.v[at] = keep - h;
      const double fm = eval();
      table.value.v[at] = keep;
      const double numeric = (fp - fm) / (2 * h);
      max_rel = std::max(max_rel, mltts::testing::rel_err(table.grad.v[at], numeric));
    }
  }
  INFO("max rel err: ", max_rel);
  CHECK(max_rel < 1e-3);
}

TEST_CASE("synthesize on an untrained model terminates at the step cap") {
  TtsModel<float> model(micro_config(AttentionVariant::BASE, SpeakerPlacement::SE_DEC), 71);
  const auto result = model.synthesize(kToyIds, 0, 12);
  CHECK(result.steps <= 12);
  if (result.steps == 12) CHECK(result.hit_max_steps);
  CHECK(static_cast<size_t>(result.steps) == result.traces.size());
  CHECK(result.mel.rows() == result.steps * 2);
  CHECK(result.linear.cols() == 9);
}

TEST_CASE("checkpoint round trip preserves parameters and validates shapes") {
  TempDir tmp("ckpt");
  const ModelConfig cfg = micro_config(AttentionVariant::PECV, SpeakerPlacement::SE_ENC);
  TtsModel<float> model(cfg, 77);
  const std::string path = (tmp.path() / "m.ptck").string();
  save_checkpoint(path, model, R"({"note":"toy"})");

  const auto data = load_checkpoint(path);
  CHECK(data.config.attention_variant == AttentionVariant::PECV);
  CHECK(data.aux_json.find("toy") != std::string::npos);
  auto restored = model_from_checkpoint<float>(data);
  for (const auto* p : model.params().all()) {
    const auto& q = restored.params().at(p->name);
    CHECK(q.value.v == p->value.v);
  }

  // same bytes on re-save, so checkpoint hashing is stable
  const std::string path2 = (tmp.path() / "m2.ptck").string();
  save_checkpoint(path2, model, R"({"note":"toy"})");
  CHECK(checkpoint_file_hash(path) == checkpoint_file_hash(path2));

  // a tensor with the wrong shape is rejected
  CheckpointData corrupted = data;
  corrupted.tensors.at("decoder.stop.b") = Array<float>({2, 2});
  CHECK_THROWS_WITH_AS(model_from_checkpoint<float>(corrupted), doctest::Contains("decoder.stop.b"),
                       DataError);
}

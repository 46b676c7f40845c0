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

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "mltts/model_config.hpp"
#include "mltts/nn.hpp"
#include "mltts/ops.hpp"

namespace mltts::tts {

// Per-decoder-step attention record: scores e_ij, weights alpha_ij, context
// c_i, the phoneme-embedding context c'_i (PECV only) and the combined C_i.
template <typename S>
struct AttentionTrace {
  Array<S> scores;   // [T]
  Array<S> weights;  // [T]
  Array<S> context;  // [d_mem]
  Array<S> pecv;     // [d_p]; empty unless PECV
  Array<S> combined; // [d_ctx]
};

template <typename S>
struct EncodedUtterance {
  int length = 0;
  ad::Tensor<S> phoneme_embeddings; // [T, d_p]
  ad::Tensor<S> encoder_outputs;    // [T, d_h], post-residual when RES
  ad::Tensor<S> memory;             // [T, d_mem]
  ad::Tensor<S> memory_proj;        // [T, d_a], U h_j precomputed
  ad::Tensor<S> speaker;            // [1, d_spk]; invalid when unused
};

template <typename S>
struct DecoderState {
  ad::Tensor<S> h; // [1, d_s]; the s_{i-1} the score function reads
  ad::Tensor<S> c; // [1, d_s]
};

template <typename S>
struct ForwardOptions {
  bool train = false;
  double teacher_forcing = 1.0;
  Rng* rng = nullptr; // needed when train && (dropout > 0 || teacher_forcing < 1)
  bool keep_traces = true;
};

template <typename S>
struct ForwardResult {
  ad::Tensor<S> mel;        // [T_pad, mel_dim]
  ad::Tensor<S> linear;     // [T_pad, linear_dim]
  ad::Tensor<S> stop_probs; // [G, 1]
  ad::Tensor<S> loss_mel, loss_linear, loss_stop, loss_total; // scalars
  std::vector<AttentionTrace<S>> traces;
  Array<S> phoneme_embedding_values; // [T, d_p] copy for offline trace checks
  int n_frames_padded = 0;
};

struct SynthesisResult {
  Array<float> mel;    // [T, mel_dim]
  Array<float> linear; // [T, linear_dim]
  std::vector<AttentionTrace<float>> traces;
  Array<float> phoneme_embedding_values;
  int steps = 0;
  bool hit_max_steps = false;
};

struct LossBreakdown {
  double mel = 0.0, linear = 0.0, stop = 0.0, total = 0.0;
};

// Plain-array loss evaluation (L1 + L1 + clamped BCE on probabilities),
// independent of the tape path. Feeding the targets as predictions gives an
// exactly zero total.
LossBreakdown eval_losses(const Array<double>& mel_pred, const Array<double>& mel_target,
                          const Array<double>& lin_pred, const Array<double>& lin_target,
                          const Array<double>& stop_pred, const Array<double>& stop_target);

// Encoder-decoder network: phoneme embedding, conv + BiGRU encoder, additive
// attention with the BASE / PECV / RES variants, speaker conditioning at
// NONE / SE-ENC / SE-DEC, LSTM decoder with prenet, conv post-net for the
// linear spectrogram.
template <typename S>
class TtsModel {
public:
  TtsModel(const ModelConfig& cfg, uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  ad::ParamStore<S>& params() { return params_; }
  const ad::ParamStore<S>& params() const { return params_; }

  // Parameter leaves bound to one tape (one per forward pass).
  class Leaves {
  public:
    ad::Tensor<S> at(const std::string& name) const {
      auto it = m_.find(name);
      if (it == m_.end()) throw ConfigError("unbound parameter leaf: " + name);
      return it->second;
    }

  private:
    friend class TtsModel;
    std::map<std::string, ad::Tensor<S>> m_;
  };

  Leaves bind(ad::Tape<S>& tape) const;

  EncodedUtterance<S> encode(ad::Tape<S>& tape, const Leaves& leaves,
                             const std::vector<int>& phoneme_ids, int speaker_id) const;

  struct AttentionOut {
    ad::Tensor<S> context; // [1, d_ctx]
    AttentionTrace<S> trace;
  };
  AttentionOut attention_step(const Leaves& leaves, ad::Tensor<S> s_prev,
                              const EncodedUtterance<S>& enc, bool want_trace = true) const;

  struct DecodeOut {
    ad::Tensor<S> mel_group; // [1, r * mel_dim]
    ad::Tensor<S> stop_prob; // [1, 1]
  };
  DecodeOut decode_step(ad::Tape<S>& tape, const Leaves& leaves, ad::Tensor<S> prev_group,
                        DecoderState<S>& state, ad::Tensor<S> context,
                        const EncodedUtterance<S>& enc, const ForwardOptions<S>& opts) const;

  // Post-net: predicted mel -> linear spectrogram.
  ad::Tensor<S> postnet(const Leaves& leaves, ad::Tensor<S> mel) const;

  ForwardResult<S> forward_teacher_forced(ad::Tape<S>& tape, const std::vector<int>& phoneme_ids,
                                          int speaker_id, const Array<S>& mel_target,
                                          const Array<S>& linear_target,
                                          const ForwardOptions<S>& opts) const;

  SynthesisResult synthesize(const std::vector<int>& phoneme_ids, int speaker_id,
                             int max_steps_override = 0) const;

  DecoderState<S> initial_state(ad::Tape<S>& tape) const;

private:
  ModelConfig cfg_;
  mutable ad::ParamStore<S> params_;

  void build_params(uint64_t seed);
};

using TtsModelF = TtsModel<float>;
using TtsModelD = TtsModel<double>;

} // namespace mltts::tts

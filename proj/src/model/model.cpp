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

#include "mltts/model.hpp"

#include <algorithm>
#include <cmath>

namespace mltts::tts {

using namespace mltts::ad;

LossBreakdown eval_losses(const Array<double>& mel_pred, const Array<double>& mel_target,
                          const Array<double>& lin_pred, const Array<double>& lin_target,
                          const Array<double>& stop_pred, const Array<double>& stop_target) {
  const auto l1 = [](const Array<double>& a, const Array<double>& b) {
    if (!a.same_shape(b))
      throw DimensionError("loss: shape mismatch " + shape_str(a.shape) + " vs " +
                           shape_str(b.shape));
    double acc = 0.0;
    for (size_t i = 0; i < a.v.size(); ++i) acc += std::abs(a.v[i] - b.v[i]);
    return a.v.empty() ? 0.0 : acc / static_cast<double>(a.v.size());
  };
  LossBreakdown out;
  out.mel = l1(mel_pred, mel_target);
  out.linear = l1(lin_pred, lin_target);
  if (!stop_pred.same_shape(stop_target))
    throw DimensionError("loss: stop shape mismatch");
  double acc = 0.0;
  const double eps = 1e-7;
  for (size_t i = 0; i < stop_pred.v.size(); ++i) {
    const double p = std::clamp(stop_pred.v[i], eps, 1.0 - eps);
    const double y = stop_target.v[i];
    if (stop_pred.v[i] == y) continue;
    acc += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
  }
  out.stop = stop_pred.v.empty() ? 0.0 : acc / static_cast<double>(stop_pred.v.size());
  out.total = out.mel + out.linear + out.stop;
  return out;
}

template <typename S>
TtsModel<S>::TtsModel(const ModelConfig& cfg, uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  build_params(seed);
}

template <typename S>
void TtsModel<S>::build_params(uint64_t seed) {
  Rng rng(seed);
  const ModelConfig& c = cfg_;
  const int gru_h = c.encoder_dim / 2;
  const int k_enc = c.encoder_conv_kernel;
  const int k_post = c.postnet_conv_kernel;
  const int group = c.reduction_factor * c.mel_dim;

  params_.create("phoneme_embedding.table", {c.phoneme_vocab, c.embedding_dim}, Init::Normal, rng,
                 0.3);
  if (c.speaker_placement != SpeakerPlacement::NONE)
    params_.create("speaker_embedding.table", {c.speaker_count, c.speaker_dim}, Init::Normal, rng,
                   0.3);

  params_.create("encoder.conv1.w", {k_enc * c.embedding_dim, c.encoder_dim},
                 Init::XavierUniform, rng);
  params_.create("encoder.conv1.b", {1, c.encoder_dim}, Init::Zeros, rng);
  params_.create("encoder.conv2.w", {k_enc * c.encoder_dim, c.encoder_dim}, Init::XavierUniform,
                 rng);
  params_.create("encoder.conv2.b", {1, c.encoder_dim}, Init::Zeros, rng);
  for (const char* dir : {"fwd", "bwd"}) {
    const std::string base = std::string("encoder.gru_") + dir;
    params_.create(base + ".w_ih", {c.encoder_dim, 3 * gru_h}, Init::UniformFanIn, rng);
    params_.create(base + ".w_hh", {gru_h, 3 * gru_h}, Init::UniformFanIn, rng);
    params_.create(base + ".b_ih", {1, 3 * gru_h}, Init::Zeros, rng);
    params_.create(base + ".b_hh", {1, 3 * gru_h}, Init::Zeros, rng);
  }

  params_.create("attention.query_w", {c.decoder_dim, c.attention_dim}, Init::XavierUniform, rng);
  params_.create("attention.memory_w", {c.memory_dim(), c.attention_dim}, Init::XavierUniform,
                 rng);
  params_.create("attention.score_v", {c.attention_dim, 1}, Init::XavierUniform, rng);
  if (c.attention_variant == AttentionVariant::PECV) {
    params_.create("attention.ctx_proj.w", {c.memory_dim() + c.embedding_dim, c.encoder_dim},
                   Init::XavierUniform, rng);
    params_.create("attention.ctx_proj.b", {1, c.encoder_dim}, Init::Zeros, rng);
  }

  int pre_in = group;
  for (size_t i = 0; i < c.prenet_dims.size(); ++i) {
    const std::string base = "decoder.prenet" + std::to_string(i + 1);
    params_.create(base + ".w", {pre_in, c.prenet_dims[i]}, Init::XavierUniform, rng);
    params_.create(base + ".b", {1, c.prenet_dims[i]}, Init::Zeros, rng);
    pre_in = c.prenet_dims[i];
  }

  const int spk_dec = c.speaker_placement == SpeakerPlacement::SE_DEC ? c.speaker_dim : 0;
  const int lstm_in = pre_in + spk_dec + c.context_dim();
  params_.create("decoder.lstm.w_ih", {lstm_in, 4 * c.decoder_dim}, Init::UniformFanIn, rng);
  params_.create("decoder.lstm.w_hh", {c.decoder_dim, 4 * c.decoder_dim}, Init::UniformFanIn, rng);
  auto& lstm_b = params_.create("decoder.lstm.b", {1, 4 * c.decoder_dim}, Init::Zeros, rng);
  // forget-gate bias at one
  for (int i = 0; i < c.decoder_dim; ++i) lstm_b.value.v[static_cast<size_t>(c.decoder_dim + i)] = S(1);

  const int out_in = c.decoder_dim + c.context_dim();
  params_.create("decoder.mel_out.w", {out_in, group}, Init::XavierUniform, rng);
  params_.create("decoder.mel_out.b", {1, group}, Init::Zeros, rng);
  params_.create("decoder.stop.w", {out_in, 1}, Init::XavierUniform, rng);
  params_.create("decoder.stop.b", {1, 1}, Init::Zeros, rng);

  params_.create("postnet.conv1.w", {k_post * c.mel_dim, c.postnet_dim}, Init::XavierUniform,
                 rng);
  params_.create("postnet.conv1.b", {1, c.postnet_dim}, Init::Zeros, rng);
  params_.create("postnet.conv2.w", {k_post * c.postnet_dim, c.postnet_dim}, Init::XavierUniform,
                 rng);
  params_.create("postnet.conv2.b", {1, c.postnet_dim}, Init::Zeros, rng);
  params_.create("postnet.lin.w", {c.postnet_dim, c.linear_dim}, Init::XavierUniform, rng);
  params_.create("postnet.lin.b", {1, c.linear_dim}, Init::Zeros, rng);
}

template <typename S>
typename TtsModel<S>::Leaves TtsModel<S>::bind(Tape<S>& tape) const {
  Leaves leaves;
  for (Variable<S>* v : params_.all()) leaves.m_[v->name] = tape.leaf(*v);
  return leaves;
}

template <typename S>
DecoderState<S> TtsModel<S>::initial_state(Tape<S>& tape) const {
  DecoderState<S> st;
  st.h = tape.constant(Array<S>::zeros({1, cfg_.decoder_dim}), "s0");
  st.c = tape.constant(Array<S>::zeros({1, cfg_.decoder_dim}), "c0");
  return st;
}

template <typename S>
EncodedUtterance<S> TtsModel<S>::encode(Tape<S>& tape, const Leaves& leaves,
                                        const std::vector<int>& phoneme_ids,
                                        int speaker_id) const {
  if (phoneme_ids.empty()) throw DataError("encode: empty phoneme sequence");
  const ModelConfig& c = cfg_;
  const int t_len = static_cast<int>(phoneme_ids.size());

  EncodedUtterance<S> enc;
  enc.length = t_len;
  enc.phoneme_embeddings = embedding_lookup(leaves.at("phoneme_embedding.table"), phoneme_ids);

  Tensor<S> x = tanh_op(conv1d(enc.phoneme_embeddings, leaves.at("encoder.conv1.w"),
                               leaves.at("encoder.conv1.b"), c.encoder_conv_kernel));
  x = tanh_op(
      conv1d(x, leaves.at("encoder.conv2.w"), leaves.at("encoder.conv2.b"), c.encoder_conv_kernel));

  // bidirectional GRU over time
  const int gru_h = c.encoder_dim / 2;
  std::vector<Tensor<S>> fwd(static_cast<size_t>(t_len)), bwd(static_cast<size_t>(t_len));
  Tensor<S> h = tape.constant(Array<S>::zeros({1, gru_h}));
  for (int t = 0; t < t_len; ++t) {
    h = gru_step(slice(x, 0, t, 1), h, leaves.at("encoder.gru_fwd.w_ih"),
                 leaves.at("encoder.gru_fwd.w_hh"), leaves.at("encoder.gru_fwd.b_ih"),
                 leaves.at("encoder.gru_fwd.b_hh"));
    fwd[static_cast<size_t>(t)] = h;
  }
  h = tape.constant(Array<S>::zeros({1, gru_h}));
  for (int t = t_len - 1; t >= 0; --t) {
    h = gru_step(slice(x, 0, t, 1), h, leaves.at("encoder.gru_bwd.w_ih"),
                 leaves.at("encoder.gru_bwd.w_hh"), leaves.at("encoder.gru_bwd.b_ih"),
                 leaves.at("encoder.gru_bwd.b_hh"));
    bwd[static_cast<size_t>(t)] = h;
  }
  std::vector<Tensor<S>> rows;
  rows.reserve(static_cast<size_t>(t_len));
  for (int t = 0; t < t_len; ++t)
    rows.push_back(concat<S>({fwd[static_cast<size_t>(t)], bwd[static_cast<size_t>(t)]}, 1));
  Tensor<S> outputs = concat<S>(rows, 0);

  if (c.attention_variant == AttentionVariant::RES)
    outputs = add(outputs, enc.phoneme_embeddings);
  enc.encoder_outputs = outputs;

  if (c.speaker_placement != SpeakerPlacement::NONE) {
    if (speaker_id < 0 || speaker_id >= c.speaker_count)
      throw ConfigError("speaker id " + std::to_string(speaker_id) + " out of range [0," +
                        std::to_string(c.speaker_count) + ")");
    enc.speaker = embedding_lookup(leaves.at("speaker_embedding.table"), {speaker_id});
  }

  if (c.speaker_placement == SpeakerPlacement::SE_ENC && c.speaker_dim > 0) {
    enc.memory = concat<S>({outputs, broadcast_row(enc.speaker, t_len)}, 1);
  } else {
    enc.memory = outputs;
  }
  enc.memory_proj = matmul(enc.memory, leaves.at("attention.memory_w"));
  return enc;
}

template <typename S>
typename TtsModel<S>::AttentionOut TtsModel<S>::attention_step(const Leaves& leaves,
                                                               Tensor<S> s_prev,
                                                               const EncodedUtterance<S>& enc,
                                                               bool want_trace) const {
  if (enc.length == 0) throw DataError("attention_step: empty encoder memory");
  const ModelConfig& c = cfg_;

  // e_ij = v^T tanh(W s_{i-1} + U h_j)
  Tensor<S> query = matmul(s_prev, leaves.at("attention.query_w")); // [1, d_a]
  Tensor<S> energy = tanh_op(add_rowwise(enc.memory_proj, query));  // [T, d_a]
  Tensor<S> scores_col = matmul(energy, leaves.at("attention.score_v")); // [T, 1]
  Tensor<S> scores = reshape(scores_col, {1, enc.length});
  Tensor<S> weights = softmax(scores, 1);         // [1, T]
  Tensor<S> context = matmul(weights, enc.memory); // [1, d_mem]

  AttentionOut out;
  Tensor<S> pecv;
  if (c.attention_variant == AttentionVariant::PECV) {
    // c'_i shares the same weights, applied to phoneme embeddings
    pecv = matmul(weights, enc.phoneme_embeddings); // [1, d_p]
    Tensor<S> combined = concat<S>({context, pecv}, 1);
    out.context = affine(combined, leaves.at("attention.ctx_proj.w"),
                         leaves.at("attention.ctx_proj.b")); // [1, d_h]
  } else {
    out.context = context;
  }

  if (want_trace) {
    out.trace.scores = Array<S>({enc.length}, scores.value().v);
    out.trace.weights = Array<S>({enc.length}, weights.value().v);
    out.trace.context = Array<S>({c.memory_dim()}, context.value().v);
    if (pecv.valid()) out.trace.pecv = Array<S>({c.embedding_dim}, pecv.value().v);
    out.trace.combined = Array<S>({c.context_dim()}, out.context.value().v);
  }
  return out;
}

template <typename S>
typename TtsModel<S>::DecodeOut TtsModel<S>::decode_step(Tape<S>& tape, const Leaves& leaves,
                                                         Tensor<S> prev_group,
                                                         DecoderState<S>& state,
                                                         Tensor<S> context,
                                                         const EncodedUtterance<S>& enc,
                                                         const ForwardOptions<S>& opts) const {
  const ModelConfig& c = cfg_;
  if (opts.train && c.prenet_dropout > 0.0 && !opts.rng)
    throw ConfigError("decode_step: training with dropout requires an RNG");

  Tensor<S> x = prev_group;
  for (size_t i = 0; i < c.prenet_dims.size(); ++i) {
    const std::string base = "decoder.prenet" + std::to_string(i + 1);
    x = relu_op(affine(x, leaves.at(base + ".w"), leaves.at(base + ".b")));
    if (c.prenet_dropout > 0.0 && opts.train)
      x = dropout(x, c.prenet_dropout, true, *opts.rng);
  }

  std::vector<Tensor<S>> pieces{x};
  if (c.speaker_placement == SpeakerPlacement::SE_DEC && c.speaker_dim > 0)
    pieces.push_back(enc.speaker);
  pieces.push_back(context);
  Tensor<S> lstm_in = concat<S>(pieces, 1);

  RnnState<S> rnn{state.h, state.c};
  rnn = lstm_step(lstm_in, rnn, leaves.at("decoder.lstm.w_ih"), leaves.at("decoder.lstm.w_hh"),
                  leaves.at("decoder.lstm.b"));
  state.h = rnn.h;
  state.c = rnn.c;

  Tensor<S> proj_in = concat<S>({state.h, context}, 1);
  DecodeOut out;
  out.mel_group = affine(proj_in, leaves.at("decoder.mel_out.w"), leaves.at("decoder.mel_out.b"));
  out.stop_prob =
      sigmoid_op(affine(proj_in, leaves.at("decoder.stop.w"), leaves.at("decoder.stop.b")));
  (void)tape;
  return out;
}

template <typename S>
Tensor<S> TtsModel<S>::postnet(const Leaves& leaves, Tensor<S> mel) const {
  const ModelConfig& c = cfg_;
  Tensor<S> x = tanh_op(conv1d(mel, leaves.at("postnet.conv1.w"), leaves.at("postnet.conv1.b"),
                               c.postnet_conv_kernel));
  x = tanh_op(
      conv1d(x, leaves.at("postnet.conv2.w"), leaves.at("postnet.conv2.b"), c.postnet_conv_kernel));
  return affine(x, leaves.at("postnet.lin.w"), leaves.at("postnet.lin.b"));
}

template <typename S>
ForwardResult<S> TtsModel<S>::forward_teacher_forced(Tape<S>& tape,
                                                     const std::vector<int>& phoneme_ids,
                                                     int speaker_id, const Array<S>& mel_target,
                                                     const Array<S>& linear_target,
                                                     const ForwardOptions<S>& opts) const {
  const ModelConfig& c = cfg_;
  if (mel_target.ndim() != 2 || mel_target.cols() != c.mel_dim)
    throw DimensionError("forward: mel target shape " + shape_str(mel_target.shape) +
                         " does not match mel_dim " + std::to_string(c.mel_dim));
  if (linear_target.ndim() != 2 || linear_target.cols() != c.linear_dim)
    throw DimensionError("forward: linear target shape " + shape_str(linear_target.shape) +
                         " does not match linear_dim " + std::to_string(c.linear_dim));
  const int t_frames = mel_target.rows();
  if (t_frames == 0) throw DataError("forward: utterance has zero feature frames");
  if (linear_target.rows() != t_frames)
    throw DimensionError("forward: mel/linear frame counts differ");
  if ((opts.teacher_forcing < 1.0 || (opts.train && c.prenet_dropout > 0.0)) && !opts.rng)
    throw ConfigError("forward: stochastic options require an RNG");

  const int r = c.reduction_factor;
  const int groups = (t_frames + r - 1) / r;
  const int t_pad = groups * r;
  const int group_w = r * c.mel_dim;

  Array<S> mel_padded = Array<S>::zeros({t_pad, c.mel_dim});
  std::copy(mel_target.v.begin(), mel_target.v.end(), mel_padded.v.begin());
  Array<S> lin_padded = Array<S>::zeros({t_pad, c.linear_dim});
  std::copy(linear_target.v.begin(), linear_target.v.end(), lin_padded.v.begin());
  Array<S> stop_target = Array<S>::zeros({groups, 1});
  stop_target.v[static_cast<size_t>(groups) - 1] = S(1);

  Leaves leaves = bind(tape);
  EncodedUtterance<S> enc = encode(tape, leaves, phoneme_ids, speaker_id);

  ForwardResult<S> result;
  result.n_frames_padded = t_pad;
  result.phoneme_embedding_values = enc.phoneme_embeddings.value();

  DecoderState<S> state = initial_state(tape);
  Tensor<S> prev = tape.constant(Array<S>::zeros({1, group_w}), "go_frame");
  std::vector<Tensor<S>> mel_groups;
  std::vector<Tensor<S>> stops;
  mel_groups.reserve(static_cast<size_t>(groups));
  for (int g = 0; g < groups; ++g) {
    AttentionOut att = attention_step(leaves, state.h, enc, opts.keep_traces);
    DecodeOut dec = decode_step(tape, leaves, prev, state, att.context, enc, opts);
    mel_groups.push_back(reshape(dec.mel_group, {r, c.mel_dim}));
    stops.push_back(dec.stop_prob);
    if (opts.keep_traces) result.traces.push_back(std::move(att.trace));

    // next input: ground truth group (teacher forcing), or the detached
    // prediction when scheduled sampling kicks in
    const bool use_truth = opts.teacher_forcing >= 1.0 || !opts.rng ||
                           opts.rng->uniform() < opts.teacher_forcing;
    if (use_truth) {
      Array<S> tf({1, group_w});
      std::copy(mel_padded.v.begin() + static_cast<int64_t>(g) * group_w,
                mel_padded.v.begin() + static_cast<int64_t>(g + 1) * group_w, tf.v.begin());
      prev = tape.constant(std::move(tf), "teacher");
    } else {
      prev = tape.constant(dec.mel_group.value(), "self_feed");
    }
  }

  result.mel = concat<S>(mel_groups, 0);
  result.linear = postnet(leaves, result.mel);
  result.stop_probs = concat<S>(stops, 0);

  Tensor<S> mel_tgt = tape.constant(std::move(mel_padded), "mel_target");
  Tensor<S> lin_tgt = tape.constant(std::move(lin_padded), "linear_target");
  Tensor<S> stop_tgt = tape.constant(std::move(stop_target), "stop_target");
  result.loss_mel = l1_loss(result.mel, mel_tgt);
  result.loss_linear = l1_loss(result.linear, lin_tgt);
  result.loss_stop = bce_loss(result.stop_probs, stop_tgt);
  result.loss_total = add(add(result.loss_mel, result.loss_linear), result.loss_stop);
  return result;
}

template <typename S>
SynthesisResult TtsModel<S>::synthesize(const std::vector<int>& phoneme_ids, int speaker_id,
                                        int max_steps_override) const {
  const ModelConfig& c = cfg_;
  const int max_steps = max_steps_override > 0 ? max_steps_override : c.max_decoder_steps;
  const int group_w = c.reduction_factor * c.mel_dim;

  Tape<S> tape;
  tape.set_grad_enabled(false);
  Leaves leaves = bind(tape);
  EncodedUtterance<S> enc = encode(tape, leaves, phoneme_ids, speaker_id);

  SynthesisResult result;
  {
    const Array<S>& p = enc.phoneme_embeddings.value();
    result.phoneme_embedding_values = Array<float>(p.shape);
    for (size_t i = 0; i < p.v.size(); ++i)
      result.phoneme_embedding_values.v[i] = static_cast<float>(p.v[i]);
  }

  ForwardOptions<S> opts;
  opts.train = false;
  DecoderState<S> state = initial_state(tape);
  Tensor<S> prev = tape.constant(Array<S>::zeros({1, group_w}), "go_frame");
  std::vector<Tensor<S>> mel_groups;
  int steps = 0;
  bool stopped = false;
  while (steps < max_steps) {
    AttentionOut att = attention_step(leaves, state.h, enc, true);
    DecodeOut dec = decode_step(tape, leaves, prev, state, att.context, enc, opts);
    mel_groups.push_back(reshape(dec.mel_group, {c.reduction_factor, c.mel_dim}));
    {
      AttentionTrace<float> tf;
      const auto cast_arr = [](const Array<S>& a) {
        Array<float> out(a.shape);
        for (size_t i = 0; i < a.v.size(); ++i) out.v[i] = static_cast<float>(a.v[i]);
        return out;
      };
      tf.scores = cast_arr(att.trace.scores);
      tf.weights = cast_arr(att.trace.weights);
      tf.context = cast_arr(att.trace.context);
      if (att.trace.pecv.numel() > 0) tf.pecv = cast_arr(att.trace.pecv);
      tf.combined = cast_arr(att.trace.combined);
      result.traces.push_back(std::move(tf));
    }
    ++steps;
    if (static_cast<double>(dec.stop_prob.value().v[0]) > c.stop_threshold) {
      stopped = true;
      break;
    }
    prev = tape.constant(dec.mel_group.value(), "self_feed");
  }
  result.steps = steps;
  result.hit_max_steps = !stopped;

  Tensor<S> mel = concat<S>(mel_groups, 0);
  Tensor<S> linear = postnet(leaves, mel);
  result.mel = Array<float>(mel.value().shape);
  for (size_t i = 0; i < mel.value().v.size(); ++i)
    result.mel.v[i] = static_cast<float>(mel.value().v[i]);
  result.linear = Array<float>(linear.value().shape);
  for (size_t i = 0; i < linear.value().v.size(); ++i)
    result.linear.v[i] = static_cast<float>(linear.value().v[i]);
  return result;
}

template class TtsModel<float>;
template class TtsModel<double>;

} // namespace mltts::tts

/* Copyright 2026 The mltts Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface to the mixed-lingual TTS core. All entry points return a
 * status code; on failure mltts_last_error() carries a message for the
 * calling thread. Strings returned through char** are heap-allocated and
 * must be released with mltts_string_free(). Options are JSON documents;
 * pass NULL or "{}" for defaults.
 */

#ifndef MLTTS_C_H
#define MLTTS_C_H

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mltts_status {
  MLTTS_OK = 0,
  MLTTS_ERR_CONFIG = 2,
  MLTTS_ERR_DATA = 3,
  MLTTS_ERR_NUMERIC = 4
} mltts_status;

const char* mltts_version(void);

/* Message for the most recent failure on this thread; empty until an error
 * occurs. The pointer stays valid until the next failing call. */
const char* mltts_last_error(void);

void mltts_string_free(char* s);

/* Deterministic synthetic two-language corpus.
 * options: {"speakers":2,"man":4,"eng":3,"mix":3,"seed":1,
 *           "tokens_min":4,"tokens_max":7} */
mltts_status mltts_gen_corpus(const char* out_dir, const char* options_json,
                              char** summary_json);

/* Batch feature extraction with corpus-wide normalization stats.
 * options: {"jobs":1,"resample":true,"seed":1} */
mltts_status mltts_features_run(const char* manifest_path, const char* out_dir,
                                const char* options_json, char** summary_json);

/* Seeded language-restricted subset of a corpus.
 * options: {"target_set":"MAN","size":500,"seed":1} */
mltts_status mltts_corpus_regime(const char* source_manifest, const char* options_json,
                                 const char* out_manifest, char** summary_json);

/* Train per a regime declaration (JSON text, not a path). */
mltts_status mltts_train_run(const char* regime_json, const char* out_dir,
                             char** summary_json);

/* Finite-difference verification: op-level suite and/or the 3x3
 * variant/placement grid.
 * options: {"ops":true,"grid":true,"seed":1,"jobs":1}
 * Returns MLTTS_ERR_NUMERIC when any check fails; *report_text carries the
 * plain-text table either way. */
mltts_status mltts_gradcheck_run(const char* options_json, char** report_text,
                                 char** summary_json);

/* Embedding-space analysis of a checkpoint over a manifest sample.
 * source: "phoneme" | "encoder";
 * options: {"perplexity":15,"iters":1000,"seed":1} */
mltts_status mltts_analyze_run(const char* checkpoint_path, const char* manifest_path,
                               const char* source, const char* out_dir,
                               const char* options_json, char** summary_json);

/* Opaque handle over a loaded checkpoint (model + inventory + stats). */
typedef struct mltts_model mltts_model;

mltts_status mltts_model_open(const char* checkpoint_path, mltts_model** out_model);
void mltts_model_close(mltts_model* model);
mltts_status mltts_model_config_json(mltts_model* model, char** config_json);

/* Autoregressive synthesis to a WAV plus an attention-alignment SVG (pass
 * NULL to skip either output).
 * options: {"gl_iters":60,"gl_momentum":0.0,"max_steps":0,"seed":1,
 *           "precision":"f32"} */
mltts_status mltts_synthesize(mltts_model* model, const char* phonemes, int speaker_id,
                              const char* options_json, const char* out_wav_path,
                              const char* out_alignment_svg_path, char** summary_json);

#ifdef __cplusplus
}
#endif

#endif /* MLTTS_C_H */

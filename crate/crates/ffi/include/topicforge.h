#ifndef TOPICFORGE_H
#define TOPICFORGE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>

typedef enum TfModelKind {
  TF_MODEL_KIND_LDA = 0,
  TF_MODEL_KIND_PLSA = 1,
  TF_MODEL_KIND_NMF = 2,
} TfModelKind;

/*
 Result codes. Input, empty-corpus and model-failure codes match the
 command-line exit codes.
 */
typedef enum TfStatus {
  TF_STATUS_OK = 0,
  TF_STATUS_NULL_ARGUMENT = 1,
  TF_STATUS_INPUT_ERROR = 2,
  TF_STATUS_EMPTY_CORPUS = 3,
  TF_STATUS_MODEL_FAILURE = 4,
  TF_STATUS_INVALID_UTF8 = 5,
  TF_STATUS_OUT_OF_RANGE = 6,
  TF_STATUS_PANIC = 7,
} TfStatus;

/*
 A fitted topic model.
 */
typedef struct TfModel TfModel;

/*
 The outputs of one pipeline run.
 */
typedef struct TfRun TfRun;

/*
 Tokens produced by [`tf_preprocess`].
 */
typedef struct TfTokens TfTokens;

/*
 Message of the last failed call on this thread, or null. Valid until the
 next `tf_*` call on the same thread.
 */
const char *tf_last_error_message(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *tf_version(void);

/*
 Runs the pipeline described by a TOML config file and writes its outputs.
 `out_dir` may be null to keep the config's output directory.

 # Safety
 String arguments must be null or NUL-terminated; `out` must be writable.
 */
enum TfStatus tf_run_pipeline(const char *config_path, const char *out_dir, struct TfRun **out);

/*
 Number of models in a run, in comparison-table order.

 # Safety
 `run` must be null or a live handle from [`tf_run_pipeline`].
 */
size_t tf_run_model_count(const struct TfRun *run);

/*
 Copies the selected model at `index` into a new handle.

 # Safety
 `run` must be a live handle; `out` must be writable.
 */
enum TfStatus tf_run_model(const struct TfRun *run, size_t index, struct TfModel **out);

/*
 # Safety
 `run` must be null or a handle not yet freed.
 */
void tf_run_free(struct TfRun *run);

/*
 Loads a model previously written as `model_<kind>.json`.

 # Safety
 `path` must be NUL-terminated; `out` must be writable.
 */
enum TfStatus tf_model_load(const char *path, struct TfModel **out);

/*
 # Safety
 `model` must be null or a handle not yet freed.
 */
void tf_model_free(struct TfModel *model);

/*
 # Safety
 `model` must be a live handle.
 */
enum TfModelKind tf_model_kind(const struct TfModel *model);

/*
 # Safety
 `model` must be null or a live handle.
 */
size_t tf_model_num_topics(const struct TfModel *model);

/*
 # Safety
 `model` must be null or a live handle.
 */
size_t tf_model_vocab_size(const struct TfModel *model);

/*
 Term string for `term_id`, or null when out of range. Owned by the handle.

 # Safety
 `model` must be null or a live handle.
 */
const char *tf_model_term(const struct TfModel *model, size_t term_id);

/*
 Copies `p(w | topic)` for every term into `weights`, which must hold
 `len >= vocab_size` values.

 # Safety
 `model` must be a live handle; `weights` must point to `len` doubles.
 */
enum TfStatus tf_model_topic_weights(const struct TfModel *model,
                                     size_t topic,
                                     double *weights,
                                     size_t len);

/*
 Writes up to `n` top terms of `topic` (ids and weights, ranked) and stores
 how many were written in `written`.

 # Safety
 `term_ids` and `weights` must each hold `n` values; `written` must be
 writable.
 */
enum TfStatus tf_model_top_terms(const struct TfModel *model,
                                 size_t topic,
                                 size_t n,
                                 size_t *term_ids,
                                 double *weights,
                                 size_t *written);

/*
 Cleans, tokenizes, removes built-in stopwords and lemmatizes `text`.

 # Safety
 `text` must be NUL-terminated; `out` must be writable.
 */
enum TfStatus tf_preprocess(const char *text, struct TfTokens **out);

/*
 # Safety
 `tokens` must be null or a live handle.
 */
size_t tf_tokens_len(const struct TfTokens *tokens);

/*
 Token at `index`, or null when out of range. Owned by the handle.

 # Safety
 `tokens` must be null or a live handle.
 */
const char *tf_tokens_get(const struct TfTokens *tokens, size_t index);

/*
 # Safety
 `tokens` must be null or a handle not yet freed.
 */
void tf_tokens_free(struct TfTokens *tokens);

#endif  /* TOPICFORGE_H */

#ifndef PHILAEX_H
#define PHILAEX_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum PhxStatus {
  PHX_STATUS_OK = 0,
  PHX_STATUS_NULL_POINTER = 1,
  PHX_STATUS_INVALID_ARGUMENT = 2,
  PHX_STATUS_IO = 3,
  PHX_STATUS_MODEL = 4,
  PHX_STATUS_EXPLAIN = 5,
  PHX_STATUS_PANIC = 6,
} PhxStatus;

/**
 * Loaded model. Opaque to C.
 */
typedef struct PhxModel PhxModel;

/**
 * Explainer settings; `mask_samples = 0` selects the default row count.
 */
typedef struct PhxExplainerConfig {
  size_t max_core_features;
  double alpha;
  size_t mask_samples;
  double contribution_epsilon;
  uint64_t seed;
} PhxExplainerConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Loads a model file written by the `philaex train` command.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum PhxStatus phx_model_load(const char *path, struct PhxModel **out);

/**
 * Builds a model from the JSON text of a model file.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum PhxStatus phx_model_from_json(const char *json, struct PhxModel **out);

/**
 * Releases a model. Null is ignored.
 *
 * # Safety
 * `model` must come from this library and not be used afterwards.
 */
void phx_model_free(struct PhxModel *model);

/**
 * Feature-space dimension, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t phx_model_dim(const struct PhxModel *model);

/**
 * Scores a dense vector of `len` raw feature values.
 *
 * # Safety
 * `x` must point to `len` doubles and `out` be a valid pointer.
 */
enum PhxStatus phx_model_score_dense(const struct PhxModel *model,
                                     const double *x,
                                     size_t len,
                                     double *out);

struct PhxExplainerConfig phx_explainer_config_default(void);

/**
 * Explains a dense vector and returns the report as a JSON string in
 * `out_json` (release with [`phx_string_free`]). A null `config` uses the
 * defaults.
 *
 * # Safety
 * `x` must point to `len` doubles; `config` must be null or valid;
 * `out_json` must be a valid pointer.
 */
enum PhxStatus phx_explain_dense(const struct PhxModel *model,
                                 const double *x,
                                 size_t len,
                                 const struct PhxExplainerConfig *config,
                                 char **out_json);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void phx_string_free(char *s);

/**
 * Message of the last failed call on this thread ("" after a success).
 * Valid until the next library call on the same thread.
 */
const char *phx_last_error_message(void);

/**
 * Library version, a static NUL-terminated string.
 */
const char *phx_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PHILAEX_H */

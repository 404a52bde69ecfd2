#ifndef STAM_H
#define STAM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result of an FFI call. Codes 1 to 5 match the command-line exit codes.
 */
typedef enum StamStatus {
  STAM_STATUS_OK = 0,
  STAM_STATUS_OTHER = 1,
  STAM_STATUS_CONFIG = 2,
  STAM_STATUS_DATA = 3,
  STAM_STATUS_DIVERGED = 4,
  STAM_STATUS_MODEL = 5,
  STAM_STATUS_NULL_POINTER = 6,
  STAM_STATUS_INVALID_UTF8 = 7,
  STAM_STATUS_BUFFER_SIZE = 8,
  STAM_STATUS_PANIC = 9,
} StamStatus;

/*
 Opaque model handle.
 */
typedef struct StamModel StamModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread, or null. The pointer
 stays valid until the next failing call on the same thread.
 */
const char *stam_last_error(void);

/*
 Library version as a static string.
 */
const char *stam_version(void);

/*
 Builds a freshly initialized model from a JSON model config
 (`arch`, `n_vars`, `input_len`, `output_len`, `enc_dim`, `dec_dim`,
 `context_dim`, optional `dropout_rate`, `seed`, `per_variable_embedding`).

 # Safety
 `config_json` must be a nul-terminated string and `out` a valid pointer.
 */
enum StamStatus stam_model_new(const char *config_json, struct StamModel **out);

/*
 Reads a weight file.

 # Safety
 `path` must be a nul-terminated string and `out` a valid pointer.
 */
enum StamStatus stam_model_load(const char *path, struct StamModel **out);

/*
 Writes a weight file.

 # Safety
 `model` must come from this library; `path` must be nul-terminated.
 */
enum StamStatus stam_model_save(const struct StamModel *model, const char *path);

/*
 Releases a handle. Null is ignored.

 # Safety
 `model` must come from this library and must not be used afterwards.
 */
void stam_model_free(struct StamModel *model);

/*
 The model config as JSON. Release the string with [`stam_string_free`].

 # Safety
 `model` must come from this library and `out` must be a valid pointer.
 */
enum StamStatus stam_model_config_json(const struct StamModel *model, char **out);

/*
 Releases a string returned by this library. Null is ignored.

 # Safety
 `s` must come from this library and must not be used afterwards.
 */
void stam_string_free(char *s);

/*
 Input variables N, input length Tx and horizon Ty.

 # Safety
 `model` must come from this library; the outputs must be valid pointers.
 */
enum StamStatus stam_model_dims(const struct StamModel *model,
                                size_t *n_vars,
                                size_t *input_len,
                                size_t *output_len);

/*
 Number of trainable scalars.

 # Safety
 `model` must come from this library and `out` must be a valid pointer.
 */
enum StamStatus stam_model_param_count(const struct StamModel *model, size_t *out);

/*
 Multiply-add estimate for one window. Fails with `Config` for
 architectures without an estimate.

 # Safety
 `model` must come from this library and `out` must be a valid pointer.
 */
enum StamStatus stam_model_flop_estimate(const struct StamModel *model, uint64_t *out);

/*
 Sizes of the attention matrices `forward` produces: spatial is
 rows×cols (N columns), temporal is rows×cols (Tx columns). Zero when the
 architecture has no such attention.

 # Safety
 `model` must come from this library; the outputs must be valid pointers.
 */
enum StamStatus stam_model_attention_shape(const struct StamModel *model,
                                           size_t *spatial_rows,
                                           size_t *spatial_cols,
                                           size_t *temporal_rows,
                                           size_t *temporal_cols);

/*
 Forecasts one standardized window in eval mode.

 `x` holds N·Tx values, row-major N×Tx. `y_out` receives Ty values.
 `spatial_out` and `temporal_out` may be null; otherwise their lengths
 must equal the sizes reported by [`stam_model_attention_shape`].

 # Safety
 Each non-null buffer must be valid for its stated length.
 */
enum StamStatus stam_model_forward(const struct StamModel *model,
                                   const double *x,
                                   size_t x_len,
                                   double *y_out,
                                   size_t y_len,
                                   double *spatial_out,
                                   size_t spatial_len,
                                   double *temporal_out,
                                   size_t temporal_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STAM_H */

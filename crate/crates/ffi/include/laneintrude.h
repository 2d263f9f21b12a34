#ifndef LANEINTRUDE_H
#define LANEINTRUDE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum LiStatus {
  LiStatus_Ok = 0,
  /**
   * A required pointer argument was null.
   */
  LiStatus_NullArgument = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  LiStatus_InvalidUtf8 = 2,
  /**
   * File could not be opened, read, or written.
   */
  LiStatus_Io = 3,
  /**
   * Input bytes could not be parsed.
   */
  LiStatus_Parse = 4,
  /**
   * The pipeline could not process the data (no track, degenerate lane).
   */
  LiStatus_Data = 5,
  /**
   * Configuration rejected.
   */
  LiStatus_InvalidConfig = 6,
  /**
   * Buffer or model shape does not match.
   */
  LiStatus_ShapeMismatch = 7,
  /**
   * Unexpected internal failure.
   */
  LiStatus_Internal = 8,
} LiStatus;

/**
 * Opaque classifier handle.
 */
typedef struct LiModel LiModel;

/**
 * Opaque preprocessing pipeline (association, smoothing, normalization).
 */
typedef struct LiPipeline LiPipeline;

/**
 * Opaque relative motion series produced by the pipeline.
 */
typedef struct LiSeries LiSeries;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length in bytes.
 *
 * # Safety
 * `buf` must point to `len` writable bytes, or be null (query mode).
 */
uintptr_t li_last_error_message(char *buf, uintptr_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *li_version(void);

/**
 * Pipeline with default gating, Kalman, and normalization settings.
 */
struct LiPipeline *li_pipeline_new_default(void);

/**
 * Pipeline from a JSON configuration object (the CLI `pipeline` section).
 * Returns null on error; see [`li_last_error_message`].
 *
 * # Safety
 * `json` must be a NUL-terminated string.
 */
struct LiPipeline *li_pipeline_new_json(const char *json);

/**
 * # Safety
 * `pipeline` must come from a `li_pipeline_new_*` call, at most once.
 */
void li_pipeline_free(struct LiPipeline *pipeline);

/**
 * Run the pipeline on detection-frame JSONL text.
 *
 * # Safety
 * `pipeline` must be valid, `jsonl` NUL-terminated, `out` writable.
 */
enum LiStatus li_pipeline_run(const struct LiPipeline *pipeline,
                              const char *jsonl,
                              struct LiSeries **out);

/**
 * Run the pipeline on a detection-frame JSONL file.
 *
 * # Safety
 * `pipeline` must be valid, `path` NUL-terminated, `out` writable.
 */
enum LiStatus li_pipeline_run_file(const struct LiPipeline *pipeline,
                                   const char *path,
                                   struct LiSeries **out);

/**
 * Number of frames in a series.
 *
 * # Safety
 * `series` must be a live series handle.
 */
uintptr_t li_series_len(const struct LiSeries *series);

/**
 * Borrowed pointer to the normalized values; valid until the series is
 * freed.
 *
 * # Safety
 * `series` must be a live series handle.
 */
const double *li_series_values(const struct LiSeries *series);

/**
 * Borrowed pointer to the frame indices; valid until the series is freed.
 *
 * # Safety
 * `series` must be a live series handle.
 */
const int64_t *li_series_frames(const struct LiSeries *series);

/**
 * # Safety
 * `series` must come from this library, freed at most once.
 */
void li_series_free(struct LiSeries *series);

/**
 * Load a model checkpoint (the JSON format written by the trainer).
 *
 * # Safety
 * `path` must be NUL-terminated, `out` writable.
 */
enum LiStatus li_model_load(const char *path, struct LiModel **out);

/**
 * # Safety
 * `model` must come from `li_model_load`, freed at most once.
 */
void li_model_free(struct LiModel *model);

/**
 * Input window length the model expects.
 *
 * # Safety
 * `model` must be a live model handle.
 */
uintptr_t li_model_window_len(const struct LiModel *model);

/**
 * Number of classes the model scores.
 *
 * # Safety
 * `model` must be a live model handle.
 */
uintptr_t li_model_classes(const struct LiModel *model);

/**
 * Classify one window of relative positions. `values` must hold exactly
 * `li_model_window_len` entries; `probs_out`, when non-null, receives
 * `li_model_classes` probabilities; `class_out` the argmax index
 * (0 = left-to-right, 1 = right-to-left, 2 = no intrusion).
 *
 * # Safety
 * Pointers must satisfy the stated lengths.
 */
enum LiStatus li_model_predict(const struct LiModel *model,
                               const double *values,
                               uintptr_t len,
                               double *probs_out,
                               uintptr_t *class_out);

/**
 * Classify the final window of a pipeline series (the sample-level
 * prediction rule).
 *
 * # Safety
 * `model` and `series` must be live handles.
 */
enum LiStatus li_model_predict_series(const struct LiModel *model,
                                      const struct LiSeries *series,
                                      double *probs_out,
                                      uintptr_t *class_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LANEINTRUDE_H */

#ifndef FLEETLINE_H
#define FLEETLINE_H

/* Generated with cbindgen:0.27.0 */

/* Generated by cbindgen from fleetline-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of a fallible API call.
 */
typedef enum FlStatus {
  /**
   * The call succeeded.
   */
  FL_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  FL_STATUS_NULL_POINTER = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  FL_STATUS_INVALID_UTF8 = 2,
  /**
   * An argument was syntactically fine but semantically out of range.
   */
  FL_STATUS_INVALID_ARGUMENT = 3,
  /**
   * The input failed validation (model, scenario, selection, or trace).
   */
  FL_STATUS_VALIDATION = 4,
  /**
   * An environmental failure such as an unreadable referenced file.
   */
  FL_STATUS_RUNTIME = 5,
} FlStatus;

/**
 * An opaque, validated feature model.
 */
typedef struct FlModel FlModel;

/**
 * An opaque simulation world holding fleet, knowledge base, and engine.
 */
typedef struct FlWorld FlWorld;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Last error message for this thread, or null if the previous call
 * succeeded. Do not free; the pointer is invalidated by the next failure.
 */
const char *fl_last_error(void);

/**
 * Releases a string returned by this library. Null is a no-op.
 *
 * # Safety
 * `text` must be a pointer previously returned by this library and not
 * yet freed.
 */
void fl_string_free(char *text);

/**
 * Parses and validates a feature-model JSON document.
 *
 * On success stores a new handle in `*out`; free it with [`fl_model_free`].
 *
 * # Safety
 * `json` must be a nul-terminated string; `out` must be a valid pointer.
 */
enum FlStatus fl_model_parse(const char *json, struct FlModel **out);

/**
 * Releases a model handle. Null is a no-op.
 *
 * # Safety
 * `model` must be null or a handle from [`fl_model_parse`], not yet freed.
 */
void fl_model_free(struct FlModel *model);

/**
 * Number of features in the model, including the root. Zero for null.
 *
 * # Safety
 * `model` must be null or a live handle from [`fl_model_parse`].
 */
size_t fl_model_feature_count(const struct FlModel *model);

/**
 * The model's name as a caller-owned string, or null for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle from [`fl_model_parse`].
 */
char *fl_model_name(const struct FlModel *model);

/**
 * Validates a comma-separated feature selection against the model.
 *
 * `*out_valid` reports the verdict. Unknown feature names are a
 * `FL_STATUS_VALIDATION` error, not a verdict.
 *
 * # Safety
 * `model` must be a live handle; `features` a nul-terminated string;
 * `out_valid` a valid pointer.
 */
enum FlStatus fl_model_check_selection(const struct FlModel *model,
                                       const char *features,
                                       bool *out_valid);

/**
 * Counts the model's valid configurations into `*out_count`.
 *
 * # Safety
 * `model` must be a live handle; `out_count` a valid pointer.
 */
enum FlStatus fl_model_configuration_count(const struct FlModel *model, uint64_t *out_count);

/**
 * Loads a scenario into a fresh world.
 *
 * `base_dir` resolves a relative model path inside the scenario and may be
 * null when the model is inlined. On success stores a handle in `*out`;
 * free it with [`fl_world_free`].
 *
 * # Safety
 * `scenario_json` must be nul-terminated; `base_dir` null or
 * nul-terminated; `out` a valid pointer.
 */
enum FlStatus fl_world_load(const char *scenario_json,
                            const char *base_dir,
                            uint64_t seed,
                            struct FlWorld **out);

/**
 * Releases a world handle. Null is a no-op.
 *
 * # Safety
 * `world` must be null or a handle from [`fl_world_load`], not yet freed.
 */
void fl_world_free(struct FlWorld *world);

/**
 * Advances the world to tick `until`, which must exceed the current tick
 * count of a fresh world (zero is rejected).
 *
 * When `out_trace` is non-null it receives the run's full JSONL trace as
 * a caller-owned string.
 *
 * # Safety
 * `world` must be a live handle; `out_trace` null or a valid pointer.
 */
enum FlStatus fl_world_run(struct FlWorld *world, uint64_t until, char **out_trace);

/**
 * Number of adaptations the engine has committed so far. Zero for null.
 *
 * # Safety
 * `world` must be null or a live handle from [`fl_world_load`].
 */
uint64_t fl_world_adaptations(const struct FlWorld *world);

/**
 * Effective satisfaction score from the engine's last loop step.
 * Zero for a null handle.
 *
 * # Safety
 * `world` must be null or a live handle from [`fl_world_load`].
 */
double fl_world_last_effective(const struct FlWorld *world);

/**
 * The currently deployed selection as a caller-owned comma-separated
 * string, or null for a null handle.
 *
 * # Safety
 * `world` must be null or a live handle from [`fl_world_load`].
 */
char *fl_world_selection(const struct FlWorld *world);

/**
 * Verifies a JSONL trace's ordering and causality invariants.
 *
 * Returns `FL_STATUS_OK` for a clean trace, `FL_STATUS_VALIDATION` with
 * the violated rule in [`fl_last_error`] for a broken one, and
 * `FL_STATUS_RUNTIME` when the text is not parseable JSONL.
 *
 * # Safety
 * `trace_jsonl` must be a nul-terminated string.
 */
enum FlStatus fl_trace_verify(const char *trace_jsonl);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FLEETLINE_H */

#ifndef E2I2_H
#define E2I2_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum E2i2Status {
  E2I2_STATUS_OK = 0,
  E2I2_STATUS_NULL_POINTER = 1,
  E2I2_STATUS_INVALID_UTF8 = 2,
  E2I2_STATUS_PARSE = 3,
  E2I2_STATUS_VALIDATION = 4,
  E2I2_STATUS_COMPUTE = 5,
  E2I2_STATUS_BUFFER_TOO_SMALL = 6,
  E2I2_STATUS_IO = 7,
  E2I2_STATUS_PANIC = 8,
} E2i2Status;

/**
 * Scene built from a config document.
 */
typedef struct E2i2Scene E2i2Scene;

typedef struct E2i2Rate {
  double direct;
  double crossed;
  double total;
} E2i2Rate;

typedef struct E2i2ProcedureRates {
  double procedure1;
  double procedure2;
  double spatial_swap;
} E2i2ProcedureRates;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *e2i2_version(void);

/**
 * Copy the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length without the NUL.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t e2i2_last_error_message(char *buf, size_t len);

/**
 * Parse and validate TOML config text into a scene handle.
 *
 * # Safety
 * `config_text` must be a NUL-terminated string and `out` a writable pointer.
 * The handle must be released with [`e2i2_scene_free`].
 */
enum E2i2Status e2i2_scene_from_config(const char *config_text, struct E2i2Scene **out);

/**
 * Release a scene handle. Null is ignored.
 *
 * # Safety
 * `scene` must be null or a handle from [`e2i2_scene_from_config`] not yet freed.
 */
void e2i2_scene_free(struct E2i2Scene *scene);

/**
 * Number of emitters in the scene, or 0 for a null handle.
 *
 * # Safety
 * `scene` must be null or a live handle.
 */
size_t e2i2_scene_emitter_count(const struct E2i2Scene *scene);

/**
 * Coincidence rate of the scene at its configured detector positions, using
 * the formula the config selects (scalar, polarized or general).
 *
 * # Safety
 * `scene` must be a live handle and `out` writable.
 */
enum E2i2Status e2i2_scene_rate(const struct E2i2Scene *scene, struct E2i2Rate *out);

/**
 * Scan the detector baseline along `axis` over `steps` points in `[from, to]`.
 * Each non-null output array receives `steps` values; `capacity` is their length.
 *
 * # Safety
 * `scene` must be a live handle, `axis` must point to 3 doubles, and every
 * non-null output must point to `capacity` writable doubles.
 */
enum E2i2Status e2i2_scene_scan(const struct E2i2Scene *scene,
                                const double *axis,
                                double from,
                                double to,
                                size_t steps,
                                double *baselines,
                                double *totals,
                                double *direct,
                                double *crossed,
                                size_t capacity);

/**
 * Procedure rates for amplitudes `S1A, D2B, D2A, S1B`, passed as 8 doubles
 * in `re, im` order.
 *
 * # Safety
 * `amplitudes` must point to 8 doubles and `out` must be writable.
 */
enum E2i2Status e2i2_procedure_rates(const double *amplitudes, struct E2i2ProcedureRates *out);

/**
 * Run a config file and write its outputs to `out_dir`, as `e2i2 run` does.
 *
 * # Safety
 * Both arguments must be NUL-terminated strings.
 */
enum E2i2Status e2i2_run_config(const char *config_path, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* E2I2_H */

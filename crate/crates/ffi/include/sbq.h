#ifndef SBQ_H
#define SBQ_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every `sbq_*` call.
 */
typedef enum SbqStatus {
  SBQ_STATUS_OK = 0,
  SBQ_STATUS_NULL_POINTER = 1,
  SBQ_STATUS_INVALID_ARGUMENT = 2,
  SBQ_STATUS_CONFIG = 3,
  /**
   * A step produced a non-finite state; the handle keeps the last finite one.
   */
  SBQ_STATUS_BLOWUP = 4,
  /**
   * The CFL guard refused a step; the handle keeps the last accepted state.
   */
  SBQ_STATUS_CFL_VIOLATION = 5,
  SBQ_STATUS_IO = 6,
  SBQ_STATUS_INTERNAL = 7,
  SBQ_STATUS_PANIC = 8,
} SbqStatus;

/**
 * Opaque simulation handle.
 */
typedef struct SbqSimulation SbqSimulation;

/**
 * One diagnostics row. Field order matches the CSV columns.
 */
typedef struct SbqDiagnostics {
  double t;
  double kinetic_energy;
  double buoyancy_flux;
  double enstrophy2;
  double enstrophy4;
  double h2_omega;
  double h3_theta;
  double linf_grad_u;
  double linf_grad_theta;
  double lp_grad_theta;
  double blowup_accum;
  double embedding_ratio;
} SbqDiagnostics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *sbq_version(void);

/**
 * Message of the last failed call on this thread, or null if the last call
 * succeeded. Release it with `sbq_string_free`.
 */
char *sbq_last_error_message(void);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must be null or a pointer obtained from `sbq_last_error_message`, not
 * already freed.
 */
void sbq_string_free(char *s);

/**
 * Number of diagnostics columns.
 */
size_t sbq_diagnostics_column_count(void);

/**
 * Static NUL-terminated name of diagnostics column `index`, or null when out of range.
 */
const char *sbq_diagnostics_column_name(size_t index);

/**
 * Creates a simulation from a JSON run configuration. On success `*out`
 * owns a handle that must be released with `sbq_simulation_free`.
 *
 * # Safety
 * `config_json` must be null or a NUL-terminated string; `out` must be null
 * or valid for writes.
 */
enum SbqStatus sbq_simulation_new(const char *config_json, struct SbqSimulation **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `sim` must be null or a handle from `sbq_simulation_new`, not already freed.
 */
void sbq_simulation_free(struct SbqSimulation *sim);

/**
 * Advances to `end_time`, recording diagnostics at the configured interval.
 *
 * # Safety
 * `sim` must be null or a live handle not used concurrently.
 */
enum SbqStatus sbq_simulation_advance(struct SbqSimulation *sim, double end_time);

/**
 * Current model time.
 *
 * # Safety
 * `sim` must be null or a live handle; `out` must be null or valid for writes.
 */
enum SbqStatus sbq_simulation_time(const struct SbqSimulation *sim, double *out);

/**
 * Grid points per side.
 *
 * # Safety
 * `sim` must be null or a live handle; `out` must be null or valid for writes.
 */
enum SbqStatus sbq_simulation_grid_size(const struct SbqSimulation *sim, size_t *out);

/**
 * Copies the vorticity on the physical grid into `buf`, which must hold
 * exactly `n * n` values; `buf[i * n + j]` is the value at `(x_i, y_j)`.
 *
 * # Safety
 * `sim` must be null or a live handle; `buf` must be null or valid for `len` writes.
 */
enum SbqStatus sbq_simulation_vorticity(const struct SbqSimulation *sim, double *buf, size_t len);

/**
 * Like `sbq_simulation_vorticity`, for the temperature.
 *
 * # Safety
 * `sim` must be null or a live handle; `buf` must be null or valid for `len` writes.
 */
enum SbqStatus sbq_simulation_temperature(const struct SbqSimulation *sim, double *buf, size_t len);

/**
 * Number of diagnostics rows recorded so far, the initial one included.
 *
 * # Safety
 * `sim` must be null or a live handle; `out` must be null or valid for writes.
 */
enum SbqStatus sbq_simulation_record_count(const struct SbqSimulation *sim, size_t *out);

/**
 * Diagnostics row `index` (0 is the initial state).
 *
 * # Safety
 * `sim` must be null or a live handle; `out` must be null or valid for writes.
 */
enum SbqStatus sbq_simulation_record(const struct SbqSimulation *sim,
                                     size_t index,
                                     struct SbqDiagnostics *out);

/**
 * Writes the current state as a binary snapshot.
 *
 * # Safety
 * `sim` must be null or a live handle; `path` must be null or a NUL-terminated string.
 */
enum SbqStatus sbq_simulation_write_snapshot(const struct SbqSimulation *sim, const char *path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SBQ_H */

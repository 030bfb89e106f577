#ifndef RHC_H
#define RHC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every call; values 1-3 match the `rhc` exit codes.
 */
typedef enum RhcStatus {
  RHC_STATUS_OK = 0,
  RHC_STATUS_INPUT_ERROR = 1,
  RHC_STATUS_HYPOTHESIS_FAILED = 2,
  RHC_STATUS_NEAR_SINGULAR = 3,
  /**
   * Null pointer, bad UTF-8 or a too small output buffer.
   */
  RHC_STATUS_INVALID_ARGUMENT = 4,
  /**
   * A panic inside the library.
   */
  RHC_STATUS_INTERNAL = 5,
} RhcStatus;

/**
 * Parsed problem file together with the mode to run it in.
 */
typedef struct RhcProblem RhcProblem;

/**
 * Solution of a `solve` or `idnls` problem.
 */
typedef struct RhcSolution RhcSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failing call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *rhc_last_error_message(void);

/**
 * Parses a JSON problem file for `mode` (`"solve"`, `"index"`, `"idnls"`,
 * ...). On success `*out` owns a handle for [`rhc_problem_free`].
 *
 * # Safety
 * `json` and `mode` must be null or NUL-terminated strings; `out` must be
 * null or writable.
 */
enum RhcStatus rhc_problem_from_json(const char *json, const char *mode, struct RhcProblem **out);

/**
 * # Safety
 * `p` must be null or a handle from [`rhc_problem_from_json`] not freed yet.
 */
void rhc_problem_free(struct RhcProblem *p);

/**
 * Solves a `solve` or `idnls` problem. On success `*out` owns a handle for
 * [`rhc_solution_free`].
 *
 * # Safety
 * `p` must be a live problem handle; `out` must be null or writable.
 */
enum RhcStatus rhc_solve(const struct RhcProblem *p, struct RhcSolution **out);

/**
 * # Safety
 * `s` must be null or a handle from [`rhc_solve`] not freed yet.
 */
void rhc_solution_free(struct RhcSolution *s);

/**
 * Matrix size `n` of the solution (values are `n x n`); 0 for null.
 *
 * # Safety
 * `s` must be null or a live solution handle.
 */
size_t rhc_solution_dim(const struct RhcSolution *s);

/**
 * Jump residual at the midpoints between nodes; NaN for null.
 *
 * # Safety
 * `s` must be null or a live solution handle.
 */
double rhc_solution_residual_jump(const struct RhcSolution *s);

/**
 * Smallest singular value of the discretized operator; NaN for null.
 *
 * # Safety
 * `s` must be null or a live solution handle.
 */
double rhc_solution_sigma_min(const struct RhcSolution *s);

/**
 * Writes `m(re + i im)` to `out` (`2 n^2` doubles, row-major, interleaved).
 * Points too close to the contour are an input error.
 *
 * # Safety
 * `s` must be a live solution handle and `out` must point to `len`
 * writable doubles.
 */
enum RhcStatus rhc_solution_eval(const struct RhcSolution *s,
                                 double re,
                                 double im,
                                 double *out,
                                 size_t len);

/**
 * Runs any mode on a JSON problem and returns the JSON report in `*report`
 * (free with [`rhc_string_free`]). A report is produced for failed runs as
 * well; the status says how the run ended.
 *
 * # Safety
 * `json` and `mode` must be null or NUL-terminated strings; `report` must
 * be null or writable.
 */
enum RhcStatus rhc_run_json(const char *json, const char *mode, char **report);

/**
 * # Safety
 * `s` must be null or a string returned by this library not freed yet.
 */
void rhc_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RHC_H */

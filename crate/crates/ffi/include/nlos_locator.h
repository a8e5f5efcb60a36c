/* C interface for the nlos-locator toolkit. */

#ifndef NLOS_LOCATOR_H
#define NLOS_LOCATOR_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible entry point.
 */
typedef enum {
  NLOS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  NLOS_ERR_NULL_POINTER = 1,
  /**
   * Inputs violate a documented invariant; see `nlos_last_error_message`.
   */
  NLOS_ERR_INVALID_ARGUMENT = 2,
  /**
   * The network dynamics faulted (non-finite derivative or step budget).
   */
  NLOS_ERR_FAULT = 3,
} nlos_status;

/**
 * Opaque localization problem: sensor geometry, received timestamps, and
 * solver parameters.
 */
typedef struct nlos_problem nlos_problem;

/**
 * Integration options; zero-initialize and override what you need.
 */
typedef struct {
  /**
   * Euler step size; `<= 0` picks the default.
   */
  double tau;
  /**
   * Simulated horizon in time constants; `<= 0` picks the default (40).
   */
  double horizon;
  /**
   * Nonzero: fixed-step Euler. Zero: adaptive step doubling (default).
   */
  int32_t fixed_step;
  /**
   * Nonzero: squared-loss control instead of the robust loss.
   */
  int32_t squared_loss;
} nlos_solve_options;

/**
 * Solver output. `position` holds `dim` meaningful entries.
 */
typedef struct {
  double onset_time;
  double position[3];
  double kkt_stationarity;
  double kkt_projection;
  double kkt_equality;
  uint64_t steps;
} nlos_solution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Crate version as a static C string.
 */
const char *nlos_version(void);

/**
 * Detail message for the most recent failure on this thread. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *nlos_last_error_message(void);

/**
 * Builds a problem from `sensor_count x dim` row-major sensor coordinates
 * and the received timestamps (seconds). `gamma` and `rho` are the
 * smoothing and penalty parameters; pass `<= 0` to use the defaults
 * (100 and 5).
 *
 * # Safety
 * `sensors` must point to `sensor_count * dim` readable doubles,
 * `timestamps` to `sensor_count` readable doubles, and `out` to a writable
 * pointer slot. On success `*out` owns the problem and must be released
 * with [`nlos_problem_free`].
 */
nlos_status nlos_problem_new(const double *sensors,
                             uintptr_t sensor_count,
                             uintptr_t dim,
                             const double *timestamps,
                             double propagation_speed,
                             double gamma,
                             double rho,
                             nlos_problem **out);

/**
 * Releases a problem created by [`nlos_problem_new`]. Null is a no-op.
 *
 * # Safety
 * `p` must be null or a pointer returned by `nlos_problem_new` that has not
 * been freed yet.
 */
void nlos_problem_free(nlos_problem *p);

/**
 * Runs the network from zero initialization and writes the estimate into
 * `out`. `opts` may be null for defaults. `distances`, when non-null, must
 * have room for `sensor_count` doubles and receives the recovered
 * source-sensor distances.
 *
 * # Safety
 * `p` must be a live problem handle; `out` must be writable; `distances`
 * must be null or point to `sensor_count` writable doubles; `opts` must be
 * null or point to a readable options struct.
 */
nlos_status nlos_solve(const nlos_problem *p,
                       const nlos_solve_options *opts,
                       nlos_solution *out,
                       double *distances);

/**
 * LOS TDOA position-error lower bound for the given geometry and common
 * noise level `sigma` (meters). Writes the bound into `out`.
 *
 * # Safety
 * `sensors` must point to `sensor_count * dim` readable doubles, `source`
 * to `dim` readable doubles, and `out` to a writable double.
 */
nlos_status nlos_crlb_los(const double *sensors,
                          uintptr_t sensor_count,
                          uintptr_t dim,
                          const double *source,
                          double sigma,
                          double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NLOS_LOCATOR_H */

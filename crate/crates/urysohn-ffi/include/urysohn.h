#ifndef URYSOHN_H
#define URYSOHN_H

/* Generated by cbindgen from urysohn-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Discretization to solve with.
 */
typedef enum {
  URY_METHOD_COLLOCATION = 0,
  URY_METHOD_HIGH_ORDER = 1,
} UryMethod;

/**
 * Quasi-interpolating projector variant.
 */
typedef enum {
  URY_QIP_Q2 = 0,
  URY_QIP_Q2DB = 1,
  URY_QIP_Q3 = 2,
} UryQip;

/**
 * Newton starting point.
 */
typedef enum {
  URY_SEED_PROJECT_RHS = 0,
  URY_SEED_EXACT = 1,
} UrySeed;

/**
 * Result codes for every fallible call.
 */
typedef enum {
  URY_STATUS_OK = 0,
  URY_STATUS_NULL_ARGUMENT = 1,
  URY_STATUS_INVALID_PARAMETER = 2,
  URY_STATUS_CONSTRUCTION_FAILED = 3,
  URY_STATUS_NUMERIC_ERROR = 4,
  URY_STATUS_SINGULAR_SYSTEM = 5,
  URY_STATUS_DIVERGED = 6,
  URY_STATUS_INTERNAL_ERROR = 7,
} UryStatus;

/**
 * Opaque problem handle.
 */
typedef struct UryProblem UryProblem;

/**
 * Opaque solution handle.
 */
typedef struct UrySolution UrySolution;

/**
 * Solve parameters. Zero or negative `tol` selects the default 1e-14; zero
 * `max_iter` selects the default 50.
 */
typedef struct {
  uint32_t n;
  UryMethod method;
  UryQip qip;
  UrySeed seed;
  double tol;
  uint32_t max_iter;
  bool damped;
} UrySolveOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates the first benchmark problem (degenerate oscillatory kernel).
 *
 * # Safety
 * `out` must point to writable storage for one pointer.
 */
UryStatus ury_problem_test1(UryProblem **out);

/**
 * Creates the second benchmark problem with parameter `c > 0`.
 *
 * # Safety
 * `out` must point to writable storage for one pointer.
 */
UryStatus ury_problem_test2(double c, UryProblem **out);

/**
 * Releases a problem handle. Passing null is a no-op.
 *
 * # Safety
 * `problem` must be a handle returned by a constructor and not yet freed.
 */
void ury_problem_free(UryProblem *problem);

/**
 * Solves the problem on `options.n` subintervals and returns a solution
 * handle.
 *
 * # Safety
 * `problem` and `options` must be valid; `out` must point to writable
 * storage for one pointer.
 */
UryStatus ury_solve(const UryProblem *problem, const UrySolveOptions *options, UrySolution **out);

/**
 * Evaluates the approximate solution at `s` in [0, 1].
 *
 * # Safety
 * `solution` must be a live solution handle; `out` must be writable.
 */
UryStatus ury_solution_eval(const UrySolution *solution, double s, double *out);

/**
 * Number of Newton iterations it took to converge.
 *
 * # Safety
 * `solution` must be a live solution handle.
 */
uint32_t ury_solution_iterations(const UrySolution *solution);

/**
 * Max-norm residual of the discrete fixed-point equation at the final
 * iterate.
 *
 * # Safety
 * `solution` must be a live solution handle.
 */
double ury_solution_residual(const UrySolution *solution);

/**
 * Largest deviation from the problem's exact solution over `grid_points`
 * equally spaced evaluation points. Fails with `URY_STATUS_INVALID_PARAMETER`
 * when the problem has no exact solution or `grid_points < 2`.
 *
 * # Safety
 * `solution` must be a live solution handle; `out` must be writable.
 */
UryStatus ury_solution_max_error(const UrySolution *solution, uint32_t grid_points, double *out);

/**
 * Releases a solution handle. Passing null is a no-op.
 *
 * # Safety
 * `solution` must be a handle returned by `ury_solve` and not yet freed.
 */
void ury_solution_free(UrySolution *solution);

/**
 * Static name for a status code.
 */
const char *ury_status_name(UryStatus status);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* URYSOHN_H */

#ifndef MEMBRANE_ID_H
#define MEMBRANE_ID_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MidMethod {
  MID_METHOD_PG = 0,
  MID_METHOD_NPG = 1,
  MID_METHOD_BARRIER = 2,
} MidMethod;

// Status codes of the C interface.
typedef enum MidStatus {
  MID_STATUS_OK = 0,
  MID_STATUS_INVALID_ARGUMENT = 1,
  MID_STATUS_NUMERICAL_FAILURE = 2,
  MID_STATUS_STEPSIZE_TOO_LARGE = 3,
  MID_STATUS_INFEASIBLE_ITERATE = 4,
  MID_STATUS_UNDEFINED_METRIC = 5,
  MID_STATUS_INVALID_PERTURBATION = 6,
  MID_STATUS_MEASUREMENT_FAILURE = 7,
  MID_STATUS_PARSE = 8,
  MID_STATUS_IO = 9,
  MID_STATUS_NULL_POINTER = 10,
  MID_STATUS_BUFFER_TOO_SMALL = 11,
  MID_STATUS_PANIC = 12,
} MidStatus;

typedef enum MidTestCase {
  MID_TEST_CASE_TESTCASE1 = 1,
  MID_TEST_CASE_TESTCASE2 = 2,
} MidTestCase;

typedef enum MidCommand {
  MID_COMMAND_FORWARD = 0,
  MID_COMMAND_INVERT = 1,
  MID_COMMAND_EXPERIMENT = 2,
} MidCommand;

// Opaque obstacle problem on a uniform grid.
typedef struct MidProblem MidProblem;

// Opaque result of a contact solve.
typedef struct MidSolution MidSolution;

// Solver settings. A non-positive `tau` selects the method's default step.
typedef struct MidSolverConfig {
  enum MidMethod method;
  double tau;
  double kkt_tol;
  size_t max_iter;
  double mu0;
  double theta0;
} MidSolverConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Valid until the
// next call into the library from the same thread.
const char *mid_last_error(void);

// Library version as a static string.
const char *mid_version(void);

// Default settings for `method`.
struct MidSolverConfig mid_solver_config_default(enum MidMethod method);

// Problem on an `n × n` node grid from nodal coefficient, load and obstacle
// arrays of length `len = n²` (node `j·n + i` at `(i, j)/(n − 1)`).
//
// # Safety
// `a`, `f`, `h` must each point to `len` doubles; `out` must be writable.
enum MidStatus mid_problem_new(size_t n,
                               const double *a,
                               const double *f,
                               const double *h,
                               size_t len,
                               struct MidProblem **out);

// One of the two built-in forward benchmarks.
//
// # Safety
// `out` must be writable.
enum MidStatus mid_problem_testcase(enum MidTestCase which, size_t n, struct MidProblem **out);

// Nodes per axis, or 0 for a null handle.
//
// # Safety
// `p` must be null or a live problem handle.
size_t mid_problem_grid_n(const struct MidProblem *p);

// # Safety
// `p` must be null or a handle from this library that was not freed yet.
void mid_problem_free(struct MidProblem *p);

// KKT residual of the nodal vector `u` for problem `p`.
//
// # Safety
// `p` must be a live handle, `u` must point to `len` doubles, `out` must be writable.
enum MidStatus mid_kkt_residual(const struct MidProblem *p,
                                const double *u,
                                size_t len,
                                double *out);

// Solve the contact problem. Running out of iterations is not an error;
// check [`mid_solution_converged`].
//
// # Safety
// `p` must be a live handle, `cfg` readable, `out` writable.
enum MidStatus mid_solve(const struct MidProblem *p,
                         const struct MidSolverConfig *cfg,
                         struct MidSolution **out);

// # Safety
// `s` must be null or a handle from this library that was not freed yet.
void mid_solution_free(struct MidSolution *s);

// Number of nodes of the solution, or 0 for a null handle.
//
// # Safety
// `s` must be null or a live solution handle.
size_t mid_solution_len(const struct MidSolution *s);

// # Safety
// `s` must be null or a live solution handle.
size_t mid_solution_iterations(const struct MidSolution *s);

// # Safety
// `s` must be null or a live solution handle.
bool mid_solution_converged(const struct MidSolution *s);

// Final KKT residual (NaN for a null handle).
//
// # Safety
// `s` must be null or a live solution handle.
double mid_solution_kkt(const struct MidSolution *s);

// Copy the displacement into `out`.
//
// # Safety
// `s` must be a live handle and `out` must hold `len` doubles.
enum MidStatus mid_solution_u(const struct MidSolution *s, double *out, size_t len);

// Copy the contact multiplier `Au − f` (zero on the boundary) into `out`.
//
// # Safety
// `s` must be a live handle and `out` must hold `len` doubles.
enum MidStatus mid_solution_lambda(const struct MidSolution *s, double *out, size_t len);

// Write 1 for contact nodes and 0 elsewhere into `out`.
//
// # Safety
// `s` must be a live handle and `out` must hold `len` bytes.
enum MidStatus mid_solution_contact(const struct MidSolution *s, uint8_t *out, size_t len);

// Run a command-line job from a JSON configuration. `out_dir` may be null
// to keep the configured directory. Returns the command's exit code:
// 0 converged, 2 iteration budget exhausted, 1 error (see [`mid_last_error`]).
//
// # Safety
// `config_json` must be a nul-terminated string; `out_dir` null or nul-terminated.
int32_t mid_run(enum MidCommand command, const char *config_json, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MEMBRANE_ID_H */

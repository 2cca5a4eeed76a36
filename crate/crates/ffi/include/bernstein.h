#ifndef BERNSTEIN_H
#define BERNSTEIN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of a call.
typedef enum BernsteinStatus {
  BERNSTEIN_STATUS_OK = 0,
  // A required pointer was null.
  BERNSTEIN_STATUS_NULL_POINTER = 1,
  // Invalid argument or configuration, including times below `t_min`.
  BERNSTEIN_STATUS_INVALID_INPUT = 2,
  // No solution exists, or the truncation cannot be certified.
  BERNSTEIN_STATUS_INFEASIBLE = 3,
  // An iterative solver did not converge.
  BERNSTEIN_STATUS_NON_CONVERGENCE = 4,
  // Numerical failure or violated invariant.
  BERNSTEIN_STATUS_NUMERICAL = 5,
  // The output buffer is too small; the required length was written.
  BERNSTEIN_STATUS_BUFFER_TOO_SMALL = 6,
  // A Rust panic was caught.
  BERNSTEIN_STATUS_PANIC = 7,
} BernsteinStatus;

// A heat kernel together with its spectral basis.
typedef struct BernsteinKernel BernsteinKernel;

// A single-level Bernstein process.
typedef struct BernsteinProcess BernsteinProcess;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// The message of the last failed call on this thread, or null. Valid until
// the next call into the library on the same thread.
const char *bernstein_last_error(void);

// Library version as a static nul-terminated string.
const char *bernstein_version(void);

// Kernel on the Neumann interval `[0, 1]` with `levels` modes, quadrature of
// order `quad_order`, certified for `t >= t_min` to tolerance `tol`.
//
// # Safety
// `out` must be valid for writes.
enum BernsteinStatus bernstein_kernel_new_interval(size_t levels,
                                                   size_t quad_order,
                                                   double t_min,
                                                   double tol,
                                                   struct BernsteinKernel **out);

// Kernel on the unit disk restricted to radial modes.
//
// # Safety
// `out` must be valid for writes.
enum BernsteinStatus bernstein_kernel_new_disk(size_t levels,
                                               size_t quad_order,
                                               double t_min,
                                               double tol,
                                               struct BernsteinKernel **out);

// Releases a kernel; null is ignored.
//
// # Safety
// `kernel` must be null or a handle not yet freed.
void bernstein_kernel_free(struct BernsteinKernel *kernel);

// Number of modes retained by the kernel.
//
// # Safety
// `kernel` must be null or a live handle; `out` must be valid for writes.
enum BernsteinStatus bernstein_kernel_truncation(const struct BernsteinKernel *kernel, size_t *out);

// Eigenvalue `lambda_m` of level `m`.
//
// # Safety
// As for [`bernstein_kernel_truncation`].
enum BernsteinStatus bernstein_kernel_eigenvalue(const struct BernsteinKernel *kernel,
                                                 size_t m,
                                                 double *out);

// Kernel value `g(x, t, y)`; refuses `t < t_min`.
//
// # Safety
// As for [`bernstein_kernel_truncation`].
enum BernsteinStatus bernstein_kernel_eval(const struct BernsteinKernel *kernel,
                                           double x,
                                           double t,
                                           double y,
                                           double *out);

// Partition function `Z(T) = sum_m exp(-T lambda_m)` over the truncation.
//
// # Safety
// As for [`bernstein_kernel_truncation`].
enum BernsteinStatus bernstein_kernel_partition_function(const struct BernsteinKernel *kernel,
                                                         double horizon,
                                                         double *out);

// Maximal-entropy Gibbs parameters for the spectral average `lambda`.
// Any of `beta`, `z` and `entropy` may be null.
//
// # Safety
// `kernel` must be null or a live handle; non-null outputs must be valid for writes.
enum BernsteinStatus bernstein_gibbs_solve(const struct BernsteinKernel *kernel,
                                           double lambda,
                                           double tol,
                                           double *beta,
                                           double *z,
                                           double *entropy);

// A positive level-`m` process on `[0, horizon]`. On the disk it uses the
// disk example data; elsewhere `phi = 1 + F_m / (2 sup|F_m|)` and `psi = 1`.
//
// # Safety
// `kernel` must be null or a live handle; `out` must be valid for writes.
enum BernsteinStatus bernstein_process_new_level(const struct BernsteinKernel *kernel,
                                                 size_t m,
                                                 double horizon,
                                                 struct BernsteinProcess **out);

// Releases a process; null is ignored.
//
// # Safety
// `process` must be null or a handle not yet freed.
void bernstein_process_free(struct BernsteinProcess *process);

// Marginal density (with respect to area) at `x` and time `t`.
//
// # Safety
// `process` must be null or a live handle; `out` must be valid for writes.
enum BernsteinStatus bernstein_process_marginal_density(const struct BernsteinProcess *process,
                                                        double x,
                                                        double t,
                                                        double *out);

// `P(lo <= X(t) <= hi)`.
//
// # Safety
// As for [`bernstein_process_marginal_density`].
enum BernsteinStatus bernstein_process_probability(const struct BernsteinProcess *process,
                                                   double lo,
                                                   double hi,
                                                   double t,
                                                   double *out);

// Samples `n_paths` trajectories at the `n_times` increasing `times` and
// writes them row-major (path after path) into `coords`, which must hold
// `capacity >= n_paths * n_times` values. When it is too small nothing is
// sampled, `*written` is set to the required length and the call returns
// `BufferTooSmall`. Results depend only on `seed`.
//
// # Safety
// `process` must be null or a live handle; `times` must point to `n_times`
// values; `coords` to `capacity` writable values; `written` must be valid for writes.
enum BernsteinStatus bernstein_process_sample(const struct BernsteinProcess *process,
                                              const double *times,
                                              size_t n_times,
                                              size_t n_paths,
                                              uint64_t seed,
                                              double *coords,
                                              size_t capacity,
                                              size_t *written);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BERNSTEIN_H */

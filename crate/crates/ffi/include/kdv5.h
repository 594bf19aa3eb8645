#ifndef KDV5_H
#define KDV5_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>
#include <stddef.h>

typedef enum kdv5_status {
  KDV5_STATUS_OK = 0,
  KDV5_STATUS_NULL_POINTER = 1,
  KDV5_STATUS_INVALID_ARGUMENT = 2,
  KDV5_STATUS_DIMENSION = 3,
  KDV5_STATUS_DOMAIN = 4,
  KDV5_STATUS_RESOLUTION = 5,
  KDV5_STATUS_DIVERGENCE = 6,
  KDV5_STATUS_CONVERGENCE = 7,
  KDV5_STATUS_ILL_CONDITIONED = 8,
  KDV5_STATUS_INCONCLUSIVE_DECAY = 9,
  KDV5_STATUS_SMALL_DATA_VIOLATION = 10,
  KDV5_STATUS_IO = 11,
  KDV5_STATUS_CONFIG = 12,
  KDV5_STATUS_PANIC = 13,
} kdv5_status;

// A computed control with its resimulated trajectory.
typedef struct kdv5_control kdv5_control;

// Equation, grid and control profile.
typedef struct kdv5_model kdv5_model;

// Time levels of a solution.
typedef struct kdv5_trajectory kdv5_trajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Length in bytes of the last error message on this thread, excluding the NUL.
size_t kdv5_last_error_length(void);

// Copies the last error message (NUL-terminated, truncated to `len − 1` bytes)
// and returns its full length.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t kdv5_last_error_message(char *buf, size_t len);

// Library version as a static NUL-terminated string.
const char *kdv5_version(void);

// Fifth-order KdV model on `K = n_modes` with a bump control profile.
//
// # Safety
// `out` must be a valid pointer; on success it receives a handle owned by the caller.
enum kdv5_status kdv5_model_new_bump(size_t n_modes,
                                     double center,
                                     double radius,
                                     int feedback,
                                     struct kdv5_model **out);

// As [`kdv5_model_new_bump`] with the uniform profile `g = 1/2π`.
//
// # Safety
// `out` must be a valid pointer.
enum kdv5_status kdv5_model_new_uniform(size_t n_modes, int feedback, struct kdv5_model **out);

// Sets `ε`, the `D^{2l+1}` damping coefficient.
//
// # Safety
// `model` must be a live handle.
enum kdv5_status kdv5_model_set_epsilon(struct kdv5_model *model, double epsilon);

// Sets the nonlinear coefficients `c₀…c₃` from `c[4]`.
//
// # Safety
// `model` must be a live handle and `c` point to four doubles.
enum kdv5_status kdv5_model_set_coefficients(struct kdv5_model *model, const double *c);

// Number of collocation points, the length of every sample array.
//
// # Safety
// `model` must be a live handle or null (returns 0).
size_t kdv5_model_n_points(const struct kdv5_model *model);

// # Safety
// `model` must be null or a handle not yet freed.
void kdv5_model_free(struct kdv5_model *model);

// Solves from samples `u0` over `[0, t_final]`; `linear != 0` drops the nonlinearity.
//
// # Safety
// `model` must be a live handle, `u0` point to `n` doubles and `out` be valid.
enum kdv5_status kdv5_simulate(const struct kdv5_model *model,
                               const double *u0,
                               size_t n,
                               double t_final,
                               double dt,
                               int linear,
                               struct kdv5_trajectory **out);

// Number of stored time levels (steps + 1).
//
// # Safety
// `traj` must be a live handle or null (returns 0).
size_t kdv5_trajectory_len(const struct kdv5_trajectory *traj);

// Samples of level `index` into `buf[len]`.
//
// # Safety
// `traj` must be a live handle and `buf` point to `len` writable doubles.
enum kdv5_status kdv5_trajectory_state(const struct kdv5_trajectory *traj,
                                       size_t index,
                                       double *buf,
                                       size_t len);

// `‖u(t_index)‖_s`.
//
// # Safety
// `traj` must be a live handle and `out` valid.
enum kdv5_status kdv5_trajectory_norm(const struct kdv5_trajectory *traj,
                                      size_t index,
                                      double s,
                                      double *out);

// # Safety
// `traj` must be null or a handle not yet freed.
void kdv5_trajectory_free(struct kdv5_trajectory *traj);

// Steers `u0` to `ut` in time `t_final`. `nonlinear == 0` uses the linear
// minimum-energy control (data must be mean-zero); otherwise the nonlinear
// fixed point runs to tolerance `tol` in `Z_{s,T}`.
//
// # Safety
// `model` must be a live handle, `u0` and `ut` point to `n` doubles and `out` be valid.
enum kdv5_status kdv5_control_solve(const struct kdv5_model *model,
                                    const double *u0,
                                    const double *ut,
                                    size_t n,
                                    double t_final,
                                    double dt,
                                    double s,
                                    int nonlinear,
                                    double tol,
                                    struct kdv5_control **out);

// Resimulation endpoint error in `H^s` (relative for linear control, absolute
// for nonlinear control).
//
// # Safety
// `control` must be a live handle or null (returns NaN).
double kdv5_control_endpoint_error(const struct kdv5_control *control);

// Fixed-point iterations used (0 for linear control).
//
// # Safety
// `control` must be a live handle or null (returns 0).
size_t kdv5_control_iterations(const struct kdv5_control *control);

// Trapezoid `L²` energy `Σ wₙ dt ‖k(t_n)‖²` of the control.
//
// # Safety
// `control` must be a live handle or null (returns NaN).
double kdv5_control_energy(const struct kdv5_control *control);

// Number of control samples (steps + 1).
//
// # Safety
// `control` must be a live handle or null (returns 0).
size_t kdv5_control_len(const struct kdv5_control *control);

// Samples of `k(t_index)` into `buf[len]`.
//
// # Safety
// `control` must be a live handle and `buf` point to `len` writable doubles.
enum kdv5_status kdv5_control_signal(const struct kdv5_control *control,
                                     size_t index,
                                     double *buf,
                                     size_t len);

// Copies the controlled trajectory into a new handle.
//
// # Safety
// `control` must be a live handle and `out` valid.
enum kdv5_status kdv5_control_trajectory(const struct kdv5_control *control,
                                         struct kdv5_trajectory **out);

// # Safety
// `control` must be null or a handle not yet freed.
void kdv5_control_free(struct kdv5_control *control);

// Extreme eigenvalues of the observability Gramian over `[0, t_final]`.
//
// # Safety
// `model` must be a live handle; `lambda_min` and `lambda_max` valid.
enum kdv5_status kdv5_observability(const struct kdv5_model *model,
                                    double t_final,
                                    double dt,
                                    double *lambda_min,
                                    double *lambda_max);

// Runs the scenario CLI with `argv[0..argc]` and returns its exit code.
//
// # Safety
// `argv` must point to `argc` NUL-terminated strings.
int kdv5_run_cli(int argc, const char *const *argv);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KDV5_H */

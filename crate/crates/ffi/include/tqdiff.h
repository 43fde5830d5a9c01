#ifndef TQDIFF_H
#define TQDIFF_H

#pragma once

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TqDynamics {
  TQ_DYNAMICS_OVERDAMPED = 0,
  TQ_DYNAMICS_UNDERDAMPED = 1,
} TqDynamics;

typedef enum TqForce {
  TQ_FORCE_FREE = 0,
  TQ_FORCE_EXTERNAL = 1,
  TQ_FORCE_MEANFIELD_BOHM = 2,
  TQ_FORCE_MEANFIELD_FREE_ENERGY = 3,
  TQ_FORCE_EFFECTIVE_SPRING = 4,
  TQ_FORCE_TIME_DEPENDENT_SPRING = 5,
  TQ_FORCE_TIME_DEPENDENT_SPRING_ODE = 6,
} TqForce;

typedef enum TqMomentKind {
  TQ_MOMENT_KIND_FREE_THERMAL = 0,
  TQ_MOMENT_KIND_OSCILLATOR_THERMAL = 1,
  TQ_MOMENT_KIND_OSCILLATOR_ZERO_T = 2,
} TqMomentKind;

typedef enum TqPdeModel {
  TQ_PDE_MODEL_FREE_THERMAL = 0,
  TQ_PDE_MODEL_THERMAL_POTENTIAL = 1,
  TQ_PDE_MODEL_ZERO_TEMPERATURE_POTENTIAL = 2,
} TqPdeModel;

typedef enum TqStatus {
  TQ_STATUS_OK = 0,
  TQ_STATUS_NULL_POINTER = 1,
  TQ_STATUS_INVALID_ARGUMENT = 2,
  TQ_STATUS_NUMERIC = 3,
  TQ_STATUS_STEP_UNDERFLOW = 4,
  TQ_STATUS_NEGATIVITY = 5,
  TQ_STATUS_BOUNDARY_LEAK = 6,
  TQ_STATUS_BUFFER_TOO_SMALL = 7,
  TQ_STATUS_IO = 8,
  TQ_STATUS_PANIC = 9,
} TqStatus;

/**
 * Opaque density solver.
 */
typedef struct TqPde TqPde;

/**
 * Opaque Langevin ensemble.
 */
typedef struct TqSim TqSim;

typedef struct TqBathParams {
  double m;
  double b;
  double temperature;
  double hbar;
  double kb;
} TqBathParams;

/**
 * Infinite lengths and inverse temperatures are reported as `INFINITY`.
 */
typedef struct TqDerivedConstants {
  double diffusion;
  double lambda_t;
  double beta;
  double bohm_diffusivity;
} TqDerivedConstants;

typedef struct TqOscillatorParams {
  struct TqBathParams bath;
  double omega0;
} TqOscillatorParams;

/**
 * Grid and initial Gaussian for a density solver.
 */
typedef struct TqPdeSpec {
  enum TqPdeModel model;
  struct TqOscillatorParams params;
  size_t n;
  double half_width;
  double center;
  double sigma2_0;
  /**
   * Zero selects the solver default.
   */
  double cfl;
} TqPdeSpec;

/**
 * Ensemble of Langevin trajectories. `dt == 0` selects the default step.
 */
typedef struct TqSimSpec {
  struct TqOscillatorParams params;
  size_t n_traj;
  double dt;
  uint64_t seed;
  enum TqDynamics dynamics;
  enum TqForce force;
  double sigma2_0;
} TqSimSpec;

typedef struct TqSampleStats {
  double mean;
  double var;
  double var_stderr;
} TqSampleStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *tq_version(void);

/**
 * Message of the last failed call on this thread, empty after a success.
 * The pointer stays valid until the next `tq_` call on the same thread.
 */
const char *tq_last_error(void);

/**
 * Reduced units (`m = b = hbar = kB = 1`) at the given temperature.
 */
struct TqBathParams tq_reduced_params(double temperature);

enum TqStatus tq_derive(const struct TqBathParams *params, struct TqDerivedConstants *out);

/**
 * Dispersion of a point-like packet at time `t` under the free thermal front law.
 */
enum TqStatus tq_front_sigma2(const struct TqBathParams *params, double t, double *out);

/**
 * Equilibrium dispersion of the oscillator under the Gaussian closure.
 */
enum TqStatus tq_oscillator_sigma2_closure(const struct TqOscillatorParams *params, double *out);

/**
 * Exact equilibrium dispersion of the damped quantum oscillator.
 */
enum TqStatus tq_oscillator_sigma2_exact(const struct TqOscillatorParams *params, double *out);

/**
 * Zero-temperature oscillator dispersion at `t`, from a point source.
 */
enum TqStatus tq_zero_t_oscillator_sigma2(const struct TqOscillatorParams *params,
                                          double t,
                                          double *out);

enum TqStatus tq_effective_spring(const struct TqOscillatorParams *params, double *out);

/**
 * Integrates the dispersion ODE from `sigma2_0`, writing `sigma2` at each of
 * the `n` increasing times into `out`.
 */
enum TqStatus tq_moments_integrate(enum TqMomentKind kind,
                                   const struct TqOscillatorParams *params,
                                   double sigma2_0,
                                   const double *times,
                                   size_t n,
                                   double *out);

enum TqStatus tq_pde_new(const struct TqPdeSpec *spec, struct TqPde **out);

void tq_pde_free(struct TqPde *handle);

enum TqStatus tq_pde_advance_to(struct TqPde *handle, double t);

enum TqStatus tq_pde_time(const struct TqPde *handle, double *out);

enum TqStatus tq_pde_variance(const struct TqPde *handle, double *out);

enum TqStatus tq_pde_mass(const struct TqPde *handle, double *out);

/**
 * Number of grid points, the size `tq_pde_density` needs.
 */
enum TqStatus tq_pde_len(const struct TqPde *handle, size_t *out);

/**
 * Copies the grid abscissae into `x` and the density into `density`; either may be null.
 */
enum TqStatus tq_pde_density(const struct TqPde *handle,
                             double *x,
                             double *density,
                             size_t capacity);

enum TqStatus tq_sim_new(const struct TqSimSpec *spec, struct TqSim **out);

void tq_sim_free(struct TqSim *handle);

/**
 * Advances the ensemble by `duration`. Splitting a run into several calls
 * gives the same trajectories as one call when `duration` is a whole number
 * of steps.
 */
enum TqStatus tq_sim_advance(struct TqSim *handle, double duration);

enum TqStatus tq_sim_time(const struct TqSim *handle, double *out);

enum TqStatus tq_sim_stats(const struct TqSim *handle, struct TqSampleStats *out);

enum TqStatus tq_sim_positions(const struct TqSim *handle, double *out, size_t capacity);

/**
 * Biased autocorrelation of `samples` at lags `0..=max_lag`; `out` holds
 * `max_lag + 1` values.
 */
enum TqStatus tq_acf(const double *samples,
                     size_t n,
                     double dt,
                     size_t max_lag,
                     double *out,
                     size_t capacity);

/**
 * Welch power spectral density. `segment_len / 2 + 1` frequencies are
 * written to `omegas` and `values`; `written` receives that count.
 */
enum TqStatus tq_psd(const double *samples,
                     size_t n,
                     double dt,
                     size_t segment_len,
                     double overlap,
                     double *omegas,
                     double *values,
                     size_t capacity,
                     size_t *written);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TQDIFF_H */

#ifndef QAMECH_H
#define QAMECH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes shared by every entry point.
 */
typedef enum QamStatus {
  QAM_STATUS_OK = 0,
  QAM_STATUS_NULL_POINTER = 1,
  QAM_STATUS_INVALID_ARGUMENT = 2,
  /**
   * A numerical guard tripped (no bracket, node, leakage, truncation, ...).
   */
  QAM_STATUS_NUMERICAL = 3,
  QAM_STATUS_IO = 4,
  /**
   * Scenario text failed to parse; the message lists every problem.
   */
  QAM_STATUS_CONFIG = 5,
  /**
   * The scenario ran but at least one consistency gate failed.
   */
  QAM_STATUS_GATE_FAILED = 6,
  /**
   * Output buffer shorter than required; nothing was written.
   */
  QAM_STATUS_BUFFER_TOO_SMALL = 7,
  QAM_STATUS_PANIC = 8,
} QamStatus;

typedef struct QamEnsemble QamEnsemble;

typedef struct QamPotential QamPotential;

typedef struct QamStationary QamStationary;

/**
 * Uniform grid description passed by value.
 */
typedef struct QamGrid {
  double x_min;
  double x_max;
  size_t n_points;
  double dt_pde;
} QamGrid;

/**
 * Forward/backward time integration settings passed by value.
 */
typedef struct QamSde {
  uint64_t seed;
  size_t n_paths;
  double dt_sde;
  double t_end;
  size_t record_every;
  /**
   * Non-zero samples the backward diffusion instead of the forward one.
   */
  int32_t backward;
} QamSde;

/**
 * First-passage summary for the traversal of `[lo, hi]`.
 */
typedef struct QamPassageSummary {
  size_t n_paths;
  size_t n_qualified;
  size_t n_censored;
  size_t n_never;
  size_t n_ineligible;
  double mean;
  double median;
  double censored_fraction;
} QamPassageSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message (NUL-terminated) into
 * `buf` and returns its length without the NUL; returns 0 when there is
 * no error. The message is truncated to `len - 1` bytes if needed.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t qam_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *qam_version(void);

/**
 * `V(x) = m ω² x² / 2`.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum QamStatus qam_potential_harmonic(double mass, double omega, struct QamPotential **out);

/**
 * `V(x) = Σ coeffs[i] xⁱ`.
 *
 * # Safety
 * `coeffs` must point to `n` readable values; `out` must be writable.
 */
enum QamStatus qam_potential_polynomial(const double *coeffs, size_t n, struct QamPotential **out);

/**
 * `V(x) = a (x² − b²)²`.
 *
 * # Safety
 * `out` must be writable.
 */
enum QamStatus qam_potential_double_well(double a, double b, struct QamPotential **out);

/**
 * `V(x) = height · sech²((x − center)/width)`.
 *
 * # Safety
 * `out` must be writable.
 */
enum QamStatus qam_potential_barrier(double height,
                                     double width,
                                     double center,
                                     struct QamPotential **out);

/**
 * # Safety
 * `p` must be null or a handle from a `qam_potential_*` constructor, freed once.
 */
void qam_potential_free(struct QamPotential *p);

/**
 * Evaluates the potential at `x`.
 *
 * # Safety
 * `p` and `out` must be valid.
 */
enum QamStatus qam_potential_value(const struct QamPotential *p, double x, double *out);

/**
 * Node-free ground state by Riccati shooting with energy bisection in `[e_lo, e_hi]`.
 *
 * # Safety
 * `potential` must be a live handle and `out` writable.
 */
enum QamStatus qam_stationary_solve(const struct QamPotential *potential,
                                    double mass,
                                    double hbar,
                                    struct QamGrid grid,
                                    double e_lo,
                                    double e_hi,
                                    double tol,
                                    struct QamStationary **out);

/**
 * # Safety
 * `s` must be null or a handle from [`qam_stationary_solve`], freed once.
 */
void qam_stationary_free(struct QamStationary *s);

/**
 * Ground-state energy, residual sup-norm and convergence flag.
 *
 * # Safety
 * `s` must be a live handle; each out pointer may be null.
 */
enum QamStatus qam_stationary_energy(const struct QamStationary *s,
                                     double *energy,
                                     double *residual_sup,
                                     int32_t *converged);

/**
 * Copies the osmotic velocity `u(x)` on the grid.
 *
 * # Safety
 * `s` must be a live handle; `buf` must hold `len` values; `needed` may be null.
 */
enum QamStatus qam_stationary_osmotic(const struct QamStationary *s,
                                      double *buf,
                                      size_t len,
                                      size_t *needed);

/**
 * Copies the density `ρ(x)` on the grid.
 *
 * # Safety
 * As for [`qam_stationary_osmotic`].
 */
enum QamStatus qam_stationary_density(const struct QamStationary *s,
                                      double *buf,
                                      size_t len,
                                      size_t *needed);

/**
 * Samples the stationary diffusion `dx = u dt + √(ħ/m) dW` started from `ρ`.
 *
 * # Safety
 * `s` must be a live handle and `out` writable.
 */
enum QamStatus qam_sample_stationary(const struct QamStationary *s,
                                     struct QamSde sde,
                                     struct QamEnsemble **out);

/**
 * Samples the Nelson diffusion of an oscillator coherent state with mean
 * excitation `n_mean`, using the closed-form velocity fields.
 *
 * # Safety
 * `out` must be writable.
 */
enum QamStatus qam_sample_coherent(double omega,
                                   double n_mean,
                                   double mass,
                                   double hbar,
                                   struct QamGrid grid,
                                   struct QamSde sde,
                                   struct QamEnsemble **out);

/**
 * # Safety
 * `e` must be null or a handle from a `qam_sample_*` call, freed once.
 */
void qam_ensemble_free(struct QamEnsemble *e);

/**
 * Number of paths and stored times.
 *
 * # Safety
 * `e` must be a live handle; out pointers may be null.
 */
enum QamStatus qam_ensemble_shape(const struct QamEnsemble *e, size_t *n_paths, size_t *n_times);

/**
 * Copies the stored times.
 *
 * # Safety
 * `e` must be a live handle; `buf` must hold `len` values; `needed` may be null.
 */
enum QamStatus qam_ensemble_times(const struct QamEnsemble *e,
                                  double *buf,
                                  size_t len,
                                  size_t *needed);

/**
 * Copies path `k` (positions at the stored times).
 *
 * # Safety
 * As for [`qam_ensemble_times`].
 */
enum QamStatus qam_ensemble_path(const struct QamEnsemble *e,
                                 size_t k,
                                 double *buf,
                                 size_t len,
                                 size_t *needed);

/**
 * Stationary autocorrelation `C(τ)` for lags `0..=max_lag` stored steps
 * (grand-mean centering); `buf` receives `max_lag + 1` values.
 *
 * # Safety
 * As for [`qam_ensemble_times`].
 */
enum QamStatus qam_ensemble_autocorrelation(const struct QamEnsemble *e,
                                            size_t max_lag,
                                            double *buf,
                                            size_t len,
                                            size_t *needed);

/**
 * Traversal statistics of `[lo, hi]` for paths starting below `lo`.
 *
 * # Safety
 * `e` must be a live handle and `out` writable.
 */
enum QamStatus qam_ensemble_traversal(const struct QamEnsemble *e,
                                      double lo,
                                      double hi,
                                      struct QamPassageSummary *out);

/**
 * Parses and runs a scenario, writing its artifacts and manifest into
 * `out_dir`. `seed` overrides the scenario seed when `override_seed` is
 * non-zero. Returns [`QamStatus::GateFailed`] when outputs were written but a
 * consistency gate failed.
 *
 * # Safety
 * `config_text` and `out_dir` must be valid NUL-terminated UTF-8 strings.
 */
enum QamStatus qam_run_scenario(const char *config_text,
                                const char *out_dir,
                                int32_t override_seed,
                                uint64_t seed);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* QAMECH_H */

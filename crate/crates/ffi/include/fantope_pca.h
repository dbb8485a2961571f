#ifndef FANTOPE_PCA_H
#define FANTOPE_PCA_H

/* Generated with cbindgen:0.29.4 */

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum FpStatus {
  FP_STATUS_OK = 0,
  FP_STATUS_NULL_POINTER = 1,
  FP_STATUS_INVALID_ARGUMENT = 2,
  FP_STATUS_DIMENSION_MISMATCH = 3,
  FP_STATUS_NON_FINITE = 4,
  /**
   * Eigendecomposition failure, divergence or a zero estimate.
   */
  FP_STATUS_NUMERICAL = 5,
  /**
   * A Rust panic was caught at the boundary.
   */
  FP_STATUS_PANIC = 6,
} FpStatus;

/**
 * Corrected covariance plus the sample size it came from.
 */
typedef struct FpCovariance FpCovariance;

/**
 * Output of [`fp_estimate`].
 */
typedef struct FpEstimate FpEstimate;

/**
 * Estimation settings. `mu` and `lambda` set to NaN select the data-driven
 * defaults scaled by `mu_scale` and `lambda_scale`. Infinite `q_bound` or
 * `ball_radius` disable those constraints.
 */
typedef struct FpSettings {
  double mu;
  double mu_scale;
  double lambda;
  double lambda_scale;
  double rho;
  size_t admm_max_iter;
  double tol_abs;
  double tol_rel;
  size_t refine_max_iter;
  double stat_tol;
  double q_bound;
  double ball_radius;
  bool skip_refine;
} FpSettings;

typedef struct FpDiagnostics {
  double mu;
  /**
   * NaN when refinement was skipped.
   */
  double lambda;
  size_t admm_iterations;
  bool admm_converged;
  double primal_residual;
  double dual_residual;
  double relaxation_objective;
  /**
   * Signed `trace(ΣF̂)`.
   */
  double trace_value;
  size_t refine_iterations;
  double stationarity_gap;
  double refined_objective;
} FpDiagnostics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or an empty string.
 * The pointer stays valid until the next failing call on this thread.
 */
const char *fp_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *fp_version(void);

/**
 * Plain covariance `YᵀY/n` of an `n × p` row-major matrix.
 *
 * # Safety
 * `data` must point to `n·p` readable doubles and `out` to a writable
 * handle slot.
 */
enum FpStatus fp_covariance_uncorrected(const double *data,
                                        size_t n,
                                        size_t p,
                                        struct FpCovariance **out);

/**
 * Correction for entries missing independently with probability `1 − delta`.
 * Missing entries must be zero in `data`.
 *
 * # Safety
 * As for [`fp_covariance_uncorrected`].
 */
enum FpStatus fp_covariance_uniform_missing(const double *data,
                                            size_t n,
                                            size_t p,
                                            double delta,
                                            struct FpCovariance **out);

/**
 * Correction for multiplicative noise with second-moment matrix `m`
 * (`p × p`, row-major, positive entries).
 *
 * # Safety
 * `m` must point to `p·p` readable doubles; otherwise as for
 * [`fp_covariance_uncorrected`].
 */
enum FpStatus fp_covariance_multiplicative(const double *data,
                                           size_t n,
                                           size_t p,
                                           const double *m,
                                           struct FpCovariance **out);

/**
 * Correction for coordinate-wise observation probabilities `delta_vec`
 * (length `p`).
 *
 * # Safety
 * `delta_vec` must point to `p` readable doubles; otherwise as for
 * [`fp_covariance_uncorrected`].
 */
enum FpStatus fp_covariance_nonuniform(const double *data,
                                       size_t n,
                                       size_t p,
                                       const double *delta_vec,
                                       struct FpCovariance **out);

/**
 * Correction for additive noise with covariance `sigma_w` followed by
 * uniform missingness. With `raw_gram` the target is the unnormalized Gram
 * matrix and `sigma_w` must already be scaled by `n`.
 *
 * # Safety
 * `sigma_w` must point to `p·p` readable doubles; otherwise as for
 * [`fp_covariance_uncorrected`].
 */
enum FpStatus fp_covariance_lowrank(const double *data,
                                    size_t n,
                                    size_t p,
                                    double delta,
                                    const double *sigma_w,
                                    bool raw_gram,
                                    struct FpCovariance **out);

/**
 * Wraps a caller-built `p × p` symmetric matrix estimated from `n`
 * observations. `n` only enters the default penalty levels.
 *
 * # Safety
 * `matrix` must point to `p·p` readable doubles and `out` to a writable
 * handle slot.
 */
enum FpStatus fp_covariance_from_matrix(const double *matrix,
                                        size_t p,
                                        size_t n,
                                        struct FpCovariance **out);

/**
 * Dimension `p` of the covariance, or 0 for a null handle.
 *
 * # Safety
 * `cov` must be null or a live handle.
 */
size_t fp_covariance_dim(const struct FpCovariance *cov);

/**
 * Copies the `p × p` matrix into `out` (row-major; it is symmetric).
 *
 * # Safety
 * `cov` must be a live handle and `out` must point to `len` writable doubles.
 */
enum FpStatus fp_covariance_matrix(const struct FpCovariance *cov, double *out, size_t len);

/**
 * # Safety
 * `cov` must be null or a handle not yet freed.
 */
void fp_covariance_free(struct FpCovariance *cov);

/**
 * Fills `out` with the library defaults.
 *
 * # Safety
 * `out` must be null or point to a writable [`FpSettings`].
 */
enum FpStatus fp_settings_default(struct FpSettings *out);

/**
 * Runs relaxation, initialization and (unless skipped) refinement.
 * `settings` may be null for the defaults.
 *
 * # Safety
 * `cov` must be a live handle, `settings` null or readable, and `out` a
 * writable handle slot.
 */
enum FpStatus fp_estimate(const struct FpCovariance *cov,
                          const struct FpSettings *settings,
                          struct FpEstimate **out);

/**
 * Length of the estimated vectors, or 0 for a null handle.
 *
 * # Safety
 * `est` must be null or a live handle.
 */
size_t fp_estimate_dim(const struct FpEstimate *est);

/**
 * Whether a refined estimate is available.
 *
 * # Safety
 * `est` must be null or a live handle.
 */
bool fp_estimate_has_refined(const struct FpEstimate *est);

/**
 * Unit leading eigenvector of the relaxation solution.
 *
 * # Safety
 * `est` must be a live handle and `out` must point to `len` writable doubles.
 */
enum FpStatus fp_estimate_u1(const struct FpEstimate *est, double *out, size_t len);

/**
 * Rescaled initial estimate.
 *
 * # Safety
 * As for [`fp_estimate_u1`].
 */
enum FpStatus fp_estimate_beta_init(const struct FpEstimate *est, double *out, size_t len);

/**
 * Refined estimate; `FP_STATUS_INVALID_ARGUMENT` when refinement was skipped.
 *
 * # Safety
 * As for [`fp_estimate_u1`].
 */
enum FpStatus fp_estimate_beta_refined(const struct FpEstimate *est, double *out, size_t len);

/**
 * Refined estimate when available, else the initial one.
 *
 * # Safety
 * As for [`fp_estimate_u1`].
 */
enum FpStatus fp_estimate_final(const struct FpEstimate *est, double *out, size_t len);

/**
 * # Safety
 * `est` must be a live handle and `out` a writable [`FpDiagnostics`].
 */
enum FpStatus fp_estimate_diagnostics(const struct FpEstimate *est, struct FpDiagnostics *out);

/**
 * # Safety
 * `est` must be null or a handle not yet freed.
 */
void fp_estimate_free(struct FpEstimate *est);

/**
 * Euclidean projection of a symmetric `p × p` matrix onto
 * `{F : 0 ⪯ F ⪯ I, trace F = 1}`. `a` and `out` may not overlap.
 *
 * # Safety
 * `a` must point to `p·p` readable doubles and `out` to `p·p` writable ones.
 */
enum FpStatus fp_project_fantope(const double *a, size_t p, double *out);

/**
 * Sign- and scale-invariant distance between the directions of two
 * length-`p` vectors, in `[0, √2]`.
 *
 * # Safety
 * `beta_hat` and `beta_true` must point to `p` readable doubles and `out`
 * to one writable double.
 */
enum FpStatus fp_estimation_error(const double *beta_hat,
                                  const double *beta_true,
                                  size_t p,
                                  double *out);

/**
 * `scale·sqrt(ln p / (δ² n))`.
 *
 * # Safety
 * `out` must point to one writable double.
 */
enum FpStatus fp_default_mu(size_t p, size_t n, double delta, double scale, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FANTOPE_PCA_H */

//! C ABI over `fantope-pca`.
//!
//! Every fallible function returns an [`FpStatus`]; on failure a message is
//! available from [`fp_last_error_message`] on the same thread. Matrices are
//! passed as row-major `double` buffers. Handles are opaque and must be
//! released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fantope_pca::pipeline::estimate_from_covariance;
use fantope_pca::{
    correct, default_mu, estimation_error, project_fantope, CorrectedCovariance, CorrectionSpec,
    EstimateBundle, EstimateSettings, Error, GramScale, ObservedData, ScenarioTag,
};
use nalgebra::{DMatrix, DVector};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NonFinite = 4,
    /// Eigendecomposition failure, divergence or a zero estimate.
    Numerical = 5,
    /// A Rust panic was caught at the boundary.
    Panic = 6,
}

/// Corrected covariance plus the sample size it came from.
pub struct FpCovariance {
    sigma: CorrectedCovariance,
    n: usize,
}

/// Output of [`fp_estimate`].
pub struct FpEstimate {
    bundle: EstimateBundle,
}

/// Estimation settings. `mu` and `lambda` set to NaN select the data-driven
/// defaults scaled by `mu_scale` and `lambda_scale`. Infinite `q_bound` or
/// `ball_radius` disable those constraints.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct FpSettings {
    pub mu: f64,
    pub mu_scale: f64,
    pub lambda: f64,
    pub lambda_scale: f64,
    pub rho: f64,
    pub admm_max_iter: usize,
    pub tol_abs: f64,
    pub tol_rel: f64,
    pub refine_max_iter: usize,
    pub stat_tol: f64,
    pub q_bound: f64,
    pub ball_radius: f64,
    pub skip_refine: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct FpDiagnostics {
    pub mu: f64,
    /// NaN when refinement was skipped.
    pub lambda: f64,
    pub admm_iterations: usize,
    pub admm_converged: bool,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub relaxation_objective: f64,
    /// Signed `trace(ΣF̂)`.
    pub trace_value: f64,
    pub refine_iterations: usize,
    pub stationarity_gap: f64,
    pub refined_objective: f64,
}

struct Failure {
    status: FpStatus,
    message: String,
}

impl Failure {
    fn new(status: FpStatus, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::InvalidParameter { .. } => FpStatus::InvalidArgument,
            Error::DimensionMismatch { .. } => FpStatus::DimensionMismatch,
            Error::NonFinite(_) => FpStatus::NonFinite,
            Error::Eigendecomposition | Error::Divergence { .. } | Error::ZeroVector => {
                FpStatus::Numerical
            }
        };
        Failure::new(status, e.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> FpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FpStatus::Ok,
        Ok(Err(failure)) => {
            set_last_error(&failure.message);
            failure.status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            set_last_error(&format!("panic: {msg}"));
            FpStatus::Panic
        }
    }
}

unsafe fn input<'a>(ptr: *const f64, len: usize, name: &str) -> Result<&'a [f64], Failure> {
    if ptr.is_null() {
        return Err(Failure::new(FpStatus::NullPointer, format!("`{name}` is null")));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn output<'a>(ptr: *mut f64, len: usize, name: &str) -> Result<&'a mut [f64], Failure> {
    if ptr.is_null() {
        return Err(Failure::new(FpStatus::NullPointer, format!("`{name}` is null")));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, len))
}

unsafe fn handle<'a, T>(ptr: *const T, name: &str) -> Result<&'a T, Failure> {
    ptr.as_ref()
        .ok_or_else(|| Failure::new(FpStatus::NullPointer, format!("`{name}` is null")))
}

fn area(rows: usize, cols: usize) -> Result<usize, Failure> {
    rows.checked_mul(cols)
        .ok_or_else(|| Failure::new(FpStatus::InvalidArgument, "matrix size overflows"))
}

unsafe fn read_square(ptr: *const f64, p: usize, name: &str) -> Result<DMatrix<f64>, Failure> {
    Ok(DMatrix::from_row_slice(p, p, input(ptr, area(p, p)?, name)?))
}

unsafe fn write_vector(v: &DVector<f64>, out: *mut f64, len: usize) -> Result<(), Failure> {
    if len != v.len() {
        return Err(Failure::new(
            FpStatus::DimensionMismatch,
            format!("output buffer holds {len} values, estimate has {}", v.len()),
        ));
    }
    output(out, len, "out")?.copy_from_slice(v.as_slice());
    Ok(())
}

unsafe fn build_covariance(
    data: *const f64,
    n: usize,
    p: usize,
    tag: ScenarioTag,
    spec: impl FnOnce() -> Result<CorrectionSpec, Failure>,
    out: *mut *mut FpCovariance,
) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::new(FpStatus::NullPointer, "`out` is null"));
    }
    *out = ptr::null_mut();
    let values = DMatrix::from_row_slice(n, p, input(data, area(n, p)?, "data")?);
    let observed = ObservedData::new(values, tag)?;
    let sigma = correct(&observed, &spec()?)?;
    *out = Box::into_raw(Box::new(FpCovariance { sigma, n }));
    Ok(())
}

/// Message for the most recent failure on this thread, or an empty string.
/// The pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn fp_last_error_message() -> *const c_char {
    static EMPTY: &[u8] = b"\0";
    LAST_ERROR.with(|slot| match slot.borrow().as_ref() {
        Some(c) => c.as_ptr(),
        None => EMPTY.as_ptr().cast(),
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Plain covariance `YᵀY/n` of an `n × p` row-major matrix.
///
/// # Safety
/// `data` must point to `n·p` readable doubles and `out` to a writable
/// handle slot.
#[no_mangle]
pub unsafe extern "C" fn fp_covariance_uncorrected(
    data: *const f64,
    n: usize,
    p: usize,
    out: *mut *mut FpCovariance,
) -> FpStatus {
    guard(|| build_covariance(data, n, p, ScenarioTag::Full, || Ok(CorrectionSpec::None), out))
}

/// Correction for entries missing independently with probability `1 − delta`.
/// Missing entries must be zero in `data`.
///
/// # Safety
/// As for [`fp_covariance_uncorrected`].
#[no_mangle]
pub unsafe extern "C" fn fp_covariance_uniform_missing(
    data: *const f64,
    n: usize,
    p: usize,
    delta: f64,
    out: *mut *mut FpCovariance,
) -> FpStatus {
    guard(|| {
        build_covariance(
            data,
            n,
            p,
            ScenarioTag::UniformMissing,
            || Ok(CorrectionSpec::UniformMissing { delta }),
            out,
        )
    })
}

/// Correction for multiplicative noise with second-moment matrix `m`
/// (`p × p`, row-major, positive entries).
///
/// # Safety
/// `m` must point to `p·p` readable doubles; otherwise as for
/// [`fp_covariance_uncorrected`].
#[no_mangle]
pub unsafe extern "C" fn fp_covariance_multiplicative(
    data: *const f64,
    n: usize,
    p: usize,
    m: *const f64,
    out: *mut *mut FpCovariance,
) -> FpStatus {
    guard(|| {
        build_covariance(
            data,
            n,
            p,
            ScenarioTag::Multiplicative,
            || Ok(CorrectionSpec::Multiplicative { m: read_square(m, p, "m")? }),
            out,
        )
    })
}

/// Correction for coordinate-wise observation probabilities `delta_vec`
/// (length `p`).
///
/// # Safety
/// `delta_vec` must point to `p` readable doubles; otherwise as for
/// [`fp_covariance_uncorrected`].
#[no_mangle]
pub unsafe extern "C" fn fp_covariance_nonuniform(
    data: *const f64,
    n: usize,
    p: usize,
    delta_vec: *const f64,
    out: *mut *mut FpCovariance,
) -> FpStatus {
    guard(|| {
        build_covariance(
            data,
            n,
            p,
            ScenarioTag::NonuniformMissing,
            || {
                Ok(CorrectionSpec::Nonuniform {
                    delta_vec: input(delta_vec, p, "delta_vec")?.to_vec(),
                })
            },
            out,
        )
    })
}

/// Correction for additive noise with covariance `sigma_w` followed by
/// uniform missingness. With `raw_gram` the target is the unnormalized Gram
/// matrix and `sigma_w` must already be scaled by `n`.
///
/// # Safety
/// `sigma_w` must point to `p·p` readable doubles; otherwise as for
/// [`fp_covariance_uncorrected`].
#[no_mangle]
pub unsafe extern "C" fn fp_covariance_lowrank(
    data: *const f64,
    n: usize,
    p: usize,
    delta: f64,
    sigma_w: *const f64,
    raw_gram: bool,
    out: *mut *mut FpCovariance,
) -> FpStatus {
    guard(|| {
        build_covariance(
            data,
            n,
            p,
            ScenarioTag::LowrankAdditiveMissing,
            || {
                Ok(CorrectionSpec::Lowrank {
                    delta,
                    sigma_w: read_square(sigma_w, p, "sigma_w")?,
                    scale: if raw_gram {
                        GramScale::RawGram
                    } else {
                        GramScale::MeanNormalized
                    },
                })
            },
            out,
        )
    })
}

/// Wraps a caller-built `p × p` symmetric matrix estimated from `n`
/// observations. `n` only enters the default penalty levels.
///
/// # Safety
/// `matrix` must point to `p·p` readable doubles and `out` to a writable
/// handle slot.
#[no_mangle]
pub unsafe extern "C" fn fp_covariance_from_matrix(
    matrix: *const f64,
    p: usize,
    n: usize,
    out: *mut *mut FpCovariance,
) -> FpStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::new(FpStatus::NullPointer, "`out` is null"));
        }
        *out = ptr::null_mut();
        if n == 0 {
            return Err(Failure::new(FpStatus::InvalidArgument, "`n` must be positive"));
        }
        let m = read_square(matrix, p, "matrix")?;
        let sigma = CorrectedCovariance::from_matrix(&m, CorrectionSpec::None)?;
        *out = Box::into_raw(Box::new(FpCovariance { sigma, n }));
        Ok(())
    })
}

/// Dimension `p` of the covariance, or 0 for a null handle.
///
/// # Safety
/// `cov` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fp_covariance_dim(cov: *const FpCovariance) -> usize {
    cov.as_ref().map_or(0, |c| c.sigma.dim())
}

/// Copies the `p × p` matrix into `out` (row-major; it is symmetric).
///
/// # Safety
/// `cov` must be a live handle and `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn fp_covariance_matrix(
    cov: *const FpCovariance,
    out: *mut f64,
    len: usize,
) -> FpStatus {
    guard(|| {
        let cov = handle(cov, "cov")?;
        let p = cov.sigma.dim();
        if len != p * p {
            return Err(Failure::new(
                FpStatus::DimensionMismatch,
                format!("output buffer holds {len} values, need {}", p * p),
            ));
        }
        let buf = output(out, len, "out")?;
        for i in 0..p {
            for j in 0..p {
                buf[i * p + j] = cov.sigma.matrix[(i, j)];
            }
        }
        Ok(())
    })
}

/// # Safety
/// `cov` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fp_covariance_free(cov: *mut FpCovariance) {
    if !cov.is_null() {
        drop(Box::from_raw(cov));
    }
}

/// Fills `out` with the library defaults.
///
/// # Safety
/// `out` must be null or point to a writable [`FpSettings`].
#[no_mangle]
pub unsafe extern "C" fn fp_settings_default(out: *mut FpSettings) -> FpStatus {
    guard(|| {
        let out = out
            .as_mut()
            .ok_or_else(|| Failure::new(FpStatus::NullPointer, "`out` is null"))?;
        let d = EstimateSettings::default();
        *out = FpSettings {
            mu: f64::NAN,
            mu_scale: d.mu_scale,
            lambda: f64::NAN,
            lambda_scale: d.lambda_scale,
            rho: d.fantope.rho,
            admm_max_iter: d.fantope.max_iter,
            tol_abs: d.fantope.tol_abs,
            tol_rel: d.fantope.tol_rel,
            refine_max_iter: d.refine.max_iter,
            stat_tol: d.refine.stat_tol,
            q_bound: d.refine.q_bound,
            ball_radius: d.refine.ball_radius,
            skip_refine: d.skip_refine,
        };
        Ok(())
    })
}

fn to_settings(s: &FpSettings) -> EstimateSettings {
    let mut out = EstimateSettings::default();
    out.mu = (!s.mu.is_nan()).then_some(s.mu);
    out.mu_scale = s.mu_scale;
    out.lambda = (!s.lambda.is_nan()).then_some(s.lambda);
    out.lambda_scale = s.lambda_scale;
    out.fantope.rho = s.rho;
    out.fantope.max_iter = s.admm_max_iter;
    out.fantope.tol_abs = s.tol_abs;
    out.fantope.tol_rel = s.tol_rel;
    out.refine.max_iter = s.refine_max_iter;
    out.refine.stat_tol = s.stat_tol;
    out.refine.q_bound = s.q_bound;
    out.refine.ball_radius = s.ball_radius;
    out.skip_refine = s.skip_refine;
    out
}

/// Runs relaxation, initialization and (unless skipped) refinement.
/// `settings` may be null for the defaults.
///
/// # Safety
/// `cov` must be a live handle, `settings` null or readable, and `out` a
/// writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn fp_estimate(
    cov: *const FpCovariance,
    settings: *const FpSettings,
    out: *mut *mut FpEstimate,
) -> FpStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::new(FpStatus::NullPointer, "`out` is null"));
        }
        *out = ptr::null_mut();
        let cov = handle(cov, "cov")?;
        let settings = match settings.as_ref() {
            Some(s) => to_settings(s),
            None => EstimateSettings::default(),
        };
        if settings.mu_scale < 0.0 || settings.lambda_scale < 0.0 {
            return Err(Failure::new(
                FpStatus::InvalidArgument,
                "`mu_scale` and `lambda_scale` must be nonnegative",
            ));
        }
        let bundle = estimate_from_covariance(cov.sigma.clone(), cov.n, &settings)?;
        *out = Box::into_raw(Box::new(FpEstimate { bundle }));
        Ok(())
    })
}

/// Length of the estimated vectors, or 0 for a null handle.
///
/// # Safety
/// `est` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fp_estimate_dim(est: *const FpEstimate) -> usize {
    est.as_ref().map_or(0, |e| e.bundle.init.u1.len())
}

/// Whether a refined estimate is available.
///
/// # Safety
/// `est` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fp_estimate_has_refined(est: *const FpEstimate) -> bool {
    est.as_ref().is_some_and(|e| e.bundle.refined.is_some())
}

/// Unit leading eigenvector of the relaxation solution.
///
/// # Safety
/// `est` must be a live handle and `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn fp_estimate_u1(est: *const FpEstimate, out: *mut f64, len: usize) -> FpStatus {
    guard(|| write_vector(&handle(est, "est")?.bundle.init.u1, out, len))
}

/// Rescaled initial estimate.
///
/// # Safety
/// As for [`fp_estimate_u1`].
#[no_mangle]
pub unsafe extern "C" fn fp_estimate_beta_init(
    est: *const FpEstimate,
    out: *mut f64,
    len: usize,
) -> FpStatus {
    guard(|| write_vector(&handle(est, "est")?.bundle.init.beta_init, out, len))
}

/// Refined estimate; `FP_STATUS_INVALID_ARGUMENT` when refinement was skipped.
///
/// # Safety
/// As for [`fp_estimate_u1`].
#[no_mangle]
pub unsafe extern "C" fn fp_estimate_beta_refined(
    est: *const FpEstimate,
    out: *mut f64,
    len: usize,
) -> FpStatus {
    guard(|| {
        let refined = handle(est, "est")?.bundle.refined.as_ref().ok_or_else(|| {
            Failure::new(FpStatus::InvalidArgument, "refinement was skipped")
        })?;
        write_vector(&refined.beta, out, len)
    })
}

/// Refined estimate when available, else the initial one.
///
/// # Safety
/// As for [`fp_estimate_u1`].
#[no_mangle]
pub unsafe extern "C" fn fp_estimate_final(
    est: *const FpEstimate,
    out: *mut f64,
    len: usize,
) -> FpStatus {
    guard(|| write_vector(&handle(est, "est")?.bundle.final_estimate(), out, len))
}

/// # Safety
/// `est` must be a live handle and `out` a writable [`FpDiagnostics`].
#[no_mangle]
pub unsafe extern "C" fn fp_estimate_diagnostics(
    est: *const FpEstimate,
    out: *mut FpDiagnostics,
) -> FpStatus {
    guard(|| {
        let b = &handle(est, "est")?.bundle;
        let out = out
            .as_mut()
            .ok_or_else(|| Failure::new(FpStatus::NullPointer, "`out` is null"))?;
        let refined = b.refined.as_ref();
        *out = FpDiagnostics {
            mu: b.mu,
            lambda: b.lambda.unwrap_or(f64::NAN),
            admm_iterations: b.fantope.iterations,
            admm_converged: b.fantope.converged,
            primal_residual: b.fantope.primal_residual,
            dual_residual: b.fantope.dual_residual,
            relaxation_objective: b.fantope.objective,
            trace_value: b.init.trace_value,
            refine_iterations: refined.map_or(0, |r| r.iterations),
            stationarity_gap: refined.map_or(f64::NAN, |r| r.stationarity_gap),
            refined_objective: refined.map_or(f64::NAN, |r| r.objective),
        };
        Ok(())
    })
}

/// # Safety
/// `est` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fp_estimate_free(est: *mut FpEstimate) {
    if !est.is_null() {
        drop(Box::from_raw(est));
    }
}

/// Euclidean projection of a symmetric `p × p` matrix onto
/// `{F : 0 ⪯ F ⪯ I, trace F = 1}`. `a` and `out` may not overlap.
///
/// # Safety
/// `a` must point to `p·p` readable doubles and `out` to `p·p` writable ones.
#[no_mangle]
pub unsafe extern "C" fn fp_project_fantope(a: *const f64, p: usize, out: *mut f64) -> FpStatus {
    guard(|| {
        let m = read_square(a, p, "a")?;
        let projected = project_fantope(&m)?;
        let buf = output(out, area(p, p)?, "out")?;
        for i in 0..p {
            for j in 0..p {
                buf[i * p + j] = projected[(i, j)];
            }
        }
        Ok(())
    })
}

/// Sign- and scale-invariant distance between the directions of two
/// length-`p` vectors, in `[0, √2]`.
///
/// # Safety
/// `beta_hat` and `beta_true` must point to `p` readable doubles and `out`
/// to one writable double.
#[no_mangle]
pub unsafe extern "C" fn fp_estimation_error(
    beta_hat: *const f64,
    beta_true: *const f64,
    p: usize,
    out: *mut f64,
) -> FpStatus {
    guard(|| {
        let a = DVector::from_column_slice(input(beta_hat, p, "beta_hat")?);
        let b = DVector::from_column_slice(input(beta_true, p, "beta_true")?);
        let value = estimation_error(&a, &b)?;
        output(out, 1, "out")?[0] = value;
        Ok(())
    })
}

/// `scale·sqrt(ln p / (δ² n))`.
///
/// # Safety
/// `out` must point to one writable double.
#[no_mangle]
pub unsafe extern "C" fn fp_default_mu(
    p: usize,
    n: usize,
    delta: f64,
    scale: f64,
    out: *mut f64,
) -> FpStatus {
    guard(|| {
        if p < 2 || n == 0 || !(delta > 0.0 && delta <= 1.0) || !(scale >= 0.0) {
            return Err(Failure::new(
                FpStatus::InvalidArgument,
                "need p ≥ 2, n ≥ 1, delta in (0, 1] and scale ≥ 0",
            ));
        }
        output(out, 1, "out")?[0] = default_mu(p, n, delta, scale);
        Ok(())
    })
}

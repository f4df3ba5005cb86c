//! C ABI over `sqrtreg`.
//!
//! Every fallible function returns a [`SqrtregStatus`]. On failure the message
//! is kept per thread and can be read with [`sqrtreg_last_error_message`].
//! Handles are opaque and must be released with the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sqrtreg::model::RegressionProblem;
use sqrtreg::norms::{Norm, NormSpec};
use sqrtreg::solver::{check_kkt, fit_with_norm, FitResult, SolverConfig};
use sqrtreg::theory::theoretical_lambda;
use sqrtreg::Error;

/// Status codes. Zero means success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SqrtregStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Interpolation = 4,
    NotConverged = 5,
    Numerical = 6,
    Io = 7,
    Panic = 8,
}

/// Design matrix and response.
pub struct SqrtregProblem(RegressionProblem);

/// Validated norm bound to a dimension.
pub struct SqrtregNorm(Norm);

/// Result of a fit.
pub struct SqrtregFit(FitResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> SqrtregStatus {
    match err {
        Error::DimensionMismatch { .. } => SqrtregStatus::DimensionMismatch,
        Error::NonFinite(_) | Error::InvalidSpec(_) | Error::DisallowedSet(_) | Error::InvalidConfig(_) => {
            SqrtregStatus::InvalidArgument
        }
        Error::Interpolation { .. } => SqrtregStatus::Interpolation,
        Error::NotConverged { .. } => SqrtregStatus::NotConverged,
        Error::DegenerateDesign { .. } | Error::ParameterRegime(_) | Error::NoValidLambda => SqrtregStatus::Numerical,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => SqrtregStatus::Io,
    }
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

/// Runs `f`, records any failure, and converts it into a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SqrtregStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            SqrtregStatus::Ok
        }
        Ok(Err(Failure::Null(what))) => {
            set_last_error(format!("null pointer passed for {what}"));
            SqrtregStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_last_error("internal panic".into());
            SqrtregStatus::Panic
        }
    }
}

unsafe fn slice<'a>(ptr: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn deref<'a, T>(ptr: *const T, what: &'static str) -> Result<&'a T, Failure> {
    ptr.as_ref().ok_or(Failure::Null(what))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &'static str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null(what));
    }
    out.write(value);
    Ok(())
}

/// Last error message on this thread, or null if the last call succeeded.
/// The pointer stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn sqrtreg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds a problem from a row-major `n x p` design and a length-`n` response.
///
/// # Safety
/// `x` must point to `n * p` doubles, `y` to `n` doubles, `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn sqrtreg_problem_new(
    x: *const f64,
    y: *const f64,
    n: usize,
    p: usize,
    out: *mut *mut SqrtregProblem,
) -> SqrtregStatus {
    guard(|| {
        let len = n.checked_mul(p).ok_or_else(|| Error::InvalidConfig("n * p overflows".into()))?;
        let x = slice(x, len, "x")?;
        let y = slice(y, n, "y")?;
        let x = nalgebra::DMatrix::from_row_slice(n, p, x);
        let prob = RegressionProblem::new(x, nalgebra::DVector::from_column_slice(y))?;
        write_out(out, Box::into_raw(Box::new(SqrtregProblem(prob))), "out")
    })
}

/// # Safety
/// `problem` must come from [`sqrtreg_problem_new`] or be null.
#[no_mangle]
pub unsafe extern "C" fn sqrtreg_problem_free(problem: *mut SqrtregProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Builds a norm on `R^p` from its JSON description, e.g. `{"kind":"l1"}`.
///
/// # Safety
/// `json` must be a NUL-terminated string, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sqrtreg_norm_from_json(json: *const c_char, p: usize, out: *mut *mut SqrtregNorm) -> SqrtregStatus {
    guard(|| {
        if json.is_null() {
            return Err(Failure::Null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|_| Error::InvalidSpec("norm JSON is not UTF-8".into()))?;
        let spec: NormSpec = serde_json::from_str(text).map_err(Error::from)?;
        let norm = spec.build(p)?;
        write_out(out, Box::into_raw(Box::new(SqrtregNorm(norm))), "out")
    })
}

/// # Safety
/// `norm` must come from [`sqrtreg_norm_from_json`] or be null.
#[no_mangle]
pub unsafe extern "C" fn sqrtreg_norm_free(norm: *mut SqrtregNorm) {
    if !norm.is_null() {
        drop(Box::from_raw(norm));
    }
}

/// Norm value of a length-`len` vector.
///
/// # Safety
/// `b` must point to `len` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sqrtreg_norm_value(norm: *const SqrtregNorm, b: *const f64, len: usize, out: *mut f64) -> SqrtregStatus {
    guard(|| {
        let norm = &deref(norm, "norm")?.0;
        let b = checked_vec(norm, b, len)?;
        write_out(out, norm.value(b), "out")
    })
}

/// Dual norm value of a length-`len` vector.
///
/// # Safety
/// As for [`sqrtreg_norm_value`].
#[no_mangle]
pub unsafe extern "C" fn sqrtreg_norm_dual(norm: *const SqrtregNorm, z: *const f64, len: usize, out: *mut f64) -> SqrtregStatus {
    guard(|| {
        let norm = &deref(norm, "norm")?.0;
        let z = checked_vec(norm, z, len)?;
        write_out(out, norm.dual(z), "out")
    })
}

unsafe fn checked_vec<'a>(norm: &Norm, ptr: *const f64, len: usize) -> Result<&'a [f64], Failure> {
    if len != norm.dim() {
        return Err(Error::DimensionMismatch {
            what: "vector length",
            expected: norm.dim(),
            found: len,
        }
        .into());
    }
    let v = slice(ptr, len, "vector")?;
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("vector").into());
    }
    Ok(v)
}

/// Fits the estimator at `lambda` with default solver settings.
/// A fit that fails the KKT check returns `NotConverged` and no handle.
///
/// # Safety
/// Handles must be valid, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sqrtreg_fit(
    problem: *const SqrtregProblem,
    norm: *const SqrtregNorm,
    lambda: f64,
    out: *mut *mut SqrtregFit,
) -> SqrtregStatus {
    guard(|| {
        let problem = &deref(problem, "problem")?.0;
        let norm = &deref(norm, "norm")?.0;
        let fit = fit_with_norm(problem, norm, &SolverConfig::new(lambda))?;
        if !fit.converged {
            return Err(Error::NotConverged {
                kkt_residual: fit.kkt_residual,
            }
            .into());
        }
        write_out(out, Box::into_raw(Box::new(SqrtregFit(fit))), "out")
    })
}

/// # Safety
/// `fit` must come from [`sqrtreg_fit`] or be null.
#[no_mangle]
pub unsafe extern "C" fn sqrtreg_fit_free(fit: *mut SqrtregFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// Number of coefficients in a fit.
///
/// # Safety
/// `fit` must be a valid handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn sqrtreg_fit_len(fit: *const SqrtregFit) -> usize {
    fit.as_ref().map_or(0, |f| f.0.beta_hat.len())
}

/// Copies the coefficients into `buf`, which must hold `len` doubles.
///
/// # Safety
/// `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn sqrtreg_fit_coefficients(fit: *const SqrtregFit, buf: *mut f64, len: usize) -> SqrtregStatus {
    guard(|| {
        let beta = &deref(fit, "fit")?.0.beta_hat;
        if len != beta.len() {
            return Err(Error::DimensionMismatch {
                what: "coefficient buffer",
                expected: beta.len(),
                found: len,
            }
            .into());
        }
        if buf.is_null() {
            return Err(Failure::Null("buf"));
        }
        ptr::copy_nonoverlapping(beta.as_ptr(), buf, len);
        Ok(())
    })
}

/// Residual norm `||Y - X beta_hat||_n`, or NaN for a null handle.
///
/// # Safety
/// `fit` must be a valid handle or null.
#[no_mangle]
pub unsafe extern "C" fn sqrtreg_fit_residual_norm(fit: *const SqrtregFit) -> f64 {
    fit.as_ref().map_or(f64::NAN, |f| f.0.residual_norm_n)
}

/// KKT residual of the fit, or NaN for a null handle.
///
/// # Safety
/// `fit` must be a valid handle or null.
#[no_mangle]
pub unsafe extern "C" fn sqrtreg_fit_kkt_residual(fit: *const SqrtregFit) -> f64 {
    fit.as_ref().map_or(f64::NAN, |f| f.0.kkt_residual)
}

/// KKT residual of an arbitrary coefficient vector.
///
/// # Safety
/// `beta` must point to `len` doubles, handles valid, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sqrtreg_check_kkt(
    problem: *const SqrtregProblem,
    norm: *const SqrtregNorm,
    beta: *const f64,
    len: usize,
    lambda: f64,
    out: *mut f64,
) -> SqrtregStatus {
    guard(|| {
        let problem = &deref(problem, "problem")?.0;
        let norm = &deref(norm, "norm")?.0;
        let beta = checked_vec(norm, beta, len)?;
        let r = check_kkt(problem, norm, &nalgebra::DVector::from_column_slice(beta), lambda)?;
        write_out(out, r, "out")
    })
}

/// Theoretical penalty level for `norm` at sample size `n` and confidence `1 - alpha`.
///
/// # Safety
/// `norm` must be valid and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sqrtreg_theoretical_lambda(
    norm: *const SqrtregNorm,
    n: usize,
    alpha: f64,
    out: *mut f64,
) -> SqrtregStatus {
    guard(|| {
        let norm = &deref(norm, "norm")?.0;
        let t = theoretical_lambda(norm.spec(), n, norm.dim(), alpha, None)?;
        write_out(out, t.lambda, "out")
    })
}

//! C ABI over the `lowmach` sweep driver.
//!
//! Handles are opaque and owned by the caller once returned; free them with
//! the matching `*_free`. Every fallible call returns an [`LmStatus`]; on a
//! non-zero status [`lm_last_error_message`] describes the failure for the
//! calling thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use lowmach::constitutive::{verify_assumptions, PotentialSpec, PressureLaw};
use lowmach::harness::{emit_outputs, fit_convergence_order, load_config, run_sweep, Config, SweepResult};
use lowmach::Error;

/// Status codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidParameter = 3,
    Config = 4,
    Numerical = 5,
    Io = 6,
    InsufficientData = 7,
    OutOfRange = 8,
    Panic = 99,
}

/// Parsed and validated configuration.
pub struct LmConfig {
    inner: Config,
}

/// Completed sweep.
pub struct LmSweep {
    inner: SweepResult,
}

/// One row of a sweep. Numeric fields are NaN when `completed` is 0.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct LmSweepRecord {
    pub epsilon: f64,
    pub completed: c_int,
    pub sup_etilde: f64,
    pub final_l1_rho: f64,
    pub final_l2_v: f64,
    pub final_h1_c: f64,
    pub energy_violation: f64,
    pub steps: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> LmStatus {
    match e {
        Error::InvalidGrid(_) | Error::ShapeMismatch(_) | Error::UnsupportedNorm(_) | Error::InvalidParameter(_) => {
            LmStatus::InvalidParameter
        }
        Error::Parse { .. } | Error::Config(_) => LmStatus::Config,
        Error::Io { .. } => LmStatus::Io,
        Error::InsufficientData(_) => LmStatus::InsufficientData,
        _ => LmStatus::Numerical,
    }
}

/// Runs `f`, recording any error or panic for `lm_last_error_message`.
fn guard(f: impl FnOnce() -> Result<(), (LmStatus, String)>) -> LmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            LmStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            LmStatus::Panic
        }
    }
}

fn lift(e: Error) -> (LmStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (LmStatus, String) {
    (LmStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (LmStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (LmStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next `lm_*` call on the same thread.
#[no_mangle]
pub extern "C" fn lm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a configuration file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lm_config_load(path: *const c_char, out: *mut *mut LmConfig) -> LmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = str_arg(path, "path")?;
        let cfg = load_config(Path::new(path)).map_err(lift)?;
        *out = Box::into_raw(Box::new(LmConfig { inner: cfg }));
        Ok(())
    })
}

/// Parses configuration text.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lm_config_from_str(text: *const c_char, out: *mut *mut LmConfig) -> LmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = str_arg(text, "text")?;
        let cfg = Config::parse(text, "<string>").map_err(lift)?;
        *out = Box::into_raw(Box::new(LmConfig { inner: cfg }));
        Ok(())
    })
}

/// # Safety
/// `cfg` must be null or a handle from `lm_config_*` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lm_config_free(cfg: *mut LmConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Runs the full sweep on `threads` workers (0 = all cores).
///
/// # Safety
/// `cfg` must be a live config handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lm_sweep_run(cfg: *const LmConfig, threads: usize, out: *mut *mut LmSweep) -> LmStatus {
    guard(|| {
        if cfg.is_null() {
            return Err(null("cfg"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = &(*cfg).inner;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| (LmStatus::InvalidParameter, e.to_string()))?;
        let result = pool.install(|| run_sweep(cfg)).map_err(lift)?;
        *out = Box::into_raw(Box::new(LmSweep { inner: result }));
        Ok(())
    })
}

/// # Safety
/// `sweep` must be null or a handle from `lm_sweep_run` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lm_sweep_free(sweep: *mut LmSweep) {
    if !sweep.is_null() {
        drop(Box::from_raw(sweep));
    }
}

/// Number of records (one per epsilon); 0 for a null handle.
///
/// # Safety
/// `sweep` must be null or a live sweep handle.
#[no_mangle]
pub unsafe extern "C" fn lm_sweep_len(sweep: *const LmSweep) -> usize {
    if sweep.is_null() {
        0
    } else {
        (*sweep).inner.records.len()
    }
}

/// # Safety
/// `sweep` must be a live sweep handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lm_sweep_record(sweep: *const LmSweep, index: usize, out: *mut LmSweepRecord) -> LmStatus {
    guard(|| {
        if sweep.is_null() {
            return Err(null("sweep"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let records = &(*sweep).inner.records;
        let rec = records.get(index).ok_or_else(|| {
            (
                LmStatus::OutOfRange,
                format!("record {index} out of range (len {})", records.len()),
            )
        })?;
        let mut row = LmSweepRecord {
            epsilon: rec.eps,
            completed: 0,
            sup_etilde: f64::NAN,
            final_l1_rho: f64::NAN,
            final_l2_v: f64::NAN,
            final_h1_c: f64::NAN,
            energy_violation: f64::NAN,
            steps: 0,
        };
        if let Ok(s) = &rec.outcome {
            row.completed = 1;
            row.sup_etilde = s.sup_etilde;
            row.final_l1_rho = s.final_norms.l1_rho;
            row.final_l2_v = s.final_norms.l2_v;
            row.final_h1_c = s.final_norms.h1_c;
            row.energy_violation = s.energy.violation;
            row.steps = s.steps;
        }
        *out = row;
        Ok(())
    })
}

/// # Safety
/// `sweep` must be a live sweep handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lm_sweep_fitted_order(sweep: *const LmSweep, out: *mut f64) -> LmStatus {
    guard(|| {
        if sweep.is_null() {
            return Err(null("sweep"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        *out = (*sweep).inner.fitted_order;
        Ok(())
    })
}

/// Writes all sweep artifacts into `dir` (created if missing).
///
/// # Safety
/// `sweep` must be a live sweep handle; `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn lm_sweep_write(
    sweep: *const LmSweep,
    dir: *const c_char,
    emit_fields: c_int,
    emit_plots: c_int,
) -> LmStatus {
    guard(|| {
        if sweep.is_null() {
            return Err(null("sweep"));
        }
        let dir = str_arg(dir, "dir")?;
        emit_outputs(&(*sweep).inner, Path::new(dir), emit_fields != 0, emit_plots != 0).map_err(lift)?;
        Ok(())
    })
}

/// Least-squares slope of `log(values)` against `log(eps)`.
///
/// # Safety
/// `eps` and `values` must point to `n` readable doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lm_fit_convergence_order(
    eps: *const f64,
    values: *const f64,
    n: usize,
    out: *mut f64,
) -> LmStatus {
    guard(|| {
        if eps.is_null() || values.is_null() || out.is_null() {
            return Err(null("argument"));
        }
        let e = std::slice::from_raw_parts(eps, n);
        let v = std::slice::from_raw_parts(values, n);
        let pairs: Vec<(f64, f64)> = e.iter().copied().zip(v.iter().copied()).collect();
        *out = fit_convergence_order(&pairs).map_err(lift)?;
        Ok(())
    })
}

/// Samples the structural assumptions for `p = a rho^gamma` and the
/// truncated double well on `rho in [0, 10]`, `c in [-5, 5]`. Writes the
/// number of failed checks to `failures`.
///
/// # Safety
/// `failures` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lm_verify_assumptions(
    gamma: f64,
    a: f64,
    kappa: f64,
    c_t: f64,
    samples: usize,
    failures: *mut usize,
) -> LmStatus {
    guard(|| {
        if failures.is_null() {
            return Err(null("failures"));
        }
        let law = PressureLaw::new(gamma, a).map_err(lift)?;
        let spec = PotentialSpec::new(kappa, c_t).map_err(lift)?;
        let rep = verify_assumptions(&law, &spec, (0.0, 10.0), (-5.0, 5.0), samples).map_err(lift)?;
        *failures = rep.failures().count();
        Ok(())
    })
}

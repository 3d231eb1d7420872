//! C ABI over the `superadam` library.
//!
//! Objects cross the boundary as opaque handles created by `*_new`/`*_run`
//! functions and released with the matching `*_free`. Every call returns an
//! [`SaStatus`]; on failure a message is available from [`sa_last_error`]
//! on the same thread. Panics are caught and reported as
//! [`SaStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::sync::Arc;

use superadam::baselines::{run_baseline, BaselineRunConfig};
use superadam::harness::{records_to_csv, run_experiment, ExperimentConfig, RunOptions};
use superadam::metrics::RunRecord;
use superadam::problems::{make_problem, ProblemSpec};
use superadam::{run, Error, ParamVector, StochasticOracle, SuperAdamConfig, Trajectory};

/// Result code of every C entry point.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SaStatus {
    Ok = 0,
    NullPointer = 1,
    /// Malformed JSON, invalid parameters or inconsistent dimensions.
    InvalidArgument = 2,
    /// The run produced a non-finite value and stopped.
    NumericAbort = 3,
    Io = 4,
    OutOfRange = 5,
    Panic = 6,
}

/// A problem instance built from a JSON problem spec.
pub struct SaProblem {
    oracle: Arc<dyn StochasticOracle>,
}

/// The result of one optimizer run.
pub struct SaRun {
    trajectory: Trajectory,
}

/// One recorded step. Columns that do not apply to the optimizer are NaN.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SaRecord {
    pub t: u64,
    pub f: f64,
    pub grad_norm: f64,
    pub est_err: f64,
    pub step_norm: f64,
    pub mt: f64,
    pub gradmap_norm: f64,
    pub cond_h: f64,
    pub mu: f64,
    pub alpha: f64,
    pub b1_slack: f64,
}

impl From<&RunRecord> for SaRecord {
    fn from(r: &RunRecord) -> Self {
        let nan = |v: Option<f64>| v.unwrap_or(f64::NAN);
        Self {
            t: r.t,
            f: r.f,
            grad_norm: r.grad_norm,
            est_err: r.est_err,
            step_norm: r.step_norm,
            mt: r.mt,
            gradmap_norm: r.gradmap_norm,
            cond_h: nan(r.cond_h),
            mu: nan(r.mu),
            alpha: nan(r.alpha),
            b1_slack: nan(r.b1_slack),
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> SaStatus {
    match e {
        Error::NumericAbort { .. } => SaStatus::NumericAbort,
        Error::Io { .. } => SaStatus::Io,
        _ => SaStatus::InvalidArgument,
    }
}

fn fail(status: SaStatus, msg: impl Into<String>) -> SaStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> SaStatus {
    fail(status_of(&e), e.to_string())
}

/// Runs `f`, converting panics to [`SaStatus::Panic`].
fn guard(f: impl FnOnce() -> SaStatus) -> SaStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(SaStatus::Panic, format!("panic: {msg}"))
        }
    }
}

unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, SaStatus> {
    if s.is_null() {
        return Err(fail(SaStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(SaStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

fn parse_json<T: serde::de::DeserializeOwned>(text: &str, what: &str) -> Result<T, SaStatus> {
    serde_json::from_str(text).map_err(|e| fail(SaStatus::InvalidArgument, format!("{what}: {e}")))
}

macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

macro_rules! handle {
    ($p:expr, $what:literal) => {
        match unsafe { $p.as_ref() } {
            Some(v) => v,
            None => return fail(SaStatus::NullPointer, concat!($what, " is null")),
        }
    };
}

unsafe fn read_vector(x: *const f64, len: usize, dim: usize) -> Result<ParamVector, SaStatus> {
    if x.is_null() {
        return Err(fail(SaStatus::NullPointer, "x is null"));
    }
    if len != dim {
        return Err(fail(
            SaStatus::InvalidArgument,
            format!("dimension mismatch: expected {dim}, got {len}"),
        ));
    }
    ParamVector::new(std::slice::from_raw_parts(x, len).to_vec()).map_err(from_error)
}

unsafe fn write_vector(v: &ParamVector, out: *mut f64, len: usize) -> SaStatus {
    if out.is_null() {
        return fail(SaStatus::NullPointer, "output buffer is null");
    }
    if len < v.dim() {
        return fail(
            SaStatus::OutOfRange,
            format!("output buffer holds {len} values, need {}", v.dim()),
        );
    }
    std::slice::from_raw_parts_mut(out, v.dim()).copy_from_slice(v.as_slice());
    SaStatus::Ok
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn sa_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sa_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a problem from a JSON problem spec.
///
/// # Safety
/// `spec_json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sa_problem_new(spec_json: *const c_char, out: *mut *mut SaProblem) -> SaStatus {
    guard(|| {
        if out.is_null() {
            return fail(SaStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let text = tri!(read_str(spec_json, "spec_json"));
        let spec: ProblemSpec = tri!(parse_json(text, "problem spec"));
        let oracle = tri!(make_problem(&spec).map_err(from_error));
        *out = Box::into_raw(Box::new(SaProblem { oracle }));
        SaStatus::Ok
    })
}

/// # Safety
/// `problem` must come from [`sa_problem_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sa_problem_free(problem: *mut SaProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// # Safety
/// `problem` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sa_problem_dim(problem: *const SaProblem, out: *mut usize) -> SaStatus {
    guard(|| {
        let p = handle!(problem, "problem");
        if out.is_null() {
            return fail(SaStatus::NullPointer, "out is null");
        }
        *out = p.oracle.dim();
        SaStatus::Ok
    })
}

/// Copies the problem's starting point into `out` (capacity `len`).
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn sa_problem_initial_point(problem: *const SaProblem, out: *mut f64, len: usize) -> SaStatus {
    guard(|| {
        let p = handle!(problem, "problem");
        write_vector(&p.oracle.initial_point(), out, len)
    })
}

/// Objective value at `x` (length `len`, equal to the dimension).
///
/// # Safety
/// `x` must point to `len` readable doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn sa_problem_value(
    problem: *const SaProblem,
    x: *const f64,
    len: usize,
    out: *mut f64,
) -> SaStatus {
    guard(|| {
        let p = handle!(problem, "problem");
        let x = tri!(read_vector(x, len, p.oracle.dim()));
        if out.is_null() {
            return fail(SaStatus::NullPointer, "out is null");
        }
        *out = p.oracle.value(&x);
        SaStatus::Ok
    })
}

/// Full gradient at `x`, written to `grad` (both of length `len`).
///
/// # Safety
/// `x` and `grad` must each point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sa_problem_full_grad(
    problem: *const SaProblem,
    x: *const f64,
    len: usize,
    grad: *mut f64,
) -> SaStatus {
    guard(|| {
        let p = handle!(problem, "problem");
        let x = tri!(read_vector(x, len, p.oracle.dim()));
        write_vector(&p.oracle.full_grad(&x), grad, len)
    })
}

/// Runs the adaptive-gradient algorithm with a JSON run config.
///
/// # Safety
/// `problem` must be live, `config_json` NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sa_run_superadam(
    problem: *const SaProblem,
    config_json: *const c_char,
    out: *mut *mut SaRun,
) -> SaStatus {
    guard(|| {
        if out.is_null() {
            return fail(SaStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let p = handle!(problem, "problem");
        let text = tri!(read_str(config_json, "config_json"));
        let cfg: SuperAdamConfig = tri!(parse_json(text, "run config"));
        let trajectory = tri!(run(&*p.oracle, &cfg).map_err(from_error));
        *out = Box::into_raw(Box::new(SaRun { trajectory }));
        SaStatus::Ok
    })
}

/// Runs a reference optimizer with a JSON baseline run config.
///
/// # Safety
/// As for [`sa_run_superadam`].
#[no_mangle]
pub unsafe extern "C" fn sa_run_baseline(
    problem: *const SaProblem,
    config_json: *const c_char,
    out: *mut *mut SaRun,
) -> SaStatus {
    guard(|| {
        if out.is_null() {
            return fail(SaStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let p = handle!(problem, "problem");
        let text = tri!(read_str(config_json, "config_json"));
        let cfg: BaselineRunConfig = tri!(parse_json(text, "baseline config"));
        let trajectory = tri!(run_baseline(&*p.oracle, &cfg).map_err(from_error));
        *out = Box::into_raw(Box::new(SaRun { trajectory }));
        SaStatus::Ok
    })
}

/// # Safety
/// `run` must come from a `sa_run_*` call and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sa_run_free(run: *mut SaRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// # Safety
/// `run` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sa_run_record_count(run: *const SaRun, out: *mut usize) -> SaStatus {
    guard(|| {
        let r = handle!(run, "run");
        if out.is_null() {
            return fail(SaStatus::NullPointer, "out is null");
        }
        *out = r.trajectory.records.len();
        SaStatus::Ok
    })
}

/// # Safety
/// `run` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sa_run_record(run: *const SaRun, index: usize, out: *mut SaRecord) -> SaStatus {
    guard(|| {
        let r = handle!(run, "run");
        if out.is_null() {
            return fail(SaStatus::NullPointer, "out is null");
        }
        match r.trajectory.records.get(index) {
            Some(rec) => {
                *out = SaRecord::from(rec);
                SaStatus::Ok
            }
            None => fail(
                SaStatus::OutOfRange,
                format!("record {index} of {}", r.trajectory.records.len()),
            ),
        }
    })
}

/// The returned point (`x_ζ` or `x_T`), written to `out` (capacity `len`).
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn sa_run_output(run: *const SaRun, out: *mut f64, len: usize) -> SaStatus {
    guard(|| {
        let r = handle!(run, "run");
        write_vector(&r.trajectory.output, out, len)
    })
}

/// Stochastic-gradient calls made by the estimator and by the matrix generator.
///
/// # Safety
/// `run` must be live; both outputs writable.
#[no_mangle]
pub unsafe extern "C" fn sa_run_calls(run: *const SaRun, estimator: *mut u64, matrix: *mut u64) -> SaStatus {
    guard(|| {
        let r = handle!(run, "run");
        if estimator.is_null() || matrix.is_null() {
            return fail(SaStatus::NullPointer, "output is null");
        }
        *estimator = r.trajectory.calls.estimator;
        *matrix = r.trajectory.calls.matrix;
        SaStatus::Ok
    })
}

/// Average of `M_t` over every measured step.
///
/// # Safety
/// `run` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sa_run_average_mt(run: *const SaRun, out: *mut f64) -> SaStatus {
    guard(|| {
        let r = handle!(run, "run");
        if out.is_null() {
            return fail(SaStatus::NullPointer, "out is null");
        }
        match r.trajectory.averages {
            Some(a) => {
                *out = a.avg_mt;
                SaStatus::Ok
            }
            None => fail(SaStatus::OutOfRange, "no measured steps"),
        }
    })
}

/// Writes the recorded steps as CSV.
///
/// # Safety
/// `run` must be live and `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn sa_run_write_csv(run: *const SaRun, path: *const c_char) -> SaStatus {
    guard(|| {
        let r = handle!(run, "run");
        let path = PathBuf::from(tri!(read_str(path, "path")));
        match std::fs::write(&path, records_to_csv(&r.trajectory.records)) {
            Ok(()) => SaStatus::Ok,
            Err(e) => fail(SaStatus::Io, format!("{}: {e}", path.display())),
        }
    })
}

/// Runs a full experiment config. `out_dir` may be null and `workers` zero
/// to use the environment or config values. A run in which any cell stopped
/// on a non-finite value returns [`SaStatus::NumericAbort`] after writing
/// all outputs.
///
/// # Safety
/// `config_json` must be NUL-terminated; `out_dir` null or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn sa_experiment_run(
    config_json: *const c_char,
    out_dir: *const c_char,
    workers: usize,
) -> SaStatus {
    guard(|| {
        let text = tri!(read_str(config_json, "config_json"));
        let cfg = tri!(ExperimentConfig::from_json(text).map_err(from_error));
        let out_dir = if out_dir.is_null() {
            None
        } else {
            Some(PathBuf::from(tri!(read_str(out_dir, "out_dir"))))
        };
        let opts = RunOptions {
            out_dir,
            workers: (workers > 0).then_some(workers),
        };
        let opts = tri!(opts.with_env().map_err(from_error));
        let outcome = tri!(run_experiment(&cfg, &opts).map_err(from_error));
        let aborted = outcome.summary.aborted_cells();
        if aborted > 0 {
            return fail(SaStatus::NumericAbort, format!("{aborted} cell(s) stopped on a non-finite value"));
        }
        SaStatus::Ok
    })
}

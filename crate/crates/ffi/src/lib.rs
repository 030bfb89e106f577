//! C ABI over `rhc`.
//!
//! Problems and solutions are opaque handles created and destroyed through
//! this API. Every call returns an [`RhcStatus`]; on failure the message is
//! available from [`rhc_last_error_message`] on the same thread until the
//! next failing call. Panics are caught at the boundary and reported as
//! `RHC_STATUS_INTERNAL`.
//!
//! Matrices cross the boundary as row-major arrays of interleaved
//! `(re, im)` doubles.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rhc::problem::{self, Mode, ProblemFile, Report, RunOptions, SolvedProblem};
use rhc::{Error, C64};

/// Result of every call; values 1-3 match the `rhc` exit codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RhcStatus {
    Ok = 0,
    InputError = 1,
    HypothesisFailed = 2,
    NearSingular = 3,
    /// Null pointer, bad UTF-8 or a too small output buffer.
    InvalidArgument = 4,
    /// A panic inside the library.
    Internal = 5,
}

/// Parsed problem file together with the mode to run it in.
pub struct RhcProblem {
    file: ProblemFile,
    mode: Mode,
}

/// Solution of a `solve` or `idnls` problem.
pub struct RhcSolution {
    inner: SolvedProblem,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> RhcStatus {
    match problem::exit_code(e) {
        2 => RhcStatus::HypothesisFailed,
        3 => RhcStatus::NearSingular,
        _ => RhcStatus::InputError,
    }
}

fn fail(e: Error) -> RhcStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

fn invalid(message: &str) -> RhcStatus {
    set_error(message.to_string());
    RhcStatus::InvalidArgument
}

/// Runs `f`, turning a panic into `RHC_STATUS_INTERNAL`.
fn guard(f: impl FnOnce() -> RhcStatus) -> RhcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {msg}"));
            RhcStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, RhcStatus> {
    if p.is_null() {
        return Err(invalid(&format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(&format!("{what} is not valid UTF-8")))
}

/// Message of the last failing call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rhc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses a JSON problem file for `mode` (`"solve"`, `"index"`, `"idnls"`,
/// ...). On success `*out` owns a handle for [`rhc_problem_free`].
///
/// # Safety
/// `json` and `mode` must be null or NUL-terminated strings; `out` must be
/// null or writable.
#[no_mangle]
pub unsafe extern "C" fn rhc_problem_from_json(
    json: *const c_char,
    mode: *const c_char,
    out: *mut *mut RhcProblem,
) -> RhcStatus {
    guard(|| {
        if out.is_null() {
            return invalid("out is null");
        }
        *out = ptr::null_mut();
        let (json, mode) = match (str_arg(json, "json"), str_arg(mode, "mode")) {
            (Ok(j), Ok(m)) => (j, m),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        let mode: Mode = match mode.parse() {
            Ok(m) => m,
            Err(e) => return fail(e),
        };
        match ProblemFile::from_json(json) {
            Ok(file) => {
                if let Some(m) = file.mode.filter(|&m| m != mode) {
                    return fail(Error::Input(format!(
                        "problem file is for mode '{}', not '{}'",
                        m.name(),
                        mode.name()
                    )));
                }
                *out = Box::into_raw(Box::new(RhcProblem { file, mode }));
                RhcStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `p` must be null or a handle from [`rhc_problem_from_json`] not freed yet.
#[no_mangle]
pub unsafe extern "C" fn rhc_problem_free(p: *mut RhcProblem) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Solves a `solve` or `idnls` problem. On success `*out` owns a handle for
/// [`rhc_solution_free`].
///
/// # Safety
/// `p` must be a live problem handle; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn rhc_solve(p: *const RhcProblem, out: *mut *mut RhcSolution) -> RhcStatus {
    guard(|| {
        if out.is_null() {
            return invalid("out is null");
        }
        *out = ptr::null_mut();
        let Some(p) = p.as_ref() else {
            return invalid("problem is null");
        };
        match problem::solve(&p.file, p.mode, &RunOptions::default()) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(RhcSolution { inner }));
                RhcStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `s` must be null or a handle from [`rhc_solve`] not freed yet.
#[no_mangle]
pub unsafe extern "C" fn rhc_solution_free(s: *mut RhcSolution) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Matrix size `n` of the solution (values are `n x n`); 0 for null.
///
/// # Safety
/// `s` must be null or a live solution handle.
#[no_mangle]
pub unsafe extern "C" fn rhc_solution_dim(s: *const RhcSolution) -> usize {
    s.as_ref().map_or(0, |s| s.inner.dim())
}

/// Jump residual at the midpoints between nodes; NaN for null.
///
/// # Safety
/// `s` must be null or a live solution handle.
#[no_mangle]
pub unsafe extern "C" fn rhc_solution_residual_jump(s: *const RhcSolution) -> f64 {
    s.as_ref().map_or(f64::NAN, |s| s.inner.residual_jump())
}

/// Smallest singular value of the discretized operator; NaN for null.
///
/// # Safety
/// `s` must be null or a live solution handle.
#[no_mangle]
pub unsafe extern "C" fn rhc_solution_sigma_min(s: *const RhcSolution) -> f64 {
    s.as_ref()
        .map_or(f64::NAN, |s| s.inner.smallest_singular_value())
}

/// Writes `m(re + i im)` to `out` (`2 n^2` doubles, row-major, interleaved).
/// Points too close to the contour are an input error.
///
/// # Safety
/// `s` must be a live solution handle and `out` must point to `len`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rhc_solution_eval(
    s: *const RhcSolution,
    re: f64,
    im: f64,
    out: *mut f64,
    len: usize,
) -> RhcStatus {
    guard(|| {
        let Some(s) = s.as_ref() else {
            return invalid("solution is null");
        };
        let n = s.inner.dim();
        if out.is_null() || len < 2 * n * n {
            return invalid(&format!("output buffer needs {} doubles", 2 * n * n));
        }
        match s.inner.evaluate(C64::new(re, im)) {
            Ok(m) => {
                let buf = std::slice::from_raw_parts_mut(out, 2 * n * n);
                for i in 0..n {
                    for j in 0..n {
                        buf[2 * (i * n + j)] = m[(i, j)].re;
                        buf[2 * (i * n + j) + 1] = m[(i, j)].im;
                    }
                }
                RhcStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Runs any mode on a JSON problem and returns the JSON report in `*report`
/// (free with [`rhc_string_free`]). A report is produced for failed runs as
/// well; the status says how the run ended.
///
/// # Safety
/// `json` and `mode` must be null or NUL-terminated strings; `report` must
/// be null or writable.
#[no_mangle]
pub unsafe extern "C" fn rhc_run_json(
    json: *const c_char,
    mode: *const c_char,
    report: *mut *mut c_char,
) -> RhcStatus {
    guard(|| {
        if report.is_null() {
            return invalid("report is null");
        }
        *report = ptr::null_mut();
        let (json, mode) = match (str_arg(json, "json"), str_arg(mode, "mode")) {
            (Ok(j), Ok(m)) => (j, m),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        let mode: Mode = match mode.parse() {
            Ok(m) => m,
            Err(e) => return fail(e),
        };
        let run = ProblemFile::from_json(json)
            .and_then(|p| problem::run(&p, mode, &RunOptions::default()));
        let (r, status) = match run {
            Ok(out) => {
                let status = match out.report.exit_code() {
                    0 => RhcStatus::Ok,
                    _ => {
                        set_error("hypothesis check failed".into());
                        RhcStatus::HypothesisFailed
                    }
                };
                (out.report, status)
            }
            Err(e) => (Report::failure(mode, &e), fail(e)),
        };
        let Ok(text) = r.to_json() else {
            return invalid("report could not be serialized");
        };
        *report = CString::new(text).map_or(ptr::null_mut(), CString::into_raw);
        status
    })
}

/// # Safety
/// `s` must be null or a string returned by this library not freed yet.
#[no_mangle]
pub unsafe extern "C" fn rhc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

//! C interface to groundinst.
//!
//! Every function returns a [`GiStatus`]. On failure, [`gi_last_error`] gives a
//! message for the calling thread. Strings handed out must be released with
//! [`gi_string_free`], problems with [`gi_problem_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use groundinst::engine::RandomPolicy;
use groundinst::pipeline::{attempt_seed, run_attempt, AttemptConfig};
use groundinst::solver::{decide_ground, Budget, GroundVerdict};
use groundinst::store::PolicyTag;
use groundinst::tptp::{parse_cnf, serialize_cnf, Problem};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GiStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    NotGround = 4,
    Io = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GiVerdict {
    Unsat = 0,
    Sat = 1,
    Timeout = 2,
}

/// Opaque parsed problem.
pub struct GiProblem {
    problem: Problem,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn guard(f: impl FnOnce() -> Result<(), (GiStatus, String)>) -> GiStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GiStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            GiStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, (GiStatus, String)> {
    if s.is_null() {
        return Err((GiStatus::NullArgument, "null string argument".into()));
    }
    CStr::from_ptr(s).to_str().map_err(|e| (GiStatus::InvalidUtf8, e.to_string()))
}

unsafe fn problem_ref<'a>(p: *const GiProblem) -> Result<&'a Problem, (GiStatus, String)> {
    p.as_ref().map(|p| &p.problem).ok_or((GiStatus::NullArgument, "null problem".into()))
}

fn null_out() -> (GiStatus, String) {
    (GiStatus::NullArgument, "null output pointer".into())
}

fn give_string(s: String, out: *mut *mut c_char) {
    let c = CString::new(s.replace('\0', " ")).unwrap();
    unsafe { *out = c.into_raw() };
}

/// Parses CNF text. `name` may be null.
///
/// # Safety
/// `text` and `name` must be null or NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gi_problem_parse(text: *const c_char, name: *const c_char, out: *mut *mut GiProblem) -> GiStatus {
    guard(|| {
        if out.is_null() {
            return Err(null_out());
        }
        *out = ptr::null_mut();
        let text = read_str(text)?;
        let mut problem = parse_cnf(text).map_err(|e| (GiStatus::Parse, e.to_string()))?;
        if !name.is_null() {
            let name = read_str(name)?;
            problem.name = name.to_string();
            problem.family = groundinst::tptp::family_of(name).to_string();
        }
        *out = Box::into_raw(Box::new(GiProblem { problem }));
        Ok(())
    })
}

/// Loads a `.p` file; the problem is named after the file stem.
///
/// # Safety
/// `path` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gi_problem_load(path: *const c_char, out: *mut *mut GiProblem) -> GiStatus {
    guard(|| {
        if out.is_null() {
            return Err(null_out());
        }
        *out = ptr::null_mut();
        let path = read_str(path)?;
        let problem = Problem::from_file(Path::new(path)).map_err(|e| match e {
            groundinst::tptp::ParseError::Io { .. } => (GiStatus::Io, e.to_string()),
            _ => (GiStatus::Parse, e.to_string()),
        })?;
        *out = Box::into_raw(Box::new(GiProblem { problem }));
        Ok(())
    })
}

/// # Safety
/// `problem` must come from this library and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn gi_problem_free(problem: *mut GiProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// # Safety
/// `problem` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gi_problem_clause_count(problem: *const GiProblem, out: *mut usize) -> GiStatus {
    guard(|| {
        let p = problem_ref(problem)?;
        let out = out.as_mut().ok_or_else(null_out)?;
        *out = p.clauses.len();
        Ok(())
    })
}

/// CNF text of the problem, to be freed with [`gi_string_free`].
///
/// # Safety
/// `problem` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gi_problem_serialize(problem: *const GiProblem, out: *mut *mut c_char) -> GiStatus {
    guard(|| {
        let p = problem_ref(problem)?;
        if out.is_null() {
            return Err(null_out());
        }
        give_string(serialize_cnf(p), out);
        Ok(())
    })
}

/// One random-policy attempt (25, 5 samples) with the sweep's seed schedule;
/// writes the solution record as JSON.
///
/// # Safety
/// `problem` must be a live handle; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gi_solve(
    problem: *const GiProblem,
    base_seed: u64,
    run: u64,
    budget_secs: f64,
    out_json: *mut *mut c_char,
) -> GiStatus {
    guard(|| {
        let p = problem_ref(problem)?;
        if out_json.is_null() {
            return Err(null_out());
        }
        let seed = attempt_seed(base_seed, run, &p.name);
        let config = AttemptConfig { budget_secs, ..AttemptConfig::default() };
        let mut policy = RandomPolicy::new(seed);
        let record = run_attempt(p, &mut policy, PolicyTag::Random, seed, run, &config);
        give_string(serde_json::to_string(&record).unwrap(), out_json);
        Ok(())
    })
}

/// Decides a problem whose clauses are all ground.
///
/// # Safety
/// `problem` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gi_decide_ground(problem: *const GiProblem, budget_secs: f64, out: *mut GiVerdict) -> GiStatus {
    guard(|| {
        let p = problem_ref(problem)?;
        let out = out.as_mut().ok_or_else(null_out)?;
        let budget = if budget_secs > 0.0 { Budget::seconds(budget_secs) } else { Budget::unlimited() };
        let outcome = decide_ground(&p.clauses, budget).map_err(|e| (GiStatus::NotGround, e.to_string()))?;
        *out = match outcome.verdict {
            GroundVerdict::Unsat { .. } => GiVerdict::Unsat,
            GroundVerdict::Sat { .. } => GiVerdict::Sat,
            GroundVerdict::Timeout => GiVerdict::Timeout,
        };
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn gi_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn gi_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

#[no_mangle]
pub extern "C" fn gi_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

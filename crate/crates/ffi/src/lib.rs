//! C interface to `ebc-core`.
//!
//! Every fallible function returns an `int32_t` status (`EBC_OK` on success)
//! and writes results through out-pointers. On failure the message is kept
//! per thread and can be read with [`ebc_last_error_message`]. Handles are
//! opaque and must be released with the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use ebc_core::experiments::min_density;
use ebc_core::region::{region_polygon, sym_rate_direct, Mu, RegionPolygon};
use ebc_core::sim::{alpha_triple_from_solution, policy_from_solution, run};
use ebc_core::solver::{solve, SolveOptions};
use ebc_core::state::{load_joint, toy_model_joint, Geometry, JointStateTable};
use ebc_core::Error;

pub const EBC_OK: i32 = 0;
pub const EBC_ERR_NULL_POINTER: i32 = 1;
pub const EBC_ERR_INVALID_ARGUMENT: i32 = 2;
pub const EBC_ERR_INVALID_GEOMETRY: i32 = 3;
pub const EBC_ERR_VALIDATION: i32 = 4;
pub const EBC_ERR_PARSE: i32 = 5;
pub const EBC_ERR_IO: i32 = 6;
pub const EBC_ERR_SIZE_LIMIT: i32 = 7;
pub const EBC_ERR_DEGENERATE: i32 = 8;
pub const EBC_ERR_UNREACHABLE: i32 = 9;
pub const EBC_ERR_NO_CONVERGENCE: i32 = 10;
pub const EBC_ERR_SOLVER: i32 = 11;
pub const EBC_ERR_PANIC: i32 = 12;

/// Joint law of states and estimates.
pub struct EbcJoint {
    inner: JointStateTable,
}

/// Two-receiver rate region.
pub struct EbcRegion {
    inner: RegionPolygon,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn code_of(e: &Error) -> i32 {
    match e {
        Error::InvalidGeometry(_) => EBC_ERR_INVALID_GEOMETRY,
        Error::Validation(_) => EBC_ERR_VALIDATION,
        Error::Parse { .. } | Error::Json(_) => EBC_ERR_PARSE,
        Error::Io { .. } => EBC_ERR_IO,
        Error::SizeLimit { .. } | Error::NotTwoReceivers(_) => EBC_ERR_SIZE_LIMIT,
        Error::DegenerateJoint => EBC_ERR_DEGENERATE,
        Error::UnreachableTarget { .. } | Error::NonMonotone(_) => EBC_ERR_UNREACHABLE,
        Error::Lp(_) => EBC_ERR_SOLVER,
        _ => EBC_ERR_INVALID_ARGUMENT,
    }
}

/// Runs `f`, mapping errors and panics to status codes.
fn guard(f: impl FnOnce() -> Result<(), (i32, String)>) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            EBC_OK
        }
        Ok(Err((code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic".into());
            EBC_ERR_PANIC
        }
    }
}

fn fail(e: Error) -> (i32, String) {
    (code_of(&e), e.to_string())
}

fn null() -> (i32, String) {
    (EBC_ERR_NULL_POINTER, "null pointer argument".into())
}

/// # Safety
/// `p` must be null or point to a live value of `T`.
unsafe fn as_ref<'a, T>(p: *const T) -> Result<&'a T, (i32, String)> {
    p.as_ref().ok_or_else(null)
}

/// Builds the toy-model joint for `k` vehicles.
///
/// # Safety
/// `velocities` must point to `k` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ebc_joint_from_geometry(
    lambda: f64,
    rb: f64,
    ts: f64,
    velocities: *const f64,
    k: usize,
    out: *mut *mut EbcJoint,
) -> i32 {
    guard(|| {
        if velocities.is_null() || out.is_null() {
            return Err(null());
        }
        let v = std::slice::from_raw_parts(velocities, k);
        let geom = Geometry::new(lambda, rb, ts).map_err(fail)?;
        let inner = toy_model_joint(&geom, v).map_err(fail)?;
        *out = Box::into_raw(Box::new(EbcJoint { inner }));
        Ok(())
    })
}

/// Loads a joint from an `s,shat,p` CSV file.
///
/// # Safety
/// `path` must be a NUL-terminated UTF-8 string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ebc_joint_from_csv(
    path: *const c_char,
    allow_marginal_mismatch: bool,
    out: *mut *mut EbcJoint,
) -> i32 {
    guard(|| {
        if path.is_null() || out.is_null() {
            return Err(null());
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| (EBC_ERR_INVALID_ARGUMENT, "path is not UTF-8".to_string()))?;
        let (inner, _warnings) = load_joint(PathBuf::from(path), allow_marginal_mismatch).map_err(fail)?;
        *out = Box::into_raw(Box::new(EbcJoint { inner }));
        Ok(())
    })
}

/// # Safety
/// `joint` must be null or come from an `ebc_joint_from_*` call, and must
/// not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ebc_joint_free(joint: *mut EbcJoint) {
    if !joint.is_null() {
        drop(Box::from_raw(joint));
    }
}

/// # Safety
/// `joint` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ebc_joint_num_receivers(joint: *const EbcJoint, out: *mut usize) -> i32 {
    guard(|| {
        let j = as_ref(joint)?;
        if out.is_null() {
            return Err(null());
        }
        *out = j.inner.num_receivers();
        Ok(())
    })
}

/// `P(S = s, Ŝ = shat)`, receiver 1 in the most significant bit.
///
/// # Safety
/// `joint` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ebc_joint_probability(joint: *const EbcJoint, s: usize, shat: usize, out: *mut f64) -> i32 {
    guard(|| {
        let j = as_ref(joint)?;
        if out.is_null() {
            return Err(null());
        }
        let n = j.inner.num_states();
        if s >= n || shat >= n {
            return Err((EBC_ERR_INVALID_ARGUMENT, format!("state index out of range 0..{n}")));
        }
        *out = j.inner.p(s, shat);
        Ok(())
    })
}

/// Symmetric rate of a two-receiver joint and its binding weight
/// (`INFINITY` when a single-user limit binds). `mu` may be null.
///
/// # Safety
/// `joint` must be a live handle; `rate` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ebc_sym_rate(joint: *const EbcJoint, rate: *mut f64, mu: *mut f64) -> i32 {
    guard(|| {
        let j = as_ref(joint)?;
        if rate.is_null() {
            return Err(null());
        }
        let (r, cert) = sym_rate_direct(&j.inner).map_err(fail)?;
        *rate = r;
        if !mu.is_null() {
            *mu = match cert.mu {
                Mu::Finite(m) => m,
                Mu::Infinite => f64::INFINITY,
            };
        }
        Ok(())
    })
}

/// # Safety
/// `joint` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ebc_region_new(joint: *const EbcJoint, out: *mut *mut EbcRegion) -> i32 {
    guard(|| {
        let j = as_ref(joint)?;
        if out.is_null() {
            return Err(null());
        }
        let inner = region_polygon(&j.inner).map_err(fail)?;
        *out = Box::into_raw(Box::new(EbcRegion { inner }));
        Ok(())
    })
}

/// # Safety
/// `region` must be null or come from [`ebc_region_new`], and must not be
/// used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ebc_region_free(region: *mut EbcRegion) {
    if !region.is_null() {
        drop(Box::from_raw(region));
    }
}

/// # Safety
/// `region` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ebc_region_num_vertices(region: *const EbcRegion, out: *mut usize) -> i32 {
    guard(|| {
        let r = as_ref(region)?;
        if out.is_null() {
            return Err(null());
        }
        *out = r.inner.vertices.len();
        Ok(())
    })
}

/// Vertex `i` in counter-clockwise order from the largest `R1` on the axis.
///
/// # Safety
/// `region` must be a live handle; `r1` and `r2` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ebc_region_vertex(region: *const EbcRegion, i: usize, r1: *mut f64, r2: *mut f64) -> i32 {
    guard(|| {
        let r = as_ref(region)?;
        if r1.is_null() || r2.is_null() {
            return Err(null());
        }
        let &(a, b) = r
            .inner
            .vertices
            .get(i)
            .ok_or_else(|| (EBC_ERR_INVALID_ARGUMENT, format!("vertex {i} out of range")))?;
        *r1 = a;
        *r2 = b;
        Ok(())
    })
}

/// # Safety
/// `region` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ebc_region_contains(
    region: *const EbcRegion,
    r1: f64,
    r2: f64,
    tol: f64,
    out: *mut bool,
) -> i32 {
    guard(|| {
        let r = as_ref(region)?;
        if out.is_null() {
            return Err(null());
        }
        *out = r.inner.contains((r1, r2), tol);
        Ok(())
    })
}

/// Smallest density reaching `target` at a common `velocity`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ebc_min_density(
    target: f64,
    velocity: f64,
    rb: f64,
    ts: f64,
    lambda_hi: f64,
    tol: f64,
    out: *mut f64,
) -> i32 {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let template = Geometry::new(1.0, rb, ts).map_err(fail)?;
        *out = min_density(target, velocity, &template, lambda_hi, tol).map_err(fail)?;
        Ok(())
    })
}

/// Symmetric scheduling optimum. Writes `K` rates into `rates` (capacity
/// `rates_len`). Returns `EBC_ERR_NO_CONVERGENCE` with results still written
/// when the iteration limit was hit.
///
/// # Safety
/// `joint` must be a live handle; `rates` must hold `rates_len` doubles;
/// `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ebc_solve_symmetric(
    joint: *const EbcJoint,
    starts: usize,
    rates: *mut f64,
    rates_len: usize,
    value: *mut f64,
) -> i32 {
    guard(|| {
        let j = as_ref(joint)?;
        if rates.is_null() || value.is_null() {
            return Err(null());
        }
        let k = j.inner.num_receivers();
        if rates_len < k {
            return Err((
                EBC_ERR_INVALID_ARGUMENT,
                format!("rates buffer holds {rates_len}, need {k}"),
            ));
        }
        let opts = SolveOptions {
            starts: starts.max(1),
            ..Default::default()
        };
        let sol = solve(&j.inner, &opts).map_err(fail)?;
        std::slice::from_raw_parts_mut(rates, k).copy_from_slice(&sol.rates);
        *value = sol.value;
        if !sol.converged {
            return Err((
                EBC_ERR_NO_CONVERGENCE,
                "alternating optimisation did not converge".into(),
            ));
        }
        Ok(())
    })
}

/// Simulates the optimal two-receiver policy with fresh transmissions
/// scaled by `1 - backoff`, `backoff` in `[0, 1)`.
///
/// # Safety
/// `joint` must be a live handle; `rate1` and `rate2` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ebc_simulate(
    joint: *const EbcJoint,
    backoff: f64,
    slots: u64,
    seed: u64,
    rate1: *mut f64,
    rate2: *mut f64,
) -> i32 {
    guard(|| {
        let j = as_ref(joint)?;
        if rate1.is_null() || rate2.is_null() {
            return Err(null());
        }
        let sol = solve(&j.inner, &SolveOptions::default()).map_err(fail)?;
        let alpha = alpha_triple_from_solution(&sol).map_err(fail)?;
        let policy = policy_from_solution(&alpha, backoff).map_err(fail)?;
        let report = run(&j.inner, &policy, slots, seed).map_err(fail)?;
        *rate1 = report.rates[0];
        *rate2 = report.rates[1];
        Ok(())
    })
}

/// Copies the calling thread's last error message into `buf` (truncated,
/// always NUL-terminated when `len > 0`). Returns the full message length
/// plus one, so callers can size a buffer with a first call of `len = 0`.
///
/// # Safety
/// `buf` must be null or hold `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn ebc_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len() + 1
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ebc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

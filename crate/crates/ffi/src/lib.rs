//! C ABI over the `meeql` core.
//!
//! Models live behind an opaque `MeeqlModel` pointer created by one of the
//! `meeql_model_*` constructors and released with [`meeql_model_free`].
//! Every function returns a [`MeeqlStatus`]; on failure the message can be
//! fetched with [`meeql_last_error_message`] on the same thread. Panics are
//! caught at the boundary and reported as `MEEQL_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use meeql::abm::{simulate_replicate, AbmParams};
use meeql::inference::infer_rp;
use meeql::me_eql::{predict, ModelKind, ParameterizedModel};
use meeql::ode::IntegrateOptions;
use meeql::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeeqlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BufferTooSmall = 3,
    Divergence = 4,
    Parse = 5,
    Io = 6,
    Computation = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeeqlModelKind {
    Oat = 0,
    Es = 1,
    Meanfield = 2,
}

impl From<ModelKind> for MeeqlModelKind {
    fn from(k: ModelKind) -> Self {
        match k {
            ModelKind::Oat => MeeqlModelKind::Oat,
            ModelKind::Es => MeeqlModelKind::Es,
            ModelKind::Meanfield => MeeqlModelKind::Meanfield,
        }
    }
}

/// Lattice simulation settings. Fill with [`meeql_abm_params_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MeeqlAbmParams {
    pub rp: f64,
    pub rm: f64,
    pub lattice_side: usize,
    pub ic_fraction: f64,
    pub t_end: f64,
    pub n_points: usize,
    pub seed: u64,
}

/// Opaque parameterized model.
pub struct MeeqlModel {
    inner: ParameterizedModel,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(err: &Error) -> MeeqlStatus {
    match err {
        Error::InvalidParameter(_)
        | Error::NonUniformGrid { .. }
        | Error::TooFewSamples { .. }
        | Error::NonFinite(_)
        | Error::Precondition(_)
        | Error::Config(_) => MeeqlStatus::InvalidArgument,
        Error::Divergence { .. } | Error::ModelInvalidOverBounds { .. } => MeeqlStatus::Divergence,
        Error::Parse { .. } => MeeqlStatus::Parse,
        Error::Io { .. } => MeeqlStatus::Io,
        _ => MeeqlStatus::Computation,
    }
}

fn fail(err: Error) -> MeeqlStatus {
    let status = status_of(&err);
    set_error(err.to_string());
    status
}

fn guard(body: impl FnOnce() -> MeeqlStatus) -> MeeqlStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => {
            if status == MeeqlStatus::Ok {
                set_error("");
            }
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            MeeqlStatus::Panic
        }
    }
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            set_error(concat!("`", stringify!($p), "` is null"));
            return MeeqlStatus::NullPointer;
        })+
    };
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, MeeqlStatus> {
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("`{name}` is not valid UTF-8"));
        MeeqlStatus::InvalidArgument
    })
}

fn boxed(model: ParameterizedModel, out: *mut *mut MeeqlModel) -> MeeqlStatus {
    // SAFETY: callers check `out` for null first.
    unsafe { *out = Box::into_raw(Box::new(MeeqlModel { inner: model })) };
    MeeqlStatus::Ok
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `cap - 1` bytes) and returns the full message length. With
/// a null `buf` only the length is returned.
///
/// # Safety
/// `buf` must be null or point to `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn meeql_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// The fixed mean-field model `dC/dt = (rp/2) C - rp C^2`.
///
/// # Safety
/// `out` must be a valid pointer to write the handle to.
#[no_mangle]
pub unsafe extern "C" fn meeql_model_meanfield(out: *mut *mut MeeqlModel) -> MeeqlStatus {
    guard(|| {
        non_null!(out);
        boxed(ParameterizedModel::meanfield(), out)
    })
}

/// Parses a model from the JSON written by `meeql learn`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn meeql_model_from_json(json: *const c_char, out: *mut *mut MeeqlModel) -> MeeqlStatus {
    guard(|| {
        non_null!(json, out);
        let text = match str_arg(json, "json") {
            Ok(s) => s,
            Err(s) => return s,
        };
        match ParameterizedModel::from_json(text) {
            Ok(m) => boxed(m, out),
            Err(e) => fail(Error::parse("<json>", e.to_string())),
        }
    })
}

/// Reads a model JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn meeql_model_read(path: *const c_char, out: *mut *mut MeeqlModel) -> MeeqlStatus {
    guard(|| {
        non_null!(path, out);
        let p = match str_arg(path, "path") {
            Ok(s) => s,
            Err(s) => return s,
        };
        match ParameterizedModel::read(Path::new(p)) {
            Ok(m) => boxed(m, out),
            Err(e) => fail(e),
        }
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must be null or a handle from a `meeql_model_*` constructor that
/// has not been freed.
#[no_mangle]
pub unsafe extern "C" fn meeql_model_free(model: *mut MeeqlModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn meeql_model_kind(model: *const MeeqlModel, out: *mut MeeqlModelKind) -> MeeqlStatus {
    guard(|| {
        non_null!(model, out);
        *out = (*model).inner.kind.into();
        MeeqlStatus::Ok
    })
}

/// Writes the dense coefficients at `rp` (entry `k-1` multiplies `C^k`)
/// and their count to `len`. If `cap` is smaller than the count nothing is
/// copied and `MEEQL_STATUS_BUFFER_TOO_SMALL` is returned; `coeffs` may then
/// be null.
///
/// # Safety
/// `model` must be a live handle, `coeffs` null or `cap` writable doubles,
/// and `len` writable.
#[no_mangle]
pub unsafe extern "C" fn meeql_model_coefficients(
    model: *const MeeqlModel,
    rp: f64,
    coeffs: *mut f64,
    cap: usize,
    len: *mut usize,
) -> MeeqlStatus {
    guard(|| {
        non_null!(model, len);
        let c = (*model).inner.coefficients_at(rp);
        *len = c.len();
        if cap < c.len() || (coeffs.is_null() && !c.is_empty()) {
            set_error(format!("need room for {} coefficients, got {cap}", c.len()));
            return MeeqlStatus::BufferTooSmall;
        }
        std::ptr::copy_nonoverlapping(c.as_ptr(), coeffs, c.len());
        MeeqlStatus::Ok
    })
}

/// Solves the model at `rp` from `c0` and writes the solution at the `n`
/// times in `times` (increasing, uniformly spaced) to `out`.
///
/// # Safety
/// `times` must hold `n` doubles and `out` must have room for `n`.
#[no_mangle]
pub unsafe extern "C" fn meeql_model_predict(
    model: *const MeeqlModel,
    rp: f64,
    c0: f64,
    times: *const f64,
    n: usize,
    out: *mut f64,
) -> MeeqlStatus {
    guard(|| {
        non_null!(model, times, out);
        let grid = std::slice::from_raw_parts(times, n);
        match predict(&(*model).inner, rp, c0, grid, &IntegrateOptions::default()) {
            Ok(ts) => {
                std::ptr::copy_nonoverlapping(ts.values.as_ptr(), out, n);
                MeeqlStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Estimates rp from one trajectory by minimising the model's SSE over
/// `[lo, hi]`. The first sample is the initial condition.
///
/// # Safety
/// `times` and `values` must hold `n` doubles; `rp_hat` must be writable and
/// `sse` null or writable.
#[no_mangle]
pub unsafe extern "C" fn meeql_infer_rp(
    model: *const MeeqlModel,
    times: *const f64,
    values: *const f64,
    n: usize,
    lo: f64,
    hi: f64,
    rp_hat: *mut f64,
    sse: *mut f64,
) -> MeeqlStatus {
    guard(|| {
        non_null!(model, times, values, rp_hat);
        let data = match meeql::TimeSeries::new(
            std::slice::from_raw_parts(times, n).to_vec(),
            std::slice::from_raw_parts(values, n).to_vec(),
        ) {
            Ok(d) => d,
            Err(e) => return fail(e),
        };
        match infer_rp(&(*model).inner, &data, (lo, hi), None, &IntegrateOptions::default()) {
            Ok(r) => {
                *rp_hat = r.rp_hat;
                if !sse.is_null() {
                    *sse = r.sse_at_optimum;
                }
                MeeqlStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Defaults for a given rp: unit migration rate, a 120x120 lattice, horizon
/// `30/rp` and 100 samples.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn meeql_abm_params_default(
    rp: f64,
    ic_fraction: f64,
    seed: u64,
    out: *mut MeeqlAbmParams,
) -> MeeqlStatus {
    guard(|| {
        non_null!(out);
        let p = AbmParams::new(rp, ic_fraction, seed);
        *out = MeeqlAbmParams {
            rp: p.rp,
            rm: p.rm,
            lattice_side: p.lattice_side,
            ic_fraction: p.ic_fraction,
            t_end: p.t_end,
            n_points: p.n_points,
            seed: p.seed,
        };
        MeeqlStatus::Ok
    })
}

/// Runs replicate `replicate` of the lattice model and writes the occupied
/// fraction at `params.n_points` uniform times to `out`.
///
/// # Safety
/// `params` must be readable and `out` must have room for `n_points` doubles.
#[no_mangle]
pub unsafe extern "C" fn meeql_abm_simulate(
    params: *const MeeqlAbmParams,
    replicate: usize,
    out: *mut f64,
) -> MeeqlStatus {
    guard(|| {
        non_null!(params, out);
        let p = &*params;
        let abm = AbmParams {
            rp: p.rp,
            rm: p.rm,
            lattice_side: p.lattice_side,
            ic_fraction: p.ic_fraction,
            n_replicates: 1,
            t_end: p.t_end,
            n_points: p.n_points,
            seed: p.seed,
        };
        match simulate_replicate(&abm, replicate) {
            Ok((ts, _)) => {
                std::ptr::copy_nonoverlapping(ts.values.as_ptr(), out, ts.len());
                MeeqlStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

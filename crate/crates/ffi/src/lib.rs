//! C ABI over `comb-qmc`.
//!
//! Models are opaque handles created with `comb_qmc_model_new` and released
//! with `comb_qmc_model_free`. Every fallible call returns a status code and
//! writes results through out-pointers; on failure a description is
//! available from `comb_qmc_last_error` until the next call on the same
//! thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use comb_qmc::algebra::sigma_z;
use comb_qmc::boundary::BoundaryField;
use comb_qmc::engine::{clustering_report, evaluate_iterative, two_point, Observable, ProductFormula};
use comb_qmc::graph::{self, Vertex};
use comb_qmc::oracle::brute_force_phi;
use comb_qmc::{model_params, Error, Limits, ModelParams};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CombQmcStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    OutOfRange = 3,
    VolumeTooLarge = 4,
    Numerical = 5,
    /// Clustering rate is undefined because every defect vanishes.
    Undefined = 6,
    Internal = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CombQmcRoute {
    Iterative = 0,
    Product = 1,
    Oracle = 2,
}

/// Opaque model handle.
pub struct CombQmcModel {
    params: ModelParams,
    limits: Limits,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> CombQmcStatus {
    match err {
        Error::OutOfRange(_) => CombQmcStatus::OutOfRange,
        Error::VolumeTooLarge { .. } | Error::OracleVolumeTooLarge { .. } => CombQmcStatus::VolumeTooLarge,
        Error::RouteMismatch { .. } | Error::NoConvergence(_) | Error::NonHermitian(_) => CombQmcStatus::Numerical,
        _ => CombQmcStatus::InvalidArgument,
    }
}

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), CombQmcStatus>) -> CombQmcStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CombQmcStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            CombQmcStatus::Internal
        }
    }
}

fn fail(err: Error) -> CombQmcStatus {
    set_error(err.to_string());
    status_of(&err)
}

fn null(what: &str) -> CombQmcStatus {
    set_error(format!("{what} is null"));
    CombQmcStatus::NullArgument
}

unsafe fn model_ref<'a>(model: *const CombQmcModel) -> Result<&'a CombQmcModel, CombQmcStatus> {
    model.as_ref().ok_or_else(|| null("model"))
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), CombQmcStatus> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

/// Creates a model for inverse temperature `beta` and coupling `j`.
///
/// # Safety
/// `out` must be null or valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn comb_qmc_model_new(beta: f64, j: f64, out: *mut *mut CombQmcModel) -> CombQmcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let params = model_params(beta, j).map_err(fail)?;
        let limits = Limits::from_env().map_err(fail)?;
        out.write(Box::into_raw(Box::new(CombQmcModel { params, limits })));
        Ok(())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must come from `comb_qmc_model_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn comb_qmc_model_free(model: *mut CombQmcModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// `τ1, τ2, τ3` and the normalization `α = 1/τ1`.
///
/// # Safety
/// `model` must be a live handle; out-pointers must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn comb_qmc_model_coefficients(
    model: *const CombQmcModel,
    tau1: *mut f64,
    tau2: *mut f64,
    tau3: *mut f64,
    alpha: *mut f64,
) -> CombQmcStatus {
    guard(|| {
        let m = model_ref(model)?;
        write(tau1, m.params.tau1, "tau1")?;
        write(tau2, m.params.tau2, "tau2")?;
        write(tau3, m.params.tau3, "tau3")?;
        write(alpha, m.params.alpha, "alpha")
    })
}

/// Evaluates the disordered state on a JSON observable within the volume of
/// level `n`, by the chosen route.
///
/// # Safety
/// `model` must be a live handle, `observable_json` a nul-terminated string,
/// and the out-pointers valid for writing.
#[no_mangle]
pub unsafe extern "C" fn comb_qmc_evaluate(
    model: *const CombQmcModel,
    observable_json: *const c_char,
    n: usize,
    route: CombQmcRoute,
    re: *mut f64,
    im: *mut f64,
) -> CombQmcStatus {
    guard(|| {
        let m = model_ref(model)?;
        if observable_json.is_null() {
            return Err(null("observable_json"));
        }
        let text = CStr::from_ptr(observable_json).to_str().map_err(|_| {
            set_error("observable_json is not UTF-8".into());
            CombQmcStatus::InvalidArgument
        })?;
        let obs: Observable = serde_json::from_str(text).map_err(|e| fail(Error::Json(e)))?;
        let field = BoundaryField::disordered(&m.params);
        let value = match route {
            CombQmcRoute::Iterative => evaluate_iterative(&obs, n, &m.params, &field, &m.limits),
            CombQmcRoute::Product => ProductFormula::new(n, &m.params, &m.limits).and_then(|p| p.evaluate(&obs)),
            CombQmcRoute::Oracle => {
                if obs.depth() > n {
                    Err(Error::SupportOutsideVolume(n))
                } else {
                    obs.to_operator(&graph::volume(n))
                        .and_then(|op| brute_force_phi(&op, n, &m.params, &field, &m.limits))
                }
            }
        }
        .map_err(fail)?;
        write(re, value.re, "re")?;
        write(im, value.im, "im")
    })
}

/// `φ(σz at (uk,ul) · σz at (vk,vl))` in the disordered state.
///
/// # Safety
/// `model` must be a live handle; out-pointers must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn comb_qmc_two_point_zz(
    model: *const CombQmcModel,
    uk: usize,
    ul: usize,
    vk: usize,
    vl: usize,
    value: *mut f64,
) -> CombQmcStatus {
    guard(|| {
        let m = model_ref(model)?;
        let z = sigma_z();
        let v = two_point(&z, &z, Vertex::new(uk, ul), Vertex::new(vk, vl), &m.params, &m.limits).map_err(fail)?;
        write(value, v.re, "value")
    })
}

/// Fitted spine decay rate of the σz two-point defect over `d = 1..=d_max`.
/// Returns `UNDEFINED` (and writes NaN) when every defect vanishes.
///
/// # Safety
/// `model` must be a live handle; `rate` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn comb_qmc_clustering_rate(
    model: *const CombQmcModel,
    d_max: usize,
    rate: *mut f64,
) -> CombQmcStatus {
    guard(|| {
        let m = model_ref(model)?;
        let report = clustering_report(&m.params, d_max, &m.limits).map_err(fail)?;
        match report.lambda_star {
            Some(l) => write(rate, l, "rate"),
            None => {
                write(rate, f64::NAN, "rate")?;
                set_error("all correlation defects vanish".into());
                Err(CombQmcStatus::Undefined)
            }
        }
    })
}

/// Message for the last failed call on this thread, or null. Owned by the
/// library; valid until the next call.
#[no_mangle]
pub extern "C" fn comb_qmc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

//! C ABI over the attribution engine.
//!
//! Models are opaque [`PhxModel`] handles created by [`phx_model_load`] or
//! [`phx_model_from_json`] and released with [`phx_model_free`]. Every
//! fallible call returns a [`PhxStatus`]; on failure the message is available
//! from [`phx_last_error_message`] on the same thread. Strings returned to the
//! caller are released with [`phx_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use philaex::models::{ModelBundle, ScoreModel};
use philaex::{explain, ExplainerConfig, FeatureVector};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhxStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Model = 4,
    Explain = 5,
    Panic = 6,
}

/// Loaded model. Opaque to C.
pub struct PhxModel {
    bundle: ModelBundle,
}

/// Explainer settings; `mask_samples = 0` selects the default row count.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PhxExplainerConfig {
    pub max_core_features: usize,
    pub alpha: f64,
    pub mask_samples: usize,
    pub contribution_epsilon: f64,
    pub seed: u64,
}

impl From<PhxExplainerConfig> for ExplainerConfig {
    fn from(c: PhxExplainerConfig) -> Self {
        ExplainerConfig {
            max_core_features: c.max_core_features,
            alpha: c.alpha,
            mask_samples: (c.mask_samples > 0).then_some(c.mask_samples),
            contribution_epsilon: c.contribution_epsilon,
            seed: c.seed,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("nul bytes removed"));
}

fn guard<F: FnOnce() -> Result<(), (PhxStatus, String)>>(f: F) -> PhxStatus {
    set_error("");
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PhxStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            PhxStatus::Panic
        }
    }
}

fn null(what: &str) -> (PhxStatus, String) {
    (PhxStatus::NullPointer, format!("{what} is null"))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (PhxStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (PhxStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn dense(m: &PhxModel, x: *const f64, len: usize) -> Result<FeatureVector, (PhxStatus, String)> {
    if x.is_null() {
        return Err(null("x"));
    }
    if len != m.bundle.dim() {
        return Err((
            PhxStatus::InvalidArgument,
            format!("x has {len} values, model expects {}", m.bundle.dim()),
        ));
    }
    let values = std::slice::from_raw_parts(x, len);
    FeatureVector::from_dense(values).map_err(|e| (PhxStatus::InvalidArgument, e.to_string()))
}

fn install(bundle: ModelBundle, out: *mut *mut PhxModel) {
    unsafe { *out = Box::into_raw(Box::new(PhxModel { bundle })) };
}

/// Loads a model file written by the `philaex train` command.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn phx_model_load(path: *const c_char, out: *mut *mut PhxModel) -> PhxStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let path = c_str(path, "path")?;
        let bundle = ModelBundle::load(Path::new(path)).map_err(|e| (PhxStatus::Io, e.to_string()))?;
        install(bundle, out);
        Ok(())
    })
}

/// Builds a model from the JSON text of a model file.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn phx_model_from_json(json: *const c_char, out: *mut *mut PhxModel) -> PhxStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let text = c_str(json, "json")?;
        let bundle = ModelBundle::from_json(text).map_err(|e| (PhxStatus::Model, e.to_string()))?;
        install(bundle, out);
        Ok(())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn phx_model_free(model: *mut PhxModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Feature-space dimension, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn phx_model_dim(model: *const PhxModel) -> usize {
    model.as_ref().map_or(0, |m| m.bundle.dim())
}

/// Scores a dense vector of `len` raw feature values.
///
/// # Safety
/// `x` must point to `len` doubles and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn phx_model_score_dense(
    model: *const PhxModel,
    x: *const f64,
    len: usize,
    out: *mut f64,
) -> PhxStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let v = dense(m, x, len)?;
        *out = m.bundle.score(&v).map_err(|e| (PhxStatus::Model, e.to_string()))?;
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn phx_explainer_config_default() -> PhxExplainerConfig {
    let d = ExplainerConfig::default();
    PhxExplainerConfig {
        max_core_features: d.max_core_features,
        alpha: d.alpha,
        mask_samples: d.mask_samples.unwrap_or(0),
        contribution_epsilon: d.contribution_epsilon,
        seed: d.seed,
    }
}

/// Explains a dense vector and returns the report as a JSON string in
/// `out_json` (release with [`phx_string_free`]). A null `config` uses the
/// defaults.
///
/// # Safety
/// `x` must point to `len` doubles; `config` must be null or valid;
/// `out_json` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn phx_explain_dense(
    model: *const PhxModel,
    x: *const f64,
    len: usize,
    config: *const PhxExplainerConfig,
    out_json: *mut *mut c_char,
) -> PhxStatus {
    guard(|| {
        if out_json.is_null() {
            return Err(null("out_json"));
        }
        *out_json = ptr::null_mut();
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let v = dense(m, x, len)?;
        let cfg: ExplainerConfig = config.as_ref().map_or_else(ExplainerConfig::default, |c| (*c).into());
        cfg.validate().map_err(|e| (PhxStatus::InvalidArgument, e.to_string()))?;
        let report = explain(&m.bundle, &v, &cfg).map_err(|e| (PhxStatus::Explain, e.to_string()))?;
        let json = report.with_names(&m.bundle.vocabulary).to_json();
        *out_json = CString::new(json).expect("JSON has no NUL").into_raw();
        Ok(())
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn phx_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message of the last failed call on this thread ("" after a success).
/// Valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn phx_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn phx_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

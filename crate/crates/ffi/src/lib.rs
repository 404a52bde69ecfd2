//! C ABI over `stam-core`.
//!
//! Models are opaque `StamModel` handles created by [`stam_model_new`] or
//! [`stam_model_load`] and released with [`stam_model_free`]. Every fallible
//! call returns a [`StamStatus`]; on failure the message is available from
//! [`stam_last_error`] on the same thread until the next failing call.
//!
//! Input windows are row-major N×Tx arrays (one row per variable).

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use stam_core::autodiff::{Shape, Tensor};
use stam_core::cli::{exit, exit_code};
use stam_core::models::{flop_estimate, load_weights, save_weights, Model, ModelConfig};
use stam_core::Error;

/// Result of an FFI call. Codes 1 to 5 match the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StamStatus {
    Ok = 0,
    Other = 1,
    Config = 2,
    Data = 3,
    Diverged = 4,
    Model = 5,
    NullPointer = 6,
    InvalidUtf8 = 7,
    BufferSize = 8,
    Panic = 9,
}

/// Opaque model handle.
pub struct StamModel {
    model: Model,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let mut msg = msg.into();
    msg.retain(|c| c != '\0');
    let c = CString::new(msg).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn from_core(e: Error) -> StamStatus {
    let status = match exit_code(&e) {
        exit::CONFIG => StamStatus::Config,
        exit::DATA => StamStatus::Data,
        exit::DIVERGED => StamStatus::Diverged,
        exit::MODEL => StamStatus::Model,
        _ => StamStatus::Other,
    };
    set_error(e.to_string());
    status
}

fn fail(status: StamStatus, msg: impl Into<String>) -> StamStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> StamStatus) -> StamStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(StamStatus::Panic, format!("panic: {msg}"))
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, StamStatus> {
    if p.is_null() {
        return Err(fail(StamStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(StamStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn model_ref<'a>(m: *const StamModel) -> Result<&'a StamModel, StamStatus> {
    m.as_ref().ok_or_else(|| fail(StamStatus::NullPointer, "model handle is null"))
}

macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

macro_rules! core {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(e) => return from_core(e),
        }
    };
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, StamStatus> {
    p.as_mut().ok_or_else(|| fail(StamStatus::NullPointer, format!("{what} is null")))
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn stam_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn stam_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a freshly initialized model from a JSON model config
/// (`arch`, `n_vars`, `input_len`, `output_len`, `enc_dim`, `dec_dim`,
/// `context_dim`, optional `dropout_rate`, `seed`, `per_variable_embedding`).
///
/// # Safety
/// `config_json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn stam_model_new(config_json: *const c_char, out: *mut *mut StamModel) -> StamStatus {
    guard(|| {
        let out = tri!(out_ptr(out, "out"));
        *out = ptr::null_mut();
        let text = tri!(read_str(config_json, "config_json"));
        let config: ModelConfig = match serde_json::from_str(text) {
            Ok(c) => c,
            Err(e) => return fail(StamStatus::Config, format!("invalid model config: {e}")),
        };
        let model = core!(Model::new(config));
        *out = Box::into_raw(Box::new(StamModel { model }));
        StamStatus::Ok
    })
}

/// Reads a weight file.
///
/// # Safety
/// `path` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn stam_model_load(path: *const c_char, out: *mut *mut StamModel) -> StamStatus {
    guard(|| {
        let out = tri!(out_ptr(out, "out"));
        *out = ptr::null_mut();
        let path = PathBuf::from(tri!(read_str(path, "path")));
        let model = core!(load_weights(&path));
        *out = Box::into_raw(Box::new(StamModel { model }));
        StamStatus::Ok
    })
}

/// Writes a weight file.
///
/// # Safety
/// `model` must come from this library; `path` must be nul-terminated.
#[no_mangle]
pub unsafe extern "C" fn stam_model_save(model: *const StamModel, path: *const c_char) -> StamStatus {
    guard(|| {
        let m = tri!(model_ref(model));
        let path = PathBuf::from(tri!(read_str(path, "path")));
        core!(save_weights(&m.model, &path));
        StamStatus::Ok
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `model` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn stam_model_free(model: *mut StamModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// The model config as JSON. Release the string with [`stam_string_free`].
///
/// # Safety
/// `model` must come from this library and `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn stam_model_config_json(model: *const StamModel, out: *mut *mut c_char) -> StamStatus {
    guard(|| {
        let out = tri!(out_ptr(out, "out"));
        *out = ptr::null_mut();
        let m = tri!(model_ref(model));
        let text = core!(serde_json::to_string(m.model.config()).map_err(Error::from));
        *out = CString::new(text).expect("JSON has no nul bytes").into_raw();
        StamStatus::Ok
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn stam_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Input variables N, input length Tx and horizon Ty.
///
/// # Safety
/// `model` must come from this library; the outputs must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn stam_model_dims(
    model: *const StamModel,
    n_vars: *mut usize,
    input_len: *mut usize,
    output_len: *mut usize,
) -> StamStatus {
    guard(|| {
        let m = tri!(model_ref(model));
        let c = m.model.config();
        *tri!(out_ptr(n_vars, "n_vars")) = c.n_vars;
        *tri!(out_ptr(input_len, "input_len")) = c.input_len;
        *tri!(out_ptr(output_len, "output_len")) = c.output_len;
        StamStatus::Ok
    })
}

/// Number of trainable scalars.
///
/// # Safety
/// `model` must come from this library and `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn stam_model_param_count(model: *const StamModel, out: *mut usize) -> StamStatus {
    guard(|| {
        let m = tri!(model_ref(model));
        *tri!(out_ptr(out, "out")) = m.model.param_total();
        StamStatus::Ok
    })
}

/// Multiply-add estimate for one window. Fails with `Config` for
/// architectures without an estimate.
///
/// # Safety
/// `model` must come from this library and `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn stam_model_flop_estimate(model: *const StamModel, out: *mut u64) -> StamStatus {
    guard(|| {
        let m = tri!(model_ref(model));
        let out = tri!(out_ptr(out, "out"));
        *out = core!(flop_estimate(m.model.config()));
        StamStatus::Ok
    })
}

/// Sizes of the attention matrices `forward` produces: spatial is
/// rows×cols (N columns), temporal is rows×cols (Tx columns). Zero when the
/// architecture has no such attention.
///
/// # Safety
/// `model` must come from this library; the outputs must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn stam_model_attention_shape(
    model: *const StamModel,
    spatial_rows: *mut usize,
    spatial_cols: *mut usize,
    temporal_rows: *mut usize,
    temporal_cols: *mut usize,
) -> StamStatus {
    guard(|| {
        let m = tri!(model_ref(model));
        let c = m.model.config();
        let x = core!(zero_window(c.n_vars, c.input_len));
        let f = core!(m.model.predict(&x));
        let dims = |rows: &Vec<Vec<f64>>| (rows.len(), rows.first().map_or(0, Vec::len));
        let (sr, sc) = dims(&f.attention.spatial);
        let (tr, tc) = dims(&f.attention.temporal);
        *tri!(out_ptr(spatial_rows, "spatial_rows")) = sr;
        *tri!(out_ptr(spatial_cols, "spatial_cols")) = sc;
        *tri!(out_ptr(temporal_rows, "temporal_rows")) = tr;
        *tri!(out_ptr(temporal_cols, "temporal_cols")) = tc;
        StamStatus::Ok
    })
}

fn zero_window(n: usize, tx: usize) -> stam_core::Result<Tensor> {
    Tensor::new(Shape::new(vec![n, tx])?, vec![0.0; n * tx])
}

unsafe fn write_out(dst: *mut f64, len: usize, src: &[f64], what: &str) -> Result<(), StamStatus> {
    if dst.is_null() {
        return Ok(());
    }
    if len != src.len() {
        return Err(fail(
            StamStatus::BufferSize,
            format!("{what} holds {len} values, forward produced {}", src.len()),
        ));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), dst, len);
    Ok(())
}

/// Forecasts one standardized window in eval mode.
///
/// `x` holds N·Tx values, row-major N×Tx. `y_out` receives Ty values.
/// `spatial_out` and `temporal_out` may be null; otherwise their lengths
/// must equal the sizes reported by [`stam_model_attention_shape`].
///
/// # Safety
/// Each non-null buffer must be valid for its stated length.
#[no_mangle]
pub unsafe extern "C" fn stam_model_forward(
    model: *const StamModel,
    x: *const f64,
    x_len: usize,
    y_out: *mut f64,
    y_len: usize,
    spatial_out: *mut f64,
    spatial_len: usize,
    temporal_out: *mut f64,
    temporal_len: usize,
) -> StamStatus {
    guard(|| {
        let m = tri!(model_ref(model));
        if x.is_null() {
            return fail(StamStatus::NullPointer, "x is null");
        }
        if y_out.is_null() {
            return fail(StamStatus::NullPointer, "y_out is null");
        }
        let c = m.model.config();
        if x_len != c.n_vars * c.input_len {
            return fail(
                StamStatus::BufferSize,
                format!("x holds {x_len} values, model expects {}×{}", c.n_vars, c.input_len),
            );
        }
        let values = std::slice::from_raw_parts(x, x_len).to_vec();
        let input = core!(Shape::new(vec![c.n_vars, c.input_len]).and_then(|s| Tensor::new(s, values)));
        let f = core!(m.model.predict(&input));
        let spatial: Vec<f64> = f.attention.spatial.concat();
        let temporal: Vec<f64> = f.attention.temporal.concat();
        if y_len != f.y_hat.len() {
            return fail(
                StamStatus::BufferSize,
                format!("y_out holds {y_len} values, forward produced {}", f.y_hat.len()),
            );
        }
        tri!(write_out(spatial_out, spatial_len, &spatial, "spatial_out"));
        tri!(write_out(temporal_out, temporal_len, &temporal, "temporal_out"));
        ptr::copy_nonoverlapping(f.y_hat.as_ptr(), y_out, y_len);
        StamStatus::Ok
    })
}

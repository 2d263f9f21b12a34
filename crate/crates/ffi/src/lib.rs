//! C ABI for the lane intrusion pipeline.
//!
//! Handles are opaque pointers created and destroyed by this library; every
//! fallible call returns a [`LiStatus`] and leaves a human-readable message
//! for [`li_last_error_message`]. No function panics across the boundary.
//!
//! ```c
//! LiPipeline *pipe = li_pipeline_new_default();
//! LiSeries *series = NULL;
//! if (li_pipeline_run_file(pipe, "frames.jsonl", &series) == LiStatus_Ok) {
//!     const double *p_r = li_series_values(series);
//!     size_t len = li_series_len(series);
//!     /* ... */
//! }
//! ```

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::BufReader;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use laneintrude::harness::{prepare_sample, PipelineConfig};
use laneintrude::ingest::parse_frames;
use laneintrude::normalize::MotionSeries;
use laneintrude::psrnet::PsrNet;
use laneintrude::scenegen::Label;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LiStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// File could not be opened, read, or written.
    Io = 3,
    /// Input bytes could not be parsed.
    Parse = 4,
    /// The pipeline could not process the data (no track, degenerate lane).
    Data = 5,
    /// Configuration rejected.
    InvalidConfig = 6,
    /// Buffer or model shape does not match.
    ShapeMismatch = 7,
    /// Unexpected internal failure.
    Internal = 8,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn fail(status: LiStatus, message: impl AsRef<str>) -> LiStatus {
    set_error(message.as_ref());
    status
}

/// Copy the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length in bytes.
///
/// # Safety
/// `buf` must point to `len` writable bytes, or be null (query mode).
#[no_mangle]
pub unsafe extern "C" fn li_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len);
            ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            // always terminate
            *buf.add(n - 1) = 0;
        }
        bytes.len() - 1
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn li_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr() as *const c_char
}

unsafe fn cstr<'a>(ptr: *const c_char) -> Result<&'a str, LiStatus> {
    if ptr.is_null() {
        return Err(LiStatus::NullArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| LiStatus::InvalidUtf8)
}

fn guard(f: impl FnOnce() -> LiStatus) -> LiStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(LiStatus::Internal, "panic across the FFI boundary"),
    }
}

// ---------------------------------------------------------------------------
// Pipeline: detection records -> relative motion series
// ---------------------------------------------------------------------------

/// Opaque preprocessing pipeline (association, smoothing, normalization).
pub struct LiPipeline {
    config: PipelineConfig,
}

/// Opaque relative motion series produced by the pipeline.
pub struct LiSeries {
    frames: Vec<i64>,
    values: Vec<f64>,
}

/// Pipeline with default gating, Kalman, and normalization settings.
#[no_mangle]
pub extern "C" fn li_pipeline_new_default() -> *mut LiPipeline {
    Box::into_raw(Box::new(LiPipeline {
        config: PipelineConfig::default(),
    }))
}

/// Pipeline from a JSON configuration object (the CLI `pipeline` section).
/// Returns null on error; see [`li_last_error_message`].
///
/// # Safety
/// `json` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn li_pipeline_new_json(json: *const c_char) -> *mut LiPipeline {
    let mut out: *mut LiPipeline = ptr::null_mut();
    let status = guard(|| {
        let text = match cstr(json) {
            Ok(t) => t,
            Err(s) => return fail(s, "json argument"),
        };
        match serde_json::from_str::<PipelineConfig>(text) {
            Ok(config) => {
                out = Box::into_raw(Box::new(LiPipeline { config }));
                LiStatus::Ok
            }
            Err(e) => fail(LiStatus::InvalidConfig, e.to_string()),
        }
    });
    let _ = status;
    out
}

/// # Safety
/// `pipeline` must come from a `li_pipeline_new_*` call, at most once.
#[no_mangle]
pub unsafe extern "C" fn li_pipeline_free(pipeline: *mut LiPipeline) {
    if !pipeline.is_null() {
        drop(Box::from_raw(pipeline));
    }
}

fn run_pipeline(config: &PipelineConfig, jsonl: &str) -> Result<MotionSeries, (LiStatus, String)> {
    let frames = parse_frames(jsonl.as_bytes())
        .map_err(|e| (LiStatus::Parse, e.to_string()))?;
    let prepared = prepare_sample(&frames, Label::NoIntrusion, 0, config)
        .map_err(|e| (LiStatus::Data, e.to_string()))?;
    Ok(prepared.series)
}

/// Run the pipeline on detection-frame JSONL text.
///
/// # Safety
/// `pipeline` must be valid, `jsonl` NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn li_pipeline_run(
    pipeline: *const LiPipeline,
    jsonl: *const c_char,
    out: *mut *mut LiSeries,
) -> LiStatus {
    guard(|| {
        if pipeline.is_null() || out.is_null() {
            return fail(LiStatus::NullArgument, "pipeline/out");
        }
        let text = match cstr(jsonl) {
            Ok(t) => t,
            Err(s) => return fail(s, "jsonl argument"),
        };
        match run_pipeline(&(*pipeline).config, text) {
            Ok(series) => {
                *out = Box::into_raw(Box::new(LiSeries {
                    frames: series.frames,
                    values: series.values,
                }));
                LiStatus::Ok
            }
            Err((status, msg)) => fail(status, msg),
        }
    })
}

/// Run the pipeline on a detection-frame JSONL file.
///
/// # Safety
/// `pipeline` must be valid, `path` NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn li_pipeline_run_file(
    pipeline: *const LiPipeline,
    path: *const c_char,
    out: *mut *mut LiSeries,
) -> LiStatus {
    guard(|| {
        if pipeline.is_null() || out.is_null() {
            return fail(LiStatus::NullArgument, "pipeline/out");
        }
        let path = match cstr(path) {
            Ok(p) => p,
            Err(s) => return fail(s, "path argument"),
        };
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => return fail(LiStatus::Io, format!("{path}: {e}")),
        };
        match run_pipeline(&(*pipeline).config, &text) {
            Ok(series) => {
                *out = Box::into_raw(Box::new(LiSeries {
                    frames: series.frames,
                    values: series.values,
                }));
                LiStatus::Ok
            }
            Err((status, msg)) => fail(status, msg),
        }
    })
}

/// Number of frames in a series.
///
/// # Safety
/// `series` must be a live series handle.
#[no_mangle]
pub unsafe extern "C" fn li_series_len(series: *const LiSeries) -> usize {
    if series.is_null() {
        return 0;
    }
    (*series).values.len()
}

/// Borrowed pointer to the normalized values; valid until the series is
/// freed.
///
/// # Safety
/// `series` must be a live series handle.
#[no_mangle]
pub unsafe extern "C" fn li_series_values(series: *const LiSeries) -> *const f64 {
    if series.is_null() {
        return ptr::null();
    }
    (*series).values.as_ptr()
}

/// Borrowed pointer to the frame indices; valid until the series is freed.
///
/// # Safety
/// `series` must be a live series handle.
#[no_mangle]
pub unsafe extern "C" fn li_series_frames(series: *const LiSeries) -> *const i64 {
    if series.is_null() {
        return ptr::null();
    }
    (*series).frames.as_ptr()
}

/// # Safety
/// `series` must come from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn li_series_free(series: *mut LiSeries) {
    if !series.is_null() {
        drop(Box::from_raw(series));
    }
}

// ---------------------------------------------------------------------------
// Model: checkpoint loading and window classification
// ---------------------------------------------------------------------------

/// Opaque classifier handle.
pub struct LiModel {
    net: PsrNet,
}

/// Load a model checkpoint (the JSON format written by the trainer).
///
/// # Safety
/// `path` must be NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn li_model_load(path: *const c_char, out: *mut *mut LiModel) -> LiStatus {
    guard(|| {
        if out.is_null() {
            return fail(LiStatus::NullArgument, "out");
        }
        let path = match cstr(path) {
            Ok(p) => p,
            Err(s) => return fail(s, "path argument"),
        };
        let file = match File::open(path) {
            Ok(f) => f,
            Err(e) => return fail(LiStatus::Io, format!("{path}: {e}")),
        };
        match PsrNet::load_checkpoint(BufReader::new(file)) {
            Ok(net) => {
                *out = Box::into_raw(Box::new(LiModel { net }));
                LiStatus::Ok
            }
            Err(e) => fail(LiStatus::Parse, e.to_string()),
        }
    })
}

/// # Safety
/// `model` must come from `li_model_load`, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn li_model_free(model: *mut LiModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Input window length the model expects.
///
/// # Safety
/// `model` must be a live model handle.
#[no_mangle]
pub unsafe extern "C" fn li_model_window_len(model: *const LiModel) -> usize {
    if model.is_null() {
        return 0;
    }
    (*model).net.config().window_len
}

/// Number of classes the model scores.
///
/// # Safety
/// `model` must be a live model handle.
#[no_mangle]
pub unsafe extern "C" fn li_model_classes(model: *const LiModel) -> usize {
    if model.is_null() {
        return 0;
    }
    (*model).net.config().classes
}

/// Classify one window of relative positions. `values` must hold exactly
/// `li_model_window_len` entries; `probs_out`, when non-null, receives
/// `li_model_classes` probabilities; `class_out` the argmax index
/// (0 = left-to-right, 1 = right-to-left, 2 = no intrusion).
///
/// # Safety
/// Pointers must satisfy the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn li_model_predict(
    model: *const LiModel,
    values: *const f64,
    len: usize,
    probs_out: *mut f64,
    class_out: *mut usize,
) -> LiStatus {
    guard(|| {
        if model.is_null() || values.is_null() {
            return fail(LiStatus::NullArgument, "model/values");
        }
        let net = &(*model).net;
        if len != net.config().window_len {
            return fail(
                LiStatus::ShapeMismatch,
                format!("window of {len}, expected {}", net.config().window_len),
            );
        }
        let window = std::slice::from_raw_parts(values, len);
        match net.forward(window) {
            Ok(fwd) => {
                if !probs_out.is_null() {
                    ptr::copy_nonoverlapping(fwd.probs.as_ptr(), probs_out, fwd.probs.len());
                }
                if !class_out.is_null() {
                    let best = fwd
                        .probs
                        .iter()
                        .enumerate()
                        .max_by(|a, b| a.1.total_cmp(b.1))
                        .map(|(i, _)| i)
                        .unwrap_or(0);
                    *class_out = best;
                }
                LiStatus::Ok
            }
            Err(e) => fail(LiStatus::ShapeMismatch, e.to_string()),
        }
    })
}

/// Classify the final window of a pipeline series (the sample-level
/// prediction rule).
///
/// # Safety
/// `model` and `series` must be live handles.
#[no_mangle]
pub unsafe extern "C" fn li_model_predict_series(
    model: *const LiModel,
    series: *const LiSeries,
    probs_out: *mut f64,
    class_out: *mut usize,
) -> LiStatus {
    guard(|| {
        if model.is_null() || series.is_null() {
            return fail(LiStatus::NullArgument, "model/series");
        }
        let net = &(*model).net;
        let window_len = net.config().window_len;
        let values = &(*series).values;
        if values.len() < window_len {
            return fail(
                LiStatus::ShapeMismatch,
                format!("series of {} frames, need {window_len}", values.len()),
            );
        }
        let window = &values[values.len() - window_len..];
        li_model_predict(model, window.as_ptr(), window_len, probs_out, class_out)
    })
}

//! C ABI for the detbench toolkit.
//!
//! The binding surface is deliberately small and data-oriented: parse label
//! files into an opaque handle, query boxes out of it, score detection
//! directories, and run the aggregation/latency arithmetic. Everything else
//! (dataset generation, pipelines) stays behind the CLI.
//!
//! Conventions:
//! - Every fallible function returns [`DetbenchStatus`]; `DETBENCH_STATUS_OK`
//!   is zero. On failure, a thread-local message is set and can be read with
//!   [`detbench_last_error`].
//! - Strings are NUL-terminated UTF-8. Returned string pointers are either
//!   `'static` ([`detbench_version`]) or thread-local
//!   ([`detbench_last_error`]); the caller never frees them.
//! - Opaque handles ([`DetbenchLabels`]) are created and released by this
//!   library only ([`detbench_labels_parse`] / [`detbench_labels_free`]).
//! - A panic crossing the boundary aborts the process; library code reports
//!   failures through status codes instead of panicking.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;

use detbench::annotation::{parse_label_file, AnnotationError, BoundingBox, GroundTruth};
use detbench::evaluator::{aggregate, evaluate_dirs, norm_iou, EvalError};
use detbench::seed::derive_seed;

/// Result of a detbench call. Zero means success; anything else is a failure
/// whose detail is available from [`detbench_last_error`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetbenchStatus {
    Ok = 0,
    /// A required pointer argument was NULL.
    NullPointer = 1,
    /// An argument value was rejected (bad box geometry, range, or UTF-8).
    InvalidArgument = 2,
    /// Text input could not be parsed.
    ParseError = 3,
    /// The filesystem said no.
    IoError = 4,
    /// Average precision is undefined (no ground-truth boxes).
    UndefinedAp = 5,
    /// An index was out of range.
    OutOfBounds = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn fail(status: DetbenchStatus, message: impl std::fmt::Display) -> DetbenchStatus {
    let text = message.to_string().replace('\0', " ");
    let stored = CString::new(text).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(stored));
    status
}

fn eval_status(e: &EvalError) -> DetbenchStatus {
    match e {
        EvalError::UndefinedAp => DetbenchStatus::UndefinedAp,
        EvalError::Io { .. } => DetbenchStatus::IoError,
        EvalError::Annotation { .. } => DetbenchStatus::ParseError,
        _ => DetbenchStatus::InvalidArgument,
    }
}

/// Message describing this thread's most recent detbench failure, or NULL if
/// none has occurred yet. The pointer stays valid until the next failing
/// detbench call on the same thread.
#[no_mangle]
pub extern "C" fn detbench_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr())
    })
}

/// Library version as a static NUL-terminated string; never freed.
#[no_mangle]
pub extern "C" fn detbench_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Derive the decorrelated child seed for `(master, index)`; pure function,
/// identical to the library's internal stream derivation.
#[no_mangle]
pub extern "C" fn detbench_derive_seed(master: u64, index: u64) -> u64 {
    derive_seed(master, index)
}

/// Possible frames per second for a mean total per-frame latency in
/// milliseconds: `1000 / mean_total_ms`, or +infinity when the mean is zero
/// or negative.
#[no_mangle]
pub extern "C" fn detbench_possible_fps(mean_total_ms: f64) -> f64 {
    if mean_total_ms <= 0.0 {
        f64::INFINITY
    } else {
        1000.0 / mean_total_ms
    }
}

fn checked_box(cx: f64, cy: f64, w: f64, h: f64) -> Result<BoundingBox, AnnotationError> {
    BoundingBox::new(cx, cy, w, h)
}

/// Intersection-over-union of two normalized center-format boxes
/// `(cx, cy, w, h)`, written to `out_iou`.
///
/// # Safety
/// `out_iou` must be a valid pointer to writable memory for one `double`.
#[no_mangle]
pub unsafe extern "C" fn detbench_iou(
    a_cx: f64,
    a_cy: f64,
    a_w: f64,
    a_h: f64,
    b_cx: f64,
    b_cy: f64,
    b_w: f64,
    b_h: f64,
    out_iou: *mut f64,
) -> DetbenchStatus {
    if out_iou.is_null() {
        return fail(DetbenchStatus::NullPointer, "out_iou is NULL");
    }
    let a = match checked_box(a_cx, a_cy, a_w, a_h) {
        Ok(b) => b,
        Err(e) => return fail(DetbenchStatus::InvalidArgument, format!("box a: {e}")),
    };
    let b = match checked_box(b_cx, b_cy, b_w, b_h) {
        Ok(b) => b,
        Err(e) => return fail(DetbenchStatus::InvalidArgument, format!("box b: {e}")),
    };
    // SAFETY: non-null checked above; caller guarantees validity.
    unsafe { *out_iou = norm_iou(&a, &b) };
    DetbenchStatus::Ok
}

/// Mean and absolute gap of two AP scores in `[0, 1]`, written to `out_avg`
/// and `out_diff`.
///
/// # Safety
/// `out_avg` and `out_diff` must be valid pointers to writable memory for one
/// `double` each.
#[no_mangle]
pub unsafe extern "C" fn detbench_aggregate(
    test_normal_ap: f64,
    test_difficult_ap: f64,
    out_avg: *mut f64,
    out_diff: *mut f64,
) -> DetbenchStatus {
    if out_avg.is_null() || out_diff.is_null() {
        return fail(DetbenchStatus::NullPointer, "out_avg or out_diff is NULL");
    }
    match aggregate(test_normal_ap, test_difficult_ap) {
        Ok((avg, diff)) => {
            // SAFETY: non-null checked above; caller guarantees validity.
            unsafe {
                *out_avg = avg;
                *out_diff = diff;
            }
            DetbenchStatus::Ok
        }
        Err(e) => fail(eval_status(&e), e),
    }
}

/// Parsed ground-truth label set. Opaque: create with
/// [`detbench_labels_parse`], inspect with [`detbench_labels_len`] /
/// [`detbench_labels_get`], release with [`detbench_labels_free`].
pub struct DetbenchLabels {
    items: Vec<GroundTruth>,
}

/// Parse label text (`class cx cy w h` per line, normalized coordinates) for
/// an `image_w` × `image_h` image and store a new handle in `out_labels`.
///
/// # Safety
/// `text` must be a valid NUL-terminated string. `out_labels` must be a valid
/// pointer to writable memory for one pointer; on success it receives a
/// handle that must be released with [`detbench_labels_free`].
#[no_mangle]
pub unsafe extern "C" fn detbench_labels_parse(
    text: *const c_char,
    image_w: u32,
    image_h: u32,
    out_labels: *mut *mut DetbenchLabels,
) -> DetbenchStatus {
    if text.is_null() || out_labels.is_null() {
        return fail(DetbenchStatus::NullPointer, "text or out_labels is NULL");
    }
    // SAFETY: caller guarantees a valid NUL-terminated string.
    let text = match unsafe { CStr::from_ptr(text) }.to_str() {
        Ok(t) => t,
        Err(e) => return fail(DetbenchStatus::InvalidArgument, format!("text is not UTF-8: {e}")),
    };
    match parse_label_file(text, image_w, image_h) {
        Ok(items) => {
            let handle = Box::into_raw(Box::new(DetbenchLabels { items }));
            // SAFETY: non-null checked above; caller guarantees validity.
            unsafe { *out_labels = handle };
            DetbenchStatus::Ok
        }
        Err(e) => fail(DetbenchStatus::ParseError, e),
    }
}

/// Number of boxes in the handle; 0 for NULL.
///
/// # Safety
/// `labels` must be NULL or a handle from [`detbench_labels_parse`] that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn detbench_labels_len(labels: *const DetbenchLabels) -> usize {
    if labels.is_null() {
        return 0;
    }
    // SAFETY: caller guarantees a live handle.
    unsafe { &*labels }.items.len()
}

/// Copy box `index` out of the handle: class id and normalized center-format
/// geometry.
///
/// # Safety
/// `labels` must be a live handle from [`detbench_labels_parse`]. Each `out_*`
/// pointer must be valid for one write of its type.
#[no_mangle]
pub unsafe extern "C" fn detbench_labels_get(
    labels: *const DetbenchLabels,
    index: usize,
    out_class: *mut u32,
    out_cx: *mut f64,
    out_cy: *mut f64,
    out_w: *mut f64,
    out_h: *mut f64,
) -> DetbenchStatus {
    if labels.is_null() {
        return fail(DetbenchStatus::NullPointer, "labels is NULL");
    }
    if [out_cx, out_cy, out_w, out_h].iter().any(|p| p.is_null()) || out_class.is_null() {
        return fail(DetbenchStatus::NullPointer, "an out pointer is NULL");
    }
    // SAFETY: caller guarantees a live handle.
    let items = &unsafe { &*labels }.items;
    let Some(gt) = items.get(index) else {
        return fail(
            DetbenchStatus::OutOfBounds,
            format!("index {index} out of range for {} labels", items.len()),
        );
    };
    // SAFETY: non-null checked above; caller guarantees validity.
    unsafe {
        *out_class = gt.class_id;
        *out_cx = gt.bbox.cx;
        *out_cy = gt.bbox.cy;
        *out_w = gt.bbox.w;
        *out_h = gt.bbox.h;
    }
    DetbenchStatus::Ok
}

/// Release a handle from [`detbench_labels_parse`]. NULL is a no-op. Passing
/// the same handle twice is undefined behavior.
///
/// # Safety
/// `labels` must be NULL or a handle from [`detbench_labels_parse`] that has
/// not already been freed.
#[no_mangle]
pub unsafe extern "C" fn detbench_labels_free(labels: *mut DetbenchLabels) {
    if labels.is_null() {
        return;
    }
    // SAFETY: caller guarantees this is an unfreed handle we allocated.
    drop(unsafe { Box::from_raw(labels) });
}

/// Score a detection directory against a ground-truth directory (mAP at IoU
/// 0.5) and write the score to `out_map`. Directory layout: `<stem>.txt`
/// ground-truth files beside `<stem>.det.txt` detection files.
///
/// # Safety
/// `gt_dir` and `det_dir` must be valid NUL-terminated strings; `out_map`
/// must be a valid pointer to writable memory for one `double`.
#[no_mangle]
pub unsafe extern "C" fn detbench_eval_dirs(
    gt_dir: *const c_char,
    det_dir: *const c_char,
    out_map: *mut f64,
) -> DetbenchStatus {
    if gt_dir.is_null() || det_dir.is_null() || out_map.is_null() {
        return fail(DetbenchStatus::NullPointer, "gt_dir, det_dir, or out_map is NULL");
    }
    let to_path = |p: *const c_char, name: &str| -> Result<&Path, DetbenchStatus> {
        // SAFETY: caller guarantees valid NUL-terminated strings.
        match unsafe { CStr::from_ptr(p) }.to_str() {
            Ok(s) => Ok(Path::new(s)),
            Err(e) => Err(fail(DetbenchStatus::InvalidArgument, format!("{name} is not UTF-8: {e}"))),
        }
    };
    let gt = match to_path(gt_dir, "gt_dir") {
        Ok(p) => p,
        Err(status) => return status,
    };
    let det = match to_path(det_dir, "det_dir") {
        Ok(p) => p,
        Err(status) => return status,
    };
    match evaluate_dirs(gt, det) {
        Ok(map) => {
            // SAFETY: non-null checked above; caller guarantees validity.
            unsafe { *out_map = map };
            DetbenchStatus::Ok
        }
        Err(e) => {
            let status = eval_status(&e);
            fail(status, e)
        }
    }
}

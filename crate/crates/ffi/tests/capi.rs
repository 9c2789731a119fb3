//! Exercises the C ABI exactly as a foreign caller would: raw pointers,
//! NUL-terminated strings, status codes, and the generated header.

use std::ffi::{CStr, CString};
use std::ptr;

use detbench_ffi::*;

fn last_error_text() -> Option<String> {
    let p = detbench_last_error();
    if p.is_null() {
        return None;
    }
    Some(unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned())
}

#[test]
fn version_is_a_static_semverish_string() {
    let p = detbench_version();
    assert!(!p.is_null());
    let v = unsafe { CStr::from_ptr(p) }.to_str().unwrap();
    assert_eq!(v.split('.').count(), 3, "version {v:?}");
}

#[test]
fn derive_seed_matches_library() {
    assert_eq!(detbench_derive_seed(42, 7), detbench::seed::derive_seed(42, 7));
    assert_ne!(detbench_derive_seed(42, 7), detbench_derive_seed(42, 8));
}

#[test]
fn possible_fps_arithmetic() {
    assert!((detbench_possible_fps(157.1) - 6.3653).abs() < 1e-3);
    assert!(detbench_possible_fps(0.0).is_infinite());
    assert!(detbench_possible_fps(-3.0).is_infinite());
}

#[test]
fn iou_identity_disjoint_and_errors() {
    let mut out = -1.0f64;
    let status = unsafe {
        detbench_iou(0.5, 0.5, 0.2, 0.2, 0.5, 0.5, 0.2, 0.2, &mut out)
    };
    assert_eq!(status, DetbenchStatus::Ok);
    assert!((out - 1.0).abs() < 1e-12);

    let status = unsafe {
        detbench_iou(0.2, 0.2, 0.1, 0.1, 0.8, 0.8, 0.1, 0.1, &mut out)
    };
    assert_eq!(status, DetbenchStatus::Ok);
    assert_eq!(out, 0.0);

    // zero-width box is rejected and reports a message
    let status = unsafe {
        detbench_iou(0.5, 0.5, 0.0, 0.2, 0.5, 0.5, 0.2, 0.2, &mut out)
    };
    assert_eq!(status, DetbenchStatus::InvalidArgument);
    let msg = last_error_text().expect("error message set");
    assert!(msg.contains("box a"), "message: {msg}");

    let status = unsafe {
        detbench_iou(0.5, 0.5, 0.2, 0.2, 0.5, 0.5, 0.2, 0.2, ptr::null_mut())
    };
    assert_eq!(status, DetbenchStatus::NullPointer);
}

#[test]
fn aggregate_reproduces_published_row() {
    let (mut avg, mut diff) = (0.0f64, 0.0f64);
    let status = unsafe { detbench_aggregate(0.940, 0.828, &mut avg, &mut diff) };
    assert_eq!(status, DetbenchStatus::Ok);
    assert!((avg - 0.884).abs() <= 0.0005 + 1e-9, "avg {avg}");
    assert!((diff - 0.112).abs() <= 0.0005 + 1e-9, "diff {diff}");

    let status = unsafe { detbench_aggregate(1.5, 0.5, &mut avg, &mut diff) };
    assert_eq!(status, DetbenchStatus::InvalidArgument);
}

#[test]
fn labels_round_trip_through_the_handle() {
    let text = CString::new("0 0.500000 0.250000 0.200000 0.100000\n3 0.125 0.75 0.05 0.25").unwrap();
    let mut handle: *mut DetbenchLabels = ptr::null_mut();
    let status = unsafe { detbench_labels_parse(text.as_ptr(), 640, 480, &mut handle) };
    assert_eq!(status, DetbenchStatus::Ok);
    assert!(!handle.is_null());
    assert_eq!(unsafe { detbench_labels_len(handle) }, 2);

    let (mut class, mut cx, mut cy, mut w, mut h) = (0u32, 0.0, 0.0, 0.0, 0.0);
    let status = unsafe {
        detbench_labels_get(handle, 1, &mut class, &mut cx, &mut cy, &mut w, &mut h)
    };
    assert_eq!(status, DetbenchStatus::Ok);
    assert_eq!(class, 3);
    assert!((cx - 0.125).abs() < 1e-12);
    assert!((h - 0.25).abs() < 1e-12);

    let status = unsafe {
        detbench_labels_get(handle, 2, &mut class, &mut cx, &mut cy, &mut w, &mut h)
    };
    assert_eq!(status, DetbenchStatus::OutOfBounds);
    let msg = last_error_text().expect("error message set");
    assert!(msg.contains("index 2"), "message: {msg}");

    unsafe { detbench_labels_free(handle) };
    unsafe { detbench_labels_free(ptr::null_mut()) }; // NULL is a no-op
}

#[test]
fn labels_parse_rejects_garbage_with_line_info() {
    let text = CString::new("0 0.5 0.5 0.2 0.2\nnot a label line").unwrap();
    let mut handle: *mut DetbenchLabels = ptr::null_mut();
    let status = unsafe { detbench_labels_parse(text.as_ptr(), 64, 64, &mut handle) };
    assert_eq!(status, DetbenchStatus::ParseError);
    assert!(handle.is_null());
    let msg = last_error_text().expect("error message set");
    assert!(msg.contains('2'), "line number missing from: {msg}");

    assert_eq!(unsafe { detbench_labels_len(ptr::null()) }, 0);
    let status =
        unsafe { detbench_labels_parse(ptr::null(), 64, 64, &mut handle) };
    assert_eq!(status, DetbenchStatus::NullPointer);
}

#[test]
fn eval_dirs_scores_the_ap_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let gt_dir = dir.path().join("gt");
    let det_dir = dir.path().join("det");
    std::fs::create_dir_all(&gt_dir).unwrap();
    std::fs::create_dir_all(&det_dir).unwrap();
    // two ground truths; three detections: hit at 0.9, miss at 0.8, hit at 0.7
    std::fs::write(
        gt_dir.join("img.txt"),
        "0 0.300000 0.300000 0.200000 0.200000\n0 0.700000 0.700000 0.200000 0.200000",
    )
    .unwrap();
    std::fs::write(
        det_dir.join("img.det.txt"),
        "0 0.300000 0.300000 0.200000 0.200000 0.900000\n\
         0 0.500000 0.100000 0.100000 0.100000 0.800000\n\
         0 0.700000 0.700000 0.200000 0.200000 0.700000",
    )
    .unwrap();

    let gt_c = CString::new(gt_dir.to_str().unwrap()).unwrap();
    let det_c = CString::new(det_dir.to_str().unwrap()).unwrap();
    let mut map = 0.0f64;
    let status = unsafe { detbench_eval_dirs(gt_c.as_ptr(), det_c.as_ptr(), &mut map) };
    assert_eq!(status, DetbenchStatus::Ok);
    assert!((map - 5.0 / 6.0).abs() < 1e-12, "mAP {map}");

    // empty ground truth directory -> AP undefined
    let empty_gt = dir.path().join("empty_gt");
    let empty_det = dir.path().join("empty_det");
    std::fs::create_dir_all(&empty_gt).unwrap();
    std::fs::create_dir_all(&empty_det).unwrap();
    let gt_c = CString::new(empty_gt.to_str().unwrap()).unwrap();
    let det_c = CString::new(empty_det.to_str().unwrap()).unwrap();
    let status = unsafe { detbench_eval_dirs(gt_c.as_ptr(), det_c.as_ptr(), &mut map) };
    assert_eq!(status, DetbenchStatus::UndefinedAp);

    // missing directory -> IoError
    let gone = CString::new(dir.path().join("missing").to_str().unwrap()).unwrap();
    let status = unsafe { detbench_eval_dirs(gone.as_ptr(), det_c.as_ptr(), &mut map) };
    assert_eq!(status, DetbenchStatus::IoError);
}

#[test]
fn generated_header_covers_the_surface() {
    let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("include")
        .join("detbench.h");
    let text = std::fs::read_to_string(&header)
        .unwrap_or_else(|e| panic!("{} should be generated by the build script: {e}", header.display()));
    for symbol in [
        "detbench_version",
        "detbench_last_error",
        "detbench_iou",
        "detbench_aggregate",
        "detbench_labels_parse",
        "detbench_labels_len",
        "detbench_labels_get",
        "detbench_labels_free",
        "detbench_eval_dirs",
        "detbench_possible_fps",
        "detbench_derive_seed",
        "DetbenchLabels",
        "DETBENCH_STATUS_OK",
    ] {
        assert!(text.contains(symbol), "header is missing {symbol}");
    }
}

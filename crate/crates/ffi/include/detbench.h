#ifndef DETBENCH_H
#define DETBENCH_H

/* Generated by cbindgen from the detbench-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of a detbench call. Zero means success; anything else is a failure
// whose detail is available from [`detbench_last_error`].
typedef enum DetbenchStatus {
  DETBENCH_STATUS_OK = 0,
  // A required pointer argument was NULL.
  DETBENCH_STATUS_NULL_POINTER = 1,
  // An argument value was rejected (bad box geometry, range, or UTF-8).
  DETBENCH_STATUS_INVALID_ARGUMENT = 2,
  // Text input could not be parsed.
  DETBENCH_STATUS_PARSE_ERROR = 3,
  // The filesystem said no.
  DETBENCH_STATUS_IO_ERROR = 4,
  // Average precision is undefined (no ground-truth boxes).
  DETBENCH_STATUS_UNDEFINED_AP = 5,
  // An index was out of range.
  DETBENCH_STATUS_OUT_OF_BOUNDS = 6,
} DetbenchStatus;

// Parsed ground-truth label set. Opaque: create with
// [`detbench_labels_parse`], inspect with [`detbench_labels_len`] /
// [`detbench_labels_get`], release with [`detbench_labels_free`].
typedef struct DetbenchLabels DetbenchLabels;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing this thread's most recent detbench failure, or NULL if
// none has occurred yet. The pointer stays valid until the next failing
// detbench call on the same thread.
const char *detbench_last_error(void);

// Library version as a static NUL-terminated string; never freed.
const char *detbench_version(void);

// Derive the decorrelated child seed for `(master, index)`; pure function,
// identical to the library's internal stream derivation.
uint64_t detbench_derive_seed(uint64_t master, uint64_t index);

// Possible frames per second for a mean total per-frame latency in
// milliseconds: `1000 / mean_total_ms`, or +infinity when the mean is zero
// or negative.
double detbench_possible_fps(double mean_total_ms);

// Intersection-over-union of two normalized center-format boxes
// `(cx, cy, w, h)`, written to `out_iou`.
//
// # Safety
// `out_iou` must be a valid pointer to writable memory for one `double`.
enum DetbenchStatus detbench_iou(double a_cx,
                                 double a_cy,
                                 double a_w,
                                 double a_h,
                                 double b_cx,
                                 double b_cy,
                                 double b_w,
                                 double b_h,
                                 double *out_iou);

// Mean and absolute gap of two AP scores in `[0, 1]`, written to `out_avg`
// and `out_diff`.
//
// # Safety
// `out_avg` and `out_diff` must be valid pointers to writable memory for one
// `double` each.
enum DetbenchStatus detbench_aggregate(double test_normal_ap,
                                       double test_difficult_ap,
                                       double *out_avg,
                                       double *out_diff);

// Parse label text (`class cx cy w h` per line, normalized coordinates) for
// an `image_w` × `image_h` image and store a new handle in `out_labels`.
//
// # Safety
// `text` must be a valid NUL-terminated string. `out_labels` must be a valid
// pointer to writable memory for one pointer; on success it receives a
// handle that must be released with [`detbench_labels_free`].
enum DetbenchStatus detbench_labels_parse(const char *text,
                                          uint32_t image_w,
                                          uint32_t image_h,
                                          struct DetbenchLabels **out_labels);

// Number of boxes in the handle; 0 for NULL.
//
// # Safety
// `labels` must be NULL or a handle from [`detbench_labels_parse`] that has
// not been freed.
size_t detbench_labels_len(const struct DetbenchLabels *labels);

// Copy box `index` out of the handle: class id and normalized center-format
// geometry.
//
// # Safety
// `labels` must be a live handle from [`detbench_labels_parse`]. Each `out_*`
// pointer must be valid for one write of its type.
enum DetbenchStatus detbench_labels_get(const struct DetbenchLabels *labels,
                                        size_t index,
                                        uint32_t *out_class,
                                        double *out_cx,
                                        double *out_cy,
                                        double *out_w,
                                        double *out_h);

// Release a handle from [`detbench_labels_parse`]. NULL is a no-op. Passing
// the same handle twice is undefined behavior.
//
// # Safety
// `labels` must be NULL or a handle from [`detbench_labels_parse`] that has
// not already been freed.
void detbench_labels_free(struct DetbenchLabels *labels);

// Score a detection directory against a ground-truth directory (mAP at IoU
// 0.5) and write the score to `out_map`. Directory layout: `<stem>.txt`
// ground-truth files beside `<stem>.det.txt` detection files.
//
// # Safety
// `gt_dir` and `det_dir` must be valid NUL-terminated strings; `out_map`
// must be a valid pointer to writable memory for one `double`.
enum DetbenchStatus detbench_eval_dirs(const char *gt_dir, const char *det_dir, double *out_map);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DETBENCH_H */

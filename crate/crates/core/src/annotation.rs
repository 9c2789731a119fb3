//! Canonical geometric types, annotation file formats, and IoU.
//!
//! Boxes are stored in the normalized center format (`cx cy w h`, all fractions
//! of the image size) that the label files use; pixel rectangles exist only
//! transiently for geometry. A [`PixelBox`] is a **half-open** rectangle
//! `[x0,x1) × [y0,y1)` — its area is `(x1−x0)·(y1−y0)` — which pins down IoU
//! behavior at 1-px scale instead of leaving it to convention.
//!
//! Label files are UTF-8 text with LF line endings, one `class cx cy w h` line
//! per object, serialized at 6 decimal places (sub-pixel for any image up to
//! ~1e6 px wide). Detection files carry a trailing confidence field. Both
//! round-trip byte-stably after one write→parse→write cycle.

use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for float noise at the `[0,1]` borders: values outside by no more
/// than this are clamped at parse time; anything further out is an error.
pub const EPS: f64 = 1e-6;

/// Errors raised by annotation parsing, serialization, and geometry.
#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("line {line}: expected {expected} fields, found {found}")]
    FieldCount {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: field {field:?} is not a number: {value:?}")]
    NotANumber {
        line: usize,
        field: &'static str,
        value: String,
    },
    #[error("line {line}: field {field:?} value {value} outside [0,1]")]
    OutOfRange {
        line: usize,
        field: &'static str,
        value: f64,
    },
    #[error("line {line}: degenerate box (zero area)")]
    DegenerateBox { line: usize },
    #[error("invalid bounding box ({cx}, {cy}, {w}, {h}): {reason}")]
    InvalidBox {
        cx: f64,
        cy: f64,
        w: f64,
        h: f64,
        reason: &'static str,
    },
    #[error("invalid pixel rectangle ({x0}, {y0}, {x1}, {y1}): {reason}")]
    InvalidRect {
        x0: f64,
        y0: f64,
        x1: f64,
        y1: f64,
        reason: &'static str,
    },
    #[error("invalid image dimensions {width}x{height}")]
    BadDimensions { width: u32, height: u32 },
}

/// Axis-aligned box in normalized center format; all fields are fractions of
/// the image extent. Invariant: the box lies within the unit square within
/// [`EPS`] and has positive width and height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    /// Validate and construct. Values straddling the `[0,1]` borders by no
    /// more than [`EPS`] are nudged back inside; anything further out fails.
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self, AnnotationError> {
        let err = |reason| AnnotationError::InvalidBox { cx, cy, w, h, reason };
        for v in [cx, cy, w, h] {
            if !v.is_finite() {
                return Err(err("non-finite field"));
            }
        }
        if w <= 0.0 || h <= 0.0 {
            return Err(err("width and height must be positive"));
        }
        let clamp01 = |v: f64| v.clamp(0.0, 1.0);
        let within = |v: f64| (-EPS..=1.0 + EPS).contains(&v);
        if !(within(cx) && within(cy) && within(w) && within(h)) {
            return Err(err("field outside [0,1] beyond tolerance"));
        }
        let (cx, cy, w, h) = (clamp01(cx), clamp01(cy), clamp01(w), clamp01(h));
        if w == 0.0 || h == 0.0 {
            return Err(err("zero-area box after clamping"));
        }
        if cx - w / 2.0 < -EPS || cx + w / 2.0 > 1.0 + EPS || cy - h / 2.0 < -EPS || cy + h / 2.0 > 1.0 + EPS {
            return Err(err("box extends past the unit square beyond tolerance"));
        }
        Ok(Self { cx, cy, w, h })
    }

    /// Convert to pixel coordinates for an image of `width`×`height` px.
    pub fn to_pixel(&self, width: u32, height: u32) -> Result<PixelBox, AnnotationError> {
        if width == 0 || height == 0 {
            return Err(AnnotationError::BadDimensions { width, height });
        }
        let (w, h) = (f64::from(width), f64::from(height));
        PixelBox::new(
            (self.cx - self.w / 2.0) * w,
            (self.cy - self.h / 2.0) * h,
            (self.cx + self.w / 2.0) * w,
            (self.cy + self.h / 2.0) * h,
        )
    }

    /// Inverse of [`BoundingBox::to_pixel`].
    pub fn from_pixel(rect: &PixelBox, width: u32, height: u32) -> Result<Self, AnnotationError> {
        if width == 0 || height == 0 {
            return Err(AnnotationError::BadDimensions { width, height });
        }
        let (w, h) = (f64::from(width), f64::from(height));
        Self::new(
            (rect.x0 + rect.x1) / 2.0 / w,
            (rect.y0 + rect.y1) / 2.0 / h,
            (rect.x1 - rect.x0) / w,
            (rect.y1 - rect.y0) / h,
        )
    }
}

/// Half-open pixel rectangle `[x0,x1) × [y0,y1)`. Coordinates are floats so
/// that normalized↔pixel conversion is exactly invertible; the compositor only
/// ever samples whole-pixel rectangles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl PixelBox {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self, AnnotationError> {
        let err = |reason| AnnotationError::InvalidRect { x0, y0, x1, y1, reason };
        if ![x0, y0, x1, y1].iter().all(|v| v.is_finite()) {
            return Err(err("non-finite coordinate"));
        }
        if x0 < 0.0 || y0 < 0.0 {
            return Err(err("negative origin"));
        }
        if x0 >= x1 || y0 >= y1 {
            return Err(err("zero or negative area"));
        }
        Ok(Self { x0, y0, x1, y1 })
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }
}

/// Intersection-over-union of two half-open rectangles. Symmetric, in `[0,1]`,
/// and `0` for disjoint or merely touching boxes.
pub fn iou(a: &PixelBox, b: &PixelBox) -> f64 {
    let iw = (a.x1.min(b.x1) - a.x0.max(b.x0)).max(0.0);
    let ih = (a.y1.min(b.y1) - a.y0.max(b.y0)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// An annotated object: single-class data uses `class_id` 0 throughout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub class_id: u32,
    pub bbox: BoundingBox,
}

/// A scored prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub class_id: u32,
    pub bbox: BoundingBox,
    pub confidence: f64,
}

/// Provenance of an image within an inventory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OriginTag {
    RealNormal,
    RealDifficult,
    GenReal,
    GenRender,
    BackgroundOnly,
}

impl OriginTag {
    pub const ALL: [OriginTag; 5] = [
        OriginTag::RealNormal,
        OriginTag::RealDifficult,
        OriginTag::GenReal,
        OriginTag::GenRender,
        OriginTag::BackgroundOnly,
    ];

    /// The directory / manifest name of the tag (`real-normal`, `gen-real`, …).
    pub fn as_str(&self) -> &'static str {
        match self {
            OriginTag::RealNormal => "real-normal",
            OriginTag::RealDifficult => "real-difficult",
            OriginTag::GenReal => "gen-real",
            OriginTag::GenRender => "gen-render",
            OriginTag::BackgroundOnly => "background-only",
        }
    }

    pub fn from_str_tag(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

impl std::fmt::Display for OriginTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One image of a dataset inventory: where it lives, its size, its objects,
/// and where it came from. `background-only` entries carry no ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageEntry {
    pub path: PathBuf,
    pub width: u32,
    pub height: u32,
    pub origin: OriginTag,
    pub ground_truths: Vec<GroundTruth>,
}

fn parse_field(line_no: usize, field: &'static str, token: &str) -> Result<f64, AnnotationError> {
    token.parse::<f64>().map_err(|_| AnnotationError::NotANumber {
        line: line_no,
        field,
        value: token.to_string(),
    })
}

/// Parse one normalized fraction, clamping border noise within [`EPS`].
fn parse_fraction(line_no: usize, field: &'static str, token: &str) -> Result<f64, AnnotationError> {
    let v = parse_field(line_no, field, token)?;
    if !v.is_finite() || !(-EPS..=1.0 + EPS).contains(&v) {
        return Err(AnnotationError::OutOfRange { line: line_no, field, value: v });
    }
    Ok(v.clamp(0.0, 1.0))
}

/// Build a box from parsed fields, clipping it to the unit square when it
/// spills past a border (partially visible objects) and rejecting zero-area
/// results. Values already inside pass through untouched so that round-trips
/// stay byte-stable.
fn box_from_fields(line_no: usize, cx: f64, cy: f64, w: f64, h: f64) -> Result<BoundingBox, AnnotationError> {
    if w == 0.0 || h == 0.0 {
        return Err(AnnotationError::DegenerateBox { line: line_no });
    }
    let (mut cx, mut cy, mut w, mut h) = (cx, cy, w, h);
    let (x0, x1) = (cx - w / 2.0, cx + w / 2.0);
    if x0 < 0.0 || x1 > 1.0 {
        let (cx0, cx1) = (x0.max(0.0), x1.min(1.0));
        cx = (cx0 + cx1) / 2.0;
        w = cx1 - cx0;
    }
    let (y0, y1) = (cy - h / 2.0, cy + h / 2.0);
    if y0 < 0.0 || y1 > 1.0 {
        let (cy0, cy1) = (y0.max(0.0), y1.min(1.0));
        cy = (cy0 + cy1) / 2.0;
        h = cy1 - cy0;
    }
    if w <= 0.0 || h <= 0.0 {
        return Err(AnnotationError::DegenerateBox { line: line_no });
    }
    BoundingBox::new(cx, cy, w, h)
}

fn parse_class(line_no: usize, token: &str) -> Result<u32, AnnotationError> {
    token.parse::<u32>().map_err(|_| AnnotationError::NotANumber {
        line: line_no,
        field: "class",
        value: token.to_string(),
    })
}

fn check_dims(width: u32, height: u32) -> Result<(), AnnotationError> {
    if width == 0 || height == 0 {
        return Err(AnnotationError::BadDimensions { width, height });
    }
    Ok(())
}

/// Parse a label file (`class cx cy w h` per line) for an image of the given
/// pixel dimensions. Blank lines are skipped; order is preserved; errors name
/// the offending 1-based line.
pub fn parse_label_file(text: &str, image_w: u32, image_h: u32) -> Result<Vec<GroundTruth>, AnnotationError> {
    check_dims(image_w, image_h)?;
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(AnnotationError::FieldCount { line: line_no, expected: 5, found: fields.len() });
        }
        let class_id = parse_class(line_no, fields[0])?;
        let cx = parse_fraction(line_no, "cx", fields[1])?;
        let cy = parse_fraction(line_no, "cy", fields[2])?;
        let w = parse_fraction(line_no, "w", fields[3])?;
        let h = parse_fraction(line_no, "h", fields[4])?;
        out.push(GroundTruth { class_id, bbox: box_from_fields(line_no, cx, cy, w, h)? });
    }
    Ok(out)
}

/// Parse a detection file (`class cx cy w h confidence` per line).
pub fn parse_detection_file(text: &str, image_w: u32, image_h: u32) -> Result<Vec<Detection>, AnnotationError> {
    check_dims(image_w, image_h)?;
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(AnnotationError::FieldCount { line: line_no, expected: 6, found: fields.len() });
        }
        let class_id = parse_class(line_no, fields[0])?;
        let cx = parse_fraction(line_no, "cx", fields[1])?;
        let cy = parse_fraction(line_no, "cy", fields[2])?;
        let w = parse_fraction(line_no, "w", fields[3])?;
        let h = parse_fraction(line_no, "h", fields[4])?;
        let confidence = parse_fraction(line_no, "confidence", fields[5])?;
        out.push(Detection {
            class_id,
            bbox: box_from_fields(line_no, cx, cy, w, h)?,
            confidence,
        });
    }
    Ok(out)
}

fn validate_for_write(gt_like: &BoundingBox) -> Result<(), AnnotationError> {
    // Re-run the constructor checks so hand-built boxes cannot sneak invalid
    // values into files.
    BoundingBox::new(gt_like.cx, gt_like.cy, gt_like.w, gt_like.h).map(|_| ())
}

/// Serialize ground truths to label-file text: one line per box, 6 decimals,
/// LF separators, no trailing newline.
pub fn write_label_file(gts: &[GroundTruth]) -> Result<String, AnnotationError> {
    let mut out = String::new();
    for (i, gt) in gts.iter().enumerate() {
        validate_for_write(&gt.bbox)?;
        if i > 0 {
            out.push('\n');
        }
        let b = &gt.bbox;
        write!(out, "{} {:.6} {:.6} {:.6} {:.6}", gt.class_id, b.cx, b.cy, b.w, b.h).expect("string write");
    }
    Ok(out)
}

/// Serialize detections: label format plus a trailing confidence field.
pub fn write_detection_file(dets: &[Detection]) -> Result<String, AnnotationError> {
    let mut out = String::new();
    for (i, det) in dets.iter().enumerate() {
        validate_for_write(&det.bbox)?;
        if !(0.0..=1.0).contains(&det.confidence) {
            return Err(AnnotationError::OutOfRange {
                line: i + 1,
                field: "confidence",
                value: det.confidence,
            });
        }
        if i > 0 {
            out.push('\n');
        }
        let b = &det.bbox;
        write!(
            out,
            "{} {:.6} {:.6} {:.6} {:.6} {:.6}",
            det.class_id, b.cx, b.cy, b.w, b.h, det.confidence
        )
        .expect("string write");
    }
    Ok(out)
}

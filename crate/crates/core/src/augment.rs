//! Six seeded distortion kernels — autocontrast, illumination gradient,
//! motion blur, defocus, chromatic aberration, ISO noise — plus a
//! probability-gated driver that applies a configured subset to an image.
//!
//! Determinism contract: [`apply_spec`] is a pure function of
//! `(image, config, seed)`. Kernel `i` in the configured list draws all of its
//! randomness (the application coin flip, then parameters in documented
//! order) from a dedicated stream derived from `(seed, i)`, so toggling one
//! kernel never shifts another kernel's draws.
//!
//! None of the kernels moves image content globally (chromatic aberration
//! rescales single channels by a fraction of a pixel), so bounding-box
//! annotations remain valid unchanged.

use image::RgbImage;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::bilinear_sample_channel;
use crate::seed::rng_for;

pub const DEFAULT_PROBABILITY: f64 = 0.2;

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("{kernel}: invalid parameter: {reason}")]
    InvalidParam { kernel: &'static str, reason: String },
    #[error("invalid augmentation spec: {reason}")]
    InvalidSpec { reason: String },
    #[error("augmentation config: {0}")]
    Config(String),
}

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

/// Per-channel contrast stretch. The darkest and brightest `cutoff_fraction`
/// of pixels are ignored when picking the (low, high) levels, then `[low,
/// high]` is remapped linearly onto `[0, 255]`. A constant channel (or one
/// where the cut makes low ≥ high) passes through unchanged. Cutoff 0 is
/// idempotent.
pub fn autocontrast(image: &RgbImage, cutoff_fraction: f64) -> Result<RgbImage, AugmentError> {
    if !(0.0..0.5).contains(&cutoff_fraction) {
        return Err(AugmentError::InvalidParam {
            kernel: "autocontrast",
            reason: format!("cutoff_fraction {cutoff_fraction} outside [0, 0.5)"),
        });
    }
    let n_pixels = u64::from(image.width()) * u64::from(image.height());
    let cut = (cutoff_fraction * n_pixels as f64).floor() as u64;

    let mut out = image.clone();
    for channel in 0..3 {
        let mut hist = [0u64; 256];
        for p in image.pixels() {
            hist[p.0[channel] as usize] += 1;
        }
        let mut low = 0usize;
        let mut cum = 0u64;
        for (v, &count) in hist.iter().enumerate() {
            cum += count;
            if cum > cut {
                low = v;
                break;
            }
        }
        let mut high = 255usize;
        let mut cum = 0u64;
        for (v, &count) in hist.iter().enumerate().rev() {
            cum += count;
            if cum > cut {
                high = v;
                break;
            }
        }
        if low >= high {
            continue;
        }
        let span = (high - low) as f64;
        let mut lut = [0u8; 256];
        for (v, entry) in lut.iter_mut().enumerate() {
            let clamped = v.clamp(low, high);
            *entry = (255.0 * (clamped - low) as f64 / span).round() as u8;
        }
        for p in out.pixels_mut() {
            p.0[channel] = lut[p.0[channel] as usize];
        }
    }
    Ok(out)
}

/// Multiply brightness by a linear ramp running from `1 − strength` to
/// `1 + strength` along `angle` (radians; 0 = left→right). Every channel is
/// scaled by the same per-pixel gain, so luminance follows the ramp.
pub fn illumination(image: &RgbImage, angle: f64, strength: f64) -> Result<RgbImage, AugmentError> {
    if !(0.0..=1.0).contains(&strength) {
        return Err(AugmentError::InvalidParam {
            kernel: "illumination",
            reason: format!("strength {strength} outside [0, 1]"),
        });
    }
    let (w, h) = image.dimensions();
    let (dx, dy) = (angle.cos(), angle.sin());
    let corners = [
        (0.0, 0.0),
        (f64::from(w - 1), 0.0),
        (0.0, f64::from(h - 1)),
        (f64::from(w - 1), f64::from(h - 1)),
    ];
    let projections: Vec<f64> = corners.iter().map(|(x, y)| x * dx + y * dy).collect();
    let pmin = projections.iter().cloned().fold(f64::INFINITY, f64::min);
    let pmax = projections.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = pmax - pmin;

    let mut out = image.clone();
    for (x, y, p) in out.enumerate_pixels_mut() {
        let proj = f64::from(x) * dx + f64::from(y) * dy;
        let t = if span > 0.0 { (proj - pmin) / span } else { 0.5 };
        let gain = (1.0 - strength) + 2.0 * strength * t;
        for c in p.0.iter_mut() {
            *c = (f64::from(*c) * gain).round().clamp(0.0, 255.0) as u8;
        }
    }
    Ok(out)
}

/// Rasterize a 1×`length` line at `angle` into a dense square kernel
/// (half-width `(length−1)/2`) by bilinearly splatting `length` unit-spaced
/// points, each carrying weight `1/length`. Entries are non-negative and sum
/// to 1. Returns `(weights, side)` with `weights.len() == side²`.
pub fn motion_blur_kernel(length: u32, angle: f64) -> Result<(Vec<f64>, usize), AugmentError> {
    if length < 3 || length.is_multiple_of(2) {
        return Err(AugmentError::InvalidParam {
            kernel: "motion-blur",
            reason: format!("length {length} must be odd and >= 3"),
        });
    }
    let r = ((length - 1) / 2) as i64;
    let side = (2 * r + 1) as usize;
    let mut weights = vec![0.0f64; side * side];
    let (dx, dy) = (angle.cos(), angle.sin());
    let w_point = 1.0 / f64::from(length);
    for k in -r..=r {
        let px = k as f64 * dx;
        let py = k as f64 * dy;
        let x0 = px.floor();
        let y0 = py.floor();
        let fx = px - x0;
        let fy = py - y0;
        for (ox, oy, wgt) in [
            (0i64, 0i64, (1.0 - fx) * (1.0 - fy)),
            (1, 0, fx * (1.0 - fy)),
            (0, 1, (1.0 - fx) * fy),
            (1, 1, fx * fy),
        ] {
            if wgt == 0.0 {
                continue;
            }
            let gx = x0 as i64 + ox + r;
            let gy = y0 as i64 + oy + r;
            debug_assert!((0..side as i64).contains(&gx) && (0..side as i64).contains(&gy));
            weights[(gy as usize) * side + gx as usize] += wgt * w_point;
        }
    }
    Ok((weights, side))
}

/// Linear motion blur: convolve with [`motion_blur_kernel`], reflecting at
/// the borders. Constant images are fixed points.
pub fn motion_blur(image: &RgbImage, length: u32, angle: f64) -> Result<RgbImage, AugmentError> {
    let (weights, side) = motion_blur_kernel(length, angle)?;
    Ok(convolve_reflect(image, &weights, side))
}

/// Normalized disk kernel of integer radius `r`: cell (dx, dy) participates
/// iff dx² + dy² ≤ r², all participants equally weighted.
pub fn defocus_kernel(radius: u32) -> Result<(Vec<f64>, usize), AugmentError> {
    if radius < 1 {
        return Err(AugmentError::InvalidParam {
            kernel: "defocus",
            reason: "radius must be >= 1".into(),
        });
    }
    let r = radius as i64;
    let side = (2 * r + 1) as usize;
    let mut members = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r * r {
                members.push(((dy + r) as usize) * side + (dx + r) as usize);
            }
        }
    }
    let w = 1.0 / members.len() as f64;
    let mut weights = vec![0.0f64; side * side];
    for idx in members {
        weights[idx] = w;
    }
    Ok((weights, side))
}

/// Out-of-focus blur: convolve with [`defocus_kernel`], reflecting at the
/// borders.
pub fn defocus(image: &RgbImage, radius: u32) -> Result<RgbImage, AugmentError> {
    let (weights, side) = defocus_kernel(radius)?;
    Ok(convolve_reflect(image, &weights, side))
}

/// Lateral chromatic aberration: magnify the red channel about the image
/// center by `1 + shift/max(w,h)` and shrink the blue channel by
/// `1 − shift/max(w,h)`; green is untouched. `shift` is in pixels of
/// edge displacement. Bilinear resampling, clamped at the edges.
pub fn chromatic_aberration(image: &RgbImage, shift: f64) -> Result<RgbImage, AugmentError> {
    let (w, h) = image.dimensions();
    let longest = f64::from(w.max(h));
    if shift.is_nan() || shift < 0.0 || shift >= longest {
        return Err(AugmentError::InvalidParam {
            kernel: "chromatic-aberration",
            reason: format!("shift {shift} must be in [0, max(w,h) = {longest})"),
        });
    }
    if shift == 0.0 {
        return Ok(image.clone());
    }
    let mut out = image.clone();
    let cx = f64::from(w - 1) / 2.0;
    let cy = f64::from(h - 1) / 2.0;
    for (channel, factor) in [(0usize, 1.0 + shift / longest), (2usize, 1.0 - shift / longest)] {
        for y in 0..h {
            for x in 0..w {
                let sx = cx + (f64::from(x) - cx) / factor;
                let sy = cy + (f64::from(y) - cy) / factor;
                let v = bilinear_sample_channel(image, channel, sx, sy);
                out.get_pixel_mut(x, y).0[channel] = v.round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    Ok(out)
}

/// Sensor noise: per pixel, one zero-mean Gaussian luminance offset with std
/// `intensity × 255` shared by all channels, plus an independent per-channel
/// offset with std `color_shift × 255`; clamp to [0, 255].
///
/// Exactly four normal draws happen per pixel (luminance, then R, G, B) in
/// row-major order regardless of the sigma values, so the rng stream is a
/// stable function of image size alone.
pub fn iso_noise(
    image: &RgbImage,
    color_shift: f64,
    intensity: f64,
    rng: &mut ChaCha8Rng,
) -> Result<RgbImage, AugmentError> {
    if color_shift.is_nan() || color_shift < 0.0 || intensity.is_nan() || intensity < 0.0 {
        return Err(AugmentError::InvalidParam {
            kernel: "iso-noise",
            reason: format!("sigmas ({color_shift}, {intensity}) must be >= 0"),
        });
    }
    use rand_distr::StandardNormal;
    let mut out = image.clone();
    for p in out.pixels_mut() {
        let n_lum: f64 = rng.sample(StandardNormal);
        let lum_delta = n_lum * intensity * 255.0;
        for c in p.0.iter_mut() {
            let n_col: f64 = rng.sample(StandardNormal);
            let v = f64::from(*c) + lum_delta + n_col * color_shift * 255.0;
            *c = v.round().clamp(0.0, 255.0) as u8;
        }
    }
    Ok(out)
}

/// Convenience wrapper seeding its own stream.
pub fn iso_noise_seeded(
    image: &RgbImage,
    color_shift: f64,
    intensity: f64,
    seed: u64,
) -> Result<RgbImage, AugmentError> {
    let mut rng = rng_for(seed, 0);
    iso_noise(image, color_shift, intensity, &mut rng)
}

/// Mirror-reflected index: -1 → 0, -2 → 1, n → n-1 …
fn reflect(i: i64, n: i64) -> i64 {
    debug_assert!(n > 0);
    let period = 2 * n;
    let j = i.rem_euclid(period);
    if j < n {
        j
    } else {
        period - 1 - j
    }
}

/// Dense square-kernel convolution with mirror borders. Zero-weight entries
/// are skipped, so sparse kernels (the rasterized motion line) stay cheap.
fn convolve_reflect(image: &RgbImage, weights: &[f64], side: usize) -> RgbImage {
    let (w, h) = image.dimensions();
    let r = (side / 2) as i64;
    let taps: Vec<(i64, i64, f64)> = weights
        .iter()
        .enumerate()
        .filter(|(_, &wgt)| wgt != 0.0)
        .map(|(idx, &wgt)| (((idx % side) as i64) - r, ((idx / side) as i64) - r, wgt))
        .collect();
    let mut out = RgbImage::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0.0f64; 3];
            for &(dx, dy, wgt) in &taps {
                let sx = reflect(i64::from(x) + dx, i64::from(w)) as u32;
                let sy = reflect(i64::from(y) + dy, i64::from(h)) as u32;
                let p = image.get_pixel(sx, sy).0;
                for c in 0..3 {
                    acc[c] += wgt * f64::from(p[c]);
                }
            }
            let px = out.get_pixel_mut(x, y);
            for (dst, &a) in px.0.iter_mut().zip(&acc) {
                *dst = a.round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Spec: ordered, probability-gated kernel list
// ---------------------------------------------------------------------------

/// Which kernel a spec entry drives, with its parameter ranges (inclusive).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    Autocontrast { cutoff: (f64, f64) },
    Illumination { strength: (f64, f64) },
    MotionBlur { length: (u32, u32) },
    Defocus { radius: (u32, u32) },
    ChromaticAberration { shift: (f64, f64) },
    IsoNoise { color_shift: (f64, f64), intensity: (f64, f64) },
}

impl KernelKind {
    pub fn id(&self) -> &'static str {
        match self {
            KernelKind::Autocontrast { .. } => "autocontrast",
            KernelKind::Illumination { .. } => "illumination",
            KernelKind::MotionBlur { .. } => "motion-blur",
            KernelKind::Defocus { .. } => "defocus",
            KernelKind::ChromaticAberration { .. } => "chromatic-aberration",
            KernelKind::IsoNoise { .. } => "iso-noise",
        }
    }
}

/// One entry of an [`AugmentationSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub enabled: bool,
    pub probability: f64,
    pub kind: KernelKind,
}

/// Ordered list of kernel configurations. Order matters twice: kernels apply
/// in list order, and entry `i` draws from the rng stream derived from
/// `(seed, i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationSpec {
    pub kernels: Vec<KernelConfig>,
}

impl Default for AugmentationSpec {
    /// All six kernels in canonical order at probability 0.2 with mild,
    /// flight-plausible parameter ranges.
    fn default() -> Self {
        let entry = |kind| KernelConfig { enabled: true, probability: DEFAULT_PROBABILITY, kind };
        AugmentationSpec {
            kernels: vec![
                entry(KernelKind::Autocontrast { cutoff: (0.0, 0.02) }),
                entry(KernelKind::Illumination { strength: (0.1, 0.3) }),
                entry(KernelKind::MotionBlur { length: (5, 9) }),
                entry(KernelKind::Defocus { radius: (2, 3) }),
                entry(KernelKind::ChromaticAberration { shift: (1.0, 3.0) }),
                entry(KernelKind::IsoNoise { color_shift: (0.01, 0.05), intensity: (0.01, 0.05) }),
            ],
        }
    }
}

fn odd_values_in(range: (u32, u32)) -> Vec<u32> {
    (range.0..=range.1).filter(|v| v % 2 == 1).collect()
}

impl AugmentationSpec {
    pub fn validate(&self) -> Result<(), AugmentError> {
        let fail = |reason: String| Err(AugmentError::InvalidSpec { reason });
        let mut seen = std::collections::HashSet::new();
        for cfg in &self.kernels {
            let id = cfg.kind.id();
            if !seen.insert(id) {
                return fail(format!("kernel {id:?} appears more than once"));
            }
            if !(0.0..=1.0).contains(&cfg.probability) {
                return fail(format!("{id}: probability {} outside [0,1]", cfg.probability));
            }
            let ordered = |lo: f64, hi: f64| lo <= hi && lo.is_finite() && hi.is_finite();
            match &cfg.kind {
                KernelKind::Autocontrast { cutoff } => {
                    if !(ordered(cutoff.0, cutoff.1) && cutoff.0 >= 0.0 && cutoff.1 < 0.5) {
                        return fail(format!("{id}: cutoff range {cutoff:?} outside [0, 0.5)"));
                    }
                }
                KernelKind::Illumination { strength } => {
                    if !(ordered(strength.0, strength.1) && strength.0 >= 0.0 && strength.1 <= 1.0) {
                        return fail(format!("{id}: strength range {strength:?} outside [0, 1]"));
                    }
                }
                KernelKind::MotionBlur { length } => {
                    if length.0 < 3 || length.0 > length.1 {
                        return fail(format!("{id}: length range {length:?} must satisfy 3 <= min <= max"));
                    }
                    if odd_values_in(*length).is_empty() {
                        return fail(format!("{id}: length range {length:?} contains no odd value"));
                    }
                }
                KernelKind::Defocus { radius } => {
                    if radius.0 < 1 || radius.0 > radius.1 {
                        return fail(format!("{id}: radius range {radius:?} must satisfy 1 <= min <= max"));
                    }
                }
                KernelKind::ChromaticAberration { shift } => {
                    if !(ordered(shift.0, shift.1) && shift.0 >= 0.0) {
                        return fail(format!("{id}: shift range {shift:?} must be >= 0 and ordered"));
                    }
                }
                KernelKind::IsoNoise { color_shift, intensity } => {
                    if !(ordered(color_shift.0, color_shift.1) && color_shift.0 >= 0.0) {
                        return fail(format!("{id}: color_shift range {color_shift:?} must be >= 0 and ordered"));
                    }
                    if !(ordered(intensity.0, intensity.1) && intensity.0 >= 0.0) {
                        return fail(format!("{id}: intensity range {intensity:?} must be >= 0 and ordered"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Parse the TOML config format: one `[[kernel]]` table per entry with
    /// `id`, optional `enabled` (default true), optional `probability`
    /// (default 0.2), and the parameter ranges for that kernel. Unknown keys
    /// are rejected.
    pub fn from_toml_str(text: &str) -> Result<Self, AugmentError> {
        let raw: RawSpec = toml::from_str(text).map_err(|e| AugmentError::Config(e.to_string()))?;
        let mut kernels = Vec::with_capacity(raw.kernel.len());
        for rk in raw.kernel {
            kernels.push(rk.into_config()?);
        }
        let spec = AugmentationSpec { kernels };
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml_string(&self) -> Result<String, AugmentError> {
        let raw = RawSpec { kernel: self.kernels.iter().map(RawKernel::from_config).collect() };
        toml::to_string(&raw).map_err(|e| AugmentError::Config(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, AugmentError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AugmentError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    #[serde(default)]
    kernel: Vec<RawKernel>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKernel {
    id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    enabled: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    probability: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cutoff: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    strength: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    length: Option<(u32, u32)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    radius: Option<(u32, u32)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    shift: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    color_shift: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    intensity: Option<(f64, f64)>,
}

impl RawKernel {
    fn into_config(self) -> Result<KernelConfig, AugmentError> {
        let fail = |reason: String| Err(AugmentError::Config(reason));
        let defaults = AugmentationSpec::default();
        let default_kind = |id: &str| {
            defaults
                .kernels
                .iter()
                .find(|k| k.kind.id() == id)
                .map(|k| k.kind.clone())
                .expect("canonical kernel id")
        };
        // Reject parameters that belong to a different kernel.
        let check_foreign = |allowed: &[&str], raw: &RawKernel| -> Result<(), AugmentError> {
            let fields: [(&str, bool); 7] = [
                ("cutoff", raw.cutoff.is_some()),
                ("strength", raw.strength.is_some()),
                ("length", raw.length.is_some()),
                ("radius", raw.radius.is_some()),
                ("shift", raw.shift.is_some()),
                ("color_shift", raw.color_shift.is_some()),
                ("intensity", raw.intensity.is_some()),
            ];
            for (name, present) in fields {
                if present && !allowed.contains(&name) {
                    return Err(AugmentError::Config(format!(
                        "kernel {:?} does not take parameter {name:?}",
                        raw.id
                    )));
                }
            }
            Ok(())
        };
        let kind = match self.id.as_str() {
            "autocontrast" => {
                check_foreign(&["cutoff"], &self)?;
                match (self.cutoff, default_kind("autocontrast")) {
                    (Some(c), _) => KernelKind::Autocontrast { cutoff: c },
                    (None, k) => k,
                }
            }
            "illumination" => {
                check_foreign(&["strength"], &self)?;
                match (self.strength, default_kind("illumination")) {
                    (Some(s), _) => KernelKind::Illumination { strength: s },
                    (None, k) => k,
                }
            }
            "motion-blur" => {
                check_foreign(&["length"], &self)?;
                match (self.length, default_kind("motion-blur")) {
                    (Some(l), _) => KernelKind::MotionBlur { length: l },
                    (None, k) => k,
                }
            }
            "defocus" => {
                check_foreign(&["radius"], &self)?;
                match (self.radius, default_kind("defocus")) {
                    (Some(r), _) => KernelKind::Defocus { radius: r },
                    (None, k) => k,
                }
            }
            "chromatic-aberration" => {
                check_foreign(&["shift"], &self)?;
                match (self.shift, default_kind("chromatic-aberration")) {
                    (Some(s), _) => KernelKind::ChromaticAberration { shift: s },
                    (None, k) => k,
                }
            }
            "iso-noise" => {
                check_foreign(&["color_shift", "intensity"], &self)?;
                let base = match default_kind("iso-noise") {
                    KernelKind::IsoNoise { color_shift, intensity } => (color_shift, intensity),
                    _ => unreachable!(),
                };
                KernelKind::IsoNoise {
                    color_shift: self.color_shift.unwrap_or(base.0),
                    intensity: self.intensity.unwrap_or(base.1),
                }
            }
            other => return fail(format!("unknown kernel id {other:?}")),
        };
        Ok(KernelConfig {
            enabled: self.enabled.unwrap_or(true),
            probability: self.probability.unwrap_or(DEFAULT_PROBABILITY),
            kind,
        })
    }

    fn from_config(cfg: &KernelConfig) -> RawKernel {
        let mut raw = RawKernel {
            id: cfg.kind.id().to_string(),
            enabled: Some(cfg.enabled),
            probability: Some(cfg.probability),
            cutoff: None,
            strength: None,
            length: None,
            radius: None,
            shift: None,
            color_shift: None,
            intensity: None,
        };
        match &cfg.kind {
            KernelKind::Autocontrast { cutoff } => raw.cutoff = Some(*cutoff),
            KernelKind::Illumination { strength } => raw.strength = Some(*strength),
            KernelKind::MotionBlur { length } => raw.length = Some(*length),
            KernelKind::Defocus { radius } => raw.radius = Some(*radius),
            KernelKind::ChromaticAberration { shift } => raw.shift = Some(*shift),
            KernelKind::IsoNoise { color_shift, intensity } => {
                raw.color_shift = Some(*color_shift);
                raw.intensity = Some(*intensity);
            }
        }
        raw
    }
}

// ---------------------------------------------------------------------------
// Driver
// ---------------------------------------------------------------------------

/// One fired kernel in an [`apply_spec`] log: id plus the drawn parameter
/// values, in draw order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AppliedKernel {
    pub kernel: String,
    pub params: Vec<(String, f64)>,
}

/// Apply a spec to an image. Entry `i` uses the rng stream for `(seed, i)`:
/// first a Bernoulli(probability) coin, then — only if it fires — parameters
/// drawn uniformly from the configured ranges in declaration order (angles,
/// where applicable, uniform in [0, 2π) after the magnitude). Disabled
/// entries and missing kernels consume nothing from anyone else's stream.
pub fn apply_spec(
    image: &RgbImage,
    spec: &AugmentationSpec,
    seed: u64,
) -> Result<(RgbImage, Vec<AppliedKernel>), AugmentError> {
    spec.validate()?;
    let mut out = image.clone();
    let mut log = Vec::new();
    for (index, cfg) in spec.kernels.iter().enumerate() {
        if !cfg.enabled || cfg.probability == 0.0 {
            continue;
        }
        let mut rng = rng_for(seed, index as u64);
        if !rng.random_bool(cfg.probability) {
            continue;
        }
        let mut params = Vec::new();
        out = match &cfg.kind {
            KernelKind::Autocontrast { cutoff } => {
                let c = rng.random_range(cutoff.0..=cutoff.1);
                params.push(("cutoff".to_string(), c));
                autocontrast(&out, c)?
            }
            KernelKind::Illumination { strength } => {
                let s = rng.random_range(strength.0..=strength.1);
                let angle = rng.random_range(0.0..std::f64::consts::TAU);
                params.push(("strength".to_string(), s));
                params.push(("angle".to_string(), angle));
                illumination(&out, angle, s)?
            }
            KernelKind::MotionBlur { length } => {
                let candidates = odd_values_in(*length);
                let l = candidates[rng.random_range(0..candidates.len())];
                let angle = rng.random_range(0.0..std::f64::consts::TAU);
                params.push(("length".to_string(), f64::from(l)));
                params.push(("angle".to_string(), angle));
                motion_blur(&out, l, angle)?
            }
            KernelKind::Defocus { radius } => {
                let r = rng.random_range(radius.0..=radius.1);
                params.push(("radius".to_string(), f64::from(r)));
                defocus(&out, r)?
            }
            KernelKind::ChromaticAberration { shift } => {
                let s = rng.random_range(shift.0..=shift.1);
                params.push(("shift".to_string(), s));
                chromatic_aberration(&out, s)?
            }
            KernelKind::IsoNoise { color_shift, intensity } => {
                let c = rng.random_range(color_shift.0..=color_shift.1);
                let i = rng.random_range(intensity.0..=intensity.1);
                params.push(("color_shift".to_string(), c));
                params.push(("intensity".to_string(), i));
                iso_noise(&out, c, i, &mut rng)?
            }
        };
        log.push(AppliedKernel { kernel: cfg.kind.id().to_string(), params });
    }
    Ok((out, log))
}

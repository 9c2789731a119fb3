//! Semi-synthetic image generation: paste sensor foregrounds (studio cutouts
//! or renders) onto real background photos and emit auto-annotations.
//!
//! The procedure for one image:
//!
//! 1. sample a placement rectangle whose box lies **fully inside the top band**
//!    of the background (sensors mount on ceilings), with a uniform scale drawn
//!    as a fraction of the background width;
//! 2. with a small probability insert a second, non-overlapping sensor;
//! 3. match the asset's brightness to the covered background region
//!    (Rec.601 luminance ratio, clamped);
//! 4. feather the alpha mask with a Gaussian blur to soften the paste boundary
//!    — the mask is blurred, never the pixels, so sensor texture stays sharp;
//! 5. alpha-composite and emit one ground-truth box per placement.
//!
//! Every random draw derives from an explicit seed, so datasets are
//! reproducible byte-for-byte, including under parallel generation.

use std::collections::HashMap;
use std::path::Path;

use image::RgbImage;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::{iou, AnnotationError, BoundingBox, GroundTruth, OriginTag, PixelBox};
use crate::raster::{
    gaussian_blur_plane, mean_luminance, resize_plane_bilinear, resize_rgb_bilinear, Plane,
};
use crate::seed::{derive_seed, rng_for};

pub const DEFAULT_TOP_BAND_FRACTION: f64 = 0.4;
pub const DEFAULT_DUAL_INSERT_PROB: f64 = 0.02;
pub const DEFAULT_SCALE_RANGE: (f64, f64) = (0.03, 0.12);
pub const DEFAULT_BLUR_SIGMA_RANGE: (f64, f64) = (0.5, 1.5);
pub const DEFAULT_BRIGHTNESS_BLEND: f64 = 1.0;

/// Lower/upper clamp for the adaptive brightness gain.
pub const GAIN_CLAMP: (f64, f64) = (0.4, 2.5);

/// Attempts at sampling a non-overlapping second placement before falling
/// back to a single insert.
const DUAL_ATTEMPTS: usize = 100;

/// Attempts per output slot in [`generate_dataset`] before giving up.
const SLOT_ATTEMPTS: usize = 10;

#[derive(Debug, Error)]
pub enum ComposeError {
    #[error("invalid composite parameters: {reason}")]
    InvalidParams { reason: String },
    #[error("asset {id:?}: {reason}")]
    AssetGeometry { id: String, reason: String },
    #[error("asset {asset:?} cannot fit the top band of background {background:?} at minimum scale")]
    Unplaceable { background: String, asset: String },
    #[error("recipe references unknown asset {id:?}")]
    UnknownAsset { id: String },
    #[error("recipe violates an invariant: {reason}")]
    RecipeInvariant { reason: String },
    #[error("no placeable composite for output {index} after {attempts} attempts; last: {last}")]
    SlotExhausted { index: usize, attempts: usize, last: String },
    #[error("empty {what}")]
    EmptyInput { what: &'static str },
    #[error("failed to load {path}: {message}")]
    Load { path: String, message: String },
    #[error(transparent)]
    Annotation(#[from] AnnotationError),
}

/// Knobs of the compositing procedure. `Default` gives the documented values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeParams {
    /// Fraction of the background height forming the placement band, from the top.
    pub top_band_fraction: f64,
    /// Probability that an image receives two sensors instead of one.
    pub dual_insert_prob: f64,
    /// Sensor width as a fraction of background width, drawn uniformly.
    pub scale_range: (f64, f64),
    /// Gaussian sigma (px) for mask feathering, drawn uniformly.
    pub blur_sigma_range: (f64, f64),
    /// 0 = keep asset brightness, 1 = fully match the background region.
    pub brightness_blend: f64,
}

impl Default for CompositeParams {
    fn default() -> Self {
        Self {
            top_band_fraction: DEFAULT_TOP_BAND_FRACTION,
            dual_insert_prob: DEFAULT_DUAL_INSERT_PROB,
            scale_range: DEFAULT_SCALE_RANGE,
            blur_sigma_range: DEFAULT_BLUR_SIGMA_RANGE,
            brightness_blend: DEFAULT_BRIGHTNESS_BLEND,
        }
    }
}

impl CompositeParams {
    pub fn validate(&self) -> Result<(), ComposeError> {
        let fail = |reason: String| Err(ComposeError::InvalidParams { reason });
        if !(self.top_band_fraction > 0.0 && self.top_band_fraction <= 1.0) {
            return fail(format!("top_band_fraction {} outside (0,1]", self.top_band_fraction));
        }
        if !(0.0..=1.0).contains(&self.dual_insert_prob) {
            return fail(format!("dual_insert_prob {} outside [0,1]", self.dual_insert_prob));
        }
        let (smin, smax) = self.scale_range;
        if !(smin > 0.0 && smin <= smax && smax <= 1.0) {
            return fail(format!("scale_range ({smin}, {smax}) must satisfy 0 < min <= max <= 1"));
        }
        let (bmin, bmax) = self.blur_sigma_range;
        if !(bmin >= 0.0 && bmin <= bmax) {
            return fail(format!("blur_sigma_range ({bmin}, {bmax}) must satisfy 0 <= min <= max"));
        }
        if !(0.0..=1.0).contains(&self.brightness_blend) {
            return fail(format!("brightness_blend {} outside [0,1]", self.brightness_blend));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AssetKind {
    RealCutout,
    Render,
}

/// A pasteable foreground: RGB pixels plus an opacity mask in `[0,1]`
/// delimiting the sensor silhouette.
#[derive(Debug, Clone)]
pub struct ForegroundAsset {
    pub id: String,
    pub kind: AssetKind,
    pub image: RgbImage,
    pub mask: Plane,
}

impl ForegroundAsset {
    /// Validate and construct, tight-cropping image and mask to the bounding
    /// box of `mask > 0.5` so placement rectangles hug the silhouette.
    pub fn new(id: String, kind: AssetKind, image: RgbImage, mask: Plane) -> Result<Self, ComposeError> {
        if mask.width != image.width() || mask.height != image.height() {
            return Err(ComposeError::AssetGeometry {
                id,
                reason: format!(
                    "mask {}x{} does not match image {}x{}",
                    mask.width,
                    mask.height,
                    image.width(),
                    image.height()
                ),
            });
        }
        if mask.iter().any(|v| !(0.0..=1.0).contains(&v)) {
            return Err(ComposeError::AssetGeometry { id, reason: "mask values outside [0,1]".into() });
        }
        let mut bounds: Option<(u32, u32, u32, u32)> = None;
        for y in 0..mask.height {
            for x in 0..mask.width {
                if mask.get(x, y) > 0.5 {
                    bounds = Some(match bounds {
                        None => (x, y, x, y),
                        Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
                    });
                }
            }
        }
        let Some((x0, y0, x1, y1)) = bounds else {
            return Err(ComposeError::AssetGeometry { id, reason: "mask has no pixel above 0.5".into() });
        };
        let (cw, ch) = (x1 - x0 + 1, y1 - y0 + 1);
        if (cw, ch) == (image.width(), image.height()) {
            return Ok(Self { id, kind, image, mask });
        }
        let cropped_img = image::imageops::crop_imm(&image, x0, y0, cw, ch).to_image();
        let mut cropped_mask = Plane::new(cw, ch);
        for y in 0..ch {
            for x in 0..cw {
                cropped_mask.set(x, y, mask.get(x0 + x, y0 + y));
            }
        }
        Ok(Self { id, kind, image: cropped_img, mask: cropped_mask })
    }

    /// Load an asset from a PNG. Opacity comes from the alpha channel when the
    /// file has one, otherwise from a sibling grayscale `<stem>.mask.png`.
    pub fn load(path: &Path, kind: AssetKind) -> Result<Self, ComposeError> {
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        let load_err = |message: String| ComposeError::Load { path: path.display().to_string(), message };
        let dynimg = image::open(path).map_err(|e| load_err(e.to_string()))?;
        let (rgb, mask) = match dynimg {
            image::DynamicImage::ImageRgba8(rgba) => {
                let (w, h) = rgba.dimensions();
                let mut mask = Plane::new(w, h);
                let mut rgb = RgbImage::new(w, h);
                for (x, y, p) in rgba.enumerate_pixels() {
                    rgb.put_pixel(x, y, image::Rgb([p.0[0], p.0[1], p.0[2]]));
                    mask.set(x, y, f32::from(p.0[3]) / 255.0);
                }
                (rgb, mask)
            }
            other => {
                let rgb = other.to_rgb8();
                let mask_path = path.with_extension("").with_extension("mask.png");
                let mask_path = if mask_path.exists() {
                    mask_path
                } else {
                    // `<name>.mask.png` next to `<name>.png`
                    let mut p = path.to_path_buf();
                    p.set_extension("mask.png");
                    p
                };
                if !mask_path.exists() {
                    return Err(load_err("no alpha channel and no sibling .mask.png".into()));
                }
                let gray = image::open(&mask_path)
                    .map_err(|e| load_err(format!("mask {}: {e}", mask_path.display())))?
                    .to_luma8();
                if gray.dimensions() != rgb.dimensions() {
                    return Err(load_err("mask dimensions do not match image".into()));
                }
                let (w, h) = rgb.dimensions();
                let mut mask = Plane::new(w, h);
                for (x, y, p) in gray.enumerate_pixels() {
                    mask.set(x, y, f32::from(p.0[0]) / 255.0);
                }
                (rgb, mask)
            }
        };
        Self::new(id, kind, rgb, mask)
    }

    /// Mean Rec.601 luminance of the silhouette (mask > 0.5) pixels.
    fn silhouette_luminance(&self) -> f64 {
        let mut sum = 0.0;
        let mut n = 0u64;
        for y in 0..self.mask.height {
            for x in 0..self.mask.width {
                if self.mask.get(x, y) > 0.5 {
                    let p = self.image.get_pixel(x, y).0;
                    sum += crate::raster::luminance(f64::from(p[0]), f64::from(p[1]), f64::from(p[2]));
                    n += 1;
                }
            }
        }
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }
}

/// One paste: which asset, where, and with what blending parameters.
/// `brightness_gain` is the effective per-channel multiplier (brightness
/// blending already folded in).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub asset_id: String,
    pub rect: PixelBox,
    pub blur_sigma: f64,
    pub brightness_gain: f64,
}

/// The fully-determined record of one composited image; rendering a recipe is
/// a pure function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeRecipe {
    pub seed: u64,
    pub background_id: String,
    pub placements: Vec<Placement>,
}

/// A rendered composite plus its auto-annotations.
#[derive(Debug, Clone)]
pub struct CompositeResult {
    pub image: RgbImage,
    pub ground_truths: Vec<GroundTruth>,
    pub recipe: CompositeRecipe,
    pub origin: OriginTag,
    pub warnings: Vec<String>,
}

/// Raw brightness gain for pasting `asset` over `rect` of `background`:
/// ratio of mean Rec.601 luminances, clamped to [`GAIN_CLAMP`]. A zero-luminance
/// silhouette yields gain 1.0 plus a warning instead of a division blow-up.
pub fn adapt_brightness(
    asset: &ForegroundAsset,
    background: &RgbImage,
    rect: &PixelBox,
) -> Result<(f64, Option<String>), ComposeError> {
    let (x0, y0, x1, y1) = rect_to_pixels(rect, background.width(), background.height())?;
    let mut pixels = Vec::with_capacity(((x1 - x0) * (y1 - y0)) as usize);
    for y in y0..y1 {
        for x in x0..x1 {
            pixels.push(background.get_pixel(x, y));
        }
    }
    if pixels.is_empty() {
        return Err(ComposeError::EmptyInput { what: "background region" });
    }
    let bg_lum = mean_luminance(pixels.into_iter());
    let asset_lum = asset.silhouette_luminance();
    Ok(gain_from_luminance(bg_lum, asset_lum, &asset.id))
}

/// The pure arithmetic behind [`adapt_brightness`].
pub fn gain_from_luminance(bg_lum: f64, asset_lum: f64, asset_id: &str) -> (f64, Option<String>) {
    if asset_lum <= 0.0 {
        return (
            1.0,
            Some(format!("asset {asset_id:?} has zero silhouette luminance; brightness left unchanged")),
        );
    }
    ((bg_lum / asset_lum).clamp(GAIN_CLAMP.0, GAIN_CLAMP.1), None)
}

/// Blend a raw gain toward 1.0: `1 + blend·(gain − 1)`.
pub fn effective_gain(gain: f64, brightness_blend: f64) -> f64 {
    1.0 + brightness_blend * (gain - 1.0)
}

/// Feather-kernel radius for `sigma`: close to the usual 3σ truncation but
/// never beyond ⌊4σ⌋, so pixels farther than 4σ from a placement are
/// provably untouched.
pub fn feather_radius(sigma: f64) -> u32 {
    if sigma <= 0.0 {
        return 0;
    }
    let r3 = (3.0 * sigma).ceil();
    let r4 = (4.0 * sigma).floor();
    r3.min(r4).max(0.0) as u32
}

fn rect_to_pixels(rect: &PixelBox, width: u32, height: u32) -> Result<(u32, u32, u32, u32), ComposeError> {
    let integral =
        |v: f64| v.fract() == 0.0 && v >= 0.0 && v <= f64::from(u32::MAX);
    if ![rect.x0, rect.y0, rect.x1, rect.y1].iter().all(|v| integral(*v)) {
        return Err(ComposeError::RecipeInvariant {
            reason: format!("placement rect ({}, {}, {}, {}) is not whole-pixel", rect.x0, rect.y0, rect.x1, rect.y1),
        });
    }
    let (x0, y0, x1, y1) = (rect.x0 as u32, rect.y0 as u32, rect.x1 as u32, rect.y1 as u32);
    if x1 > width || y1 > height || x0 >= x1 || y0 >= y1 {
        return Err(ComposeError::RecipeInvariant {
            reason: format!(
                "placement rect ({x0}, {y0}, {x1}, {y1}) outside {width}x{height} image"
            ),
        });
    }
    Ok((x0, y0, x1, y1))
}

/// Target size for an asset scaled to `scale` of the background width,
/// preserving aspect ratio; both dimensions at least 1 px.
fn scaled_size(asset: &ForegroundAsset, bg_w: u32, scale: f64) -> (u32, u32) {
    let tw = (scale * f64::from(bg_w)).round().max(1.0) as u32;
    let th = (f64::from(tw) * f64::from(asset.image.height()) / f64::from(asset.image.width()))
        .round()
        .max(1.0) as u32;
    (tw, th)
}

struct BandGeometry {
    band_h: u32,
}

fn band_geometry(background: &RgbImage, params: &CompositeParams) -> BandGeometry {
    BandGeometry { band_h: (params.top_band_fraction * f64::from(background.height())).floor() as u32 }
}

/// Largest target width for `asset` that still fits the band, or None.
fn max_fitting_width(asset: &ForegroundAsset, bg_w: u32, band_h: u32) -> Option<u32> {
    if band_h == 0 {
        return None;
    }
    let (aw, ah) = (f64::from(asset.image.width()), f64::from(asset.image.height()));
    // th = round(tw·ah/aw) <= band_h  ⇔  tw·ah/aw < band_h + 0.5
    let cap = ((f64::from(band_h) + 0.5 - 1e-9) * aw / ah).floor() as i64;
    let cap = cap.min(i64::from(bg_w));
    if cap < 1 {
        None
    } else {
        let cap = cap as u32;
        // Guard against rounding slips at the boundary.
        let (_, th) = scaled_size_from_width(asset, cap);
        if th <= band_h {
            Some(cap)
        } else if cap > 1 {
            Some(cap - 1)
        } else {
            None
        }
    }
}

fn scaled_size_from_width(asset: &ForegroundAsset, tw: u32) -> (u32, u32) {
    let th = (f64::from(tw) * f64::from(asset.image.height()) / f64::from(asset.image.width()))
        .round()
        .max(1.0) as u32;
    (tw, th)
}

fn sample_placement(
    rng: &mut ChaCha8Rng,
    background: &RgbImage,
    background_id: &str,
    assets: &[ForegroundAsset],
    params: &CompositeParams,
) -> Result<Placement, ComposeError> {
    let geo = band_geometry(background, params);
    let asset = &assets[rng.random_range(0..assets.len())];

    let (min_w, _) = scaled_size(asset, background.width(), params.scale_range.0);
    let cap_w = max_fitting_width(asset, background.width(), geo.band_h);
    let cap_w = match cap_w {
        Some(cap) if cap >= min_w => cap,
        _ => {
            return Err(ComposeError::Unplaceable {
                background: background_id.to_string(),
                asset: asset.id.clone(),
            })
        }
    };

    // Scale drawn uniformly over the configured range; sizes past the largest
    // feasible width are clamped down to it (only reachable when the band is
    // tight relative to scale_range.max).
    let scale = rng.random_range(params.scale_range.0..=params.scale_range.1);
    let (tw, th) = scaled_size(asset, background.width(), scale);
    let (tw, th) = if tw > cap_w { scaled_size_from_width(asset, cap_w) } else { (tw, th) };

    let x0 = rng.random_range(0..=background.width() - tw);
    let y0 = rng.random_range(0..=geo.band_h - th);
    let rect = PixelBox::new(f64::from(x0), f64::from(y0), f64::from(x0 + tw), f64::from(y0 + th))?;

    let blur_sigma = rng.random_range(params.blur_sigma_range.0..=params.blur_sigma_range.1);
    let (raw_gain, _warning) = adapt_brightness(asset, background, &rect)?;

    Ok(Placement {
        asset_id: asset.id.clone(),
        rect,
        blur_sigma,
        brightness_gain: effective_gain(raw_gain, params.brightness_blend),
    })
}

/// Sample the full parameter set for one composite. Deterministic in `seed`:
/// the same seed, background, asset list, and params always yield the same
/// recipe. Placement count is 2 with probability `dual_insert_prob`, else 1;
/// a second placement is rejection-sampled until it does not overlap the
/// first (at most [`DUAL_ATTEMPTS`] tries, then the recipe falls back to a
/// single placement).
pub fn sample_recipe(
    seed: u64,
    background: &RgbImage,
    background_id: &str,
    assets: &[ForegroundAsset],
    params: &CompositeParams,
) -> Result<CompositeRecipe, ComposeError> {
    params.validate()?;
    if assets.is_empty() {
        return Err(ComposeError::EmptyInput { what: "asset list" });
    }
    let mut rng = rng_for(seed, 0);
    let dual = params.dual_insert_prob > 0.0 && rng.random_bool(params.dual_insert_prob);

    let first = sample_placement(&mut rng, background, background_id, assets, params)?;
    let mut placements = vec![first];

    if dual {
        for _ in 0..DUAL_ATTEMPTS {
            match sample_placement(&mut rng, background, background_id, assets, params) {
                Ok(candidate) => {
                    if iou(&placements[0].rect, &candidate.rect) == 0.0 {
                        placements.push(candidate);
                        break;
                    }
                }
                Err(ComposeError::Unplaceable { .. }) => continue,
                Err(other) => return Err(other),
            }
        }
        // Fall through with a single placement if no attempt stuck.
    }

    Ok(CompositeRecipe { seed, background_id: background_id.to_string(), placements })
}

/// Render a recipe onto a background. Pure given its inputs.
///
/// Per placement: resize asset and mask to the target rect (bilinear), apply
/// the brightness gain with saturation, Gaussian-feather the mask with the
/// recipe's sigma, alpha-composite (`out = m·fg + (1−m)·bg`), and emit the
/// unfeathered rect as a ground truth. Pixels farther than 4σ outside a rect
/// are untouched by construction ([`feather_radius`]).
pub fn blend(
    background: &RgbImage,
    recipe: &CompositeRecipe,
    assets: &[ForegroundAsset],
) -> Result<CompositeResult, ComposeError> {
    if recipe.placements.is_empty() || recipe.placements.len() > 2 {
        return Err(ComposeError::RecipeInvariant {
            reason: format!("recipe has {} placements, expected 1 or 2", recipe.placements.len()),
        });
    }
    if recipe.placements.len() == 2 && iou(&recipe.placements[0].rect, &recipe.placements[1].rect) > 0.0 {
        return Err(ComposeError::RecipeInvariant { reason: "placement rects overlap".into() });
    }
    let by_id: HashMap<&str, &ForegroundAsset> =
        assets.iter().map(|a| (a.id.as_str(), a)).collect();

    let mut out = background.clone();
    let mut gts = Vec::with_capacity(recipe.placements.len());
    let mut kinds = Vec::new();

    for placement in &recipe.placements {
        let asset = *by_id
            .get(placement.asset_id.as_str())
            .ok_or_else(|| ComposeError::UnknownAsset { id: placement.asset_id.clone() })?;
        kinds.push(asset.kind);
        paste(&mut out, asset, placement)?;
        gts.push(GroundTruth {
            class_id: 0,
            bbox: BoundingBox::from_pixel(&placement.rect, background.width(), background.height())?,
        });
    }

    let origin = if kinds.iter().all(|k| *k == AssetKind::Render) {
        OriginTag::GenRender
    } else {
        OriginTag::GenReal
    };

    Ok(CompositeResult { image: out, ground_truths: gts, recipe: recipe.clone(), origin, warnings: Vec::new() })
}

fn paste(out: &mut RgbImage, asset: &ForegroundAsset, placement: &Placement) -> Result<(), ComposeError> {
    let (img_w, img_h) = out.dimensions();
    let (rx0, ry0, rx1, ry1) = rect_to_pixels(&placement.rect, img_w, img_h)?;
    let (rw, rh) = (rx1 - rx0, ry1 - ry0);

    let fg = resize_rgb_bilinear(&asset.image, rw, rh);
    let mask = resize_plane_bilinear(&asset.mask, rw, rh);

    // Brightness gain with channel saturation, applied before compositing.
    let gain = placement.brightness_gain;
    let mut fg_gained = fg;
    if gain != 1.0 {
        for p in fg_gained.pixels_mut() {
            for c in p.0.iter_mut() {
                *c = (f64::from(*c) * gain).round().clamp(0.0, 255.0) as u8;
            }
        }
    }

    // Feathered mask lives on a canvas extending `radius` beyond the rect.
    let radius = feather_radius(placement.blur_sigma);
    let cx0 = rx0.saturating_sub(radius);
    let cy0 = ry0.saturating_sub(radius);
    let cx1 = (rx1 + radius).min(img_w);
    let cy1 = (ry1 + radius).min(img_h);
    let (cw, ch) = (cx1 - cx0, cy1 - cy0);

    let mut canvas = Plane::new(cw, ch);
    for y in 0..rh {
        for x in 0..rw {
            canvas.set(rx0 - cx0 + x, ry0 - cy0 + y, mask.get(x, y));
        }
    }
    let feathered = if radius > 0 {
        gaussian_blur_plane(&canvas, placement.blur_sigma, radius)
    } else {
        canvas
    };

    for y in 0..ch {
        for x in 0..cw {
            let m = f64::from(feathered.get(x, y)).clamp(0.0, 1.0);
            if m <= 0.0 {
                continue;
            }
            let (gx, gy) = (cx0 + x, cy0 + y);
            // Foreground lookup, clamped to the rect so the feathered fringe
            // extends the edge pixels outward.
            let fx = (i64::from(gx) - i64::from(rx0)).clamp(0, i64::from(rw) - 1) as u32;
            let fy = (i64::from(gy) - i64::from(ry0)).clamp(0, i64::from(rh) - 1) as u32;
            let f = fg_gained.get_pixel(fx, fy).0;
            let b = out.get_pixel(gx, gy).0;
            let mut blended = [0u8; 3];
            for c in 0..3 {
                let v = m * f64::from(f[c]) + (1.0 - m) * f64::from(b[c]);
                blended[c] = v.round().clamp(0.0, 255.0) as u8;
            }
            out.put_pixel(gx, gy, image::Rgb(blended));
        }
    }
    Ok(())
}

/// Per-image provenance within a generated dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub index: usize,
    pub origin: OriginTag,
    pub recipe: CompositeRecipe,
}

/// Reproducibility header + per-image records for one generation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerationManifest {
    pub master_seed: u64,
    pub params: CompositeParams,
    pub records: Vec<GenerationRecord>,
}

/// A full generation run: rendered composites, the manifest describing them,
/// and any warnings (skipped unplaceable draws, zero-luminance assets).
#[derive(Debug)]
pub struct GeneratedDataset {
    pub results: Vec<CompositeResult>,
    pub manifest: GenerationManifest,
    pub warnings: Vec<String>,
}

/// Generate `n_images` composites. Image `i` derives all of its randomness
/// from `(master_seed, i)`, so results are byte-identical across runs, thread
/// counts, and machines (given identical input bytes). Backgrounds and assets
/// are sampled uniformly with replacement; a draw whose background cannot host
/// the asset is skipped with a warning and resampled, up to
/// [`SLOT_ATTEMPTS`] times per slot (≤ 10·n attempts overall).
pub fn generate_dataset(
    backgrounds: &[(String, RgbImage)],
    assets: &[ForegroundAsset],
    n_images: usize,
    params: &CompositeParams,
    master_seed: u64,
) -> Result<GeneratedDataset, ComposeError> {
    params.validate()?;
    if n_images == 0 {
        return Err(ComposeError::EmptyInput { what: "image count (n_images = 0)" });
    }
    if backgrounds.is_empty() {
        return Err(ComposeError::EmptyInput { what: "background list" });
    }
    if assets.is_empty() {
        return Err(ComposeError::EmptyInput { what: "asset list" });
    }

    use rayon::prelude::*;
    let slots: Result<Vec<(CompositeResult, Vec<String>)>, ComposeError> = (0..n_images)
        .into_par_iter()
        .map(|index| generate_slot(index, backgrounds, assets, params, master_seed))
        .collect();
    let slots = slots?;

    let mut results = Vec::with_capacity(n_images);
    let mut warnings = Vec::new();
    let mut records = Vec::with_capacity(n_images);
    for (index, (result, slot_warnings)) in slots.into_iter().enumerate() {
        warnings.extend(slot_warnings);
        records.push(GenerationRecord { index, origin: result.origin, recipe: result.recipe.clone() });
        results.push(result);
    }

    Ok(GeneratedDataset {
        results,
        manifest: GenerationManifest { master_seed, params: clone_params(params), records },
        warnings,
    })
}

fn clone_params(p: &CompositeParams) -> CompositeParams {
    p.clone()
}

fn generate_slot(
    index: usize,
    backgrounds: &[(String, RgbImage)],
    assets: &[ForegroundAsset],
    params: &CompositeParams,
    master_seed: u64,
) -> Result<(CompositeResult, Vec<String>), ComposeError> {
    let mut warnings = Vec::new();
    let mut last_error = String::new();
    for attempt in 0..SLOT_ATTEMPTS {
        let attempt_seed = derive_seed(master_seed, (index * SLOT_ATTEMPTS + attempt) as u64);
        let bg_idx = rng_for(attempt_seed, 0).random_range(0..backgrounds.len());
        let (bg_id, bg) = &backgrounds[bg_idx];
        let recipe_seed = derive_seed(attempt_seed, 1);
        match sample_recipe(recipe_seed, bg, bg_id, assets, params) {
            Ok(recipe) => {
                let mut result = blend(bg, &recipe, assets)?;
                result.warnings = warnings.clone();
                return Ok((result, warnings));
            }
            Err(err @ ComposeError::Unplaceable { .. }) => {
                last_error = err.to_string();
                warnings.push(format!("image {index} attempt {attempt}: {last_error}; resampling"));
            }
            Err(other) => return Err(other),
        }
    }
    Err(ComposeError::SlotExhausted { index, attempts: SLOT_ATTEMPTS, last: last_error })
}

//! Low-level raster helpers shared by the compositor and the augmentation
//! kernels: Rec.601 luminance, bilinear resampling, and separable Gaussian
//! blur on float planes.
//!
//! Everything here is hand-rolled rather than delegated to an image-processing
//! crate on purpose: the compositor's reproducibility contract promises
//! byte-identical outputs across versions, so the exact arithmetic of resizing
//! and blurring is part of this crate's behavior, not an upstream detail.

use image::RgbImage;

/// Rec.601 luma weights — the fixed luminance convention used throughout.
pub fn luminance(r: f64, g: f64, b: f64) -> f64 {
    0.299 * r + 0.587 * g + 0.114 * b
}

/// A single-channel float plane with row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub width: u32,
    pub height: u32,
    data: Vec<f32>,
}

impl Plane {
    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height, data: vec![0.0; width as usize * height as usize] }
    }

    pub fn from_vec(width: u32, height: u32, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), width as usize * height as usize, "plane size mismatch");
        Self { width, height, data }
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> f32 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: f32) {
        self.data[y as usize * self.width as usize + x as usize] = v;
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn iter(&self) -> impl Iterator<Item = f32> + '_ {
        self.data.iter().copied()
    }
}

/// Clamp a float sample position into `[0, n-1]` and split into the base
/// index plus interpolation fraction.
#[inline]
fn sample_coord(v: f64, n: u32) -> (u32, u32, f64) {
    let max = f64::from(n - 1);
    let v = v.clamp(0.0, max);
    let i0 = v.floor();
    let frac = v - i0;
    let i0 = i0 as u32;
    let i1 = (i0 + 1).min(n - 1);
    (i0, i1, frac)
}

/// Bilinear sample of one channel of an RGB image at a float position
/// (clamp-to-edge).
#[inline]
pub fn bilinear_sample_channel(img: &RgbImage, channel: usize, x: f64, y: f64) -> f64 {
    let (x0, x1, fx) = sample_coord(x, img.width());
    let (y0, y1, fy) = sample_coord(y, img.height());
    let p = |px: u32, py: u32| f64::from(img.get_pixel(px, py).0[channel]);
    let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
    let bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Map a destination index to the source coordinate under center-aligned
/// resampling.
#[inline]
fn src_pos(dst: u32, src_n: u32, dst_n: u32) -> f64 {
    (f64::from(dst) + 0.5) * f64::from(src_n) / f64::from(dst_n) - 0.5
}

/// Bilinear resize of an RGB image (pixel centers aligned).
pub fn resize_rgb_bilinear(img: &RgbImage, new_w: u32, new_h: u32) -> RgbImage {
    assert!(new_w >= 1 && new_h >= 1, "resize target must be at least 1x1");
    let mut out = RgbImage::new(new_w, new_h);
    for y in 0..new_h {
        let sy = src_pos(y, img.height(), new_h);
        for x in 0..new_w {
            let sx = src_pos(x, img.width(), new_w);
            let mut px = [0u8; 3];
            for (c, slot) in px.iter_mut().enumerate() {
                *slot = bilinear_sample_channel(img, c, sx, sy).round().clamp(0.0, 255.0) as u8;
            }
            out.put_pixel(x, y, image::Rgb(px));
        }
    }
    out
}

/// Bilinear resize of a float plane (pixel centers aligned, clamp-to-edge).
pub fn resize_plane_bilinear(plane: &Plane, new_w: u32, new_h: u32) -> Plane {
    assert!(new_w >= 1 && new_h >= 1, "resize target must be at least 1x1");
    let mut out = Plane::new(new_w, new_h);
    for y in 0..new_h {
        let (y0, y1, fy) = sample_coord(src_pos(y, plane.height, new_h), plane.height);
        for x in 0..new_w {
            let (x0, x1, fx) = sample_coord(src_pos(x, plane.width, new_w), plane.width);
            let top = f64::from(plane.get(x0, y0)) * (1.0 - fx) + f64::from(plane.get(x1, y0)) * fx;
            let bottom = f64::from(plane.get(x0, y1)) * (1.0 - fx) + f64::from(plane.get(x1, y1)) * fx;
            out.set(x, y, (top * (1.0 - fy) + bottom * fy) as f32);
        }
    }
    out
}

/// Normalized 1-D Gaussian taps for `sigma` with the given radius
/// (length `2·radius + 1`, entries sum to 1).
pub fn gaussian_kernel(sigma: f64, radius: u32) -> Vec<f64> {
    assert!(sigma > 0.0, "gaussian kernel needs positive sigma");
    let mut taps = Vec::with_capacity(2 * radius as usize + 1);
    let inv = 1.0 / (2.0 * sigma * sigma);
    for i in -(radius as i64)..=(radius as i64) {
        let d = i as f64;
        taps.push((-d * d * inv).exp());
    }
    let sum: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= sum;
    }
    taps
}

/// Separable Gaussian blur of a plane with **zero padding** outside the plane.
///
/// Zero padding (not reflect) is deliberate: the planes blurred here are alpha
/// masks embedded in a larger canvas, where everything outside really is
/// transparent.
pub fn gaussian_blur_plane(plane: &Plane, sigma: f64, radius: u32) -> Plane {
    if radius == 0 {
        return plane.clone();
    }
    let taps = gaussian_kernel(sigma, radius);
    let r = radius as i64;
    let (w, h) = (plane.width as i64, plane.height as i64);

    // Horizontal pass.
    let mut tmp = Plane::new(plane.width, plane.height);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0f64;
            for (k, tap) in taps.iter().enumerate() {
                let sx = x + k as i64 - r;
                if (0..w).contains(&sx) {
                    acc += tap * f64::from(plane.get(sx as u32, y as u32));
                }
            }
            tmp.set(x as u32, y as u32, acc as f32);
        }
    }
    // Vertical pass.
    let mut out = Plane::new(plane.width, plane.height);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0f64;
            for (k, tap) in taps.iter().enumerate() {
                let sy = y + k as i64 - r;
                if (0..h).contains(&sy) {
                    acc += tap * f64::from(tmp.get(x as u32, sy as u32));
                }
            }
            out.set(x as u32, y as u32, acc as f32);
        }
    }
    out
}

/// Mean Rec.601 luminance over every pixel of an RGB image region iterator.
pub fn mean_luminance<'a>(pixels: impl Iterator<Item = &'a image::Rgb<u8>>) -> f64 {
    let mut sum = 0.0;
    let mut n = 0u64;
    for p in pixels {
        sum += luminance(f64::from(p.0[0]), f64::from(p.0[1]), f64::from(p.0[2]));
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

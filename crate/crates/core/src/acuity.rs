//! Gaze-contingent space-variant blur.
//!
//! Resolution falls off with eccentricity `e` as `e2 / (e + e2)`, so the
//! blur level needed at a pixel is `L(e) = log2((e + e2) / e2)`. A stack of
//! full-resolution Gaussian blurs with `sigma_L = sigma0 * 2^(L-1)` is built
//! once per frame and each output pixel interpolates linearly between the two
//! bracketing levels.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::Image;

#[derive(Debug, Error, PartialEq)]
pub enum AcuityError {
    #[error("invalid acuity parameters: {0}")]
    InvalidParams(&'static str),
    #[error("cannot foveate an empty image")]
    EmptyImage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcuityParams {
    /// Pixels per degree of visual angle.
    pub ppd: f64,
    /// Eccentricity (degrees) at which resolution halves.
    pub e2_deg: f64,
    pub max_levels: usize,
    /// Blur sigma of level 1, in pixels.
    pub sigma0_px: f64,
}

impl Default for AcuityParams {
    fn default() -> Self {
        Self {
            ppd: 640.0 / 70.0,
            e2_deg: 2.3,
            max_levels: 6,
            sigma0_px: 1.0,
        }
    }
}

impl AcuityParams {
    /// Parameters for a frame of the given width spanning `fov_h_deg`.
    /// `sigma0_px` scales with width (1 px at 640 px) so the blur, measured
    /// in degrees, does not depend on the render resolution.
    pub fn for_frame(frame_w: usize, fov_h_deg: f64) -> Self {
        Self {
            ppd: frame_w as f64 / fov_h_deg,
            sigma0_px: frame_w as f64 / 640.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), AcuityError> {
        if !(self.ppd > 0.0) {
            return Err(AcuityError::InvalidParams("ppd must be > 0"));
        }
        if !(self.e2_deg > 0.0) {
            return Err(AcuityError::InvalidParams("e2_deg must be > 0"));
        }
        if self.max_levels < 1 {
            return Err(AcuityError::InvalidParams("max_levels must be >= 1"));
        }
        if !(self.sigma0_px > 0.0) {
            return Err(AcuityError::InvalidParams("sigma0_px must be > 0"));
        }
        Ok(())
    }

    pub fn level_sigma(&self, level: usize) -> f64 {
        assert!(level >= 1);
        self.sigma0_px * 2f64.powi(level as i32 - 1)
    }
}

/// Small-angle eccentricity: pixel distance over pixels-per-degree.
pub fn eccentricity_deg(pixel: [f64; 2], gaze: [f64; 2], ppd: f64) -> f64 {
    let dx = pixel[0] - gaze[0];
    let dy = pixel[1] - gaze[1];
    (dx * dx + dy * dy).sqrt() / ppd
}

pub fn blur_level(e_deg: f64, params: &AcuityParams) -> f64 {
    let top = params.max_levels.saturating_sub(1) as f64;
    ((e_deg + params.e2_deg) / params.e2_deg).log2().clamp(0.0, top)
}

/// Normalized 1-D Gaussian taps over `[-ceil(3 sigma), ceil(3 sigma)]`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f32> {
    let radius = (3.0 * sigma).ceil() as i64;
    let taps: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter().map(|t| (t / sum) as f32).collect()
}

/// Separable Gaussian blur with clamp-to-edge borders.
pub fn gaussian_blur(img: &Image, sigma: f64) -> Image {
    let (w, h) = (img.width(), img.height());
    let kernel = gaussian_kernel(sigma);
    let r = (kernel.len() / 2) as i64;
    let src = img.data();

    let mut tmp = vec![0f32; w * h * 3];
    for y in 0..h {
        let row = &src[y * w * 3..(y + 1) * w * 3];
        for x in 0..w {
            let mut acc = [0f32; 3];
            for (k, &wt) in kernel.iter().enumerate() {
                let sx = (x as i64 + k as i64 - r).clamp(0, w as i64 - 1) as usize;
                acc[0] += wt * row[sx * 3];
                acc[1] += wt * row[sx * 3 + 1];
                acc[2] += wt * row[sx * 3 + 2];
            }
            tmp[(y * w + x) * 3..(y * w + x) * 3 + 3].copy_from_slice(&acc);
        }
    }

    let mut out = vec![0f32; w * h * 3];
    let stride = w * 3;
    for (k, &wt) in kernel.iter().enumerate() {
        for y in 0..h {
            let sy = (y as i64 + k as i64 - r).clamp(0, h as i64 - 1) as usize;
            let src_row = &tmp[sy * stride..(sy + 1) * stride];
            let dst_row = &mut out[y * stride..(y + 1) * stride];
            for (d, s) in dst_row.iter_mut().zip(src_row) {
                *d += wt * s;
            }
        }
    }
    Image::from_raw(w, h, out)
}

#[derive(Debug, Clone)]
pub struct BlurStack {
    /// `levels[0]` is the input; `levels[L]` is blurred with `sigmas[L]`.
    pub levels: Vec<Image>,
    pub sigmas: Vec<f64>,
}

pub fn build_blur_stack(img: &Image, params: &AcuityParams) -> Result<BlurStack, AcuityError> {
    build_blur_stack_to(img, params, params.max_levels)
}

fn build_blur_stack_to(
    img: &Image,
    params: &AcuityParams,
    n_levels: usize,
) -> Result<BlurStack, AcuityError> {
    params.validate()?;
    if img.is_empty() {
        return Err(AcuityError::EmptyImage);
    }
    let mut levels = vec![img.clone()];
    let mut sigmas = vec![0.0];
    for level in 1..n_levels.min(params.max_levels) {
        let sigma = params.level_sigma(level);
        levels.push(gaussian_blur(img, sigma));
        sigmas.push(sigma);
    }
    Ok(BlurStack { levels, sigmas })
}

#[derive(Debug, Clone)]
pub struct Foveated {
    pub image: Image,
    /// Set when the requested gaze lay outside the frame and was clamped.
    pub gaze_clamped: bool,
}

/// Applies the acuity filter around `gaze` (pixel coordinates).
///
/// The gaze is snapped to the nearest pixel center so the gaze pixel is
/// reproduced exactly; out-of-frame gaze is clamped to the border.
pub fn foveate(img: &Image, gaze: [f64; 2], params: &AcuityParams) -> Result<Foveated, AcuityError> {
    params.validate()?;
    if img.is_empty() {
        return Err(AcuityError::EmptyImage);
    }
    let (w, h) = (img.width(), img.height());
    let max_x = (w - 1) as f64;
    let max_y = (h - 1) as f64;
    let gaze_clamped = !(0.0..=max_x).contains(&gaze[0]) || !(0.0..=max_y).contains(&gaze[1]);
    let g = [gaze[0].clamp(0.0, max_x).round(), gaze[1].clamp(0.0, max_y).round()];

    // Only build the levels some pixel actually reaches.
    let far = [[0.0, 0.0], [max_x, 0.0], [0.0, max_y], [max_x, max_y]]
        .iter()
        .map(|&c| eccentricity_deg(c, g, params.ppd))
        .fold(0.0, f64::max);
    let needed = blur_level(far, params).ceil() as usize + 1;
    let stack = build_blur_stack_to(img, params, needed)?;
    let top = stack.levels.len() - 1;

    let mut out = Image::new(w, h);
    let dst = out.data_mut();
    for y in 0..h {
        for x in 0..w {
            let e = eccentricity_deg([x as f64, y as f64], g, params.ppd);
            let level = blur_level(e, params);
            let lo = (level.floor() as usize).min(top);
            let hi = (level.ceil() as usize).min(top);
            let t = (level - lo as f64) as f32;
            let p = (y * w + x) * 3;
            let a = &stack.levels[lo].data()[p..p + 3];
            let b = &stack.levels[hi].data()[p..p + 3];
            for c in 0..3 {
                dst[p + c] = a[c] + (b[c] - a[c]) * t;
            }
        }
    }
    Ok(Foveated {
        image: out,
        gaze_clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eccentricity_examples() {
        assert_eq!(eccentricity_deg([5.0, 5.0], [5.0, 5.0], 9.14), 0.0);
        assert!((eccentricity_deg([191.4, 0.0], [100.0, 0.0], 9.14) - 10.0).abs() < 1e-9);
        let corner = eccentricity_deg([0.0, 0.0], [320.0, 240.0], 9.14);
        assert!((corner - 400.0 / 9.14).abs() < 1e-9);
        assert!((corner - 43.76).abs() < 0.01);
    }

    #[test]
    fn level_closed_forms() {
        let p = AcuityParams::default();
        assert_eq!(blur_level(0.0, &p), 0.0);
        assert!((blur_level(2.3, &p) - 1.0).abs() < 1e-12);
        assert!((blur_level(6.9, &p) - 2.0).abs() < 1e-12);
        assert_eq!(blur_level(1e6, &p), 5.0);
    }

    #[test]
    fn level_is_monotone() {
        let p = AcuityParams::default();
        let mut prev = 0.0;
        for i in 0..2000 {
            let l = blur_level(i as f64 * 0.05, &p);
            assert!(l >= prev);
            prev = l;
        }
    }

    #[test]
    fn constant_image_survives_every_level() {
        let img = Image::filled(40, 30, [0.2, 0.5, 0.9]);
        let stack = build_blur_stack(&img, &AcuityParams::default()).unwrap();
        assert_eq!(stack.levels.len(), 6);
        for lvl in &stack.levels {
            assert_eq!(lvl.width(), 40);
            for (a, b) in lvl.data().iter().zip(img.data()) {
                assert!((a - b).abs() <= 1.0 / 255.0);
            }
        }
        assert!(stack.sigmas.windows(2).all(|s| s[1] > s[0]));
    }

    #[test]
    fn impulse_peak_matches_gaussian_normalization() {
        let mut img = Image::new(41, 41);
        img.set(20, 20, [1.0, 1.0, 1.0]);
        let stack = build_blur_stack(&img, &AcuityParams::default()).unwrap();
        let peak = stack.levels[1].get(20, 20)[0] as f64;
        let analytic = 1.0 / (2.0 * std::f64::consts::PI);
        assert!((peak - analytic).abs() / analytic < 0.02, "{peak} vs {analytic}");
    }

    #[test]
    fn noise_variance_drops_with_level() {
        use rand::Rng;
        let mut rng = crate::seed::rng_from(3);
        let data: Vec<f32> = (0..160 * 160 * 3).map(|_| rng.gen::<f32>()).collect();
        let img = Image::from_raw(160, 160, data);
        let stack = build_blur_stack(&img, &AcuityParams::default()).unwrap();
        let var = |im: &Image| {
            let d = im.data();
            let m = d.iter().sum::<f32>() / d.len() as f32;
            d.iter().map(|v| (v - m) * (v - m)).sum::<f32>() / d.len() as f32
        };
        let vars: Vec<f32> = stack.levels.iter().map(var).collect();
        assert!(vars.windows(2).all(|v| v[1] < v[0]), "{vars:?}");
    }

    #[test]
    fn single_level_is_identity() {
        let mut img = Image::new(20, 10);
        img.set(3, 4, [1.0, 0.0, 0.5]);
        let p = AcuityParams {
            max_levels: 1,
            ..AcuityParams::default()
        };
        let out = foveate(&img, [10.0, 5.0], &p).unwrap();
        assert_eq!(out.image, img);
    }

    #[test]
    fn out_of_frame_gaze_is_clamped_and_flagged() {
        let img = Image::filled(20, 10, [0.3; 3]);
        let p = AcuityParams::default();
        assert!(foveate(&img, [-5.0, 3.0], &p).unwrap().gaze_clamped);
        assert!(!foveate(&img, [19.0, 9.0], &p).unwrap().gaze_clamped);
    }

    #[test]
    fn rejects_bad_params_and_empty_images() {
        let bad = AcuityParams {
            ppd: 0.0,
            ..AcuityParams::default()
        };
        assert!(foveate(&Image::new(4, 4), [1.0, 1.0], &bad).is_err());
        assert_eq!(
            foveate(&Image::new(0, 0), [0.0, 0.0], &AcuityParams::default()).unwrap_err(),
            AcuityError::EmptyImage
        );
    }
}

//! Full-reference quality metrics.
//!
//! SSIM follows the usual Gaussian-weighted formulation: an 11x11 window
//! (sigma 1.5, normalised), K1 = 0.01, K2 = 0.03, L = 255, evaluated at every
//! position where the window fits entirely inside the image, averaged over
//! positions and then over channels.

use super::RgbaImage;
use crate::error::{Error, Result};

/// Returned by [`psnr`] for identical inputs.
pub const PSNR_CAP_DB: f64 = 99.0;

pub const SSIM_WINDOW: u32 = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;
const DATA_RANGE: f64 = 255.0;

/// Which channels a metric reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channels {
    /// Red, green and blue; used for composites.
    Rgb,
    /// All four channels; used for individual layers.
    Rgba,
}

impl Channels {
    pub fn count(self) -> usize {
        match self {
            Channels::Rgb => 3,
            Channels::Rgba => 4,
        }
    }
}

fn check_dims(a: &RgbaImage, b: &RgbaImage) -> Result<()> {
    if a.dimensions() != b.dimensions() {
        return Err(Error::DimensionMismatch {
            left_w: a.width(),
            left_h: a.height(),
            right_w: b.width(),
            right_h: b.height(),
        });
    }
    Ok(())
}

/// Peak signal-to-noise ratio in decibels, capped at [`PSNR_CAP_DB`] when
/// the images are identical on the selected channels.
pub fn psnr(a: &RgbaImage, b: &RgbaImage, channels: Channels) -> Result<f64> {
    check_dims(a, b)?;
    let n = channels.count();
    let mut sum = 0u64;
    for (pa, pb) in a.pixels().zip(b.pixels()) {
        for c in 0..n {
            let d = pa[c] as i64 - pb[c] as i64;
            sum += (d * d) as u64;
        }
    }
    if sum == 0 {
        return Ok(PSNR_CAP_DB);
    }
    let count = a.width() as f64 * a.height() as f64 * n as f64;
    let mse = sum as f64 / count;
    Ok(10.0 * (DATA_RANGE * DATA_RANGE / mse).log10())
}

/// Four-channel SSIM; see [`ssim_with`].
pub fn ssim(a: &RgbaImage, b: &RgbaImage) -> Result<f64> {
    ssim_with(a, b, Channels::Rgba)
}

pub fn ssim_with(a: &RgbaImage, b: &RgbaImage, channels: Channels) -> Result<f64> {
    check_dims(a, b)?;
    let (w, h) = a.dimensions();
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            window: SSIM_WINDOW,
        });
    }
    if a == b {
        return Ok(1.0);
    }
    let kernel = gaussian_kernel();
    let n = channels.count();
    let total: f64 = (0..n)
        .map(|c| {
            let pa = plane(a, c);
            let pb = plane(b, c);
            channel_ssim(&pa, &pb, w as usize, h as usize, &kernel)
        })
        .sum();
    Ok(total / n as f64)
}

fn gaussian_kernel() -> [f64; SSIM_WINDOW as usize] {
    let radius = (SSIM_WINDOW / 2) as i32;
    let mut k = [0.0; SSIM_WINDOW as usize];
    for (i, v) in k.iter_mut().enumerate() {
        let x = (i as i32 - radius) as f64;
        *v = (-0.5 * x * x / (SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

fn plane(img: &RgbaImage, c: usize) -> Vec<f64> {
    img.pixels().map(|p| p[c] as f64).collect()
}

/// Separable Gaussian statistics over the valid region of one channel.
fn channel_ssim(a: &[f64], b: &[f64], w: usize, h: usize, k: &[f64]) -> f64 {
    let win = k.len();
    let ow = w - win + 1;
    let oh = h - win + 1;
    let c1 = (K1 * DATA_RANGE).powi(2);
    let c2 = (K2 * DATA_RANGE).powi(2);

    // horizontal pass: [mu_a, mu_b, a^2, b^2, ab] for each (row, out column)
    let mut horiz = vec![[0.0f64; 5]; ow * h];
    for y in 0..h {
        let row = y * w;
        for x in 0..ow {
            let mut acc = [0.0f64; 5];
            for (i, &wt) in k.iter().enumerate() {
                let va = a[row + x + i];
                let vb = b[row + x + i];
                acc[0] += wt * va;
                acc[1] += wt * vb;
                acc[2] += wt * va * va;
                acc[3] += wt * vb * vb;
                acc[4] += wt * va * vb;
            }
            horiz[y * ow + x] = acc;
        }
    }

    let mut sum = 0.0;
    for y in 0..oh {
        for x in 0..ow {
            let mut acc = [0.0f64; 5];
            for (i, &wt) in k.iter().enumerate() {
                let s = &horiz[(y + i) * ow + x];
                for j in 0..5 {
                    acc[j] += wt * s[j];
                }
            }
            let [mu_a, mu_b, eaa, ebb, eab] = acc;
            let var_a = eaa - mu_a * mu_a;
            let var_b = ebb - mu_b * mu_b;
            let cov = eab - mu_a * mu_b;
            sum += ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2))
                / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
        }
    }
    sum / (ow * oh) as f64
}

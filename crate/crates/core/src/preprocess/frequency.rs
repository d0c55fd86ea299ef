//! Ideal circular masks in the 2-D DFT domain.
//!
//! Radial frequency is measured as `sqrt((fx² + fy²) / 2)` where `fx`, `fy`
//! are signed frequencies as fractions of the Nyquist rate on each axis, so
//! the radius spans [0, 1] and a lowpass cutoff of 1 keeps every bin.

use super::PreprocessError;
use crate::image::Image;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterMode {
    Lowpass,
    Highpass,
}

fn nyquist_fraction(k: usize, n: usize) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let signed = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
    signed / (n as f64 / 2.0)
}

fn fft2(buf: &mut [Complex<f64>], width: usize, height: usize, inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let (row_fft, col_fft) = if inverse {
        (planner.plan_fft_inverse(width), planner.plan_fft_inverse(height))
    } else {
        (planner.plan_fft_forward(width), planner.plan_fft_forward(height))
    };
    for row in buf.chunks_exact_mut(width) {
        row_fft.process(row);
    }
    let mut column = vec![Complex::new(0.0, 0.0); height];
    for x in 0..width {
        for y in 0..height {
            column[y] = buf[y * width + x];
        }
        col_fft.process(&mut column);
        for y in 0..height {
            buf[y * width + x] = column[y];
        }
    }
}

/// Filters a grayscale image with an ideal low- or high-pass mask.
pub fn dft_enhance(img: &Image, mode: FilterMode, cutoff: f64) -> Result<Image, PreprocessError> {
    img.ensure_gray()?;
    if !(cutoff > 0.0 && cutoff <= 1.0) {
        return Err(PreprocessError::CutoffOutOfRange(cutoff));
    }
    let (w, h) = (img.width(), img.height());
    let mut buf: Vec<Complex<f64>> = img.pixels().iter().map(|&v| Complex::new(v as f64, 0.0)).collect();
    fft2(&mut buf, w, h, false);
    for ky in 0..h {
        let fy = nyquist_fraction(ky, h);
        for kx in 0..w {
            let fx = nyquist_fraction(kx, w);
            let radius = ((fx * fx + fy * fy) / 2.0).sqrt();
            let keep = match mode {
                FilterMode::Lowpass => radius <= cutoff,
                FilterMode::Highpass => radius > cutoff,
            };
            if !keep {
                buf[ky * w + kx] = Complex::new(0.0, 0.0);
            }
        }
    }
    fft2(&mut buf, w, h, true);
    let scale = 1.0 / (w * h) as f64;
    let pixels = buf.iter().map(|c| (c.re * scale).round().clamp(0.0, 255.0) as u8).collect();
    Ok(Image::gray(w, h, pixels)?)
}

//! One-level 2-D Haar enhancement.
//!
//! For each 2×2 block `[a b; c d]` the bands are
//! `LL = (a+b+c+d)/4`, `LH = (a-b+c-d)/4`, `HL = (a+b-c-d)/4`,
//! `HH = (a-b-c+d)/4`. All coefficients are dyadic, so forward followed by
//! inverse reproduces integer inputs exactly.

use super::{equalize, histogram_entropy, PreprocessError};
use crate::image::Image;

/// Detail gains tried when maximizing output entropy.
pub const HAAR_GAIN_GRID: [f64; 4] = [1.0, 1.25, 1.5, 2.0];

#[derive(Debug, Clone, PartialEq)]
pub struct HaarBands {
    pub half_width: usize,
    pub half_height: usize,
    pub ll: Vec<f64>,
    pub lh: Vec<f64>,
    pub hl: Vec<f64>,
    pub hh: Vec<f64>,
}

impl HaarBands {
    pub fn forward(img: &Image) -> Result<Self, PreprocessError> {
        img.ensure_gray()?;
        let (w, h) = (img.width(), img.height());
        if w % 2 != 0 || h % 2 != 0 {
            return Err(PreprocessError::OddDimensions { width: w, height: h });
        }
        let (hw, hh_) = (w / 2, h / 2);
        let n = hw * hh_;
        let mut bands = HaarBands {
            half_width: hw,
            half_height: hh_,
            ll: Vec::with_capacity(n),
            lh: Vec::with_capacity(n),
            hl: Vec::with_capacity(n),
            hh: Vec::with_capacity(n),
        };
        for by in 0..hh_ {
            for bx in 0..hw {
                let a = img.get(2 * bx, 2 * by) as f64;
                let b = img.get(2 * bx + 1, 2 * by) as f64;
                let c = img.get(2 * bx, 2 * by + 1) as f64;
                let d = img.get(2 * bx + 1, 2 * by + 1) as f64;
                bands.ll.push((a + b + c + d) / 4.0);
                bands.lh.push((a - b + c - d) / 4.0);
                bands.hl.push((a + b - c - d) / 4.0);
                bands.hh.push((a - b - c + d) / 4.0);
            }
        }
        Ok(bands)
    }

    /// Reconstructs the full-resolution field with detail bands scaled by `gain`.
    pub fn inverse(&self, gain: f64) -> Vec<f64> {
        let w = 2 * self.half_width;
        let mut out = vec![0.0; w * 2 * self.half_height];
        for by in 0..self.half_height {
            for bx in 0..self.half_width {
                let i = by * self.half_width + bx;
                let (ll, lh, hl, hh) = (self.ll[i], gain * self.lh[i], gain * self.hl[i], gain * self.hh[i]);
                out[2 * by * w + 2 * bx] = ll + lh + hl + hh;
                out[2 * by * w + 2 * bx + 1] = ll - lh + hl - hh;
                out[(2 * by + 1) * w + 2 * bx] = ll + lh - hl - hh;
                out[(2 * by + 1) * w + 2 * bx + 1] = ll - lh - hl + hh;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HaarOptions {
    /// Histogram-equalize the LL band before reconstruction.
    pub equalize_ll: bool,
    pub gains: Vec<f64>,
}

impl Default for HaarOptions {
    fn default() -> Self {
        Self { equalize_ll: true, gains: HAAR_GAIN_GRID.to_vec() }
    }
}

fn quantize(field: &[f64], width: usize, height: usize) -> Image {
    let pixels = field.iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect();
    Image::gray(width, height, pixels).expect("band dimensions")
}

/// Enhancement with explicit options; returns the image and the chosen gain.
/// Ties in entropy go to the earliest gain in the grid.
pub fn haar_enhance_with(img: &Image, options: &HaarOptions) -> Result<(Image, f64), PreprocessError> {
    if options.gains.is_empty() || options.gains.iter().any(|&g| !(g >= 1.0)) {
        return Err(PreprocessError::BadGainGrid);
    }
    let mut bands = HaarBands::forward(img)?;
    if options.equalize_ll {
        let ll_img = quantize(&bands.ll, bands.half_width, bands.half_height);
        bands.ll = equalize(&ll_img)?.pixels().iter().map(|&v| v as f64).collect();
    }
    let (w, h) = (img.width(), img.height());
    let mut best: Option<(Image, f64, f64)> = None;
    for &gain in &options.gains {
        let candidate = quantize(&bands.inverse(gain), w, h);
        let entropy = histogram_entropy(&candidate)?;
        if best.as_ref().map_or(true, |(_, _, e)| entropy > *e) {
            best = Some((candidate, gain, entropy));
        }
    }
    let (out, gain, _) = best.expect("non-empty gain grid");
    Ok((out, gain))
}

/// LL band equalized, detail gain picked from [`HAAR_GAIN_GRID`] to maximize
/// the output histogram entropy.
pub fn haar_enhance(img: &Image) -> Result<Image, PreprocessError> {
    haar_enhance_with(img, &HaarOptions::default()).map(|(out, _)| out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_stays_constant() {
        let img = Image::filled(8, 6, 77).unwrap();
        assert_eq!(haar_enhance(&img).unwrap(), img);
    }

    #[test]
    fn perfect_reconstruction() {
        let img = Image::from_fn(10, 8, |x, y| ((x * 53 + y * 29 + x * y) % 256) as u8).unwrap();
        let opts = HaarOptions { equalize_ll: false, gains: vec![1.0] };
        let (out, gain) = haar_enhance_with(&img, &opts).unwrap();
        assert_eq!(gain, 1.0);
        assert_eq!(out, img);
        let exact = HaarBands::forward(&img).unwrap().inverse(1.0);
        assert!(exact.iter().zip(img.pixels()).all(|(a, &b)| *a == b as f64));
    }

    #[test]
    fn low_contrast_gradient_gains_entropy() {
        let img = Image::from_fn(32, 32, |x, y| (100 + (x + y) / 4) as u8).unwrap();
        let out = haar_enhance(&img).unwrap();
        assert!(histogram_entropy(&out).unwrap() >= histogram_entropy(&img).unwrap());
    }

    #[test]
    fn odd_dimensions_rejected() {
        let img = Image::filled(5, 4, 0).unwrap();
        assert_eq!(haar_enhance(&img), Err(PreprocessError::OddDimensions { width: 5, height: 4 }));
        let even = Image::filled(4, 4, 0).unwrap();
        let bad = HaarOptions { equalize_ll: true, gains: vec![0.5] };
        assert_eq!(haar_enhance_with(&even, &bad), Err(PreprocessError::BadGainGrid));
    }
}

//! Contrast and frequency-domain enhancement plus the linear bias model.

mod bias;
mod frequency;
mod haar;

pub use bias::{fit_bias, sse_of, BiasModel};
pub use frequency::{dft_enhance, FilterMode};
pub use haar::{haar_enhance, haar_enhance_with, HaarBands, HaarOptions, HAAR_GAIN_GRID};

use crate::image::{Image, ImageError};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PreprocessError {
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("cutoff {0} must lie in (0, 1]")]
    CutoffOutOfRange(f64),
    #[error("Haar decomposition needs even dimensions, got {width}x{height}")]
    OddDimensions { width: usize, height: usize },
    #[error("gain grid must be non-empty with every gain >= 1")]
    BadGainGrid,
    #[error("sample lengths differ: {xs} xs vs {ys} ys")]
    LengthMismatch { xs: usize, ys: usize },
    #[error("at least 2 samples are required, got {0}")]
    TooFewSamples(usize),
    #[error("all xs are equal; the slope is undetermined")]
    DegenerateXs,
}

/// 256-bin intensity histogram and its cumulative distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramSpec {
    pub counts: [u64; 256],
    pub cdf: [f64; 256],
}

impl HistogramSpec {
    pub fn of(img: &Image) -> Result<Self, ImageError> {
        img.ensure_gray()?;
        let mut counts = [0u64; 256];
        for &v in img.pixels() {
            counts[v as usize] += 1;
        }
        let total = img.pixels().len() as f64;
        let mut cdf = [0.0; 256];
        let mut running = 0u64;
        for (k, &c) in counts.iter().enumerate() {
            running += c;
            cdf[k] = running as f64 / total;
        }
        Ok(Self { counts, cdf })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Shannon entropy of the normalized histogram, in bits.
    pub fn entropy(&self) -> f64 {
        let total = self.total() as f64;
        self.counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / total;
                -p * p.log2()
            })
            .sum()
    }
}

pub fn histogram_entropy(img: &Image) -> Result<f64, ImageError> {
    Ok(HistogramSpec::of(img)?.entropy())
}

/// Level mapping `floor((cdf(v) - cdf_min) / (1 - cdf_min) * 255)`, evaluated
/// in integer arithmetic on cumulative counts so the floor is exact.
/// Returns `None` for a constant image.
fn equalization_map(hist: &HistogramSpec) -> Option<[u8; 256]> {
    let total = hist.total();
    let first = hist.counts.iter().position(|&c| c > 0)?;
    let cum_min = hist.counts[first];
    if cum_min == total {
        return None;
    }
    let mut map = [0u8; 256];
    let mut running = 0u64;
    for (v, &c) in hist.counts.iter().enumerate() {
        running += c;
        if running >= cum_min {
            map[v] = ((running - cum_min) * 255 / (total - cum_min)) as u8;
        }
    }
    Some(map)
}

/// Histogram equalization. Constant images come back unchanged.
pub fn equalize(img: &Image) -> Result<Image, PreprocessError> {
    let hist = HistogramSpec::of(img)?;
    let Some(map) = equalization_map(&hist) else {
        return Ok(img.clone());
    };
    let pixels = img.pixels().iter().map(|&v| map[v as usize]).collect();
    Ok(Image::gray(img.width(), img.height(), pixels)?)
}

//! Rasters, label fields and displacement label sets.

mod pnm;
mod scene;

pub use pnm::{read_pnm, write_pnm, PnmError};
pub use scene::{gen_scene, scene_template, SceneClass, SCENE_CLASSES};

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ImageError {
    #[error("image dimensions must be positive, got {width}x{height}")]
    EmptyDimensions { width: usize, height: usize },
    #[error("channel count must be 1 or 3, got {0}")]
    BadChannels(usize),
    #[error("pixel buffer has {got} entries, expected {expected}")]
    BufferLength { expected: usize, got: usize },
    #[error("expected a single-channel image, got {0} channels")]
    NotGrayscale(usize),
    #[error("label {label} at index {index} is out of range for {label_count} labels")]
    LabelOutOfRange { index: usize, label: usize, label_count: usize },
    #[error("label count must be at least 1")]
    NoLabels,
    #[error("displacement offsets must be distinct, (dx, dy) = ({0}, {1}) repeats")]
    DuplicateOffset(i32, i32),
    #[error("displacement label set must contain (0, 0)")]
    MissingZeroOffset,
    #[error("scene class {0} is out of range (0..=4)")]
    BadSceneClass(usize),
    #[error("scene size {0} is below the minimum of 8")]
    SceneTooSmall(usize),
    #[error("noise level {0} is out of range (1..=3)")]
    BadNoiseLevel(u8),
}

/// Row-major raster of 8-bit intensities with one (gray) or three (RGB)
/// interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    pixels: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, pixels: Vec<u8>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyDimensions { width, height });
        }
        if channels != 1 && channels != 3 {
            return Err(ImageError::BadChannels(channels));
        }
        let expected = width * height * channels;
        if pixels.len() != expected {
            return Err(ImageError::BufferLength { expected, got: pixels.len() });
        }
        Ok(Self { width, height, channels, pixels })
    }

    pub fn gray(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, ImageError> {
        Self::new(width, height, 1, pixels)
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self, ImageError> {
        Self::gray(width, height, vec![value; width * height])
    }

    /// Builds a grayscale image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Result<Self, ImageError> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::gray(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn is_gray(&self) -> bool {
        self.channels == 1
    }

    pub fn ensure_gray(&self) -> Result<(), ImageError> {
        if self.is_gray() {
            Ok(())
        } else {
            Err(ImageError::NotGrayscale(self.channels))
        }
    }

    /// Intensity of channel 0 at `(x, y)`.
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[(y * self.width + x) * self.channels]
    }

    /// Intensity with coordinates clamped to the image border.
    #[inline]
    pub fn get_clamped(&self, x: i64, y: i64) -> u8 {
        let x = x.clamp(0, self.width as i64 - 1) as usize;
        let y = y.clamp(0, self.height as i64 - 1) as usize;
        self.get(x, y)
    }

    /// Grayscale copy. RGB uses the rounded integer rule (299R + 587G + 114B) / 1000.
    pub fn to_gray(&self) -> Image {
        if self.is_gray() {
            return self.clone();
        }
        let pixels = self
            .pixels
            .chunks_exact(3)
            .map(|p| {
                let weighted = 299 * p[0] as u32 + 587 * p[1] as u32 + 114 * p[2] as u32;
                ((weighted + 500) / 1000) as u8
            })
            .collect();
        Image { width: self.width, height: self.height, channels: 1, pixels }
    }

    /// Sub-rectangle copy; the caller guarantees it lies inside the image.
    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Image {
        assert!(x0 + width <= self.width && y0 + height <= self.height, "crop out of bounds");
        let mut pixels = Vec::with_capacity(width * height * self.channels);
        for y in y0..y0 + height {
            let start = (y * self.width + x0) * self.channels;
            pixels.extend_from_slice(&self.pixels[start..start + width * self.channels]);
        }
        Image { width, height, channels: self.channels, pixels }
    }

    /// Intensities of a grayscale image scaled to [0, 1].
    pub fn normalized(&self) -> Vec<f64> {
        self.pixels.iter().map(|&v| v as f64 / 255.0).collect()
    }
}

/// Per-pixel discrete strategy: a class label or a displacement index.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelField {
    width: usize,
    height: usize,
    label_count: usize,
    labels: Vec<usize>,
}

impl LabelField {
    pub fn new(width: usize, height: usize, label_count: usize, labels: Vec<usize>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyDimensions { width, height });
        }
        if label_count == 0 {
            return Err(ImageError::NoLabels);
        }
        if labels.len() != width * height {
            return Err(ImageError::BufferLength { expected: width * height, got: labels.len() });
        }
        if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= label_count) {
            return Err(ImageError::LabelOutOfRange { index, label, label_count });
        }
        Ok(Self { width, height, label_count, labels })
    }

    pub fn uniform(width: usize, height: usize, label_count: usize, label: usize) -> Result<Self, ImageError> {
        Self::new(width, height, label_count, vec![label; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn label_count(&self) -> usize {
        self.label_count
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn get(&self, index: usize) -> usize {
        self.labels[index]
    }

    /// Panics if `label` is out of range.
    #[inline]
    pub fn set(&mut self, index: usize, label: usize) {
        assert!(label < self.label_count, "label out of range");
        self.labels[index] = label;
    }

    /// Visualization image: labels spread evenly over 0..=255.
    pub fn to_image(&self) -> Image {
        let span = (self.label_count - 1).max(1);
        let pixels = self.labels.iter().map(|&l| ((l * 255 + span / 2) / span) as u8).collect();
        Image { width: self.width, height: self.height, channels: 1, pixels }
    }
}

/// Ordered set of integer displacements a pixel may choose from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DisplacementLabelSet {
    offsets: Vec<(i32, i32)>,
    radius: i32,
}

impl DisplacementLabelSet {
    pub fn new(offsets: Vec<(i32, i32)>) -> Result<Self, ImageError> {
        let mut seen = std::collections::HashSet::new();
        for &o in &offsets {
            if !seen.insert(o) {
                return Err(ImageError::DuplicateOffset(o.0, o.1));
            }
        }
        if !seen.contains(&(0, 0)) {
            return Err(ImageError::MissingZeroOffset);
        }
        let radius = offsets.iter().map(|&(dx, dy)| dx.abs().max(dy.abs())).max().unwrap_or(0);
        Ok(Self { offsets, radius })
    }

    /// Every offset with |dx|, |dy| <= radius, rows (dy) outer, dx inner.
    pub fn square(radius: u32) -> Self {
        let r = radius as i32;
        let offsets = (-r..=r).flat_map(|dy| (-r..=r).map(move |dx| (dx, dy))).collect();
        Self { offsets, radius: r }
    }

    pub fn offsets(&self) -> &[(i32, i32)] {
        &self.offsets
    }

    pub fn radius(&self) -> i32 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn index_of(&self, offset: (i32, i32)) -> Option<usize> {
        self.offsets.iter().position(|&o| o == offset)
    }

    pub fn zero_index(&self) -> usize {
        self.index_of((0, 0)).expect("zero offset is an invariant")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_buffers() {
        assert_eq!(Image::gray(2, 2, vec![0; 3]), Err(ImageError::BufferLength { expected: 4, got: 3 }));
        assert_eq!(Image::new(1, 1, 2, vec![0; 2]), Err(ImageError::BadChannels(2)));
        assert!(matches!(Image::gray(0, 1, vec![]), Err(ImageError::EmptyDimensions { .. })));
    }

    #[test]
    fn gray_conversion_uses_rounded_integer_weights() {
        let img = Image::new(2, 1, 3, vec![255, 0, 0, 10, 20, 30]).unwrap();
        let g = img.to_gray();
        // 299*255/1000 = 76.245 -> 76; (2990 + 11740 + 3420)/1000 = 18.15 -> 18
        assert_eq!(g.pixels(), &[76, 18]);
    }

    #[test]
    fn label_field_rejects_out_of_range() {
        let err = LabelField::new(2, 1, 2, vec![0, 2]).unwrap_err();
        assert_eq!(err, ImageError::LabelOutOfRange { index: 1, label: 2, label_count: 2 });
    }

    #[test]
    fn label_visualization_spans_full_range() {
        let f = LabelField::new(3, 1, 3, vec![0, 1, 2]).unwrap();
        assert_eq!(f.to_image().pixels(), &[0, 128, 255]);
    }

    #[test]
    fn displacement_sets() {
        let s = DisplacementLabelSet::square(2);
        assert_eq!(s.len(), 25);
        assert_eq!(s.offsets()[s.zero_index()], (0, 0));
        assert_eq!(s.radius(), 2);
        assert_eq!(DisplacementLabelSet::new(vec![(1, 0)]), Err(ImageError::MissingZeroOffset));
        assert_eq!(DisplacementLabelSet::new(vec![(0, 0), (0, 0)]), Err(ImageError::DuplicateOffset(0, 0)));
    }

    #[test]
    fn crop_copies_exact_subarray() {
        let img = Image::from_fn(4, 4, |x, y| (y * 4 + x) as u8).unwrap();
        let c = img.crop(1, 2, 2, 2);
        assert_eq!(c.pixels(), &[9, 10, 13, 14]);
    }
}

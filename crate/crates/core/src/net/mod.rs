//! A small convolutional network with hand-written backpropagation.
//!
//! Tensors are flat `Vec<f64>` in channel-major `(c, h, w)` order. The
//! embedding of a sample is the activation entering the final dense layer;
//! the output of that layer is the vector of class scores.

mod checkpoint;
mod loss;
mod mining;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointError, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use loss::{
    batch_loss_and_grad, combined_loss, grad_check, triplet_loss, GradCheckReport, LossBreakdown, LossWeights, Triplet,
};
pub use mining::{augment, mine_triplets, MinedTriplets};
pub use train::{predict, train, Dataset, TrainConfig};

use crate::image::{Image, ImageError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub const NUM_CLASSES: usize = 5;
pub const EMBEDDING_DIM: usize = 32;

#[derive(Debug, Error, PartialEq)]
pub enum NetError {
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("layer {layer}: {reason}")]
    BadLayer { layer: usize, reason: String },
    #[error("network must end with a dense classifier layer")]
    MissingClassifier,
    #[error("input shape {got:?} does not match the network input {expected:?}")]
    ShapeMismatch { expected: Shape, got: Shape },
    #[error("vector lengths differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("margin must be > 0, got {0}")]
    BadMargin(f64),
    #[error("loss weight {index} is {value}; every weight must be > 0")]
    NonPositiveWeight { index: usize, value: f64 },
    #[error("{weights} loss weights for {terms} loss terms")]
    TermCountMismatch { weights: usize, terms: usize },
    #[error("triplet mining needs at least two classes")]
    SingleClass,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dataset has no sample of class {0}")]
    MissingClass(usize),
    #[error("label {label} out of range for {classes} classes")]
    BadLabel { label: usize, classes: usize },
    #[error("crop {crop:?} larger than image {image:?}")]
    CropTooLarge { crop: (usize, usize), image: (usize, usize) },
    #[error("invalid training config: {0}")]
    BadConfig(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub fn new(c: usize, h: usize, w: usize) -> Self {
        Self { c, h, w }
    }

    pub fn len(&self) -> usize {
        self.c * self.h * self.w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolKind {
    Max,
    Average,
}

/// Valid-padding convolution; weights are `(out, in, kh, kw)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Fully connected layer; weights are `(out, in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv(Conv),
    Pool { kind: PoolKind, window: usize, stride: usize },
    Relu,
    Flatten,
    Dense(Dense),
}

impl Layer {
    fn output_shape(&self, index: usize, input: Shape) -> Result<Shape, NetError> {
        let bad = |reason: String| NetError::BadLayer { layer: index, reason };
        match self {
            Layer::Conv(c) => {
                if c.stride == 0 || c.kh == 0 || c.kw == 0 {
                    return Err(bad("kernel and stride must be positive".into()));
                }
                if c.in_channels != input.c {
                    return Err(bad(format!("expects {} channels, got {}", c.in_channels, input.c)));
                }
                if c.kh > input.h || c.kw > input.w {
                    return Err(bad("kernel larger than input".into()));
                }
                if c.weights.len() != c.out_channels * c.in_channels * c.kh * c.kw || c.bias.len() != c.out_channels {
                    return Err(bad("parameter tensor has the wrong size".into()));
                }
                Ok(Shape::new(c.out_channels, (input.h - c.kh) / c.stride + 1, (input.w - c.kw) / c.stride + 1))
            }
            Layer::Pool { window, stride, .. } => {
                if *window == 0 || *stride == 0 || *window > input.h || *window > input.w {
                    return Err(bad("pool window must be positive and fit the input".into()));
                }
                Ok(Shape::new(input.c, (input.h - window) / stride + 1, (input.w - window) / stride + 1))
            }
            Layer::Relu => Ok(input),
            Layer::Flatten => Ok(Shape::new(input.len(), 1, 1)),
            Layer::Dense(d) => {
                if d.inputs != input.len() {
                    return Err(bad(format!("expects {} inputs, got {}", d.inputs, input.len())));
                }
                if d.weights.len() != d.inputs * d.outputs || d.bias.len() != d.outputs {
                    return Err(bad("parameter tensor has the wrong size".into()));
                }
                Ok(Shape::new(d.outputs, 1, 1))
            }
        }
    }

    fn params(&self) -> Option<(&[f64], &[f64])> {
        match self {
            Layer::Conv(c) => Some((&c.weights, &c.bias)),
            Layer::Dense(d) => Some((&d.weights, &d.bias)),
            _ => None,
        }
    }

    fn params_mut(&mut self) -> Option<(&mut Vec<f64>, &mut Vec<f64>)> {
        match self {
            Layer::Conv(c) => Some((&mut c.weights, &mut c.bias)),
            Layer::Dense(d) => Some((&mut d.weights, &mut d.bias)),
            _ => None,
        }
    }
}

/// Validated layer stack with its per-layer activation shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct NetSpec {
    input: Shape,
    layers: Vec<Layer>,
    shapes: Vec<Shape>,
}

/// Per-layer parameter gradients in the same layout as the parameters.
/// Parameter-free layers carry empty vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct NetGrads {
    pub layers: Vec<(Vec<f64>, Vec<f64>)>,
}

impl NetGrads {
    fn zeros_like(net: &NetSpec) -> Self {
        let layers = net
            .layers
            .iter()
            .map(|l| l.params().map_or((vec![], vec![]), |(w, b)| (vec![0.0; w.len()], vec![0.0; b.len()])))
            .collect();
        Self { layers }
    }

    fn add_assign(&mut self, other: &NetGrads) {
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            w.iter_mut().zip(ow).for_each(|(x, y)| *x += y);
            b.iter_mut().zip(ob).for_each(|(x, y)| *x += y);
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|(w, b)| w.iter().chain(b)).copied().collect()
    }
}

impl NetSpec {
    pub fn new(input: Shape, layers: Vec<Layer>) -> Result<Self, NetError> {
        if !matches!(layers.last(), Some(Layer::Dense(_))) {
            return Err(NetError::MissingClassifier);
        }
        let mut shapes = vec![input];
        for (i, layer) in layers.iter().enumerate() {
            let next = layer.output_shape(i, *shapes.last().expect("non-empty"))?;
            if let Some((w, b)) = layer.params() {
                if w.iter().chain(b).any(|v| !v.is_finite()) {
                    return Err(NetError::BadLayer { layer: i, reason: "non-finite parameter".into() });
                }
            }
            shapes.push(next);
        }
        Ok(Self { input, layers, shapes })
    }

    /// conv 3×3 (1→8) → relu → max-pool 2 → conv 3×3 (8→16) → relu →
    /// max-pool 2 → flatten → dense (→32) → relu → dense (→5), with seeded
    /// uniform initialization in ±sqrt(6 / (fan_in + fan_out)).
    pub fn default_architecture(input_size: usize, seed: u64) -> Result<Self, NetError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let conv1 = conv_init(1, 8, 3, &mut rng);
        let conv2 = conv_init(8, 16, 3, &mut rng);
        let s1 = input_size.checked_sub(2).ok_or(NetError::BadLayer { layer: 0, reason: "input too small".into() })?;
        let p1 = s1.checked_sub(2).map(|v| v / 2 + 1).unwrap_or(0);
        let s2 = p1.saturating_sub(2);
        let p2 = s2.checked_sub(2).map(|v| v / 2 + 1).unwrap_or(0);
        if p2 == 0 {
            return Err(NetError::BadLayer { layer: 0, reason: format!("input size {input_size} is too small") });
        }
        let flat = 16 * p2 * p2;
        let layers = vec![
            Layer::Conv(conv1),
            Layer::Relu,
            Layer::Pool { kind: PoolKind::Max, window: 2, stride: 2 },
            Layer::Conv(conv2),
            Layer::Relu,
            Layer::Pool { kind: PoolKind::Max, window: 2, stride: 2 },
            Layer::Flatten,
            Layer::Dense(dense_init(flat, EMBEDDING_DIM, &mut rng)),
            Layer::Relu,
            Layer::Dense(dense_init(EMBEDDING_DIM, NUM_CLASSES, &mut rng)),
        ];
        Self::new(Shape::new(1, input_size, input_size), layers)
    }

    pub fn input_shape(&self) -> Shape {
        self.input
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Activation shapes; entry 0 is the input, entry `k + 1` the output of layer `k`.
    pub fn shapes(&self) -> &[Shape] {
        &self.shapes
    }

    pub fn classes(&self) -> usize {
        self.shapes.last().expect("non-empty").len()
    }

    pub fn embedding_dim(&self) -> usize {
        self.shapes[self.shapes.len() - 2].len()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().filter_map(Layer::params).map(|(w, b)| w.len() + b.len()).sum()
    }

    pub fn params_flat(&self) -> Vec<f64> {
        self.layers.iter().filter_map(Layer::params).flat_map(|(w, b)| w.iter().chain(b)).copied().collect()
    }

    /// Mutable reference to the `index`-th parameter in [`params_flat`] order.
    ///
    /// [`params_flat`]: NetSpec::params_flat
    pub fn param_mut(&mut self, mut index: usize) -> &mut f64 {
        for layer in &mut self.layers {
            if let Some((w, b)) = layer.params_mut() {
                if index < w.len() {
                    return &mut w[index];
                }
                index -= w.len();
                if index < b.len() {
                    return &mut b[index];
                }
                index -= b.len();
            }
        }
        panic!("parameter index out of range");
    }

    pub(crate) fn apply_update(&mut self, grads: &NetGrads, learning_rate: f64) {
        for (layer, (gw, gb)) in self.layers.iter_mut().zip(&grads.layers) {
            if let Some((w, b)) = layer.params_mut() {
                w.iter_mut().zip(gw).for_each(|(p, g)| *p -= learning_rate * g);
                b.iter_mut().zip(gb).for_each(|(p, g)| *p -= learning_rate * g);
            }
        }
    }

    /// Replaces the last layer's parameters with zeros.
    pub fn zero_classifier(&mut self) {
        if let Some(Layer::Dense(d)) = self.layers.last_mut() {
            d.weights.iter_mut().for_each(|v| *v = 0.0);
            d.bias.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    pub fn image_to_input(&self, img: &Image) -> Result<Vec<f64>, NetError> {
        let got = Shape::new(img.channels(), img.height(), img.width());
        if got != self.input {
            return Err(NetError::ShapeMismatch { expected: self.input, got });
        }
        // interleaved HWC pixels to planar CHW
        let (c, plane) = (img.channels(), img.pixel_count());
        let mut out = vec![0.0; plane * c];
        for (i, &v) in img.pixels().iter().enumerate() {
            out[(i % c) * plane + i / c] = v as f64 / 255.0;
        }
        Ok(out)
    }

    /// Every activation: entry 0 is the input, entry `k + 1` the output of layer `k`.
    pub fn forward_trace(&self, input: &[f64]) -> Result<Vec<Vec<f64>>, NetError> {
        if input.len() != self.input.len() {
            return Err(NetError::DimensionMismatch(self.input.len(), input.len()));
        }
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(input.to_vec());
        for (k, layer) in self.layers.iter().enumerate() {
            let out = layer_forward(layer, self.shapes[k], self.shapes[k + 1], &acts[k]);
            acts.push(out);
        }
        Ok(acts)
    }

    /// `(embedding, class scores)` for a raw input tensor.
    pub fn forward_input(&self, input: &[f64]) -> Result<(Vec<f64>, Vec<f64>), NetError> {
        let mut acts = self.forward_trace(input)?;
        let scores = acts.pop().expect("output");
        let embedding = acts.pop().expect("embedding");
        Ok((embedding, scores))
    }

    /// Gradients given `d_scores` at the output and `d_embedding` at the
    /// input of the final dense layer.
    pub fn backward(&self, acts: &[Vec<f64>], d_scores: &[f64], d_embedding: &[f64]) -> NetGrads {
        let mut grads = NetGrads::zeros_like(self);
        let mut upstream = d_scores.to_vec();
        let last = self.layers.len() - 1;
        for k in (0..self.layers.len()).rev() {
            let (downstream, gw, gb) =
                layer_backward(&self.layers[k], self.shapes[k], self.shapes[k + 1], &acts[k], &upstream, k > 0);
            grads.layers[k] = (gw, gb);
            upstream = downstream;
            if k == last {
                upstream.iter_mut().zip(d_embedding).for_each(|(u, d)| *u += d);
            }
        }
        grads
    }
}

/// `(embedding, class scores)` for an image.
pub fn forward(net: &NetSpec, img: &Image) -> Result<(Vec<f64>, Vec<f64>), NetError> {
    net.forward_input(&net.image_to_input(img)?)
}

fn glorot(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

fn conv_init(in_c: usize, out_c: usize, k: usize, rng: &mut ChaCha8Rng) -> Conv {
    let limit = glorot(in_c * k * k, out_c * k * k);
    Conv {
        in_channels: in_c,
        out_channels: out_c,
        kh: k,
        kw: k,
        stride: 1,
        weights: (0..out_c * in_c * k * k).map(|_| rng.gen_range(-limit..=limit)).collect(),
        bias: vec![0.0; out_c],
    }
}

fn dense_init(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Dense {
    let limit = glorot(inputs, outputs);
    Dense {
        inputs,
        outputs,
        weights: (0..inputs * outputs).map(|_| rng.gen_range(-limit..=limit)).collect(),
        bias: vec![0.0; outputs],
    }
}

/// Index (within the input tensor) of the first maximum of a pooling window.
#[inline]
fn pool_argmax(input: &[f64], shape: Shape, c: usize, y0: usize, x0: usize, window: usize) -> usize {
    let mut best = (c * shape.h + y0) * shape.w + x0;
    for dy in 0..window {
        for dx in 0..window {
            let i = (c * shape.h + y0 + dy) * shape.w + x0 + dx;
            if input[i] > input[best] {
                best = i;
            }
        }
    }
    best
}

fn layer_forward(layer: &Layer, ins: Shape, outs: Shape, input: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; outs.len()];
    match layer {
        Layer::Conv(cv) => {
            let plane = outs.h * outs.w;
            for o in 0..cv.out_channels {
                out[o * plane..(o + 1) * plane].iter_mut().for_each(|v| *v = cv.bias[o]);
                for i in 0..cv.in_channels {
                    for ky in 0..cv.kh {
                        for kx in 0..cv.kw {
                            let wv = cv.weights[((o * cv.in_channels + i) * cv.kh + ky) * cv.kw + kx];
                            for oy in 0..outs.h {
                                let row = (i * ins.h + oy * cv.stride + ky) * ins.w + kx;
                                let dst = &mut out[o * plane + oy * outs.w..o * plane + (oy + 1) * outs.w];
                                for (ox, d) in dst.iter_mut().enumerate() {
                                    *d += wv * input[row + ox * cv.stride];
                                }
                            }
                        }
                    }
                }
            }
        }
        Layer::Pool { kind, window, stride } => {
            let area = (window * window) as f64;
            for c in 0..outs.c {
                for oy in 0..outs.h {
                    for ox in 0..outs.w {
                        let (y0, x0) = (oy * stride, ox * stride);
                        out[(c * outs.h + oy) * outs.w + ox] = match kind {
                            PoolKind::Max => input[pool_argmax(input, ins, c, y0, x0, *window)],
                            PoolKind::Average => {
                                let mut s = 0.0;
                                for dy in 0..*window {
                                    for dx in 0..*window {
                                        s += input[(c * ins.h + y0 + dy) * ins.w + x0 + dx];
                                    }
                                }
                                s / area
                            }
                        };
                    }
                }
            }
        }
        Layer::Relu => out.iter_mut().zip(input).for_each(|(o, &x)| *o = x.max(0.0)),
        Layer::Flatten => out.copy_from_slice(input),
        Layer::Dense(d) => {
            for (o, v) in out.iter_mut().enumerate() {
                let row = &d.weights[o * d.inputs..(o + 1) * d.inputs];
                *v = d.bias[o] + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>();
            }
        }
    }
    out
}

/// Returns `(d_input, d_weights, d_bias)`. `d_input` is skipped (empty)
/// when `need_input_grad` is false.
fn layer_backward(
    layer: &Layer,
    ins: Shape,
    outs: Shape,
    input: &[f64],
    upstream: &[f64],
    need_input_grad: bool,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    match layer {
        Layer::Conv(cv) => {
            let plane = outs.h * outs.w;
            let mut dw = vec![0.0; cv.weights.len()];
            let mut dx = if need_input_grad { vec![0.0; ins.len()] } else { vec![] };
            let db: Vec<f64> = (0..cv.out_channels).map(|o| upstream[o * plane..(o + 1) * plane].iter().sum()).collect();
            for o in 0..cv.out_channels {
                for i in 0..cv.in_channels {
                    for ky in 0..cv.kh {
                        for kx in 0..cv.kw {
                            let widx = ((o * cv.in_channels + i) * cv.kh + ky) * cv.kw + kx;
                            let wv = cv.weights[widx];
                            let mut acc = 0.0;
                            for oy in 0..outs.h {
                                let row = (i * ins.h + oy * cv.stride + ky) * ins.w + kx;
                                let up = &upstream[o * plane + oy * outs.w..o * plane + (oy + 1) * outs.w];
                                for (ox, &g) in up.iter().enumerate() {
                                    acc += g * input[row + ox * cv.stride];
                                    if need_input_grad {
                                        dx[row + ox * cv.stride] += g * wv;
                                    }
                                }
                            }
                            dw[widx] = acc;
                        }
                    }
                }
            }
            (dx, dw, db)
        }
        Layer::Pool { kind, window, stride } => {
            let mut dx = vec![0.0; ins.len()];
            let area = (window * window) as f64;
            for c in 0..outs.c {
                for oy in 0..outs.h {
                    for ox in 0..outs.w {
                        let g = upstream[(c * outs.h + oy) * outs.w + ox];
                        let (y0, x0) = (oy * stride, ox * stride);
                        match kind {
                            PoolKind::Max => dx[pool_argmax(input, ins, c, y0, x0, *window)] += g,
                            PoolKind::Average => {
                                for dy in 0..*window {
                                    for dxx in 0..*window {
                                        dx[(c * ins.h + y0 + dy) * ins.w + x0 + dxx] += g / area;
                                    }
                                }
                            }
                        }
                    }
                }
            }
            (dx, vec![], vec![])
        }
        Layer::Relu => {
            let dx = upstream.iter().zip(input).map(|(&g, &x)| if x > 0.0 { g } else { 0.0 }).collect();
            (dx, vec![], vec![])
        }
        Layer::Flatten => (upstream.to_vec(), vec![], vec![]),
        Layer::Dense(d) => {
            let mut dw = vec![0.0; d.weights.len()];
            let mut dx = vec![0.0; d.inputs];
            for (o, &g) in upstream.iter().enumerate() {
                let row = &d.weights[o * d.inputs..(o + 1) * d.inputs];
                let drow = &mut dw[o * d.inputs..(o + 1) * d.inputs];
                for j in 0..d.inputs {
                    drow[j] = g * input[j];
                    dx[j] += g * row[j];
                }
            }
            (dx, dw, upstream.to_vec())
        }
    }
}

/// Kink signature of a forward pass: relu signs and max-pool argmaxes.
/// Finite differences are only meaningful while this stays fixed.
pub(crate) fn activation_pattern(net: &NetSpec, acts: &[Vec<f64>]) -> Vec<usize> {
    let mut pattern = Vec::new();
    for (k, layer) in net.layers.iter().enumerate() {
        match layer {
            Layer::Relu => pattern.extend(acts[k].iter().map(|&x| (x > 0.0) as usize)),
            Layer::Pool { kind: PoolKind::Max, window, stride } => {
                let (ins, outs) = (net.shapes[k], net.shapes[k + 1]);
                for c in 0..outs.c {
                    for oy in 0..outs.h {
                        for ox in 0..outs.w {
                            pattern.push(pool_argmax(&acts[k], ins, c, oy * stride, ox * stride, *window));
                        }
                    }
                }
            }
            _ => {}
        }
    }
    pattern
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(layer: Layer, input: Shape) -> NetSpec {
        let flat = layer.output_shape(0, input).unwrap().len();
        let id = Dense { inputs: flat, outputs: flat, weights: identity(flat), bias: vec![0.0; flat] };
        NetSpec::new(input, vec![layer, Layer::Flatten, Layer::Dense(id)]).unwrap()
    }

    fn identity(n: usize) -> Vec<f64> {
        let mut w = vec![0.0; n * n];
        for i in 0..n {
            w[i * n + i] = 1.0;
        }
        w
    }

    #[test]
    fn identity_conv() {
        let conv = Conv { in_channels: 1, out_channels: 1, kh: 1, kw: 1, stride: 1, weights: vec![1.0], bias: vec![0.0] };
        let net = single(Layer::Conv(conv), Shape::new(1, 3, 4));
        let input: Vec<f64> = (0..12).map(|v| v as f64 * 0.1).collect();
        let (_, scores) = net.forward_input(&input).unwrap();
        assert_eq!(scores, input);
    }

    #[test]
    fn max_pool_window() {
        let net = single(Layer::Pool { kind: PoolKind::Max, window: 2, stride: 2 }, Shape::new(1, 2, 2));
        let (_, out) = net.forward_input(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(out, vec![4.0]);
    }

    #[test]
    fn average_pool_of_constant() {
        let net = single(Layer::Pool { kind: PoolKind::Average, window: 2, stride: 2 }, Shape::new(2, 4, 6));
        let (_, out) = net.forward_input(&[0.375; 48]).unwrap();
        assert_eq!(out.len(), 12);
        assert!(out.iter().all(|&v| v == 0.375));
    }

    #[test]
    fn default_shapes() {
        let net = NetSpec::default_architecture(20, 1).unwrap();
        let last = net.shapes().len() - 1;
        assert_eq!(net.shapes()[last], Shape::new(5, 1, 1));
        assert_eq!(net.embedding_dim(), EMBEDDING_DIM);
        assert_eq!(net.shapes()[6], Shape::new(16, 3, 3));
        assert_eq!(net.param_count(), 80 + 1168 + 144 * 32 + 32 + 165);
        let img = Image::filled(20, 20, 3).unwrap();
        let (emb, scores) = forward(&net, &img).unwrap();
        assert_eq!((emb.len(), scores.len()), (32, 5));
        let wrong = Image::filled(21, 20, 3).unwrap();
        assert!(matches!(forward(&net, &wrong), Err(NetError::ShapeMismatch { .. })));
    }

    #[test]
    fn rejects_inconsistent_stacks() {
        let d = Dense { inputs: 3, outputs: 2, weights: vec![0.0; 6], bias: vec![0.0; 2] };
        assert!(matches!(NetSpec::new(Shape::new(1, 2, 2), vec![Layer::Dense(d)]), Err(NetError::BadLayer { .. })));
        assert_eq!(NetSpec::new(Shape::new(1, 2, 2), vec![Layer::Relu]), Err(NetError::MissingClassifier));
    }

    #[test]
    fn flat_parameter_access() {
        let mut net = NetSpec::default_architecture(12, 3).unwrap();
        let flat = net.params_flat();
        assert_eq!(flat.len(), net.param_count());
        let last = flat.len() - 1;
        *net.param_mut(last) = 42.0;
        assert_eq!(net.params_flat()[last], 42.0);
        *net.param_mut(80) += 1.0;
        assert_eq!(net.params_flat()[80], flat[80] + 1.0);
    }
}

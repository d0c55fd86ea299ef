use super::loss::{check_batch, forward_all, loss_from_acts};
use super::{augment, mine_triplets, LossWeights, NetError, NetSpec, Triplet};
use crate::image::Image;
use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Labeled images.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    images: Vec<Image>,
    labels: Vec<usize>,
}

impl Dataset {
    pub fn new(images: Vec<Image>, labels: Vec<usize>) -> Result<Self, NetError> {
        if images.len() != labels.len() {
            return Err(NetError::DimensionMismatch(images.len(), labels.len()));
        }
        Ok(Self { images, labels })
    }

    pub fn images(&self) -> &[Image] {
        &self.images
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub margin: f64,
    pub triplets_per_anchor: usize,
    pub loss_weights: LossWeights,
    /// Train on the five corner/center crops of each image at the network
    /// input size instead of on the images themselves.
    pub augment: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            learning_rate: 0.05,
            batch_size: 32,
            margin: 0.5,
            triplets_per_anchor: 1,
            loss_weights: LossWeights::default(),
            augment: false,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), NetError> {
        if self.batch_size == 0 {
            return Err(NetError::BadConfig("batch_size must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(NetError::BadConfig("learning_rate must be positive"));
        }
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return Err(NetError::BadMargin(self.margin));
        }
        Ok(())
    }
}

/// Minibatch SGD on the combined loss. Each epoch visits the samples in a
/// seeded shuffle; triplets are mined inside every batch from the current
/// embeddings. Returns the trained network and the mean batch loss of each
/// epoch, measured before the batch's update.
pub fn train(net: &NetSpec, data: &Dataset, cfg: &TrainConfig) -> Result<(NetSpec, Vec<f64>), NetError> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(NetError::EmptyDataset);
    }
    let classes = net.classes();
    check_batch(net, data.len(), &data.labels, &[])?;
    if let Some(missing) = (0..classes).find(|c| !data.labels.contains(c)) {
        return Err(NetError::MissingClass(missing));
    }
    let (inputs, labels) = training_inputs(net, data, cfg.augment)?;
    let mut net = net.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<Vec<f64>> = chunk.iter().map(|&i| inputs[i].clone()).collect();
            let batch_labels: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let acts = forward_all(&net, &batch)?;
            let depth = net.layers().len();
            let embeddings: Vec<Vec<f64>> = acts.iter().map(|a| a[depth - 1].clone()).collect();
            let mine_seed = rng.next_u64();
            let triplets: Vec<Triplet> = match mine_triplets(&embeddings, &batch_labels, cfg.triplets_per_anchor, mine_seed) {
                Ok(m) => m.triplets,
                Err(NetError::SingleClass) => Vec::new(),
                Err(e) => return Err(e),
            };
            let (loss, grads) =
                loss_from_acts(&net, &acts, &batch_labels, &triplets, cfg.margin, &cfg.loss_weights, true)?;
            net.apply_update(&grads.expect("requested"), cfg.learning_rate);
            epoch_loss += loss.total;
            batches += 1;
        }
        trace.push(epoch_loss / batches as f64);
    }
    Ok((net, trace))
}

fn training_inputs(net: &NetSpec, data: &Dataset, crops: bool) -> Result<(Vec<Vec<f64>>, Vec<usize>), NetError> {
    let shape = net.input_shape();
    let mut inputs = Vec::new();
    let mut labels = Vec::new();
    for (img, &label) in data.images.iter().zip(&data.labels) {
        if crops {
            for crop in augment(img, shape.w, shape.h)? {
                inputs.push(net.image_to_input(&crop)?);
                labels.push(label);
            }
        } else {
            inputs.push(net.image_to_input(img)?);
            labels.push(label);
        }
    }
    Ok((inputs, labels))
}

/// Predicted class (lowest index among tied maxima) and the raw scores.
pub fn predict(net: &NetSpec, img: &Image) -> Result<(usize, Vec<f64>), NetError> {
    let (_, scores) = super::forward(net, img)?;
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    Ok((best, scores))
}

use super::{activation_pattern, NetError, NetGrads, NetSpec};
use crate::par;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Indices into a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triplet {
    pub anchor: usize,
    pub positive: usize,
    pub negative: usize,
}

/// Positive weights of the loss terms `(triplet, cross-entropy)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossWeights(Vec<f64>);

impl LossWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self, NetError> {
        for (index, &value) in weights.iter().enumerate() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(NetError::NonPositiveWeight { index, value });
            }
        }
        if weights.len() != 2 {
            return Err(NetError::TermCountMismatch { weights: weights.len(), terms: 2 });
        }
        Ok(Self(weights))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn triplet(&self) -> f64 {
        self.0[0]
    }

    pub fn cross_entropy(&self) -> f64 {
        self.0[1]
    }
}

impl Default for LossWeights {
    fn default() -> Self {
        Self(vec![1.0, 1.0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub triplet: f64,
    pub cross_entropy: f64,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `max(0, ‖a − p‖² − ‖a − n‖² + margin)`.
pub fn triplet_loss(anchor: &[f64], positive: &[f64], negative: &[f64], margin: f64) -> Result<f64, NetError> {
    if !(margin > 0.0 && margin.is_finite()) {
        return Err(NetError::BadMargin(margin));
    }
    if anchor.len() != positive.len() {
        return Err(NetError::DimensionMismatch(anchor.len(), positive.len()));
    }
    if anchor.len() != negative.len() {
        return Err(NetError::DimensionMismatch(anchor.len(), negative.len()));
    }
    Ok((squared_distance(anchor, positive) - squared_distance(anchor, negative) + margin).max(0.0))
}

/// `Σ a_i · f_i`.
pub fn combined_loss(weights: &LossWeights, terms: &[f64]) -> Result<f64, NetError> {
    if terms.len() != weights.0.len() {
        return Err(NetError::TermCountMismatch { weights: weights.0.len(), terms: terms.len() });
    }
    Ok(weights.0.iter().zip(terms).map(|(a, f)| a * f).sum())
}

fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

pub(crate) fn check_batch(net: &NetSpec, count: usize, labels: &[usize], triplets: &[Triplet]) -> Result<(), NetError> {
    if labels.len() != count {
        return Err(NetError::DimensionMismatch(count, labels.len()));
    }
    if count == 0 {
        return Err(NetError::EmptyDataset);
    }
    let classes = net.classes();
    if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
        return Err(NetError::BadLabel { label, classes });
    }
    for t in triplets {
        let worst = t.anchor.max(t.positive).max(t.negative);
        if worst >= count {
            return Err(NetError::DimensionMismatch(count, worst + 1));
        }
    }
    Ok(())
}

/// Loss over precomputed activations: the mean triplet hinge weighted by
/// `a1` plus the mean softmax cross-entropy weighted by `a2`. Gradients are
/// summed over samples in index order.
pub(crate) fn loss_from_acts(
    net: &NetSpec,
    acts: &[Vec<Vec<f64>>],
    labels: &[usize],
    triplets: &[Triplet],
    margin: f64,
    weights: &LossWeights,
    want_grad: bool,
) -> Result<(LossBreakdown, Option<NetGrads>), NetError> {
    let n = acts.len();
    let depth = net.layers().len();
    let emb = |i: usize| &acts[i][depth - 1];
    let mut d_emb = vec![vec![0.0; net.embedding_dim()]; n];
    let mut triplet_sum = 0.0;
    let tscale = if triplets.is_empty() { 0.0 } else { weights.triplet() / triplets.len() as f64 };
    for t in triplets {
        let (a, p, q) = (emb(t.anchor), emb(t.positive), emb(t.negative));
        let l = triplet_loss(a, p, q, margin)?;
        triplet_sum += l;
        if l > 0.0 && want_grad {
            for j in 0..a.len() {
                let (ap, aq) = (a[j] - p[j], a[j] - q[j]);
                d_emb[t.anchor][j] += tscale * 2.0 * (ap - aq);
                d_emb[t.positive][j] -= tscale * 2.0 * ap;
                d_emb[t.negative][j] += tscale * 2.0 * aq;
            }
        }
    }
    let triplet = if triplets.is_empty() { 0.0 } else { triplet_sum / triplets.len() as f64 };
    let cscale = weights.cross_entropy() / n as f64;
    let mut ce_sum = 0.0;
    let mut d_scores = Vec::with_capacity(n);
    for (i, sample) in acts.iter().enumerate() {
        let probs = softmax(&sample[depth]);
        ce_sum -= probs[labels[i]].max(f64::MIN_POSITIVE).ln();
        let mut d = probs;
        d[labels[i]] -= 1.0;
        d.iter_mut().for_each(|v| *v *= cscale);
        d_scores.push(d);
    }
    let cross_entropy = ce_sum / n as f64;
    let total = combined_loss(weights, &[triplet, cross_entropy])?;
    let breakdown = LossBreakdown { total, triplet, cross_entropy };
    if !want_grad {
        return Ok((breakdown, None));
    }
    let per_sample = par::map_range(n, |i| net.backward(&acts[i], &d_scores[i], &d_emb[i]));
    let mut grads = per_sample[0].clone();
    for g in &per_sample[1..] {
        grads.add_assign(g);
    }
    Ok((breakdown, Some(grads)))
}

pub(crate) fn forward_all(net: &NetSpec, inputs: &[Vec<f64>]) -> Result<Vec<Vec<Vec<f64>>>, NetError> {
    par::map_slice(inputs, |x| net.forward_trace(x)).into_iter().collect()
}

/// Combined loss of a batch and its parameter gradient.
pub fn batch_loss_and_grad(
    net: &NetSpec,
    inputs: &[Vec<f64>],
    labels: &[usize],
    triplets: &[Triplet],
    margin: f64,
    weights: &LossWeights,
) -> Result<(LossBreakdown, NetGrads), NetError> {
    check_batch(net, inputs.len(), labels, triplets)?;
    let acts = forward_all(net, inputs)?;
    let (loss, grads) = loss_from_acts(net, &acts, labels, triplets, margin, weights, true)?;
    Ok((loss, grads.expect("requested")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub checked: usize,
    /// Parameters passed over because a perturbation moved a relu, a
    /// max-pool argmax or a hinge across its kink.
    pub skipped_at_kinks: usize,
}

/// Floor on the denominator of the relative error so that gradients that
/// are zero up to rounding compare by absolute difference.
const GRAD_CHECK_FLOOR: f64 = 1e-6;

/// Central-difference check of `batch_loss_and_grad` on `samples` randomly
/// chosen parameters, with step `h`. Relative error is
/// `|g − ĝ| / max(|g|, |ĝ|, 1e-6)`.
#[allow(clippy::too_many_arguments)]
pub fn grad_check(
    net: &NetSpec,
    inputs: &[Vec<f64>],
    labels: &[usize],
    triplets: &[Triplet],
    margin: f64,
    weights: &LossWeights,
    samples: usize,
    h: f64,
    seed: u64,
) -> Result<GradCheckReport, NetError> {
    let (_, grads) = batch_loss_and_grad(net, inputs, labels, triplets, margin, weights)?;
    let analytic = grads.flat();
    let signature = |n: &NetSpec| -> Result<(f64, Vec<usize>), NetError> {
        let acts = forward_all(n, inputs)?;
        let mut pattern: Vec<usize> = acts.iter().flat_map(|a| activation_pattern(n, a)).collect();
        let depth = n.layers().len();
        for t in triplets {
            let (a, p, q) = (&acts[t.anchor][depth - 1], &acts[t.positive][depth - 1], &acts[t.negative][depth - 1]);
            pattern.push((squared_distance(a, p) - squared_distance(a, q) + margin > 0.0) as usize);
        }
        let (loss, _) = loss_from_acts(n, &acts, labels, triplets, margin, weights, false)?;
        Ok((loss.total, pattern))
    };
    let (_, base) = signature(net)?;
    let mut order: Vec<usize> = (0..analytic.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut work = net.clone();
    let mut report = GradCheckReport { max_relative_error: 0.0, checked: 0, skipped_at_kinks: 0 };
    for idx in order {
        if report.checked == samples {
            break;
        }
        let original = *work.param_mut(idx);
        *work.param_mut(idx) = original + h;
        let (plus, p_plus) = signature(&work)?;
        *work.param_mut(idx) = original - h;
        let (minus, p_minus) = signature(&work)?;
        *work.param_mut(idx) = original;
        if p_plus != base || p_minus != base {
            report.skipped_at_kinks += 1;
            continue;
        }
        let numeric = (plus - minus) / (2.0 * h);
        let a = analytic[idx];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR);
        report.max_relative_error = report.max_relative_error.max(rel);
        report.checked += 1;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{Dense, Layer, Shape};
    use rand::Rng;

    #[test]
    fn triplet_examples() {
        let l = triplet_loss(&[0.0, 0.0], &[1.0, 0.0], &[0.0, 2.0], 0.5).unwrap();
        assert_eq!(l, 0.0);
        let l = triplet_loss(&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0], 0.5).unwrap();
        assert_eq!(l, 0.5);
        assert_eq!(triplet_loss(&[0.0], &[0.0], &[0.0], 0.0), Err(NetError::BadMargin(0.0)));
        assert_eq!(triplet_loss(&[0.0], &[0.0, 1.0], &[0.0], 1.0), Err(NetError::DimensionMismatch(1, 2)));
    }

    #[test]
    fn combined_examples() {
        let w = LossWeights::new(vec![1.0, 0.5]).unwrap();
        assert_eq!(combined_loss(&w, &[2.0, 4.0]).unwrap(), 4.0);
        assert!(matches!(LossWeights::new(vec![1.0, 0.0]), Err(NetError::NonPositiveWeight { index: 1, .. })));
        assert!(matches!(LossWeights::new(vec![-1.0, 1.0]), Err(NetError::NonPositiveWeight { index: 0, .. })));
        assert!(combined_loss(&w, &[1.0]).is_err());
    }

    #[test]
    fn uniform_scores_cost_log_classes() {
        let mut net = NetSpec::default_architecture(12, 0).unwrap();
        net.zero_classifier();
        let inputs = vec![vec![0.5; 144]; 3];
        let (loss, _) = batch_loss_and_grad(&net, &inputs, &[0, 1, 4], &[], 0.5, &LossWeights::default()).unwrap();
        assert!((loss.cross_entropy - 5f64.ln()).abs() < 1e-12);
        assert_eq!(loss.triplet, 0.0);
    }

    #[test]
    fn linear_net_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let dense = Dense {
            inputs: 6,
            outputs: 5,
            weights: (0..30).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            bias: (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        };
        let net = NetSpec::new(Shape::new(1, 2, 3), vec![Layer::Flatten, Layer::Dense(dense)]).unwrap();
        let inputs: Vec<Vec<f64>> = (0..4).map(|_| (0..6).map(|_| rng.gen()).collect()).collect();
        let w = LossWeights::default();
        let r = grad_check(&net, &inputs, &[0, 1, 2, 3], &[], 0.5, &w, 35, 1e-4, 1).unwrap();
        assert_eq!(r.checked, 35);
        assert!(r.max_relative_error < 1e-6, "{r:?}");
    }

    #[test]
    fn default_net_matches_finite_differences() {
        let net = NetSpec::default_architecture(12, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let inputs: Vec<Vec<f64>> = (0..4).map(|_| (0..144).map(|_| rng.gen()).collect()).collect();
        let triplets = [Triplet { anchor: 0, positive: 1, negative: 2 }, Triplet { anchor: 3, positive: 2, negative: 0 }];
        let w = LossWeights::new(vec![1.0, 0.7]).unwrap();
        let r = grad_check(&net, &inputs, &[0, 0, 1, 1], &triplets, 2.0, &w, 60, 1e-4, 2).unwrap();
        assert_eq!(r.checked, 60);
        assert!(r.max_relative_error < 1e-3, "{r:?}");
    }
}

//! One-dimensional Gaussian mixtures fitted by expectation-maximization.
//!
//! The observed data are the samples; the latent variables are the component
//! indicators, whose posterior expectation is the responsibility matrix. The
//! M-step is the closed-form maximizer of the expected complete-data
//! log-likelihood, so the observed log-likelihood never decreases.

use crate::image::{Image, ImageError};
use crate::mrf::DataCosts;
use crate::par;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use thiserror::Error;

/// Lower bound on every component variance.
pub const VARIANCE_FLOOR: f64 = 1e-6;
/// Total responsibility below which a component counts as empty.
pub const EMPTY_COMPONENT: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum GmmError {
    #[error("data set is empty")]
    EmptyData,
    #[error("component count must be >= 1")]
    NoComponents,
    #[error("{components} components requested for {samples} samples")]
    TooManyComponents { components: usize, samples: usize },
    #[error("invalid mixture parameters: {0}")]
    BadParams(&'static str),
    #[error("responsibility matrix shape does not match the data")]
    ShapeMismatch,
    #[error("component {0} received no responsibility")]
    EmptyComponent(usize),
    #[error("data must be finite")]
    NonFinite,
    #[error(transparent)]
    Image(#[from] ImageError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmParams {
    weights: Vec<f64>,
    means: Vec<f64>,
    variances: Vec<f64>,
}

impl GmmParams {
    pub fn new(weights: Vec<f64>, means: Vec<f64>, variances: Vec<f64>) -> Result<Self, GmmError> {
        let m = weights.len();
        if m == 0 {
            return Err(GmmError::NoComponents);
        }
        if means.len() != m || variances.len() != m {
            return Err(GmmError::BadParams("weights, means and variances differ in length"));
        }
        if weights.iter().any(|&w| !(w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(GmmError::BadParams("weights must be a probability vector"));
        }
        if means.iter().any(|m| !m.is_finite()) {
            return Err(GmmError::BadParams("means must be finite"));
        }
        if variances.iter().any(|&v| !(v >= VARIANCE_FLOOR) || !v.is_finite()) {
            return Err(GmmError::BadParams("variances must be finite and >= the floor"));
        }
        Ok(Self { weights, means, variances })
    }

    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    /// `log(π_m N(x; μ_m, σ²_m))` for every component.
    fn log_joint(&self, x: f64, out: &mut [f64]) {
        for m in 0..self.components() {
            out[m] = self.weights[m].ln() + log_normal(x, self.means[m], self.variances[m]);
        }
    }
}

pub fn log_normal(x: f64, mean: f64, variance: f64) -> f64 {
    let d = x - mean;
    -0.5 * (2.0 * PI * variance).ln() - d * d / (2.0 * variance)
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Responsibilities (one row per sample) together with the observed-data
/// log-likelihood under `params`.
pub fn e_step_with_loglik(data: &[f64], params: &GmmParams) -> Result<(Vec<Vec<f64>>, f64), GmmError> {
    if data.is_empty() {
        return Err(GmmError::EmptyData);
    }
    let rows = par::map_slice(data, |&x| {
        let mut row = vec![0.0; params.components()];
        params.log_joint(x, &mut row);
        let norm = log_sum_exp(&row);
        for r in row.iter_mut() {
            *r = (*r - norm).exp();
        }
        (row, norm)
    });
    let loglik = rows.iter().map(|(_, n)| n).sum();
    Ok((rows.into_iter().map(|(r, _)| r).collect(), loglik))
}

pub fn e_step(data: &[f64], params: &GmmParams) -> Result<Vec<Vec<f64>>, GmmError> {
    e_step_with_loglik(data, params).map(|(r, _)| r)
}

pub fn log_likelihood(data: &[f64], params: &GmmParams) -> Result<f64, GmmError> {
    e_step_with_loglik(data, params).map(|(_, l)| l)
}

pub fn m_step(data: &[f64], resp: &[Vec<f64>]) -> Result<GmmParams, GmmError> {
    if data.is_empty() {
        return Err(GmmError::EmptyData);
    }
    if resp.len() != data.len() {
        return Err(GmmError::ShapeMismatch);
    }
    let m = resp[0].len();
    if m == 0 || resp.iter().any(|r| r.len() != m) {
        return Err(GmmError::ShapeMismatch);
    }
    let n = data.len() as f64;
    let mut weights = Vec::with_capacity(m);
    let mut means = Vec::with_capacity(m);
    let mut variances = Vec::with_capacity(m);
    for k in 0..m {
        let total: f64 = resp.iter().map(|r| r[k]).sum();
        if total < EMPTY_COMPONENT {
            return Err(GmmError::EmptyComponent(k));
        }
        let mean = resp.iter().zip(data).map(|(r, x)| r[k] * x).sum::<f64>() / total;
        let var = resp.iter().zip(data).map(|(r, x)| r[k] * (x - mean) * (x - mean)).sum::<f64>() / total;
        weights.push(total / n);
        means.push(mean);
        variances.push(var.max(VARIANCE_FLOOR));
    }
    // renormalize away rounding drift in Σ π
    let sum: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= sum);
    GmmParams::new(weights, means, variances)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmTrace {
    /// Log-likelihood of the parameters entering each E-step.
    pub loglik_per_iter: Vec<f64>,
    pub iterations_used: usize,
    pub converged: bool,
    pub epsilon: f64,
    pub max_iters: usize,
}

/// Initial parameters: means at the `(m + 0.5) / M` quantiles of the sorted
/// data, uniform weights, pooled variance. Coinciding initial means are
/// separated by a seeded perturbation so components can break symmetry.
pub fn initial_params(data: &[f64], components: usize, seed: u64) -> Result<GmmParams, GmmError> {
    if data.is_empty() {
        return Err(GmmError::EmptyData);
    }
    if components == 0 {
        return Err(GmmError::NoComponents);
    }
    if components > data.len() {
        return Err(GmmError::TooManyComponents { components, samples: data.len() });
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(GmmError::NonFinite);
    }
    let mut sorted = data.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let pooled = (sorted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64).max(VARIANCE_FLOOR);
    let mut means: Vec<f64> = (0..components)
        .map(|m| {
            let q = (m as f64 + 0.5) / components as f64;
            sorted[((q * n as f64).floor() as usize).min(n - 1)]
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1e-3 * pooled.sqrt();
    for m in 1..components {
        if means[..m].contains(&means[m]) {
            means[m] += scale * rng.gen_range(0.5..1.5);
        }
    }
    GmmParams::new(vec![1.0 / components as f64; components], means, vec![pooled; components])
}

/// EM until the absolute log-likelihood change drops below `epsilon` or
/// `max_iters` E-steps have run.
pub fn fit(
    data: &[f64],
    components: usize,
    epsilon: f64,
    max_iters: usize,
    seed: u64,
) -> Result<(GmmParams, EmTrace), GmmError> {
    let mut params = initial_params(data, components, seed)?;
    let mut trace = EmTrace { loglik_per_iter: Vec::new(), iterations_used: 0, converged: false, epsilon, max_iters };
    while trace.iterations_used < max_iters {
        let (resp, loglik) = e_step_with_loglik(data, &params)?;
        trace.iterations_used += 1;
        let previous = trace.loglik_per_iter.last().copied();
        trace.loglik_per_iter.push(loglik);
        if previous.is_some_and(|p| (loglik - p).abs() < epsilon) {
            trace.converged = true;
            break;
        }
        params = m_step(data, &resp)?;
    }
    Ok((params, trace))
}

/// `-log N(y_p; μ_l, σ²_l)` for every pixel (intensity scaled to [0, 1]) and
/// every component. Mixture weights are not included.
pub fn data_costs(img: &Image, params: &GmmParams) -> Result<DataCosts, GmmError> {
    img.ensure_gray()?;
    let ys = img.normalized();
    let costs = DataCosts::from_fn(ys.len(), params.components(), |p, l| {
        -log_normal(ys[p], params.means[l], params.variances[l])
    });
    Ok(costs.expect("finite by construction"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn density(x: f64, mean: f64, var: f64) -> f64 {
        (-(x - mean).powi(2) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
    }

    #[test]
    fn single_component_responsibility() {
        let p = GmmParams::new(vec![1.0], vec![0.3], vec![0.2]).unwrap();
        let r = e_step(&[0.0, 5.0, -2.0], &p).unwrap();
        assert!(r.iter().all(|row| row == &vec![1.0]));
    }

    #[test]
    fn symmetric_point_splits_evenly() {
        let p = GmmParams::new(vec![0.5, 0.5], vec![-1.0, 1.0], vec![1.0, 1.0]).unwrap();
        let r = e_step(&[0.0], &p).unwrap();
        assert!((r[0][0] - 0.5).abs() < 1e-15 && (r[0][1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn e_step_matches_density_formula() {
        let p = GmmParams::new(vec![0.3, 0.7], vec![0.2, 0.9], vec![0.05, 0.1]).unwrap();
        let data = [0.1, 0.5, 1.2];
        let r = e_step(&data, &p).unwrap();
        for (row, &x) in r.iter().zip(&data) {
            let a = 0.3 * density(x, 0.2, 0.05);
            let b = 0.7 * density(x, 0.9, 0.1);
            assert!((row[0] - a / (a + b)).abs() < 1e-12);
            assert!((row[1] - b / (a + b)).abs() < 1e-12);
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn m_step_single_component_is_sample_moments() {
        let data = [1.0, 2.0, 4.0, 7.0];
        let p = m_step(&data, &vec![vec![1.0]; 4]).unwrap();
        assert!((p.means()[0] - 3.5).abs() < 1e-12);
        assert!((p.variances()[0] - 5.25).abs() < 1e-12);
    }

    #[test]
    fn m_step_hard_assignments_are_group_statistics() {
        let data = [0.0, 2.0, 10.0, 12.0, 14.0];
        let resp = vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0], vec![0.0, 1.0]];
        let p = m_step(&data, &resp).unwrap();
        assert_eq!(p.weights(), &[0.4, 0.6]);
        assert_eq!(p.means(), &[1.0, 12.0]);
        assert!((p.variances()[0] - 1.0).abs() < 1e-12);
        assert!((p.variances()[1] - 8.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn m_step_soft_matches_weighted_formula() {
        let data = [0.0, 1.0, 2.0, 3.0];
        let resp = vec![vec![0.9, 0.1], vec![0.6, 0.4], vec![0.3, 0.7], vec![0.2, 0.8]];
        let p = m_step(&data, &resp).unwrap();
        // component 0: N = 2.0, μ = (0 + .6 + .6 + .6)/2 = 0.9
        assert!((p.weights()[0] - 0.5).abs() < 1e-12);
        assert!((p.means()[0] - 0.9).abs() < 1e-12);
        let var0 = (0.9 * 0.81 + 0.6 * 0.01 + 0.3 * 1.21 + 0.2 * 4.41) / 2.0;
        assert!((p.variances()[0] - var0).abs() < 1e-12);
        // component 1: N = 2.0, μ = (0 + .4 + 1.4 + 2.4)/2 = 2.1
        assert!((p.means()[1] - 2.1).abs() < 1e-12);
    }

    #[test]
    fn m_step_empty_component() {
        let resp = vec![vec![1.0, 0.0], vec![1.0, 0.0]];
        assert_eq!(m_step(&[0.0, 1.0], &resp), Err(GmmError::EmptyComponent(1)));
    }

    #[test]
    fn fit_single_point() {
        let (p, t) = fit(&[5.0], 1, 1e-9, 50, 0).unwrap();
        assert_eq!(p.means(), &[5.0]);
        assert!(t.converged && t.iterations_used <= 2);
    }

    #[test]
    fn fit_separable_clusters() {
        let data = [-0.1, 0.0, 0.1, 9.9, 10.0, 10.1];
        let (p, t) = fit(&data, 2, 1e-10, 200, 3).unwrap();
        let mut means = p.means().to_vec();
        means.sort_by(f64::total_cmp);
        assert!((means[0] - 0.0).abs() < 0.1 && (means[1] - 10.0).abs() < 0.1);
        assert!(t.loglik_per_iter.windows(2).all(|w| w[1] >= w[0] - 1e-9));
    }

    #[test]
    fn fit_errors_and_determinism() {
        assert_eq!(fit(&[1.0, 2.0], 3, 1e-6, 10, 0).unwrap_err(), GmmError::TooManyComponents { components: 3, samples: 2 });
        assert_eq!(fit(&[], 1, 1e-6, 10, 0).unwrap_err(), GmmError::EmptyData);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let data: Vec<f64> = (0..100).map(|i| normal.sample(&mut rng) + if i % 2 == 0 { 4.0 } else { 0.0 }).collect();
        assert_eq!(fit(&data, 2, 1e-8, 100, 5).unwrap(), fit(&data, 2, 1e-8, 100, 5).unwrap());
    }

    #[test]
    fn duplicate_quantiles_are_separated() {
        let p = initial_params(&[1.0, 1.0, 1.0, 1.0], 2, 9).unwrap();
        assert_ne!(p.means()[0], p.means()[1]);
    }

    #[test]
    fn data_costs_cases() {
        let img = Image::gray(3, 1, vec![51, 153, 102]).unwrap();
        let p = GmmParams::new(vec![0.5, 0.5], vec![0.2, 0.6], vec![0.01, 0.01]).unwrap();
        let c = data_costs(&img, &p).unwrap();
        assert_eq!(c.argmin(0), 0);
        assert_eq!(c.argmin(1), 1);
        assert!((c.get(2, 0) - c.get(2, 1)).abs() < 1e-9);
        let uneven = GmmParams::new(vec![0.2, 0.8], vec![0.1, 0.7], vec![0.02, 0.3]).unwrap();
        let c = data_costs(&img, &uneven).unwrap();
        for (p, &v) in img.pixels().iter().enumerate() {
            let y = v as f64 / 255.0;
            assert!((c.get(p, 0) + density(y, 0.1, 0.02).ln()).abs() < 1e-12);
            assert!((c.get(p, 1) + density(y, 0.7, 0.3).ln()).abs() < 1e-12);
        }
    }
}

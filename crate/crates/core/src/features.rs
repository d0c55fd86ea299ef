//! Block features, correlation-based feature selection, simplex weighting of
//! criteria and a linearized QP step.

use crate::image::{Image, ImageError};
use crate::linalg::{self, dot, LinalgError, Matrix};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("image must be at least 8x8, got {0}x{1}")]
    ImageTooSmall(usize, usize),
    #[error("need at least {need} {what}, got {got}")]
    NotEnough { what: &'static str, need: usize, got: usize },
    #[error("feature {0} has zero variance; correlation is undefined")]
    DegenerateFeature(usize),
    #[error("threshold {0} must lie in [0, 1]")]
    BadThreshold(f64),
    #[error("criterion {0} has zero range and must be removed first")]
    ZeroRange(usize),
    #[error("scores must be finite")]
    NonFinite,
    #[error("dimension mismatch: {0}")]
    Dimension(&'static str),
    #[error("Hessian is not symmetric")]
    NotSymmetric,
    #[error("KKT system is singular")]
    KktSingular,
    #[error("linearized constraints are infeasible (row {row} violated by {violation:e})")]
    Infeasible { row: usize, violation: f64 },
    #[error("projection residual {0:e} exceeds the bound")]
    ResidualTooLarge(f64),
}

// ---------------------------------------------------------------------------
// block features

pub const HISTOGRAM_BINS: usize = 16;
/// Adjacent pixels whose intensities differ by more than this count as an edge.
pub const EDGE_THRESHOLD: u8 = 24;
const BLOCKS: usize = 2;
const PER_BLOCK: usize = 3 + HISTOGRAM_BINS;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn distance(&self, other: &FeatureVector) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
    }
}

pub const FEATURE_LEN: usize = BLOCKS * BLOCKS * PER_BLOCK;

/// Component names in vector order, used as the CSV header.
pub fn feature_names() -> Vec<String> {
    let mut names = Vec::with_capacity(FEATURE_LEN);
    for b in 0..BLOCKS * BLOCKS {
        names.push(format!("b{b}_mean"));
        names.push(format!("b{b}_var"));
        for k in 0..HISTOGRAM_BINS {
            names.push(format!("b{b}_h{k}"));
        }
        names.push(format!("b{b}_edge"));
    }
    names
}

/// For each block of a 2×2 grid: mean and variance of normalized intensity,
/// a 16-bin normalized histogram and the fraction of 4-neighbor pairs inside
/// the block that differ by more than [`EDGE_THRESHOLD`].
pub fn extract_features(img: &Image) -> Result<FeatureVector, FeatureError> {
    img.ensure_gray()?;
    let (w, h) = (img.width(), img.height());
    if w < 8 || h < 8 {
        return Err(FeatureError::ImageTooSmall(w, h));
    }
    let mut values = Vec::with_capacity(FEATURE_LEN);
    for by in 0..BLOCKS {
        for bx in 0..BLOCKS {
            let (x0, x1) = (bx * w / BLOCKS, (bx + 1) * w / BLOCKS);
            let (y0, y1) = (by * h / BLOCKS, (by + 1) * h / BLOCKS);
            let count = ((x1 - x0) * (y1 - y0)) as f64;
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            let mut hist = [0usize; HISTOGRAM_BINS];
            let (mut pairs, mut edges) = (0usize, 0usize);
            for y in y0..y1 {
                for x in x0..x1 {
                    let v = img.get(x, y);
                    let f = v as f64 / 255.0;
                    sum += f;
                    sum_sq += f * f;
                    hist[v as usize * HISTOGRAM_BINS / 256] += 1;
                    if x + 1 < x1 {
                        pairs += 1;
                        edges += (v.abs_diff(img.get(x + 1, y)) > EDGE_THRESHOLD) as usize;
                    }
                    if y + 1 < y1 {
                        pairs += 1;
                        edges += (v.abs_diff(img.get(x, y + 1)) > EDGE_THRESHOLD) as usize;
                    }
                }
            }
            let mean = sum / count;
            values.push(mean);
            values.push((sum_sq / count - mean * mean).max(0.0));
            values.extend(hist.iter().map(|&c| c as f64 / count));
            values.push(if pairs == 0 { 0.0 } else { edges as f64 / pairs as f64 });
        }
    }
    Ok(FeatureVector { values })
}

/// CSV with a header row and one row per sample.
pub fn rows_to_csv(header: &[String], rows: &[Vec<f64>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        let cells: Vec<String> = r.iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// feature projection

/// Square system `Z · h = x`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionSystem {
    pub z: Matrix,
    pub rhs: Vec<f64>,
}

impl ProjectionSystem {
    pub fn new(z: Matrix, rhs: Vec<f64>) -> Result<Self, FeatureError> {
        if z.rows() != z.cols() {
            return Err(LinalgError::NotSquare { rows: z.rows(), cols: z.cols() }.into());
        }
        if rhs.len() != z.rows() {
            return Err(FeatureError::Dimension("right-hand side length differs from matrix size"));
        }
        Ok(Self { z, rhs })
    }
}

pub fn solve_projection(sys: &ProjectionSystem) -> Result<Vec<f64>, FeatureError> {
    let h = linalg::solve(&sys.z, &sys.rhs)?;
    let back = sys.z.mul_vec(&h)?;
    let residual = back.iter().zip(&sys.rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let scale = sys.rhs.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if residual > 1e-8 * (1.0 + scale) {
        return Err(FeatureError::ResidualTooLarge(residual));
    }
    Ok(h)
}

// ---------------------------------------------------------------------------
// clustering and selection

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureClusterSet {
    /// Disjoint groups of feature indices, each sorted, ordered by first member.
    pub clusters: Vec<Vec<usize>>,
    pub threshold: f64,
    /// One representative per cluster, ascending.
    pub selected: Vec<usize>,
    /// Per-feature completeness score used to pick representatives.
    pub completeness: Vec<f64>,
}

/// `|corr|` between every pair of columns of `samples` (rows are samples).
pub fn abs_correlation(samples: &Matrix) -> Result<Matrix, FeatureError> {
    let (n, d) = (samples.rows(), samples.cols());
    let centered: Vec<Vec<f64>> = (0..d)
        .map(|j| {
            let col = samples.column(j);
            let mean = col.iter().sum::<f64>() / n as f64;
            col.iter().map(|v| v - mean).collect()
        })
        .collect();
    let norms: Vec<f64> = centered.iter().map(|c| dot(c, c).sqrt()).collect();
    if let Some(j) = norms.iter().position(|&s| !(s > 0.0)) {
        return Err(FeatureError::DegenerateFeature(j));
    }
    let mut out = Matrix::identity(d);
    for i in 0..d {
        for j in 0..i {
            let mut r = (dot(&centered[i], &centered[j]) / (norms[i] * norms[j])).abs();
            // exact collinearity can round a hair below 1
            if r > 1.0 - 1e-12 {
                r = 1.0;
            }
            out[(i, j)] = r;
            out[(j, i)] = r;
        }
    }
    Ok(out)
}

fn linkage(corr: &Matrix, a: &[usize], b: &[usize]) -> f64 {
    let mut total = 0.0;
    for &i in a {
        for &j in b {
            total += corr[(i, j)];
        }
    }
    total / (a.len() * b.len()) as f64
}

/// Average-linkage agglomeration on `|corr|` while the most similar pair of
/// clusters is at least `threshold` similar, then one representative per
/// cluster: the member with the highest mean `|corr|` to the rest of its
/// cluster (1 for singletons), lowest index on ties.
pub fn cluster_and_select(samples: &Matrix, threshold: f64) -> Result<FeatureClusterSet, FeatureError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(FeatureError::BadThreshold(threshold));
    }
    if samples.cols() < 2 {
        return Err(FeatureError::NotEnough { what: "features", need: 2, got: samples.cols() });
    }
    if samples.rows() < 3 {
        return Err(FeatureError::NotEnough { what: "samples", need: 3, got: samples.rows() });
    }
    let corr = abs_correlation(samples)?;
    let mut clusters: Vec<Vec<usize>> = (0..samples.cols()).map(|j| vec![j]).collect();
    while clusters.len() > 1 {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let s = linkage(&corr, &clusters[a], &clusters[b]);
                if best.map_or(true, |(bs, _, _)| s > bs) {
                    best = Some((s, a, b));
                }
            }
        }
        let (sim, a, b) = best.expect("at least two clusters");
        if sim < threshold {
            break;
        }
        let merged = clusters.remove(b);
        clusters[a].extend(merged);
        clusters[a].sort_unstable();
    }
    let mut completeness = vec![1.0; samples.cols()];
    let mut selected = Vec::with_capacity(clusters.len());
    for cluster in &clusters {
        if cluster.len() > 1 {
            for &f in cluster {
                let others: f64 = cluster.iter().filter(|&&g| g != f).map(|&g| corr[(f, g)]).sum();
                completeness[f] = others / (cluster.len() - 1) as f64;
            }
        }
        let mut rep = cluster[0];
        for &f in &cluster[1..] {
            if completeness[f] > completeness[rep] {
                rep = f;
            }
        }
        selected.push(rep);
    }
    selected.sort_unstable();
    Ok(FeatureClusterSet { clusters, threshold, selected, completeness })
}

// ---------------------------------------------------------------------------
// simplex weights

/// Scores of `n` samples under `m` criteria with per-criterion ideal (max)
/// and anti-ideal (min) points.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    scores: Matrix,
    ideal: Vec<f64>,
    anti_ideal: Vec<f64>,
}

impl ScoreTable {
    pub fn new(scores: Matrix) -> Result<Self, FeatureError> {
        if scores.rows() == 0 || scores.cols() == 0 {
            return Err(FeatureError::NotEnough { what: "scores", need: 1, got: 0 });
        }
        let mut ideal = Vec::with_capacity(scores.cols());
        let mut anti_ideal = Vec::with_capacity(scores.cols());
        for j in 0..scores.cols() {
            let col = scores.column(j);
            if col.iter().any(|v| !v.is_finite()) {
                return Err(FeatureError::NonFinite);
            }
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            if hi <= lo {
                return Err(FeatureError::ZeroRange(j));
            }
            ideal.push(hi);
            anti_ideal.push(lo);
        }
        Ok(Self { scores, ideal, anti_ideal })
    }

    pub fn samples(&self) -> usize {
        self.scores.rows()
    }

    pub fn criteria(&self) -> usize {
        self.scores.cols()
    }

    pub fn scores(&self) -> &Matrix {
        &self.scores
    }

    pub fn ideal(&self) -> &[f64] {
        &self.ideal
    }

    pub fn anti_ideal(&self) -> &[f64] {
        &self.anti_ideal
    }

    /// `Σ_i [Σ_j w_j (H_ij - H_j⁻)] / [Σ_j w_j (H_j⁺ - H_j⁻)]`.
    pub fn objective(&self, w: &[f64]) -> f64 {
        let denom: f64 = (0..self.criteria()).map(|j| w[j] * (self.ideal[j] - self.anti_ideal[j])).sum();
        (0..self.samples())
            .map(|i| {
                let num: f64 = (0..self.criteria()).map(|j| w[j] * (self.scores[(i, j)] - self.anti_ideal[j])).sum();
                num / denom
            })
            .sum()
    }

    fn gradient(&self, w: &[f64]) -> Vec<f64> {
        let m = self.criteria();
        let range: Vec<f64> = (0..m).map(|j| self.ideal[j] - self.anti_ideal[j]).collect();
        let lifted: Vec<f64> = (0..m)
            .map(|j| (0..self.samples()).map(|i| self.scores[(i, j)] - self.anti_ideal[j]).sum())
            .collect();
        let denom = dot(w, &range);
        let numer = dot(w, &lifted);
        (0..m).map(|k| (lifted[k] * denom - numer * range[k]) / (denom * denom)).collect()
    }
}

/// A point of the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(pub Vec<f64>);

impl WeightVector {
    pub fn uniform(m: usize) -> Self {
        Self(vec![1.0 / m as f64; m])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Euclidean projection onto `{w >= 0, Σ w = 1}` (sort-and-threshold).
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let t = (cumulative - 1.0) / (k + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    let mut w: Vec<f64> = v.iter().map(|x| (x - theta).max(0.0)).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    w
}

pub const WEIGHT_STEP: f64 = 0.05;
pub const WEIGHT_ITERATIONS: usize = 500;

/// Projected-gradient ascent from the uniform point; returns the best iterate
/// (earliest on ties) and its objective.
pub fn optimize_weights(table: &ScoreTable) -> (WeightVector, f64) {
    let mut w = WeightVector::uniform(table.criteria()).0;
    let mut best = (table.objective(&w), w.clone());
    for _ in 0..WEIGHT_ITERATIONS {
        let g = table.gradient(&w);
        let stepped: Vec<f64> = w.iter().zip(&g).map(|(x, d)| x + WEIGHT_STEP * d).collect();
        w = project_to_simplex(&stepped);
        let f = table.objective(&w);
        if f > best.0 {
            best = (f, w.clone());
        }
    }
    (WeightVector(best.1), best.0)
}

// ---------------------------------------------------------------------------
// QP step

/// One linearized constraint row: `value + gradientᵀ d`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedConstraint {
    pub value: f64,
    pub gradient: Vec<f64>,
}

/// `min_d gᵀd + ½ dᵀ H d` s.t. `c + ∇cᵀd <= 0`, `h + ∇hᵀd = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct QpSubproblem {
    pub g: Vec<f64>,
    pub hk: Matrix,
    pub ineq: Vec<LinearizedConstraint>,
    pub eq: Vec<LinearizedConstraint>,
}

impl QpSubproblem {
    pub fn new(
        g: Vec<f64>,
        hk: Matrix,
        ineq: Vec<LinearizedConstraint>,
        eq: Vec<LinearizedConstraint>,
    ) -> Result<Self, FeatureError> {
        let n = g.len();
        if hk.rows() != n || hk.cols() != n {
            return Err(FeatureError::Dimension("Hessian size differs from gradient length"));
        }
        if ineq.iter().chain(&eq).any(|c| c.gradient.len() != n) {
            return Err(FeatureError::Dimension("constraint gradient length differs from gradient length"));
        }
        if !hk.is_symmetric(1e-9) {
            return Err(FeatureError::NotSymmetric);
        }
        Ok(Self { g, hk, ineq, eq })
    }
}

/// `1e-6 · trace(H) / n`.
pub fn default_damping(hk: &Matrix) -> f64 {
    1e-6 * hk.trace() / hk.rows().max(1) as f64
}

pub const QP_FEASIBILITY_TOL: f64 = 1e-8;

fn solve_kkt(sub: &QpSubproblem, damping: f64, active: &[&LinearizedConstraint]) -> Result<Vec<f64>, FeatureError> {
    let n = sub.g.len();
    let k = active.len();
    let mut kkt = Matrix::zeros(n + k, n + k);
    let mut rhs = vec![0.0; n + k];
    for i in 0..n {
        for j in 0..n {
            kkt[(i, j)] = sub.hk[(i, j)];
        }
        kkt[(i, i)] += damping;
        rhs[i] = -sub.g[i];
    }
    for (r, c) in active.iter().enumerate() {
        for j in 0..n {
            kkt[(n + r, j)] = c.gradient[j];
            kkt[(j, n + r)] = c.gradient[j];
        }
        rhs[n + r] = -c.value;
    }
    match linalg::solve(&kkt, &rhs) {
        Ok(mut x) => {
            x.truncate(n);
            Ok(x)
        }
        Err(LinalgError::Singular { .. }) => Err(FeatureError::KktSingular),
        Err(e) => Err(e.into()),
    }
}

fn worst_violation(ineq: &[LinearizedConstraint], d: &[f64]) -> Option<(usize, f64)> {
    ineq.iter()
        .enumerate()
        .map(|(i, c)| (i, c.value + dot(&c.gradient, d)))
        .filter(|&(_, v)| v > QP_FEASIBILITY_TOL)
        .max_by(|a, b| a.1.total_cmp(&b.1))
}

/// Search direction from the damped subproblem. Equalities are solved
/// exactly through the KKT system; violated inequalities are promoted to
/// equalities once and the system re-solved.
pub fn qp_step(sub: &QpSubproblem, damping: f64) -> Result<Vec<f64>, FeatureError> {
    if !(damping >= 0.0) {
        return Err(FeatureError::Dimension("damping must be >= 0"));
    }
    let mut active: Vec<&LinearizedConstraint> = sub.eq.iter().collect();
    let d = solve_kkt(sub, damping, &active)?;
    let violated: Vec<usize> = sub
        .ineq
        .iter()
        .enumerate()
        .filter(|(_, c)| c.value + dot(&c.gradient, &d) > QP_FEASIBILITY_TOL)
        .map(|(i, _)| i)
        .collect();
    if violated.is_empty() {
        return Ok(d);
    }
    active.extend(violated.iter().map(|&i| &sub.ineq[i]));
    let d = match solve_kkt(sub, damping, &active) {
        Ok(d) => d,
        Err(FeatureError::KktSingular) => {
            return Err(FeatureError::Infeasible { row: violated[0], violation: f64::INFINITY })
        }
        Err(e) => return Err(e),
    };
    if let Some((row, violation)) = worst_violation(&sub.ineq, &d) {
        return Err(FeatureError::Infeasible { row, violation });
    }
    Ok(d)
}

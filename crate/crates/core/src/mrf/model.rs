use super::MrfError;
use crate::image::LabelField;

/// Per-pixel, per-label costs, pixel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DataCosts {
    pixels: usize,
    labels: usize,
    costs: Vec<f64>,
}

impl DataCosts {
    pub fn new(pixels: usize, labels: usize, costs: Vec<f64>) -> Result<Self, MrfError> {
        if costs.len() != pixels * labels || labels == 0 {
            return Err(MrfError::DimensionMismatch { expected: (pixels, 1, labels), got: (costs.len(), 1, labels) });
        }
        if let Some(i) = costs.iter().position(|c| !c.is_finite()) {
            return Err(MrfError::NonFiniteCost { pixel: i / labels, label: i % labels });
        }
        Ok(Self { pixels, labels, costs })
    }

    pub fn from_fn(pixels: usize, labels: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self, MrfError> {
        let mut costs = Vec::with_capacity(pixels * labels);
        for p in 0..pixels {
            for l in 0..labels {
                costs.push(f(p, l));
            }
        }
        Self::new(pixels, labels, costs)
    }

    pub fn pixels(&self) -> usize {
        self.pixels
    }

    pub fn labels(&self) -> usize {
        self.labels
    }

    #[inline]
    pub fn get(&self, pixel: usize, label: usize) -> f64 {
        self.costs[pixel * self.labels + label]
    }

    pub fn row(&self, pixel: usize) -> &[f64] {
        &self.costs[pixel * self.labels..(pixel + 1) * self.labels]
    }

    /// Lowest-index argmin of a pixel's costs.
    pub fn argmin(&self, pixel: usize) -> usize {
        argmin(self.row(pixel))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { pixels: self.pixels, labels: self.labels, costs: self.costs.iter().map(|c| c * factor).collect() }
    }
}

pub(crate) fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// Symmetric label-pair penalty table.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTable {
    labels: usize,
    values: Vec<f64>,
}

impl PairTable {
    pub fn new(labels: usize, values: Vec<f64>) -> Result<Self, MrfError> {
        let ok = values.len() == labels * labels
            && values.iter().all(|v| v.is_finite())
            && (0..labels).all(|i| (0..i).all(|j| values[i * labels + j] == values[j * labels + i]));
        if !ok {
            return Err(MrfError::BadPairTable(labels));
        }
        Ok(Self { labels, values })
    }

    pub fn labels(&self) -> usize {
        self.labels
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Prior {
    /// 0 when neighbors agree, 1 otherwise.
    Potts,
    /// Squared difference of label indices.
    Quadratic,
    /// Arbitrary symmetric table, e.g. squared distance between displacement offsets.
    Table(PairTable),
}

impl Prior {
    #[inline]
    pub fn pair(&self, a: usize, b: usize) -> f64 {
        match self {
            Prior::Potts => (a != b) as u8 as f64,
            Prior::Quadratic => {
                let d = a as f64 - b as f64;
                d * d
            }
            Prior::Table(t) => t.values[a * t.labels + b],
        }
    }
}

/// Per-edge multipliers of the pairwise term on the 4-connected grid.
/// `horizontal[y * (w - 1) + x]` couples `(x, y)` and `(x + 1, y)`;
/// `vertical[y * w + x]` couples `(x, y)` and `(x, y + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeWeights {
    pub horizontal: Vec<f64>,
    pub vertical: Vec<f64>,
}

/// Data costs plus a weighted pairwise prior on the 4-connected grid:
/// `U(X) = Σ_p D_p(x_p) + β Σ_(p,q) w_pq V(x_p, x_q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyModel {
    width: usize,
    height: usize,
    data: DataCosts,
    beta: f64,
    prior: Prior,
    edge_weights: Option<EdgeWeights>,
}

impl EnergyModel {
    pub fn new(width: usize, height: usize, data: DataCosts, beta: f64, prior: Prior) -> Result<Self, MrfError> {
        if data.pixels != width * height || width == 0 || height == 0 {
            return Err(MrfError::DimensionMismatch {
                expected: (width, height, data.labels),
                got: (data.pixels, 1, data.labels),
            });
        }
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(MrfError::BadBeta(beta));
        }
        if let Prior::Table(t) = &prior {
            if t.labels != data.labels {
                return Err(MrfError::BadPairTable(data.labels));
            }
        }
        Ok(Self { width, height, data, beta, prior, edge_weights: None })
    }

    pub fn with_edge_weights(mut self, weights: EdgeWeights) -> Result<Self, MrfError> {
        let (w, h) = (self.width, self.height);
        let ok = weights.horizontal.len() == (w - 1) * h
            && weights.vertical.len() == w * (h - 1)
            && weights.horizontal.iter().chain(&weights.vertical).all(|v| v.is_finite() && *v >= 0.0);
        if !ok {
            return Err(MrfError::BadEdgeWeights);
        }
        self.edge_weights = Some(weights);
        Ok(self)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn label_count(&self) -> usize {
        self.data.labels
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn prior(&self) -> &Prior {
        &self.prior
    }

    pub fn data(&self) -> &DataCosts {
        &self.data
    }

    pub fn edge_weights(&self) -> Option<&EdgeWeights> {
        self.edge_weights.as_ref()
    }

    /// Same model with every data cost and β multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self, MrfError> {
        let mut m = Self::new(self.width, self.height, self.data.scaled(factor), self.beta * factor, self.prior.clone())?;
        m.edge_weights = self.edge_weights.clone();
        Ok(m)
    }

    pub(crate) fn check_labels(&self, labels: &LabelField) -> Result<(), MrfError> {
        let got = (labels.width(), labels.height(), labels.label_count());
        let expected = (self.width, self.height, self.data.labels);
        if got != expected {
            return Err(MrfError::DimensionMismatch { expected, got });
        }
        Ok(())
    }

    #[inline]
    fn horizontal_weight(&self, x: usize, y: usize) -> f64 {
        self.edge_weights.as_ref().map_or(1.0, |e| e.horizontal[y * (self.width - 1) + x])
    }

    #[inline]
    fn vertical_weight(&self, x: usize, y: usize) -> f64 {
        self.edge_weights.as_ref().map_or(1.0, |e| e.vertical[y * self.width + x])
    }

    /// Writes the local energy of every candidate label at `pixel` into `out`.
    pub(crate) fn local_energies(&self, labels: &[usize], pixel: usize, out: &mut [f64]) {
        let (w, h) = (self.width, self.height);
        let (x, y) = (pixel % w, pixel / w);
        out.copy_from_slice(self.data.row(pixel));
        if self.beta == 0.0 {
            return;
        }
        let mut neighbors = [(0usize, 0.0f64); 4];
        let mut n = 0;
        if x > 0 {
            neighbors[n] = (labels[pixel - 1], self.horizontal_weight(x - 1, y));
            n += 1;
        }
        if x + 1 < w {
            neighbors[n] = (labels[pixel + 1], self.horizontal_weight(x, y));
            n += 1;
        }
        if y > 0 {
            neighbors[n] = (labels[pixel - w], self.vertical_weight(x, y - 1));
            n += 1;
        }
        if y + 1 < h {
            neighbors[n] = (labels[pixel + w], self.vertical_weight(x, y));
            n += 1;
        }
        for (l, e) in out.iter_mut().enumerate() {
            let mut pair = 0.0;
            for &(q, wt) in &neighbors[..n] {
                pair += wt * self.prior.pair(l, q);
            }
            *e += self.beta * pair;
        }
    }

    pub(crate) fn energy_unchecked(&self, labels: &[usize]) -> f64 {
        let (w, h) = (self.width, self.height);
        let mut data = 0.0;
        for (p, &l) in labels.iter().enumerate() {
            data += self.data.get(p, l);
        }
        if self.beta == 0.0 {
            return data;
        }
        let mut pair = 0.0;
        for y in 0..h {
            for x in 0..w - 1 {
                let p = y * w + x;
                pair += self.horizontal_weight(x, y) * self.prior.pair(labels[p], labels[p + 1]);
            }
        }
        for y in 0..h - 1 {
            for x in 0..w {
                let p = y * w + x;
                pair += self.vertical_weight(x, y) * self.prior.pair(labels[p], labels[p + w]);
            }
        }
        data + self.beta * pair
    }
}

/// Unnormalized Gibbs energy `U(X)` of a labeling.
pub fn energy_of(model: &EnergyModel, labels: &LabelField) -> Result<f64, MrfError> {
    model.check_labels(labels)?;
    Ok(model.energy_unchecked(labels.labels()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive_energy(model: &EnergyModel, labels: &LabelField) -> f64 {
        // every ordered neighbor pair counted, then halved
        let (w, h) = (model.width(), model.height());
        let mut total = 0.0;
        for y in 0..h as i64 {
            for x in 0..w as i64 {
                let p = (y as usize) * w + x as usize;
                total += model.data().get(p, labels.get(p));
                for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let q = ny as usize * w + nx as usize;
                    total += 0.5 * model.beta() * model.prior().pair(labels.get(p), labels.get(q));
                }
            }
        }
        total
    }

    #[test]
    fn beta_zero_is_data_only() {
        let data = DataCosts::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let m = EnergyModel::new(2, 1, data, 0.0, Prior::Potts).unwrap();
        let labels = LabelField::new(2, 1, 2, vec![1, 0]).unwrap();
        assert_eq!(energy_of(&m, &labels).unwrap(), 5.0);
    }

    #[test]
    fn potts_pair_term() {
        let data = DataCosts::new(2, 2, vec![0.0; 4]).unwrap();
        let m = EnergyModel::new(2, 1, data, 1.5, Prior::Potts).unwrap();
        assert_eq!(energy_of(&m, &LabelField::new(2, 1, 2, vec![1, 1]).unwrap()).unwrap(), 0.0);
        assert_eq!(energy_of(&m, &LabelField::new(2, 1, 2, vec![0, 1]).unwrap()).unwrap(), 1.5);
    }

    #[test]
    fn matches_naive_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for prior in [Prior::Potts, Prior::Quadratic] {
            for _ in 0..20 {
                let data = DataCosts::from_fn(16, 3, |_, _| rng.gen_range(-1.0..2.0)).unwrap();
                let m = EnergyModel::new(4, 4, data, rng.gen_range(0.0..2.0), prior.clone()).unwrap();
                let labels = LabelField::new(4, 4, 3, (0..16).map(|_| rng.gen_range(0..3)).collect()).unwrap();
                let fast = energy_of(&m, &labels).unwrap();
                assert!((fast - naive_energy(&m, &labels)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn dimension_and_parameter_errors() {
        let data = DataCosts::new(4, 2, vec![0.0; 8]).unwrap();
        let m = EnergyModel::new(2, 2, data.clone(), 1.0, Prior::Potts).unwrap();
        let wrong = LabelField::uniform(4, 1, 2, 0).unwrap();
        assert!(matches!(energy_of(&m, &wrong), Err(MrfError::DimensionMismatch { .. })));
        assert_eq!(EnergyModel::new(2, 2, data.clone(), -1.0, Prior::Potts), Err(MrfError::BadBeta(-1.0)));
        assert!(EnergyModel::new(3, 2, data, 1.0, Prior::Potts).is_err());
        assert!(matches!(DataCosts::new(1, 2, vec![0.0, f64::NAN]), Err(MrfError::NonFiniteCost { pixel: 0, label: 1 })));
        assert!(PairTable::new(2, vec![0.0, 1.0, 2.0, 0.0]).is_err());
    }
}

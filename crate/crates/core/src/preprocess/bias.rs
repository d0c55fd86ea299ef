//! Ordinary least squares for `y ≈ a + b·x`.

use super::PreprocessError;

#[derive(Debug, Clone, PartialEq)]
pub struct BiasModel {
    pub intercept: f64,
    pub slope: f64,
    pub residuals: Vec<f64>,
    pub sse: f64,
}

impl BiasModel {
    pub fn predict(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// Sum of squared residuals of an arbitrary line through the samples.
pub fn sse_of(xs: &[f64], ys: &[f64], intercept: f64, slope: f64) -> f64 {
    xs.iter().zip(ys).map(|(&x, &y)| (y - intercept - slope * x).powi(2)).sum()
}

pub fn fit_bias(xs: &[f64], ys: &[f64]) -> Result<BiasModel, PreprocessError> {
    if xs.len() != ys.len() {
        return Err(PreprocessError::LengthMismatch { xs: xs.len(), ys: ys.len() });
    }
    let n = xs.len();
    if n < 2 {
        return Err(PreprocessError::TooFewSamples(n));
    }
    let mean_x = xs.iter().sum::<f64>() / n as f64;
    let mean_y = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return Err(PreprocessError::DegenerateXs);
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mean_x) * (y - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let residuals: Vec<f64> = xs.iter().zip(ys).map(|(&x, &y)| y - intercept - slope * x).collect();
    let sse = residuals.iter().map(|r| r * r).sum();
    Ok(BiasModel { intercept, slope, residuals, sse })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn perfect_fits() {
        let xs = [0.0, 1.5, 3.0, 7.0];
        let m = fit_bias(&xs, &xs).unwrap();
        assert!(m.intercept.abs() < 1e-12 && (m.slope - 1.0).abs() < 1e-12 && m.sse < 1e-20);
        let m = fit_bias(&[0.0, 1.0], &[3.0, 5.0]).unwrap();
        assert_eq!((m.intercept, m.slope, m.sse), (3.0, 2.0, 0.0));
    }

    #[test]
    fn errors() {
        assert_eq!(fit_bias(&[1.0], &[1.0, 2.0]), Err(PreprocessError::LengthMismatch { xs: 1, ys: 2 }));
        assert_eq!(fit_bias(&[1.0], &[1.0]), Err(PreprocessError::TooFewSamples(1)));
        assert_eq!(fit_bias(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]), Err(PreprocessError::DegenerateXs));
    }

    fn cloud(seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<f64> = (0..50).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let ys = xs.iter().map(|x| 0.7 - 1.3 * x + rng.gen_range(-0.5..0.5)).collect();
        (xs, ys)
    }

    #[test]
    fn normal_equations_and_local_optimality() {
        let (xs, ys) = cloud(3);
        let m = fit_bias(&xs, &ys).unwrap();
        let sum_r: f64 = m.residuals.iter().sum();
        let sum_rx: f64 = m.residuals.iter().zip(&xs).map(|(r, x)| r * x).sum();
        assert!(sum_r.abs() < 1e-6 && sum_rx.abs() < 1e-6);
        assert!((m.sse - sse_of(&xs, &ys, m.intercept, m.slope)).abs() < 1e-9);
        let d = 1e-3;
        for (da, db) in [(d, 0.0), (-d, 0.0), (0.0, d), (0.0, -d), (d, d), (-d, -d), (d, -d), (-d, d)] {
            assert!(m.sse <= sse_of(&xs, &ys, m.intercept + da, m.slope + db));
        }
    }

    #[test]
    fn matches_grid_search_oracle() {
        let (xs, ys) = cloud(11);
        let m = fit_bias(&xs, &ys).unwrap();
        // brute force over a 0.005 grid around the generating line
        let step = 0.005;
        let mut best = f64::INFINITY;
        for i in 0..=200 {
            let a = 0.2 + i as f64 * step;
            for j in 0..=200 {
                let b = -1.8 + j as f64 * step;
                best = best.min(sse_of(&xs, &ys, a, b));
            }
        }
        assert!(m.sse <= best + 1e-12);
        // SSE is quadratic; half a grid step in each parameter bounds the gap
        let h = step / 2.0;
        let slack = [(h, h), (h, -h), (-h, h), (-h, -h)]
            .iter()
            .map(|(da, db)| sse_of(&xs, &ys, m.intercept + da, m.slope + db) - m.sse)
            .fold(0.0, f64::max);
        assert!(best - m.sse <= slack + 1e-12, "grid {best} vs closed form {}", m.sse);
    }
}

//! Divergence-form smoothness operator `Σ_ij ∂_i (a_ij ∂_j u)` on the pixel
//! grid, with the ellipticity test `ξᵀ A ξ >= ε |ξ|²`.
//!
//! Discretization at an interior pixel P with neighbors E, W, N (y - 1), S
//! (y + 1): diagonal terms use face-averaged coefficients,
//! `a11(P+½x)(u_E - u_P) - a11(P-½x)(u_P - u_W)` and likewise for `a22`;
//! the mixed terms use central differences of `a12 ∂u` evaluated at the
//! four neighbors. Border pixels get a zero residual.

use super::MrfError;

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothnessField {
    width: usize,
    height: usize,
    /// Per pixel `[a11, a12, a22]` of the symmetric 2×2 matrix.
    coeffs: Vec<[f64; 3]>,
    epsilon: f64,
}

impl SmoothnessField {
    pub fn new(width: usize, height: usize, coeffs: Vec<[f64; 3]>, epsilon: f64) -> Result<Self, MrfError> {
        if coeffs.len() != width * height {
            return Err(MrfError::DimensionMismatch { expected: (width, height, 3), got: (coeffs.len(), 1, 3) });
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(MrfError::BadEpsilon(epsilon));
        }
        Ok(Self { width, height, coeffs, epsilon })
    }

    pub fn uniform(width: usize, height: usize, coeff: [f64; 3], epsilon: f64) -> Result<Self, MrfError> {
        Self::new(width, height, vec![coeff; width * height], epsilon)
    }

    pub fn identity(width: usize, height: usize, epsilon: f64) -> Result<Self, MrfError> {
        Self::uniform(width, height, [1.0, 0.0, 1.0], epsilon)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn coeff(&self, x: usize, y: usize) -> [f64; 3] {
        self.coeffs[y * self.width + x]
    }
}

/// Smallest eigenvalue of `[[a11, a12], [a12, a22]]`.
pub fn min_eigenvalue([a11, a12, a22]: [f64; 3]) -> f64 {
    let mean = 0.5 * (a11 + a22);
    let half_gap = 0.5 * (a11 - a22);
    mean - (half_gap * half_gap + a12 * a12).sqrt()
}

pub fn ellipticity_check(field: &SmoothnessField) -> bool {
    field.coeffs.iter().all(|&c| min_eigenvalue(c) >= field.epsilon)
}

/// Discrete operator applied to the row-major field `u`.
pub fn smoothness_residual(field: &SmoothnessField, u: &[f64]) -> Result<Vec<f64>, MrfError> {
    let (w, h) = (field.width, field.height);
    if u.len() != w * h {
        return Err(MrfError::DimensionMismatch { expected: (w, h, 1), got: (u.len(), 1, 1) });
    }
    if !ellipticity_check(field) {
        return Err(MrfError::EllipticityViolated(field.epsilon));
    }
    let at = |x: usize, y: usize| u[y * w + x];
    let a = |x: usize, y: usize| field.coeffs[y * w + x];
    let mut out = vec![0.0; w * h];
    if w < 3 || h < 3 {
        return Ok(out);
    }
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let c = a(x, y);
            let ae = 0.5 * (c[0] + a(x + 1, y)[0]);
            let aw = 0.5 * (c[0] + a(x - 1, y)[0]);
            let as_ = 0.5 * (c[2] + a(x, y + 1)[2]);
            let an = 0.5 * (c[2] + a(x, y - 1)[2]);
            let p = at(x, y);
            let diag = ae * (at(x + 1, y) - p) - aw * (p - at(x - 1, y)) + as_ * (at(x, y + 1) - p)
                - an * (p - at(x, y - 1));
            // ∂x(a12 ∂y u) + ∂y(a12 ∂x u)
            let dy_at = |xx: usize| 0.5 * (at(xx, y + 1) - at(xx, y - 1));
            let dx_at = |yy: usize| 0.5 * (at(x + 1, yy) - at(x - 1, yy));
            let mixed = 0.5 * (a(x + 1, y)[1] * dy_at(x + 1) - a(x - 1, y)[1] * dy_at(x - 1))
                + 0.5 * (a(x, y + 1)[1] * dx_at(y + 1) - a(x, y - 1)[1] * dx_at(y - 1));
            out[y * w + x] = diag + mixed;
        }
    }
    Ok(out)
}

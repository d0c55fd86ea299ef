use super::smoothness::{ellipticity_check, smoothness_residual, SmoothnessField};
use super::{DataCosts, EdgeWeights, EnergyModel, MrfError, PairTable, Prior};
use crate::gmm::{self, GmmParams};
use crate::image::{DisplacementLabelSet, Image, LabelField};

/// Segmentation game: Gaussian negative log-likelihood data costs with one
/// label per mixture component.
pub fn build_segmentation_game(img: &Image, params: &GmmParams, beta: f64, prior: Prior) -> Result<EnergyModel, MrfError> {
    let data = gmm::data_costs(img, params)?;
    EnergyModel::new(img.width(), img.height(), data, beta, prior)
}

/// Registration game over a discrete displacement field.
///
/// Label `l` at pixel `p` means "`p` in `fixed` corresponds to `p + offset_l`
/// in `moving`". Data cost is the squared difference of normalized
/// intensities, sampling `moving` with edge clamping. Neighboring labels are
/// coupled by the squared distance between their offsets, weighted per edge
/// by the face average of the diffusion coefficient along that axis
/// (`a11` for horizontal edges, `a22` for vertical ones). Mixed `a12` terms
/// have no 4-connected pairwise counterpart and only enter the regularity
/// diagnostic [`displacement_regularity`].
pub fn build_registration_game(
    fixed: &Image,
    moving: &Image,
    labels: &DisplacementLabelSet,
    beta: f64,
    field: &SmoothnessField,
) -> Result<EnergyModel, MrfError> {
    fixed.ensure_gray()?;
    moving.ensure_gray()?;
    let (w, h) = (fixed.width(), fixed.height());
    if (moving.width(), moving.height()) != (w, h) {
        return Err(MrfError::SizeMismatch((w, h), (moving.width(), moving.height())));
    }
    if (field.width(), field.height()) != (w, h) {
        return Err(MrfError::SizeMismatch((w, h), (field.width(), field.height())));
    }
    if !ellipticity_check(field) {
        return Err(MrfError::EllipticityViolated(field.epsilon()));
    }
    let offsets = labels.offsets();
    let data = DataCosts::from_fn(w * h, offsets.len(), |p, l| {
        let (x, y) = ((p % w) as i64, (p / w) as i64);
        let (dx, dy) = offsets[l];
        let f = fixed.get(x as usize, y as usize) as f64 / 255.0;
        let m = moving.get_clamped(x + dx as i64, y + dy as i64) as f64 / 255.0;
        (f - m) * (f - m)
    })?;
    let n = offsets.len();
    let mut table = Vec::with_capacity(n * n);
    for &(ax, ay) in offsets {
        for &(bx, by) in offsets {
            let (ddx, ddy) = ((ax - bx) as f64, (ay - by) as f64);
            table.push(ddx * ddx + ddy * ddy);
        }
    }
    let mut horizontal = Vec::with_capacity((w - 1) * h);
    for y in 0..h {
        for x in 0..w - 1 {
            horizontal.push(0.5 * (field.coeff(x, y)[0] + field.coeff(x + 1, y)[0]));
        }
    }
    let mut vertical = Vec::with_capacity(w * (h - 1));
    for y in 0..h - 1 {
        for x in 0..w {
            vertical.push(0.5 * (field.coeff(x, y)[2] + field.coeff(x, y + 1)[2]));
        }
    }
    EnergyModel::new(w, h, data, beta, Prior::Table(PairTable::new(n, table)?))?
        .with_edge_weights(EdgeWeights { horizontal, vertical })
}

/// Per-pixel `(dx, dy)` components of a displacement labeling.
pub fn displacement_components(labels: &LabelField, set: &DisplacementLabelSet) -> (Vec<f64>, Vec<f64>) {
    labels
        .labels()
        .iter()
        .map(|&l| {
            let (dx, dy) = set.offsets()[l];
            (dx as f64, dy as f64)
        })
        .unzip()
}

/// `Σ r²` of the smoothness operator applied to both displacement components.
pub fn displacement_regularity(
    field: &SmoothnessField,
    labels: &LabelField,
    set: &DisplacementLabelSet,
) -> Result<f64, MrfError> {
    let (dx, dy) = displacement_components(labels, set);
    let rx = smoothness_residual(field, &dx)?;
    let ry = smoothness_residual(field, &dy)?;
    Ok(rx.iter().chain(&ry).map(|r| r * r).sum())
}

//! Energy-based labeling as a game between pixels.
//!
//! Each pixel is a player; its strategy is a label and its payoff is the
//! negative of its local energy (data cost plus the prior terms on its four
//! incident edges). Every unilateral change alters the total MRF energy by
//! exactly the change in the mover's local energy, so the game is a
//! potential game with the energy as potential: sequential best responses
//! never raise the energy and stop at a labeling no single pixel can
//! improve, i.e. a Nash equilibrium. Partition constants are never needed;
//! everything works on unnormalized energies.

mod builders;
mod model;
mod smoothness;
mod solve;

pub use builders::{build_registration_game, build_segmentation_game, displacement_components, displacement_regularity};
pub use model::{energy_of, DataCosts, EdgeWeights, EnergyModel, PairTable, Prior};
pub use smoothness::{ellipticity_check, min_eigenvalue, smoothness_residual, SmoothnessField};
pub use solve::{
    best_response_sweep, exhaustive_oracle, initial_labeling, nash_check, site_conditional, solve_anneal, solve_icm, trace_to_csv,
    AnnealSchedule, GameConfig, NashReport, SolveOutcome, SweepOrder, TraceRow, EXHAUSTIVE_LIMIT,
};

use crate::image::ImageError;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MrfError {
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("dimension mismatch: model is {expected:?}, got {got:?}")]
    DimensionMismatch { expected: (usize, usize, usize), got: (usize, usize, usize) },
    #[error("data costs must be finite (pixel {pixel}, label {label})")]
    NonFiniteCost { pixel: usize, label: usize },
    #[error("prior weight must be finite and >= 0, got {0}")]
    BadBeta(f64),
    #[error("edge weights must be finite and >= 0")]
    BadEdgeWeights,
    #[error("pair table must be {0}x{0}, finite, symmetric")]
    BadPairTable(usize),
    #[error("invalid game config: {0}")]
    BadConfig(&'static str),
    #[error("exhaustive search over {labels}^{pixels} labelings exceeds the limit")]
    TooLarge { labels: usize, pixels: usize },
    #[error("smoothness field violates ellipticity with margin {0}")]
    EllipticityViolated(f64),
    #[error("ellipticity margin must be > 0, got {0}")]
    BadEpsilon(f64),
    #[error("images differ in size: {0:?} vs {1:?}")]
    SizeMismatch((usize, usize), (usize, usize)),
    #[error(transparent)]
    Gmm(#[from] crate::gmm::GmmError),
}

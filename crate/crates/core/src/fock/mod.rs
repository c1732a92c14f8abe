//! Polynomial modules over the algebra `[z_i*, z_j] = ħ δ_ij`.
//!
//! [`algebra`] does exact normal ordering, [`state`] the Gaussian state
//! `∫_ρ`, [`truncation`] builds monomial bases up to a degree cap and
//! [`nekrasov`] solves the truncated Nekrasov equation for diagonal metrics.

pub mod algebra;
pub mod nekrasov;
pub mod state;
pub mod truncation;

pub use algebra::{normal_order, GaussianRational, HbarPoly, Letter, MultiIndex, NormalForm, Word};
pub use nekrasov::{
    commutator_diagnostics, nekrasov_residual, solve_nekrasov, DiagonalMetric, LevelResidual, NekrasovSolution,
};
pub use state::{state_rho, state_rho_f64, verify_state_identities, verify_state_identities_f64};
pub use truncation::{build_truncation, FockTruncation, ModuleKind};

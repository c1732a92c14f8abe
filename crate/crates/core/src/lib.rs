//! Moment-map equations for quiver representations, ADHM data and
//! truncated Fock-space modules.
//!
//! The crate is organised bottom-up:
//!
//! * [`numerics`]: Hermitian exponential/logarithm and metric adjoints.
//! * [`quiver`]: quivers, representations and the JSON problem format.
//! * [`moment`]: King's residual, the Kempf–Ness functional and the
//!   Hamiltonians of the gauge action.
//! * [`solver`]: the Kempf–Ness flow for metrics, with destabilizer
//!   certificates on divergence.
//! * [`cyclic`]: the cyclic functional on triple tensors of the doubled
//!   bimodule and the universal Hamiltonian built from it.
//! * [`adhm`]: the (deformed) ADHM equations.
//! * [`fock`]: exact normal ordering, the state `∫_ρ`, and the truncated
//!   Nekrasov equation on monomial modules.

pub mod adhm;
pub mod cyclic;
pub mod error;
pub mod fock;
pub mod moment;
pub mod numerics;
pub mod quiver;
pub mod solver;

pub use error::{Error, Result};

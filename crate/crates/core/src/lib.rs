//! Regularized solver and estimate checks for the widely degenerate orthotropic
//! parabolic equation
//!
//! ```text
//! ∂ₜu = Σᵢ ∂ᵢ[(|∂ᵢu| − δᵢ)₊^{p−1} sign(∂ᵢu)]
//! ```

pub mod acceptance;
pub mod error;
pub mod flux_models;
pub mod grid;
pub mod lemmas;
pub mod params;
pub mod scenarios;
pub mod solver;
pub mod estimates;

pub use error::{Error, Result};
pub use params::{IndexSets, ProblemParams};

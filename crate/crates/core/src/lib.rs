//! Monotone multidimensional BSDEs `y_t = ξ + ∫_t^T g(s, y_s, z_s) ds - ∫_t^T z_s dB_s`
//! on finite and infinite horizons.
//!
//! - [`grid`] and [`paths`]: time grids (uniform or mapped from `[0, ∞)`),
//!   Brownian ensembles and adapted fields.
//! - [`generators`]: drivers with their coefficient functions, assumption
//!   checkers and the named fixtures.
//! - [`transforms`]: truncation, mollification, cutoffs and changes of
//!   variables acting on drivers and solutions.
//! - [`solver`]: regression and lattice backward solvers, Picard iteration,
//!   the L¹ truncation ladder.
//! - [`estimates`]: `Sᵖ`, `Mᵖ`, class-(D) norms and the estimate checks.
//! - [`experiment`]: declarative experiment configs and the runner behind
//!   the `bsde` binary.

pub mod error;
pub mod estimates;
pub mod experiment;
pub mod generators;
pub mod grid;
pub mod paths;
pub mod quadrature;
pub mod solver;
pub mod transforms;

pub use error::{BsdeError, Result};

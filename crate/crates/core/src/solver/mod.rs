//! Backward solvers: conditional-expectation engines, the z-frozen backward
//! recursion, the outer Picard iteration and the L¹ truncation ladder.

mod backward;
mod l1;
mod lattice;
mod picard;
mod regression;

use serde::{Deserialize, Serialize};

pub use backward::{
    freeze_z, implicit_step, residual_check, solve_direct, solve_z_frozen, y0_estimate, ImplicitConfig,
    ResidualReport, Solution, SolveDiagnostics, Y0Estimate, ZSource,
};
pub use l1::{solve_l1, L1Config, L1Report, L1Rung};
pub use lattice::{LatticeConfig, LatticeEngine, LatticeSolution};
pub use picard::{picard_solve, subdivide_for_contraction, IntervalReport, PicardConfig, PicardInit, PicardReport};
pub use regression::{RegressionEngine, MAX_CONDITION};

/// Which conditional-expectation engine a run uses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CondExpEngine {
    /// Least squares on products of Hermite polynomials in `B_t`, total
    /// degree at most `degree`.
    Regression { degree: usize },
    /// Gauss–Hermite lattice, `k = d = 1` only.
    Lattice(LatticeConfig),
}

impl Default for CondExpEngine {
    fn default() -> Self {
        CondExpEngine::Regression { degree: 3 }
    }
}

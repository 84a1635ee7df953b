//! Truncation ladder for integrable data: solve with `π_n(ξ)` and the
//! driver whose `y = 0` part is truncated at `ne^{-t}`, for growing `n`.

use serde::{Deserialize, Serialize};

use super::backward::Solution;
use super::picard::{picard_solve, PicardConfig};
use super::regression::RegressionEngine;
use crate::error::{BsdeError, Result};
use crate::estimates::{class_d_norm, sp_norm, ClassDConfig};
use crate::generators::{Assumption, Generator, TerminalCondition};
use crate::grid::TimeGrid;
use crate::transforms::{truncate_driver, truncate_terminal};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct L1Config {
    pub beta: f64,
    pub ladder: Vec<f64>,
    pub picard: PicardConfig,
    pub class_d: ClassDConfig,
    /// Return an error when the ladder distances increase.
    pub require_monotone: bool,
}

impl Default for L1Config {
    fn default() -> Self {
        L1Config {
            beta: 0.75,
            ladder: vec![2.0, 4.0, 8.0, 16.0],
            picard: PicardConfig::default(),
            class_d: ClassDConfig::default(),
            require_monotone: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct L1Rung {
    pub n: f64,
    pub y0: Vec<f64>,
    pub picard_converged: bool,
    pub picard_intervals: usize,
    /// Distances to the previous rung (absent on the first rung).
    pub s_beta_distance: Option<f64>,
    pub class_d_distance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct L1Report {
    pub beta: f64,
    pub alpha: Option<f64>,
    pub rungs: Vec<L1Rung>,
    /// `‖yⁿ - yⁿ⁻¹‖_{S^β}` between consecutive rungs.
    pub s_beta_distances: Vec<f64>,
    pub class_d_distances: Vec<f64>,
    pub monotone: bool,
    /// Last distance over the first one.
    pub final_ratio: f64,
}

fn nonincreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0])
}

pub fn solve_l1(
    g: &Generator,
    xi: &TerminalCondition,
    engine: &RegressionEngine<'_>,
    grid: &TimeGrid,
    cfg: &L1Config,
) -> Result<(Solution, L1Report)> {
    let alpha = g.coefficients.sublinear.as_ref().map(|s| s.alpha);
    let lower = if g.claims_assumption(Assumption::H6) {
        alpha.unwrap_or(0.0)
    } else {
        0.0
    };
    if !(cfg.beta > lower && cfg.beta < 1.0) {
        return Err(BsdeError::InvalidArgument(format!(
            "beta = {} must lie in ({lower}, 1)",
            cfg.beta
        )));
    }
    if cfg.ladder.is_empty() || cfg.ladder.iter().any(|n| !(*n > 0.0)) {
        return Err(BsdeError::InvalidArgument("ladder must be a non-empty list of positive levels".into()));
    }
    let picard = PicardConfig { p: 2.0, ..cfg.picard.clone() };
    let mut rungs = Vec::new();
    let mut s_beta = Vec::new();
    let mut class_d = Vec::new();
    let mut prev: Option<Solution> = None;
    for &n in &cfg.ladder {
        let gn = truncate_driver(g, n);
        let xin = truncate_terminal(xi, n);
        let (sol, rep) = picard_solve(&gn, &xin, engine, grid, &picard)?;
        let (sd, cd) = match &prev {
            Some(p) => {
                let diff = sol.y.sub(&p.y);
                let sd = sp_norm(&diff, cfg.beta)?;
                let cd = class_d_norm(&diff, &cfg.class_d)?;
                s_beta.push(sd);
                class_d.push(cd);
                (Some(sd), Some(cd))
            }
            None => (None, None),
        };
        rungs.push(L1Rung {
            n,
            y0: sol.y0(),
            picard_converged: rep.converged,
            picard_intervals: rep.intervals.len(),
            s_beta_distance: sd,
            class_d_distance: cd,
        });
        prev = Some(sol);
    }
    let monotone = nonincreasing(&s_beta) && nonincreasing(&class_d);
    let final_ratio = match (s_beta.first(), s_beta.last()) {
        (Some(&a), Some(&b)) if a > 0.0 => b / a,
        (Some(_), Some(_)) => 0.0,
        _ => f64::NAN,
    };
    let report = L1Report {
        beta: cfg.beta,
        alpha,
        rungs,
        s_beta_distances: s_beta,
        class_d_distances: class_d,
        monotone,
        final_ratio,
    };
    if cfg.require_monotone && !monotone {
        return Err(BsdeError::LadderNotDecreasing(Box::new(report)));
    }
    Ok((prev.expect("non-empty ladder"), report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::CoefficientSet;
    use crate::grid::time_fn;
    use crate::paths::sample_brownian;

    #[test]
    fn bounded_data_stabilise_once_truncation_is_inactive() {
        let grid = TimeGrid::uniform(1.0, 8).unwrap();
        let ens = sample_brownian(&grid, 1024, 1, 5).unwrap();
        let eng = RegressionEngine::new(&grid, &ens, 2).unwrap();
        // |g(t,0)| = 0.3 < e^{-1} and |ξ| = 0.3: truncation is the identity from n = 1 on
        let g = Generator::new("bounded", 1, 1, |_, y, _, _, out| out[0] = 0.3 - y[0])
            .with_coefficients(CoefficientSet::new(time_fn(|_| 0.0), time_fn(|_| 0.0)));
        let cfg = L1Config {
            ladder: vec![1.0, 2.0, 4.0],
            ..L1Config::default()
        };
        let (_, rep) = solve_l1(&g, &TerminalCondition::constant(1, 0.3), &eng, &grid, &cfg).unwrap();
        assert_eq!(rep.s_beta_distances, vec![0.0, 0.0]);
        assert!(rep.monotone);
    }

    #[test]
    fn beta_outside_range_is_rejected() {
        let grid = TimeGrid::uniform(1.0, 4).unwrap();
        let ens = sample_brownian(&grid, 256, 1, 5).unwrap();
        let eng = RegressionEngine::new(&grid, &ens, 1).unwrap();
        let g = crate::generators::fixture("example3").unwrap().generator;
        let cfg = L1Config {
            beta: 0.4,
            ..L1Config::default()
        };
        assert!(solve_l1(&g, &TerminalCondition::brownian(1), &eng, &grid, &cfg).is_err());
    }
}

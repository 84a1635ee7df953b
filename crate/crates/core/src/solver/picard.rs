//! Outer fixed-point iteration on the `z`-argument of the driver, solved
//! interval by interval from the terminal time backwards.

use serde::{Deserialize, Serialize};

use super::backward::{backward_range, mean_se, terminal_field, time_slice, ImplicitConfig, Solution, SolveDiagnostics, ZSource};
use super::regression::RegressionEngine;
use crate::error::{BsdeError, Result};
use crate::estimates::{mp_norm_range, sp_norm_range};
use crate::generators::{Generator, TerminalCondition};
use crate::grid::TimeGrid;
use crate::quadrature::{bisect, tanh_sinh};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PicardInit {
    Zero,
    Constant { y: f64, z: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PicardConfig {
    pub p: f64,
    /// Stop when `‖δy‖_{Sᵖ} + ‖δz‖_{Mᵖ}` on the interval falls below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Upper bound for `∫ v²` on each interval.
    pub threshold: f64,
    /// Extra bisections allowed when measured ratios exceed one.
    pub max_splits: usize,
    pub init: PicardInit,
    pub implicit: ImplicitConfig,
}

impl Default for PicardConfig {
    fn default() -> Self {
        PicardConfig {
            p: 2.0,
            tol: 1e-6,
            max_iter: 60,
            threshold: 0.5,
            max_splits: 8,
            init: PicardInit::Zero,
            implicit: ImplicitConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalReport {
    pub start: f64,
    pub end: f64,
    pub start_index: usize,
    pub end_index: usize,
    pub int_v2: f64,
    /// `‖δy‖_{Sᵖ} + ‖δz‖_{Mᵖ}` per iteration; the first entry is measured
    /// against the initial guess.
    pub distances: Vec<f64>,
    pub distances_y: Vec<f64>,
    pub distances_z: Vec<f64>,
    /// `(‖δyⁿ‖ᵖ + ‖δzⁿ‖ᵖ) / (‖δyⁿ⁻¹‖ᵖ + ‖δzⁿ⁻¹‖ᵖ)`, from the second
    /// iteration on (0 when the previous distance vanished).
    pub ratios: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PicardReport {
    pub p: f64,
    pub tol: f64,
    pub breakpoints: Vec<f64>,
    pub breakpoint_indices: Vec<usize>,
    /// In time order.
    pub intervals: Vec<IntervalReport>,
    pub converged: bool,
    pub splits: usize,
}

impl PicardReport {
    pub fn max_ratio_after(&self, skip: usize) -> f64 {
        self.intervals
            .iter()
            .flat_map(|r| r.ratios.iter().skip(skip).copied())
            .fold(0.0, f64::max)
    }
}

/// Cut points `0 = T_0 < … < T_n = T` from the cumulative `∫ v²`, placed at
/// the multiples of `threshold` (each interval carries at most `threshold`).
pub fn subdivide_for_contraction<F>(v: F, grid: &TimeGrid, threshold: f64) -> Result<Vec<f64>>
where
    F: Fn(f64) -> f64,
{
    if !(threshold > 0.0) {
        return Err(BsdeError::InvalidArgument("threshold must be positive".into()));
    }
    let end = grid.terminal();
    let v2 = |t: f64| {
        let x = v(t);
        x * x
    };
    let cum = |t: f64| tanh_sinh(v2, 0.0, t, 1e-13);
    let total = cum(end);
    if !total.is_finite() {
        return Err(BsdeError::Divergent("integral of v^2 over the grid".into()));
    }
    let mut cuts = vec![0.0];
    let mut j = 1;
    while (j as f64) * threshold < total * (1.0 - 1e-12) {
        let level = j as f64 * threshold;
        let x = bisect(|t| cum(t) - level, 0.0, end, 1e-13 * (1.0 + end));
        cuts.push(x);
        j += 1;
    }
    cuts.push(end);
    Ok(cuts)
}

fn snap(breaks: &[f64], grid: &TimeGrid) -> Vec<usize> {
    let mut idx: Vec<usize> = breaks.iter().map(|&t| grid.nearest_index(t)).collect();
    idx[0] = 0;
    *idx.last_mut().expect("non-empty") = grid.steps();
    idx.dedup();
    idx
}

fn v2_integral(g: &Generator, grid: &TimeGrid, a: usize, b: usize) -> f64 {
    tanh_sinh(
        |t| {
            let v = g.v(t);
            v * v
        },
        grid.t(a),
        grid.t(b),
        1e-12,
    )
}

/// Picard iteration `zⁿ ↦ (yⁿ⁺¹, zⁿ⁺¹)` with `zⁿ` frozen in the driver.
pub fn picard_solve(
    g: &Generator,
    xi: &TerminalCondition,
    engine: &RegressionEngine<'_>,
    grid: &TimeGrid,
    cfg: &PicardConfig,
) -> Result<(Solution, PicardReport)> {
    let ens = engine.ensemble();
    if g.d() != ens.dim() || grid.steps() != ens.steps() {
        return Err(BsdeError::InvalidArgument("generator, grid and ensemble disagree".into()));
    }
    if !(cfg.p > 1.0) {
        return Err(BsdeError::InvalidArgument(format!("Picard exponent must exceed 1, got {}", cfg.p)));
    }
    let (k, d) = g.dims();
    let n = grid.steps();
    let breakpoints = subdivide_for_contraction(|t| g.v(t), grid, cfg.threshold)?;
    let mut stack: Vec<(usize, usize)> = snap(&breakpoints, grid).windows(2).map(|w| (w[0], w[1])).collect();

    let (mut y, mut z) = terminal_field(xi, ens, k, d)?;
    let mut acc = time_slice(&y, n);
    let (y_init, z_init) = match cfg.init {
        PicardInit::Zero => (0.0, 0.0),
        PicardInit::Constant { y, z } => (y, z),
    };
    let mut diag = SolveDiagnostics::default();
    let mut intervals = Vec::new();
    let mut splits = 0;
    let mut all_converged = true;

    while let Some((a, b)) = stack.pop() {
        // iterate on [t_a, t_b] with y at t_b fixed
        let mut y_prev = y.clone();
        let mut z_prev = z.clone();
        for m in 0..ens.n_paths() {
            for i in a..b {
                y_prev.at_mut(m, i).fill(y_init);
                z_prev.at_mut(m, i).fill(z_init);
            }
        }
        let mut rep = IntervalReport {
            start: grid.t(a),
            end: grid.t(b),
            start_index: a,
            end_index: b,
            int_v2: v2_integral(g, grid, a, b),
            distances: vec![],
            distances_y: vec![],
            distances_z: vec![],
            ratios: vec![],
            iterations: 0,
            converged: false,
        };
        let acc_b = acc.clone();
        let mut prev_pow = f64::NAN;
        let mut bad = 0;
        let mut split = false;
        for it in 1..=cfg.max_iter {
            let mut step_diag = SolveDiagnostics::default();
            acc.clone_from(&acc_b);
            backward_range(
                g,
                engine,
                grid,
                ZSource::Frozen(&z_prev),
                (a, b),
                &cfg.implicit,
                &mut y,
                &mut z,
                &mut acc,
                &mut step_diag,
            )?;
            super::backward::merge_diagnostics(&mut diag, &step_diag);
            let dy = sp_norm_range(&y.sub(&y_prev), cfg.p, a..=b)?;
            let dz = mp_norm_range(&z.sub(&z_prev), grid, cfg.p, a..b)?;
            let dist = dy + dz;
            let pow = dy.powf(cfg.p) + dz.powf(cfg.p);
            rep.distances.push(dist);
            rep.distances_y.push(dy);
            rep.distances_z.push(dz);
            rep.iterations = it;
            let ratio = if it > 1 {
                let r = if prev_pow > 0.0 { pow / prev_pow } else { 0.0 };
                rep.ratios.push(r);
                Some(r)
            } else {
                None
            };
            prev_pow = pow;
            y_prev.clone_from(&y);
            z_prev.clone_from(&z);

            if dist == 0.0 {
                rep.converged = true;
                break;
            }
            if let Some(r) = ratio {
                // geometric tail estimate in norm units
                let rho = r.powf(1.0 / cfg.p);
                if dist < cfg.tol && rho < 1.0 && dist * rho / (1.0 - rho) < 0.1 * cfg.tol {
                    rep.converged = true;
                    break;
                }
                if it > 3 && r > 1.0 {
                    bad += 1;
                    if bad >= 2 {
                        split = true;
                        break;
                    }
                }
            }
        }
        if split {
            let mid = (a + b) / 2;
            if splits >= cfg.max_splits || mid == a || mid == b {
                intervals.push(rep);
                intervals.sort_by_key(|r| r.start_index);
                let report = PicardReport {
                    p: cfg.p,
                    tol: cfg.tol,
                    breakpoints,
                    breakpoint_indices: vec![],
                    intervals,
                    converged: false,
                    splits,
                };
                return Err(BsdeError::NoContraction(Box::new(report)));
            }
            splits += 1;
            stack.push((a, mid));
            stack.push((mid, b));
            acc = acc_b;
            continue;
        }
        all_converged &= rep.converged;
        intervals.push(rep);
    }
    diag.y0_mc_se = mean_se(&acc, k);
    intervals.sort_by_key(|r| r.start_index);
    let mut breakpoint_indices: Vec<usize> = intervals.iter().map(|r| r.start_index).collect();
    breakpoint_indices.push(n);
    let report = PicardReport {
        p: cfg.p,
        tol: cfg.tol,
        breakpoints: breakpoint_indices.iter().map(|&i| grid.t(i)).collect(),
        breakpoint_indices,
        intervals,
        converged: all_converged,
        splits,
    };
    Ok((
        Solution {
            y,
            z,
            diagnostics: diag,
        },
        report,
    ))
}

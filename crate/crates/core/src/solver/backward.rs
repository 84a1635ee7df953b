//! Backward Euler recursion: implicit in `y`, explicit in `z`.
//!
//! At step `i`, `z_{t_i} = E[y_{t_{i+1}} ΔB_iᵀ | F_{t_i}] / Δ_i` and `y_{t_i}`
//! solves `y = E[y_{t_{i+1}} | F_{t_i}] + w_i g(s_i, y, V_i)` where `s_i`,
//! `w_i` are the grid's quadrature node and weight for `[t_i, t_{i+1}]` and
//! `V_i` is either a frozen field or the freshly computed `z_{t_i}`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::regression::RegressionEngine;
use crate::error::{BsdeError, Result};
use crate::generators::{norm, Generator, TerminalCondition};
use crate::grid::TimeGrid;
use crate::paths::{AdaptedField, BrownianEnsemble, PathContext};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImplicitConfig {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ImplicitConfig {
    fn default() -> Self {
        ImplicitConfig {
            damping: 0.5,
            tol: 1e-10,
            max_iter: 200,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub max_implicit_iterations: usize,
    pub mean_implicit_iterations: f64,
    /// Implicit solves that needed the bisection fallback.
    pub fallbacks: usize,
    pub max_condition: f64,
    /// Monte Carlo standard error of `y_0`, per component. Projections keep
    /// sample means, so `y_0` is the sample mean of `ξ + Σ w_i g_i` along
    /// the paths and this is that mean's standard error.
    pub y0_mc_se: Vec<f64>,
    #[serde(skip)]
    solves: usize,
}

impl SolveDiagnostics {
    fn record(&mut self, iterations: usize, fallback: bool) {
        self.max_implicit_iterations = self.max_implicit_iterations.max(iterations);
        self.mean_implicit_iterations = (self.mean_implicit_iterations * self.solves as f64
            + iterations as f64)
            / (self.solves + 1) as f64;
        self.solves += 1;
        if fallback {
            self.fallbacks += 1;
        }
    }

    fn merge(&mut self, other: &SolveDiagnostics) {
        let total = self.solves + other.solves;
        if total > 0 {
            self.mean_implicit_iterations = (self.mean_implicit_iterations * self.solves as f64
                + other.mean_implicit_iterations * other.solves as f64)
                / total as f64;
        }
        self.solves = total;
        self.max_implicit_iterations = self.max_implicit_iterations.max(other.max_implicit_iterations);
        self.fallbacks += other.fallbacks;
        self.max_condition = self.max_condition.max(other.max_condition);
    }
}

/// Numerical solution on a grid: `y` has `N + 1` time slots, `z` as well
/// (the last slot is zero and carries no information).
#[derive(Clone, Debug)]
pub struct Solution {
    pub y: AdaptedField,
    pub z: AdaptedField,
    pub diagnostics: SolveDiagnostics,
}

impl Solution {
    pub fn k(&self) -> usize {
        self.y.width()
    }

    /// Mean of `y` at time index `i`, per component.
    pub fn mean_y(&self, i: usize) -> Vec<f64> {
        let k = self.k();
        let mut acc = vec![0.0; k];
        for m in 0..self.y.n_paths() {
            for (a, v) in acc.iter_mut().zip(self.y.at(m, i)) {
                *a += v;
            }
        }
        acc.iter().map(|a| a / self.y.n_paths() as f64).collect()
    }

    pub fn y0(&self) -> Vec<f64> {
        self.mean_y(0)
    }

    /// Standard deviation of `|y_{t_i}|` across paths.
    pub fn std_y(&self, i: usize) -> f64 {
        let m = self.y.n_paths() as f64;
        let (mut s, mut s2) = (0.0, 0.0);
        for p in 0..self.y.n_paths() {
            let v = self.y.norm_at(p, i);
            s += v;
            s2 += v * v;
        }
        let mean = s / m;
        (s2 / m - mean * mean).max(0.0).sqrt()
    }

    pub fn mean_abs_z(&self, i: usize) -> f64 {
        (0..self.z.n_paths()).map(|p| self.z.norm_at(p, i)).sum::<f64>() / self.z.n_paths() as f64
    }
}

/// Solve `y = c + w g(t, y, v, ctx)`; returns `(iterations, used_fallback)`.
#[allow(clippy::too_many_arguments)]
pub fn implicit_step(
    g: &Generator,
    t: f64,
    w: f64,
    c: &[f64],
    v: &[f64],
    ctx: &PathContext<'_>,
    cfg: &ImplicitConfig,
    y: &mut [f64],
) -> Option<(usize, bool)> {
    let k = c.len();
    let mut gy = vec![0.0; k];
    let mut f = vec![0.0; k];
    // explicit predictor
    g.eval_into(t, c, v, ctx, &mut gy);
    for j in 0..k {
        y[j] = c[j] + w * gy[j];
    }
    // plain iteration while the residual shrinks, damped once it does not
    let mut theta = 1.0;
    let mut prev = f64::INFINITY;
    let mut ok = false;
    let mut iters = 0;
    if y.iter().all(|x| x.is_finite()) {
        for it in 1..=cfg.max_iter {
            iters = it;
            g.eval_into(t, y, v, ctx, &mut gy);
            for j in 0..k {
                f[j] = c[j] + w * gy[j];
            }
            let res: f64 = f.iter().zip(y.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            if !res.is_finite() {
                break;
            }
            if res <= cfg.tol * (1.0 + norm(y)) {
                y.copy_from_slice(&f);
                ok = true;
                break;
            }
            if res >= prev {
                theta = cfg.damping.clamp(1e-3, 1.0);
            }
            prev = res;
            for j in 0..k {
                y[j] = (1.0 - theta) * y[j] + theta * f[j];
            }
        }
    }
    if ok {
        return Some((iters, false));
    }
    // Gauss–Seidel sweeps of scalar bisections; each component map
    // s ↦ s - c_j - w g_j(.., s, ..) is increasing under monotonicity
    y.copy_from_slice(c);
    for sweep in 1..=100 {
        for j in 0..k {
            let phi = |s: f64, y: &mut [f64], gy: &mut [f64]| -> f64 {
                y[j] = s;
                g.eval_into(t, y, v, ctx, gy);
                s - c[j] - w * gy[j]
            };
            let start = y[j];
            let mut step = 1.0 + start.abs();
            let (mut lo, mut hi) = (start - step, start + step);
            let mut found = false;
            for _ in 0..80 {
                let a = phi(lo, y, &mut gy);
                let b = phi(hi, y, &mut gy);
                if a <= 0.0 && b >= 0.0 {
                    found = true;
                    break;
                }
                step *= 2.0;
                if !(a <= 0.0) {
                    lo = start - step;
                }
                if !(b >= 0.0) {
                    hi = start + step;
                }
            }
            if !found {
                return None;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if hi - lo <= 1e-13 * (1.0 + mid.abs()) || mid == lo || mid == hi {
                    break;
                }
                if phi(mid, y, &mut gy) > 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            y[j] = 0.5 * (lo + hi);
        }
        g.eval_into(t, y, v, ctx, &mut gy);
        let res: f64 = (0..k)
            .map(|j| {
                let r = y[j] - c[j] - w * gy[j];
                r * r
            })
            .sum::<f64>()
            .sqrt();
        if res <= 1e3 * cfg.tol * (1.0 + norm(y)) || k == 1 {
            return Some((iters + sweep, true));
        }
    }
    None
}

/// Where the driver's `z`-argument comes from during a backward pass.
#[derive(Clone, Copy, Debug)]
pub enum ZSource<'a> {
    Frozen(&'a AdaptedField),
    Current,
}

/// Backward recursion over steps `a..b`; `y` must hold the terminal values
/// at index `b`. Writes `y` at `a..b` and `z` at `a..b`, and adds
/// `w_i g_i` to the per-path sums `acc` (`M × k`).
#[allow(clippy::too_many_arguments)]
pub(crate) fn backward_range(
    g: &Generator,
    engine: &RegressionEngine<'_>,
    grid: &TimeGrid,
    source: ZSource<'_>,
    range: (usize, usize),
    implicit: &ImplicitConfig,
    y: &mut AdaptedField,
    z: &mut AdaptedField,
    acc: &mut [f64],
    diag: &mut SolveDiagnostics,
) -> Result<()> {
    let ens = engine.ensemble();
    let (k, d) = g.dims();
    let kd = k * d;
    let width = k + kd;
    let m_paths = ens.n_paths();
    let (a, b) = range;
    for i in (a..b).rev() {
        let dt = grid.dt(i);
        let node = grid.node(i);
        let w = grid.weight(i);
        let next_y = y.slice_at_time(i + 1);
        let cy = engine.project(i, &next_y, k)?;
        // z from the centred increment: same conditional mean, less variance
        let mut values = vec![0.0; m_paths * kd];
        values.par_chunks_mut(kd).enumerate().for_each(|(m, row)| {
            let db = ens.increment(m, i);
            for r in 0..k {
                let dev = next_y[m * k + r] - cy[m * k + r];
                for j in 0..d {
                    row[r * d + j] = dev * db[j];
                }
            }
        });
        let cz = engine.project(i, &values, kd)?;
        let mut proj = vec![0.0; m_paths * width];
        proj.par_chunks_mut(width).enumerate().for_each(|(m, row)| {
            row[..k].copy_from_slice(&cy[m * k..(m + 1) * k]);
            row[k..].copy_from_slice(&cz[m * kd..(m + 1) * kd]);
        });
        let results: Vec<Option<(Vec<f64>, Vec<f64>, usize, bool)>> = (0..m_paths)
            .into_par_iter()
            .map(|m| {
                let row = &proj[m * width..(m + 1) * width];
                let zi: Vec<f64> = row[k..].iter().map(|v| v / dt).collect();
                let v: &[f64] = match source {
                    ZSource::Frozen(field) => field.at(m, i),
                    ZSource::Current => &zi,
                };
                let ctx = PathContext::new(m, i, ens.position(m, i));
                let mut yi = vec![0.0; k];
                implicit_step(g, node, w, &row[..k], v, &ctx, implicit, &mut yi)
                    .map(|(it, fb)| (yi, zi, it, fb))
            })
            .collect();
        for (m, r) in results.into_iter().enumerate() {
            let (yi, zi, it, fb) = r.ok_or(BsdeError::ImplicitStep { step: i, path: m })?;
            if let Some(&bad) = yi.iter().find(|v| !v.is_finite()) {
                return Err(BsdeError::NonFinite { t: node, value: bad });
            }
            let c = &proj[m * width..m * width + k];
            for j in 0..k {
                acc[m * k + j] += yi[j] - c[j];
            }
            y.at_mut(m, i).copy_from_slice(&yi);
            z.at_mut(m, i).copy_from_slice(&zi);
            diag.record(it, fb);
        }
        diag.max_condition = diag.max_condition.max(engine.condition(i));
    }
    Ok(())
}

/// Standard error of the per-component mean of `acc` (`M × k`).
pub(crate) fn mean_se(acc: &[f64], k: usize) -> Vec<f64> {
    let m = (acc.len() / k) as f64;
    (0..k)
        .map(|c| {
            let (mut s, mut s2) = (0.0, 0.0);
            for row in acc.chunks(k) {
                s += row[c];
                s2 += row[c] * row[c];
            }
            let mean = s / m;
            ((s2 / m - mean * mean).max(0.0) / m).sqrt()
        })
        .collect()
}

/// `y` at index `n` flattened to `M × k`.
pub(crate) fn time_slice(y: &AdaptedField, n: usize) -> Vec<f64> {
    y.slice_at_time(n)
}

pub(crate) fn terminal_field(
    xi: &TerminalCondition,
    ens: &BrownianEnsemble,
    k: usize,
    d: usize,
) -> Result<(AdaptedField, AdaptedField)> {
    if xi.k() != k {
        return Err(BsdeError::InvalidArgument(format!(
            "terminal condition has dimension {} but the generator has {k}",
            xi.k()
        )));
    }
    let n = ens.steps();
    let mut y = AdaptedField::zeros(ens.n_paths(), n + 1, k, 1);
    let z = AdaptedField::zeros(ens.n_paths(), n + 1, k, d);
    for m in 0..ens.n_paths() {
        xi.eval_into(&ens.path(m), y.at_mut(m, n));
    }
    Ok((y, z))
}

fn check_dims(g: &Generator, grid: &TimeGrid, ens: &BrownianEnsemble) -> Result<()> {
    if g.d() != ens.dim() {
        return Err(BsdeError::InvalidArgument(format!(
            "generator expects d = {} but the ensemble has d = {}",
            g.d(),
            ens.dim()
        )));
    }
    if grid.steps() != ens.steps() {
        return Err(BsdeError::InvalidArgument("grid and ensemble differ in steps".into()));
    }
    Ok(())
}

/// Backward solve with the driver's `z`-argument frozen at `v`.
pub fn solve_z_frozen(
    g: &Generator,
    xi: &TerminalCondition,
    v: &AdaptedField,
    engine: &RegressionEngine<'_>,
    grid: &TimeGrid,
    implicit: &ImplicitConfig,
) -> Result<Solution> {
    let ens = engine.ensemble();
    check_dims(g, grid, ens)?;
    let (mut y, mut z) = terminal_field(xi, ens, g.k(), g.d())?;
    let mut acc = time_slice(&y, grid.steps());
    let mut diag = SolveDiagnostics::default();
    backward_range(
        g,
        engine,
        grid,
        ZSource::Frozen(v),
        (0, grid.steps()),
        implicit,
        &mut y,
        &mut z,
        &mut acc,
        &mut diag,
    )?;
    diag.y0_mc_se = mean_se(&acc, g.k());
    Ok(Solution { y, z, diagnostics: diag })
}

/// Backward solve with `z` fed back within the same step (no outer
/// iteration); the fixed point of the Picard iteration.
pub fn solve_direct(
    g: &Generator,
    xi: &TerminalCondition,
    engine: &RegressionEngine<'_>,
    grid: &TimeGrid,
    implicit: &ImplicitConfig,
) -> Result<Solution> {
    let ens = engine.ensemble();
    check_dims(g, grid, ens)?;
    let (mut y, mut z) = terminal_field(xi, ens, g.k(), g.d())?;
    let mut acc = time_slice(&y, grid.steps());
    let mut diag = SolveDiagnostics::default();
    backward_range(
        g,
        engine,
        grid,
        ZSource::Current,
        (0, grid.steps()),
        implicit,
        &mut y,
        &mut z,
        &mut acc,
        &mut diag,
    )?;
    diag.y0_mc_se = mean_se(&acc, g.k());
    Ok(Solution { y, z, diagnostics: diag })
}

/// `g` with its `z`-argument replaced by `v` at `(path, step)` of the
/// evaluation context.
pub fn freeze_z(g: &Generator, v: Arc<AdaptedField>) -> Generator {
    let inner = g.clone();
    g.derived(format!("{}|z frozen", g.name()), move |t, y, _z, ctx, out| {
        inner.eval_into(t, y, v.at(ctx.path, ctx.step), ctx, out)
    })
}

pub(crate) fn merge_diagnostics(into: &mut SolveDiagnostics, from: &SolveDiagnostics) {
    into.merge(from);
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub times: Vec<f64>,
    /// Root mean square over paths of `E[R_t | F_t]`, where
    /// `R_t = y_t - (ξ + Σ g w - Σ z ΔB)` on `[t, T]`; the conditional mean
    /// is taken with the regression engine.
    pub rms: Vec<f64>,
    /// Root mean square of `R_t` itself (includes the martingale noise of
    /// the estimated `z`).
    pub raw_rms: Vec<f64>,
    pub max: f64,
}

/// Size of the defect of the discrete BSDE identity at about `n_times`
/// equally spaced grid indices (always including `0`).
pub fn residual_check(
    sol: &Solution,
    g: &Generator,
    xi: &TerminalCondition,
    grid: &TimeGrid,
    engine: &RegressionEngine<'_>,
    n_times: usize,
) -> Result<ResidualReport> {
    let ens = engine.ensemble();
    let n = grid.steps();
    let k = g.k();
    let stride = (n / n_times.max(1)).max(1);
    let sampled: Vec<usize> = (0..n).step_by(stride).collect();
    let per_path: Vec<Vec<f64>> = (0..ens.n_paths())
        .into_par_iter()
        .map(|m| {
            let mut acc = xi.eval(&ens.path(m));
            let mut out = vec![0.0; sampled.len() * k];
            let mut gv = vec![0.0; k];
            let mut next = sampled.len();
            for i in (0..n).rev() {
                let ctx = PathContext::new(m, i, ens.position(m, i));
                g.eval_into(grid.node(i), sol.y.at(m, i), sol.z.at(m, i), &ctx, &mut gv);
                let zi = sol.z.at(m, i);
                let db = ens.increment(m, i);
                let d = db.len();
                for r in 0..k {
                    let mut zdb = 0.0;
                    for j in 0..d {
                        zdb += zi[r * d + j] * db[j];
                    }
                    acc[r] += gv[r] * grid.weight(i) - zdb;
                }
                if next > 0 && sampled[next - 1] == i {
                    next -= 1;
                    let yi = sol.y.at(m, i);
                    for r in 0..k {
                        out[next * k + r] = yi[r] - acc[r];
                    }
                }
            }
            out
        })
        .collect();
    let mf = ens.n_paths() as f64;
    let mut rms = Vec::with_capacity(sampled.len());
    let mut raw_rms = Vec::with_capacity(sampled.len());
    for (s, &i) in sampled.iter().enumerate() {
        let vals: Vec<f64> = per_path.iter().flat_map(|row| row[s * k..(s + 1) * k].iter().copied()).collect();
        let proj = engine.project(i, &vals, k)?;
        rms.push((proj.iter().map(|v| v * v).sum::<f64>() / mf).sqrt());
        raw_rms.push((vals.iter().map(|v| v * v).sum::<f64>() / mf).sqrt());
    }
    let max = rms.iter().copied().fold(0.0, f64::max);
    Ok(ResidualReport {
        times: sampled.iter().map(|&i| grid.t(i)).collect(),
        rms,
        raw_rms,
        max,
    })
}

/// `y_0` with a combined standard error: the Monte Carlo part reported by
/// the solver and the change of `y_0` when the same paths are solved on the
/// grid coarsened by two.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Y0Estimate {
    pub y0: Vec<f64>,
    pub y0_coarse: Vec<f64>,
    pub mc_se: Vec<f64>,
    pub discretization: Vec<f64>,
    pub combined_se: Vec<f64>,
}

pub fn y0_estimate<F>(solve: F, grid: &TimeGrid, ens: &BrownianEnsemble) -> Result<Y0Estimate>
where
    F: Fn(&TimeGrid, &BrownianEnsemble) -> Result<Solution>,
{
    let fine = solve(grid, ens)?;
    let cgrid = grid.coarsen(2)?;
    let cens = ens.coarsen(2)?;
    let coarse = solve(&cgrid, &cens)?;
    let y0 = fine.y0();
    let y0_coarse = coarse.y0();
    let discretization: Vec<f64> = y0.iter().zip(&y0_coarse).map(|(a, b)| (a - b).abs()).collect();
    let mc_se = fine.diagnostics.y0_mc_se.clone();
    let combined_se = mc_se
        .iter()
        .zip(&discretization)
        .map(|(a, b)| (a * a + b * b).sqrt())
        .collect();
    Ok(Y0Estimate {
        y0,
        y0_coarse,
        mc_se,
        discretization,
        combined_se,
    })
}

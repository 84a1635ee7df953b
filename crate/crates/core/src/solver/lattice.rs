//! Deterministic backward recursion on a space grid for `k = d = 1` and a
//! Markov terminal condition. Conditional expectations over one step are
//! Gauss–Hermite sums; off-grid values come from 4-point Lagrange
//! interpolation, so polynomials of degree three are carried exactly.

use serde::{Deserialize, Serialize};

use super::backward::{implicit_step, ImplicitConfig, Solution, SolveDiagnostics};
use crate::error::{BsdeError, Result};
use crate::generators::{Generator, TerminalCondition};
use crate::grid::TimeGrid;
use crate::paths::{AdaptedField, BrownianEnsemble, PathContext};
use crate::quadrature::gauss_hermite_normal;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LatticeConfig {
    pub nodes: usize,
    pub points: usize,
    /// Half-width of the space grid in units of `√T`.
    pub width: f64,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        LatticeConfig {
            nodes: 20,
            points: 801,
            width: 7.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LatticeEngine {
    xs: Vec<f64>,
    dx: f64,
    gh_x: Vec<f64>,
    gh_w: Vec<f64>,
    grid: TimeGrid,
}

/// `y` and `z` tables, one row of space values per grid time.
#[derive(Clone, Debug)]
pub struct LatticeSolution {
    pub xs: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
    pub diagnostics: SolveDiagnostics,
}

fn interpolate(xs: &[f64], dx: f64, table: &[f64], x: f64) -> f64 {
    let n = xs.len();
    let pos = (x - xs[0]) / dx;
    let j = (pos.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
    let mut acc = 0.0;
    for a in 0..4 {
        let mut l = 1.0;
        for b in 0..4 {
            if a != b {
                l *= (pos - (j + b) as f64) / (a as f64 - b as f64);
            }
        }
        acc += l * table[j + a];
    }
    acc
}

impl LatticeEngine {
    pub fn new(grid: &TimeGrid, cfg: &LatticeConfig) -> Result<Self> {
        if cfg.points < 4 || cfg.nodes == 0 || !(cfg.width > 0.0) {
            return Err(BsdeError::InvalidArgument("lattice needs at least 4 points and 1 node".into()));
        }
        let half = cfg.width * grid.terminal().sqrt();
        let dx = 2.0 * half / (cfg.points - 1) as f64;
        let xs = (0..cfg.points).map(|j| -half + j as f64 * dx).collect();
        let (gh_x, gh_w) = gauss_hermite_normal(cfg.nodes);
        Ok(LatticeEngine {
            xs,
            dx,
            gh_x,
            gh_w,
            grid: grid.clone(),
        })
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn interpolate(&self, table: &[f64], x: f64) -> f64 {
        interpolate(&self.xs, self.dx, table, x)
    }

    /// `E[f(B_{t_{i+1}}) | B_{t_i} = x]`.
    pub fn condexp_fn<F: Fn(f64) -> f64>(&self, f: F, i: usize, x: f64) -> f64 {
        let s = self.grid.dt(i).sqrt();
        self.gh_x.iter().zip(&self.gh_w).map(|(q, w)| w * f(x + s * q)).sum()
    }

    pub fn solve(&self, g: &Generator, xi: &TerminalCondition, implicit: &ImplicitConfig) -> Result<LatticeSolution> {
        if g.dims() != (1, 1) || xi.k() != 1 {
            return Err(BsdeError::InvalidArgument("lattice engine needs k = d = 1".into()));
        }
        let n = self.grid.steps();
        let mut y = vec![vec![0.0; self.xs.len()]; n + 1];
        let mut z = vec![vec![0.0; self.xs.len()]; n + 1];
        for (j, &x) in self.xs.iter().enumerate() {
            y[n][j] = xi
                .eval_markov(&[x])
                .ok_or_else(|| BsdeError::InvalidArgument("lattice engine needs a Markov terminal condition".into()))?[0];
        }
        let mut diag = SolveDiagnostics::default();
        let mut iters = 0usize;
        for i in (0..n).rev() {
            let dt = self.grid.dt(i);
            let s = dt.sqrt();
            let (node, w) = (self.grid.node(i), self.grid.weight(i));
            let (next, rest) = y.split_at_mut(i + 1);
            let next_table = &rest[0];
            let cur = &mut next[i];
            for (j, &x) in self.xs.iter().enumerate() {
                let (mut c, mut zz) = (0.0, 0.0);
                for (q, wq) in self.gh_x.iter().zip(&self.gh_w) {
                    let v = self.interpolate(next_table, x + s * q);
                    c += wq * v;
                    zz += wq * v * s * q;
                }
                zz /= dt;
                let b = [x];
                let ctx = PathContext::new(0, i, &b);
                let mut out = [0.0];
                let (it, fb) = implicit_step(g, node, w, &[c], &[zz], &ctx, implicit, &mut out)
                    .ok_or(BsdeError::ImplicitStep { step: i, path: j })?;
                iters = iters.max(it);
                if fb {
                    diag.fallbacks += 1;
                }
                cur[j] = out[0];
                z[i][j] = zz;
            }
        }
        diag.max_implicit_iterations = iters;
        Ok(LatticeSolution {
            xs: self.xs.clone(),
            y,
            z,
            diagnostics: diag,
        })
    }
}

impl LatticeSolution {
    pub fn y0(&self) -> f64 {
        let dx = self.xs[1] - self.xs[0];
        interpolate(&self.xs, dx, &self.y[0], 0.0)
    }

    /// Tables evaluated along the paths of `ens`.
    pub fn to_solution(&self, ens: &BrownianEnsemble) -> Solution {
        let dx = self.xs[1] - self.xs[0];
        let n = self.y.len() - 1;
        let mut y = AdaptedField::zeros(ens.n_paths(), n + 1, 1, 1);
        let mut z = AdaptedField::zeros(ens.n_paths(), n + 1, 1, 1);
        for m in 0..ens.n_paths() {
            for i in 0..=n {
                let x = ens.position(m, i)[0];
                y.at_mut(m, i)[0] = interpolate(&self.xs, dx, &self.y[i], x);
                z.at_mut(m, i)[0] = interpolate(&self.xs, dx, &self.z[i], x);
            }
        }
        Solution {
            y,
            z,
            diagnostics: self.diagnostics.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::LinearOracle;

    #[test]
    fn one_step_expectations_are_exact_for_polynomials() {
        let grid = TimeGrid::uniform(1.0, 4).unwrap();
        let eng = LatticeEngine::new(&grid, &LatticeConfig::default()).unwrap();
        let x = 0.3;
        let e1 = eng.condexp_fn(|b| b, 1, x);
        let e2 = eng.condexp_fn(|b| b * b, 1, x);
        assert!((e1 - x).abs() < 1e-13);
        assert!((e2 - (x * x + 0.25)).abs() < 1e-13);
    }

    #[test]
    fn interpolation_is_exact_on_cubics() {
        let grid = TimeGrid::uniform(1.0, 4).unwrap();
        let eng = LatticeEngine::new(&grid, &LatticeConfig::default()).unwrap();
        let f = |x: f64| 1.0 - x + 0.5 * x * x - 0.1 * x * x * x;
        let table: Vec<f64> = eng.xs().iter().map(|&x| f(x)).collect();
        for x in [-7.2, -1.234, 0.0, 0.5551, 6.99, 7.5] {
            assert!((eng.interpolate(&table, x) - f(x)).abs() < 1e-9 * (1.0 + f(x).abs()));
        }
    }

    #[test]
    fn zero_driver_reproduces_brownian_motion() {
        let grid = TimeGrid::uniform(1.0, 8).unwrap();
        let eng = LatticeEngine::new(&grid, &LatticeConfig::default()).unwrap();
        let o = LinearOracle::new(0.0, 0.0, 0.0, 1.0);
        let sol = eng.solve(&o.generator(), &TerminalCondition::brownian(1), &ImplicitConfig::default()).unwrap();
        assert!(sol.y0().abs() < 1e-12);
        let mid = sol.xs.len() / 2;
        assert!((sol.z[3][mid] - 1.0).abs() < 1e-12);
    }
}

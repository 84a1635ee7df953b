//! Time discretization of `[0, T]` for finite and infinite terminal times.
//!
//! An infinite horizon is cut at an effective `T_max`, chosen so that the
//! registered coefficient tails beyond it integrate to less than a tolerance,
//! and then discretized on a uniform `s`-grid through either the exponential
//! map `t = -ln(1 - s)` or the algebraic map `t = s / (1 - s)`. The latter
//! resolves coefficients with polynomial tails such as `1/(1+t²)`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{BsdeError, Result};
use crate::quadrature::integrate_to_infinity;

/// Deterministic scalar function of time.
pub type TimeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

pub fn time_fn<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F) -> TimeFn {
    Arc::new(f)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    Finite(f64),
    Infinite,
}

impl Horizon {
    pub fn is_infinite(&self) -> bool {
        matches!(self, Horizon::Infinite)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridScheme {
    Uniform,
    MappedExponential,
    MappedAlgebraic,
}

impl GridScheme {
    /// `t(s)` and `dt/ds` of the mapping.
    fn map(self, s: f64) -> (f64, f64) {
        match self {
            GridScheme::Uniform => (s, 1.0),
            GridScheme::MappedExponential => (-(-s).ln_1p(), 1.0 / (1.0 - s)),
            GridScheme::MappedAlgebraic => {
                let r = 1.0 - s;
                (s / r, 1.0 / (r * r))
            }
        }
    }

    fn s_end(self, t: f64) -> f64 {
        match self {
            GridScheme::Uniform => t,
            GridScheme::MappedExponential => -(-t).exp_m1(),
            GridScheme::MappedAlgebraic => t / (1.0 + t),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    points: Vec<f64>,
    horizon: Horizon,
    scheme: GridScheme,
    /// Effective end point: `T` for finite horizons, `T_max` otherwise.
    t_max: f64,
    /// Right end of the `s`-interval (`T` itself for uniform grids).
    s_max: f64,
}

impl TimeGrid {
    /// Uniform grid on `[0, t_end]`.
    pub fn uniform(t_end: f64, n_steps: usize) -> Result<Self> {
        build_grid(Horizon::Finite(t_end), n_steps, GridScheme::Uniform, 0.0, &[])
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn steps(&self) -> usize {
        self.points.len() - 1
    }

    pub fn t(&self, i: usize) -> f64 {
        self.points[i]
    }

    pub fn dt(&self, i: usize) -> f64 {
        self.points[i + 1] - self.points[i]
    }

    pub fn horizon(&self) -> Horizon {
        self.horizon
    }

    pub fn scheme(&self) -> GridScheme {
        self.scheme
    }

    pub fn terminal(&self) -> f64 {
        self.t_max
    }

    fn ds(&self) -> f64 {
        self.s_max / self.steps() as f64
    }

    /// Quadrature node inside interval `i`; never an end point of the grid.
    pub fn node(&self, i: usize) -> f64 {
        match self.scheme {
            GridScheme::Uniform => 0.5 * (self.points[i] + self.points[i + 1]),
            scheme => scheme.map((i as f64 + 0.5) * self.ds()).0,
        }
    }

    /// Quadrature weight paired with [`TimeGrid::node`].
    pub fn weight(&self, i: usize) -> f64 {
        match self.scheme {
            GridScheme::Uniform => self.dt(i),
            scheme => self.ds() * scheme.map((i as f64 + 0.5) * self.ds()).1,
        }
    }

    /// Index of the grid point closest to `t`.
    pub fn nearest_index(&self, t: f64) -> usize {
        let pos = self.points.partition_point(|&p| p < t);
        if pos == 0 {
            return 0;
        }
        if pos >= self.points.len() {
            return self.points.len() - 1;
        }
        if (self.points[pos] - t).abs() < (t - self.points[pos - 1]).abs() {
            pos
        } else {
            pos - 1
        }
    }

    /// Every `factor`-th point of this grid, same scheme.
    pub fn coarsen(&self, factor: usize) -> Result<TimeGrid> {
        if factor == 0 || self.steps() % factor != 0 {
            return Err(BsdeError::InvalidArgument(format!(
                "cannot coarsen {} steps by {factor}",
                self.steps()
            )));
        }
        let points = self.points.iter().step_by(factor).copied().collect();
        Ok(TimeGrid {
            points,
            ..self.clone()
        })
    }
}

/// Sum of tails `∫_T^∞ f` over the registered functions.
pub fn tail_integral(fns: &[TimeFn], from: f64) -> f64 {
    fns.iter()
        .map(|f| integrate_to_infinity(|t| f(t), from, 1e-12))
        .sum()
}

/// Smallest `T` such that the registered tails beyond `T` are below `tol`.
pub fn effective_horizon(fns: &[TimeFn], tol: f64) -> Result<f64> {
    if fns.is_empty() {
        return Err(BsdeError::CannotBoundTail);
    }
    if tol <= 0.0 {
        return Err(BsdeError::InvalidArgument("tail_tol must be positive".into()));
    }
    if tail_integral(fns, 0.0) < tol {
        return Ok(tol.max(1e-12));
    }
    let mut hi = 1.0;
    while tail_integral(fns, hi) >= tol {
        hi *= 2.0;
        if hi > 1e15 {
            return Err(BsdeError::Divergent(
                "tail integral does not fall below tolerance".into(),
            ));
        }
    }
    let mut lo = hi / 2.0;
    if hi == 1.0 {
        lo = 0.0;
    }
    while hi - lo > 1e-10 * hi {
        let mid = 0.5 * (lo + hi);
        if tail_integral(fns, mid) < tol {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

pub fn build_grid(
    horizon: Horizon,
    n_steps: usize,
    scheme: GridScheme,
    tail_tol: f64,
    tail_fns: &[TimeFn],
) -> Result<TimeGrid> {
    if n_steps == 0 {
        return Err(BsdeError::InvalidArgument("n_steps must be at least 1".into()));
    }
    let t_end = match horizon {
        Horizon::Finite(t) => {
            if !(t > 0.0 && t.is_finite()) {
                return Err(BsdeError::InvalidArgument(format!(
                    "finite horizon must be positive, got {t}"
                )));
            }
            t
        }
        Horizon::Infinite => effective_horizon(tail_fns, tail_tol)?,
    };
    let n = n_steps as f64;
    let s_max = scheme.s_end(t_end);
    let mut points: Vec<f64> = (0..=n_steps)
        .map(|i| scheme.map(s_max * i as f64 / n).0)
        .collect();
    points[n_steps] = t_end;
    for w in points.windows(2) {
        if w[1] <= w[0] {
            return Err(BsdeError::InvalidArgument(
                "grid points are not strictly increasing".into(),
            ));
        }
    }
    Ok(TimeGrid {
        points,
        horizon,
        scheme,
        t_max: t_end,
        s_max,
    })
}

/// Open-rule quadrature of `∫ f dt` over the grid; `f` is never evaluated
/// at a grid point, so integrable singularities at `t = 0` are tolerated.
pub fn time_quadrature<F: Fn(f64) -> f64>(f: F, grid: &TimeGrid) -> Result<f64> {
    let mut acc = 0.0;
    for i in 0..grid.steps() {
        let t = grid.node(i);
        let value = f(t);
        if !value.is_finite() {
            return Err(BsdeError::NonFinite { t, value });
        }
        acc += value * grid.weight(i);
    }
    Ok(acc)
}

/// Running integral `∫_0^{t_i} f` at every grid point, using the same rule as
/// [`time_quadrature`].
pub fn cumulative_quadrature<F: Fn(f64) -> f64>(f: F, grid: &TimeGrid) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(grid.steps() + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for i in 0..grid.steps() {
        let t = grid.node(i);
        let value = f(t);
        if !value.is_finite() {
            return Err(BsdeError::NonFinite { t, value });
        }
        acc += value * grid.weight(i);
        out.push(acc);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn uniform_grid_points() {
        let g = TimeGrid::uniform(1.0, 4).unwrap();
        assert_eq!(g.points(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        let g = TimeGrid::uniform(1.0, 1).unwrap();
        assert_eq!(g.points(), &[0.0, 1.0]);
    }

    #[test]
    fn zero_steps_rejected() {
        assert!(TimeGrid::uniform(1.0, 0).is_err());
    }

    #[test]
    fn infinite_horizon_needs_tails() {
        let err = build_grid(Horizon::Infinite, 8, GridScheme::MappedExponential, 1e-3, &[]);
        assert!(matches!(err, Err(BsdeError::CannotBoundTail)));
        assert!(err.unwrap_err().to_string().contains("cannot bound tail"));
    }

    #[test]
    fn effective_horizon_matches_analytic_tail() {
        // tails of t^2 e^{-t} and 1/(1+t^2) have closed forms
        let analytic =
            |t: f64| (-t).exp() * (t * t + 2.0 * t + 2.0) + (FRAC_PI_2 - t.atan());
        // root of analytic(T) = 1e-3 by bisection on the closed form
        let (mut lo, mut hi) = (1.0, 1e6);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if analytic(mid) < 1e-3 {
                hi = mid
            } else {
                lo = mid
            }
        }
        let fns = vec![
            time_fn(|t| t * t * (-t).exp()),
            time_fn(|t| 1.0 / (1.0 + t * t)),
        ];
        let grid =
            build_grid(Horizon::Infinite, 64, GridScheme::MappedExponential, 1e-3, &fns).unwrap();
        let t_max = grid.terminal();
        assert!(analytic(t_max) < 1e-3);
        assert!((t_max - hi).abs() < 1e-6 * hi, "{t_max} vs {hi}");
        assert_eq!(*grid.points().last().unwrap(), t_max);
        assert_eq!(grid.points()[0], 0.0);
    }

    #[test]
    fn mapped_points_are_images_of_uniform_s() {
        let g = build_grid(Horizon::Finite(3.0), 10, GridScheme::MappedExponential, 0.0, &[])
            .unwrap();
        let s_max = 1.0 - (-3.0f64).exp();
        for (i, &t) in g.points().iter().enumerate() {
            let s = s_max * i as f64 / 10.0;
            assert!((t + (1.0 - s).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn quadrature_of_constant_is_exact() {
        let g = TimeGrid::uniform(1.0, 37).unwrap();
        let v = time_quadrature(|_| 1.0, &g).unwrap();
        assert!((v - 1.0).abs() < 1e-14);
    }

    #[test]
    fn quadrature_tolerates_singularities() {
        let g = TimeGrid::uniform(1.0, 1 << 14).unwrap();
        let v = time_quadrature(|t| t.powf(-0.5), &g).unwrap();
        assert!((v - 2.0).abs() < 1e-2, "{v}");
        let v = time_quadrature(|t| t.ln().abs(), &g).unwrap();
        assert!((v - 1.0).abs() < 1e-2, "{v}");
    }

    #[test]
    fn quadrature_reports_offending_time() {
        let g = TimeGrid::uniform(1.0, 4).unwrap();
        let err = time_quadrature(|t| if t > 0.5 { f64::NAN } else { 1.0 }, &g).unwrap_err();
        match err {
            BsdeError::NonFinite { t, .. } => assert!((t - 0.625).abs() < 1e-12),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn mapped_infinite_grid_integrates_exponential() {
        let fns = vec![time_fn(|t| (-2.0 * t).exp())];
        let g = build_grid(Horizon::Infinite, 1 << 12, GridScheme::MappedExponential, 1e-9, &fns)
            .unwrap();
        let v = time_quadrature(|t| (-2.0 * t).exp(), &g).unwrap();
        assert!((v - 0.5).abs() < 1e-3, "{v}");
    }

    #[test]
    fn algebraic_map_resolves_polynomial_tails() {
        let fns = vec![time_fn(|t| 1.0 / (1.0 + t * t))];
        let g = build_grid(Horizon::Infinite, 1 << 10, GridScheme::MappedAlgebraic, 1e-3, &fns)
            .unwrap();
        assert!((g.terminal() - 1000.0).abs() < 1.0, "{}", g.terminal());
        let v = time_quadrature(|t| 1.0 / (1.0 + t * t), &g).unwrap();
        assert!((v - 1000f64.atan()).abs() < 1e-5, "{v}");
        for (i, &t) in g.points().iter().enumerate().take(g.steps()) {
            let s = g.terminal() / (1.0 + g.terminal()) * i as f64 / 1024.0;
            assert!((t - s / (1.0 - s)).abs() < 1e-9 * (1.0 + t));
        }
    }

    #[test]
    fn coarsen_keeps_every_other_point() {
        let g = TimeGrid::uniform(1.0, 8).unwrap();
        let c = g.coarsen(2).unwrap();
        assert_eq!(c.points(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(g.coarsen(3).is_err());
    }
}

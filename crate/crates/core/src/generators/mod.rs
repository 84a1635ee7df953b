//! Generators `g(t, y, z)` with their time coefficients and assumption
//! metadata, terminal conditions, sampling-based assumption checkers and
//! the named fixtures.

pub(crate) mod checks;
mod fixtures;
mod psi;

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{BsdeError, Result};
use crate::grid::{time_fn, time_quadrature, TimeFn, TimeGrid};
use crate::paths::{BrownianEnsemble, PathContext, PathView};

pub use checks::{
    check_continuity_y, check_general_growth, check_growth_bound, check_integrable_driver,
    check_lipschitz_z, check_monotonicity, check_monotonicity_with, check_sublinear_z,
    report_assumptions, AssumptionEntry, AssumptionReport, AssumptionStatus, SamplerConfig,
    Witness,
};
pub use fixtures::{fixture, fixture_names, Fixture, LinearOracle};
pub use psi::{psi_r, psi_table, PsiFn, PsiSearch};

/// `out = g(t, y, z)` for a path context; `y ∈ R^k`, `z ∈ R^{k×d}` row-major.
pub type DriverFn = Arc<dyn Fn(f64, &[f64], &[f64], &PathContext<'_>, &mut [f64]) + Send + Sync>;

/// Nonnegative adapted scalar process evaluated at `(t, path)`.
pub type ProcessFn = Arc<dyn Fn(f64, &PathContext<'_>) -> f64 + Send + Sync>;

/// Growth function `φ` of the polynomial-type growth bound.
pub type GrowthFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Assumption {
    H1,
    H1Prime,
    H2,
    H3,
    H3Prime,
    H4,
    H4Prime,
    H5,
    H6,
}

impl Assumption {
    pub const ALL: [Assumption; 9] = [
        Assumption::H1,
        Assumption::H1Prime,
        Assumption::H2,
        Assumption::H3,
        Assumption::H3Prime,
        Assumption::H4,
        Assumption::H4Prime,
        Assumption::H5,
        Assumption::H6,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Assumption::H1 => "H1",
            Assumption::H1Prime => "H1'",
            Assumption::H2 => "H2",
            Assumption::H3 => "H3",
            Assumption::H3Prime => "H3'",
            Assumption::H4 => "H4",
            Assumption::H4Prime => "H4'",
            Assumption::H5 => "H5",
            Assumption::H6 => "H6",
        }
    }
}

impl fmt::Display for Assumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Sublinear growth in `z`: `|g(t,y,z) - g(t,y,0)| <= γ(t)(g_t + |y| + |z|)^α`.
#[derive(Clone)]
pub struct Sublinear {
    pub gamma: TimeFn,
    pub alpha: f64,
}

/// Time coefficients of a generator: `u` (monotonicity in `y`), `v`
/// (Lipschitz in `z`) and optionally `γ, α` (sublinear growth in `z`).
#[derive(Clone)]
pub struct CoefficientSet {
    pub u: TimeFn,
    pub v: TimeFn,
    pub sublinear: Option<Sublinear>,
}

impl fmt::Debug for CoefficientSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientSet")
            .field("sublinear_alpha", &self.sublinear.as_ref().map(|s| s.alpha))
            .finish()
    }
}

impl CoefficientSet {
    pub fn new(u: TimeFn, v: TimeFn) -> Self {
        CoefficientSet {
            u,
            v,
            sublinear: None,
        }
    }

    pub fn zero() -> Self {
        Self::new(time_fn(|_| 0.0), time_fn(|_| 0.0))
    }

    pub fn with_sublinear(mut self, gamma: TimeFn, alpha: f64) -> Self {
        self.sublinear = Some(Sublinear { gamma, alpha });
        self
    }

    /// `γ + γ^{1/(1-α)} + γ^{2/(2-α)}`, when present.
    pub fn gamma_bundle(&self) -> Option<TimeFn> {
        self.sublinear.as_ref().map(|s| {
            let gamma = s.gamma.clone();
            let a = s.alpha;
            time_fn(move |t| {
                let g = gamma(t);
                g + g.powf(1.0 / (1.0 - a)) + g.powf(2.0 / (2.0 - a))
            })
        })
    }

    /// Functions whose tails must be controlled on an infinite horizon.
    pub fn tail_functions(&self) -> Vec<TimeFn> {
        let u = self.u.clone();
        let v = self.v.clone();
        let mut out = vec![u, time_fn(move |t| v(t) * v(t))];
        if let Some(bundle) = self.gamma_bundle() {
            out.push(bundle);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegrabilityReport {
    pub int_u: f64,
    pub int_v2: f64,
    pub int_gamma: Option<f64>,
    pub pass: bool,
    pub diagnostic: Option<String>,
}

/// Numeric `∫u`, `∫v²` and the `γ` triple on the grid.
///
/// An integral fails when its value exceeds `cap`, or when quadrupling the
/// resolution moves it by more than 10% (the signature of a divergent
/// singularity).
pub fn check_integrability(
    coeffs: &CoefficientSet,
    grid: &TimeGrid,
    cap: f64,
) -> Result<IntegrabilityReport> {
    let fine = refine(grid)?;
    let probe = |name: &str, f: &dyn Fn(f64) -> f64| -> Result<(f64, Option<String>)> {
        let coarse = time_quadrature(f, grid)?;
        let refined = time_quadrature(f, &fine)?;
        if refined > cap {
            return Ok((
                refined,
                Some(format!("{name}: integral {refined:.6e} exceeds cap {cap:.3e}")),
            ));
        }
        if (refined - coarse).abs() > 0.1 * refined.abs().max(1e-12) {
            return Ok((
                refined,
                Some(format!(
                    "{name}: integral grows under refinement ({coarse:.6e} -> {refined:.6e})"
                )),
            ));
        }
        Ok((coarse, None))
    };
    let u = coeffs.u.clone();
    let v = coeffs.v.clone();
    let (int_u, du) = probe("u", &|t| u(t))?;
    let (int_v2, dv) = probe("v^2", &|t| v(t) * v(t))?;
    let (int_gamma, dg) = match coeffs.gamma_bundle() {
        Some(b) => {
            let (val, d) = probe("gamma", &|t| b(t))?;
            (Some(val), d)
        }
        None => (None, None),
    };
    let diagnostic = [du, dv, dg].into_iter().flatten().collect::<Vec<_>>();
    let pass = diagnostic.is_empty();
    Ok(IntegrabilityReport {
        int_u,
        int_v2,
        int_gamma,
        pass,
        diagnostic: if pass {
            None
        } else {
            Some(diagnostic.join("; "))
        },
    })
}

fn refine(grid: &TimeGrid) -> Result<TimeGrid> {
    crate::grid::build_grid(
        match grid.horizon() {
            crate::grid::Horizon::Finite(t) => crate::grid::Horizon::Finite(t),
            crate::grid::Horizon::Infinite => crate::grid::Horizon::Finite(grid.terminal()),
        },
        grid.steps() * 4,
        grid.scheme(),
        0.0,
        &[],
    )
}

/// An evaluatable generator together with its declared coefficients and
/// the assumptions it claims to satisfy.
#[derive(Clone)]
pub struct Generator {
    name: String,
    k: usize,
    d: usize,
    driver: DriverFn,
    pub coefficients: CoefficientSet,
    claims: BTreeSet<Assumption>,
    growth: Option<GrowthFn>,
    sublinear_process: Option<ProcessFn>,
}

impl fmt::Debug for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Generator")
            .field("name", &self.name)
            .field("k", &self.k)
            .field("d", &self.d)
            .field("claims", &self.claims)
            .finish()
    }
}

impl Generator {
    pub fn new<F>(name: impl Into<String>, k: usize, d: usize, driver: F) -> Self
    where
        F: Fn(f64, &[f64], &[f64], &PathContext<'_>, &mut [f64]) + Send + Sync + 'static,
    {
        Generator {
            name: name.into(),
            k,
            d,
            driver: Arc::new(driver),
            coefficients: CoefficientSet::zero(),
            claims: BTreeSet::new(),
            growth: None,
            sublinear_process: None,
        }
    }

    /// A generator that keeps this one's metadata but evaluates `driver`.
    pub fn derived<F>(&self, name: impl Into<String>, driver: F) -> Self
    where
        F: Fn(f64, &[f64], &[f64], &PathContext<'_>, &mut [f64]) + Send + Sync + 'static,
    {
        Generator {
            name: name.into(),
            driver: Arc::new(driver),
            ..self.clone()
        }
    }

    pub fn with_coefficients(mut self, coefficients: CoefficientSet) -> Self {
        self.coefficients = coefficients;
        self
    }

    pub fn with_claims(mut self, claims: &[Assumption]) -> Self {
        self.claims = claims.iter().copied().collect();
        self
    }

    pub fn with_growth(mut self, phi: GrowthFn) -> Self {
        self.growth = Some(phi);
        self
    }

    pub fn with_sublinear_process(mut self, process: ProcessFn) -> Self {
        self.sublinear_process = Some(process);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.k, self.d)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn claims(&self) -> &BTreeSet<Assumption> {
        &self.claims
    }

    pub fn claims_assumption(&self, a: Assumption) -> bool {
        self.claims.contains(&a)
    }

    pub fn growth(&self) -> Option<&GrowthFn> {
        self.growth.as_ref()
    }

    pub fn driver(&self) -> &DriverFn {
        &self.driver
    }

    /// `g_t` of the sublinear growth bound; the constant 1 unless declared.
    pub fn sublinear_process(&self, t: f64, ctx: &PathContext<'_>) -> f64 {
        match &self.sublinear_process {
            Some(p) => p(t, ctx),
            None => 1.0,
        }
    }

    pub fn sublinear_process_fn(&self) -> Option<&ProcessFn> {
        self.sublinear_process.as_ref()
    }

    pub fn u(&self, t: f64) -> f64 {
        (self.coefficients.u)(t)
    }

    pub fn v(&self, t: f64) -> f64 {
        (self.coefficients.v)(t)
    }

    #[inline]
    pub fn eval_into(&self, t: f64, y: &[f64], z: &[f64], ctx: &PathContext<'_>, out: &mut [f64]) {
        (self.driver)(t, y, z, ctx, out)
    }

    pub fn eval(&self, t: f64, y: &[f64], z: &[f64], ctx: &PathContext<'_>) -> Vec<f64> {
        let mut out = vec![0.0; self.k];
        self.eval_into(t, y, z, ctx, &mut out);
        out
    }

    /// Like [`Generator::eval`] but rejects non-finite output.
    pub fn try_eval(&self, t: f64, y: &[f64], z: &[f64], ctx: &PathContext<'_>) -> Result<Vec<f64>> {
        let out = self.eval(t, y, z, ctx);
        if let Some(&bad) = out.iter().find(|x| !x.is_finite()) {
            return Err(BsdeError::NonFinite { t, value: bad });
        }
        Ok(out)
    }
}

type MarkovFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
type PathFn = Arc<dyn Fn(&PathView<'_>, &mut [f64]) + Send + Sync>;

#[derive(Clone)]
enum TerminalKind {
    /// Function of `B_T` only.
    Markov(MarkovFn),
    /// Function of the whole path.
    Path(PathFn),
}

/// Terminal value `ξ` as a function of the Brownian path.
#[derive(Clone)]
pub struct TerminalCondition {
    name: String,
    k: usize,
    kind: TerminalKind,
    /// Declared integrability exponent.
    pub p: f64,
}

impl fmt::Debug for TerminalCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TerminalCondition")
            .field("name", &self.name)
            .field("k", &self.k)
            .field("p", &self.p)
            .finish()
    }
}

impl TerminalCondition {
    pub fn markov<F>(name: impl Into<String>, k: usize, p: f64, f: F) -> Self
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        TerminalCondition {
            name: name.into(),
            k,
            kind: TerminalKind::Markov(Arc::new(f)),
            p,
        }
    }

    pub fn path_dependent<F>(name: impl Into<String>, k: usize, p: f64, f: F) -> Self
    where
        F: Fn(&PathView<'_>, &mut [f64]) + Send + Sync + 'static,
    {
        TerminalCondition {
            name: name.into(),
            k,
            kind: TerminalKind::Path(Arc::new(f)),
            p,
        }
    }

    pub fn zero(k: usize) -> Self {
        Self::constant(k, 0.0)
    }

    pub fn constant(k: usize, c: f64) -> Self {
        Self::markov(format!("constant({c})"), k, f64::INFINITY, move |_, out| {
            out.fill(c)
        })
    }

    /// `ξ_j = B_T^{(j mod d)}`.
    pub fn brownian(k: usize) -> Self {
        Self::markov("brownian", k, f64::INFINITY, move |b, out| {
            for (j, o) in out.iter_mut().enumerate() {
                *o = b[j % b.len()];
            }
        })
    }

    /// Bounded terminal value: `(tanh B_T, (2/π) atan B_T, tanh B_T, ...)`.
    pub fn bounded(k: usize) -> Self {
        Self::markov("bounded", k, f64::INFINITY, move |b, out| {
            for (j, o) in out.iter_mut().enumerate() {
                let x = b[j % b.len()];
                *o = if j % 2 == 0 {
                    x.tanh()
                } else {
                    std::f64::consts::FRAC_2_PI * x.atan()
                };
            }
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn is_markov(&self) -> bool {
        matches!(self.kind, TerminalKind::Markov(_))
    }

    pub fn eval_into(&self, path: &PathView<'_>, out: &mut [f64]) {
        match &self.kind {
            TerminalKind::Markov(f) => f(path.terminal(), out),
            TerminalKind::Path(f) => f(path, out),
        }
    }

    pub fn eval(&self, path: &PathView<'_>) -> Vec<f64> {
        let mut out = vec![0.0; self.k];
        self.eval_into(path, &mut out);
        out
    }

    /// Evaluate from `B_T` alone; `None` for path-dependent conditions.
    pub fn eval_markov(&self, b_terminal: &[f64]) -> Option<Vec<f64>> {
        match &self.kind {
            TerminalKind::Markov(f) => {
                let mut out = vec![0.0; self.k];
                f(b_terminal, &mut out);
                Some(out)
            }
            TerminalKind::Path(_) => None,
        }
    }

    /// Post-compose with a pointwise map of the value.
    pub fn map<F>(&self, name: impl Into<String>, f: F) -> Self
    where
        F: Fn(&mut [f64]) + Send + Sync + 'static,
    {
        let f = Arc::new(f);
        let kind = match &self.kind {
            TerminalKind::Markov(inner) => {
                let inner = inner.clone();
                let f = f.clone();
                TerminalKind::Markov(Arc::new(move |b: &[f64], out: &mut [f64]| {
                    inner(b, out);
                    f(out);
                }))
            }
            TerminalKind::Path(inner) => {
                let inner = inner.clone();
                TerminalKind::Path(Arc::new(move |p: &PathView<'_>, out: &mut [f64]| {
                    inner(p, out);
                    f(out);
                }))
            }
        };
        TerminalCondition {
            name: name.into(),
            k: self.k,
            kind,
            p: self.p,
        }
    }

    /// Values on every path, `M × k` row-major.
    pub fn evaluate_all(&self, ensemble: &BrownianEnsemble) -> Vec<f64> {
        let mut out = vec![0.0; ensemble.n_paths() * self.k];
        for m in 0..ensemble.n_paths() {
            self.eval_into(&ensemble.path(m), &mut out[m * self.k..(m + 1) * self.k]);
        }
        out
    }

    /// Monte Carlo estimate of `‖ξ‖_{L^p}`.
    pub fn lp_norm(&self, ensemble: &BrownianEnsemble, p: f64) -> f64 {
        let vals = self.evaluate_all(ensemble);
        let mean = vals
            .chunks(self.k)
            .map(|x| x.iter().map(|v| v * v).sum::<f64>().sqrt().powf(p))
            .sum::<f64>()
            / ensemble.n_paths() as f64;
        mean.powf(1.0 / p)
    }
}

/// Euclidean norm.
pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, GridScheme, Horizon};

    #[test]
    fn example1_coefficients_integrate() {
        let grid = TimeGrid::uniform(1.0, 1 << 14).unwrap();
        let coeffs = CoefficientSet::new(time_fn(|t: f64| t.ln().abs()), time_fn(|t: f64| t.powf(-0.25)));
        let r = check_integrability(&coeffs, &grid, 1e6).unwrap();
        assert!(r.pass, "{:?}", r.diagnostic);
        assert!((r.int_u - 1.0).abs() < 1e-2);
        assert!((r.int_v2 - 2.0).abs() < 1e-2);
    }

    #[test]
    fn zero_coefficients_integrate_to_zero() {
        let grid = TimeGrid::uniform(1.0, 64).unwrap();
        let r = check_integrability(&CoefficientSet::zero(), &grid, 1e6).unwrap();
        assert!(r.pass);
        assert_eq!(r.int_u, 0.0);
        assert_eq!(r.int_v2, 0.0);
        assert_eq!(r.int_gamma, None);
    }

    #[test]
    fn divergent_coefficient_is_flagged() {
        let grid = TimeGrid::uniform(1.0, 256).unwrap();
        let coeffs = CoefficientSet::new(time_fn(|t| 1.0 / t), time_fn(|_| 0.0));
        let r = check_integrability(&coeffs, &grid, 1e6).unwrap();
        assert!(!r.pass);
        assert!(r.diagnostic.unwrap().contains("u"));
    }

    #[test]
    fn example4_coefficients_on_infinite_horizon() {
        let coeffs = CoefficientSet::new(
            time_fn(|t| 1.0 / (1.0 + t * t)),
            time_fn(|t: f64| (-t).exp()),
        )
        .with_sublinear(time_fn(|t: f64| (-t).exp()), 0.5);
        let grid = build_grid(
            Horizon::Infinite,
            1 << 12,
            GridScheme::MappedAlgebraic,
            1e-3,
            &coeffs.tail_functions(),
        )
        .unwrap();
        let r = check_integrability(&coeffs, &grid, 1e6).unwrap();
        assert!(r.pass, "{:?}", r.diagnostic);
        assert!((r.int_u - grid.terminal().atan()).abs() < 1e-4, "{}", r.int_u);
        assert!((r.int_v2 - 0.5).abs() < 1e-4, "{}", r.int_v2);
        // γ + γ² + γ^{4/3} with γ = e^{-t}: 1 + 1/2 + 3/4
        assert!((r.int_gamma.unwrap() - 2.25).abs() < 1e-4);
    }
}

//! Monte Carlo checks of the a-priori inequalities on computed solutions.
//!
//! Conditional expectations `E[· | F_r]` are averages over five equal-count
//! bins of `B_r` (of `|B_r|` when `d > 1`); at `r = 0` the plain mean is
//! used. A ratio is the largest bin ratio `LHS / RHS`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{BsdeError, Result};
use crate::generators::checks::sample_margins;
use crate::generators::{dot, norm, Generator, LinearOracle, ProcessFn, SamplerConfig, Witness};
use crate::grid::{cumulative_quadrature, time_fn, TimeFn, TimeGrid};
use crate::paths::{AdaptedField, BrownianEnsemble, PathContext};
use crate::solver::Solution;

/// Number of conditioning bins for `r > 0`.
pub const CONDITIONING_BINS: usize = 5;

/// `⟨y, g(t,y,z)⟩ <= μ(t)|y|² + λ(t)|y||z| + f_t|y|`.
#[derive(Clone)]
pub struct AssumptionA {
    pub mu: TimeFn,
    pub lambda: TimeFn,
    pub f: ProcessFn,
}

impl std::fmt::Debug for AssumptionA {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AssumptionA").finish_non_exhaustive()
    }
}

impl AssumptionA {
    pub fn new(mu: TimeFn, lambda: TimeFn, f: ProcessFn) -> Self {
        AssumptionA { mu, lambda, f }
    }

    pub fn zero() -> Self {
        AssumptionA::new(time_fn(|_| 0.0), time_fn(|_| 0.0), Arc::new(|_, _| 0.0))
    }

    /// `μ = a⁺`, `λ = |b|`, `f = |c|` for `g = ay + bz + c`.
    pub fn for_linear(o: &LinearOracle) -> Self {
        let (a, b, c) = (o.a, o.b, o.c);
        AssumptionA::new(
            time_fn(move |_| a.max(0.0)),
            time_fn(move |_| b.abs()),
            Arc::new(move |_, _| c.abs()),
        )
    }

    /// Constants for the named fixtures that have them.
    pub fn for_fixture(name: &str) -> Result<Self> {
        match name {
            // y(-e^y + |y|) <= |y| and the remaining terms are bounded directly
            "example1" => Ok(AssumptionA::new(
                time_fn(|_| 0.0),
                time_fn(|t: f64| t.powf(-0.25)),
                Arc::new(|t, ctx| t.ln().abs() + ctx.b_norm()),
            )),
            // the y-part contributes -y₁⁴ - y₂⁶
            "example2" => Ok(AssumptionA::new(
                time_fn(|_| 0.0),
                time_fn(|t: f64| 1.0 / (1.0 + t * t).sqrt()),
                Arc::new(|t, _| std::f64::consts::SQRT_2 * t * t / (t.powi(4) + 1.0)),
            )),
            "zero_driver" => Ok(AssumptionA::zero()),
            "linear_oracle" => Ok(AssumptionA::for_linear(&LinearOracle::new(0.0, 0.5, 0.0, 1.0))),
            other => Err(BsdeError::InvalidArgument(format!(
                "no assumption (A) constants registered for `{other}`"
            ))),
        }
    }

    /// `2(μ + λ²)`.
    pub fn beta_z_estimate(&self) -> TimeFn {
        let (mu, la) = (self.mu.clone(), self.lambda.clone());
        time_fn(move |t| 2.0 * (mu(t) + la(t) * la(t)))
    }

    /// `2(μ + λ²/(1 ∧ (p-1)))`.
    pub fn beta_y_estimate(&self, p: f64) -> TimeFn {
        let (mu, la) = (self.mu.clone(), self.lambda.clone());
        let q = (p - 1.0).min(1.0);
        time_fn(move |t| 2.0 * (mu(t) + la(t) * la(t) / q))
    }

    /// `f` at the quadrature node of every interval (last slot zero).
    pub fn f_field(&self, grid: &TimeGrid, ens: &BrownianEnsemble) -> AdaptedField {
        let n = grid.steps();
        let mut out = AdaptedField::zeros(ens.n_paths(), n + 1, 1, 1);
        for m in 0..ens.n_paths() {
            for i in 0..n {
                let ctx = PathContext::new(m, i, ens.position(m, i));
                out.at_mut(m, i)[0] = (self.f)(grid.node(i), &ctx);
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionACheck {
    pub pass: bool,
    pub samples: usize,
    pub violations: usize,
    pub witness: Option<Witness>,
    pub worst_margin: f64,
}

/// Sampled check of assumption (A) for `g`.
pub fn check_assumption_a(g: &Generator, a: &AssumptionA, cfg: &SamplerConfig) -> AssumptionACheck {
    let (k, d) = g.dims();
    let out = sample_margins(k, d, cfg, |s, ctx| {
        let gv = g.eval(s.t, &s.y1, &s.z1, ctx);
        let ny = norm(&s.y1);
        let lhs = dot(&s.y1, &gv);
        let rhs = (a.mu)(s.t) * ny * ny + (a.lambda)(s.t) * ny * norm(&s.z1) + (a.f)(s.t, ctx) * ny;
        let slack = cfg.slack_abs + cfg.slack_rel * (lhs.abs() + rhs.abs());
        lhs - rhs - slack
    });
    AssumptionACheck {
        pass: out.violations == 0,
        samples: out.samples,
        violations: out.violations,
        witness: out.witness,
        worst_margin: out.worst_margin,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateCheck {
    ZEstimate,
    YEstimate,
    CombinedEstimate,
}

impl EstimateCheck {
    pub fn label(&self) -> &'static str {
        match self {
            EstimateCheck::ZEstimate => "z-estimate",
            EstimateCheck::YEstimate => "y-estimate",
            EstimateCheck::CombinedEstimate => "combined-estimate",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub check: String,
    pub member: String,
    pub p: f64,
    pub r: f64,
    pub t: f64,
    /// Conditional means in the bin attaining the largest ratio.
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub fitted_constant: Option<f64>,
    pub pass: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub check: EstimateCheck,
    pub member: String,
    pub p: f64,
    pub rows: Vec<EstimateRow>,
    pub max_ratio: f64,
    pub fitted_constant: Option<f64>,
    /// Every ratio finite and, once a constant is fitted, below it.
    pub pass: bool,
}

/// The `(r, t)` index pairs with `r <= t` from `{0, N/3, 2N/3}`.
pub fn conditioning_pairs(n: usize) -> Vec<(usize, usize)> {
    let idx = [0, n / 3, 2 * n / 3];
    let mut out = vec![];
    for &r in &idx {
        for &t in &idx {
            if r <= t {
                out.push((r, t));
            }
        }
    }
    out
}

/// Bins of path indices, equal count, ordered by the conditioning key.
fn conditioning_bins(ens: &BrownianEnsemble, r: usize) -> Vec<Vec<usize>> {
    let m = ens.n_paths();
    if r == 0 {
        return vec![(0..m).collect()];
    }
    let key = |p: usize| {
        let b = ens.position(p, r);
        if b.len() == 1 {
            b[0]
        } else {
            norm(b)
        }
    };
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| key(a).total_cmp(&key(b)).then(a.cmp(&b)));
    let nb = CONDITIONING_BINS.min(m.max(1));
    (0..nb)
        .map(|j| order[j * m / nb..(j + 1) * m / nb].to_vec())
        .collect()
}

fn ratio_of(lhs: f64, rhs: f64) -> f64 {
    if lhs == 0.0 {
        0.0
    } else if rhs > 0.0 {
        lhs / rhs
    } else {
        f64::INFINITY
    }
}

/// Largest bin ratio together with the bin's conditional means.
fn conditional_ratio(lhs: &[f64], rhs: &[f64], bins: &[Vec<usize>]) -> (f64, f64, f64) {
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for bin in bins {
        let n = bin.len().max(1) as f64;
        let l = bin.iter().map(|&p| lhs[p]).sum::<f64>() / n;
        let r = bin.iter().map(|&p| rhs[p]).sum::<f64>() / n;
        let q = ratio_of(l, r);
        if q > best.0 {
            best = (q, l, r);
        }
    }
    best
}

fn check_beta(beta: &TimeFn, required: &TimeFn, grid: &TimeGrid) -> Result<()> {
    for i in 0..grid.steps() {
        for t in [grid.node(i), grid.t(i + 1)] {
            let (b, q) = (beta(t), required(t));
            if !(b >= q * (1.0 - 1e-12) - 1e-12) {
                return Err(BsdeError::BetaCondition { t, beta: b, required: q });
            }
        }
    }
    Ok(())
}

/// Per-path ingredients of the three displays, for one `t` index.
struct Terms {
    /// `(Σ_{s>=t} e^{B(s)} |z_s|² Δ_s)^{p/2}`
    z_term: Vec<f64>,
    /// `sup_{s>=t} e^{(p/2) B(s)} |y_s|ᵖ`
    sup_term: Vec<f64>,
    /// `(Σ_{s>=t} e^{B(s)/2} f_s w_s)ᵖ`
    f_term: Vec<f64>,
    /// `e^{(p/2) B(T)} |ξ|ᵖ`
    xi_term: Vec<f64>,
    /// `Σ_{s>=t} e^{(p/2) B(s)} |y_s|ᵖ ∫_{t_i}^{t_{i+1}} β`
    beta_term: Vec<f64>,
}

fn terms(sol: &Solution, grid: &TimeGrid, f: &AdaptedField, beta: &TimeFn, p: f64, t: usize) -> Result<Terms> {
    let n = grid.steps();
    let cum = cumulative_quadrature(|s| beta(s), grid)?;
    let mp = sol.y.n_paths();
    let mut out = Terms {
        z_term: vec![0.0; mp],
        sup_term: vec![0.0; mp],
        f_term: vec![0.0; mp],
        xi_term: vec![0.0; mp],
        beta_term: vec![0.0; mp],
    };
    for m in 0..mp {
        let (mut zq, mut sup, mut fi, mut bt) = (0.0, 0.0f64, 0.0, 0.0);
        for i in t..=n {
            let yp = sol.y.norm_at(m, i).powf(p);
            sup = sup.max((0.5 * p * cum[i]).exp() * yp);
            if i < n {
                let dt = grid.dt(i);
                let nz = sol.z.norm_at(m, i);
                zq += cum[i].exp() * nz * nz * dt;
                // f is sampled at the interval's node; weight the exponential there too
                let mid = 0.5 * (cum[i] + cum[i + 1]);
                fi += (0.5 * mid).exp() * f.at(m, i)[0] * grid.weight(i);
                bt += (0.5 * p * cum[i]).exp() * (cum[i + 1] - cum[i]) * yp;
            }
        }
        out.z_term[m] = zq.powf(0.5 * p);
        out.sup_term[m] = sup;
        out.f_term[m] = fi.powf(p);
        out.xi_term[m] = (0.5 * p * cum[n]).exp() * sol.y.norm_at(m, n).powf(p);
        out.beta_term[m] = bt;
    }
    Ok(out)
}

fn estimate_report(
    check: EstimateCheck,
    member: &str,
    sol: &Solution,
    grid: &TimeGrid,
    ens: &BrownianEnsemble,
    a: &AssumptionA,
    beta: &TimeFn,
    pairs: &[(usize, usize)],
    p: f64,
) -> Result<EstimateReport> {
    let required = match check {
        EstimateCheck::ZEstimate => a.beta_z_estimate(),
        _ => {
            if !(p > 1.0) {
                return Err(BsdeError::InvalidArgument(format!("p must exceed 1, got {p}")));
            }
            a.beta_y_estimate(p)
        }
    };
    if !(p > 0.0) {
        return Err(BsdeError::InvalidArgument(format!("p must be positive, got {p}")));
    }
    check_beta(beta, &required, grid)?;
    if sol.y.n_paths() != ens.n_paths() || sol.y.n_times() != grid.steps() + 1 {
        return Err(BsdeError::InvalidArgument("solution, grid and ensemble disagree".into()));
    }
    let f = a.f_field(grid, ens);
    let mut rows = Vec::with_capacity(pairs.len());
    for &(r, t) in pairs {
        if r > t || t > grid.steps() {
            return Err(BsdeError::InvalidArgument(format!("need r <= t <= N, got r = {r}, t = {t}")));
        }
        let tm = terms(sol, grid, &f, beta, p, t)?;
        let (lhs, rhs): (Vec<f64>, Vec<f64>) = match check {
            EstimateCheck::ZEstimate => (
                tm.z_term.clone(),
                tm.sup_term.iter().zip(&tm.f_term).map(|(a, b)| a + b).collect(),
            ),
            EstimateCheck::YEstimate => (
                tm.sup_term.clone(),
                tm.xi_term.iter().zip(&tm.f_term).map(|(a, b)| a + b).collect(),
            ),
            EstimateCheck::CombinedEstimate => (
                (0..tm.z_term.len())
                    .map(|m| tm.beta_term[m] + tm.sup_term[m] + tm.z_term[m])
                    .collect(),
                tm.xi_term.iter().zip(&tm.f_term).map(|(a, b)| a + b).collect(),
            ),
        };
        let bins = conditioning_bins(ens, r);
        let (ratio, l, rh) = conditional_ratio(&lhs, &rhs, &bins);
        rows.push(EstimateRow {
            check: check.label().into(),
            member: member.into(),
            p,
            r: grid.t(r),
            t: grid.t(t),
            lhs: l,
            rhs: rh,
            ratio,
            fitted_constant: None,
            pass: None,
        });
    }
    let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(EstimateReport {
        check,
        member: member.into(),
        p,
        pass: max_ratio.is_finite(),
        rows,
        max_ratio,
        fitted_constant: None,
    })
}

/// `E[(∫_t^T e^{∫β}|z|²)^{p/2} | F_r]` against
/// `E[sup_{s>=t} e^{(p/2)∫β}|y_s|ᵖ + (∫_t^T e^{½∫β} f)ᵖ | F_r]`.
#[allow(clippy::too_many_arguments)]
pub fn check_z_estimate(
    member: &str,
    sol: &Solution,
    grid: &TimeGrid,
    ens: &BrownianEnsemble,
    a: &AssumptionA,
    beta: &TimeFn,
    pairs: &[(usize, usize)],
    p: f64,
) -> Result<EstimateReport> {
    estimate_report(EstimateCheck::ZEstimate, member, sol, grid, ens, a, beta, pairs, p)
}

/// `E[sup_{s>=t} e^{(p/2)∫β}|y_s|ᵖ | F_r]` against
/// `E[e^{(p/2)∫_0^T β}|ξ|ᵖ + (∫_t^T e^{½∫β} f)ᵖ | F_r]`.
#[allow(clippy::too_many_arguments)]
pub fn check_y_estimate(
    member: &str,
    sol: &Solution,
    grid: &TimeGrid,
    ens: &BrownianEnsemble,
    a: &AssumptionA,
    beta: &TimeFn,
    pairs: &[(usize, usize)],
    p: f64,
) -> Result<EstimateReport> {
    estimate_report(EstimateCheck::YEstimate, member, sol, grid, ens, a, beta, pairs, p)
}

/// Sum of the `β`-weighted `∫|y|ᵖ`, sup and `z` terms against the
/// right-hand side of [`check_y_estimate`].
#[allow(clippy::too_many_arguments)]
pub fn check_combined_estimate(
    member: &str,
    sol: &Solution,
    grid: &TimeGrid,
    ens: &BrownianEnsemble,
    a: &AssumptionA,
    beta: &TimeFn,
    pairs: &[(usize, usize)],
    p: f64,
) -> Result<EstimateReport> {
    estimate_report(EstimateCheck::CombinedEstimate, member, sol, grid, ens, a, beta, pairs, p)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyFit {
    pub check: EstimateCheck,
    pub p: f64,
    pub fitted_constant: f64,
    pub mean: f64,
    /// Every member's largest ratio within `±spread` of the mean.
    pub stable: bool,
    pub spread: f64,
    pub pass: bool,
}

/// Fit the constant of one `(check, p)` as the largest ratio over the
/// members, and mark every row against it with relative tolerance `tol`.
pub fn fit_family(reports: &mut [EstimateReport], tol: f64, spread: f64) -> Result<FamilyFit> {
    let first = reports.first().ok_or(BsdeError::EmptyField)?;
    let (check, p) = (first.check, first.p);
    if reports.iter().any(|r| r.check != check || r.p != p) {
        return Err(BsdeError::InvalidArgument("a family fit needs one check and one p".into()));
    }
    let fitted = reports.iter().map(|r| r.max_ratio).fold(0.0, f64::max);
    let mean = reports.iter().map(|r| r.max_ratio).sum::<f64>() / reports.len() as f64;
    let stable = reports
        .iter()
        .all(|r| (r.max_ratio - mean).abs() <= spread * mean);
    let mut pass = fitted.is_finite();
    for rep in reports.iter_mut() {
        rep.fitted_constant = Some(fitted);
        for row in &mut rep.rows {
            let ok = row.ratio <= fitted * (1.0 + tol);
            row.fitted_constant = Some(fitted);
            row.pass = Some(ok);
            rep.pass &= ok;
        }
        pass &= rep.pass;
    }
    Ok(FamilyFit {
        check,
        p,
        fitted_constant: fitted,
        mean,
        stable,
        spread,
        pass,
    })
}

/// Mark the rows of `report` against an already fitted constant.
pub fn apply_fitted(report: &mut EstimateReport, fitted: f64, tol: f64) {
    report.fitted_constant = Some(fitted);
    for row in &mut report.rows {
        let ok = row.ratio <= fitted * (1.0 + tol);
        row.fitted_constant = Some(fitted);
        row.pass = Some(ok);
        report.pass &= ok;
    }
}

/// `c(p) = p[(p-1) ∧ 1]/2`.
pub fn ito_tanaka_constant(p: f64) -> f64 {
    p * (p - 1.0).min(1.0) / 2.0
}

/// Indicator threshold for `1_{|y| ≠ 0}`.
pub const NONZERO_EPS: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathwiseItoReport {
    pub p: f64,
    pub c_p: f64,
    pub t: f64,
    pub u: f64,
    pub paths: usize,
    pub violations: usize,
    pub fraction: f64,
    /// Allowed excess, `tol_factor · max Δ^{1/2} · (1 + |y_u|ᵖ)` per path.
    pub tol_factor: f64,
    pub max_excess: f64,
}

/// Path-wise discrete form of
/// `|y_t|ᵖ + c(p)∫|y|^{p-2}|z|² <= |y_u|ᵖ + p∫|y|^{p-2}⟨y,g⟩ - p∫|y|^{p-2}⟨y, z dB⟩`
/// on `[t_t, t_u]`.
#[allow(clippy::too_many_arguments)]
pub fn check_pathwise_ito(
    sol: &Solution,
    g: &Generator,
    grid: &TimeGrid,
    ens: &BrownianEnsemble,
    p: f64,
    t: usize,
    u: usize,
    tol_factor: f64,
) -> Result<PathwiseItoReport> {
    if !(p >= 1.0) {
        return Err(BsdeError::InvalidArgument(format!("p must be at least 1, got {p}")));
    }
    if t > u || u > grid.steps() {
        return Err(BsdeError::InvalidArgument(format!("need t <= u <= N, got {t}, {u}")));
    }
    let c = ito_tanaka_constant(p);
    let (k, d) = g.dims();
    let max_dt = (t..u).map(|i| grid.dt(i)).fold(0.0, f64::max);
    let base_tol = tol_factor * max_dt.sqrt();
    let mut violations = 0;
    let mut max_excess = f64::NEG_INFINITY;
    let mut gv = vec![0.0; k];
    for m in 0..ens.n_paths() {
        let mut lhs = sol.y.norm_at(m, t).powf(p);
        let yu = sol.y.norm_at(m, u).powf(p);
        let mut rhs = yu;
        for i in t..u {
            let y = sol.y.at(m, i);
            let ny = norm(y);
            if ny <= NONZERO_EPS {
                continue;
            }
            let w = ny.powf(p - 2.0);
            let z = sol.z.at(m, i);
            let nz = norm(z);
            lhs += c * w * nz * nz * grid.dt(i);
            let ctx = PathContext::new(m, i, ens.position(m, i));
            g.eval_into(grid.node(i), y, z, &ctx, &mut gv);
            rhs += p * w * dot(y, &gv) * grid.weight(i);
            let db = ens.increment(m, i);
            let mut ydb = 0.0;
            for r in 0..k {
                for j in 0..d {
                    ydb += y[r] * z[r * d + j] * db[j];
                }
            }
            rhs -= p * w * ydb;
        }
        let excess = lhs - rhs;
        max_excess = max_excess.max(excess);
        if excess > base_tol * (1.0 + yu) {
            violations += 1;
        }
    }
    let paths = ens.n_paths();
    Ok(PathwiseItoReport {
        p,
        c_p: c,
        t: grid.t(t),
        u: grid.t(u),
        paths,
        violations,
        fraction: violations as f64 / paths.max(1) as f64,
        tol_factor,
        max_excess,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::fixture;
    use crate::paths::sample_brownian;
    use crate::solver::SolveDiagnostics;

    #[test]
    fn ito_tanaka_constants() {
        assert_eq!(ito_tanaka_constant(2.0), 1.0);
        assert_eq!(ito_tanaka_constant(1.0), 0.0);
        assert_eq!(ito_tanaka_constant(3.0), 1.5);
    }

    #[test]
    fn assumption_a_examples() {
        let cfg = SamplerConfig::default().with_samples(2000);
        let zero = fixture("zero_driver").unwrap().generator;
        assert!(check_assumption_a(&zero, &AssumptionA::zero(), &cfg).pass);
        let g = Generator::new("2y", 1, 1, |_, y, _, _, o| o[0] = 2.0 * y[0]);
        let a = AssumptionA::new(time_fn(|_| 1.0), time_fn(|_| 0.0), Arc::new(|_, _| 0.0));
        let out = check_assumption_a(&g, &a, &cfg);
        assert!(!out.pass);
        let w = out.witness.unwrap();
        assert_eq!((w.y1[0], w.z1[0]), (1.0, 0.0));
        for name in ["example1", "example2"] {
            let g = fixture(name).unwrap().generator;
            assert!(check_assumption_a(&g, &AssumptionA::for_fixture(name).unwrap(), &cfg).pass, "{name}");
        }
    }

    fn zero_solution(m: usize, n: usize) -> (Solution, TimeGrid, BrownianEnsemble) {
        let grid = TimeGrid::uniform(1.0, n).unwrap();
        let ens = sample_brownian(&grid, m, 1, 9).unwrap();
        let sol = Solution {
            y: AdaptedField::zeros(m, n + 1, 1, 1),
            z: AdaptedField::zeros(m, n + 1, 1, 1),
            diagnostics: SolveDiagnostics::default(),
        };
        (sol, grid, ens)
    }

    #[test]
    fn zero_solution_has_zero_ratios() {
        let (sol, grid, ens) = zero_solution(200, 6);
        let a = AssumptionA::zero();
        let beta = time_fn(|_| 0.0);
        let pairs = conditioning_pairs(6);
        for rep in [
            check_z_estimate("zero", &sol, &grid, &ens, &a, &beta, &pairs, 2.0).unwrap(),
            check_y_estimate("zero", &sol, &grid, &ens, &a, &beta, &pairs, 2.0).unwrap(),
            check_combined_estimate("zero", &sol, &grid, &ens, &a, &beta, &pairs, 2.0).unwrap(),
        ] {
            assert!(rep.pass);
            assert_eq!(rep.max_ratio, 0.0);
        }
        let g = fixture("zero_driver").unwrap().generator;
        let rep = check_pathwise_ito(&sol, &g, &grid, &ens, 2.0, 0, 6, 10.0).unwrap();
        assert_eq!(rep.violations, 0);
    }

    #[test]
    fn beta_condition_is_checked_first() {
        let (sol, grid, ens) = zero_solution(10, 4);
        let a = AssumptionA::new(time_fn(|_| 1.0), time_fn(|_| 0.0), Arc::new(|_, _| 0.0));
        let err = check_z_estimate("x", &sol, &grid, &ens, &a, &time_fn(|_| 1.0), &[(0, 0)], 2.0);
        assert!(matches!(err, Err(BsdeError::BetaCondition { .. })));
    }

    #[test]
    fn pairs_cover_the_three_by_three_grid() {
        let pairs = conditioning_pairs(63);
        assert_eq!(pairs, vec![(0, 0), (0, 21), (0, 42), (21, 21), (21, 42), (42, 42)]);
    }
}

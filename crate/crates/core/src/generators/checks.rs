//! Sampling-based falsifiers for the structural assumptions on a generator.
//!
//! Each check draws tuples `(t, y₁, y₂, z₁, z₂, B_t)` with `t` log-uniform
//! (to reach the singular end point) and `y, z` from a mixture of Gaussian
//! scales; a handful of canonical probes is evaluated first so that simple
//! violations are reported with simple witnesses.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::psi::{psi_r, PsiSearch};
use super::{dot, norm, Assumption, Generator};
use crate::error::{BsdeError, Result};
use crate::grid::{build_grid, GridScheme, Horizon, TimeFn, TimeGrid};
use crate::paths::{sample_brownian, PathContext};

const SCALES: [f64; 3] = [0.1, 1.0, 10.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub samples: usize,
    pub seed: u64,
    /// Horizon the times are drawn from; infinite horizons use `[t_min, 50]`.
    pub horizon: Horizon,
    pub t_min: f64,
    pub slack_abs: f64,
    pub slack_rel: f64,
    /// Integrability exponent used by the `H1` check.
    pub p: f64,
    /// Paths and steps of the Monte Carlo used by `H1`/`H3`.
    pub mc_paths: usize,
    pub mc_steps: usize,
    /// Values above this count as divergent.
    pub cap: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            samples: 100_000,
            seed: 0x5eed,
            horizon: Horizon::Finite(1.0),
            t_min: 1e-6,
            slack_abs: 1e-9,
            slack_rel: 1e-9,
            p: 2.0,
            mc_paths: 256,
            mc_steps: 256,
            cap: 1e12,
        }
    }
}

impl SamplerConfig {
    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples = samples;
        self
    }

    pub fn with_horizon(mut self, horizon: Horizon) -> Self {
        self.horizon = horizon;
        self
    }

    fn t_max(&self) -> f64 {
        match self.horizon {
            Horizon::Finite(t) => t,
            Horizon::Infinite => 50.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AssumptionStatus {
    Pass,
    Fail,
    NotClaimed,
}

/// A sampled tuple at which a check was evaluated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub t: f64,
    pub y1: Vec<f64>,
    pub y2: Vec<f64>,
    pub z1: Vec<f64>,
    pub z2: Vec<f64>,
    pub b: Vec<f64>,
    /// `lhs - rhs - slack`; positive means violated.
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionEntry {
    pub assumption: Assumption,
    pub status: AssumptionStatus,
    pub samples: usize,
    pub violations: usize,
    /// First violating tuple in sampling order.
    pub witness: Option<Witness>,
    pub worst_margin: f64,
    pub note: Option<String>,
}

impl AssumptionEntry {
    pub fn not_claimed(assumption: Assumption) -> Self {
        AssumptionEntry {
            assumption,
            status: AssumptionStatus::NotClaimed,
            samples: 0,
            violations: 0,
            witness: None,
            worst_margin: f64::NEG_INFINITY,
            note: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.status == AssumptionStatus::Pass
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub generator: String,
    pub entries: Vec<AssumptionEntry>,
}

impl AssumptionReport {
    pub fn entry(&self, a: Assumption) -> Option<&AssumptionEntry> {
        self.entries.iter().find(|e| e.assumption == a)
    }

    pub fn status(&self, a: Assumption) -> Option<AssumptionStatus> {
        self.entry(a).map(|e| e.status)
    }

    /// No claimed assumption failed.
    pub fn all_claimed_pass(&self) -> bool {
        self.entries
            .iter()
            .all(|e| e.status != AssumptionStatus::Fail)
    }

    /// Fixed-width table, one row per assumption.
    pub fn table(&self) -> String {
        let mut s = format!("generator: {}\n", self.generator);
        s.push_str(&format!(
            "{:<6} {:<12} {:>8} {:>10}  witness\n",
            "assum", "status", "samples", "violations"
        ));
        for e in &self.entries {
            let status = match e.status {
                AssumptionStatus::Pass => "pass",
                AssumptionStatus::Fail => "fail",
                AssumptionStatus::NotClaimed => "not-claimed",
            };
            let witness = match &e.witness {
                Some(w) => format!(
                    "t={:.4e} y1={:?} y2={:?} z1={:?} z2={:?} margin={:.3e}",
                    w.t, w.y1, w.y2, w.z1, w.z2, w.margin
                ),
                None => String::new(),
            };
            s.push_str(&format!(
                "{:<6} {:<12} {:>8} {:>10}  {}\n",
                e.assumption.label(),
                status,
                e.samples,
                e.violations,
                witness
            ));
        }
        s
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Sample {
    pub t: f64,
    pub y1: Vec<f64>,
    pub y2: Vec<f64>,
    pub z1: Vec<f64>,
    pub z2: Vec<f64>,
    pub b: Vec<f64>,
}

impl Sample {
    fn witness(&self, margin: f64) -> Witness {
        Witness {
            t: self.t,
            y1: self.y1.clone(),
            y2: self.y2.clone(),
            z1: self.z1.clone(),
            z2: self.z2.clone(),
            b: self.b.clone(),
            margin,
        }
    }
}

fn canonical_probes(k: usize, d: usize, t: f64) -> Vec<Sample> {
    let zero_y = vec![0.0; k];
    let zero_z = vec![0.0; k * d];
    let mut e_y = zero_y.clone();
    e_y[0] = 1.0;
    let mut out = vec![Sample {
        t,
        y1: e_y.clone(),
        y2: zero_y.clone(),
        z1: zero_z.clone(),
        z2: zero_z.clone(),
        b: vec![0.0; d],
    }];
    for scale in [1.0, 10.0, 100.0, 1000.0] {
        let mut e_z = zero_z.clone();
        e_z[0] = scale;
        out.push(Sample {
            t,
            y1: e_y.clone(),
            y2: zero_y.clone(),
            z1: e_z,
            z2: zero_z.clone(),
            b: vec![0.0; d],
        });
    }
    out
}

fn draw_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let scale = SCALES[rng.random_range(0..SCALES.len())];
    (0..len)
        .map(|_| {
            let x: f64 = rng.sample(StandardNormal);
            scale * x
        })
        .collect()
}

fn draw_samples(k: usize, d: usize, cfg: &SamplerConfig) -> Vec<Sample> {
    let t_max = cfg.t_max();
    let t_min = cfg.t_min.min(t_max * 0.5);
    let mut out = canonical_probes(k, d, 0.5 * t_max);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (lo, hi) = (t_min.ln(), t_max.ln());
    while out.len() < cfg.samples.max(out.len()) {
        let t = (lo + (hi - lo) * rng.random::<f64>()).exp();
        let y1 = draw_vec(&mut rng, k);
        let y2 = draw_vec(&mut rng, k);
        let z1 = draw_vec(&mut rng, k * d);
        let z2 = draw_vec(&mut rng, k * d);
        let sd = t.sqrt();
        let b = (0..d)
            .map(|_| {
                let x: f64 = rng.sample(StandardNormal);
                sd * x
            })
            .collect();
        out.push(Sample {
            t,
            y1,
            y2,
            z1,
            z2,
            b,
        });
    }
    out.truncate(cfg.samples.max(1));
    out
}

/// Outcome of a sampled inequality check.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct SampledOutcome {
    pub samples: usize,
    pub violations: usize,
    pub witness: Option<Witness>,
    pub worst_margin: f64,
}

/// Evaluate `margin` on every sample; non-finite margins count as violations.
pub(crate) fn sample_margins<F>(k: usize, d: usize, cfg: &SamplerConfig, margin: F) -> SampledOutcome
where
    F: Fn(&Sample, &PathContext<'_>) -> f64 + Sync,
{
    let samples = draw_samples(k, d, cfg);
    let margins: Vec<f64> = samples
        .par_iter()
        .enumerate()
        .map(|(idx, s)| {
            let ctx = PathContext::new(idx, 0, &s.b);
            let m = margin(s, &ctx);
            if m.is_nan() {
                f64::INFINITY
            } else {
                m
            }
        })
        .collect();
    let mut witness = None;
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for (s, &m) in samples.iter().zip(&margins) {
        worst = worst.max(m);
        if m > 0.0 {
            violations += 1;
            if witness.is_none() {
                witness = Some(s.witness(m));
            }
        }
    }
    SampledOutcome {
        samples: samples.len(),
        violations,
        witness,
        worst_margin: worst,
    }
}

fn run_sampled<F>(assumption: Assumption, g: &Generator, cfg: &SamplerConfig, margin: F) -> AssumptionEntry
where
    F: Fn(&Sample, &PathContext<'_>) -> f64 + Sync,
{
    let (k, d) = g.dims();
    let out = sample_margins(k, d, cfg, margin);
    AssumptionEntry {
        assumption,
        status: if out.violations == 0 {
            AssumptionStatus::Pass
        } else {
            AssumptionStatus::Fail
        },
        samples: out.samples,
        violations: out.violations,
        witness: out.witness,
        worst_margin: out.worst_margin,
        note: None,
    }
}

/// `⟨y₁-y₂, g(t,y₁,z)-g(t,y₂,z)⟩ <= u(t)|y₁-y₂|²` with the generator's `u`
/// (`H4`), or with `u ≡ 0` when only `H4'` is claimed.
pub fn check_monotonicity(g: &Generator, cfg: &SamplerConfig) -> AssumptionEntry {
    if g.claims_assumption(Assumption::H4) || !g.claims_assumption(Assumption::H4Prime) {
        check_monotonicity_with(g, &g.coefficients.u, Assumption::H4, cfg)
    } else {
        let zero: TimeFn = std::sync::Arc::new(|_| 0.0);
        check_monotonicity_with(g, &zero, Assumption::H4Prime, cfg)
    }
}

/// Monotonicity check against an explicit coefficient `u`.
pub fn check_monotonicity_with(
    g: &Generator,
    u: &TimeFn,
    label: Assumption,
    cfg: &SamplerConfig,
) -> AssumptionEntry {
    run_sampled(label, g, cfg, |s, ctx| {
        let g1 = g.eval(s.t, &s.y1, &s.z1, ctx);
        let g2 = g.eval(s.t, &s.y2, &s.z1, ctx);
        let dy: Vec<f64> = s.y1.iter().zip(&s.y2).map(|(a, b)| a - b).collect();
        let dg: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| a - b).collect();
        let dy2 = dot(&dy, &dy);
        let lhs = dot(&dy, &dg);
        let rhs = u(s.t) * dy2;
        let slack =
            cfg.slack_abs * (1.0 + dy2) + cfg.slack_rel * dy2.sqrt() * (norm(&g1) + norm(&g2) + rhs.abs());
        lhs - rhs - slack
    })
}

/// `|g(t,y,z₁)-g(t,y,z₂)| <= v(t)|z₁-z₂|` (`H5`).
pub fn check_lipschitz_z(g: &Generator, cfg: &SamplerConfig) -> AssumptionEntry {
    run_sampled(Assumption::H5, g, cfg, |s, ctx| {
        let g1 = g.eval(s.t, &s.y1, &s.z1, ctx);
        let g2 = g.eval(s.t, &s.y1, &s.z2, ctx);
        let dz: Vec<f64> = s.z1.iter().zip(&s.z2).map(|(a, b)| a - b).collect();
        let dg: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| a - b).collect();
        let rhs = g.v(s.t) * norm(&dz);
        let slack = cfg.slack_abs * (1.0 + norm(&dz)) + cfg.slack_rel * (norm(&g1) + norm(&g2) + rhs);
        norm(&dg) - rhs - slack
    })
}

/// `|g(t,y,z)-g(t,y,0)| <= γ(t)(g_t+|y|+|z|)^α` (`H6`).
pub fn check_sublinear_z(g: &Generator, cfg: &SamplerConfig) -> Result<AssumptionEntry> {
    let sub = g.coefficients.sublinear.clone().ok_or_else(|| {
        BsdeError::InvalidArgument(format!("{} declares no sublinear coefficients", g.name()))
    })?;
    let zero_z = vec![0.0; g.k() * g.d()];
    Ok(run_sampled(Assumption::H6, g, cfg, |s, ctx| {
        let g1 = g.eval(s.t, &s.y1, &s.z1, ctx);
        let g0 = g.eval(s.t, &s.y1, &zero_z, ctx);
        let diff: Vec<f64> = g1.iter().zip(&g0).map(|(a, b)| a - b).collect();
        let base = g.sublinear_process(s.t, ctx) + norm(&s.y1) + norm(&s.z1);
        let rhs = (sub.gamma)(s.t) * base.powf(sub.alpha);
        let slack = cfg.slack_abs + cfg.slack_rel * (norm(&g1) + norm(&g0) + rhs);
        norm(&diff) - rhs - slack
    }))
}

/// Continuity in `y` (`H2`) probed by small perturbations: the response to
/// a relative step of `1e-8` must stay below `1e-3 (1 + |g|)`.
pub fn check_continuity_y(g: &Generator, cfg: &SamplerConfig) -> AssumptionEntry {
    run_sampled(Assumption::H2, g, cfg, |s, ctx| {
        let base = g.eval(s.t, &s.y1, &s.z1, ctx);
        let n = norm(&s.y2).max(1e-300);
        let h = 1e-8 * (1.0 + norm(&s.y1));
        let shifted: Vec<f64> = s.y1.iter().zip(&s.y2).map(|(a, b)| a + h * b / n).collect();
        let moved = g.eval(s.t, &shifted, &s.z1, ctx);
        let diff: Vec<f64> = moved.iter().zip(&base).map(|(a, b)| a - b).collect();
        norm(&diff) - 1e-3 * (1.0 + norm(&base))
    })
}

/// Growth bound `|g(t,y,z)| <= |g(t,0,z)| + u(t)φ(|y|)` (`H3'`).
pub fn check_growth_bound(g: &Generator, cfg: &SamplerConfig) -> Result<AssumptionEntry> {
    let phi = g
        .growth()
        .cloned()
        .ok_or_else(|| BsdeError::InvalidArgument(format!("{} declares no growth function", g.name())))?;
    let zero_y = vec![0.0; g.k()];
    Ok(run_sampled(Assumption::H3Prime, g, cfg, |s, ctx| {
        let gy = g.eval(s.t, &s.y1, &s.z1, ctx);
        let g0 = g.eval(s.t, &zero_y, &s.z1, ctx);
        let rhs = norm(&g0) + g.u(s.t) * phi(norm(&s.y1));
        let slack = cfg.slack_abs + cfg.slack_rel * (norm(&gy) + rhs);
        norm(&gy) - rhs - slack
    }))
}

fn mc_grid(cfg: &SamplerConfig, g: &Generator, steps: usize) -> Result<TimeGrid> {
    match cfg.horizon {
        Horizon::Finite(t) => TimeGrid::uniform(t, steps),
        Horizon::Infinite => build_grid(
            Horizon::Infinite,
            steps,
            GridScheme::MappedExponential,
            1e-3,
            &g.coefficients.tail_functions(),
        ),
    }
}

/// Monte Carlo `E[(∫ X_t dt)^p]` where `X_t = h(t, path)`, at resolution
/// `steps` and `4·steps` on the same paths. Returns both values and the node
/// with the largest mean integrand.
fn mc_path_integral<H>(
    g: &Generator,
    cfg: &SamplerConfig,
    p: f64,
    h: H,
) -> Result<(f64, f64, f64)>
where
    H: Fn(f64, &PathContext<'_>) -> Result<f64> + Sync,
{
    let fine_grid = mc_grid(cfg, g, cfg.mc_steps * 4)?;
    let ens = sample_brownian(&fine_grid, cfg.mc_paths, g.d(), cfg.seed ^ 0x9e37)?;
    let eval = |grid: &TimeGrid, factor: usize| -> Result<(f64, Vec<f64>)> {
        let per_path: Vec<Result<(f64, Vec<f64>)>> = (0..cfg.mc_paths)
            .into_par_iter()
            .map(|m| {
                let mut acc = 0.0;
                let mut profile = vec![0.0; grid.steps()];
                for i in 0..grid.steps() {
                    let t = grid.node(i);
                    let ctx = PathContext::new(m, i * factor, ens.position(m, i * factor));
                    let v = h(t, &ctx)?;
                    if !v.is_finite() {
                        return Err(BsdeError::NonFinite { t, value: v });
                    }
                    profile[i] = v;
                    acc += v * grid.weight(i);
                }
                Ok((acc, profile))
            })
            .collect();
        let mut moment = 0.0;
        let mut profile = vec![0.0; grid.steps()];
        for r in per_path {
            let (acc, prof) = r?;
            moment += acc.abs().powf(p) / cfg.mc_paths as f64;
            for (a, b) in profile.iter_mut().zip(prof) {
                *a += b / cfg.mc_paths as f64;
            }
        }
        Ok((moment, profile))
    };
    let coarse_grid = fine_grid.coarsen(4)?;
    let (coarse, profile) = eval(&coarse_grid, 4)?;
    let (fine, _) = eval(&fine_grid, 1)?;
    let worst = profile
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| coarse_grid.node(i))
        .unwrap_or(0.0);
    Ok((coarse, fine, worst))
}

fn integrability_entry(
    assumption: Assumption,
    g: &Generator,
    cfg: &SamplerConfig,
    coarse: f64,
    fine: f64,
    worst_t: f64,
    what: &str,
) -> AssumptionEntry {
    let unstable = (fine - coarse).abs() > 0.1 * fine.abs().max(1e-12);
    let too_big = !fine.is_finite() || fine > cfg.cap;
    let fail = unstable || too_big;
    let margin = if too_big { fine - cfg.cap } else { (fine - coarse).abs() };
    AssumptionEntry {
        assumption,
        status: if fail {
            AssumptionStatus::Fail
        } else {
            AssumptionStatus::Pass
        },
        samples: cfg.mc_paths,
        violations: usize::from(fail),
        witness: fail.then(|| Witness {
            t: worst_t,
            y1: vec![0.0; g.k()],
            y2: vec![0.0; g.k()],
            z1: vec![0.0; g.k() * g.d()],
            z2: vec![0.0; g.k() * g.d()],
            b: vec![0.0; g.d()],
            margin,
        }),
        worst_margin: margin,
        note: Some(format!("{what}: {coarse:.6e} (N) vs {fine:.6e} (4N)")),
    }
}

/// `E[(∫|g(t,0,0)|dt)^p] < ∞` (`H1`, or `H1'` with `p = 1`).
pub fn check_integrable_driver(
    g: &Generator,
    cfg: &SamplerConfig,
    assumption: Assumption,
) -> Result<AssumptionEntry> {
    let p = if assumption == Assumption::H1Prime { 1.0 } else { cfg.p };
    let y0 = vec![0.0; g.k()];
    let z0 = vec![0.0; g.k() * g.d()];
    let (coarse, fine, worst) = mc_path_integral(g, cfg, p, |t, ctx| Ok(norm(&g.eval(t, &y0, &z0, ctx))))?;
    Ok(integrability_entry(
        assumption,
        g,
        cfg,
        coarse,
        fine,
        worst,
        &format!("E[(int |g(t,0,0)| dt)^{p}]"),
    ))
}

/// `ψ_{r'} ∈ L¹(dt×dP)` for `r' ∈ {1, 2}` (`H3`). A sampled lower bound:
/// the supremum over the ball is itself a search.
pub fn check_general_growth(g: &Generator, cfg: &SamplerConfig) -> Result<AssumptionEntry> {
    let search = PsiSearch::coarse();
    let mut entry = None;
    for r in [1.0, 2.0] {
        let small = SamplerConfig {
            mc_paths: cfg.mc_paths.min(16),
            mc_steps: cfg.mc_steps.min(64),
            ..cfg.clone()
        };
        let (coarse, fine, worst) =
            mc_path_integral(g, &small, 1.0, |t, ctx| psi_r(g, r, t, ctx, &search))?;
        let e = integrability_entry(
            Assumption::H3,
            g,
            &small,
            coarse,
            fine,
            worst,
            &format!("E int psi_{r}"),
        );
        if !e.passed() {
            return Ok(e);
        }
        entry = Some(e);
    }
    Ok(entry.expect("radii list is not empty"))
}

/// Run every check the generator claims; unclaimed assumptions are listed
/// as `not-claimed`.
pub fn report_assumptions(g: &Generator, cfg: &SamplerConfig) -> Result<AssumptionReport> {
    let mut entries = Vec::new();
    for a in Assumption::ALL {
        if !g.claims_assumption(a) {
            entries.push(AssumptionEntry::not_claimed(a));
            continue;
        }
        let e = match a {
            Assumption::H1 | Assumption::H1Prime => check_integrable_driver(g, cfg, a)?,
            Assumption::H2 => check_continuity_y(g, cfg),
            Assumption::H3 => check_general_growth(g, cfg)?,
            Assumption::H3Prime => check_growth_bound(g, cfg)?,
            Assumption::H4 => check_monotonicity_with(g, &g.coefficients.u, Assumption::H4, cfg),
            Assumption::H4Prime => {
                let zero: TimeFn = std::sync::Arc::new(|_| 0.0);
                check_monotonicity_with(g, &zero, Assumption::H4Prime, cfg)
            }
            Assumption::H5 => check_lipschitz_z(g, cfg),
            Assumption::H6 => check_sublinear_z(g, cfg)?,
        };
        entries.push(e);
    }
    Ok(AssumptionReport {
        generator: g.name().to_string(),
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::time_fn;
    use crate::generators::CoefficientSet;

    fn scalar(name: &str, f: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static) -> Generator {
        Generator::new(name, 1, 1, move |t, y, z, _ctx, out| out[0] = f(t, y[0], z[0]))
    }

    fn cfg() -> SamplerConfig {
        SamplerConfig::default().with_samples(20_000)
    }

    #[test]
    fn cubic_decay_is_monotone() {
        let g = scalar("cubic", |_, y, _| -y * y * y);
        let e = check_monotonicity(&g, &cfg());
        assert_eq!(e.status, AssumptionStatus::Pass);
    }

    #[test]
    fn increasing_driver_fails_with_unit_witness() {
        let g = scalar("increasing", |_, y, _| y).with_claims(&[Assumption::H4Prime]);
        let e = check_monotonicity(&g, &cfg());
        assert_eq!(e.status, AssumptionStatus::Fail);
        let w = e.witness.unwrap();
        assert_eq!(w.y1, vec![1.0]);
        assert_eq!(w.y2, vec![0.0]);
    }

    #[test]
    fn lipschitz_checks() {
        let g = scalar("abs_z", |t, _, z| z.abs() / t.powf(0.25)).with_coefficients(
            CoefficientSet::new(time_fn(|_| 0.0), time_fn(|t: f64| t.powf(-0.25))),
        );
        assert!(check_lipschitz_z(&g, &cfg()).passed());

        let g = scalar("square", |_, _, z| z * z)
            .with_coefficients(CoefficientSet::new(time_fn(|_| 0.0), time_fn(|_| 5.0)));
        let e = check_lipschitz_z(&g, &cfg());
        assert_eq!(e.status, AssumptionStatus::Fail);
        assert!(e.witness.is_some());

        let g = scalar("no_z", |_, y, _| -y);
        assert!(check_lipschitz_z(&g, &cfg()).passed());
    }

    #[test]
    fn sublinear_checks() {
        let g = scalar("sin", |t: f64, _, z: f64| (-t).exp() * z.abs().sin()).with_coefficients(
            CoefficientSet::zero().with_sublinear(time_fn(|t: f64| (-t).exp()), 0.3),
        );
        assert!(check_sublinear_z(&g, &cfg()).unwrap().passed());

        let g = scalar("linear", |_, _, z| z)
            .with_coefficients(CoefficientSet::zero().with_sublinear(time_fn(|_| 2.0), 0.5));
        let e = check_sublinear_z(&g, &cfg()).unwrap();
        assert_eq!(e.status, AssumptionStatus::Fail);
    }

    #[test]
    fn continuity_catches_jumps_only_near_them() {
        let g = scalar("smooth", |_, y, _| y.sin());
        assert!(check_continuity_y(&g, &cfg()).passed());
    }

    #[test]
    fn singular_driver_is_not_integrable() {
        let g = scalar("singular", |t, _, _| 1.0 / t);
        let e = check_integrable_driver(&g, &SamplerConfig::default(), Assumption::H1).unwrap();
        assert_eq!(e.status, AssumptionStatus::Fail);
        assert!(e.witness.is_some());
        let g = scalar("log", |t: f64, _, _| t.ln().abs());
        let e = check_integrable_driver(&g, &SamplerConfig::default(), Assumption::H1).unwrap();
        assert!(e.passed(), "{:?}", e.note);
    }

    #[test]
    fn report_lists_unclaimed() {
        let g = scalar("cubic", |_, y, _| -y * y * y).with_claims(&[Assumption::H4Prime]);
        let r = report_assumptions(&g, &cfg()).unwrap();
        assert_eq!(r.status(Assumption::H4Prime), Some(AssumptionStatus::Pass));
        assert_eq!(r.status(Assumption::H6), Some(AssumptionStatus::NotClaimed));
        assert!(r.table().contains("not-claimed"));
    }
}

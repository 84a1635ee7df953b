//! Declarative experiment configs and the runner behind the `bsde` binary.
//!
//! A run resolves a fixture, builds the grid and the Brownian ensemble,
//! solves, runs the requested checks and writes plain CSV/JSON artifacts.
//! Identical configs give bit-identical artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::BsdeError;
use crate::estimates::{
    apply_fitted, check_combined_estimate, check_pathwise_ito, check_y_estimate, check_z_estimate,
    conditioning_pairs, fit_family, AssumptionA, EstimateCheck, EstimateReport, FamilyFit, PathwiseItoReport,
};
use crate::generators::{fixture, report_assumptions, AssumptionReport, Fixture, LinearOracle, SamplerConfig};
use crate::grid::{build_grid, GridScheme, Horizon, TimeGrid};
use crate::paths::{sample_brownian, BrownianEnsemble};
use crate::solver::{
    picard_solve, residual_check, solve_direct, solve_l1, y0_estimate, CondExpEngine, ImplicitConfig, L1Config,
    L1Report, LatticeEngine, PicardConfig, PicardReport, RegressionEngine, ResidualReport, Solution,
    SolveDiagnostics, Y0Estimate,
};

pub const DEFAULT_OUT_DIR: &str = "bsde-out";
pub const OUT_DIR_ENV: &str = "BSDE_OUT_DIR";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Outer Picard iteration on contraction intervals.
    Picard,
    /// Truncation ladder for integrable data.
    L1,
    /// One backward sweep with the implicit step in `y` and `z` from the
    /// current regression.
    Direct,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    Assumptions,
    ZEstimate,
    YEstimate,
    CombinedEstimate,
    PathwiseIto,
    Residual,
    Oracle,
    Ladder,
}

impl CheckKind {
    pub fn label(&self) -> &'static str {
        match self {
            CheckKind::Assumptions => "assumptions",
            CheckKind::ZEstimate => "z-estimate",
            CheckKind::YEstimate => "y-estimate",
            CheckKind::CombinedEstimate => "combined-estimate",
            CheckKind::PathwiseIto => "pathwise-ito",
            CheckKind::Residual => "residual",
            CheckKind::Oracle => "oracle",
            CheckKind::Ladder => "ladder",
        }
    }

    fn estimate(&self) -> Option<EstimateCheck> {
        match self {
            CheckKind::ZEstimate => Some(EstimateCheck::ZEstimate),
            CheckKind::YEstimate => Some(EstimateCheck::YEstimate),
            CheckKind::CombinedEstimate => Some(EstimateCheck::CombinedEstimate),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub steps: usize,
    /// Defaults to the fixture's horizon.
    pub horizon: Option<Horizon>,
    pub scheme: Option<GridScheme>,
    /// Tail mass allowed beyond the truncation point of an infinite horizon.
    pub tail_tol: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            steps: 64,
            horizon: None,
            scheme: None,
            tail_tol: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    pub paths: usize,
    pub seed: u64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig { paths: 1 << 14, seed: 42 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateConfig {
    /// Exponents for the estimate and pathwise checks.
    pub p: Vec<f64>,
    /// Fit the constants on the five-member linear family and mark the
    /// fixture against them; otherwise the fixture is its own family.
    pub family: bool,
    /// Relative slack over the fitted constant.
    pub tol: f64,
    /// Allowed relative spread of the members' ratios around their mean.
    pub spread: f64,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        EstimateConfig {
            p: vec![2.0],
            family: false,
            tol: 0.1,
            spread: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub residual: f64,
    /// Pathwise check: allowed excess is `ito_factor · √Δ · (1 + |y_T|ᵖ)`.
    pub ito_factor: f64,
    pub ito_fraction: f64,
    /// Oracle check: `|y₀ - exact| < oracle_se · combined se`.
    pub oracle_se: f64,
    /// Ladder check: last distance over first below this, when set.
    pub ladder_ratio: Option<f64>,
    pub assumption_samples: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            residual: 5e-2,
            ito_factor: 10.0,
            ito_fraction: 1e-2,
            oracle_se: 3.0,
            ladder_ratio: None,
            assumption_samples: 20_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub fixture: String,
    /// Defaults to `l1` for fixtures posed with integrable data, `direct`
    /// with the lattice engine and `picard` otherwise.
    #[serde(default)]
    pub method: Option<Method>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub engine: CondExpEngine,
    #[serde(default)]
    pub picard: PicardConfig,
    #[serde(default)]
    pub l1: L1Config,
    #[serde(default)]
    pub implicit: ImplicitConfig,
    #[serde(default)]
    pub estimates: EstimateConfig,
    #[serde(default)]
    pub checks: Vec<CheckKind>,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Output directory; not part of the config hash.
    #[serde(default)]
    pub out: Option<PathBuf>,
}

/// Command-line overrides applied before normalization.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub steps: Option<usize>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    /// Unknown fixture, malformed or inconsistent config. Nothing written.
    #[error("config error: {0}")]
    Config(String),
    #[error("run failed: {0}")]
    Runtime(#[from] BsdeError),
}

impl ExperimentError {
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) => 2,
            ExperimentError::Runtime(_) => 1,
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> ExperimentError {
    ExperimentError::Config(e.to_string())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        toml::from_str(text).map_err(config_err)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.ensemble.seed = s;
        }
        if let Some(m) = o.paths {
            self.ensemble.paths = m;
        }
        if let Some(n) = o.steps {
            self.grid.steps = n;
        }
        if let Some(out) = &o.out {
            self.out = Some(out.clone());
        }
    }

    /// Resolve defaults from the fixture and validate every name and
    /// combination. Normalizing twice is the identity.
    pub fn normalize(&self) -> Result<Self, ExperimentError> {
        let fx = fixture(&self.fixture).map_err(config_err)?;
        let mut c = self.clone();
        c.grid.horizon.get_or_insert(fx.horizon);
        c.grid.scheme.get_or_insert(if c.grid.horizon == Some(fx.horizon) {
            fx.scheme
        } else {
            match c.grid.horizon {
                Some(Horizon::Infinite) => GridScheme::MappedAlgebraic,
                _ => GridScheme::Uniform,
            }
        });
        let lattice = matches!(c.engine, CondExpEngine::Lattice(_));
        c.method.get_or_insert(if lattice {
            Method::Direct
        } else if fx.p < 2.0 {
            Method::L1
        } else {
            Method::Picard
        });
        c.checks.sort();
        c.checks.dedup();
        let mut ps = c.estimates.p.clone();
        ps.sort_by(f64::total_cmp);
        ps.dedup();
        c.estimates.p = ps;
        c.validate(&fx)?;
        Ok(c)
    }

    fn validate(&self, fx: &Fixture) -> Result<(), ExperimentError> {
        let method = self.method.expect("normalized");
        if self.grid.steps == 0 {
            return Err(config_err("grid.steps must be at least 1"));
        }
        if self.ensemble.paths < 2 {
            return Err(config_err("ensemble.paths must be at least 2"));
        }
        if !(self.grid.tail_tol > 0.0) {
            return Err(config_err("grid.tail_tol must be positive"));
        }
        if let Some(Horizon::Finite(t)) = self.grid.horizon {
            if !(t > 0.0 && t.is_finite()) {
                return Err(config_err("grid.horizon must be positive"));
            }
        }
        match &self.engine {
            CondExpEngine::Regression { degree } if *degree == 0 => {
                return Err(config_err("engine.degree must be at least 1"));
            }
            CondExpEngine::Lattice(_) => {
                if method != Method::Direct {
                    return Err(config_err("the lattice engine only supports method = \"direct\""));
                }
                if fx.generator.dims() != (1, 1) || !fx.terminal.is_markov() {
                    return Err(config_err("the lattice engine needs k = d = 1 and a Markov terminal condition"));
                }
            }
            _ => {}
        }
        if self.estimates.p.iter().any(|p| !(*p >= 1.0 && p.is_finite())) {
            return Err(config_err("estimates.p entries must be at least 1"));
        }
        for ch in &self.checks {
            match ch {
                CheckKind::ZEstimate | CheckKind::YEstimate | CheckKind::CombinedEstimate => {
                    AssumptionA::for_fixture(&self.fixture).map_err(|_| {
                        config_err(format!("no structure constants registered for `{}`", self.fixture))
                    })?;
                    if ch.estimate() != Some(EstimateCheck::ZEstimate) && self.estimates.p.iter().any(|p| *p <= 1.0) {
                        return Err(config_err(format!("{} needs every p > 1", ch.label())));
                    }
                    if self.estimates.p.is_empty() {
                        return Err(config_err("estimates.p is empty"));
                    }
                }
                CheckKind::Residual if !matches!(self.engine, CondExpEngine::Regression { .. }) => {
                    return Err(config_err("the residual check needs the regression engine"));
                }
                CheckKind::Oracle if fx.oracle.is_none() => {
                    return Err(config_err(format!("fixture `{}` has no closed form", self.fixture)));
                }
                CheckKind::Ladder if method != Method::L1 => {
                    return Err(config_err("the ladder check needs method = \"l1\""));
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// SHA-256 of the normalized config without the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        hex(&Sha256::digest(c.to_toml().as_bytes()))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub check: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub checks: Vec<CheckOutcome>,
    pub y0: Vec<f64>,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
enum SolverReport {
    Picard(PicardReport),
    L1(L1Report),
    Direct { diagnostics: SolveDiagnostics },
}

impl SolverReport {
    fn file_name(&self) -> &'static str {
        match self {
            SolverReport::Picard(_) => "picard_report.json",
            SolverReport::L1(_) => "l1_report.json",
            SolverReport::Direct { .. } => "direct_report.json",
        }
    }
}

#[derive(Serialize)]
struct CheckDetails<'a> {
    outcomes: &'a [CheckOutcome],
    assumptions: Option<&'a AssumptionReport>,
    family_fits: &'a [FamilyFit],
    pathwise: &'a [PathwiseItoReport],
    residual: Option<&'a ResidualReport>,
    oracle: Option<&'a Y0Estimate>,
}

#[derive(Serialize)]
struct FileDigest {
    name: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest {
    version: &'static str,
    fixture: String,
    seed: u64,
    paths: usize,
    steps: usize,
    git_describe: String,
    config_sha256: String,
    files: Vec<FileDigest>,
}

fn git_describe() -> String {
    std::process::Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".into())
}

fn solve(
    cfg: &ExperimentConfig,
    fx: &Fixture,
    grid: &TimeGrid,
    ens: &BrownianEnsemble,
) -> crate::Result<(Solution, SolverReport)> {
    let (g, xi) = (&fx.generator, &fx.terminal);
    match (&cfg.engine, cfg.method.expect("normalized")) {
        (CondExpEngine::Lattice(lc), _) => {
            let sol = LatticeEngine::new(grid, lc)?.solve(g, xi, &cfg.implicit)?.to_solution(ens);
            let diagnostics = sol.diagnostics.clone();
            Ok((sol, SolverReport::Direct { diagnostics }))
        }
        (CondExpEngine::Regression { degree }, method) => {
            let eng = RegressionEngine::new(grid, ens, *degree)?;
            match method {
                Method::Picard => {
                    let (sol, rep) = picard_solve(g, xi, &eng, grid, &cfg.picard)?;
                    Ok((sol, SolverReport::Picard(rep)))
                }
                Method::L1 => {
                    let l1 = L1Config {
                        require_monotone: false,
                        ..cfg.l1.clone()
                    };
                    let (sol, rep) = solve_l1(g, xi, &eng, grid, &l1)?;
                    Ok((sol, SolverReport::L1(rep)))
                }
                Method::Direct => {
                    let sol = solve_direct(g, xi, &eng, grid, &cfg.implicit)?;
                    let diagnostics = sol.diagnostics.clone();
                    Ok((sol, SolverReport::Direct { diagnostics }))
                }
            }
        }
    }
}

fn build_run_grid(cfg: &ExperimentConfig, fx: &Fixture) -> crate::Result<TimeGrid> {
    build_grid(
        cfg.grid.horizon.expect("normalized"),
        cfg.grid.steps,
        cfg.grid.scheme.expect("normalized"),
        cfg.grid.tail_tol,
        &fx.generator.coefficients.tail_functions(),
    )
}

fn write_file(dir: &Path, name: &str, bytes: &[u8], files: &mut Vec<PathBuf>) -> crate::Result<()> {
    let path = dir.join(name);
    fs::write(&path, bytes)?;
    files.push(path);
    Ok(())
}

fn solution_csv(sol: &Solution, grid: &TimeGrid) -> crate::Result<Vec<u8>> {
    let k = sol.k();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t".to_string()];
    if k == 1 {
        header.push("mean_y".into());
    } else {
        header.extend((1..=k).map(|j| format!("mean_y_{j}")));
    }
    header.push("std_y".into());
    header.push("mean_abs_z".into());
    w.write_record(&header)?;
    for i in 0..=grid.steps() {
        let mut row = vec![grid.t(i).to_string()];
        row.extend(sol.mean_y(i).iter().map(|v| v.to_string()));
        row.push(sol.std_y(i).to_string());
        row.push(sol.mean_abs_z(i).to_string());
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| BsdeError::Io(e.into_error()))
}

fn estimates_csv(reports: &[EstimateReport]) -> crate::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["check", "member", "p", "r", "t", "lhs", "rhs", "ratio", "fitted_constant", "pass"])?;
    for rep in reports {
        for row in &rep.rows {
            w.write_record([
                row.check.clone(),
                row.member.clone(),
                row.p.to_string(),
                row.r.to_string(),
                row.t.to_string(),
                row.lhs.to_string(),
                row.rhs.to_string(),
                row.ratio.to_string(),
                row.fitted_constant.map(|c| c.to_string()).unwrap_or_default(),
                row.pass.map(|b| b.to_string()).unwrap_or_default(),
            ])?;
        }
    }
    w.into_inner().map_err(|e| BsdeError::Io(e.into_error()))
}

fn estimate(
    check: EstimateCheck,
    member: &str,
    sol: &Solution,
    grid: &TimeGrid,
    ens: &BrownianEnsemble,
    a: &AssumptionA,
    p: f64,
) -> crate::Result<EstimateReport> {
    let pairs = conditioning_pairs(grid.steps());
    match check {
        EstimateCheck::ZEstimate => check_z_estimate(member, sol, grid, ens, a, &a.beta_z_estimate(), &pairs, p),
        EstimateCheck::YEstimate => check_y_estimate(member, sol, grid, ens, a, &a.beta_y_estimate(p), &pairs, p),
        EstimateCheck::CombinedEstimate => {
            check_combined_estimate(member, sol, grid, ens, a, &a.beta_y_estimate(p), &pairs, p)
        }
    }
}

/// Solutions of the linear family on the run's step count and ensemble size.
fn family_solutions(cfg: &ExperimentConfig) -> crate::Result<Vec<(String, AssumptionA, Solution, TimeGrid, BrownianEnsemble)>> {
    let mut out = Vec::new();
    for o in LinearOracle::family() {
        let fx = o.fixture();
        let grid = TimeGrid::uniform(o.horizon, cfg.grid.steps)?;
        let ens = sample_brownian(&grid, cfg.ensemble.paths, 1, cfg.ensemble.seed)?;
        let member_cfg = ExperimentConfig {
            method: Some(Method::Picard),
            engine: match &cfg.engine {
                CondExpEngine::Lattice(_) => CondExpEngine::default(),
                e => e.clone(),
            },
            ..cfg.clone()
        };
        let (sol, _) = solve(&member_cfg, &fx, &grid, &ens)?;
        let name = format!("linear(a={},b={},c={})", o.a, o.b, o.c);
        out.push((name, AssumptionA::for_linear(&o), sol, grid, ens));
    }
    Ok(out)
}

/// Parse, normalize and run; see [`run`].
pub fn run_file(path: &Path, overrides: &Overrides) -> Result<RunOutcome, ExperimentError> {
    let mut cfg = ExperimentConfig::load(path)?;
    cfg.apply(overrides);
    run(&cfg)
}

pub fn run(config: &ExperimentConfig) -> Result<RunOutcome, ExperimentError> {
    let cfg = config.normalize()?;
    let fx = fixture(&cfg.fixture).map_err(config_err)?;
    let grid = build_run_grid(&cfg, &fx).map_err(config_err)?;
    let ens = sample_brownian(&grid, cfg.ensemble.paths, fx.generator.d(), cfg.ensemble.seed).map_err(config_err)?;

    let dir = cfg.out_dir();
    fs::create_dir_all(&dir).map_err(BsdeError::from)?;
    let mut files = Vec::new();
    let hashed = ExperimentConfig { out: None, ..cfg.clone() };
    write_file(&dir, "config.toml", hashed.to_toml().as_bytes(), &mut files)?;

    let (sol, report) = match solve(&cfg, &fx, &grid, &ens) {
        Ok(v) => v,
        Err(BsdeError::NoContraction(rep)) => {
            let bytes = serde_json::to_vec_pretty(&SolverReport::Picard((*rep).clone())).map_err(BsdeError::from)?;
            write_file(&dir, "picard_report.json", &bytes, &mut files)?;
            return Err(BsdeError::NoContraction(rep).into());
        }
        Err(e) => return Err(e.into()),
    };
    write_file(&dir, "solution.csv", &solution_csv(&sol, &grid)?, &mut files)?;
    write_file(&dir, report.file_name(), &serde_json::to_vec_pretty(&report).map_err(BsdeError::from)?, &mut files)?;

    let mut outcomes = Vec::new();
    let mut assumptions = None;
    let mut estimate_reports = Vec::new();
    let mut fits = Vec::new();
    let mut pathwise = Vec::new();
    let mut residual = None;
    let mut oracle = None;
    let mut family = None;
    for ch in &cfg.checks {
        match ch {
            CheckKind::Assumptions => {
                let sc = SamplerConfig {
                    horizon: cfg.grid.horizon.expect("normalized"),
                    p: fx.p,
                    seed: cfg.ensemble.seed,
                    ..SamplerConfig::default()
                }
                .with_samples(cfg.tolerances.assumption_samples);
                let rep = report_assumptions(&fx.generator, &sc)?;
                let pass = rep.all_claimed_pass();
                let failed: Vec<&str> = rep
                    .entries
                    .iter()
                    .filter(|e| e.status == crate::generators::AssumptionStatus::Fail)
                    .map(|e| e.assumption.label())
                    .collect();
                outcomes.push(CheckOutcome {
                    check: ch.label().into(),
                    pass,
                    detail: if pass { "all claimed assumptions hold".into() } else { format!("failed: {}", failed.join(", ")) },
                });
                assumptions = Some(rep);
            }
            CheckKind::ZEstimate | CheckKind::YEstimate | CheckKind::CombinedEstimate => {
                let kind = ch.estimate().expect("estimate check");
                let a = AssumptionA::for_fixture(&cfg.fixture)?;
                if cfg.estimates.family && family.is_none() {
                    family = Some(family_solutions(&cfg)?);
                }
                for &p in &cfg.estimates.p {
                    let mut own = estimate(kind, &cfg.fixture, &sol, &grid, &ens, &a, p)?;
                    let (fit, members) = match &family {
                        Some(fam) => {
                            let mut members = fam
                                .iter()
                                .map(|(name, a, s, g, e)| estimate(kind, name, s, g, e, a, p))
                                .collect::<crate::Result<Vec<_>>>()?;
                            let fit = fit_family(&mut members, cfg.estimates.tol, cfg.estimates.spread)?;
                            apply_fitted(&mut own, fit.fitted_constant, cfg.estimates.tol);
                            (fit, members)
                        }
                        None => {
                            let mut one = vec![own];
                            let fit = fit_family(&mut one, cfg.estimates.tol, cfg.estimates.spread)?;
                            own = one.pop().expect("one report");
                            (fit, Vec::new())
                        }
                    };
                    let pass = fit.pass && fit.stable && own.pass;
                    outcomes.push(CheckOutcome {
                        check: format!("{}@p={p}", ch.label()),
                        pass,
                        detail: format!(
                            "max ratio {:.4} vs fitted constant {:.4} (family mean {:.4}, stable {})",
                            own.max_ratio, fit.fitted_constant, fit.mean, fit.stable
                        ),
                    });
                    estimate_reports.extend(members);
                    estimate_reports.push(own);
                    fits.push(fit);
                }
            }
            CheckKind::PathwiseIto => {
                for &p in &cfg.estimates.p {
                    let rep = check_pathwise_ito(&sol, &fx.generator, &grid, &ens, p, 0, grid.steps(), cfg.tolerances.ito_factor)?;
                    let pass = rep.fraction < cfg.tolerances.ito_fraction;
                    outcomes.push(CheckOutcome {
                        check: format!("{}@p={p}", ch.label()),
                        pass,
                        detail: format!("violation fraction {:.5} (limit {})", rep.fraction, cfg.tolerances.ito_fraction),
                    });
                    pathwise.push(rep);
                }
            }
            CheckKind::Residual => {
                let degree = match cfg.engine {
                    CondExpEngine::Regression { degree } => degree,
                    _ => unreachable!("validated"),
                };
                let eng = RegressionEngine::new(&grid, &ens, degree)?;
                let rep = residual_check(&sol, &fx.generator, &fx.terminal, &grid, &eng, 16)?;
                let pass = rep.max < cfg.tolerances.residual;
                outcomes.push(CheckOutcome {
                    check: ch.label().into(),
                    pass,
                    detail: format!("max projected residual {:.5} (limit {})", rep.max, cfg.tolerances.residual),
                });
                residual = Some(rep);
            }
            CheckKind::Oracle => {
                let exact = fx.oracle.expect("validated").y0();
                let est = y0_estimate(|g, e| solve(&cfg, &fx, g, e).map(|(s, _)| s), &grid, &ens)?;
                let err = (est.y0[0] - exact).abs();
                let limit = cfg.tolerances.oracle_se * est.combined_se[0];
                outcomes.push(CheckOutcome {
                    check: ch.label().into(),
                    pass: err < limit,
                    detail: format!("y0 {:.6} vs exact {:.6}: error {:.3e}, limit {:.3e}", est.y0[0], exact, err, limit),
                });
                oracle = Some(est);
            }
            CheckKind::Ladder => {
                let rep = match &report {
                    SolverReport::L1(r) => r,
                    _ => unreachable!("validated"),
                };
                let ratio_ok = cfg.tolerances.ladder_ratio.map_or(true, |lim| rep.final_ratio < lim);
                outcomes.push(CheckOutcome {
                    check: ch.label().into(),
                    pass: rep.monotone && ratio_ok,
                    detail: format!("monotone {}, last/first distance {:.4}", rep.monotone, rep.final_ratio),
                });
            }
        }
    }
    if !estimate_reports.is_empty() {
        write_file(&dir, "estimates.csv", &estimates_csv(&estimate_reports)?, &mut files)?;
    }
    if !cfg.checks.is_empty() {
        let details = CheckDetails {
            outcomes: &outcomes,
            assumptions: assumptions.as_ref(),
            family_fits: &fits,
            pathwise: &pathwise,
            residual: residual.as_ref(),
            oracle: oracle.as_ref(),
        };
        write_file(&dir, "checks.json", &serde_json::to_vec_pretty(&details).map_err(BsdeError::from)?, &mut files)?;
    }

    let mut digests = Vec::new();
    for f in &files {
        let bytes = fs::read(f).map_err(BsdeError::from)?;
        digests.push(FileDigest {
            name: f.file_name().expect("file").to_string_lossy().into_owned(),
            sha256: hex(&Sha256::digest(&bytes)),
        });
    }
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        fixture: cfg.fixture.clone(),
        seed: cfg.ensemble.seed,
        paths: cfg.ensemble.paths,
        steps: cfg.grid.steps,
        git_describe: git_describe(),
        config_sha256: cfg.hash(),
        files: digests,
    };
    write_file(&dir, "manifest.json", &serde_json::to_vec_pretty(&manifest).map_err(BsdeError::from)?, &mut files)?;

    Ok(RunOutcome {
        out_dir: dir,
        files,
        checks: outcomes,
        y0: sol.y0(),
    })
}

/// Assumption report for a named fixture on its own horizon.
pub fn fixture_assumptions(name: &str, samples: usize, seed: u64) -> Result<AssumptionReport, ExperimentError> {
    let fx = fixture(name).map_err(config_err)?;
    let sc = SamplerConfig {
        horizon: fx.horizon,
        p: fx.p,
        seed,
        ..SamplerConfig::default()
    }
    .with_samples(samples);
    Ok(report_assumptions(&fx.generator, &sc)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalized_config_round_trips() {
        let cfg = ExperimentConfig::from_toml(
            r#"
fixture = "example2"
checks = ["residual", "z-estimate", "residual"]

[grid]
steps = 32
horizon = "infinite"

[estimates]
p = [4.0, 2.0]
"#,
        )
        .unwrap();
        let n = cfg.normalize().unwrap();
        assert_eq!(n.method, Some(Method::Picard));
        assert_eq!(n.grid.scheme, Some(GridScheme::MappedAlgebraic));
        assert_eq!(n.checks, vec![CheckKind::ZEstimate, CheckKind::Residual]);
        assert_eq!(n.estimates.p, vec![2.0, 4.0]);
        let back = ExperimentConfig::from_toml(&n.to_toml()).unwrap();
        assert_eq!(back, n);
        assert_eq!(back.normalize().unwrap(), n);
        assert_eq!(back.hash(), n.hash());
    }

    #[test]
    fn integrable_fixtures_default_to_the_ladder() {
        let cfg = ExperimentConfig::from_toml("fixture = \"example3\"").unwrap().normalize().unwrap();
        assert_eq!(cfg.method, Some(Method::L1));
    }

    #[test]
    fn bad_configs_are_config_errors() {
        assert!(ExperimentConfig::from_toml("[grid]\nsteps = 4").is_err());
        assert!(ExperimentConfig::from_toml("fixture = \"x\"\nbogus = 1").is_err());
        let unknown = ExperimentConfig::from_toml("fixture = \"nope\"").unwrap();
        assert_eq!(unknown.normalize().unwrap_err().exit_code(), 2);
        let ladder = ExperimentConfig::from_toml("fixture = \"example1\"\nchecks = [\"ladder\"]").unwrap();
        assert!(ladder.normalize().is_err());
        let lattice = ExperimentConfig::from_toml("fixture = \"example2\"\n[engine]\nkind = \"lattice\"").unwrap();
        assert!(lattice.normalize().is_err());
    }

    #[test]
    fn out_dir_is_not_hashed() {
        let a = ExperimentConfig::from_toml("fixture = \"zero_driver\"").unwrap().normalize().unwrap();
        let mut b = a.clone();
        b.out = Some("elsewhere".into());
        assert_eq!(a.hash(), b.hash());
    }
}

//! Approximation and reduction operators on generators: radial truncation,
//! mollification in `y`, the smooth cutoff, the `h_n`/`h'_n` and `gⁿ`
//! constructions, and the exponential changes of variables.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{BsdeError, Result};
use crate::generators::{norm, Assumption, CoefficientSet, Generator, PsiFn, TerminalCondition};
use crate::grid::{cumulative_quadrature, time_fn, TimeFn, TimeGrid};
use crate::paths::AdaptedField;
use crate::quadrature::{gauss_legendre, tanh_sinh};

/// Projection onto the centred ball of radius `q`: `q x / (q ∨ |x|)`.
///
/// Points within a few ulps of the sphere are treated as inside, which makes
/// the map exactly idempotent in floating point.
pub fn radial_truncate(x: &[f64], q: f64) -> Vec<f64> {
    let mut out = x.to_vec();
    radial_truncate_in_place(&mut out, q);
    out
}

pub fn radial_truncate_in_place(x: &mut [f64], q: f64) {
    if q <= 0.0 {
        x.fill(0.0);
        return;
    }
    let n = norm(x);
    if n <= q * (1.0 + 8.0 * f64::EPSILON) {
        return;
    }
    let s = q / n;
    for v in x.iter_mut() {
        *v *= s;
    }
}

/// Unnormalized bump `exp(-1/(1-|x|²))` on the open unit ball.
pub fn bump(x: &[f64]) -> f64 {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    if r2 >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - r2)).exp()
    }
}

/// Discrete mollifier: nodes `x_j` in the unit ball with weights
/// `w_j ≈ ρ(x_j) dx`, `Σ w_j = 1`.
#[derive(Clone, Debug)]
pub struct Mollifier {
    k: usize,
    n: f64,
    nodes: Vec<Vec<f64>>,
    weights: Vec<f64>,
    normalization: f64,
}

impl Mollifier {
    /// Gauss–Legendre on two panels for `k = 1`, tensor Gauss–Legendre with
    /// 32 nodes per axis for `k = 2`, antithetic
    /// Monte Carlo with `10⁴` ball samples for `k > 2`.
    pub fn new(k: usize, n: f64) -> Result<Self> {
        if k == 0 || !(n > 0.0) {
            return Err(BsdeError::InvalidArgument(format!(
                "mollifier needs k >= 1 and n > 0 (got k = {k}, n = {n})"
            )));
        }
        let (nodes, raw): (Vec<Vec<f64>>, Vec<f64>) = if k <= 2 {
            let (x, w) = gauss_legendre(32);
            let mut nodes = Vec::new();
            let mut raw = Vec::new();
            if k == 1 {
                // two panels so a kink of the mollified function at the
                // centre falls on a panel edge
                for s in [-1.0, 1.0] {
                    for (xi, wi) in x.iter().zip(&w) {
                        let p = 0.5 * s * (xi + 1.0);
                        nodes.push(vec![p]);
                        raw.push(0.5 * wi * bump(&[p]));
                    }
                }
            } else {
                for (xi, wi) in x.iter().zip(&w) {
                    for (xj, wj) in x.iter().zip(&w) {
                        let p = [*xi, *xj];
                        let b = bump(&p);
                        if b > 0.0 {
                            nodes.push(p.to_vec());
                            raw.push(wi * wj * b);
                        }
                    }
                }
            }
            (nodes, raw)
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(0xb0b);
            let half = 5_000;
            let vol = ball_volume(k);
            let mut nodes = Vec::with_capacity(2 * half);
            let mut raw = Vec::with_capacity(2 * half);
            for _ in 0..half {
                let dir: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                let nd = norm(&dir).max(1e-300);
                let r = rng.random::<f64>().powf(1.0 / k as f64);
                let p: Vec<f64> = dir.iter().map(|v| r * v / nd).collect();
                let b = bump(&p) * vol / (2 * half) as f64;
                let q: Vec<f64> = p.iter().map(|v| -v).collect();
                nodes.push(p);
                raw.push(b);
                nodes.push(q);
                raw.push(b);
            }
            (nodes, raw)
        };
        let normalization: f64 = raw.iter().sum();
        let weights = raw.iter().map(|w| w / normalization).collect();
        Ok(Mollifier {
            k,
            n,
            nodes,
            weights,
            normalization,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn scale(&self) -> f64 {
        self.n
    }

    /// Quadrature value of `∫ exp(-1/(1-|x|²)) dx` used to normalize `ρ`.
    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    /// `Σ w_j`, the discrete `∫ρ`.
    pub fn unit_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `Σ w_j x_j`, the discrete first moment.
    pub fn first_moment(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.k];
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            for (a, b) in m.iter_mut().zip(x) {
                *a += w * b;
            }
        }
        m
    }

    /// Normalized density `ρ(x)`.
    pub fn density(&self, x: &[f64]) -> f64 {
        bump(x) / self.normalization
    }

    pub fn nodes(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.nodes.iter().map(|v| v.as_slice()).zip(self.weights.iter().copied())
    }
}

fn ball_volume(k: usize) -> f64 {
    // V_k = π^{k/2} / Γ(k/2 + 1), by the recursion V_k = 2π V_{k-2} / k
    let mut v = if k % 2 == 0 { 1.0 } else { 2.0 };
    let mut j = if k % 2 == 0 { 2 } else { 3 };
    while j <= k {
        v *= std::f64::consts::TAU / j as f64;
        j += 2;
    }
    v
}

/// `f_n(y) = Σ_j w_j f(y - x_j / n)` for `f: R^k -> R^m`.
pub fn mollify<F>(f: F, y: &[f64], moll: &Mollifier, out_dim: usize) -> Result<Vec<f64>>
where
    F: Fn(&[f64], &mut [f64]),
{
    let mut acc = vec![0.0; out_dim];
    let mut point = vec![0.0; y.len()];
    let mut val = vec![0.0; out_dim];
    for (x, w) in moll.nodes() {
        for ((p, yi), xi) in point.iter_mut().zip(y).zip(x) {
            *p = yi - xi / moll.n;
        }
        f(&point, &mut val);
        for (a, v) in acc.iter_mut().zip(&val) {
            if !v.is_finite() {
                return Err(BsdeError::NonFinite { t: f64::NAN, value: *v });
            }
            *a += w * v;
        }
    }
    Ok(acc)
}

/// `g` mollified in `y` at scale `n`; `φ` (if any) becomes `φ(· + 1)`.
/// Non-finite values propagate as `NaN`.
pub fn mollify_generator(g: &Generator, n: f64) -> Result<Generator> {
    let moll = Arc::new(Mollifier::new(g.k(), n)?);
    let inner = g.clone();
    let k = g.k();
    let mut out = g.derived(format!("{}*rho_{n}", g.name()), move |t, y, z, ctx, out| {
        let r = mollify(|p, o| inner.eval_into(t, p, z, ctx, o), y, &moll, k);
        match r {
            Ok(v) => out.copy_from_slice(&v),
            Err(_) => out.fill(f64::NAN),
        }
    });
    if let Some(phi) = g.growth().cloned() {
        out = out.with_growth(Arc::new(move |r| phi(r + 1.0)));
    }
    Ok(out)
}

/// `f_{n,q}(t,y,z) = f_n(t, π_q(y), z)`.
pub fn truncate_compose(f_n: &Generator, q: f64) -> Generator {
    let inner = f_n.clone();
    f_n.derived(format!("{}|pi_{q}", f_n.name()), move |t, y, z, ctx, out| {
        let yq = radial_truncate(y, q);
        inner.eval_into(t, &yq, z, ctx, out);
    })
}

/// Cutoff `θ_{r'}`: 1 on `|y| <= r'`, 0 on `|y| >= r'+1`, cubic smoothstep in
/// between.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutoffProfile {
    pub inner: f64,
}

impl CutoffProfile {
    pub fn new(inner: f64) -> Self {
        CutoffProfile { inner }
    }

    pub fn outer(&self) -> f64 {
        self.inner + 1.0
    }

    pub fn theta(&self, radius: f64) -> f64 {
        let s = (radius - self.inner).clamp(0.0, 1.0);
        1.0 - s * s * (3.0 - 2.0 * s)
    }

    /// Lipschitz constant `C(r')` of `y ↦ θ(|y|)`: `max |6s - 6s²| = 3/2`.
    pub fn lipschitz(&self) -> f64 {
        1.5
    }
}

pub fn smooth_cutoff(y: &[f64], profile: &CutoffProfile) -> f64 {
    profile.theta(norm(y))
}

/// The cut-off driver `h_n` and its uncut companion `h'_n`; the second
/// argument of both plays the role of `V_t`.
#[derive(Clone, Debug)]
pub struct HnPair {
    pub h: Generator,
    pub h_prime: Generator,
    pub n: f64,
    pub profile: CutoffProfile,
}

/// Build `h_n` and `h'_n` from `g`, with `ψ_{r'+1}` supplied by `psi`.
pub fn build_hn(g: &Generator, n: f64, r: f64, psi: PsiFn) -> HnPair {
    let profile = CutoffProfile::new(r);
    let make = |with_theta: bool| {
        let inner = g.clone();
        let psi = psi.clone();
        let k = g.k();
        let kd = g.k() * g.d();
        let name = format!(
            "{}{}_{n}",
            g.name(),
            if with_theta { "|h" } else { "|h'" }
        );
        g.derived(name, move |t, y, v, ctx, out| {
            let scale = n * (-t).exp();
            let mut vq = v.to_vec();
            radial_truncate_in_place(&mut vq, scale);
            debug_assert_eq!(vq.len(), kd);
            let zero = vec![0.0; k];
            let mut gy = vec![0.0; k];
            let mut g0 = vec![0.0; k];
            inner.eval_into(t, y, &vq, ctx, &mut gy);
            inner.eval_into(t, &zero, &vq, ctx, &mut g0);
            let factor = scale / psi(t, ctx).max(scale);
            let theta = if with_theta { profile.theta(norm(y)) } else { 1.0 };
            inner.eval_into(t, &zero, v, ctx, out);
            if theta > 0.0 {
                for j in 0..k {
                    out[j] += theta * (gy[j] - g0[j]) * factor;
                }
            }
        })
    };
    HnPair {
        h: make(true),
        h_prime: make(false),
        n,
        profile,
    }
}

/// `gⁿ(t,y,z) = g(t,y,z) - g(t,0,z) + π_{ne^{-t}}(g(t,0,z))`.
pub fn truncate_driver(g: &Generator, n: f64) -> Generator {
    let inner = g.clone();
    let k = g.k();
    g.derived(format!("{}^({n})", g.name()), move |t, y, z, ctx, out| {
        let zero = vec![0.0; k];
        let mut g0 = vec![0.0; k];
        inner.eval_into(t, &zero, z, ctx, &mut g0);
        inner.eval_into(t, y, z, ctx, out);
        let mut g0q = g0.clone();
        radial_truncate_in_place(&mut g0q, n * (-t).exp());
        for j in 0..k {
            out[j] += g0q[j] - g0[j];
        }
    })
}

/// `ξⁿ = π_n(ξ)`.
pub fn truncate_terminal(xi: &TerminalCondition, n: f64) -> TerminalCondition {
    xi.map(format!("{}^({n})", xi.name()), move |v| radial_truncate_in_place(v, n))
}

/// Memoized `U(t) = ∫_0^t u`.
#[derive(Clone)]
pub struct CumulativeIntegral {
    f: TimeFn,
    cache: Arc<RwLock<HashMap<u64, f64>>>,
}

impl CumulativeIntegral {
    /// Fails if `f` is not integrable at `0` (detected by comparing the
    /// integral from `1e-8` and from `1e-16`).
    pub fn new(f: TimeFn) -> Result<Self> {
        let a = tanh_sinh(|s| f(s), 1e-8, 1.0, 1e-10);
        let b = tanh_sinh(|s| f(s), 1e-16, 1.0, 1e-10);
        if !a.is_finite() || !b.is_finite() || (a - b).abs() > 1e-3 * (1.0 + a.abs()) {
            return Err(BsdeError::Divergent(format!(
                "integral near 0 does not settle ({a:.6e} vs {b:.6e})"
            )));
        }
        Ok(CumulativeIntegral {
            f,
            cache: Arc::new(RwLock::new(HashMap::new())),
        })
    }

    pub fn at(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let key = t.to_bits();
        if let Some(v) = self.cache.read().expect("cache lock").get(&key) {
            return *v;
        }
        let f = self.f.clone();
        let v = tanh_sinh(|s| f(s), 0.0, t, 1e-12);
        self.cache.write().expect("cache lock").insert(key, v);
        v
    }
}

/// `ḡ(t,y,z) = e^{U(t)} g(t, e^{-U(t)} y, e^{-U(t)} z) - u(t) y` with
/// `U = ∫_0^t u`, together with the maps between solutions
/// (`ȳ = e^{U} y`, `z̄ = e^{U} z`, `ξ̄ = e^{U(T)} ξ`).
#[derive(Clone)]
pub struct MonotoneTransform {
    pub generator: Generator,
    pub cumulative: CumulativeIntegral,
}

pub fn transform_monotone_to_zero(g: &Generator) -> Result<MonotoneTransform> {
    let u = g.coefficients.u.clone();
    let cumulative = CumulativeIntegral::new(u.clone())?;
    let inner = g.clone();
    let cum = cumulative.clone();
    let kd = g.k() * g.d();
    let k = g.k();
    let mut transformed = g.derived(format!("{}~", g.name()), move |t, y, z, ctx, out| {
        let big_u = cum.at(t);
        let e = (-big_u).exp();
        let ys: Vec<f64> = y.iter().map(|v| v * e).collect();
        let zs: Vec<f64> = z.iter().map(|v| v * e).collect();
        debug_assert_eq!(zs.len(), kd);
        inner.eval_into(t, &ys, &zs, ctx, out);
        let ut = u(t);
        for j in 0..k {
            out[j] = out[j] / e - ut * y[j];
        }
    });
    let mut claims: Vec<Assumption> = g.claims().iter().copied().collect();
    if claims.contains(&Assumption::H4) && !claims.contains(&Assumption::H4Prime) {
        claims.push(Assumption::H4Prime);
    }
    transformed = transformed
        .with_coefficients(CoefficientSet {
            u: time_fn(|_| 0.0),
            ..g.coefficients.clone()
        })
        .with_claims(&claims);
    Ok(MonotoneTransform {
        generator: transformed,
        cumulative,
    })
}

impl MonotoneTransform {
    pub fn factor(&self, t: f64) -> f64 {
        self.cumulative.at(t).exp()
    }

    pub fn terminal(&self, xi: &TerminalCondition, horizon: f64) -> TerminalCondition {
        let c = self.factor(horizon);
        xi.map(format!("{}~", xi.name()), move |v| v.iter_mut().for_each(|x| *x *= c))
    }

    /// `(y, z) ↦ (e^{U} y, e^{U} z)` on a grid.
    pub fn forward(&self, y: &AdaptedField, z: &AdaptedField, grid: &TimeGrid) -> (AdaptedField, AdaptedField) {
        let f: Vec<f64> = grid.points().iter().map(|&t| self.factor(t)).collect();
        (scale_in_time(y, &f), scale_in_time(z, &f))
    }

    pub fn inverse(&self, y: &AdaptedField, z: &AdaptedField, grid: &TimeGrid) -> (AdaptedField, AdaptedField) {
        let f: Vec<f64> = grid.points().iter().map(|&t| 1.0 / self.factor(t)).collect();
        (scale_in_time(y, &f), scale_in_time(z, &f))
    }
}

/// Multiply the time slice `i` of a field by `factors[i]`.
pub fn scale_in_time(field: &AdaptedField, factors: &[f64]) -> AdaptedField {
    let mut out = field.clone();
    for m in 0..field.n_paths() {
        for (i, &c) in factors.iter().enumerate().take(field.n_times()) {
            for v in out.at_mut(m, i) {
                *v *= c;
            }
        }
    }
    out
}

/// `exp(½ ∫_0^{t_i} β)` at every grid point.
pub fn beta_factors(beta: &TimeFn, grid: &TimeGrid, sign: f64) -> Result<Vec<f64>> {
    let cum = cumulative_quadrature(|t| beta(t), grid)?;
    if let Some(&last) = cum.last() {
        if !last.is_finite() {
            return Err(BsdeError::Divergent("integral of beta".into()));
        }
    }
    Ok(cum.iter().map(|c| (sign * 0.5 * c).exp()).collect())
}

/// `(y, z) ↦ (e^{½∫β} y, e^{½∫β} z)`.
pub fn beta_transform(
    y: &AdaptedField,
    z: &AdaptedField,
    beta: &TimeFn,
    grid: &TimeGrid,
) -> Result<(AdaptedField, AdaptedField)> {
    let f = beta_factors(beta, grid, 1.0)?;
    Ok((scale_in_time(y, &f), scale_in_time(z, &f)))
}

pub fn inverse_beta_transform(
    y: &AdaptedField,
    z: &AdaptedField,
    beta: &TimeFn,
    grid: &TimeGrid,
) -> Result<(AdaptedField, AdaptedField)> {
    let f = beta_factors(beta, grid, -1.0)?;
    Ok((scale_in_time(y, &f), scale_in_time(z, &f)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{fixture, psi_table, PsiSearch};
    use crate::paths::PathContext;

    #[test]
    fn radial_truncation_examples() {
        let v = radial_truncate(&[3.0, 4.0], 1.0);
        assert!((v[0] - 0.6).abs() < 1e-15 && (v[1] - 0.8).abs() < 1e-15);
        assert_eq!(radial_truncate(&[3.0, 4.0], 5.0), vec![3.0, 4.0]);
        assert_eq!(radial_truncate(&[3.0, -4.0], 0.0), vec![0.0, 0.0]);
    }

    #[test]
    fn mollifier_normalization_matches_direct_quadrature() {
        let m = Mollifier::new(1, 1.0).unwrap();
        let oracle = tanh_sinh(|x| bump(&[x]), -1.0, 1.0, 1e-14);
        assert!((m.normalization() - oracle).abs() < 1e-8, "{} vs {oracle}", m.normalization());
        assert!((m.unit_mass() - 1.0).abs() < 1e-12);
        assert!(m.first_moment()[0].abs() < 1e-15);
    }

    #[test]
    fn mollify_linear_and_constant() {
        let m = Mollifier::new(2, 3.0).unwrap();
        let v = mollify(|y, o| o.copy_from_slice(y), &[0.4, -1.2], &m, 2).unwrap();
        assert!((v[0] - 0.4).abs() < 1e-12 && (v[1] + 1.2).abs() < 1e-12);
        let v = mollify(|_, o| o[0] = 2.5, &[0.0, 0.0], &m, 1).unwrap();
        assert!((v[0] - 2.5).abs() < 1e-12);
    }

    #[test]
    fn mollify_abs_matches_first_absolute_moment() {
        let m = Mollifier::new(1, 1.0).unwrap();
        let z = tanh_sinh(|x| bump(&[x]), -1.0, 1.0, 1e-14);
        let oracle = tanh_sinh(|x| x.abs() * bump(&[x]) / z, -1.0, 1.0, 1e-14);
        let v = mollify(|y, o| o[0] = y[0].abs(), &[0.0], &m, 1).unwrap();
        assert!(v[0] > 0.0);
        assert!((v[0] - oracle).abs() < 1e-6, "{} vs {oracle}", v[0]);
    }

    #[test]
    fn high_dimensional_mollifier_is_normalized() {
        let m = Mollifier::new(3, 2.0).unwrap();
        assert!((m.unit_mass() - 1.0).abs() < 1e-12);
        let mom = m.first_moment();
        assert!(norm(&mom) < 1e-12);
    }

    #[test]
    fn cutoff_profile_values() {
        let p = CutoffProfile::new(2.0);
        assert_eq!(smooth_cutoff(&[1.0], &p), 1.0);
        assert_eq!(smooth_cutoff(&[4.0], &p), 0.0);
        assert!((smooth_cutoff(&[0.0, 2.5], &p) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn hn_agrees_with_g_at_origin_and_outside() {
        let g = fixture("example3").unwrap().generator;
        let psi = psi_table(&g, 3.0, PsiSearch::coarse());
        let pair = build_hn(&g, 4.0, 2.0, psi);
        let ctx = PathContext::new(0, 0, &[0.1]);
        for (t, v) in [(0.3, 0.7), (0.9, -5.0), (0.01, 40.0)] {
            assert_eq!(pair.h.eval(t, &[0.0], &[v], &ctx), g.eval(t, &[0.0], &[v], &ctx));
            assert_eq!(pair.h.eval(t, &[3.5], &[v], &ctx), g.eval(t, &[0.0], &[v], &ctx));
        }
    }

    #[test]
    fn driver_truncation() {
        let g = fixture("example1").unwrap().generator;
        let ctx = PathContext::new(0, 0, &[0.3]);
        let gn = truncate_driver(&g, 100.0);
        // |g(t,0,0)| = |ln t| + 0.3 <= 100 e^{-t} here
        assert_eq!(gn.eval(0.5, &[0.2], &[0.0], &ctx), g.eval(0.5, &[0.2], &[0.0], &ctx));
        let gn = truncate_driver(&g, 0.5);
        let v = gn.eval(0.5, &[0.0], &[1.0], &ctx);
        assert!(v[0].abs() <= 0.5 * (-0.5f64).exp() * (1.0 + 1e-15));
    }

    #[test]
    fn transform_of_identity_driver_cancels() {
        let g = Generator::new("y", 1, 1, |_, y, _, _, out| out[0] = y[0])
            .with_coefficients(CoefficientSet::new(time_fn(|_| 1.0), time_fn(|_| 0.0)));
        let tr = transform_monotone_to_zero(&g).unwrap();
        let ctx = PathContext::new(0, 0, &[0.0]);
        for (t, y) in [(0.2, 1.0), (0.7, -3.0)] {
            assert!(tr.generator.eval(t, &[y], &[0.0], &ctx)[0].abs() < 1e-12);
        }
        assert!((tr.factor(1.0) - 1f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn zero_coefficient_transform_is_identity() {
        let g = fixture("example3").unwrap().generator;
        let tr = transform_monotone_to_zero(&g).unwrap();
        let ctx = PathContext::new(0, 0, &[0.0]);
        assert_eq!(tr.generator.eval(0.4, &[0.3], &[1.1], &ctx), g.eval(0.4, &[0.3], &[1.1], &ctx));
    }

    #[test]
    fn divergent_coefficient_is_rejected() {
        let g = Generator::new("y", 1, 1, |_, y, _, _, out| out[0] = y[0])
            .with_coefficients(CoefficientSet::new(time_fn(|t| 1.0 / t), time_fn(|_| 0.0)));
        assert!(matches!(transform_monotone_to_zero(&g), Err(BsdeError::Divergent(_))));
    }

    #[test]
    fn beta_transform_examples() {
        let grid = TimeGrid::uniform(1.0, 8).unwrap();
        let y = AdaptedField::constant(2, 9, 1, 1, 1.0);
        let z = AdaptedField::constant(2, 9, 1, 1, 1.0);
        let (ty, _) = beta_transform(&y, &z, &time_fn(|_| 2.0), &grid).unwrap();
        assert!((ty.at(1, 8)[0] - 1f64.exp()).abs() < 1e-14);
        let (ty, tz) = beta_transform(&y, &z, &time_fn(|_| 0.0), &grid).unwrap();
        assert_eq!(ty, y);
        assert_eq!(tz, z);
    }
}

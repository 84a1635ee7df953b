//! `ψ_{r'}(t) = sup_{|y| <= r'} |g(t,y,0) - g(t,0,0)|` by deterministic search.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{norm, Generator};
use crate::error::{BsdeError, Result};
use crate::paths::PathContext;

/// `ψ_{r'}` as a function of `(t, path)`.
pub type PsiFn = Arc<dyn Fn(f64, &PathContext<'_>) -> f64 + Send + Sync>;

#[derive(Clone, Debug, PartialEq)]
pub struct PsiSearch {
    /// Points on `[-r', r']` for `k = 1`.
    pub points_1d: usize,
    /// Points per axis for `k = 2` (plus as many on the boundary circle).
    pub points_2d: usize,
    /// Random ball samples for `k > 2`.
    pub random: usize,
    pub refine_rounds: usize,
    pub seed: u64,
}

impl Default for PsiSearch {
    fn default() -> Self {
        PsiSearch {
            points_1d: 2001,
            points_2d: 201,
            random: 20_000,
            refine_rounds: 40,
            seed: 7,
        }
    }
}

impl PsiSearch {
    /// Cheaper search for repeated evaluation inside integrals.
    pub fn coarse() -> Self {
        PsiSearch {
            points_1d: 201,
            points_2d: 41,
            random: 2_000,
            refine_rounds: 20,
            seed: 7,
        }
    }
}

/// Lower-bound estimate of `ψ_{r'}(t)` at one path context.
pub fn psi_r(
    g: &Generator,
    r: f64,
    t: f64,
    ctx: &PathContext<'_>,
    search: &PsiSearch,
) -> Result<f64> {
    if r < 0.0 {
        return Err(BsdeError::InvalidArgument(format!("radius must be nonnegative, got {r}")));
    }
    let (k, d) = g.dims();
    let z = vec![0.0; k * d];
    let origin = vec![0.0; k];
    let g0 = g.eval(t, &origin, &z, ctx);
    check_finite(t, &g0)?;
    if r == 0.0 {
        return Ok(0.0);
    }
    let mut buf = vec![0.0; k];
    let mut best = 0.0f64;
    let mut best_y = origin.clone();
    let mut probe = |y: &[f64], best: &mut f64, best_y: &mut Vec<f64>| -> Result<()> {
        g.eval_into(t, y, &z, ctx, &mut buf);
        check_finite(t, &buf)?;
        let v = buf.iter().zip(&g0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if v > *best {
            *best = v;
            best_y.clear();
            best_y.extend_from_slice(y);
        }
        Ok(())
    };
    match k {
        1 => {
            let n = search.points_1d.max(2);
            for j in 0..n {
                let y = -r + 2.0 * r * j as f64 / (n - 1) as f64;
                probe(&[y], &mut best, &mut best_y)?;
            }
        }
        2 => {
            let n = search.points_2d.max(2);
            for a in 0..n {
                for b in 0..n {
                    let y = [
                        -r + 2.0 * r * a as f64 / (n - 1) as f64,
                        -r + 2.0 * r * b as f64 / (n - 1) as f64,
                    ];
                    if y[0] * y[0] + y[1] * y[1] <= r * r {
                        probe(&y, &mut best, &mut best_y)?;
                    }
                }
            }
            let m = 4 * n;
            for j in 0..m {
                let th = std::f64::consts::TAU * j as f64 / m as f64;
                probe(&[r * th.cos(), r * th.sin()], &mut best, &mut best_y)?;
            }
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(search.seed);
            for j in 0..search.random {
                let dir: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                let n = norm(&dir).max(1e-300);
                // half the samples on the sphere, half inside
                let rad = if j % 2 == 0 {
                    r
                } else {
                    r * rng.random::<f64>().powf(1.0 / k as f64)
                };
                let y: Vec<f64> = dir.iter().map(|x| rad * x / n).collect();
                probe(&y, &mut best, &mut best_y)?;
            }
        }
    }
    // local refinement around the incumbent, projected back onto the ball
    let mut step = 2.0 * r / search.points_1d.max(search.points_2d) as f64;
    if k > 2 {
        step = 0.25 * r;
    }
    for _ in 0..search.refine_rounds {
        let centre = best_y.clone();
        for i in 0..k {
            for sgn in [-1.0, 1.0] {
                let mut y = centre.clone();
                y[i] += sgn * step;
                let n = norm(&y);
                if n > r {
                    for v in &mut y {
                        *v *= r / n;
                    }
                }
                probe(&y, &mut best, &mut best_y)?;
            }
        }
        step *= 0.5;
    }
    Ok(best)
}

fn check_finite(t: f64, v: &[f64]) -> Result<()> {
    match v.iter().find(|x| !x.is_finite()) {
        Some(&value) => Err(BsdeError::NonFinite { t, value }),
        None => Ok(()),
    }
}

/// `ψ_{r'}` as a reusable closure; search failures evaluate to `+∞`.
pub fn psi_table(g: &Generator, r: f64, search: PsiSearch) -> PsiFn {
    let g = g.clone();
    Arc::new(move |t, ctx| psi_r(&g, r, t, ctx, &search).unwrap_or(f64::INFINITY))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> PathContext<'static> {
        PathContext::new(0, 0, &[0.0])
    }

    #[test]
    fn independent_of_y_gives_zero() {
        let g = Generator::new("const", 1, 1, |t, _, _, _, out| out[0] = t);
        for t in [0.1, 0.5, 2.0] {
            assert_eq!(psi_r(&g, 3.0, t, &ctx(), &PsiSearch::default()).unwrap(), 0.0);
        }
    }

    #[test]
    fn radius_zero_gives_zero() {
        let g = Generator::new("lin", 1, 1, |_, y, _, _, out| out[0] = 5.0 * y[0]);
        assert_eq!(psi_r(&g, 0.0, 0.3, &ctx(), &PsiSearch::default()).unwrap(), 0.0);
    }

    #[test]
    fn higher_dimensional_search_finds_sphere_maximum() {
        let g = Generator::new("norm", 3, 1, |_, y, _, _, out| {
            let n = norm(y);
            out.iter_mut().for_each(|o| *o = n);
        });
        let v = psi_r(&g, 2.0, 0.5, &PathContext::new(0, 0, &[0.0]), &PsiSearch::default()).unwrap();
        // |(n, n, n)| = √3·n, maximal on the sphere
        assert!((v - 2.0 * 3f64.sqrt()).abs() < 1e-9, "{v}");
    }

    #[test]
    fn non_finite_driver_is_an_error() {
        let g = Generator::new("bad", 1, 1, |_, y, _, _, out| out[0] = 1.0 / (y[0] - 0.5));
        assert!(psi_r(&g, 1.0, 0.5, &ctx(), &PsiSearch::default()).is_err());
    }
}

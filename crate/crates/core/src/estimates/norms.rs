//! Discrete `Sᵖ`, `Mᵖ` and class-(D) functionals of adapted fields.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{BsdeError, Result};
use crate::grid::TimeGrid;
use crate::paths::AdaptedField;

/// Exponent `1 ∧ 1/p` applied to the moment.
fn outer_exponent(p: f64) -> f64 {
    (1.0 / p).min(1.0)
}

fn check_p(p: f64) -> Result<()> {
    if p > 0.0 && p.is_finite() {
        Ok(())
    } else {
        Err(BsdeError::InvalidArgument(format!("p must be positive, got {p}")))
    }
}

/// `(E max_i |y_{t_i}|ᵖ)^{1∧1/p}` over all grid times.
pub fn sp_norm(y: &AdaptedField, p: f64) -> Result<f64> {
    if y.n_times() == 0 {
        return Err(BsdeError::EmptyField);
    }
    sp_norm_range(y, p, 0..=y.n_times() - 1)
}

/// [`sp_norm`] restricted to the time indices in `range`.
pub fn sp_norm_range(y: &AdaptedField, p: f64, range: RangeInclusive<usize>) -> Result<f64> {
    check_p(p)?;
    if y.is_empty() || y.n_paths() == 0 || range.is_empty() {
        return Err(BsdeError::EmptyField);
    }
    let mut acc = 0.0;
    for m in 0..y.n_paths() {
        let mut sup = 0.0f64;
        for i in range.clone() {
            sup = sup.max(y.norm_at(m, i));
        }
        acc += sup.powf(p);
    }
    Ok((acc / y.n_paths() as f64).powf(outer_exponent(p)))
}

/// `(E (Σ_i |z_{t_i}|² Δ_i)^{p/2})^{1∧1/p}` over all grid intervals.
pub fn mp_norm(z: &AdaptedField, grid: &TimeGrid, p: f64) -> Result<f64> {
    mp_norm_range(z, grid, p, 0..grid.steps())
}

/// [`mp_norm`] restricted to intervals `i ∈ range` (`[t_i, t_{i+1}]`).
pub fn mp_norm_range(
    z: &AdaptedField,
    grid: &TimeGrid,
    p: f64,
    range: std::ops::Range<usize>,
) -> Result<f64> {
    check_p(p)?;
    if z.is_empty() || z.n_paths() == 0 {
        return Err(BsdeError::EmptyField);
    }
    let mut acc = 0.0;
    for m in 0..z.n_paths() {
        let mut q = 0.0;
        for i in range.clone() {
            let n = z.norm_at(m, i);
            q += n * n * grid.dt(i);
        }
        acc += q.powf(0.5 * p);
    }
    Ok((acc / z.n_paths() as f64).powf(outer_exponent(p)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassDConfig {
    /// Number of hitting levels, log-spaced between the 5% and 99.5%
    /// quantiles of `max_i |y_{t_i}|`.
    pub levels: usize,
}

impl Default for ClassDConfig {
    fn default() -> Self {
        ClassDConfig { levels: 24 }
    }
}

/// Which stopping time attained the class-(D) maximum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum StoppingTime {
    Deterministic { index: usize },
    Hitting { level: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassDValue {
    pub value: f64,
    pub argmax: StoppingTime,
    /// Standard error of `E|y_τ|` at the maximizing stopping time.
    pub standard_error: f64,
}

/// `max_τ E|y_τ|` over deterministic grid times and level-hitting times
/// `τ_a = min{t_i : |y_{t_i}| >= a} ∧ T`. A lower bound of the supremum over
/// all stopping times.
pub fn class_d_norm(y: &AdaptedField, cfg: &ClassDConfig) -> Result<f64> {
    Ok(class_d_detail(y, cfg)?.value)
}

pub fn class_d_detail(y: &AdaptedField, cfg: &ClassDConfig) -> Result<ClassDValue> {
    let (mp, nt) = (y.n_paths(), y.n_times());
    if y.is_empty() || mp == 0 || nt == 0 {
        return Err(BsdeError::EmptyField);
    }
    let mf = mp as f64;
    let stats = |vals: &mut dyn Iterator<Item = f64>| -> (f64, f64) {
        let (mut s, mut s2) = (0.0, 0.0);
        for v in vals {
            s += v;
            s2 += v * v;
        }
        let mean = s / mf;
        let var = (s2 / mf - mean * mean).max(0.0);
        (mean, (var / mf).sqrt())
    };
    let mut best = ClassDValue {
        value: f64::NEG_INFINITY,
        argmax: StoppingTime::Deterministic { index: 0 },
        standard_error: 0.0,
    };
    for i in 0..nt {
        let (mean, se) = stats(&mut (0..mp).map(|m| y.norm_at(m, i)));
        if mean > best.value {
            best = ClassDValue {
                value: mean,
                argmax: StoppingTime::Deterministic { index: i },
                standard_error: se,
            };
        }
    }
    let mut sups: Vec<f64> = (0..mp)
        .map(|m| (0..nt).map(|i| y.norm_at(m, i)).fold(0.0, f64::max))
        .collect();
    sups.sort_by(f64::total_cmp);
    let lo = sups[((mp - 1) as f64 * 0.05) as usize];
    let hi = sups[((mp - 1) as f64 * 0.995) as usize];
    if cfg.levels > 0 && hi > 0.0 {
        let lo = if lo > 0.0 { lo } else { hi * 1e-3 };
        let n = cfg.levels.max(2);
        for j in 0..n {
            let a = lo * (hi / lo).powf(j as f64 / (n - 1) as f64);
            let stopped = (0..mp).map(|m| {
                let idx = (0..nt).find(|&i| y.norm_at(m, i) >= a).unwrap_or(nt - 1);
                y.norm_at(m, idx)
            });
            let (mean, se) = stats(&mut stopped.collect::<Vec<_>>().into_iter());
            if mean > best.value {
                best = ClassDValue {
                    value: mean,
                    argmax: StoppingTime::Hitting { level: a },
                    standard_error: se,
                };
            }
        }
    }
    Ok(best)
}

//! Deterministic one-dimensional quadrature rules and root bracketing.
//!
//! The tanh-sinh rule is used wherever an integrand may carry an integrable
//! endpoint singularity (`|ln t|`, `t^{-1/2}`, ...); it never evaluates the
//! endpoints themselves.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, SymmetricEigen};

/// Adaptive tanh-sinh quadrature of `f` over `[a, b]`.
///
/// Levels are refined until two successive estimates agree to `tol`
/// (relative to the magnitude of the estimate).
pub fn tanh_sinh<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    if a > b {
        return -tanh_sinh(f, b, a, tol);
    }
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let t_max = 4.5;

    // Contribution of the node pair at parameter t (> 0).
    let pair = |t: f64| -> f64 {
        let u = FRAC_PI_2 * t.sinh();
        let e = (-2.0 * u).exp();
        // 1 - tanh(u), computed without cancellation
        let comp = 2.0 * e / (1.0 + e);
        let cosh_u = u.cosh();
        let w = FRAC_PI_2 * t.cosh() / (cosh_u * cosh_u);
        if !w.is_finite() || w == 0.0 {
            return 0.0;
        }
        let off = half * comp;
        let mut s = 0.0;
        let xl = a + off;
        let xr = b - off;
        if xl > a && xl < b {
            let v = f(xl);
            if v.is_finite() {
                s += v;
            }
        }
        if xr > a && xr < b {
            let v = f(xr);
            if v.is_finite() {
                s += v;
            }
        }
        s * w
    };

    let mut h = 1.0;
    let mut sum = FRAC_PI_2 * f(mid);
    let mut k = 1;
    while (k as f64) * h <= t_max {
        sum += pair(k as f64 * h);
        k += 1;
    }
    let mut estimate = sum * h * half;
    for _level in 0..10 {
        h *= 0.5;
        let mut k = 1;
        let mut extra = 0.0;
        while (k as f64) * h <= t_max {
            extra += pair(k as f64 * h);
            k += 2;
        }
        sum += extra;
        let next = sum * h * half;
        if (next - estimate).abs() <= tol * next.abs().max(1e-300) {
            return next;
        }
        estimate = next;
    }
    estimate
}

/// `∫_a^∞ f(t) dt` through the substitution `t = a + s/(1-s)`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, tol: f64) -> f64 {
    tanh_sinh(
        |s| {
            let one_minus = 1.0 - s;
            let t = a + s / one_minus;
            f(t) / (one_minus * one_minus)
        },
        0.0,
        1.0,
        tol,
    )
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// Gauss–Hermite rule for the standard normal law: `E[f(N(0,1))] ≈ Σ w_j f(x_j)`.
///
/// Computed with the Golub–Welsch eigenvalue method; weights sum to one.
pub fn gauss_hermite_normal(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        let b = (i as f64).sqrt();
        jacobi[(i, i - 1)] = b;
        jacobi[(i - 1, i)] = b;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|j| {
            let v0 = eig.eigenvectors[(0, j)];
            (eig.eigenvalues[j], v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // symmetrize to remove eigen-solver noise
    let mut nodes: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let mut weights: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (nodes[j] - nodes[i]);
        nodes[i] = -x;
        nodes[j] = x;
        let w = 0.5 * (weights[i] + weights[j]);
        weights[i] = w;
        weights[j] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    (nodes, weights)
}

/// Bisection for an increasing function on a bracket `[lo, hi]` with
/// `f(lo) <= 0 <= f(hi)`. Returns the midpoint of the final bracket.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, xtol: f64) -> f64 {
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= xtol || mid == lo || mid == hi {
            return mid;
        }
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tanh_sinh_handles_endpoint_singularities() {
        let v = tanh_sinh(|t| t.powf(-0.5), 0.0, 1.0, 1e-12);
        assert!((v - 2.0).abs() < 1e-9, "{v}");
        let v = tanh_sinh(|t| t.ln().abs(), 0.0, 1.0, 1e-12);
        assert!((v - 1.0).abs() < 1e-9, "{v}");
        let v = tanh_sinh(|t| t * t, -1.0, 2.0, 1e-12);
        assert!((v - 3.0).abs() < 1e-10);
    }

    #[test]
    fn infinite_tail_integrals() {
        let v = integrate_to_infinity(|t| (-t).exp(), 0.0, 1e-12);
        assert!((v - 1.0).abs() < 1e-9);
        let v = integrate_to_infinity(|t| 1.0 / (1.0 + t * t), 2.0, 1e-12);
        assert!((v - (FRAC_PI_2 - 2f64.atan())).abs() < 1e-9);
    }

    #[test]
    fn legendre_rule_is_exact_for_polynomials() {
        let (x, w) = gauss_legendre(32);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-13);
        let m4: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(4)).sum();
        assert!((m4 - 0.4).abs() < 1e-13);
        let (x, w) = gauss_legendre(5);
        let m8: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert!((m8 - 2.0 / 9.0).abs() < 1e-13);
    }

    #[test]
    fn hermite_rule_matches_normal_moments() {
        let (x, w) = gauss_hermite_normal(20);
        let m = |p: i32| -> f64 { x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum() };
        assert!((m(0) - 1.0).abs() < 1e-13);
        assert!(m(1).abs() < 1e-13);
        assert!((m(2) - 1.0).abs() < 1e-12);
        assert!((m(4) - 3.0).abs() < 1e-11);
        assert!((m(6) - 15.0).abs() < 1e-9);
    }
}

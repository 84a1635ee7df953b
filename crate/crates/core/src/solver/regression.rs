//! Least-squares conditional expectations onto polynomials of `B_{t_i}`.
//!
//! The basis at step `i` is the set of products of normalized probabilists'
//! Hermite polynomials `He_n(x)/√n!` in `x = B_{t_i}/√t_i` of total degree at
//! most `D`; at `t_0 = 0` only the constant remains. The Gram matrices are
//! factored once per step.

use nalgebra::{Cholesky, DMatrix, Dyn, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{BsdeError, Result};
use crate::grid::TimeGrid;
use crate::paths::BrownianEnsemble;

/// Largest admissible condition number of a Gram matrix.
pub const MAX_CONDITION: f64 = 1e12;

pub struct RegressionEngine<'a> {
    ens: &'a BrownianEnsemble,
    degree: usize,
    exponents: Vec<Vec<usize>>,
    inv_sd: Vec<f64>,
    factors: Vec<Cholesky<f64, Dyn>>,
    conditions: Vec<f64>,
    /// Basis values per step, `M × P` row-major.
    basis: Vec<Vec<f64>>,
}

/// Paths per partial sum; fixed so that sums do not depend on the number
/// of threads.
const CHUNK: usize = 512;

impl std::fmt::Debug for RegressionEngine<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RegressionEngine")
            .field("degree", &self.degree)
            .field("basis", &self.exponents.len())
            .finish()
    }
}

fn multi_indices(dim: usize, degree: usize) -> Vec<Vec<usize>> {
    let mut out = vec![];
    for total in 0..=degree {
        let mut cur = vec![0; dim];
        fill(&mut out, &mut cur, 0, total);
    }
    out
}

fn fill(out: &mut Vec<Vec<usize>>, cur: &mut Vec<usize>, pos: usize, left: usize) {
    if pos + 1 == cur.len() {
        cur[pos] = left;
        out.push(cur.clone());
        return;
    }
    for a in (0..=left).rev() {
        cur[pos] = a;
        fill(out, cur, pos + 1, left - a);
    }
}

/// `He_n(x)/√n!` for `n = 0..=degree`.
fn hermite_normalized(x: f64, degree: usize, out: &mut [f64]) {
    out[0] = 1.0;
    if degree == 0 {
        return;
    }
    // unnormalized recursion, normalized at the end
    let mut h_prev = 1.0;
    let mut h = x;
    out[1] = x;
    for n in 1..degree {
        let next = x * h - n as f64 * h_prev;
        h_prev = h;
        h = next;
        out[n + 1] = h;
    }
    let mut fact = 1.0;
    for (n, v) in out.iter_mut().enumerate().take(degree + 1).skip(1) {
        fact *= n as f64;
        *v /= fact.sqrt();
    }
}

impl<'a> RegressionEngine<'a> {
    pub fn new(grid: &TimeGrid, ens: &'a BrownianEnsemble, degree: usize) -> Result<Self> {
        if grid.steps() != ens.steps() {
            return Err(BsdeError::InvalidArgument(format!(
                "grid has {} steps but the ensemble has {}",
                grid.steps(),
                ens.steps()
            )));
        }
        let exponents = multi_indices(ens.dim(), degree);
        let inv_sd: Vec<f64> = grid
            .points()
            .iter()
            .map(|&t| if t > 0.0 { 1.0 / t.sqrt() } else { 0.0 })
            .collect();
        let mut engine = RegressionEngine {
            ens,
            degree,
            exponents,
            inv_sd,
            factors: Vec::new(),
            conditions: Vec::new(),
            basis: Vec::new(),
        };
        engine.basis = (0..=grid.steps())
            .into_par_iter()
            .map(|i| {
                let p = engine.basis_size(i);
                let mut rows = vec![0.0; ens.n_paths() * p];
                for (m, row) in rows.chunks_mut(p).enumerate() {
                    engine.basis_row(i, m, row);
                }
                rows
            })
            .collect();
        let built: Vec<Result<(Cholesky<f64, Dyn>, f64)>> = (0..=grid.steps())
            .into_par_iter()
            .map(|i| engine.factor_step(i))
            .collect();
        for b in built {
            let (chol, cond) = b?;
            engine.factors.push(chol);
            engine.conditions.push(cond);
        }
        Ok(engine)
    }

    pub fn ensemble(&self) -> &'a BrownianEnsemble {
        self.ens
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of basis functions used at step `i`.
    pub fn basis_size(&self, i: usize) -> usize {
        if self.inv_sd[i] == 0.0 {
            1
        } else {
            self.exponents.len()
        }
    }

    pub fn condition(&self, i: usize) -> f64 {
        self.conditions[i]
    }

    pub fn max_condition(&self) -> f64 {
        self.conditions.iter().copied().fold(1.0, f64::max)
    }

    /// Basis values of path `m` at step `i`.
    pub fn basis_row(&self, i: usize, m: usize, out: &mut [f64]) {
        let p = self.basis_size(i);
        if p == 1 {
            out[0] = 1.0;
            return;
        }
        let b = self.ens.position(m, i);
        let dim = b.len();
        let mut table = vec![0.0; dim * (self.degree + 1)];
        for j in 0..dim {
            hermite_normalized(
                b[j] * self.inv_sd[i],
                self.degree,
                &mut table[j * (self.degree + 1)..(j + 1) * (self.degree + 1)],
            );
        }
        for (q, alpha) in self.exponents.iter().enumerate() {
            let mut v = 1.0;
            for (j, &a) in alpha.iter().enumerate() {
                v *= table[j * (self.degree + 1) + a];
            }
            out[q] = v;
        }
    }

    fn factor_step(&self, i: usize) -> Result<(Cholesky<f64, Dyn>, f64)> {
        let p = self.basis_size(i);
        let m = self.ens.n_paths();
        let rows = &self.basis[i];
        let partial: Vec<DMatrix<f64>> = rows
            .par_chunks(CHUNK * p)
            .map(|chunk| {
                let mut acc = DMatrix::<f64>::zeros(p, p);
                for row in chunk.chunks(p) {
                    for a in 0..p {
                        for b in 0..=a {
                            acc[(a, b)] += row[a] * row[b];
                        }
                    }
                }
                acc
            })
            .collect();
        let mut gram = DMatrix::<f64>::zeros(p, p);
        for part in &partial {
            gram += part;
        }
        for a in 0..p {
            for b in 0..a {
                gram[(b, a)] = gram[(a, b)];
            }
        }
        gram /= m as f64;
        let eig = SymmetricEigen::new(gram.clone());
        let lmax = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lmin = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        let condition = if lmin > 0.0 { lmax / lmin } else { f64::INFINITY };
        if !(condition <= MAX_CONDITION) {
            return Err(BsdeError::SingularRegression { step: i, condition });
        }
        let chol = Cholesky::new(gram).ok_or(BsdeError::SingularRegression { step: i, condition })?;
        Ok((chol, condition))
    }

    /// Regression coefficients (`P × width`) of `values` (`M × width`,
    /// row-major) on the basis at step `i`.
    pub fn coefficients(&self, i: usize, values: &[f64], width: usize) -> Result<DMatrix<f64>> {
        let m = self.ens.n_paths();
        if values.len() != m * width {
            return Err(BsdeError::InvalidArgument(format!(
                "expected {} values, got {}",
                m * width,
                values.len()
            )));
        }
        let p = self.basis_size(i);
        let rows = &self.basis[i];
        let partial: Vec<DMatrix<f64>> = rows
            .par_chunks(CHUNK * p)
            .zip(values.par_chunks(CHUNK * width))
            .map(|(brows, vals)| {
                let mut acc = DMatrix::<f64>::zeros(p, width);
                for (row, v) in brows.chunks(p).zip(vals.chunks(width)) {
                    for a in 0..p {
                        for (c, &x) in v.iter().enumerate() {
                            acc[(a, c)] += row[a] * x;
                        }
                    }
                }
                acc
            })
            .collect();
        let mut rhs = DMatrix::<f64>::zeros(p, width);
        for part in &partial {
            rhs += part;
        }
        rhs /= m as f64;
        Ok(self.factors[i].solve(&rhs))
    }

    /// `E[values | F_{t_i}]` evaluated on every path.
    pub fn project(&self, i: usize, values: &[f64], width: usize) -> Result<Vec<f64>> {
        let coef = self.coefficients(i, values, width)?;
        let p = self.basis_size(i);
        let mut out = vec![0.0; values.len()];
        let rows = &self.basis[i];
        out.par_chunks_mut(width).zip(rows.par_chunks(p)).for_each(|(o, row)| {
            for (c, oc) in o.iter_mut().enumerate() {
                let mut acc = 0.0;
                for a in 0..p {
                    acc += row[a] * coef[(a, c)];
                }
                *oc = acc;
            }
        });
        Ok(out)
    }
}

//! Seeded Brownian ensembles and per-path adapted fields.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{BsdeError, Result};
use crate::grid::TimeGrid;

/// `d`-dimensional Brownian increments for `M` paths over a grid.
///
/// Path `m` draws from its own ChaCha stream (`seed`, stream `m`), so any
/// subset of paths is reproducible and the result does not depend on how
/// paths are scheduled across threads.
#[derive(Clone, Debug, PartialEq)]
pub struct BrownianEnsemble {
    n_paths: usize,
    steps: usize,
    dim: usize,
    seed: u64,
    increments: Vec<f64>,
    positions: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub seed: u64,
    pub n_paths: usize,
    pub dim: usize,
    pub steps: usize,
    pub terminal_time: f64,
    pub terminal_mean: Vec<f64>,
    pub terminal_second_moment: Vec<f64>,
    pub mean_quadratic_variation: f64,
}

pub fn sample_brownian(
    grid: &TimeGrid,
    n_paths: usize,
    dim: usize,
    seed: u64,
) -> Result<BrownianEnsemble> {
    if n_paths == 0 || dim == 0 {
        return Err(BsdeError::InvalidArgument(
            "n_paths and dim must be at least 1".into(),
        ));
    }
    let steps = grid.steps();
    let sd: Vec<f64> = (0..steps).map(|i| grid.dt(i).sqrt()).collect();
    let mut increments = vec![0.0; n_paths * steps * dim];
    increments
        .par_chunks_mut(steps * dim)
        .enumerate()
        .for_each(|(m, chunk)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(m as u64);
            for i in 0..steps {
                for j in 0..dim {
                    let x: f64 = StandardNormal.sample(&mut rng);
                    chunk[i * dim + j] = x * sd[i];
                }
            }
        });
    Ok(BrownianEnsemble::from_increments(
        n_paths, steps, dim, seed, increments,
    ))
}

impl BrownianEnsemble {
    fn from_increments(
        n_paths: usize,
        steps: usize,
        dim: usize,
        seed: u64,
        increments: Vec<f64>,
    ) -> Self {
        let mut positions = vec![0.0; n_paths * (steps + 1) * dim];
        positions
            .par_chunks_mut((steps + 1) * dim)
            .enumerate()
            .for_each(|(m, chunk)| {
                let inc = &increments[m * steps * dim..(m + 1) * steps * dim];
                for i in 0..steps {
                    for j in 0..dim {
                        chunk[(i + 1) * dim + j] = chunk[i * dim + j] + inc[i * dim + j];
                    }
                }
            });
        BrownianEnsemble {
            n_paths,
            steps,
            dim,
            seed,
            increments,
            positions,
        }
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `ΔB_i` of path `m`.
    pub fn increment(&self, m: usize, i: usize) -> &[f64] {
        let base = (m * self.steps + i) * self.dim;
        &self.increments[base..base + self.dim]
    }

    /// `B_{t_i}` of path `m`.
    pub fn position(&self, m: usize, i: usize) -> &[f64] {
        let base = (m * (self.steps + 1) + i) * self.dim;
        &self.positions[base..base + self.dim]
    }

    /// The whole path `m` as `(steps + 1) × dim` positions.
    pub fn path(&self, m: usize) -> PathView<'_> {
        let base = m * (self.steps + 1) * self.dim;
        PathView {
            positions: &self.positions[base..base + (self.steps + 1) * self.dim],
            dim: self.dim,
        }
    }

    /// Same paths on a grid coarsened by `factor` (increments summed).
    pub fn coarsen(&self, factor: usize) -> Result<BrownianEnsemble> {
        if factor == 0 || self.steps % factor != 0 {
            return Err(BsdeError::InvalidArgument(format!(
                "cannot coarsen {} steps by {factor}",
                self.steps
            )));
        }
        let steps = self.steps / factor;
        let dim = self.dim;
        let mut increments = vec![0.0; self.n_paths * steps * dim];
        for m in 0..self.n_paths {
            for i in 0..steps {
                for j in 0..dim {
                    let mut acc = 0.0;
                    for l in 0..factor {
                        acc += self.increment(m, i * factor + l)[j];
                    }
                    increments[(m * steps + i) * dim + j] = acc;
                }
            }
        }
        Ok(BrownianEnsemble::from_increments(
            self.n_paths,
            steps,
            dim,
            self.seed,
            increments,
        ))
    }

    pub fn summary(&self, grid: &TimeGrid) -> EnsembleSummary {
        let m = self.n_paths as f64;
        let mut mean = vec![0.0; self.dim];
        let mut second = vec![0.0; self.dim];
        let mut qv = 0.0;
        for p in 0..self.n_paths {
            let b = self.position(p, self.steps);
            for j in 0..self.dim {
                mean[j] += b[j] / m;
                second[j] += b[j] * b[j] / m;
            }
            for i in 0..self.steps {
                qv += self.increment(p, i).iter().map(|x| x * x).sum::<f64>() / m;
            }
        }
        EnsembleSummary {
            seed: self.seed,
            n_paths: self.n_paths,
            dim: self.dim,
            steps: self.steps,
            terminal_time: grid.terminal(),
            terminal_mean: mean,
            terminal_second_moment: second,
            mean_quadratic_variation: qv,
        }
    }
}

/// Borrowed view of one Brownian path.
#[derive(Clone, Copy, Debug)]
pub struct PathView<'a> {
    positions: &'a [f64],
    dim: usize,
}

impl<'a> PathView<'a> {
    pub fn new(positions: &'a [f64], dim: usize) -> Self {
        PathView { positions, dim }
    }

    pub fn at(&self, i: usize) -> &'a [f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn terminal(&self) -> &'a [f64] {
        let n = self.positions.len() / self.dim;
        self.at(n - 1)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// What a path-dependent driver may observe at `(path, step)`.
#[derive(Clone, Copy, Debug)]
pub struct PathContext<'a> {
    pub path: usize,
    pub step: usize,
    /// `B` at the current grid point.
    pub b: &'a [f64],
}

impl<'a> PathContext<'a> {
    pub fn new(path: usize, step: usize, b: &'a [f64]) -> Self {
        PathContext { path, step, b }
    }

    pub fn b_norm(&self) -> f64 {
        self.b.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Per-path, per-time values of an `R^{rows × cols}` valued process.
#[derive(Clone, Debug, PartialEq)]
pub struct AdaptedField {
    n_paths: usize,
    n_times: usize,
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl AdaptedField {
    pub fn zeros(n_paths: usize, n_times: usize, rows: usize, cols: usize) -> Self {
        AdaptedField {
            n_paths,
            n_times,
            rows,
            cols,
            values: vec![0.0; n_paths * n_times * rows * cols],
        }
    }

    pub fn constant(n_paths: usize, n_times: usize, rows: usize, cols: usize, c: f64) -> Self {
        AdaptedField {
            n_paths,
            n_times,
            rows,
            cols,
            values: vec![c; n_paths * n_times * rows * cols],
        }
    }

    pub fn from_fn<F>(n_paths: usize, n_times: usize, rows: usize, cols: usize, f: F) -> Self
    where
        F: Fn(usize, usize, &mut [f64]),
    {
        let mut field = Self::zeros(n_paths, n_times, rows, cols);
        for m in 0..n_paths {
            for i in 0..n_times {
                f(m, i, field.at_mut(m, i));
            }
        }
        field
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn n_times(&self) -> usize {
        self.n_times
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn width(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn at(&self, m: usize, i: usize) -> &[f64] {
        let w = self.width();
        let base = (m * self.n_times + i) * w;
        &self.values[base..base + w]
    }

    pub fn at_mut(&mut self, m: usize, i: usize) -> &mut [f64] {
        let w = self.width();
        let base = (m * self.n_times + i) * w;
        &mut self.values[base..base + w]
    }

    /// Euclidean (Frobenius for matrices) norm at `(m, i)`.
    pub fn norm_at(&self, m: usize, i: usize) -> f64 {
        self.at(m, i).iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Row-major chunk of all times for path `m`.
    pub fn path_slice_mut(&mut self, m: usize) -> &mut [f64] {
        let len = self.n_times * self.width();
        &mut self.values[m * len..(m + 1) * len]
    }

    pub fn sub(&self, other: &AdaptedField) -> AdaptedField {
        assert_eq!(self.values.len(), other.values.len(), "field shapes differ");
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        AdaptedField {
            values,
            ..self.clone()
        }
    }

    pub fn add_scalar(&self, c: f64) -> AdaptedField {
        AdaptedField {
            values: self.values.iter().map(|a| a + c).collect(),
            ..self.clone()
        }
    }

    pub fn scaled(&self, c: f64) -> AdaptedField {
        AdaptedField {
            values: self.values.iter().map(|a| a * c).collect(),
            ..self.clone()
        }
    }

    /// Values at time index `i` for every path, concatenated.
    pub fn slice_at_time(&self, i: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_paths * self.width());
        for m in 0..self.n_paths {
            out.extend_from_slice(self.at(m, i));
        }
        out
    }

    pub fn set_time_slice(&mut self, i: usize, data: &[f64]) {
        let w = self.width();
        for m in 0..self.n_paths {
            self.at_mut(m, i).copy_from_slice(&data[m * w..(m + 1) * w]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positions_start_at_zero_and_accumulate() {
        let grid = TimeGrid::uniform(1.0, 8).unwrap();
        let ens = sample_brownian(&grid, 3, 2, 11).unwrap();
        for m in 0..3 {
            assert_eq!(ens.position(m, 0), &[0.0, 0.0]);
            let mut acc = [0.0; 2];
            for i in 0..8 {
                for j in 0..2 {
                    acc[j] += ens.increment(m, i)[j];
                }
            }
            for j in 0..2 {
                assert!((acc[j] - ens.position(m, 8)[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn subset_of_paths_is_reproducible() {
        let grid = TimeGrid::uniform(1.0, 16).unwrap();
        let big = sample_brownian(&grid, 20, 1, 5).unwrap();
        let small = sample_brownian(&grid, 4, 1, 5).unwrap();
        for m in 0..4 {
            for i in 0..16 {
                assert_eq!(big.increment(m, i), small.increment(m, i));
            }
        }
    }

    #[test]
    fn rejects_empty_ensembles() {
        let grid = TimeGrid::uniform(1.0, 4).unwrap();
        assert!(sample_brownian(&grid, 0, 1, 1).is_err());
        assert!(sample_brownian(&grid, 1, 0, 1).is_err());
    }

    #[test]
    fn coarsening_preserves_positions() {
        let grid = TimeGrid::uniform(1.0, 8).unwrap();
        let ens = sample_brownian(&grid, 5, 1, 2).unwrap();
        let c = ens.coarsen(4).unwrap();
        for m in 0..5 {
            assert!((c.position(m, 2)[0] - ens.position(m, 8)[0]).abs() < 1e-12);
            assert!((c.position(m, 1)[0] - ens.position(m, 4)[0]).abs() < 1e-12);
        }
    }
}

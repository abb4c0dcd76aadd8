use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Tag;
use crate::error::{Error, Result};
use crate::matrix::{squared_distance, Matrix};
use crate::rng::seeded;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SomParams {
    pub width: usize,
    pub height: usize,
    pub epochs: usize,
    pub radius_start: f64,
    pub radius_end: f64,
    pub learning_rate_start: f64,
    pub learning_rate_end: f64,
}

impl Default for SomParams {
    fn default() -> Self {
        Self {
            width: 10,
            height: 10,
            epochs: 50,
            radius_start: 5.0,
            radius_end: 0.5,
            learning_rate_start: 0.5,
            learning_rate_end: 0.01,
        }
    }
}

/// Trained map. Unit `u` sits at grid position `(u % width, u / width)`.
#[derive(Debug, Clone)]
pub struct SomGrid<T> {
    pub width: usize,
    pub height: usize,
    pub weights: Matrix<T>,
    /// Mean distance from each sample to its best-matching unit, per epoch.
    pub quantization_error: Vec<T>,
}

/// Per-unit assignment counts indexed by [`Tag`].
pub type CellCounts = Vec<[usize; 3]>;

fn geometric(start: f64, end: f64, t: f64) -> f64 {
    start * (end / start).powf(t)
}

impl<T: Real> SomGrid<T> {
    pub fn units(&self) -> usize {
        self.width * self.height
    }

    pub fn bmu(&self, x: &[T]) -> usize {
        let mut best = (0, T::infinity());
        for u in 0..self.units() {
            let d = squared_distance(self.weights.row(u), x);
            if d < best.1 {
                best = (u, d);
            }
        }
        best.0
    }

    pub fn quantization_error_of(&self, rows: &Matrix<T>) -> T {
        let total: T = rows
            .iter_rows()
            .map(|r| squared_distance(self.weights.row(self.bmu(r)), r).sqrt())
            .sum();
        total / T::of_usize(rows.rows().max(1))
    }

    /// Counts of each tag per unit; the counts partition the rows.
    pub fn assign(&self, rows: &Matrix<T>, tags: &[Tag]) -> Result<CellCounts> {
        if rows.rows() != tags.len() {
            return Err(Error::Shape(format!(
                "{} rows but {} tags",
                rows.rows(),
                tags.len()
            )));
        }
        let mut counts = vec![[0usize; 3]; self.units()];
        for (r, tag) in rows.iter_rows().zip(tags) {
            counts[self.bmu(r)][*tag as usize] += 1;
        }
        Ok(counts)
    }
}

/// Online SOM with a Gaussian neighbourhood; radius and learning rate decay
/// exponentially over all sample presentations.
pub fn som_fit<T: Real>(rows: &Matrix<T>, params: &SomParams, seed: u64) -> Result<SomGrid<T>> {
    let (n, d) = rows.shape();
    if n == 0 {
        return Err(Error::InsufficientData("SOM needs at least one row".into()));
    }
    if params.width == 0 || params.height == 0 || params.epochs == 0 {
        return Err(Error::Config("SOM grid and epochs must be positive".into()));
    }
    let mut rng = seeded(seed);
    let units = params.width * params.height;
    let mut lo = vec![T::infinity(); d];
    let mut hi = vec![T::neg_infinity(); d];
    for r in rows.iter_rows() {
        for (k, x) in r.iter().enumerate() {
            lo[k] = lo[k].min(*x);
            hi[k] = hi[k].max(*x);
        }
    }
    let mut weights = Matrix::zeros(units, d);
    for u in 0..units {
        for k in 0..d {
            weights.row_mut(u)[k] = lo[k] + (hi[k] - lo[k]) * T::of(rng.gen::<f64>());
        }
    }
    let mut grid = SomGrid {
        width: params.width,
        height: params.height,
        weights,
        quantization_error: Vec::new(),
    };
    let pos: Vec<(f64, f64)> = (0..units)
        .map(|u| ((u % params.width) as f64, (u / params.width) as f64))
        .collect();
    let total = (params.epochs * n) as f64;
    let mut order: Vec<usize> = (0..n).collect();
    let mut step = 0usize;
    for _epoch in 0..params.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let t = step as f64 / total;
            let radius = geometric(params.radius_start, params.radius_end, t);
            let lr = geometric(params.learning_rate_start, params.learning_rate_end, t);
            let x = rows.row(i);
            let b = grid.bmu(x);
            for u in 0..units {
                let g2 = (pos[u].0 - pos[b].0).powi(2) + (pos[u].1 - pos[b].1).powi(2);
                let h = T::of(lr * (-g2 / (2.0 * radius * radius)).exp());
                if h == T::zero() {
                    continue;
                }
                for (w, xv) in grid.weights.row_mut(u).iter_mut().zip(x) {
                    *w += h * (*xv - *w);
                }
            }
            step += 1;
        }
        let qe = grid.quantization_error_of(rows);
        grid.quantization_error.push(qe);
    }
    Ok(grid)
}

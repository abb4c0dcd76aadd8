use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{squared_distance, Matrix};
use crate::rng::seeded;
use crate::scalar::Real;

pub const TSNE_MAX_ROWS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TsneParams {
    pub perplexity: f64,
    pub iterations: usize,
    pub exaggeration: f64,
    pub exaggeration_iterations: usize,
    pub learning_rate: f64,
}

impl Default for TsneParams {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 500,
            exaggeration: 12.0,
            exaggeration_iterations: 100,
            learning_rate: 200.0,
        }
    }
}

/// Conditional input affinities: row `i` holds p(j | i).
#[derive(Debug, Clone)]
pub struct Affinities<T> {
    pub conditional: Matrix<T>,
    /// Precision `1 / (2σ²)` of each point's Gaussian kernel.
    pub betas: Vec<T>,
    /// Perplexity actually reached per point.
    pub perplexities: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct TsneOutput<T> {
    pub coords: Matrix<T>,
    pub affinities: Affinities<T>,
    pub kl_initial: T,
    pub kl_final: T,
}

fn pairwise<T: Real>(rows: &Matrix<T>) -> Matrix<T> {
    let n = rows.rows();
    let mut d = Matrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = squared_distance(rows.row(i), rows.row(j));
            d.row_mut(i)[j] = v;
            d.row_mut(j)[i] = v;
        }
    }
    d
}

/// Fills `p` with the kernel row for `beta` and returns its entropy in nats.
fn kernel_row<T: Real>(dist: &[T], i: usize, beta: T, p: &mut [T]) -> T {
    let shift = dist
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(_, d)| *d)
        .fold(T::infinity(), T::min);
    let mut sum = T::zero();
    let mut weighted = T::zero();
    for (j, (pj, dj)) in p.iter_mut().zip(dist).enumerate() {
        if j == i {
            *pj = T::zero();
            continue;
        }
        let e = *dj - shift;
        *pj = (-beta * e).exp();
        sum += *pj;
        weighted += *pj * e;
    }
    for pj in p.iter_mut() {
        *pj /= sum;
    }
    sum.ln() + beta * weighted / sum
}

/// Per-point bandwidth bisection so that each conditional distribution has
/// the requested perplexity.
pub fn affinities<T: Real>(rows: &Matrix<T>, perplexity: f64) -> Affinities<T> {
    let n = rows.rows();
    let dist = pairwise(rows);
    let target = T::of(perplexity.ln());
    let tol = T::of(1e-7);
    let mut conditional = Matrix::zeros(n, n);
    let mut betas = Vec::with_capacity(n);
    let mut perplexities = Vec::with_capacity(n);
    for i in 0..n {
        let d = dist.row(i);
        let mut beta = T::one();
        let (mut lo, mut hi) = (T::zero(), T::infinity());
        let mut p = vec![T::zero(); n];
        let mut h = kernel_row(d, i, beta, &mut p);
        for _ in 0..500 {
            let gap = h - target;
            if gap.abs() < tol {
                break;
            }
            if gap > T::zero() {
                lo = beta;
                beta = if hi.is_infinite() {
                    beta * T::of(2.0)
                } else {
                    (beta + hi) / T::of(2.0)
                };
            } else {
                hi = beta;
                beta = (beta + lo) / T::of(2.0);
            }
            h = kernel_row(d, i, beta, &mut p);
        }
        conditional.row_mut(i).copy_from_slice(&p);
        betas.push(beta);
        perplexities.push(h.exp());
    }
    Affinities {
        conditional,
        betas,
        perplexities,
    }
}

fn kl<T: Real>(p: &Matrix<T>, y: &Matrix<T>) -> T {
    let n = p.rows();
    let mut num = Matrix::zeros(n, n);
    let mut z = T::zero();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let v = T::one() / (T::one() + squared_distance(y.row(i), y.row(j)));
                num.row_mut(i)[j] = v;
                z += v;
            }
        }
    }
    let floor = T::of(1e-12);
    let mut total = T::zero();
    for i in 0..n {
        for j in 0..n {
            let pij = p.row(i)[j];
            if i != j && pij > T::zero() {
                total += pij * (pij / (num.row(i)[j] / z).max(floor)).ln();
            }
        }
    }
    total
}

/// Exact t-SNE into two dimensions.
pub fn tsne2<T: Real>(rows: &Matrix<T>, params: &TsneParams, seed: u64) -> Result<TsneOutput<T>> {
    let n = rows.rows();
    if n > TSNE_MAX_ROWS {
        return Err(Error::Config(format!(
            "exact t-SNE is limited to {TSNE_MAX_ROWS} rows, got {n}"
        )));
    }
    if !(params.perplexity > 0.0 && params.perplexity * 3.0 < n as f64) {
        return Err(Error::Config(format!(
            "perplexity {} must be positive and below rows/3 ({n} rows)",
            params.perplexity
        )));
    }
    let aff = affinities(rows, params.perplexity);
    let floor = T::of(1e-12);
    let denom = T::of_usize(2 * n);
    let mut p = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                p.row_mut(i)[j] =
                    ((aff.conditional.row(i)[j] + aff.conditional.row(j)[i]) / denom).max(floor);
            }
        }
    }

    let mut rng = seeded(seed);
    let init = Normal::new(0.0, 1e-4).expect("valid sd");
    let mut y = Matrix::from_vec(
        n,
        2,
        (0..2 * n).map(|_| T::of(init.sample(&mut rng))).collect(),
    )?;
    let kl_initial = kl(&p, &y);

    let lr = T::of(params.learning_rate);
    let mut update = Matrix::<T>::zeros(n, 2);
    let mut gains = Matrix::<T>::filled(n, 2, T::one());
    let mut num = Matrix::<T>::zeros(n, n);
    for it in 0..params.iterations {
        let exag = if it < params.exaggeration_iterations {
            T::of(params.exaggeration)
        } else {
            T::one()
        };
        let momentum = if it < 250 { T::of(0.5) } else { T::of(0.8) };
        let mut z = T::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                let v = T::one() / (T::one() + squared_distance(y.row(i), y.row(j)));
                num.row_mut(i)[j] = v;
                num.row_mut(j)[i] = v;
                z += v + v;
            }
        }
        for i in 0..n {
            let mut g = [T::zero(); 2];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let w = num.row(i)[j];
                let coeff = (exag * p.row(i)[j] - w / z) * w;
                for (c, gc) in g.iter_mut().enumerate() {
                    *gc += coeff * (y.row(i)[c] - y.row(j)[c]);
                }
            }
            for (c, gc) in g.iter().enumerate() {
                let grad = T::of(4.0) * *gc;
                let u = update.row(i)[c];
                let gain = &mut gains.row_mut(i)[c];
                *gain = if (grad > T::zero()) != (u > T::zero()) {
                    *gain + T::of(0.2)
                } else {
                    *gain * T::of(0.8)
                };
                *gain = gain.max(T::of(0.01));
                let step = momentum * u - lr * *gain * grad;
                update.row_mut(i)[c] = step;
            }
        }
        for i in 0..n {
            for c in 0..2 {
                y.row_mut(i)[c] += update.row(i)[c];
            }
        }
        let means = y.column_means();
        for i in 0..n {
            for c in 0..2 {
                y.row_mut(i)[c] -= means[c];
            }
        }
    }
    let kl_final = kl(&p, &y);
    Ok(TsneOutput {
        coords: y,
        affinities: aff,
        kl_initial,
        kl_final,
    })
}

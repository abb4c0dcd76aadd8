use rand::Rng;

use super::neighbors::{largest_remainder, nearest, neighbor_table};
use crate::error::{Error, Result};
use crate::matrix::{squared_distance, Matrix};
use crate::scalar::Real;
use crate::tabular::{blocks, VariableKind, VariableMeta};

/// Interpolation factor between a row and its neighbour.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gap {
    Uniform,
    Fixed(f64),
}

impl Gap {
    fn draw<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            Gap::Uniform => rng.gen(),
            Gap::Fixed(g) => g,
        }
    }
}

fn check_k(have: usize, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    if have <= k {
        return Err(Error::InsufficientClassRows {
            class: 1,
            have,
            need: k + 1,
        });
    }
    Ok(())
}

/// SMOTE draws from `pool` with the given neighbour table.
struct Interpolator<'a, T> {
    pool: &'a Matrix<T>,
    neighbors: Vec<Vec<usize>>,
    gap: Gap,
}

impl<T: Real> Interpolator<'_, T> {
    fn one<R: Rng + ?Sized>(&self, base: usize, rng: &mut R) -> Vec<T> {
        let nn = &self.neighbors[base];
        let j = nn[rng.gen_range(0..nn.len())];
        let lam = T::of(self.gap.draw(rng));
        self.pool
            .row(base)
            .iter()
            .zip(self.pool.row(j))
            .map(|(&x, &y)| x + lam * (y - x))
            .collect()
    }
}

/// Plain SMOTE: `n` rows, each on the segment between a random minority row
/// and one of its `k` nearest minority neighbours.
pub fn smote<T: Real, R: Rng + ?Sized>(
    minority: &Matrix<T>,
    n: usize,
    k: usize,
    rng: &mut R,
) -> Result<Matrix<T>> {
    smote_with_gap(minority, n, k, Gap::Uniform, rng)
}

pub fn smote_with_gap<T: Real, R: Rng + ?Sized>(
    minority: &Matrix<T>,
    n: usize,
    k: usize,
    gap: Gap,
    rng: &mut R,
) -> Result<Matrix<T>> {
    let mut out = Matrix::zeros(0, minority.cols());
    if n == 0 {
        return Ok(out);
    }
    check_k(minority.rows(), k)?;
    let it = Interpolator {
        pool: minority,
        neighbors: neighbor_table(minority, k, squared_distance),
        gap,
    };
    for _ in 0..n {
        let base = rng.gen_range(0..minority.rows());
        out.push_row(&it.one(base, rng));
    }
    Ok(out)
}

/// Majority count among the `m` nearest rows of the combined set, for every
/// minority row.
fn majority_counts<T: Real>(minority: &Matrix<T>, majority: &Matrix<T>, m: usize) -> Vec<usize> {
    let all = Matrix::vconcat(&[minority, majority]);
    let n_min = minority.rows();
    (0..n_min)
        .map(|i| {
            nearest(&all, all.row(i), m, Some(i), squared_distance)
                .iter()
                .filter(|&&j| j >= n_min)
                .count()
        })
        .collect()
}

/// Borderline-SMOTE: interpolates only from minority rows whose
/// `m`-neighbourhood is at least half but not entirely majority.
pub fn borderline_smote<T: Real, R: Rng + ?Sized>(
    minority: &Matrix<T>,
    majority: &Matrix<T>,
    n: usize,
    k: usize,
    m: usize,
    rng: &mut R,
) -> Result<Matrix<T>> {
    let mut out = Matrix::zeros(0, minority.cols());
    if n == 0 {
        return Ok(out);
    }
    check_k(minority.rows(), k)?;
    let m = m.min(minority.rows() + majority.rows() - 1);
    let danger: Vec<usize> = majority_counts(minority, majority, m)
        .into_iter()
        .enumerate()
        .filter(|&(_, c)| 2 * c >= m && c < m)
        .map(|(i, _)| i)
        .collect();
    if danger.is_empty() {
        return Err(Error::EmptyGenerationRegion(
            "no minority row lies on the class border".into(),
        ));
    }
    let it = Interpolator {
        pool: minority,
        neighbors: neighbor_table(minority, k, squared_distance),
        gap: Gap::Uniform,
    };
    for _ in 0..n {
        let base = danger[rng.gen_range(0..danger.len())];
        out.push_row(&it.one(base, rng));
    }
    Ok(out)
}

/// Per-minority-row quotas for ADASYN: proportional to the majority share of
/// each row's `k`-neighbourhood among all rows, summing to `n`.
pub fn adasyn_quotas<T: Real>(
    minority: &Matrix<T>,
    majority: &Matrix<T>,
    n: usize,
    k: usize,
) -> Result<Vec<usize>> {
    let k_all = k.min(minority.rows() + majority.rows() - 1);
    let ratios: Vec<f64> = majority_counts(minority, majority, k_all)
        .into_iter()
        .map(|c| c as f64 / k_all as f64)
        .collect();
    if ratios.iter().all(|&r| r == 0.0) {
        return Err(Error::EmptyGenerationRegion(
            "no minority row has a majority neighbour".into(),
        ));
    }
    Ok(largest_remainder(&ratios, n))
}

pub fn adasyn<T: Real, R: Rng + ?Sized>(
    minority: &Matrix<T>,
    majority: &Matrix<T>,
    n: usize,
    k: usize,
    rng: &mut R,
) -> Result<Matrix<T>> {
    let mut out = Matrix::zeros(0, minority.cols());
    if n == 0 {
        return Ok(out);
    }
    check_k(minority.rows(), k)?;
    let quotas = adasyn_quotas(minority, majority, n, k)?;
    let it = Interpolator {
        pool: minority,
        neighbors: neighbor_table(minority, k, squared_distance),
        gap: Gap::Uniform,
    };
    for (base, &q) in quotas.iter().enumerate() {
        for _ in 0..q {
            out.push_row(&it.one(base, rng));
        }
    }
    Ok(out)
}

/// Distance used by SMOTE-NC: squared Euclidean over numerical columns plus
/// `penalty²` for every non-numerical variable that differs.
pub struct MixedDistance {
    numerical: Vec<usize>,
    nominal: Vec<(usize, usize)>,
    penalty: f64,
}

impl MixedDistance {
    pub fn new<T: Real>(minority: &Matrix<T>, meta: &[VariableMeta]) -> Self {
        let mut numerical = Vec::new();
        let mut nominal = Vec::new();
        for (v, b) in meta.iter().zip(blocks(meta)) {
            match v.kind {
                VariableKind::Numerical => numerical.push(b.0),
                _ => nominal.push(b),
            }
        }
        let mut sds: Vec<f64> = numerical.iter().map(|&c| column_sd(minority, c)).collect();
        sds.sort_by(|a, b| a.total_cmp(b));
        let median = match sds.len() {
            0 => 0.0,
            l if l % 2 == 1 => sds[l / 2],
            l => 0.5 * (sds[l / 2 - 1] + sds[l / 2]),
        };
        let penalty = if median > 0.0 { median } else { 1.0 };
        Self {
            numerical,
            nominal,
            penalty,
        }
    }

    pub fn penalty(&self) -> f64 {
        self.penalty
    }

    pub fn distance<T: Real>(&self, a: &[T], b: &[T]) -> T {
        let mut d = T::zero();
        for &c in &self.numerical {
            d += (a[c] - b[c]) * (a[c] - b[c]);
        }
        let p2 = T::of(self.penalty * self.penalty);
        for &(s, w) in &self.nominal {
            if a[s..s + w] != b[s..s + w] {
                d += p2;
            }
        }
        d
    }
}

fn column_sd<T: Real>(m: &Matrix<T>, c: usize) -> f64 {
    let n = m.rows() as f64;
    if m.rows() < 2 {
        return 0.0;
    }
    let mean = m.iter_rows().map(|r| r[c].to_f64_lossy()).sum::<f64>() / n;
    let ss: f64 = m
        .iter_rows()
        .map(|r| (r[c].to_f64_lossy() - mean).powi(2))
        .sum();
    (ss / (n - 1.0)).sqrt()
}

/// Most frequent block among `rows` (lowest first occurrence in column order
/// on ties).
fn mode_block<T: Real>(pool: &Matrix<T>, rows: &[usize], start: usize, width: usize) -> Vec<T> {
    if width == 1 {
        let ones = rows
            .iter()
            .filter(|&&i| pool.row(i)[start] >= T::of(0.5))
            .count();
        return vec![if 2 * ones > rows.len() {
            T::one()
        } else {
            T::zero()
        }];
    }
    let mut counts = vec![0usize; width];
    for &i in rows {
        let block = &pool.row(i)[start..start + width];
        if let Some(j) = block.iter().position(|&x| x == T::one()) {
            counts[j] += 1;
        }
    }
    let best = (0..width).fold(0, |b, j| if counts[j] > counts[b] { j } else { b });
    (0..width)
        .map(|j| if j == best { T::one() } else { T::zero() })
        .collect()
}

/// SMOTE-NC: numerical columns interpolated as in SMOTE, every categorical or
/// binary variable set to its mode among the base row's `k` neighbours.
pub fn smote_nc<T: Real, R: Rng + ?Sized>(
    minority: &Matrix<T>,
    meta: &[VariableMeta],
    n: usize,
    k: usize,
    rng: &mut R,
) -> Result<Matrix<T>> {
    let mut out = Matrix::zeros(0, minority.cols());
    if n == 0 {
        return Ok(out);
    }
    check_k(minority.rows(), k)?;
    let dist = MixedDistance::new(minority, meta);
    let neighbors: Vec<Vec<usize>> = (0..minority.rows())
        .map(|i| {
            nearest(minority, minority.row(i), k, Some(i), |a, b| {
                dist.distance(a, b)
            })
        })
        .collect();
    for _ in 0..n {
        let base = rng.gen_range(0..minority.rows());
        let nn = &neighbors[base];
        let j = nn[rng.gen_range(0..nn.len())];
        let lam = T::of(rng.gen::<f64>());
        let (x, y) = (minority.row(base), minority.row(j));
        let mut row = x.to_vec();
        for &c in &dist.numerical {
            row[c] = x[c] + lam * (y[c] - x[c]);
        }
        for &(s, w) in &dist.nominal {
            row[s..s + w].copy_from_slice(&mode_block(minority, nn, s, w));
        }
        out.push_row(&row);
    }
    Ok(out)
}

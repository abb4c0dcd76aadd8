use rand::Rng;

use super::neighbors::largest_remainder;
use super::smote::smote;
use crate::error::{Error, Result};
use crate::matrix::{squared_distance, Matrix};
use crate::scalar::Real;

const MAX_ITERATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering<T> {
    pub centers: Matrix<T>,
    pub assignments: Vec<usize>,
}

fn closest<T: Real>(centers: &Matrix<T>, row: &[T]) -> (usize, T) {
    let mut best = (0, squared_distance(centers.row(0), row));
    for c in 1..centers.rows() {
        let d = squared_distance(centers.row(c), row);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Lloyd's k-means with k-means++ seeding. Empty clusters keep their centre.
pub fn kmeans<T: Real, R: Rng + ?Sized>(
    data: &Matrix<T>,
    k: usize,
    rng: &mut R,
) -> Result<Clustering<T>> {
    if data.rows() == 0 || k == 0 {
        return Err(Error::InsufficientData(
            "k-means needs rows and at least one cluster".into(),
        ));
    }
    let k = k.min(data.rows());
    let mut centers = Matrix::zeros(0, data.cols());
    centers.push_row(data.row(rng.gen_range(0..data.rows())));
    while centers.rows() < k {
        let d2: Vec<f64> = data
            .iter_rows()
            .map(|r| closest(&centers, r).1.to_f64_lossy())
            .collect();
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.gen::<f64>() * total;
            let mut pick = d2.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                if u < d {
                    pick = i;
                    break;
                }
                u -= d;
            }
            pick
        } else {
            rng.gen_range(0..data.rows())
        };
        centers.push_row(data.row(pick));
    }
    let mut assignments = vec![usize::MAX; data.rows()];
    for _ in 0..MAX_ITERATIONS {
        let next: Vec<usize> = data.iter_rows().map(|r| closest(&centers, r).0).collect();
        if next == assignments {
            break;
        }
        assignments = next;
        let mut sums = Matrix::<T>::zeros(k, data.cols());
        let mut counts = vec![0usize; k];
        for (r, &a) in data.iter_rows().zip(&assignments) {
            counts[a] += 1;
            for (s, &x) in sums.row_mut(a).iter_mut().zip(r) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                let n = T::of_usize(counts[c]);
                let (src, dst) = (sums.row(c).to_vec(), centers.row_mut(c));
                for (d, s) in dst.iter_mut().zip(src) {
                    *d = s / n;
                }
            }
        }
    }
    Ok(Clustering {
        centers,
        assignments,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansSmoteParams {
    pub clusters: usize,
    /// Minimum minority fraction a cluster must exceed to be oversampled.
    pub threshold: f64,
    pub density_exponent: f64,
    pub k: usize,
}

impl Default for KMeansSmoteParams {
    fn default() -> Self {
        Self {
            clusters: 8,
            threshold: 0.5,
            density_exponent: 2.0,
            k: 5,
        }
    }
}

/// Minority rows of each eligible cluster and its share of the synthetic rows.
pub fn kmeans_smote_plan<T: Real, R: Rng + ?Sized>(
    minority: &Matrix<T>,
    majority: &Matrix<T>,
    params: &KMeansSmoteParams,
    rng: &mut R,
) -> Result<Vec<(Vec<usize>, f64)>> {
    let all = Matrix::vconcat(&[minority, majority]);
    let cl = kmeans(&all, params.clusters, rng)?;
    let n_min = minority.rows();
    let mut plan = Vec::new();
    for c in 0..cl.centers.rows() {
        let members: Vec<usize> = (0..all.rows())
            .filter(|&i| cl.assignments[i] == c)
            .collect();
        let mins: Vec<usize> = members.iter().copied().filter(|&i| i < n_min).collect();
        if members.is_empty()
            || mins.len() < 2
            || (mins.len() as f64 / members.len() as f64) <= params.threshold
        {
            continue;
        }
        let mut total = 0.0;
        let mut pairs = 0usize;
        for (a, &i) in mins.iter().enumerate() {
            for &j in &mins[a + 1..] {
                total += squared_distance(minority.row(i), minority.row(j))
                    .to_f64_lossy()
                    .sqrt();
                pairs += 1;
            }
        }
        let mean = total / pairs as f64;
        // sparsity = 1 / density, density = count / mean_distance^exponent
        let sparsity = mean.powf(params.density_exponent) / mins.len() as f64;
        plan.push((mins, sparsity));
    }
    if plan.is_empty() {
        return Err(Error::EmptyGenerationRegion(format!(
            "no cluster has a minority fraction above {}",
            params.threshold
        )));
    }
    let total: f64 = plan.iter().map(|p| p.1).sum();
    let uniform = 1.0 / plan.len() as f64;
    for p in &mut plan {
        p.1 = if total > 0.0 { p.1 / total } else { uniform };
    }
    Ok(plan)
}

/// K-means SMOTE: clusters all rows, then runs SMOTE inside clusters with a
/// high enough minority fraction, giving sparser clusters more rows.
pub fn kmeans_smote<T: Real, R: Rng + ?Sized>(
    minority: &Matrix<T>,
    majority: &Matrix<T>,
    n: usize,
    params: &KMeansSmoteParams,
    rng: &mut R,
) -> Result<Matrix<T>> {
    let mut out = Matrix::zeros(0, minority.cols());
    if n == 0 {
        return Ok(out);
    }
    let plan = kmeans_smote_plan(minority, majority, params, rng)?;
    let weights: Vec<f64> = plan.iter().map(|p| p.1).collect();
    for ((rows, _), q) in plan.iter().zip(largest_remainder(&weights, n)) {
        if q == 0 {
            continue;
        }
        let pool = minority.select_rows(rows);
        let part = smote(&pool, q, params.k.min(rows.len() - 1), rng)?;
        out = Matrix::vconcat(&[&out, &part]);
    }
    Ok(out)
}

//! Synthetic encoded datasets with known structure.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{Dataset, VariableMeta};
use crate::matrix::Matrix;
use crate::rng::seeded;

/// Targets of [`mixed_marginals`].
pub const MIXED_BINARY_RATE: f64 = 0.7;
pub const MIXED_NUMERICAL_MEANS: [f64; 2] = [0.3, 0.65];

/// Rows with a uniform 3-way categorical, a binary with rate 0.7 and two
/// numericals (Gaussian, sd 0.1, clamped to [0,1]) with means 0.3 and 0.65.
/// Labels alternate, so every row is usable by every sampling view.
pub fn mixed_marginals(n: usize, seed: u64) -> Dataset<f64> {
    let mut rng = seeded(seed);
    let meta = vec![
        VariableMeta::categorical("colour", vec!["red".into(), "green".into(), "blue".into()]),
        VariableMeta::binary("flag"),
        VariableMeta::numerical("a", 0.0, 1.0),
        VariableMeta::numerical("b", 0.0, 1.0),
    ];
    let mut x = Matrix::zeros(n, 6);
    for i in 0..n {
        let r = x.row_mut(i);
        r[rng.gen_range(0..3)] = 1.0;
        r[3] = f64::from(u8::from(rng.gen::<f64>() < MIXED_BINARY_RATE));
        for (j, m) in MIXED_NUMERICAL_MEANS.iter().enumerate() {
            let d = Normal::new(*m, 0.1).expect("valid sd");
            r[4 + j] = d.sample(&mut rng).clamp(0.0, 1.0);
        }
    }
    let labels = (0..n).map(|i| u8::from(i % 2 == 1)).collect();
    Dataset::new("mixed", x, labels, meta).expect("consistent construction")
}

/// Two overlapping Gaussian clusters in `dims` numerical dimensions plus a
/// weakly informative binary; a `minority_fraction` of rows is positive.
pub fn overlapping_clusters(
    n: usize,
    dims: usize,
    minority_fraction: f64,
    separation: f64,
    seed: u64,
) -> Dataset<f64> {
    let mut rng = seeded(seed);
    let n_pos = ((n as f64) * minority_fraction).round() as usize;
    let noise = Normal::new(0.0, 0.12).expect("valid sd");
    let mut meta: Vec<VariableMeta> = (0..dims)
        .map(|j| VariableMeta::numerical(format!("x{j}"), 0.0, 1.0))
        .collect();
    meta.push(VariableMeta::binary("hint"));
    let mut x = Matrix::zeros(n, dims + 1);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let pos = i < n_pos;
        let centre = if pos {
            0.5 + separation / 2.0
        } else {
            0.5 - separation / 2.0
        };
        let r = x.row_mut(i);
        for v in r.iter_mut().take(dims) {
            *v = (centre + noise.sample(&mut rng)).clamp(0.0, 1.0);
        }
        r[dims] = f64::from(u8::from(rng.gen::<f64>() < if pos { 0.6 } else { 0.4 }));
        labels.push(u8::from(pos));
    }
    Dataset::new("clusters", x, labels, meta).expect("consistent construction")
}

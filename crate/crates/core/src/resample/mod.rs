//! Classic resampling: random under/oversampling and the SMOTE family.
//!
//! Ratios follow the imbalance-ratio convention: `usr` is the minority to
//! majority ratio reached by undersampling, `osr` the ratio reached after
//! appending synthetic minority rows. Class 1 is the minority class.

mod kmeans;
mod neighbors;
mod smote;

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use kmeans::{kmeans, kmeans_smote, kmeans_smote_plan, Clustering, KMeansSmoteParams};
pub use neighbors::{largest_remainder, nearest, neighbor_table};
pub use smote::{
    adasyn, adasyn_quotas, borderline_smote, smote, smote_nc, smote_with_gap, Gap, MixedDistance,
};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::{round_half_up, Real};
use crate::tabular::{Dataset, VariableMeta};

/// Relative slack when comparing a requested ratio against the data's own.
const RATIO_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    RandomUnder,
    RandomOver,
    Smote,
    SmoteNc,
    BorderlineSmote,
    Adasyn,
    KmeansSmote,
}

impl Method {
    pub const OVERSAMPLERS: [Method; 6] = [
        Method::RandomOver,
        Method::Smote,
        Method::SmoteNc,
        Method::BorderlineSmote,
        Method::Adasyn,
        Method::KmeansSmote,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Method::RandomUnder => "random_under",
            Method::RandomOver => "random_over",
            Method::Smote => "smote",
            Method::SmoteNc => "smote_nc",
            Method::BorderlineSmote => "borderline_smote",
            Method::Adasyn => "adasyn",
            Method::KmeansSmote => "kmeans_smote",
        }
    }

    /// Name used in report tables.
    pub fn table_name(self) -> &'static str {
        match self {
            Method::RandomUnder => "RandomUnderSampler",
            Method::RandomOver => "RandomOverSampler",
            Method::Smote => "SMOTE",
            Method::SmoteNc => "SMOTENC",
            Method::BorderlineSmote => "BorderlineSMOTE",
            Method::Adasyn => "ADASYN",
            Method::KmeansSmote => "KMeansSMOTE",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Method::RandomUnder]
            .into_iter()
            .chain(Method::OVERSAMPLERS)
            .find(|m| m.id() == s)
            .ok_or_else(|| Error::Config(format!("unknown resampling method `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassicParams {
    pub k: usize,
    pub m: usize,
    pub clusters: usize,
    pub cluster_threshold: f64,
    pub density_exponent: f64,
}

impl Default for ClassicParams {
    fn default() -> Self {
        Self {
            k: 5,
            m: 10,
            clusters: 8,
            cluster_threshold: 0.5,
            density_exponent: 2.0,
        }
    }
}

/// `(majority, minority)` counts.
fn counts(labels: &[u8]) -> (usize, usize) {
    crate::tabular::class_counts(labels)
}

fn imbalance(maj: usize, min: usize) -> Result<f64> {
    if maj == 0 || min == 0 {
        return Err(Error::DegenerateLabels);
    }
    Ok(min as f64 / maj as f64)
}

/// Majority rows kept for a target `usr`.
pub fn undersample_target(minority: usize, usr: f64) -> usize {
    round_half_up(minority as f64 / usr).max(0) as usize
}

fn check_ratio(value: f64, lower: f64, what: &str) -> Result<()> {
    if !value.is_finite() || value > 1.0 + RATIO_SLACK {
        return Err(Error::Ratio {
            value,
            reason: format!("{what} must be at most 1"),
        });
    }
    if value < lower * (1.0 - RATIO_SLACK) {
        return Err(Error::Ratio {
            value,
            reason: format!("{what} is below the current ratio {lower}"),
        });
    }
    Ok(())
}

/// Removes majority rows uniformly without replacement until the ratio is
/// `usr`. Returns the reduced dataset (rows in original order) and the kept
/// row indices.
pub fn random_undersample<T: Real, R: Rng + ?Sized>(
    data: &Dataset<T>,
    usr: f64,
    rng: &mut R,
) -> Result<(Dataset<T>, Vec<usize>)> {
    let (maj, min) = counts(&data.labels);
    let ir = imbalance(maj, min)?;
    check_ratio(usr, ir, "usr")?;
    let target = undersample_target(min, usr).min(maj);
    let majority = data.indices_of(0);
    let mut keep: Vec<usize> = if target == maj {
        majority
    } else {
        sample(rng, maj, target)
            .into_iter()
            .map(|i| majority[i])
            .collect()
    };
    keep.extend(data.indices_of(1));
    keep.sort_unstable();
    Ok((data.subset(&keep), keep))
}

/// Synthetic minority rows needed to reach `osr`.
pub fn required_synthetic(majority: usize, minority: usize, osr: f64) -> usize {
    (round_half_up(osr * majority as f64) - minority as i64).max(0) as usize
}

/// `n` rows drawn uniformly with replacement.
pub fn random_oversample<T: Real, R: Rng + ?Sized>(
    minority: &Matrix<T>,
    n: usize,
    rng: &mut R,
) -> Result<Matrix<T>> {
    let mut out = Matrix::zeros(0, minority.cols());
    if n == 0 {
        return Ok(out);
    }
    if minority.rows() == 0 {
        return Err(Error::InsufficientClassRows {
            class: 1,
            have: 0,
            need: 1,
        });
    }
    for _ in 0..n {
        out.push_row(minority.row(rng.gen_range(0..minority.rows())));
    }
    Ok(out)
}

/// `n` synthetic minority rows from a classic oversampler. Borderline,
/// ADASYN and k-means SMOTE fall back to plain SMOTE when they find no region
/// to generate in.
pub fn oversample<T: Real, R: Rng + ?Sized>(
    method: Method,
    params: &ClassicParams,
    data: &Dataset<T>,
    n: usize,
    rng: &mut R,
) -> Result<Matrix<T>> {
    let minority = data.features.select_rows(&data.indices_of(1));
    let majority = data.features.select_rows(&data.indices_of(0));
    oversample_split(method, params, &minority, &majority, &data.meta, n, rng)
}

pub fn oversample_split<T: Real, R: Rng + ?Sized>(
    method: Method,
    params: &ClassicParams,
    minority: &Matrix<T>,
    majority: &Matrix<T>,
    meta: &[VariableMeta],
    n: usize,
    rng: &mut R,
) -> Result<Matrix<T>> {
    let result = match method {
        Method::RandomUnder => {
            return Err(Error::Config("random_under is not an oversampler".into()))
        }
        Method::RandomOver => return random_oversample(minority, n, rng),
        Method::Smote => return smote(minority, n, params.k, rng),
        Method::SmoteNc => return smote_nc(minority, meta, n, params.k, rng),
        Method::BorderlineSmote => borderline_smote(minority, majority, n, params.k, params.m, rng),
        Method::Adasyn => adasyn(minority, majority, n, params.k, rng),
        Method::KmeansSmote => {
            let kp = KMeansSmoteParams {
                clusters: params.clusters,
                threshold: params.cluster_threshold,
                density_exponent: params.density_exponent,
                k: params.k,
            };
            kmeans_smote(minority, majority, n, &kp, rng)
        }
    };
    match result {
        Err(Error::EmptyGenerationRegion(why)) => {
            log::warn!("{method}: {why}; falling back to SMOTE");
            smote(minority, n, params.k, rng)
        }
        other => other,
    }
}

/// Appends `rows` to `data` as minority rows.
pub fn append_minority<T: Real>(data: &Dataset<T>, rows: &Matrix<T>) -> Result<Dataset<T>> {
    let features = Matrix::vconcat(&[&data.features, rows]);
    let mut labels = data.labels.clone();
    labels.extend(std::iter::repeat(1).take(rows.rows()));
    Dataset::new(data.name.clone(), features, labels, data.meta.clone())
}

/// Undersampling to `usr`, then oversampling with `method` to `osr`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResamplePlan {
    pub usr: f64,
    pub osr: f64,
    pub method: Method,
    pub params: ClassicParams,
}

impl ResamplePlan {
    pub fn new(usr: f64, osr: f64, method: Method) -> Self {
        Self {
            usr,
            osr,
            method,
            params: ClassicParams::default(),
        }
    }

    /// Applies the plan. The undersampling and oversampling streams are
    /// separate, so the undersampled set depends only on `under_rng`.
    pub fn apply<T: Real, R1: Rng + ?Sized, R2: Rng + ?Sized>(
        &self,
        data: &Dataset<T>,
        under_rng: &mut R1,
        over_rng: &mut R2,
    ) -> Result<Dataset<T>> {
        check_ratio(self.osr, self.usr, "osr")?;
        let (under, _) = random_undersample(data, self.usr, under_rng)?;
        let (maj, min) = counts(&under.labels);
        let n = required_synthetic(maj, min, self.osr);
        if n == 0 || self.method == Method::RandomUnder {
            return Ok(under);
        }
        let synth = oversample(self.method, &self.params, &under, n, over_rng)?;
        append_minority(&under, &synth)
    }
}

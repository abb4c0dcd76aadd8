//! Tabular datasets in their encoded form.
//!
//! Each variable maps onto a block of columns: a categorical variable becomes
//! a one-hot block, a binary variable a single 0/1 column, and a numerical
//! variable a single column min-max scaled into `[0, 1]`. The per-variable
//! [`VariableMeta`] list drives encoding, reconstruction losses, model output
//! heads and SMOTE-NC.

mod folds;
mod load;
pub mod synthetic;

pub use folds::{make_folds, FoldSplit, DEFAULT_VALIDATION_FRACTION};
pub use load::{
    encoded_header, load_encoded, load_raw, save_encoded, DatasetMetadata, EncodedMetadata,
    VariableDecl, ENCODED_CSV, ENCODED_META,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariableKind {
    Categorical,
    Binary,
    Numerical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableMeta {
    pub name: String,
    pub kind: VariableKind,
    pub width: usize,
    /// Category labels in column order (categorical), or the labels mapped to
    /// 0 and 1 (binary).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale_max: Option<f64>,
}

impl VariableMeta {
    pub fn categorical(name: impl Into<String>, categories: Vec<String>) -> Self {
        Self {
            name: name.into(),
            kind: VariableKind::Categorical,
            width: categories.len(),
            categories,
            scale_min: None,
            scale_max: None,
        }
    }

    pub fn binary(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: VariableKind::Binary,
            width: 1,
            categories: vec!["0".into(), "1".into()],
            scale_min: None,
            scale_max: None,
        }
    }

    pub fn numerical(name: impl Into<String>, min: f64, max: f64) -> Self {
        Self {
            name: name.into(),
            kind: VariableKind::Numerical,
            width: 1,
            categories: Vec::new(),
            scale_min: Some(min),
            scale_max: Some(max),
        }
    }

    /// Anonymous categorical block of the given width, categories `c0..`.
    pub fn categorical_n(name: impl Into<String>, width: usize) -> Self {
        Self::categorical(name, (0..width).map(|i| format!("c{i}")).collect())
    }

    pub fn check(&self) -> Result<()> {
        match self.kind {
            VariableKind::Categorical => {
                if self.width != self.categories.len() {
                    return Err(Error::Schema(format!(
                        "categorical `{}` width {} differs from {} categories",
                        self.name,
                        self.width,
                        self.categories.len()
                    )));
                }
                if self.width < 3 {
                    return Err(Error::Schema(format!(
                        "categorical `{}` has {} categories; two-valued variables must be declared binary",
                        self.name, self.width
                    )));
                }
            }
            VariableKind::Binary | VariableKind::Numerical => {
                if self.width != 1 {
                    return Err(Error::Schema(format!("`{}` must have width 1", self.name)));
                }
            }
        }
        Ok(())
    }
}

/// Column span `(start, width)` of every variable, in metadata order.
pub fn blocks(meta: &[VariableMeta]) -> Vec<(usize, usize)> {
    let mut start = 0;
    meta.iter()
        .map(|v| {
            let b = (start, v.width);
            start += v.width;
            b
        })
        .collect()
}

pub fn total_width(meta: &[VariableMeta]) -> usize {
    meta.iter().map(|v| v.width).sum()
}

/// Metadata extended with the class label as a trailing binary variable.
pub fn with_label_variable(meta: &[VariableMeta]) -> Vec<VariableMeta> {
    let mut m = meta.to_vec();
    m.push(VariableMeta::binary("__label__"));
    m
}

/// Encoded dataset: features in `[0, 1]`, binary labels (1 = minority/positive).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Dataset<T> {
    pub name: String,
    pub features: Matrix<T>,
    pub labels: Vec<u8>,
    pub meta: Vec<VariableMeta>,
}

impl<T: Real> Dataset<T> {
    pub fn new(
        name: impl Into<String>,
        features: Matrix<T>,
        labels: Vec<u8>,
        meta: Vec<VariableMeta>,
    ) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::Shape(format!(
                "{} rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if total_width(&meta) != features.cols() {
            return Err(Error::Schema(format!(
                "metadata widths sum to {} but data has {} columns",
                total_width(&meta),
                features.cols()
            )));
        }
        if let Some(l) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::Schema(format!("label {l} is not binary")));
        }
        Ok(Self {
            name: name.into(),
            features,
            labels,
            meta,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn width(&self) -> usize {
        self.features.cols()
    }

    /// `(negatives, positives)`.
    pub fn class_counts(&self) -> (usize, usize) {
        class_counts(&self.labels)
    }

    pub fn indices_of(&self, class: u8) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == class)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            name: self.name.clone(),
            features: self.features.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            meta: self.meta.clone(),
        }
    }

    pub fn ir(&self) -> Result<f64> {
        compute_ir(&self.labels)
    }
}

pub fn class_counts(labels: &[u8]) -> (usize, usize) {
    let pos = labels.iter().filter(|&&l| l == 1).count();
    (labels.len() - pos, pos)
}

/// Imbalance ratio: smaller class count over larger class count.
pub fn compute_ir(labels: &[u8]) -> Result<f64> {
    let (neg, pos) = class_counts(labels);
    if neg == 0 || pos == 0 {
        return Err(Error::DegenerateLabels);
    }
    Ok(neg.min(pos) as f64 / neg.max(pos) as f64)
}

/// Maps a soft row onto a valid encoding: one-hot at the argmax of each
/// categorical block (lowest index on ties), binaries thresholded at 0.5,
/// numericals clamped to `[0, 1]`.
pub fn discretize<T: Real>(row: &[T], meta: &[VariableMeta]) -> Vec<T> {
    assert_eq!(
        row.len(),
        total_width(meta),
        "row width must equal metadata width"
    );
    let half = T::of(0.5);
    let mut out = Vec::with_capacity(row.len());
    for (v, (start, width)) in meta.iter().zip(blocks(meta)) {
        let block = &row[start..start + width];
        match v.kind {
            VariableKind::Categorical => {
                let mut best = 0;
                for (j, &x) in block.iter().enumerate() {
                    if x > block[best] {
                        best = j;
                    }
                }
                out.extend((0..width).map(|j| if j == best { T::one() } else { T::zero() }));
            }
            VariableKind::Binary => out.push(if block[0] >= half {
                T::one()
            } else {
                T::zero()
            }),
            VariableKind::Numerical => out.push(block[0].max(T::zero()).min(T::one())),
        }
    }
    out
}

pub fn discretize_rows<T: Real>(rows: &Matrix<T>, meta: &[VariableMeta]) -> Matrix<T> {
    let mut out = Matrix::zeros(0, rows.cols());
    for r in rows.iter_rows() {
        out.push_row(&discretize(r, meta));
    }
    out
}

/// Checks encoding invariants on every row: one-hot categorical blocks,
/// binary columns in {0,1}, numerical columns in `[0,1]`.
pub fn validate_encoding<T: Real>(rows: &Matrix<T>, meta: &[VariableMeta]) -> Result<()> {
    if rows.cols() != total_width(meta) {
        return Err(Error::Shape(format!(
            "rows have {} columns, metadata {}",
            rows.cols(),
            total_width(meta)
        )));
    }
    let bl = blocks(meta);
    for (i, r) in rows.iter_rows().enumerate() {
        for (v, &(start, width)) in meta.iter().zip(&bl) {
            let block = &r[start..start + width];
            let bad = |msg: &str| Error::Decode {
                row: i,
                column: v.name.clone(),
                message: msg.to_string(),
            };
            match v.kind {
                VariableKind::Categorical => {
                    if block.iter().any(|&x| x != T::zero() && x != T::one()) {
                        return Err(bad("categorical block is not binary"));
                    }
                    if block.iter().filter(|&&x| x == T::one()).count() != 1 {
                        return Err(bad("categorical block is not one-hot"));
                    }
                }
                VariableKind::Binary => {
                    if block[0] != T::zero() && block[0] != T::one() {
                        return Err(bad("binary value outside {0,1}"));
                    }
                }
                VariableKind::Numerical => {
                    if !(block[0] >= T::zero() && block[0] <= T::one()) {
                        return Err(bad("numerical value outside [0,1]"));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Decodes an encoded row back into raw string values, one per variable.
pub fn decode_row<T: Real>(row: &[T], meta: &[VariableMeta]) -> Vec<String> {
    let row = discretize(row, meta);
    meta.iter()
        .zip(blocks(meta))
        .map(|(v, (start, width))| match v.kind {
            VariableKind::Categorical => {
                let j = (0..width)
                    .find(|&j| row[start + j] == T::one())
                    .unwrap_or(0);
                v.categories[j].clone()
            }
            VariableKind::Binary => {
                let j = usize::from(row[start] == T::one());
                v.categories
                    .get(j)
                    .cloned()
                    .unwrap_or_else(|| j.to_string())
            }
            VariableKind::Numerical => {
                let (lo, hi) = (v.scale_min.unwrap_or(0.0), v.scale_max.unwrap_or(1.0));
                let x = row[start].to_f64_lossy() * (hi - lo) + lo;
                format!("{x}")
            }
        })
        .collect()
}

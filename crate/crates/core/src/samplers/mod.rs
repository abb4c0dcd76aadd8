//! Class-targeted sampling from trained generators.
//!
//! A generator is fit on one of three views of the training rows and is
//! sampled accordingly:
//!
//! * minority: fit on minority rows only, every draw is a minority row;
//! * conditional: fit on all rows with the class as a condition input;
//! * rejection: fit on all rows with the class as a trailing binary variable,
//!   then rows of the wrong class are discarded until enough are kept or the
//!   draw budget runs out.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::models::{TrainedGenerator, TrainingSet};
use crate::tabular::{
    discretize, total_width, validate_encoding, with_label_variable, Dataset, VariableMeta,
};

pub use crate::models::SamplingKind;

/// Row draws allowed before rejection sampling gives up.
pub const DEFAULT_DRAW_LIMIT: usize = 10_000;
/// Rows requested from the generator per rejection round.
pub const DEFAULT_DRAW_BATCH: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingStrategy {
    pub kind: SamplingKind,
    pub draw_limit: usize,
    pub batch: usize,
}

impl SamplingStrategy {
    pub fn new(kind: SamplingKind) -> Self {
        Self {
            kind,
            draw_limit: DEFAULT_DRAW_LIMIT,
            batch: DEFAULT_DRAW_BATCH,
        }
    }
}

/// Anything that emits raw (soft) rows in the space of `meta()`.
pub trait RowGenerator {
    fn meta(&self) -> &[VariableMeta];
    fn strategy(&self) -> SamplingKind;
    fn generate_rows(
        &self,
        n: usize,
        rng: &mut dyn rand::RngCore,
        condition: Option<u8>,
    ) -> Result<Matrix<f64>>;
}

impl RowGenerator for TrainedGenerator {
    fn meta(&self) -> &[VariableMeta] {
        &self.meta
    }

    fn strategy(&self) -> SamplingKind {
        self.spec.strategy()
    }

    fn generate_rows(
        &self,
        n: usize,
        rng: &mut dyn rand::RngCore,
        condition: Option<u8>,
    ) -> Result<Matrix<f64>> {
        self.generate(n, rng, condition)
    }
}

/// The rows of `dataset` selected by `rows`, shaped for a generator of the
/// given strategy.
pub fn training_view(
    dataset: &Dataset<f64>,
    rows: &[usize],
    kind: SamplingKind,
) -> Result<TrainingSet> {
    let labels: Vec<u8> = rows.iter().map(|&i| dataset.labels[i]).collect();
    if !labels.contains(&0) || !labels.contains(&1) {
        return Err(Error::DegenerateLabels);
    }
    Ok(match kind {
        SamplingKind::Minority => {
            let ids: Vec<usize> = rows
                .iter()
                .copied()
                .filter(|&i| dataset.labels[i] == 1)
                .collect();
            TrainingSet {
                rows: dataset.features.select_rows(&ids),
                labels: None,
                meta: dataset.meta.clone(),
                row_ids: ids,
            }
        }
        SamplingKind::Conditional => TrainingSet {
            rows: dataset.features.select_rows(rows),
            labels: Some(labels),
            meta: dataset.meta.clone(),
            row_ids: rows.to_vec(),
        },
        SamplingKind::Rejection => {
            let x = dataset.features.select_rows(rows);
            let lab = Matrix::from_vec(
                rows.len(),
                1,
                labels.iter().map(|&l| f64::from(l)).collect(),
            )?;
            TrainingSet {
                rows: Matrix::hconcat(&[&x, &lab]),
                labels: None,
                meta: with_label_variable(&dataset.meta),
                row_ids: rows.to_vec(),
            }
        }
    })
}

fn expect_strategy<G: RowGenerator + ?Sized>(g: &G, kind: SamplingKind) -> Result<()> {
    if g.strategy() != kind {
        return Err(Error::StrategyMismatch(format!(
            "{kind} sampling from a generator trained for {} sampling",
            g.strategy()
        )));
    }
    Ok(())
}

fn discretized<G: RowGenerator + ?Sized>(g: &G, raw: &Matrix<f64>) -> Result<Matrix<f64>> {
    let meta = g.meta();
    if raw.cols() != total_width(meta) {
        return Err(Error::Shape(format!(
            "generator emitted {} columns, metadata {}",
            raw.cols(),
            total_width(meta)
        )));
    }
    let mut out = Matrix::zeros(0, raw.cols());
    for r in raw.iter_rows() {
        out.push_row(&discretize(r, meta));
    }
    Ok(out)
}

/// `n` minority rows from a generator fit on the minority view.
pub fn draw_minority<G, R>(g: &G, n: usize, rng: &mut R) -> Result<Matrix<f64>>
where
    G: RowGenerator + ?Sized,
    R: Rng,
{
    expect_strategy(g, SamplingKind::Minority)?;
    if n == 0 {
        return Ok(Matrix::zeros(0, total_width(g.meta())));
    }
    let rows = discretized(g, &g.generate_rows(n, rng, None)?)?;
    validate_encoding(&rows, g.meta())?;
    Ok(rows)
}

/// `n` rows of class `class` from a conditional generator.
pub fn draw_conditional<G, R>(g: &G, n: usize, class: u8, rng: &mut R) -> Result<Matrix<f64>>
where
    G: RowGenerator + ?Sized,
    R: Rng,
{
    expect_strategy(g, SamplingKind::Conditional)?;
    if class > 1 {
        return Err(Error::Config(format!("class {class} is not binary")));
    }
    if n == 0 {
        return Ok(Matrix::zeros(0, total_width(g.meta())));
    }
    let rows = discretized(g, &g.generate_rows(n, rng, Some(class))?)?;
    validate_encoding(&rows, g.meta())?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rejection {
    /// Kept rows with the label column removed.
    pub rows: Matrix<f64>,
    /// Generated rows consumed, kept or not.
    pub draws: usize,
    pub batches: usize,
}

/// Draws from a label-as-variable generator, keeping rows whose discretized
/// label equals `class`, until `n` are kept or `draw_limit` rows have been
/// drawn.
pub fn draw_rejection<G, R>(
    g: &G,
    n: usize,
    class: u8,
    draw_limit: usize,
    batch: usize,
    rng: &mut R,
) -> Result<Rejection>
where
    G: RowGenerator + ?Sized,
    R: Rng,
{
    expect_strategy(g, SamplingKind::Rejection)?;
    if draw_limit == 0 || batch == 0 {
        return Err(Error::Config(
            "draw limit and batch size must be at least 1".into(),
        ));
    }
    if class > 1 {
        return Err(Error::Config(format!("class {class} is not binary")));
    }
    let meta = g.meta();
    let width = total_width(meta);
    if width < 2 || meta.last().map(|v| v.width) != Some(1) {
        return Err(Error::StrategyMismatch(
            "generator has no trailing label variable".into(),
        ));
    }
    let feature_meta = &meta[..meta.len() - 1];
    let target = f64::from(class);
    let mut rows = Matrix::zeros(0, width - 1);
    let (mut draws, mut batches) = (0, 0);
    while rows.rows() < n && draws < draw_limit {
        let m = batch.min(draw_limit - draws);
        let raw = g.generate_rows(m, rng, None)?;
        draws += m;
        batches += 1;
        for r in discretized(g, &raw)?.iter_rows() {
            if rows.rows() == n {
                break;
            }
            if r[width - 1] == target {
                rows.push_row(&r[..width - 1]);
            }
        }
    }
    if rows.rows() < n {
        return Err(Error::DrawLimitExceeded {
            kept: rows.rows(),
            wanted: n,
            draws,
        });
    }
    validate_encoding(&rows, feature_meta)?;
    Ok(Rejection {
        rows,
        draws,
        batches,
    })
}

/// Dispatches on the strategy; the returned rows are all of class `class`
/// and lie in the dataset's feature space.
pub fn draw<G, R>(
    g: &G,
    strategy: &SamplingStrategy,
    n: usize,
    class: u8,
    rng: &mut R,
) -> Result<Matrix<f64>>
where
    G: RowGenerator + ?Sized,
    R: Rng,
{
    match strategy.kind {
        SamplingKind::Minority if class != 1 => Err(Error::StrategyMismatch(
            "a minority-trained generator only emits minority rows".into(),
        )),
        SamplingKind::Minority => draw_minority(g, n, rng),
        SamplingKind::Conditional => draw_conditional(g, n, class, rng),
        SamplingKind::Rejection => {
            draw_rejection(g, n, class, strategy.draw_limit, strategy.batch, rng).map(|r| r.rows)
        }
    }
}

#[cfg(test)]
mod tests;

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    pca2, render_heatmap, render_scatter, render_som, som_fit, tsne2, Heatmap, SomParams, Tag,
    TsneParams,
};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::models::MODEL_NAMES;
use crate::protocol::{
    render_summary, summarize, ExperimentRecord, Oversampler, SummaryRow, BASELINE,
};
use crate::resample::Method;
use crate::rng::{derive_seed, derived};
use crate::tabular::Dataset;

/// Real rows tagged by class followed by synthetic rows.
#[derive(Debug, Clone)]
pub struct TaggedRows {
    pub rows: Matrix<f64>,
    pub tags: Vec<Tag>,
}

pub const DIAGNOSTIC_REAL: usize = 200;
pub const DIAGNOSTIC_SYNTHETIC: usize = 200;

/// `n_real` random real rows (without replacement, at most all rows) plus
/// `n_synth` synthetic minority rows.
pub fn diagnostic_sample(
    data: &Dataset<f64>,
    oversampler: &Oversampler<'_>,
    n_real: usize,
    n_synth: usize,
    seed: u64,
) -> Result<TaggedRows> {
    let mut rng = derived(seed, &["diagnostic", "real"]);
    let mut idx = rand::seq::index::sample(&mut rng, data.len(), n_real.min(data.len())).into_vec();
    idx.sort_unstable();
    let mut rows = data.features.select_rows(&idx);
    let mut tags: Vec<Tag> = idx
        .iter()
        .map(|&i| {
            if data.labels[i] == 1 {
                Tag::Positive
            } else {
                Tag::Negative
            }
        })
        .collect();
    if n_synth > 0 {
        let synth = oversampler.synthesize(
            data,
            n_synth,
            derive_seed(seed, &["diagnostic", "synthetic"]),
        )?;
        rows = Matrix::vconcat(&[&rows, &synth]);
        tags.extend(std::iter::repeat_n(Tag::Synthetic, synth.rows()));
    }
    Ok(TaggedRows { rows, tags })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VizKind {
    Heatmap,
    Pca,
    Tsne,
    Som,
}

impl VizKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VizKind::Heatmap => "heatmap",
            VizKind::Pca => "pca",
            VizKind::Tsne => "tsne",
            VizKind::Som => "som",
        }
    }
}

fn sanitize(s: &str) -> String {
    let t: String = s
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '.' | '_') {
                c
            } else {
                '-'
            }
        })
        .collect();
    if t.is_empty() {
        "none".into()
    } else {
        t
    }
}

/// `{dataset}__{method}__{sampling}__{kind}.svg`, with `none` for an empty part.
pub fn figure_filename(dataset: &str, method: &str, sampling: &str, kind: VizKind) -> String {
    format!(
        "{}__{}__{}__{}.svg",
        sanitize(dataset),
        sanitize(method),
        sanitize(sampling),
        kind.as_str()
    )
}

fn write(path: PathBuf, text: &str) -> Result<PathBuf> {
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// One heatmap per oversampling (method, sampling) found in `records`.
pub fn emit_heatmaps(
    records: &[ExperimentRecord],
    dataset: &str,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let mut keys: Vec<(String, String)> = records
        .iter()
        .filter(|r| r.method != BASELINE && r.method != Method::RandomUnder.id())
        .map(|r| (r.method.clone(), r.sampling.clone()))
        .collect();
    keys.sort();
    keys.dedup();
    let figures: Vec<(String, String)> = keys
        .par_iter()
        .map(|(m, s)| {
            (
                figure_filename(dataset, m, s, VizKind::Heatmap),
                render_heatmap(&Heatmap::from_records(records, m, s)),
            )
        })
        .collect();
    figures
        .into_iter()
        .map(|(name, svg)| write(dir.join(name), &svg))
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiagnosticConfig {
    pub tsne: TsneParams,
    pub som: SomParams,
    pub seed: u64,
}

/// PCA, t-SNE and SOM figures of one diagnostic sample.
pub fn emit_diagnostics(
    sample: &TaggedRows,
    dataset: &str,
    method: &str,
    sampling: &str,
    config: &DiagnosticConfig,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    let seed = config.seed;
    ensure_dir(dir)?;
    let title = |kind: &str| format!("{dataset}: {method} {sampling} {kind}").replace("  ", " ");
    let ((pca, t), s) = rayon::join(
        || {
            rayon::join(
                || pca2(&sample.rows).and_then(|c| render_scatter(&title("PCA"), &c, &sample.tags)),
                || {
                    tsne2(&sample.rows, &config.tsne, derive_seed(seed, &["tsne"]))
                        .and_then(|o| render_scatter(&title("t-SNE"), &o.coords, &sample.tags))
                },
            )
        },
        || {
            som_fit(&sample.rows, &config.som, derive_seed(seed, &["som"])).and_then(|g| {
                let counts = g.assign(&sample.rows, &sample.tags)?;
                render_som(&title("SOM"), g.width, g.height, &counts)
            })
        },
    );
    Ok(vec![
        write(
            dir.join(figure_filename(dataset, method, sampling, VizKind::Pca)),
            &pca?,
        )?,
        write(
            dir.join(figure_filename(dataset, method, sampling, VizKind::Tsne)),
            &t?,
        )?,
        write(
            dir.join(figure_filename(dataset, method, sampling, VizKind::Som)),
            &s?,
        )?,
    ])
}

fn is_generative(method: &str) -> bool {
    MODEL_NAMES.contains(&method)
}

/// Best cells as CSV, one row per (method, sampling).
pub fn summary_csv(rows: &[SummaryRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e| Error::csv("writing summary", e);
    w.write_record([
        "method",
        "sampling",
        "kind",
        "usr",
        "osr",
        "folds",
        "train_mean",
        "train_sd",
        "test_mean",
        "test_sd",
        "status",
    ])
    .map_err(err)?;
    for r in rows {
        let kind = if r.method == BASELINE {
            "baseline"
        } else if r.method == Method::RandomUnder.id() {
            "undersampling"
        } else if is_generative(&r.method) {
            "generative"
        } else {
            "classic"
        };
        let mut rec = vec![r.method.clone(), r.sampling.clone(), kind.to_string()];
        match &r.best {
            Some(c) => {
                for v in [c.usr, c.osr] {
                    rec.push(v.to_string());
                }
                rec.push(c.folds.to_string());
                for v in [c.train_mean, c.train_sd, c.test_mean, c.test_sd] {
                    rec.push(v.to_string());
                }
                rec.push("ok".into());
            }
            None => {
                rec.extend(std::iter::repeat_n(String::new(), 7));
                rec.push("timeout".into());
            }
        }
        w.write_record(&rec).map_err(err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::io("summary.csv", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// summary.md and summary.csv.
pub fn emit_tables(
    records: &[ExperimentRecord],
    dataset: &str,
    ir: f64,
    classifier_label: &str,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let rows = summarize(records);
    Ok(vec![
        write(
            dir.join("summary.md"),
            &render_summary(dataset, ir, classifier_label, &rows),
        )?,
        write(dir.join("summary.csv"), &summary_csv(&rows)?)?,
    ])
}

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{ExperimentRecord, Status, BASELINE};
use crate::models::{SamplingKind, MODEL_NAMES};
use crate::resample::Method;

/// Sample standard deviation (n − 1 denominator); 0 for fewer than two values.
pub fn sample_sd(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Fold statistics of one (method, sampling, usr, osr) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStat {
    pub method: String,
    pub sampling: String,
    pub usr: f64,
    pub osr: f64,
    pub folds: usize,
    pub train_mean: f64,
    pub train_sd: f64,
    pub test_mean: f64,
    pub test_sd: f64,
    /// Any fold of the cell timed out; the means are then meaningless.
    pub timeout: bool,
}

/// Groups records into cells, in canonical record order.
pub fn cell_stats(records: &[ExperimentRecord]) -> Vec<CellStat> {
    let mut sorted: Vec<&ExperimentRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.canonical_cmp(b));
    let mut out = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let head = sorted[i];
        let mut j = i;
        while j < sorted.len()
            && sorted[j].method == head.method
            && sorted[j].sampling == head.sampling
            && sorted[j].usr == head.usr
            && sorted[j].osr == head.osr
        {
            j += 1;
        }
        let group = &sorted[i..j];
        let timeout = group.iter().any(|r| r.status == Status::Timeout);
        let train: Vec<f64> = group.iter().filter_map(|r| r.train_f1).collect();
        let test: Vec<f64> = group.iter().filter_map(|r| r.test_f1).collect();
        let (train_mean, train_sd, test_mean, test_sd) = if timeout || test.is_empty() {
            (f64::NAN, f64::NAN, f64::NAN, f64::NAN)
        } else {
            (
                mean(&train),
                sample_sd(&train),
                mean(&test),
                sample_sd(&test),
            )
        };
        out.push(CellStat {
            method: head.method.clone(),
            sampling: head.sampling.clone(),
            usr: head.usr,
            osr: head.osr,
            folds: group.len(),
            train_mean,
            train_sd,
            test_mean,
            test_sd,
            timeout,
        });
        i = j;
    }
    out
}

/// Best cell of one (method, sampling); `None` when every cell timed out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub sampling: String,
    pub best: Option<CellStat>,
}

/// Per (method, sampling): the cell with the best mean test f1, ties going
/// to the smallest (usr, osr).
pub fn summarize(records: &[ExperimentRecord]) -> Vec<SummaryRow> {
    let cells = cell_stats(records);
    let mut rows: Vec<SummaryRow> = Vec::new();
    for c in cells {
        let fresh = rows
            .last()
            .is_none_or(|r| r.method != c.method || r.sampling != c.sampling);
        if fresh {
            rows.push(SummaryRow {
                method: c.method.clone(),
                sampling: c.sampling.clone(),
                best: None,
            });
        }
        let row = rows.last_mut().expect("pushed above");
        if c.timeout {
            continue;
        }
        // cells arrive in ascending (usr, osr), so only a strictly better mean replaces
        if row.best.as_ref().is_none_or(|b| c.test_mean > b.test_mean) {
            row.best = Some(c);
        }
    }
    rows
}

/// Ratio formatted for tables and axis labels: up to four decimals, at least one.
pub fn ratio_label(x: f64) -> String {
    let s = format!("{x:.4}");
    let s = s.trim_end_matches('0');
    if s.ends_with('.') {
        format!("{s}0")
    } else {
        s.to_string()
    }
}

fn pm(mean: f64, sd: f64) -> String {
    format!("{mean:.3} ± {sd:.3}")
}

fn table_name(method: &str) -> String {
    method
        .parse::<Method>()
        .map(|m| m.table_name().to_string())
        .unwrap_or_else(|_| method.to_string())
}

fn sampling_title(s: &str) -> String {
    s.parse::<SamplingKind>()
        .map(|k| k.title().to_string())
        .unwrap_or_else(|_| s.to_string())
}

/// Markdown tables: baseline, best undersampling, best classic oversampling
/// per method and best generative cell per (model, strategy).
pub fn render_summary(
    dataset: &str,
    ir: f64,
    classifier_label: &str,
    rows: &[SummaryRow],
) -> String {
    let mut md = String::new();
    let _ = writeln!(md, "# {dataset}\n");
    let _ = writeln!(
        md,
        "Classifier: {classifier_label}. Values are mean ± sample standard deviation over folds.\n"
    );
    let cell = |r: &SummaryRow| r.best.clone();

    let _ = writeln!(md, "| Technique | IR | Train f1 | Test f1 |");
    let _ = writeln!(md, "|---|---|---|---|");
    for r in rows.iter().filter(|r| r.method == BASELINE) {
        if let Some(c) = cell(r) {
            let _ = writeln!(
                md,
                "| Only classifier | {} | {} | {} |",
                ratio_label(ir),
                pm(c.train_mean, c.train_sd),
                pm(c.test_mean, c.test_sd)
            );
        }
    }
    let _ = writeln!(md);

    let _ = writeln!(md, "| Technique | USR | Train f1 | Test f1 |");
    let _ = writeln!(md, "|---|---|---|---|");
    for r in rows.iter().filter(|r| r.method == Method::RandomUnder.id()) {
        if let Some(c) = cell(r) {
            let _ = writeln!(
                md,
                "| Undersampling and classifier | {} | {} | {} |",
                ratio_label(c.usr),
                pm(c.train_mean, c.train_sd),
                pm(c.test_mean, c.test_sd)
            );
        }
    }
    let _ = writeln!(md);

    let mut classic: Vec<&SummaryRow> = rows
        .iter()
        .filter(|r| {
            r.method != BASELINE
                && r.method != Method::RandomUnder.id()
                && !MODEL_NAMES.contains(&r.method.as_str())
        })
        .collect();
    if !classic.is_empty() {
        classic.sort_by_key(|r| table_name(&r.method));
        let _ = writeln!(md, "| Oversampling | USR | OSR | Train f1 | Test f1 |");
        let _ = writeln!(md, "|---|---|---|---|---|");
        for r in classic {
            match cell(r) {
                Some(c) => {
                    let _ = writeln!(
                        md,
                        "| {} | {} | {} | {} | {} |",
                        table_name(&r.method),
                        ratio_label(c.usr),
                        ratio_label(c.osr),
                        pm(c.train_mean, c.train_sd),
                        pm(c.test_mean, c.test_sd)
                    );
                }
                None => {
                    let _ = writeln!(md, "| {} | *Timeout* | | | |", table_name(&r.method));
                }
            }
        }
        let _ = writeln!(md);
    }

    let mut dgm: Vec<&SummaryRow> = rows
        .iter()
        .filter(|r| MODEL_NAMES.contains(&r.method.as_str()))
        .collect();
    if !dgm.is_empty() {
        let rank = |s: &str| {
            SamplingKind::ALL
                .iter()
                .position(|k| k.as_str() == s)
                .unwrap_or(usize::MAX)
        };
        let model_rank = |m: &str| {
            MODEL_NAMES
                .iter()
                .position(|n| *n == m)
                .unwrap_or(usize::MAX)
        };
        dgm.sort_by_key(|r| (rank(&r.sampling), model_rank(&r.method)));
        let _ = writeln!(md, "| DGM | Sampling | USR | OSR | Train f1 | Test f1 |");
        let _ = writeln!(md, "|---|---|---|---|---|---|");
        for r in dgm {
            let s = sampling_title(&r.sampling);
            match cell(r) {
                Some(c) => {
                    let _ = writeln!(
                        md,
                        "| {} | {s} | {} | {} | {} | {} |",
                        r.method,
                        ratio_label(c.usr),
                        ratio_label(c.osr),
                        pm(c.train_mean, c.train_sd),
                        pm(c.test_mean, c.test_sd)
                    );
                }
                None => {
                    let _ = writeln!(md, "| {} | {s} | *Timeout* | | | |", r.method);
                }
            }
        }
        let _ = writeln!(md);
    }
    let _ = writeln!(
        md,
        "SVM-SMOTE is not included: it needs a support vector machine, which this toolkit does not provide."
    );
    md
}

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{render_summary, summarize, ExperimentRecord, GridOutput, Status};
use crate::error::{Error, Result};

pub const RESULTS_HEADER: [&str; 10] = [
    "dataset",
    "method",
    "sampling",
    "usr",
    "osr",
    "fold",
    "train_f1",
    "test_f1",
    "wall_time_ms",
    "status",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes records as results.csv rows. Wall times are left blank unless
/// `with_wall_time`, so that reruns produce identical bytes.
pub fn write_results_csv<W: Write>(
    records: &[ExperimentRecord],
    out: W,
    with_wall_time: bool,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULTS_HEADER)
        .map_err(|e| Error::csv("writing results", e))?;
    for r in records {
        let wall = if with_wall_time {
            opt(r.wall_time_ms)
        } else {
            String::new()
        };
        w.write_record([
            r.dataset.clone(),
            r.method.clone(),
            r.sampling.clone(),
            r.usr.to_string(),
            r.osr.to_string(),
            r.fold.to_string(),
            opt(r.train_f1),
            opt(r.test_f1),
            wall,
            r.status.as_str().to_string(),
        ])
        .map_err(|e| Error::csv("writing results", e))?;
    }
    w.flush().map_err(|e| Error::io("results", e))?;
    Ok(())
}

fn parse_f64(s: &str, row: usize, column: &str) -> Result<f64> {
    s.parse().map_err(|_| Error::Decode {
        row,
        column: column.into(),
        message: format!("`{s}` is not a number"),
    })
}

fn parse_opt(s: &str, row: usize, column: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        Ok(None)
    } else {
        parse_f64(s, row, column).map(Some)
    }
}

pub fn read_results(path: &Path) -> Result<Vec<ExperimentRecord>> {
    let mut rdr =
        csv::Reader::from_path(path).map_err(|e| Error::csv(path.display().to_string(), e))?;
    let headers = rdr
        .headers()
        .map_err(|e| Error::csv(path.display().to_string(), e))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != RESULTS_HEADER {
        return Err(Error::Schema(format!(
            "{} does not have the results.csv header",
            path.display()
        )));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path.display().to_string(), e))?;
        let f = |j: usize| rec.get(j).unwrap_or("");
        let status = match f(9) {
            "ok" => Status::Ok,
            "timeout" => Status::Timeout,
            s => {
                return Err(Error::Decode {
                    row: i,
                    column: "status".into(),
                    message: format!("unknown status `{s}`"),
                })
            }
        };
        out.push(ExperimentRecord {
            dataset: f(0).into(),
            method: f(1).into(),
            sampling: f(2).into(),
            usr: parse_f64(f(3), i, "usr")?,
            osr: parse_f64(f(4), i, "osr")?,
            fold: f(5).parse().map_err(|_| Error::Decode {
                row: i,
                column: "fold".into(),
                message: "not an integer".into(),
            })?,
            train_f1: parse_opt(f(6), i, "train_f1")?,
            test_f1: parse_opt(f(7), i, "test_f1")?,
            wall_time_ms: if f(8).is_empty() {
                None
            } else {
                f(8).parse().ok()
            },
            status,
        });
    }
    Ok(out)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes results.csv, summary.md, manifest.json and timings.csv into `dir`.
/// Everything except timings.csv is byte-identical across reruns.
pub fn write_outputs(dir: &Path, out: &GridOutput) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut results = Vec::new();
    write_results_csv(
        &out.records,
        &mut results,
        out.manifest.config.record_wall_time,
    )?;
    write_file(&dir.join("results.csv"), &results)?;

    let rows = summarize(&out.records);
    let md = render_summary(
        &out.manifest.dataset,
        out.manifest.ir,
        &out.manifest.classifier_label,
        &rows,
    );
    write_file(&dir.join("summary.md"), md.as_bytes())?;

    let manifest = serde_json::to_string_pretty(&out.manifest)
        .map_err(|e| Error::json("serializing manifest", e))?;
    write_file(&dir.join("manifest.json"), manifest.as_bytes())?;

    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e| Error::csv("writing timings", e);
    w.write_record([
        "kind",
        "method",
        "sampling",
        "usr",
        "osr",
        "fold",
        "wall_time_ms",
    ])
    .map_err(err)?;
    for g in &out.generators {
        w.write_record([
            "generator".to_string(),
            g.method.clone(),
            g.sampling.as_str().to_string(),
            String::new(),
            String::new(),
            g.fold.to_string(),
            g.wall_time_ms.to_string(),
        ])
        .map_err(err)?;
    }
    for r in &out.records {
        w.write_record([
            "cell".to_string(),
            r.method.clone(),
            r.sampling.clone(),
            r.usr.to_string(),
            r.osr.to_string(),
            r.fold.to_string(),
            opt(r.wall_time_ms),
        ])
        .map_err(err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::io(dir.join("timings.csv"), e.into_error()))?;
    write_file(&dir.join("timings.csv"), &bytes)
}

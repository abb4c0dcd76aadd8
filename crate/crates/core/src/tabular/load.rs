use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, VariableKind, VariableMeta};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Sidecar metadata for a raw CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub label: String,
    pub positive_class: String,
    pub variables: Vec<VariableDecl>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableDecl {
    pub name: String,
    pub kind: VariableKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<String>>,
}

/// Metadata written next to an encoded CSV: the input metadata augmented
/// with widths, resolved categories and scaling ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedMetadata {
    pub name: String,
    pub label: String,
    pub positive_class: String,
    pub variables: Vec<VariableMeta>,
}

pub const ENCODED_CSV: &str = "encoded.csv";
pub const ENCODED_META: &str = "metadata.json";

fn is_missing(s: &str) -> bool {
    let t = s.trim();
    t.is_empty() || t == "?" || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("nan")
}

/// Reads a raw CSV with its metadata sidecar and encodes it.
pub fn load_raw(csv_path: &Path, metadata_path: &Path) -> Result<Dataset<f64>> {
    let text = fs::read_to_string(metadata_path).map_err(|e| Error::io(metadata_path, e))?;
    let meta: DatasetMetadata = serde_json::from_str(&text)
        .map_err(|e| Error::Schema(format!("{}: {e}", metadata_path.display())))?;
    let file = fs::File::open(csv_path).map_err(|e| Error::io(csv_path, e))?;
    let default_name = csv_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    encode_csv(file, &meta, &default_name)
}

/// Encodes CSV content according to `meta`.
pub fn encode_csv<R: Read>(
    reader: R,
    meta: &DatasetMetadata,
    default_name: &str,
) -> Result<Dataset<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::csv("reading header", e))?
        .iter()
        .map(str::to_string)
        .collect();
    let position: HashMap<&str, usize> = header
        .iter()
        .enumerate()
        .map(|(i, h)| (h.as_str(), i))
        .collect();

    let label_col = *position
        .get(meta.label.as_str())
        .ok_or_else(|| Error::Schema(format!("label column `{}` not in CSV header", meta.label)))?;
    let declared: BTreeSet<&str> = meta.variables.iter().map(|v| v.name.as_str()).collect();
    if declared.len() != meta.variables.len() {
        return Err(Error::Schema("duplicate variable names in metadata".into()));
    }
    for v in &meta.variables {
        if v.name == meta.label {
            return Err(Error::Schema(format!(
                "label `{}` declared as a variable",
                v.name
            )));
        }
        if !position.contains_key(v.name.as_str()) {
            return Err(Error::Schema(format!(
                "variable `{}` missing from CSV header",
                v.name
            )));
        }
    }
    for h in &header {
        if h != &meta.label && !declared.contains(h.as_str()) {
            return Err(Error::Schema(format!(
                "CSV column `{h}` not declared in metadata"
            )));
        }
    }

    let mut raw: Vec<Vec<String>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(format!("row {i}"), e))?;
        if rec.len() != header.len() {
            return Err(Error::Schema(format!(
                "row {i} has {} fields, header has {}",
                rec.len(),
                header.len()
            )));
        }
        raw.push(rec.iter().map(str::to_string).collect());
    }

    let mut labels = Vec::with_capacity(raw.len());
    for (i, r) in raw.iter().enumerate() {
        let v = &r[label_col];
        if is_missing(v) {
            return Err(Error::Decode {
                row: i,
                column: meta.label.clone(),
                message: "missing label".into(),
            });
        }
        labels.push(u8::from(v.trim() == meta.positive_class));
    }

    let mut vars = Vec::with_capacity(meta.variables.len());
    let mut columns: Vec<Vec<Vec<f64>>> = Vec::new();
    for decl in &meta.variables {
        let col = position[decl.name.as_str()];
        let values: Vec<&str> = raw.iter().map(|r| r[col].as_str()).collect();
        if let Some(row) = values.iter().position(|v| is_missing(v)) {
            return Err(Error::Decode {
                row,
                column: decl.name.clone(),
                message: "missing value".into(),
            });
        }
        let (var, cols) = encode_variable(decl, &values)?;
        var.check()?;
        vars.push(var);
        columns.push(cols);
    }

    let width: usize = vars.iter().map(|v| v.width).sum();
    let mut data = Vec::with_capacity(raw.len() * width);
    for i in 0..raw.len() {
        for c in &columns {
            data.extend_from_slice(&c[i]);
        }
    }
    let name = meta
        .name
        .clone()
        .unwrap_or_else(|| default_name.to_string());
    Dataset::new(
        name,
        Matrix::from_vec(raw.len(), width, data)?,
        labels,
        vars,
    )
}

fn encode_variable(decl: &VariableDecl, values: &[&str]) -> Result<(VariableMeta, Vec<Vec<f64>>)> {
    let observed = || {
        values
            .iter()
            .map(|v| v.to_string())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect::<Vec<_>>()
    };
    match decl.kind {
        VariableKind::Numerical => {
            let mut nums = Vec::with_capacity(values.len());
            for (row, v) in values.iter().enumerate() {
                let x: f64 = v.parse().map_err(|_| Error::Decode {
                    row,
                    column: decl.name.clone(),
                    message: format!("`{v}` is not a number"),
                })?;
                if !x.is_finite() {
                    return Err(Error::Decode {
                        row,
                        column: decl.name.clone(),
                        message: "non-finite value".into(),
                    });
                }
                nums.push(x);
            }
            let lo = nums.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = nums.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let (lo, hi) = if nums.is_empty() {
                (0.0, 0.0)
            } else {
                (lo, hi)
            };
            let span = hi - lo;
            let cols = nums
                .iter()
                .map(|&x| vec![if span > 0.0 { (x - lo) / span } else { 0.0 }])
                .collect();
            Ok((VariableMeta::numerical(&decl.name, lo, hi), cols))
        }
        VariableKind::Binary => {
            let cats = match &decl.categories {
                Some(c) => c.clone(),
                None => {
                    let obs = observed();
                    if obs.iter().all(|v| v == "0" || v == "1") {
                        vec!["0".into(), "1".into()]
                    } else {
                        obs
                    }
                }
            };
            if cats.len() != 2 {
                return Err(Error::Schema(format!(
                    "binary `{}` needs exactly two values, found {}",
                    decl.name,
                    cats.len()
                )));
            }
            let cols = lookup(decl, values, &cats)?
                .into_iter()
                .map(|j| vec![j as f64])
                .collect();
            let mut var = VariableMeta::binary(&decl.name);
            var.categories = cats;
            Ok((var, cols))
        }
        VariableKind::Categorical => {
            let cats = decl.categories.clone().unwrap_or_else(observed);
            let width = cats.len();
            let cols = lookup(decl, values, &cats)?
                .into_iter()
                .map(|j| (0..width).map(|k| if k == j { 1.0 } else { 0.0 }).collect())
                .collect();
            Ok((VariableMeta::categorical(&decl.name, cats), cols))
        }
    }
}

fn lookup(decl: &VariableDecl, values: &[&str], cats: &[String]) -> Result<Vec<usize>> {
    let index: HashMap<&str, usize> = cats
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    values
        .iter()
        .enumerate()
        .map(|(row, v)| {
            index.get(v).copied().ok_or_else(|| Error::Decode {
                row,
                column: decl.name.clone(),
                message: format!("unknown category `{v}`"),
            })
        })
        .collect()
}

/// Column names of the encoded CSV (one per encoded column, label excluded).
pub fn encoded_header(meta: &[VariableMeta]) -> Vec<String> {
    let mut h = Vec::new();
    for v in meta {
        match v.kind {
            VariableKind::Categorical => {
                h.extend(v.categories.iter().map(|c| format!("{}={c}", v.name)))
            }
            _ => h.push(v.name.clone()),
        }
    }
    h
}

/// Writes `encoded.csv` and `metadata.json` into `dir`.
pub fn save_encoded(
    dataset: &Dataset<f64>,
    label: &str,
    positive_class: &str,
    dir: &Path,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_path = dir.join(ENCODED_CSV);
    let mut w = csv::Writer::from_path(&csv_path)
        .map_err(|e| Error::csv(csv_path.display().to_string(), e))?;
    let mut header = encoded_header(&dataset.meta);
    header.push(label.to_string());
    w.write_record(&header)
        .map_err(|e| Error::csv("writing header", e))?;
    for (r, &y) in dataset.features.iter_rows().zip(&dataset.labels) {
        let mut rec: Vec<String> = r.iter().map(|x| format!("{x}")).collect();
        rec.push(y.to_string());
        w.write_record(&rec)
            .map_err(|e| Error::csv("writing row", e))?;
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;

    let meta = EncodedMetadata {
        name: dataset.name.clone(),
        label: label.to_string(),
        positive_class: positive_class.to_string(),
        variables: dataset.meta.clone(),
    };
    let meta_path = dir.join(ENCODED_META);
    let text = serde_json::to_string_pretty(&meta).map_err(|e| Error::json("metadata", e))?;
    fs::write(&meta_path, text + "\n").map_err(|e| Error::io(&meta_path, e))
}

/// Reads a dataset previously written by [`save_encoded`].
pub fn load_encoded(dir: &Path) -> Result<(Dataset<f64>, EncodedMetadata)> {
    let meta_path = dir.join(ENCODED_META);
    let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: EncodedMetadata = serde_json::from_str(&text)
        .map_err(|e| Error::Schema(format!("{}: {e}", meta_path.display())))?;
    for v in &meta.variables {
        v.check()?;
    }
    let width: usize = meta.variables.iter().map(|v| v.width).sum();
    let csv_path = dir.join(ENCODED_CSV);
    let mut rdr = csv::Reader::from_path(&csv_path)
        .map_err(|e| Error::csv(csv_path.display().to_string(), e))?;
    let header_len = rdr
        .headers()
        .map_err(|e| Error::csv("reading header", e))?
        .len();
    if header_len != width + 1 {
        return Err(Error::Schema(format!(
            "encoded CSV has {header_len} columns, metadata implies {}",
            width + 1
        )));
    }
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(format!("row {i}"), e))?;
        for (j, field) in rec.iter().enumerate() {
            let bad = |m: &str| Error::Decode {
                row: i,
                column: format!("#{j}"),
                message: m.to_string(),
            };
            if j == width {
                labels.push(match field {
                    "0" => 0,
                    "1" => 1,
                    _ => return Err(bad("label must be 0 or 1")),
                });
            } else {
                data.push(field.parse::<f64>().map_err(|_| bad("not a number"))?);
            }
        }
    }
    let n = labels.len();
    let ds = Dataset::new(
        meta.name.clone(),
        Matrix::from_vec(n, width, data)?,
        labels,
        meta.variables.clone(),
    )?;
    super::validate_encoding(&ds.features, &ds.meta)?;
    Ok((ds, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::{decode_row, validate_encoding};

    fn meta(vars: Vec<(&str, VariableKind)>) -> DatasetMetadata {
        DatasetMetadata {
            name: Some("t".into()),
            label: "y".into(),
            positive_class: "1".into(),
            variables: vars
                .into_iter()
                .map(|(n, k)| VariableDecl {
                    name: n.into(),
                    kind: k,
                    categories: None,
                })
                .collect(),
        }
    }

    #[test]
    fn numerical_column_is_min_max_scaled() {
        let csv = "x,y\n10,0\n20,1\n30,0\n";
        let ds = encode_csv(
            csv.as_bytes(),
            &meta(vec![("x", VariableKind::Numerical)]),
            "t",
        )
        .unwrap();
        assert_eq!(ds.features.as_slice(), &[0.0, 0.5, 1.0]);
        assert_eq!(ds.labels, vec![0, 1, 0]);
        assert_eq!(ds.meta[0].scale_min, Some(10.0));
        assert_eq!(ds.meta[0].scale_max, Some(30.0));
    }

    #[test]
    fn constant_numerical_column_maps_to_zero() {
        let csv = "x,y\n5,0\n5,1\n";
        let ds = encode_csv(
            csv.as_bytes(),
            &meta(vec![("x", VariableKind::Numerical)]),
            "t",
        )
        .unwrap();
        assert_eq!(ds.features.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn categorical_becomes_one_hot() {
        let csv = "c,y\na,0\nb,1\nc,0\nb,0\n";
        let ds = encode_csv(
            csv.as_bytes(),
            &meta(vec![("c", VariableKind::Categorical)]),
            "t",
        )
        .unwrap();
        assert_eq!(ds.width(), 3);
        for r in ds.features.iter_rows() {
            assert_eq!(r.iter().sum::<f64>(), 1.0);
        }
        assert_eq!(ds.features.row(1), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn binary_yes_no_is_single_column() {
        let csv = "b,y\nyes,0\nno,1\nyes,1\n";
        let ds = encode_csv(
            csv.as_bytes(),
            &meta(vec![("b", VariableKind::Binary)]),
            "t",
        )
        .unwrap();
        assert_eq!(ds.meta[0].width, 1);
        assert_eq!(ds.features.as_slice(), &[1.0, 0.0, 1.0]);
        assert_eq!(
            decode_row(ds.features.row(1), &ds.meta),
            vec!["no".to_string()]
        );
    }

    #[test]
    fn unknown_category_names_row_and_column() {
        let mut m = meta(vec![("c", VariableKind::Categorical)]);
        m.variables[0].categories = Some(vec!["a".into(), "b".into(), "c".into()]);
        let err = encode_csv("c,y\na,0\nz,1\n".as_bytes(), &m, "t").unwrap_err();
        match err {
            Error::Decode { row, column, .. } => {
                assert_eq!(row, 1);
                assert_eq!(column, "c");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn missing_value_is_rejected() {
        let err = encode_csv(
            "x,y\n1,0\n,1\n".as_bytes(),
            &meta(vec![("x", VariableKind::Numerical)]),
            "t",
        );
        assert!(matches!(err, Err(Error::Decode { row: 1, .. })));
    }

    #[test]
    fn undeclared_or_missing_columns_are_schema_errors() {
        let m = meta(vec![("x", VariableKind::Numerical)]);
        assert!(matches!(
            encode_csv("x,z,y\n1,2,0\n".as_bytes(), &m, "t"),
            Err(Error::Schema(_))
        ));
        let m2 = meta(vec![
            ("x", VariableKind::Numerical),
            ("w", VariableKind::Numerical),
        ]);
        assert!(matches!(
            encode_csv("x,y\n1,0\n".as_bytes(), &m2, "t"),
            Err(Error::Schema(_))
        ));
        let m3 = DatasetMetadata {
            label: "nope".into(),
            ..m
        };
        assert!(matches!(
            encode_csv("x,y\n1,0\n".as_bytes(), &m3, "t"),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn decode_round_trips_raw_values() {
        let csv = "c,b,x,y\nred,t,1.5,0\ngreen,f,-2.25,1\nblue,t,3.125,0\ngreen,t,0.1,0\n";
        let m = meta(vec![
            ("c", VariableKind::Categorical),
            ("b", VariableKind::Binary),
            ("x", VariableKind::Numerical),
        ]);
        let ds = encode_csv(csv.as_bytes(), &m, "t").unwrap();
        validate_encoding(&ds.features, &ds.meta).unwrap();
        let raw: Vec<Vec<&str>> = csv
            .lines()
            .skip(1)
            .map(|l| l.split(',').collect())
            .collect();
        for (r, want) in ds.features.iter_rows().zip(raw) {
            let got = decode_row(r, &ds.meta);
            assert_eq!(got[0], want[0]);
            assert_eq!(got[1], want[1]);
            let x: f64 = got[2].parse().unwrap();
            assert!((x - want[2].parse::<f64>().unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn encoded_files_round_trip() {
        let csv = "c,x,y\na,1,0\nb,2,1\nc,3,0\n";
        let m = meta(vec![
            ("c", VariableKind::Categorical),
            ("x", VariableKind::Numerical),
        ]);
        let ds = encode_csv(csv.as_bytes(), &m, "t").unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_encoded(&ds, "y", "1", dir.path()).unwrap();
        let (back, em) = load_encoded(dir.path()).unwrap();
        assert_eq!(back, ds);
        assert_eq!(em.label, "y");
    }
}

use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::*;
use crate::matrix::Matrix;
use crate::protocol::{cell_stats, ExperimentRecord, Oversampler, Status, BASELINE};
use crate::resample::{ClassicParams, Method};
use crate::rng::seeded;
use crate::tabular::synthetic::overlapping_clusters;

fn random_rows(n: usize, d: usize, seed: u64) -> Matrix<f64> {
    let mut rng = seeded(seed);
    let mut m = Matrix::zeros(n, d);
    for i in 0..n {
        for k in 0..d {
            // anisotropic so the top two components are well separated
            m.row_mut(i)[k] = rng.gen::<f64>() * (d - k) as f64;
        }
    }
    m
}

fn oracle_projection(rows: &Matrix<f64>) -> Vec<[f64; 2]> {
    let (n, d) = rows.shape();
    let x = nalgebra::DMatrix::from_row_slice(n, d, rows.as_slice());
    let mean = x.row_mean();
    let c = nalgebra::DMatrix::from_fn(n, d, |i, j| x[(i, j)] - mean[j]);
    let cov = c.transpose() * &c / (n as f64 - 1.0);
    let eig = nalgebra::SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let proj = |i: usize, k: usize| {
        (0..d)
            .map(|j| c[(i, j)] * eig.eigenvectors[(j, order[k])])
            .sum::<f64>()
    };
    (0..n).map(|i| [proj(i, 0), proj(i, 1)]).collect()
}

fn assert_equal_up_to_sign(a: &Matrix<f64>, b: &[[f64; 2]], tol: f64) {
    for c in 0..2 {
        let same: f64 = (0..a.rows())
            .map(|i| (a.row(i)[c] - b[i][c]).abs())
            .fold(0.0, f64::max);
        let flip: f64 = (0..a.rows())
            .map(|i| (a.row(i)[c] + b[i][c]).abs())
            .fold(0.0, f64::max);
        assert!(same.min(flip) < tol, "component {c}: {same} / {flip}");
    }
}

#[test]
fn pca_matches_dense_eigensolver() {
    for seed in 0..5 {
        let rows = random_rows(60, 5, seed);
        assert_equal_up_to_sign(&pca2(&rows).unwrap(), &oracle_projection(&rows), 1e-8);
    }
}

#[test]
fn jacobi_eigenvalues_match_oracle() {
    let rows = random_rows(40, 6, 9);
    let cov = rows.transpose().matmul(&rows);
    let (vals, vecs) = symmetric_eigen(&cov);
    let eig =
        nalgebra::SymmetricEigen::new(nalgebra::DMatrix::from_row_slice(6, 6, cov.as_slice()));
    let mut expect: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    expect.sort_by(|a, b| b.total_cmp(a));
    for (a, b) in vals.iter().zip(&expect) {
        assert!((a - b).abs() < 1e-8 * b.abs().max(1.0));
    }
    let back = vecs.transpose().matmul(&cov).matmul(&vecs);
    for i in 0..6 {
        for j in 0..6 {
            let target = if i == j { vals[i] } else { 0.0 };
            assert!((back.row(i)[j] - target).abs() < 1e-8 * vals[0]);
        }
    }
}

#[test]
fn pca_recovers_orthogonal_axes() {
    let mut rows = Matrix::<f64>::zeros(0, 3);
    for t in [-2.0, -1.0, 0.0, 1.0, 2.0] {
        rows.push_row(&[3.0 * t, 0.0, 1.0]);
        rows.push_row(&[0.0, t, 1.0]);
    }
    let p = pca2(&rows).unwrap();
    for (i, r) in rows.iter_rows().enumerate() {
        assert!((p.row(i)[0].abs() - r[0].abs()).abs() < 1e-10);
        assert!((p.row(i)[1].abs() - r[1].abs()).abs() < 1e-10);
    }
}

#[test]
fn pca_ignores_duplicated_rows() {
    let rows = random_rows(20, 4, 3);
    let doubled = Matrix::vconcat(&[&rows, &rows]);
    let a = pca2(&rows).unwrap();
    let b = pca2(&doubled).unwrap();
    let top: Vec<[f64; 2]> = (0..20).map(|i| [b.row(i)[0], b.row(i)[1]]).collect();
    assert_equal_up_to_sign(&a, &top, 1e-9);
}

#[test]
fn pca_preconditions() {
    let same = Matrix::filled(5, 3, 0.25);
    assert!(matches!(pca2(&same), Err(crate::Error::DegenerateData(_))));
    assert!(matches!(
        pca2(&random_rows(2, 3, 0)),
        Err(crate::Error::InsufficientData(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn pca_is_permutation_invariant(seed in 0u64..1000, shift in 1usize..30) {
        let rows = random_rows(31, 4, seed);
        let perm: Vec<usize> = (0..31).map(|i| (i + shift) % 31).collect();
        let a = pca2(&rows).unwrap();
        let b = pca2(&rows.select_rows(&perm)).unwrap();
        let back: Vec<[f64; 2]> = (0..31).map(|i| {
            let j = perm.iter().position(|&p| p == i).unwrap();
            [b.row(j)[0], b.row(j)[1]]
        }).collect();
        assert_equal_up_to_sign(&a, &back, 1e-8);
    }
}

fn two_clusters(per: usize, seed: u64) -> Matrix<f64> {
    let mut rng = seeded(seed);
    let noise = Normal::new(0.0, 0.3).unwrap();
    let mut m = Matrix::zeros(2 * per, 5);
    for i in 0..2 * per {
        let centre = if i < per { 0.0 } else { 6.0 };
        for v in m.row_mut(i) {
            *v = centre + noise.sample(&mut rng);
        }
    }
    m
}

#[test]
fn tsne_bandwidths_hit_target_perplexity() {
    let rows = two_clusters(60, 4);
    let aff = affinities(&rows, 30.0);
    for i in 0..rows.rows() {
        let beta = aff.betas[i];
        let d: Vec<f64> = (0..rows.rows())
            .filter(|&j| j != i)
            .map(|j| crate::matrix::squared_distance(rows.row(i), rows.row(j)))
            .collect();
        let w: Vec<f64> = d.iter().map(|x| (-beta * x).exp()).collect();
        let z: f64 = w.iter().sum();
        let entropy: f64 = w
            .iter()
            .map(|x| x / z)
            .filter(|p| *p > 0.0)
            .map(|p| -p * p.ln())
            .sum();
        assert!(
            (entropy.exp() - 30.0).abs() < 1e-3,
            "row {i}: {}",
            entropy.exp()
        );
        let row_sum: f64 = aff.conditional.row(i).iter().sum();
        assert!((row_sum - 1.0).abs() < 1e-12 && aff.conditional.row(i)[i] == 0.0);
    }
}

#[test]
fn tsne_separates_clusters_and_reduces_kl() {
    let rows = two_clusters(50, 5);
    let params = TsneParams {
        perplexity: 15.0,
        iterations: 300,
        ..TsneParams::default()
    };
    let out = tsne2(&rows, &params, 11).unwrap();
    assert!(out.kl_final < out.kl_initial);
    let y = &out.coords;
    let (mut intra, mut inter, mut ni, mut nx) = (0.0, 0.0, 0, 0);
    for i in 0..100 {
        for j in (i + 1)..100 {
            let d = crate::matrix::squared_distance(y.row(i), y.row(j)).sqrt();
            if (i < 50) == (j < 50) {
                intra += d;
                ni += 1;
            } else {
                inter += d;
                nx += 1;
            }
        }
    }
    assert!(inter / nx as f64 > 2.0 * intra / ni as f64);
    let again = tsne2(&rows, &params, 11).unwrap();
    assert_eq!(again.coords, out.coords);
}

#[test]
fn tsne_preconditions() {
    let rows = two_clusters(10, 1);
    assert!(tsne2(&rows, &TsneParams::default(), 0).is_err());
    let big = Matrix::<f64>::zeros(TSNE_MAX_ROWS + 1, 2);
    assert!(tsne2(&big, &TsneParams::default(), 0).is_err());
}

#[test]
fn som_single_point_collapses() {
    let rows = Matrix::<f64>::from_rows(&vec![vec![0.3, 0.7, 0.1]; 20], 3).unwrap();
    let grid = som_fit(&rows, &SomParams::default(), 2).unwrap();
    assert!(*grid.quantization_error.last().unwrap() < 1e-6);
    let far: f64 = grid
        .weights
        .iter_rows()
        .map(|w| crate::matrix::squared_distance(w, rows.row(0)).sqrt())
        .fold(0.0, f64::max);
    assert!(far < 0.05, "farthest unit {far}");
}

#[test]
fn som_counts_partition_and_error_decreases() {
    let data = overlapping_clusters(300, 3, 0.3, 0.4, 6);
    let grid = som_fit(&data.features, &SomParams::default(), 8).unwrap();
    assert_eq!(grid.units(), 100);
    assert_eq!(grid.quantization_error.len(), 50);
    assert!(grid.quantization_error.last().unwrap() <= &grid.quantization_error[0]);
    assert!(grid.weights.all_finite());
    let tags: Vec<Tag> = data
        .labels
        .iter()
        .map(|&l| if l == 1 { Tag::Positive } else { Tag::Negative })
        .collect();
    let counts = grid.assign(&data.features, &tags).unwrap();
    let per_tag = |t: Tag| counts.iter().map(|c| c[t as usize]).sum::<usize>();
    assert_eq!(per_tag(Tag::Positive), 90);
    assert_eq!(per_tag(Tag::Negative), 210);
    assert_eq!(per_tag(Tag::Synthetic), 0);
}

#[test]
fn diagnostic_sample_tags() {
    let data = overlapping_clusters(500, 2, 0.2, 0.3, 7);
    let over = Oversampler::Classic(Method::Smote, ClassicParams::default());
    let s = diagnostic_sample(&data, &over, DIAGNOSTIC_REAL, DIAGNOSTIC_SYNTHETIC, 3).unwrap();
    assert_eq!(s.rows.rows(), 400);
    assert_eq!(s.tags.iter().filter(|t| **t == Tag::Synthetic).count(), 200);
    assert!(s.tags[..200].iter().all(|t| *t != Tag::Synthetic));
    for (r, t) in s.rows.iter_rows().zip(&s.tags).take(200) {
        let i = (0..data.len())
            .find(|&i| data.features.row(i) == r)
            .unwrap();
        assert_eq!(*t == Tag::Positive, data.labels[i] == 1);
    }
    let real_only = diagnostic_sample(&data, &over, 50, 0, 3).unwrap();
    assert_eq!(real_only.rows.rows(), 50);
    assert!(real_only.tags.iter().all(|t| *t != Tag::Synthetic));
}

fn record(
    method: &str,
    sampling: &str,
    usr: f64,
    osr: f64,
    fold: usize,
    f1: f64,
) -> ExperimentRecord {
    ExperimentRecord {
        dataset: "toy".into(),
        method: method.into(),
        sampling: sampling.into(),
        usr,
        osr,
        fold,
        train_f1: Some(f1 + 0.1),
        test_f1: Some(f1),
        wall_time_ms: None,
        status: Status::Ok,
    }
}

fn grid_records() -> Vec<ExperimentRecord> {
    let grid = [0.2, 0.5, 0.8];
    let mut out = Vec::new();
    for fold in 0..3 {
        out.push(record(BASELINE, "", 0.1, 0.1, fold, 0.4));
        for (a, &u) in grid.iter().enumerate() {
            out.push(record(
                "random_under",
                "",
                u,
                u,
                fold,
                0.5 + 0.01 * a as f64 + 0.001 * fold as f64,
            ));
            for (b, &o) in grid.iter().enumerate().skip(a + 1) {
                out.push(record(
                    "smote",
                    "",
                    u,
                    o,
                    fold,
                    0.45 + 0.03 * b as f64 - 0.002 * fold as f64,
                ));
                out.push(record(
                    "mv-vae",
                    "minority",
                    u,
                    o,
                    fold,
                    0.47 + 0.01 * (a + b) as f64,
                ));
            }
        }
    }
    out
}

fn parse(svg: &str) -> roxmltree::Document<'_> {
    roxmltree::Document::parse(svg).expect("well-formed SVG")
}

#[test]
fn heatmap_masks_lower_triangle() {
    let map = Heatmap::from_records(&grid_records(), "smote", "");
    assert_eq!((map.usr.len(), map.osr.len()), (3, 3));
    assert_eq!(map.filled(), 6);
    let svg = render_heatmap(&map);
    let doc = parse(&svg);
    let cells = doc
        .descendants()
        .filter(|n| n.attribute("class") == Some("cell"))
        .count();
    assert_eq!(cells, 6);
    let manual = Heatmap::new("m", vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0], |_, _| {
        HeatCell::Value(0.5)
    });
    assert_eq!(manual.filled(), 6);
    assert!(matches!(manual.cells[2][0], HeatCell::Masked));
}

#[test]
fn heatmap_values_equal_cell_means() {
    let records = grid_records();
    let stats = cell_stats(&records);
    let map = Heatmap::from_records(&records, "mv-vae", "minority");
    let svg = render_heatmap(&map);
    let doc = parse(&svg);
    let mut seen = 0;
    for node in doc
        .descendants()
        .filter(|n| n.attribute("class") == Some("cell"))
    {
        let u: f64 = node.attribute("data-usr").unwrap().parse().unwrap();
        let o: f64 = node.attribute("data-osr").unwrap().parse().unwrap();
        let v: f64 = node.attribute("data-value").unwrap().parse().unwrap();
        let method = if u == o { "random_under" } else { "mv-vae" };
        let cell = stats
            .iter()
            .find(|c| c.method == method && c.usr == u && c.osr == o)
            .unwrap();
        assert_eq!(v, cell.test_mean);
        seen += 1;
    }
    assert_eq!(seen, 6);
}

#[test]
fn heatmap_shows_timeouts() {
    let mut records = grid_records();
    for r in records
        .iter_mut()
        .filter(|r| r.method == "smote" && r.usr == 0.2 && r.osr == 0.8)
    {
        r.status = Status::Timeout;
        r.test_f1 = None;
        r.train_f1 = None;
    }
    let map = Heatmap::from_records(&records, "smote", "");
    assert!(matches!(map.cells[0][2], HeatCell::Timeout));
    let svg = render_heatmap(&map);
    assert!(parse(&svg)
        .descendants()
        .any(|n| n.attribute("class") == Some("cell timeout")));
}

#[test]
fn som_figure_has_full_pies() {
    let mut counts = vec![[0usize; 3]; 100];
    counts[0] = [3, 1, 2];
    counts[5] = [0, 4, 0];
    counts[42] = [7, 0, 7];
    counts[99] = [1, 1, 1];
    let svg = render_som("som <test>", 10, 10, &counts).unwrap();
    let doc = parse(&svg);
    let glyphs: Vec<_> = doc
        .descendants()
        .filter(|n| n.attribute("class") == Some("glyph"))
        .collect();
    assert_eq!(glyphs.len(), 100);
    for g in glyphs {
        let total: usize = g.attribute("data-count").unwrap().parse().unwrap();
        let sum: f64 = g
            .descendants()
            .filter(|n| n.attribute("class") == Some("slice"))
            .map(|n| n.attribute("data-angle").unwrap().parse::<f64>().unwrap())
            .sum();
        if total > 0 {
            assert!((sum - 360.0).abs() < 1e-4, "{sum}");
        } else {
            assert_eq!(sum, 0.0);
        }
    }
}

#[test]
fn scatter_is_well_formed() {
    let coords = Matrix::from_rows(&[vec![0.0, 1.0], vec![2.0, -1.0], vec![1.0, 1.0]], 2).unwrap();
    let svg = render_scatter(
        "a & b",
        &coords,
        &[Tag::Negative, Tag::Positive, Tag::Synthetic],
    )
    .unwrap();
    let doc = parse(&svg);
    assert_eq!(
        doc.descendants()
            .filter(|n| n.attribute("class") == Some("point"))
            .count(),
        3
    );
    assert!(render_scatter("x", &coords, &[Tag::Negative]).is_err());
}

#[test]
fn emitted_files_are_deterministic() {
    let records = grid_records();
    let dir = tempfile::tempdir().unwrap();
    let a = emit_heatmaps(&records, "toy", &dir.path().join("a")).unwrap();
    let b = emit_heatmaps(&records, "toy", &dir.path().join("b")).unwrap();
    let names: Vec<String> = a
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    assert_eq!(
        names,
        vec![
            "toy__mv-vae__minority__heatmap.svg",
            "toy__smote__none__heatmap.svg"
        ]
    );
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
    }
    let tables = emit_tables(&records, "toy", 0.1, "GBT (stand-in)", dir.path()).unwrap();
    let csv = std::fs::read_to_string(&tables[1]).unwrap();
    assert!(csv.starts_with(
        "method,sampling,kind,usr,osr,folds,train_mean,train_sd,test_mean,test_sd,status\n"
    ));
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn diagnostics_emit_three_parseable_figures() {
    let data = overlapping_clusters(300, 3, 0.2, 0.3, 2);
    let over = Oversampler::Classic(Method::Smote, ClassicParams::default());
    let s = diagnostic_sample(&data, &over, 120, 60, 1).unwrap();
    let config = DiagnosticConfig {
        tsne: TsneParams {
            iterations: 150,
            ..TsneParams::default()
        },
        som: SomParams {
            epochs: 10,
            ..SomParams::default()
        },
        seed: 4,
    };
    let dir = tempfile::tempdir().unwrap();
    let files = emit_diagnostics(&s, "clusters", "smote", "", &config, dir.path()).unwrap();
    assert_eq!(files.len(), 3);
    for f in &files {
        let text = std::fs::read_to_string(f).unwrap();
        parse(&text);
    }
    assert!(files[2].ends_with("clusters__smote__none__som.svg"));
}

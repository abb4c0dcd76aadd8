use proptest::prelude::*;
use rand::Rng;

use super::*;
use crate::rng::seeded;
use crate::tabular::{make_folds, VariableMeta};

fn meta(d: usize) -> Vec<VariableMeta> {
    (0..d)
        .map(|i| VariableMeta::numerical(format!("x{i}"), 0.0, 1.0))
        .collect()
}

fn separable(n: usize, seed: u64) -> Dataset<f64> {
    let mut rng = seeded(seed);
    let mut x = Matrix::zeros(n, 2);
    let mut labels = Vec::new();
    for i in 0..n {
        let pos = i % 4 == 0;
        let c = if pos { 0.8 } else { 0.2 };
        x.row_mut(i)[0] = c + rng.gen_range(-0.1..0.1);
        x.row_mut(i)[1] = c + rng.gen_range(-0.1..0.1);
        labels.push(u8::from(pos));
    }
    Dataset::new("sep", x, labels, meta(2)).unwrap()
}

fn noisy(n: usize, d: usize, seed: u64) -> Dataset<f64> {
    let mut rng = seeded(seed);
    let mut x = Matrix::zeros(n, d);
    let mut labels = Vec::new();
    for i in 0..n {
        let r = x.row_mut(i);
        for v in r.iter_mut() {
            *v = (rng.gen::<f64>() * 10.0).round() / 10.0;
        }
        let s = r[0] + 0.5 * r[1] - 0.3 * r[d - 1];
        labels.push(u8::from(s + rng.gen_range(-0.3..0.3) > 0.7));
    }
    Dataset::new("noisy", x, labels, meta(d)).unwrap()
}

#[test]
fn separable_set_is_fit_perfectly() {
    let ds = separable(80, 1);
    let m = fit(
        &ds,
        &BoostConfig {
            n_estimators: 20,
            ..BoostConfig::default()
        },
    )
    .unwrap();
    assert_eq!(f1(&m.predict(&ds.features).unwrap(), &ds.labels), 1.0);
}

#[test]
fn config_preconditions() {
    let ds = separable(20, 1);
    assert!(fit(
        &ds,
        &BoostConfig {
            n_estimators: 0,
            ..BoostConfig::default()
        }
    )
    .is_err());
    assert!(fit(
        &ds,
        &BoostConfig {
            learning_rate: 1.5,
            ..BoostConfig::default()
        }
    )
    .is_err());
    let one = ds.subset(&ds.indices_of(0));
    assert!(matches!(
        fit(&one, &BoostConfig::default()),
        Err(Error::DegenerateLabels)
    ));
}

#[test]
fn stump_matches_exhaustive_split_scan() {
    let mut rng = seeded(3);
    let n = 60;
    let xs: Vec<f64> = (0..n)
        .map(|_| (rng.gen::<f64>() * 20.0).floor() / 20.0)
        .collect();
    let labels: Vec<u8> = xs
        .iter()
        .map(|&x| u8::from(x > 0.55 || rng.gen_bool(0.1)))
        .collect();
    let ds = Dataset::new(
        "s",
        Matrix::from_vec(n, 1, xs.clone()).unwrap(),
        labels.clone(),
        meta(1),
    )
    .unwrap();
    let cfg = BoostConfig {
        n_estimators: 1,
        max_depth: 1,
        learning_rate: 1.0,
        min_child_weight: 0.0,
        ..BoostConfig::default()
    };
    let m = fit(&ds, &cfg).unwrap();
    let Node::Split { threshold, .. } = m.trees[0].nodes[0] else {
        panic!("no split")
    };
    // oracle: scan every midpoint between distinct values with the same gain formula
    let pos = labels.iter().filter(|&&l| l == 1).count() as f64;
    let p0 = pos / n as f64;
    let g: Vec<f64> = labels.iter().map(|&y| p0 - f64::from(y)).collect();
    let h = p0 * (1.0 - p0);
    let mut vals = xs.clone();
    vals.sort_by(f64::total_cmp);
    vals.dedup();
    let score = |gs: f64, hs: f64| gs * gs / (hs + 1.0);
    let (gt, ht) = (g.iter().sum::<f64>(), h * n as f64);
    let mut best = (f64::MIN, 0.0);
    for w in vals.windows(2) {
        let t = 0.5 * (w[0] + w[1]);
        let (gl, cnt) = xs
            .iter()
            .zip(&g)
            .filter(|(&x, _)| x < t)
            .fold((0.0, 0.0), |(a, c), (_, &gi)| (a + gi, c + 1.0));
        let gain = score(gl, h * cnt) + score(gt - gl, ht - h * cnt) - score(gt, ht);
        if gain > best.0 + 1e-12 {
            best = (gain, t);
        }
    }
    assert!(
        (threshold - best.1).abs() < 0.05 + 1e-12,
        "{threshold} vs {}",
        best.1
    );
}

#[test]
fn empty_model_and_zero_tree() {
    let rows = Matrix::from_vec(3, 2, vec![0.0, 1.0, 0.5, 0.5, 1.0, 0.0]).unwrap();
    let m = BoostModel::constant(2, 0.0);
    assert_eq!(m.predict_proba(&rows).unwrap(), vec![0.5; 3]);
    let ds = noisy(100, 3, 2);
    let mut fitted = fit(
        &ds,
        &BoostConfig {
            n_estimators: 5,
            ..BoostConfig::default()
        },
    )
    .unwrap();
    let before = fitted.predict_proba(&ds.features).unwrap();
    fitted.trees.push(Tree {
        nodes: vec![Node::Leaf { weight: 0.0 }],
    });
    assert_eq!(fitted.predict_proba(&ds.features).unwrap(), before);
    assert!(matches!(fitted.predict_proba(&rows), Err(Error::Shape(_))));
}

#[test]
fn f1_examples() {
    assert_eq!(f1(&[1, 0, 1], &[1, 0, 1]), 1.0);
    assert_eq!(f1(&[0, 0, 0], &[1, 0, 1]), 0.0);
    // TP=2, FP=1, FN=1
    let got = f1(&[1, 1, 1, 0, 0], &[1, 1, 0, 1, 0]);
    let (p, r) = (2.0 / 3.0, 2.0 / 3.0);
    assert!((got - 2.0 * p * r / (p + r)).abs() < 1e-15);
}

#[test]
fn training_loss_never_increases() {
    let ds = noisy(300, 4, 5);
    let cfg = BoostConfig {
        n_estimators: 40,
        max_depth: 3,
        learning_rate: 0.3,
        ..BoostConfig::default()
    };
    let m = fit(&ds, &cfg).unwrap();
    let mut prev = f64::INFINITY;
    for t in 0..=m.trees.len() {
        let partial = BoostModel {
            trees: m.trees[..t].to_vec(),
            ..m.clone()
        };
        let loss = logistic_loss(&partial.logits(&ds.features).unwrap(), &ds.labels);
        assert!(loss <= prev + 1e-12, "round {t}: {loss} > {prev}");
        prev = loss;
    }
}

#[test]
fn model_bytes_are_deterministic_and_reload() {
    let ds = noisy(150, 3, 9);
    let cfg = BoostConfig {
        n_estimators: 10,
        ..BoostConfig::default()
    };
    let a = fit(&ds, &cfg).unwrap().to_json().unwrap();
    assert_eq!(a, fit(&ds, &cfg).unwrap().to_json().unwrap());
    let back = BoostModel::<f64>::from_json(&a).unwrap();
    assert_eq!(back.to_json().unwrap(), a);
    assert!(a.contains("\"threshold\"") && a.contains("\"weight\""));
}

#[test]
fn grid_search_picks_best_and_breaks_ties() {
    let ds = separable(80, 2);
    let folds = make_folds(&ds.labels, 4, 0.0, 1).unwrap();
    let grid: Vec<BoostConfig> = [(2, 30), (1, 10), (3, 20)]
        .iter()
        .map(|&(max_depth, n_estimators)| BoostConfig {
            max_depth,
            n_estimators,
            ..BoostConfig::default()
        })
        .collect();
    let (best, scores) = grid_search(&ds, &folds, &grid).unwrap();
    assert!(scores.iter().all(|s| s.mean_test_f1 == 1.0));
    assert_eq!((best.n_estimators, best.max_depth), (10, 1));
    let (single, _) = grid_search(&ds, &folds, &grid[2..]).unwrap();
    assert_eq!(single, grid[2]);
    assert!(grid_search(&ds, &folds, &[]).is_err());
    assert_eq!(default_grid().len(), 24);
}

#[test]
fn grid_search_prefers_higher_score() {
    let ds = noisy(200, 3, 4);
    let folds = make_folds(&ds.labels, 3, 0.0, 2).unwrap();
    let grid = [
        BoostConfig {
            n_estimators: 1,
            max_depth: 1,
            learning_rate: 0.1,
            ..BoostConfig::default()
        },
        BoostConfig {
            n_estimators: 50,
            max_depth: 3,
            ..BoostConfig::default()
        },
    ];
    let (best, scores) = grid_search(&ds, &folds, &grid).unwrap();
    let top = scores
        .iter()
        .map(|s| s.mean_test_f1)
        .fold(f64::MIN, f64::max);
    assert_eq!(
        scores
            .iter()
            .find(|s| s.config == best)
            .unwrap()
            .mean_test_f1,
        top
    );
}

#[test]
fn works_in_single_precision() {
    let ds = separable(40, 3);
    let ds32 = Dataset::new(
        "s",
        ds.features.cast::<f32>(),
        ds.labels.clone(),
        ds.meta.clone(),
    )
    .unwrap();
    let m = fit(
        &ds32,
        &BoostConfig {
            n_estimators: 10,
            ..BoostConfig::default()
        },
    )
    .unwrap();
    assert_eq!(f1(&m.predict(&ds32.features).unwrap(), &ds32.labels), 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn f1_permutation_invariant(pairs in prop::collection::vec((0u8..2, 0u8..2), 1..50), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let (p, y): (Vec<u8>, Vec<u8>) = pairs.iter().copied().unzip();
        let mut idx: Vec<usize> = (0..p.len()).collect();
        idx.shuffle(&mut seeded(seed));
        let p2: Vec<u8> = idx.iter().map(|&i| p[i]).collect();
        let y2: Vec<u8> = idx.iter().map(|&i| y[i]).collect();
        prop_assert_eq!(f1(&p, &y), f1(&p2, &y2));
    }

    #[test]
    fn probabilities_open_interval(seed in any::<u64>()) {
        let ds = noisy(60, 2, seed);
        prop_assume!(ds.class_counts().0 > 0 && ds.class_counts().1 > 0);
        let m = fit(&ds, &BoostConfig { n_estimators: 30, learning_rate: 1.0, max_depth: 6, ..BoostConfig::default() }).unwrap();
        for p in m.predict_proba(&ds.features).unwrap() {
            prop_assert!(p > 0.0 && p < 1.0);
        }
    }
}

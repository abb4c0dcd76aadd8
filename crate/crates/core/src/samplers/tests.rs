use std::cell::RefCell;

use rand::{Rng, RngCore};

use super::*;
use crate::models::{train, ModelSpec};
use crate::rng::seeded;
use crate::tabular::VariableMeta;

fn meta() -> Vec<VariableMeta> {
    vec![
        VariableMeta::categorical_n("c", 3),
        VariableMeta::binary("b"),
        VariableMeta::numerical("x", 0.0, 1.0),
    ]
}

fn dataset(n: usize, positives: usize) -> Dataset<f64> {
    let mut rng = seeded(4);
    let mut x = Matrix::zeros(n, 5);
    for i in 0..n {
        let r = x.row_mut(i);
        r[rng.gen_range(0..3)] = 1.0;
        r[3] = f64::from(u8::from(rng.gen_bool(0.5)));
        r[4] = rng.gen();
    }
    let labels = (0..n).map(|i| u8::from(i < positives)).collect();
    Dataset::new("toy", x, labels, meta()).unwrap()
}

/// Emits soft rows whose label column is 1 with probability `p_one`, and
/// records every condition it was asked for.
struct Stub {
    meta: Vec<VariableMeta>,
    kind: SamplingKind,
    p_one: f64,
    calls: RefCell<Vec<(usize, Option<u8>)>>,
}

impl Stub {
    fn new(kind: SamplingKind, p_one: f64) -> Self {
        let meta = if kind == SamplingKind::Rejection {
            with_label_variable(&meta())
        } else {
            meta()
        };
        Self {
            meta,
            kind,
            p_one,
            calls: RefCell::new(Vec::new()),
        }
    }
}

impl RowGenerator for Stub {
    fn meta(&self) -> &[VariableMeta] {
        &self.meta
    }

    fn strategy(&self) -> SamplingKind {
        self.kind
    }

    fn generate_rows(
        &self,
        n: usize,
        rng: &mut dyn RngCore,
        condition: Option<u8>,
    ) -> Result<Matrix<f64>> {
        self.calls.borrow_mut().push((n, condition));
        let w = total_width(&self.meta);
        let mut m = Matrix::zeros(n, w);
        for i in 0..n {
            let r = m.row_mut(i);
            for v in r.iter_mut() {
                *v = rng.gen_range(-0.2..1.2);
            }
            if self.kind == SamplingKind::Rejection {
                r[w - 1] = if rng.gen::<f64>() < self.p_one {
                    0.9
                } else {
                    0.1
                };
            }
        }
        Ok(m)
    }
}

#[test]
fn views_have_expected_shapes() {
    let ds = dataset(1000, 50);
    let all: Vec<usize> = (0..1000).collect();
    let m = training_view(&ds, &all, SamplingKind::Minority).unwrap();
    assert_eq!(m.rows.shape(), (50, 5));
    assert!(m.row_ids.iter().all(|&i| ds.labels[i] == 1));
    let c = training_view(&ds, &all, SamplingKind::Conditional).unwrap();
    assert_eq!(c.len(), 1000);
    assert_eq!(c.labels.as_deref(), Some(&ds.labels[..]));
    let r = training_view(&ds, &all, SamplingKind::Rejection).unwrap();
    assert_eq!(r.rows.cols(), ds.width() + 1);
    for (i, row) in r.rows.iter_rows().enumerate() {
        assert_eq!(row[5], f64::from(ds.labels[i]));
    }
    assert!(matches!(
        training_view(&ds, &all[100..], SamplingKind::Minority),
        Err(Error::DegenerateLabels)
    ));
}

#[test]
fn minority_and_conditional_draws() {
    let g = Stub::new(SamplingKind::Minority, 0.0);
    let rows = draw_minority(&g, 7, &mut seeded(1)).unwrap();
    assert_eq!(rows.rows(), 7);
    validate_encoding(&rows, &meta()).unwrap();
    assert_eq!(rows, draw_minority(&g, 7, &mut seeded(1)).unwrap());
    assert_eq!(draw_minority(&g, 0, &mut seeded(1)).unwrap().rows(), 0);

    let g = Stub::new(SamplingKind::Conditional, 0.0);
    for class in [1u8, 0] {
        let rows = draw_conditional(&g, 10, class, &mut seeded(2)).unwrap();
        assert_eq!(rows.rows(), 10);
        validate_encoding(&rows, &meta()).unwrap();
    }
    assert_eq!(*g.calls.borrow(), vec![(10, Some(1)), (10, Some(0))]);
    let strategy = SamplingStrategy::new(SamplingKind::Minority);
    assert!(matches!(
        draw(&g, &strategy, 3, 1, &mut seeded(0)),
        Err(Error::StrategyMismatch(_))
    ));
    let g = Stub::new(SamplingKind::Minority, 0.0);
    assert!(matches!(
        draw(&g, &strategy, 3, 0, &mut seeded(0)),
        Err(Error::StrategyMismatch(_))
    ));
}

#[test]
fn conditional_generator_sees_one_hot_condition() {
    // instrument the real model: the condition block fed to the network is
    // reconstructed here and compared with the class
    let ds = dataset(60, 20);
    let all: Vec<usize> = (0..60).collect();
    let mut spec = ModelSpec::from_name("mv-vae")
        .unwrap()
        .for_strategy(SamplingKind::Conditional);
    spec.hidden = vec![4];
    spec.latent = 2;
    spec.embedding = 2;
    spec.training.epochs = 1;
    let set = training_view(&ds, &all, SamplingKind::Conditional).unwrap();
    let g = train(&spec, &set, None, 1).unwrap();
    for class in [0u8, 1] {
        let cond = crate::models::condition_matrix(4, class);
        let rows = draw_conditional(&g, 4, class, &mut seeded(3)).unwrap();
        let direct = g
            .networks()
            .sample(&g.params, 4, Some(&cond), &mut seeded(3));
        assert_eq!(rows, crate::tabular::discretize_rows(&direct, &g.meta));
        for r in cond.iter_rows() {
            assert_eq!(r, if class == 1 { &[0.0, 1.0] } else { &[1.0, 0.0] });
        }
    }
}

#[test]
fn rejection_always_accepting_uses_ceil_batches() {
    let g = Stub::new(SamplingKind::Rejection, 1.0);
    let r = draw_rejection(&g, 1234, 1, 10_000, 500, &mut seeded(0)).unwrap();
    assert_eq!(r.rows.shape(), (1234, 5));
    assert_eq!(r.batches, 3);
    validate_encoding(&r.rows, &meta()).unwrap();
}

#[test]
fn rejection_never_accepting_times_out_at_limit() {
    let g = Stub::new(SamplingKind::Rejection, 0.0);
    match draw_rejection(&g, 10, 1, DEFAULT_DRAW_LIMIT, 300, &mut seeded(0)) {
        Err(Error::DrawLimitExceeded {
            kept: 0,
            wanted: 10,
            draws,
        }) => assert_eq!(draws, DEFAULT_DRAW_LIMIT),
        other => panic!("{other:?}"),
    }
    let total: usize = g.calls.borrow().iter().map(|c| c.0).sum();
    assert_eq!(total, DEFAULT_DRAW_LIMIT);
}

#[test]
fn rejection_half_acceptance_succeeds() {
    // P(Binomial(10000, 0.5) < 1000) is far below 1e-3
    for seed in 0..20 {
        let g = Stub::new(SamplingKind::Rejection, 0.5);
        let r = draw_rejection(&g, 1000, 0, 10_000, DEFAULT_DRAW_BATCH, &mut seeded(seed)).unwrap();
        assert_eq!(r.rows.rows(), 1000);
        assert!(r.draws <= 10_000);
    }
}

#[test]
fn rejection_keeps_rows_by_discretized_label() {
    let g = Stub::new(SamplingKind::Rejection, 0.3);
    let mut a = seeded(8);
    let r = draw_rejection(&g, 50, 1, 10_000, 64, &mut a).unwrap();
    // replay the generator stream and filter by hand
    let mut b = seeded(8);
    let mut expected = Matrix::zeros(0, 5);
    'outer: for _ in 0..r.batches {
        let raw = g.generate_rows(64, &mut b, None).unwrap();
        for row in raw.iter_rows() {
            let d = discretize(row, &g.meta);
            if d[5] == 1.0 {
                expected.push_row(&d[..5]);
                if expected.rows() == 50 {
                    break 'outer;
                }
            }
        }
    }
    assert_eq!(r.rows, expected);
}

#[test]
fn rejection_needs_label_variable_model() {
    let g = Stub::new(SamplingKind::Minority, 0.0);
    assert!(matches!(
        draw_rejection(&g, 1, 1, 10, 1, &mut seeded(0)),
        Err(Error::StrategyMismatch(_))
    ));
    let g = Stub::new(SamplingKind::Rejection, 1.0);
    assert!(draw_rejection(&g, 1, 1, 0, 1, &mut seeded(0)).is_err());
    assert_eq!(
        draw_rejection(&g, 0, 1, 10, 5, &mut seeded(0))
            .unwrap()
            .draws,
        0
    );
}

mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn rejection_respects_bounds(n in 0usize..300, limit in 1usize..2000, batch in 1usize..400, p in 0.0f64..1.0, seed in any::<u64>()) {
            let g = Stub::new(SamplingKind::Rejection, p);
            match draw_rejection(&g, n, 1, limit, batch, &mut seeded(seed)) {
                Ok(r) => {
                    prop_assert_eq!(r.rows.rows(), n);
                    prop_assert!(r.draws <= limit);
                    prop_assert!(validate_encoding(&r.rows, &meta()).is_ok());
                }
                Err(Error::DrawLimitExceeded { kept, wanted, draws }) => {
                    prop_assert!(kept < wanted);
                    prop_assert_eq!(draws, limit);
                }
                Err(e) => prop_assert!(false, "{e}"),
            }
            let total: usize = g.calls.borrow().iter().map(|c| c.0).sum();
            prop_assert!(total <= limit);
        }
    }
}

//! Building blocks shared by the architectures: dense stacks, per-variable
//! input embeddings, mixed-type output heads and the per-variable
//! reconstruction loss.

use rand::Rng;

use crate::diff::{dense, gumbel_softmax, loss, Activation, Bound, LossKind, ParamSet, Tape, Var};
use crate::tabular::{blocks, total_width, VariableKind, VariableMeta};

#[derive(Debug, Clone)]
pub struct Dense {
    pub name: String,
    pub act: Activation,
}

impl Dense {
    pub fn init<R: Rng + ?Sized>(
        params: &mut ParamSet<f64>,
        name: impl Into<String>,
        fan_in: usize,
        fan_out: usize,
        act: Activation,
        rng: &mut R,
    ) -> Self {
        let name = name.into();
        params.add_dense(&name, fan_in, fan_out, rng);
        Self { name, act }
    }

    pub fn forward(&self, t: &mut Tape<f64>, p: &Bound, x: Var) -> Var {
        let w = p.var(&format!("{}.w", self.name));
        let b = p.var(&format!("{}.b", self.name));
        dense(t, x, w, b, self.act).expect("layer shapes fixed at construction")
    }
}

/// Sequence of dense layers.
#[derive(Debug, Clone, Default)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

impl Mlp {
    /// Hidden layers of the given widths, all with `act`. Returns the stack and
    /// its output width (`input` when `hidden` is empty).
    pub fn init<R: Rng + ?Sized>(
        params: &mut ParamSet<f64>,
        prefix: &str,
        input: usize,
        hidden: &[usize],
        act: Activation,
        rng: &mut R,
    ) -> (Self, usize) {
        let mut layers = Vec::with_capacity(hidden.len());
        let mut width = input;
        for (i, &h) in hidden.iter().enumerate() {
            layers.push(Dense::init(
                params,
                format!("{prefix}.l{i}"),
                width,
                h,
                act,
                rng,
            ));
            width = h;
        }
        (Self { layers }, width)
    }

    pub fn forward(&self, t: &mut Tape<f64>, p: &Bound, mut x: Var) -> Var {
        for l in &self.layers {
            x = l.forward(t, p, x);
        }
        x
    }
}

/// Data entering a network: as-is, or split by variable with one linear
/// embedding per variable and the embeddings concatenated.
#[derive(Debug, Clone)]
pub enum InputEncoder {
    Plain {
        width: usize,
    },
    PerVariable {
        blocks: Vec<(usize, usize)>,
        embeddings: Vec<Dense>,
        dim: usize,
    },
}

impl InputEncoder {
    pub fn plain(width: usize) -> Self {
        Self::Plain { width }
    }

    pub fn per_variable<R: Rng + ?Sized>(
        params: &mut ParamSet<f64>,
        prefix: &str,
        meta: &[VariableMeta],
        dim: usize,
        rng: &mut R,
    ) -> Self {
        let embeddings = meta
            .iter()
            .enumerate()
            .map(|(i, v)| {
                Dense::init(
                    params,
                    format!("{prefix}.v{i}"),
                    v.width,
                    dim,
                    Activation::Identity,
                    rng,
                )
            })
            .collect();
        Self::PerVariable {
            blocks: blocks(meta),
            embeddings,
            dim,
        }
    }

    pub fn output_width(&self) -> usize {
        match self {
            Self::Plain { width } => *width,
            Self::PerVariable {
                embeddings, dim, ..
            } => embeddings.len() * dim,
        }
    }

    pub fn forward(&self, t: &mut Tape<f64>, p: &Bound, x: Var) -> Var {
        match self {
            Self::Plain { .. } => x,
            Self::PerVariable {
                blocks, embeddings, ..
            } => {
                let parts: Vec<Var> = blocks
                    .iter()
                    .zip(embeddings)
                    .map(|(&(start, width), e)| {
                        let block = t.slice_cols(x, start, width);
                        e.forward(t, p, block)
                    })
                    .collect();
                t.concat_cols(&parts)
            }
        }
    }
}

/// Output layer producing a row in the encoded space.
#[derive(Debug, Clone)]
pub enum OutputHeads {
    /// One sigmoid layer over every column.
    Plain(Dense),
    /// One head per variable from the shared hidden layer: Gumbel-softmax for
    /// categorical blocks, sigmoid for binary and numerical columns.
    PerVariable {
        heads: Vec<(VariableKind, Dense)>,
        tau: f64,
    },
}

impl OutputHeads {
    pub fn plain<R: Rng + ?Sized>(
        params: &mut ParamSet<f64>,
        prefix: &str,
        hidden: usize,
        width: usize,
        rng: &mut R,
    ) -> Self {
        Self::Plain(Dense::init(
            params,
            format!("{prefix}.all"),
            hidden,
            width,
            Activation::Sigmoid,
            rng,
        ))
    }

    pub fn per_variable<R: Rng + ?Sized>(
        params: &mut ParamSet<f64>,
        prefix: &str,
        hidden: usize,
        meta: &[VariableMeta],
        tau: f64,
        rng: &mut R,
    ) -> Self {
        let heads = meta
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let act = match v.kind {
                    VariableKind::Categorical => Activation::Identity,
                    _ => Activation::Sigmoid,
                };
                (
                    v.kind,
                    Dense::init(params, format!("{prefix}.v{i}"), hidden, v.width, act, rng),
                )
            })
            .collect();
        Self::PerVariable { heads, tau }
    }

    /// With `rng = None` categorical heads use a plain tempered softmax
    /// (no Gumbel noise); used for validation scoring.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        t: &mut Tape<f64>,
        p: &Bound,
        h: Var,
        rng: Option<&mut R>,
    ) -> Var {
        match self {
            Self::Plain(d) => d.forward(t, p, h),
            Self::PerVariable { heads, tau } => {
                let mut rng = rng;
                let parts: Vec<Var> = heads
                    .iter()
                    .map(|(kind, d)| {
                        let y = d.forward(t, p, h);
                        if *kind != VariableKind::Categorical {
                            return y;
                        }
                        match rng.as_deref_mut() {
                            Some(r) => gumbel_softmax(t, y, *tau, r),
                            None => {
                                let z = t.scale(y, 1.0 / *tau);
                                t.softmax(z)
                            }
                        }
                    })
                    .collect();
                t.concat_cols(&parts)
            }
        }
    }
}

/// Sum over variables of cross-entropy (categorical blocks), binary
/// cross-entropy (binary columns) and squared error (numerical columns),
/// each averaged over the batch.
pub fn reconstruction_loss(
    t: &mut Tape<f64>,
    output: Var,
    target: Var,
    meta: &[VariableMeta],
) -> Var {
    assert_eq!(
        t.shape(output).1,
        total_width(meta),
        "output width must match metadata"
    );
    let mut total: Option<Var> = None;
    for (v, (start, width)) in meta.iter().zip(blocks(meta)) {
        let o = t.slice_cols(output, start, width);
        let y = t.slice_cols(target, start, width);
        let kind = match v.kind {
            VariableKind::Categorical => LossKind::CrossEntropy,
            VariableKind::Binary => LossKind::BinaryCrossEntropy,
            VariableKind::Numerical => LossKind::MeanSquaredError,
        };
        let l = loss(t, kind, o, y);
        total = Some(match total {
            None => l,
            Some(acc) => t.add(acc, l),
        });
    }
    total.unwrap_or_else(|| t.scalar_leaf(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use crate::rng::{seeded, SeedRng};

    fn meta_c3_n() -> Vec<VariableMeta> {
        vec![
            VariableMeta::categorical_n("c", 3),
            VariableMeta::numerical("x", 0.0, 1.0),
        ]
    }

    #[test]
    fn heads_width_and_simplex() {
        let mut rng = seeded(0);
        let mut p = ParamSet::new(0);
        let meta = meta_c3_n();
        let heads = OutputHeads::per_variable(&mut p, "out", 8, &meta, 0.66, &mut rng);
        let mut t = Tape::new();
        let b = p.bind(&mut t);
        let h = t.leaf(Matrix::uniform(5, 8, 1.0, &mut rng));
        let y = heads.forward(&mut t, &b, h, Some(&mut rng));
        assert_eq!(t.shape(y), (5, 4));
        for r in t.value(y).iter_rows() {
            assert!((r[..3].iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(r[3] > 0.0 && r[3] < 1.0);
        }
    }

    #[test]
    fn low_temperature_heads_are_nearly_one_hot() {
        let mut rng = seeded(1);
        let mut p = ParamSet::new(0);
        let meta = meta_c3_n();
        let heads = OutputHeads::per_variable(&mut p, "out", 8, &meta, 0.01, &mut rng);
        let mut t = Tape::new();
        let b = p.bind(&mut t);
        let h = t.leaf(Matrix::uniform(50, 8, 3.0, &mut rng));
        let y = heads.forward(&mut t, &b, h, Some(&mut rng));
        let peaked = t
            .value(y)
            .iter_rows()
            .filter(|r| r[..3].iter().any(|&x| x > 0.99))
            .count();
        assert!(peaked >= 45, "{peaked} of 50 rows near one-hot");
    }

    #[test]
    fn all_binary_heads_match_plain_width() {
        let mut rng = seeded(2);
        let mut p = ParamSet::new(0);
        let meta: Vec<_> = (0..4)
            .map(|i| VariableMeta::binary(format!("b{i}")))
            .collect();
        let mv = OutputHeads::per_variable(&mut p, "mv", 6, &meta, 0.66, &mut rng);
        let plain = OutputHeads::plain(&mut p, "plain", 6, 4, &mut rng);
        let mut t = Tape::new();
        let b = p.bind(&mut t);
        let h = t.leaf(Matrix::uniform(3, 6, 1.0, &mut rng));
        let a = mv.forward::<SeedRng>(&mut t, &b, h, None);
        let c = plain.forward::<SeedRng>(&mut t, &b, h, None);
        assert_eq!(t.shape(a), t.shape(c));
        assert!(
            matches!(&mv, OutputHeads::PerVariable { heads, .. } if heads.iter().all(|(_, d)| d.act == Activation::Sigmoid))
        );
    }

    #[test]
    fn embeddings_concatenate_and_identity_reproduces_input() {
        let mut rng = seeded(3);
        let mut p = ParamSet::new(0);
        let meta = vec![
            VariableMeta::categorical_n("c", 3),
            VariableMeta::binary("b"),
        ];
        let enc = InputEncoder::per_variable(&mut p, "in", &meta, 5, &mut rng);
        assert_eq!(enc.output_width(), 10);

        // identity embeddings (dimension = block width) reproduce each block
        let mut q = ParamSet::new(0);
        q.insert("id.v0.w", Matrix::identity(3));
        q.insert("id.v0.b", Matrix::zeros(1, 3));
        q.insert("id.v1.w", Matrix::identity(1));
        q.insert("id.v1.b", Matrix::zeros(1, 1));
        let embeddings = (0..2)
            .map(|i| Dense {
                name: format!("id.v{i}"),
                act: Activation::Identity,
            })
            .collect();
        let enc_id = InputEncoder::PerVariable {
            blocks: blocks(&meta),
            embeddings,
            dim: 0,
        };
        let mut t = Tape::new();
        let b = q.bind(&mut t);
        let x =
            t.leaf(Matrix::from_vec(2, 4, vec![0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0]).unwrap());
        let y = enc_id.forward(&mut t, &b, x);
        assert_eq!(t.value(y), t.value(x));
    }

    #[test]
    fn reconstruction_loss_is_sum_of_blocks() {
        let meta = vec![
            VariableMeta::categorical_n("c", 3),
            VariableMeta::binary("b"),
            VariableMeta::numerical("x", 0.0, 1.0),
        ];
        let out =
            Matrix::from_vec(2, 5, vec![0.2, 0.5, 0.3, 0.8, 0.4, 0.6, 0.3, 0.1, 0.1, 0.9]).unwrap();
        let tgt =
            Matrix::from_vec(2, 5, vec![0.0, 1.0, 0.0, 1.0, 0.5, 1.0, 0.0, 0.0, 0.0, 0.7]).unwrap();
        let mut t = Tape::new();
        let o = t.leaf(out.clone());
        let y = t.leaf(tgt.clone());
        let l = reconstruction_loss(&mut t, o, y, &meta);
        // independent per-block recomputation
        let mut expect = 0.0;
        for i in 0..2 {
            let (r, g) = (out.row(i), tgt.row(i));
            expect += -(0..3).map(|j| g[j] * r[j].ln()).sum::<f64>() / 2.0;
            expect += -(g[3] * r[3].ln() + (1.0 - g[3]) * (1.0 - r[3]).ln()) / 2.0;
            expect += (r[4] - g[4]).powi(2) / 2.0;
        }
        assert!((t.scalar(l) - expect).abs() < 1e-12);

        let num_meta = vec![VariableMeta::numerical("x", 0.0, 1.0)];
        let z = t.leaf(Matrix::from_vec(3, 1, vec![0.1, 0.5, 0.9]).unwrap());
        let l = reconstruction_loss(&mut t, z, z, &num_meta);
        assert_eq!(t.scalar(l), 0.0);
    }
}

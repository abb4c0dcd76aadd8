//! Network construction, per-step training objectives and raw generation for
//! each architecture.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::layers::{reconstruction_loss, Dense, InputEncoder, Mlp, OutputHeads};
use super::spec::{Architecture, ModelSpec};
use crate::diff::{
    gradient_penalty, interpolate, logistic_loss, loss, Activation, Bound, LossKind, ParamSet,
    Tape, Var,
};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::tabular::{blocks, total_width, VariableKind, VariableMeta};

/// Width of the one-hot class condition.
pub const CONDITION_WIDTH: usize = 2;

/// One training minibatch: encoded rows and, for conditional models, the
/// one-hot class condition of each row.
#[derive(Debug, Clone)]
pub struct Batch {
    pub x: Matrix<f64>,
    pub cond: Option<Matrix<f64>>,
}

/// `n×2` one-hot rows, column `c` set for class `c`.
pub fn one_hot_labels(labels: &[u8]) -> Matrix<f64> {
    let mut m = Matrix::zeros(labels.len(), CONDITION_WIDTH);
    for (i, &l) in labels.iter().enumerate() {
        m.row_mut(i)[usize::from(l.min(1))] = 1.0;
    }
    m
}

/// The same class condition repeated for `n` rows.
pub fn condition_matrix(n: usize, class: u8) -> Matrix<f64> {
    one_hot_labels(&vec![class; n])
}

pub fn standard_normal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix<f64> {
    let data = (0..rows * cols)
        .map(|_| rng.sample(StandardNormal))
        .collect();
    Matrix::from_vec(rows, cols, data).expect("shape")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Reconstruction plus KL divergence.
    Vae,
    /// Reconstruction only (MedGAN pre-training, ARAE).
    Autoencoder,
    /// Log-loss discriminator.
    Discriminator,
    /// Wasserstein critic, with the gradient penalty for WGAN-GP.
    Critic,
    Generator,
}

impl Objective {
    pub fn is_adversarial(self) -> bool {
        !matches!(self, Objective::Vae | Objective::Autoencoder)
    }
}

/// An objective together with the parameter groups it updates.
#[derive(Debug, Clone, Copy)]
pub struct Step {
    pub objective: Objective,
    pub prefixes: &'static [&'static str],
}

#[derive(Debug, Clone)]
struct Autoencoder {
    input: InputEncoder,
    enc: Mlp,
    code: Dense,
    dec: Mlp,
    out: OutputHeads,
}

#[derive(Debug, Clone)]
enum Body {
    Vae {
        input: InputEncoder,
        enc: Mlp,
        mu: Dense,
        log_var: Dense,
        dec: Mlp,
        out: OutputHeads,
    },
    Adversarial {
        gen: Mlp,
        gen_out: OutputHeads,
        input: InputEncoder,
        disc: Mlp,
        disc_out: Dense,
    },
    Medgan {
        ae: Autoencoder,
        gen: Vec<Dense>,
        disc: Mlp,
        disc_out: Dense,
    },
    Arae {
        ae: Autoencoder,
        gen: Mlp,
        gen_out: Dense,
        critic: Mlp,
        critic_out: Dense,
    },
}

/// Layer structure of one model. Parameters live in a separate [`ParamSet`].
#[derive(Debug, Clone)]
pub struct Networks {
    pub spec: ModelSpec,
    pub meta: Vec<VariableMeta>,
    body: Body,
}

fn heads<R: Rng + ?Sized>(
    spec: &ModelSpec,
    params: &mut ParamSet<f64>,
    prefix: &str,
    hidden: usize,
    meta: &[VariableMeta],
    rng: &mut R,
) -> OutputHeads {
    if spec.is_multi_variable() {
        OutputHeads::per_variable(params, prefix, hidden, meta, spec.tau, rng)
    } else {
        OutputHeads::plain(params, prefix, hidden, total_width(meta), rng)
    }
}

fn input_encoder<R: Rng + ?Sized>(
    spec: &ModelSpec,
    params: &mut ParamSet<f64>,
    prefix: &str,
    meta: &[VariableMeta],
    rng: &mut R,
) -> InputEncoder {
    if spec.is_multi_variable() {
        InputEncoder::per_variable(params, prefix, meta, spec.embedding, rng)
    } else {
        InputEncoder::plain(total_width(meta))
    }
}

fn reversed(h: &[usize]) -> Vec<usize> {
    h.iter().rev().copied().collect()
}

impl Autoencoder {
    fn init<R: Rng + ?Sized>(
        spec: &ModelSpec,
        params: &mut ParamSet<f64>,
        meta: &[VariableMeta],
        rng: &mut R,
    ) -> Self {
        let act = spec.hidden_activation;
        let input = input_encoder(spec, params, "ae.enc.in", meta, rng);
        let (enc, w) = Mlp::init(
            params,
            "ae.enc",
            input.output_width(),
            &spec.hidden,
            act,
            rng,
        );
        let code = Dense::init(params, "ae.enc.code", w, spec.latent, Activation::Tanh, rng);
        let (dec, w) = Mlp::init(
            params,
            "ae.dec",
            spec.latent,
            &reversed(&spec.hidden),
            act,
            rng,
        );
        let out = heads(spec, params, "ae.dec.out", w, meta, rng);
        Self {
            input,
            enc,
            code,
            dec,
            out,
        }
    }

    fn encode(&self, t: &mut Tape<f64>, p: &Bound, x: Var) -> Var {
        let h = self.input.forward(t, p, x);
        let h = self.enc.forward(t, p, h);
        self.code.forward(t, p, h)
    }

    fn decode<R: Rng + ?Sized>(
        &self,
        t: &mut Tape<f64>,
        p: &Bound,
        code: Var,
        rng: Option<&mut R>,
    ) -> Var {
        let h = self.dec.forward(t, p, code);
        self.out.forward(t, p, h, rng)
    }
}

fn with_cond(t: &mut Tape<f64>, x: Var, c: Option<Var>) -> Var {
    match c {
        Some(c) => t.concat_cols(&[x, c]),
        None => x,
    }
}

impl Networks {
    /// Builds the layer structure and a freshly initialised parameter set.
    pub fn build<R: Rng + ?Sized>(
        spec: &ModelSpec,
        meta: &[VariableMeta],
        seed: u64,
        rng: &mut R,
    ) -> Result<(Self, ParamSet<f64>)> {
        spec.validate()?;
        if meta.is_empty() {
            return Err(Error::Config("model needs at least one variable".into()));
        }
        for v in meta {
            v.check()?;
        }
        let mut params = ParamSet::new(seed);
        let p = &mut params;
        let width = total_width(meta);
        let cw = if spec.conditional { CONDITION_WIDTH } else { 0 };
        let act = spec.hidden_activation;
        let body = match spec.architecture {
            Architecture::Vae => {
                let input = input_encoder(spec, p, "enc.in", meta, rng);
                let (enc, w) =
                    Mlp::init(p, "enc", input.output_width() + cw, &spec.hidden, act, rng);
                let mu = Dense::init(p, "enc.mu", w, spec.latent, Activation::Identity, rng);
                let log_var =
                    Dense::init(p, "enc.log_var", w, spec.latent, Activation::Identity, rng);
                let (dec, w) = Mlp::init(
                    p,
                    "dec",
                    spec.latent + cw,
                    &reversed(&spec.hidden),
                    act,
                    rng,
                );
                let out = heads(spec, p, "dec.out", w, meta, rng);
                Body::Vae {
                    input,
                    enc,
                    mu,
                    log_var,
                    dec,
                    out,
                }
            }
            Architecture::Gan | Architecture::Wgan | Architecture::WganGp => {
                let (gen, w) = Mlp::init(p, "gen", spec.latent + cw, &spec.hidden, act, rng);
                let gen_out = heads(spec, p, "gen.out", w, meta, rng);
                let input = input_encoder(spec, p, "disc.in", meta, rng);
                let (disc, w) = Mlp::init(
                    p,
                    "disc",
                    input.output_width() + cw,
                    &reversed(&spec.hidden),
                    act,
                    rng,
                );
                let disc_out = Dense::init(p, "disc.out", w, 1, Activation::Identity, rng);
                Body::Adversarial {
                    gen,
                    gen_out,
                    input,
                    disc,
                    disc_out,
                }
            }
            Architecture::Medgan => {
                let ae = Autoencoder::init(spec, p, meta, rng);
                let gen = (0..spec.hidden.len().max(1))
                    .map(|i| {
                        Dense::init(
                            p,
                            format!("gen.r{i}"),
                            spec.latent + cw,
                            spec.latent,
                            act,
                            rng,
                        )
                    })
                    .collect();
                let (disc, w) =
                    Mlp::init(p, "disc", 2 * width + cw, &reversed(&spec.hidden), act, rng);
                let disc_out = Dense::init(p, "disc.out", w, 1, Activation::Identity, rng);
                Body::Medgan {
                    ae,
                    gen,
                    disc,
                    disc_out,
                }
            }
            Architecture::Arae => {
                let ae = Autoencoder::init(spec, p, meta, rng);
                let (gen, w) = Mlp::init(p, "gen", spec.latent + cw, &spec.hidden, act, rng);
                let gen_out = Dense::init(p, "gen.code", w, spec.latent, Activation::Tanh, rng);
                let (critic, w) = Mlp::init(
                    p,
                    "critic",
                    spec.latent + cw,
                    &reversed(&spec.hidden),
                    act,
                    rng,
                );
                let critic_out = Dense::init(p, "critic.out", w, 1, Activation::Identity, rng);
                Body::Arae {
                    ae,
                    gen,
                    gen_out,
                    critic,
                    critic_out,
                }
            }
        };
        Ok((
            Self {
                spec: spec.clone(),
                meta: meta.to_vec(),
                body,
            },
            params,
        ))
    }

    pub fn width(&self) -> usize {
        total_width(&self.meta)
    }

    /// Objectives in the order a training iteration visits them.
    pub fn steps(&self) -> Vec<Step> {
        const ENC_DEC: &[&str] = &["enc", "dec"];
        const AE: &[&str] = &["ae."];
        const DISC: &[&str] = &["disc"];
        const GEN: &[&str] = &["gen"];
        let s = |objective, prefixes| Step {
            objective,
            prefixes,
        };
        match self.spec.architecture {
            Architecture::Vae => vec![s(Objective::Vae, ENC_DEC)],
            Architecture::Gan => vec![
                s(Objective::Discriminator, DISC),
                s(Objective::Generator, GEN),
            ],
            Architecture::Wgan | Architecture::WganGp => {
                vec![s(Objective::Critic, DISC), s(Objective::Generator, GEN)]
            }
            Architecture::Medgan => vec![
                s(Objective::Autoencoder, AE),
                s(Objective::Discriminator, DISC),
                s(Objective::Generator, &["gen", "ae.dec"]),
            ],
            Architecture::Arae => {
                vec![
                    s(Objective::Autoencoder, AE),
                    s(Objective::Critic, &["critic"]),
                    s(Objective::Generator, GEN),
                ]
            }
        }
    }

    /// Parameter prefix clipped after every critic step (weight-clipped critics only).
    pub fn clamp_prefix(&self) -> Option<&'static str> {
        match self.spec.architecture {
            Architecture::Wgan => Some("disc"),
            Architecture::Arae => Some("critic"),
            _ => None,
        }
    }

    /// Input width of the MedGAN discriminator: sample, batch means and condition.
    pub fn discriminator_input_width(&self) -> Option<usize> {
        match &self.body {
            Body::Medgan { .. } => Some(
                2 * self.width()
                    + if self.spec.conditional {
                        CONDITION_WIDTH
                    } else {
                        0
                    },
            ),
            _ => None,
        }
    }

    fn reconstruction(&self, t: &mut Tape<f64>, out: Var, target: Var) -> Var {
        if self.spec.is_multi_variable() {
            reconstruction_loss(t, out, target, &self.meta)
        } else {
            loss(t, LossKind::BinaryCrossEntropy, out, target)
        }
    }

    fn noise<R: Rng + ?Sized>(&self, t: &mut Tape<f64>, n: usize, rng: &mut R) -> Var {
        t.leaf(standard_normal(n, self.spec.latent, rng))
    }

    fn medgan_code(gen: &[Dense], t: &mut Tape<f64>, p: &Bound, z: Var, c: Option<Var>) -> Var {
        let mut h = z;
        for layer in gen {
            let input = with_cond(t, h, c);
            let y = layer.forward(t, p, input);
            h = t.add(h, y);
        }
        h
    }

    fn medgan_disc(
        disc: &Mlp,
        out: &Dense,
        t: &mut Tape<f64>,
        p: &Bound,
        x: Var,
        c: Option<Var>,
    ) -> Var {
        let n = t.shape(x).0;
        let s = t.sum_cols(x);
        let m = t.scale(s, 1.0 / n as f64);
        let m = t.broadcast_rows(m, n);
        let h = t.concat_cols(&[x, m]);
        let h = with_cond(t, h, c);
        let h = disc.forward(t, p, h);
        out.forward(t, p, h)
    }

    /// Fake rows (or, for ARAE, fake codes) for `n` noise draws.
    fn fake<R: Rng + ?Sized>(
        &self,
        t: &mut Tape<f64>,
        p: &Bound,
        n: usize,
        c: Option<Var>,
        rng: &mut R,
    ) -> Var {
        let z = self.noise(t, n, rng);
        match &self.body {
            Body::Vae { dec, out, .. } => {
                let h = with_cond(t, z, c);
                let h = dec.forward(t, p, h);
                out.forward(t, p, h, Some(rng))
            }
            Body::Adversarial { gen, gen_out, .. } => {
                let h = with_cond(t, z, c);
                let h = gen.forward(t, p, h);
                gen_out.forward(t, p, h, Some(rng))
            }
            Body::Medgan { ae, gen, .. } => {
                let code = Self::medgan_code(gen, t, p, z, c);
                ae.decode(t, p, code, Some(rng))
            }
            Body::Arae { gen, gen_out, .. } => {
                let h = with_cond(t, z, c);
                let h = gen.forward(t, p, h);
                gen_out.forward(t, p, h)
            }
        }
    }

    /// Adds Gaussian instance noise to both inputs of a log-loss discriminator.
    fn perturb<R: Rng + ?Sized>(
        &self,
        t: &mut Tape<f64>,
        x: Var,
        fake: Var,
        rng: &mut R,
    ) -> (Var, Var) {
        let sd = self.spec.training.instance_noise;
        if !matches!(
            self.spec.architecture,
            Architecture::Gan | Architecture::Medgan
        ) || sd <= 0.0
        {
            return (x, fake);
        }
        let (r, c) = t.shape(x);
        let a = t.leaf(standard_normal(r, c, rng).map(|v| v * sd));
        let b = t.leaf(standard_normal(r, c, rng).map(|v| v * sd));
        (t.add(x, a), t.add(fake, b))
    }

    /// Discriminator logit or critic score of data rows (ARAE: of codes).
    fn score(&self, t: &mut Tape<f64>, p: &Bound, x: Var, c: Option<Var>) -> Var {
        match &self.body {
            Body::Adversarial {
                input,
                disc,
                disc_out,
                ..
            } => {
                let h = input.forward(t, p, x);
                let h = with_cond(t, h, c);
                let h = disc.forward(t, p, h);
                disc_out.forward(t, p, h)
            }
            Body::Medgan { disc, disc_out, .. } => Self::medgan_disc(disc, disc_out, t, p, x, c),
            Body::Arae {
                critic, critic_out, ..
            } => {
                let h = with_cond(t, x, c);
                let h = critic.forward(t, p, h);
                critic_out.forward(t, p, h)
            }
            Body::Vae { .. } => unreachable!("VAE has no discriminator"),
        }
    }

    /// Records `objective` for `batch` on the tape and returns the scalar loss.
    /// All randomness (latent noise, Gumbel noise, interpolation weights) is
    /// drawn from `rng`, so a cloned rng reproduces the same value.
    pub fn objective<R: Rng + ?Sized>(
        &self,
        objective: Objective,
        t: &mut Tape<f64>,
        p: &Bound,
        batch: &Batch,
        rng: &mut R,
    ) -> Result<Var> {
        let n = batch.x.rows();
        if n == 0 {
            return Err(Error::InsufficientData("empty minibatch".into()));
        }
        if batch.x.cols() != self.width() {
            return Err(Error::Shape(format!(
                "batch has {} columns, model expects {}",
                batch.x.cols(),
                self.width()
            )));
        }
        if batch.cond.is_some() != self.spec.conditional {
            return Err(Error::Config(
                "condition must be supplied exactly for conditional models".into(),
            ));
        }
        let x = t.leaf(batch.x.clone());
        let c = batch.cond.as_ref().map(|m| t.leaf(m.clone()));
        let arch = self.spec.architecture;
        let out = match (objective, &self.body) {
            (Objective::Vae, Body::Vae { .. }) => {
                let (rec, kl) = self.vae_parts(t, p, x, c, rng);
                t.add(rec, kl)
            }
            (Objective::Autoencoder, Body::Medgan { ae, .. } | Body::Arae { ae, .. }) => {
                let code = ae.encode(t, p, x);
                let y = ae.decode(t, p, code, Some(rng));
                self.reconstruction(t, y, x)
            }
            (Objective::Discriminator, Body::Adversarial { .. } | Body::Medgan { .. })
                if matches!(arch, Architecture::Gan | Architecture::Medgan) =>
            {
                let fake = self.fake(t, p, n, c, rng);
                let (x, fake) = self.perturb(t, x, fake, rng);
                let real_score = self.score(t, p, x, c);
                let fake_score = self.score(t, p, fake, c);
                let a = logistic_loss(t, real_score, true);
                let b = logistic_loss(t, fake_score, false);
                t.add(a, b)
            }
            (Objective::Critic, Body::Adversarial { .. } | Body::Arae { .. })
                if matches!(
                    arch,
                    Architecture::Wgan | Architecture::WganGp | Architecture::Arae
                ) =>
            {
                let fake = self.fake(t, p, n, c, rng);
                let real = match &self.body {
                    Body::Arae { ae, .. } => {
                        // detached encoder output
                        let code = ae.encode(t, p, x);
                        let v = t.value(code).clone();
                        t.leaf(v)
                    }
                    _ => x,
                };
                let fs = self.score(t, p, fake, c);
                let rs = self.score(t, p, real, c);
                let fm = t.mean(fs);
                let rm = t.mean(rs);
                let w = t.sub(fm, rm);
                if arch == Architecture::WganGp {
                    let fake_v = t.value(fake).clone();
                    let x_hat = interpolate(&batch.x, &fake_v, rng);
                    let x_hat = t.leaf(x_hat);
                    let gp = gradient_penalty(t, |t, xh| self.score(t, p, xh, c), x_hat);
                    let gp = t.scale(gp, self.spec.training.gp_weight);
                    t.add(w, gp)
                } else {
                    w
                }
            }
            (
                Objective::Generator,
                Body::Adversarial { .. } | Body::Medgan { .. } | Body::Arae { .. },
            ) => {
                let fake = self.fake(t, p, n, c, rng);
                let (_, fake) = self.perturb(t, x, fake, rng);
                let s = self.score(t, p, fake, c);
                match arch {
                    Architecture::Gan | Architecture::Medgan => logistic_loss(t, s, true),
                    _ => {
                        let m = t.mean(s);
                        t.neg(m)
                    }
                }
            }
            _ => {
                return Err(Error::Config(format!(
                    "objective {objective:?} does not apply to {}",
                    self.spec.name()
                )))
            }
        };
        Ok(out)
    }

    fn vae_parts<R: Rng + ?Sized>(
        &self,
        t: &mut Tape<f64>,
        p: &Bound,
        x: Var,
        c: Option<Var>,
        rng: &mut R,
    ) -> (Var, Var) {
        let Body::Vae {
            input,
            enc,
            mu,
            log_var,
            dec,
            out,
        } = &self.body
        else {
            unreachable!("not a VAE")
        };
        let n = t.shape(x).0;
        let h = input.forward(t, p, x);
        let h = with_cond(t, h, c);
        let h = enc.forward(t, p, h);
        let m = mu.forward(t, p, h);
        let lv = log_var.forward(t, p, h);
        let eps = self.noise(t, n, rng);
        let half = t.scale(lv, 0.5);
        let sd = t.exp(half);
        let e = t.mul(sd, eps);
        let z = t.add(m, e);
        let d = with_cond(t, z, c);
        let d = dec.forward(t, p, d);
        let y = out.forward(t, p, d, Some(rng));
        let rec = self.reconstruction(t, y, x);
        let kl = loss(t, LossKind::KlStandardNormal, m, lv);
        (rec, kl)
    }

    /// The VAE objective's reconstruction and KL terms, evaluated separately.
    pub fn vae_terms<R: Rng + ?Sized>(
        &self,
        params: &ParamSet<f64>,
        batch: &Batch,
        rng: &mut R,
    ) -> Option<(f64, f64)> {
        if !matches!(self.body, Body::Vae { .. }) {
            return None;
        }
        let mut t = Tape::new();
        let p = params.bind(&mut t);
        let x = t.leaf(batch.x.clone());
        let c = batch.cond.as_ref().map(|m| t.leaf(m.clone()));
        let (rec, kl) = self.vae_parts(&mut t, &p, x, c, rng);
        Some((t.scalar(rec), t.scalar(kl)))
    }

    /// Reconstruction loss on held-out rows without sampling noise (the VAE
    /// decodes its posterior mean). `None` for purely adversarial models.
    pub fn validation_loss(&self, params: &ParamSet<f64>, batch: &Batch) -> Option<f64> {
        if batch.x.rows() == 0 {
            return None;
        }
        let mut t = Tape::new();
        let p = params.bind(&mut t);
        let x = t.leaf(batch.x.clone());
        let c = batch.cond.as_ref().map(|m| t.leaf(m.clone()));
        let y = match &self.body {
            Body::Vae {
                input,
                enc,
                mu,
                dec,
                out,
                ..
            } => {
                let h = input.forward(&mut t, &p, x);
                let h = with_cond(&mut t, h, c);
                let h = enc.forward(&mut t, &p, h);
                let m = mu.forward(&mut t, &p, h);
                let d = with_cond(&mut t, m, c);
                let d = dec.forward(&mut t, &p, d);
                out.forward::<crate::rng::SeedRng>(&mut t, &p, d, None)
            }
            Body::Medgan { ae, .. } | Body::Arae { ae, .. } => {
                let code = ae.encode(&mut t, &p, x);
                ae.decode::<crate::rng::SeedRng>(&mut t, &p, code, None)
            }
            Body::Adversarial { .. } => return None,
        };
        let l = self.reconstruction(&mut t, y, x);
        Some(t.scalar(l))
    }

    /// `n` raw generated rows. `cond` is the per-row one-hot condition for
    /// conditional models.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        params: &ParamSet<f64>,
        n: usize,
        cond: Option<&Matrix<f64>>,
        rng: &mut R,
    ) -> Matrix<f64> {
        let mut t = Tape::new();
        let p = params.bind(&mut t);
        let c = cond.map(|m| t.leaf(m.clone()));
        let rows = match &self.body {
            Body::Arae { ae, .. } => {
                let code = self.fake(&mut t, &p, n, c, rng);
                ae.decode(&mut t, &p, code, Some(rng))
            }
            _ => self.fake(&mut t, &p, n, c, rng),
        };
        let mut out = t.value(rows).clone();
        if self.spec.architecture == Architecture::Vae {
            self.sample_likelihood(&mut out, rng);
        }
        out
    }

    /// Draws from the decoder's output distribution: Bernoulli for binary
    /// columns and, in the plain variant, a categorical draw proportional to
    /// the block's sigmoid outputs. Numerical columns keep the decoded mean.
    fn sample_likelihood<R: Rng + ?Sized>(&self, rows: &mut Matrix<f64>, rng: &mut R) {
        let plain = !self.spec.is_multi_variable();
        let spans = blocks(&self.meta);
        for i in 0..rows.rows() {
            let r = rows.row_mut(i);
            for (v, &(start, width)) in self.meta.iter().zip(&spans) {
                match v.kind {
                    VariableKind::Binary => {
                        let u: f64 = rng.gen();
                        r[start] = if u < r[start] { 1.0 } else { 0.0 };
                    }
                    VariableKind::Categorical if plain => {
                        let block = &mut r[start..start + width];
                        let total: f64 = block.iter().sum();
                        let mut u = rng.gen::<f64>() * total;
                        let mut pick = width - 1;
                        for (j, &w) in block.iter().enumerate() {
                            if u < w {
                                pick = j;
                                break;
                            }
                            u -= w;
                        }
                        block
                            .iter_mut()
                            .enumerate()
                            .for_each(|(j, b)| *b = if j == pick { 1.0 } else { 0.0 });
                    }
                    _ => {}
                }
            }
        }
    }
}

/// Central finite-difference check of `objective`'s gradient with respect to
/// every parameter under `prefixes`. Returns `‖g − ĝ‖ / max(‖g‖ + ‖ĝ‖, 1e-12)`.
pub fn gradient_check(
    nets: &Networks,
    params: &ParamSet<f64>,
    step: Step,
    batch: &Batch,
    seed: u64,
    h: f64,
) -> Result<f64> {
    let eval = |ps: &ParamSet<f64>| -> Result<f64> {
        let mut rng = crate::rng::seeded(seed);
        let mut t = Tape::new();
        let b = ps.bind(&mut t);
        let l = nets.objective(step.objective, &mut t, &b, batch, &mut rng)?;
        Ok(t.scalar(l))
    };
    let analytic = {
        let mut rng = crate::rng::seeded(seed);
        let mut t = Tape::new();
        let b = params.bind(&mut t);
        let l = nets.objective(step.objective, &mut t, &b, batch, &mut rng)?;
        b.grads(&mut t, l, step.prefixes)
    };
    let (mut diff2, mut a2, mut n2) = (0.0, 0.0, 0.0);
    let mut work = params.clone();
    for (name, g) in &analytic {
        for k in 0..g.as_slice().len() {
            let orig = work.get(name).expect("bound").as_slice()[k];
            work.get_mut(name).expect("bound").as_mut_slice()[k] = orig + h;
            let up = eval(&work)?;
            work.get_mut(name).expect("bound").as_mut_slice()[k] = orig - h;
            let down = eval(&work)?;
            work.get_mut(name).expect("bound").as_mut_slice()[k] = orig;
            let num = (up - down) / (2.0 * h);
            let a = g.as_slice()[k];
            diff2 += (a - num).powi(2);
            a2 += a * a;
            n2 += num * num;
        }
    }
    Ok(diff2.sqrt() / (a2.sqrt() + n2.sqrt()).max(1e-12))
}

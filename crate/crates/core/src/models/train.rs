//! Training loops.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::arch::{one_hot_labels, Batch, Networks, Objective, Step};
use super::generator::TrainedGenerator;
use super::spec::{Architecture, ModelSpec};
use crate::diff::{adam_step, clamp_params, AdamState, ParamSet, Tape};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{derive_seed, derived, fingerprint_indices, SeedRng};
use crate::tabular::{total_width, VariableMeta};

/// Rows a generator is fit on, in the encoded space of `meta`.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub rows: Matrix<f64>,
    /// Class of each row; required by conditional models, ignored otherwise.
    pub labels: Option<Vec<u8>>,
    pub meta: Vec<VariableMeta>,
    /// Dataset row ids, recorded in the model's training fingerprint.
    pub row_ids: Vec<usize>,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.rows.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.rows() == 0
    }

    fn batch(&self, idx: &[usize], conditional: bool) -> Batch {
        let x = self.rows.select_rows(idx);
        let cond = if conditional {
            let labels = self.labels.as_ref().expect("checked before training");
            Some(one_hot_labels(
                &idx.iter().map(|&i| labels[i]).collect::<Vec<_>>(),
            ))
        } else {
            None
        };
        Batch { x, cond }
    }

    fn full_batch(&self, conditional: bool) -> Batch {
        let idx: Vec<usize> = (0..self.len()).collect();
        self.batch(&idx, conditional)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub phase: String,
    pub epoch: usize,
    /// Mean objective value per objective over the epoch's steps.
    pub losses: BTreeMap<Objective, f64>,
    pub validation: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainStats {
    pub steps: BTreeMap<Objective, u64>,
    pub clamp_calls: u64,
    /// Largest critic parameter magnitude seen right after a clamp.
    pub max_clamped_abs: f64,
    pub stopped_early: bool,
    pub best_epoch: Option<usize>,
}

/// Endless shuffled minibatches over `n` rows.
struct BatchCursor {
    order: Vec<usize>,
    pos: usize,
    size: usize,
}

impl BatchCursor {
    fn new(n: usize, size: usize) -> Self {
        Self {
            order: (0..n).collect(),
            pos: n,
            size: size.min(n).max(1),
        }
    }

    fn steps_per_epoch(&self) -> usize {
        self.order.len().div_ceil(self.size)
    }

    fn next(&mut self, rng: &mut SeedRng) -> Vec<usize> {
        if self.pos >= self.order.len() {
            self.order.shuffle(rng);
            self.pos = 0;
        }
        let end = (self.pos + self.size).min(self.order.len());
        let idx = self.order[self.pos..end].to_vec();
        self.pos = end;
        idx
    }
}

struct Trainer<'a> {
    nets: Networks,
    params: ParamSet<f64>,
    data: &'a TrainingSet,
    validation: Option<Batch>,
    adam: BTreeMap<Objective, AdamState<f64>>,
    rng: SeedRng,
    cursor: BatchCursor,
    stats: TrainStats,
    history: Vec<EpochRecord>,
    epoch_losses: BTreeMap<Objective, (f64, usize)>,
    ema: Option<ParamSet<f64>>,
    noise: f64,
}

impl<'a> Trainer<'a> {
    fn step(&mut self, step: Step, epoch: usize) -> Result<()> {
        let tc = &self.nets.spec.training;
        let idx = self.cursor.next(&mut self.rng);
        let batch = self.data.batch(&idx, self.nets.spec.conditional);
        let mut t = Tape::new();
        let b = self.params.bind(&mut t);
        let l = self
            .nets
            .objective(step.objective, &mut t, &b, &batch, &mut self.rng)?;
        let value = t.scalar(l);
        let grads = b.grads(&mut t, l, step.prefixes);
        let (lr, b1, b2) = if step.objective.is_adversarial() {
            (
                tc.lr_adversarial,
                tc.beta1_adversarial,
                tc.beta2_adversarial,
            )
        } else {
            (tc.lr_autoencoder, tc.beta1, tc.beta2)
        };
        let state = self
            .adam
            .entry(step.objective)
            .or_insert_with(|| AdamState::new(b1, b2));
        let count = self.stats.steps.entry(step.objective).or_default();
        adam_step(&mut self.params, &grads, state, lr).map_err(|e| match e {
            Error::NonFiniteGradient { param, context } => Error::NonFiniteGradient {
                param,
                context: format!(
                    "{context}, {:?} objective, epoch {epoch}, step {}",
                    step.objective,
                    *count + 1
                ),
            },
            other => other,
        })?;
        *count += 1;
        if !value.is_finite() {
            return Err(Error::NonFiniteGradient {
                param: "(loss)".into(),
                context: format!("{:?} objective is {value} at epoch {epoch}", step.objective),
            });
        }
        if step.objective == Objective::Critic {
            if let Some(prefix) = self.nets.clamp_prefix() {
                let c = tc.clamp;
                clamp_params(&mut self.params, prefix, c);
                self.stats.clamp_calls += 1;
                let m = self
                    .params
                    .iter()
                    .filter(|(k, _)| k.starts_with(prefix))
                    .map(|(_, v)| v.max_abs())
                    .fold(0.0, f64::max);
                self.stats.max_clamped_abs = self.stats.max_clamped_abs.max(m);
            }
        }
        if step.objective == Objective::Generator && tc.generator_ema > 0.0 {
            let decay = tc.generator_ema;
            let ema = self.ema.get_or_insert_with(|| self.params.clone());
            for prefix in step.prefixes {
                for (name, p) in self.params.iter().filter(|(k, _)| k.starts_with(prefix)) {
                    let e = ema.get_mut(name).expect("same names");
                    for (a, &b) in e.as_mut_slice().iter_mut().zip(p.as_slice()) {
                        *a = decay * *a + (1.0 - decay) * b;
                    }
                }
            }
        }
        let e = self.epoch_losses.entry(step.objective).or_insert((0.0, 0));
        e.0 += value;
        e.1 += 1;
        Ok(())
    }

    fn end_epoch(&mut self, phase: &str, epoch: usize) -> Option<f64> {
        let validation = self
            .validation
            .as_ref()
            .and_then(|v| self.nets.validation_loss(&self.params, v));
        let losses = std::mem::take(&mut self.epoch_losses)
            .into_iter()
            .map(|(k, (s, n))| (k, s / n as f64))
            .collect();
        self.history.push(EpochRecord {
            phase: phase.into(),
            epoch,
            losses,
            validation,
        });
        validation
    }

    /// Runs `epochs` epochs of `iteration`; with validation rows, stops after
    /// `patience` epochs without improvement and restores the best parameters.
    fn run(
        &mut self,
        phase: &str,
        epochs: usize,
        early_stop: bool,
        iteration: &[(Step, usize)],
    ) -> Result<()> {
        let patience = self.nets.spec.training.patience;
        let mut best: Option<(f64, usize, ParamSet<f64>)> = None;
        let mut wait = 0;
        for epoch in 0..epochs {
            // instance noise decays linearly to zero over the phase
            self.nets.spec.training.instance_noise =
                self.noise * (1.0 - epoch as f64 / epochs as f64);
            for _ in 0..self.cursor.steps_per_epoch() {
                for &(step, repeat) in iteration {
                    for _ in 0..repeat {
                        self.step(step, epoch)?;
                    }
                }
            }
            let val = self.end_epoch(phase, epoch);
            if !early_stop {
                continue;
            }
            if let Some(v) = val {
                if best.as_ref().map_or(true, |(b, _, _)| v < *b) {
                    best = Some((v, epoch, self.params.clone()));
                    wait = 0;
                } else {
                    wait += 1;
                    if wait >= patience {
                        self.stats.stopped_early = true;
                        break;
                    }
                }
            }
        }
        if let Some((_, epoch, params)) = best {
            self.params = params;
            self.stats.best_epoch = Some(epoch);
        }
        Ok(())
    }
}

/// Fits `spec` to `train`, monitoring reconstruction on `validation` for
/// autoencoder-bearing models. Deterministic in `seed`.
pub fn train(
    spec: &ModelSpec,
    train: &TrainingSet,
    validation: Option<&TrainingSet>,
    seed: u64,
) -> Result<TrainedGenerator> {
    spec.validate()?;
    if train.is_empty() {
        return Err(Error::InsufficientData(
            "generator training set is empty".into(),
        ));
    }
    let width = total_width(&train.meta);
    for set in std::iter::once(train).chain(validation) {
        if set.rows.cols() != width {
            return Err(Error::Shape(format!(
                "training rows have {} columns, metadata {width}",
                set.rows.cols()
            )));
        }
        if spec.conditional && set.labels.as_ref().map(Vec::len) != Some(set.len()) {
            return Err(Error::Config(
                "conditional model needs one label per training row".into(),
            ));
        }
    }
    let mut init_rng = derived(seed, &["init"]);
    let (nets, params) = Networks::build(
        spec,
        &train.meta,
        derive_seed(seed, &["params"]),
        &mut init_rng,
    )?;
    let validation = validation
        .filter(|v| !v.is_empty())
        .map(|v| v.full_batch(spec.conditional));
    let mut tr = Trainer {
        cursor: BatchCursor::new(train.len(), spec.training.batch_size),
        nets,
        params,
        data: train,
        validation,
        adam: BTreeMap::new(),
        rng: derived(seed, &["train"]),
        stats: TrainStats::default(),
        history: Vec::new(),
        epoch_losses: BTreeMap::new(),
        ema: None,
        noise: spec.training.instance_noise,
    };
    let steps = tr.nets.steps();
    let tc = spec.training.clone();
    let critic_repeat = |s: &Step| {
        if s.objective == Objective::Critic {
            tc.n_critic
        } else {
            1
        }
    };
    match spec.architecture {
        Architecture::Vae => {
            tr.run("vae", tc.epochs, true, &[(steps[0], 1)])?;
        }
        Architecture::Gan | Architecture::Wgan | Architecture::WganGp => {
            let it: Vec<_> = steps.iter().map(|s| (*s, critic_repeat(s))).collect();
            tr.run("adversarial", tc.epochs, false, &it)?;
        }
        Architecture::Medgan => {
            tr.run("pretrain", tc.pretrain_epochs, true, &[(steps[0], 1)])?;
            tr.stats.stopped_early = false;
            tr.run(
                "adversarial",
                tc.epochs,
                false,
                &[(steps[1], 1), (steps[2], 1)],
            )?;
        }
        Architecture::Arae => {
            let it: Vec<_> = steps.iter().map(|s| (*s, critic_repeat(s))).collect();
            tr.run("arae", tc.epochs, true, &it)?;
        }
    }
    if let Some(ema) = tr.ema.take() {
        for step in steps.iter().filter(|s| s.objective == Objective::Generator) {
            for prefix in step.prefixes {
                let names: Vec<String> = ema.names_with_prefix(prefix).cloned().collect();
                for name in names {
                    *tr.params.get_mut(&name).expect("same names") =
                        ema.get(&name).expect("listed").clone();
                }
            }
        }
    }
    if !tr.params.all_finite() {
        return Err(Error::NonFiniteGradient {
            param: "(parameters)".into(),
            context: "after training".into(),
        });
    }
    Ok(TrainedGenerator::new(
        spec.clone(),
        train.meta.clone(),
        seed,
        tr.params,
        train.row_ids.clone(),
        fingerprint_indices(&train.row_ids),
        tr.history,
        tr.stats,
    ))
}

//! Cross-validated under/oversampling sweep.
//!
//! For every fold the classifier is scored without resampling (baseline),
//! after random undersampling to each `usr`, and after undersampling plus
//! oversampling to each `osr > usr` with every configured method. Generative
//! methods train one generator per (fold, model, strategy) on the fold's
//! training part before undersampling, and reuse it for every cell.

mod io;
mod summary;

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use io::{read_results, write_outputs, write_results_csv, RESULTS_HEADER};
pub use summary::{
    cell_stats, ratio_label, render_summary, sample_sd, summarize, CellStat, SummaryRow,
};

use crate::boost::{fit_and_score, grid_search, BoostConfig};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::models::{train, ModelSpec, TrainedGenerator, MODEL_NAMES};
use crate::resample::{
    append_minority, oversample, random_undersample, required_synthetic, ClassicParams, Method,
};
use crate::rng::{derive_seed, derived};
use crate::samplers::{
    draw, training_view, SamplingKind, SamplingStrategy, DEFAULT_DRAW_BATCH, DEFAULT_DRAW_LIMIT,
};
use crate::tabular::{compute_ir, make_folds, Dataset, FoldSplit, DEFAULT_VALIDATION_FRACTION};

/// Ratio slack when comparing grid values with data ratios.
const RATIO_SLACK: f64 = 1e-9;

/// Partial overrides applied to every generator's default spec.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pretrain_epochs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub patience: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hidden: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latent: Option<usize>,
}

impl GeneratorOverrides {
    pub fn apply(&self, spec: &mut ModelSpec) {
        let t = &mut spec.training;
        if let Some(v) = self.epochs {
            t.epochs = v;
        }
        if let Some(v) = self.pretrain_epochs {
            t.pretrain_epochs = v;
        }
        if let Some(v) = self.batch_size {
            t.batch_size = v;
        }
        if let Some(v) = self.patience {
            t.patience = v;
        }
        if let Some(v) = &self.hidden {
            spec.hidden = v.clone();
        }
        if let Some(v) = self.latent {
            spec.latent = v;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    /// Undersampling ratios; empty means [`default_usr_grid`].
    pub usr_grid: Vec<f64>,
    /// Oversampling ratios; every cell pairs a usr with each larger osr.
    /// Empty means [`default_osr_grid`].
    pub osr_grid: Vec<f64>,
    /// Classic method ids and generative model names.
    pub methods: Vec<String>,
    /// Strategies each generative model is run with.
    pub sampling: Vec<SamplingKind>,
    pub folds: usize,
    pub validation_fraction: f64,
    pub seed: u64,
    pub draw_limit: usize,
    pub draw_batch: usize,
    /// Frozen classifier; when absent it is chosen by grid search.
    pub classifier: Option<BoostConfig>,
    pub classifier_grid: Vec<BoostConfig>,
    pub classic: ClassicParams,
    pub generator: GeneratorOverrides,
    /// Writes measured times into results.csv (which then differs between runs).
    pub record_wall_time: bool,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            usr_grid: Vec::new(),
            osr_grid: Vec::new(),
            methods: Vec::new(),
            sampling: vec![SamplingKind::Minority],
            folds: 10,
            validation_fraction: DEFAULT_VALIDATION_FRACTION,
            seed: 0,
            draw_limit: DEFAULT_DRAW_LIMIT,
            draw_batch: DEFAULT_DRAW_BATCH,
            classifier: None,
            classifier_grid: crate::boost::default_grid(),
            classic: ClassicParams::default(),
            generator: GeneratorOverrides::default(),
            record_wall_time: false,
        }
    }
}

/// A method named in a grid configuration.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum MethodKind {
    Classic(Method),
    Generative(String),
}

impl MethodKind {
    pub fn parse(name: &str) -> Result<Self> {
        if MODEL_NAMES.contains(&name) {
            return Ok(MethodKind::Generative(name.to_string()));
        }
        match name.parse::<Method>() {
            Ok(m) => Ok(MethodKind::Classic(m)),
            Err(_) => Err(Error::Config(format!(
                "unknown method `{name}`; expected a resampler id or one of {}",
                MODEL_NAMES.join(", ")
            ))),
        }
    }
}

fn decimal(k: usize) -> f64 {
    k as f64 / 10.0
}

/// `ceil(IR, 0.1)` to 1.0 in steps of 0.1; for IR below 0.01 the geometric
/// grid 2·IR, 4·IR, ..., 64·IR (capped at 1).
pub fn default_usr_grid(ir: f64) -> Vec<f64> {
    if ir < 0.01 {
        let mut g: Vec<f64> = (1..=6)
            .map(|p| (ir * f64::from(1u32 << p)).min(1.0))
            .collect();
        g.dedup();
        return g;
    }
    let start = ((ir * 10.0) - RATIO_SLACK).ceil().max(1.0) as usize;
    (start..=10).map(decimal).collect()
}

/// The usr grid with 1.0 appended; cells use every value above their usr.
pub fn default_osr_grid(usr_grid: &[f64]) -> Vec<f64> {
    let mut g = usr_grid.to_vec();
    if g.last().is_none_or(|&v| v < 1.0) {
        g.push(1.0);
    }
    g
}

impl GridConfig {
    pub fn method_kinds(&self) -> Result<Vec<MethodKind>> {
        let mut out = Vec::new();
        for m in &self.methods {
            let k = MethodKind::parse(m)?;
            if k != MethodKind::Classic(Method::RandomUnder) && !out.contains(&k) {
                out.push(k);
            }
        }
        Ok(out)
    }

    /// Fills empty grids and checks every ratio against the dataset IR.
    pub fn resolved(&self, ir: f64) -> Result<GridConfig> {
        let mut c = self.clone();
        if c.usr_grid.is_empty() {
            c.usr_grid = default_usr_grid(ir);
        }
        if c.osr_grid.is_empty() {
            c.osr_grid = default_osr_grid(&c.usr_grid);
        }
        for &v in c.usr_grid.iter().chain(&c.osr_grid) {
            if !v.is_finite() || v > 1.0 + RATIO_SLACK {
                return Err(Error::Ratio {
                    value: v,
                    reason: "ratios must be at most 1".into(),
                });
            }
        }
        for &u in &c.usr_grid {
            if u < ir * (1.0 - RATIO_SLACK) {
                return Err(Error::Ratio {
                    value: u,
                    reason: format!("usr is below the dataset ratio {ir}"),
                });
            }
        }
        for &o in &c.osr_grid {
            if o <= 0.0 {
                return Err(Error::Ratio {
                    value: o,
                    reason: "osr must be positive".into(),
                });
            }
        }
        if c.folds < 2 {
            return Err(Error::Config("at least two folds are required".into()));
        }
        if c.draw_limit == 0 || c.draw_batch == 0 {
            return Err(Error::Config(
                "draw limit and draw batch must be at least 1".into(),
            ));
        }
        if c.sampling.is_empty()
            && c.method_kinds()?
                .iter()
                .any(|k| matches!(k, MethodKind::Generative(_)))
        {
            return Err(Error::Config(
                "generative methods need at least one sampling strategy".into(),
            ));
        }
        c.method_kinds()?;
        Ok(c)
    }

    /// `(usr, osr)` oversampling cells.
    pub fn cells(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for &u in &self.usr_grid {
            for &o in &self.osr_grid {
                if o > u + RATIO_SLACK {
                    out.push((u, o));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Timeout,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Timeout => "timeout",
        }
    }
}

pub const BASELINE: &str = "classifier";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub dataset: String,
    pub method: String,
    /// Strategy for generative methods, empty otherwise.
    pub sampling: String,
    pub usr: f64,
    pub osr: f64,
    pub fold: usize,
    pub train_f1: Option<f64>,
    pub test_f1: Option<f64>,
    pub wall_time_ms: Option<u64>,
    pub status: Status,
}

impl ExperimentRecord {
    fn stage(&self) -> u8 {
        match self.method.as_str() {
            BASELINE => 0,
            "random_under" => 1,
            m if MODEL_NAMES.contains(&m) => 3,
            _ => 2,
        }
    }

    /// Canonical persistence order.
    pub fn canonical_cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.stage(), &self.method, &self.sampling)
            .cmp(&(other.stage(), &other.method, &other.sampling))
            .then(self.usr.total_cmp(&other.usr))
            .then(self.osr.total_cmp(&other.osr))
            .then(self.fold.cmp(&other.fold))
    }
}

/// Where synthetic minority rows come from.
pub enum Oversampler<'a> {
    Classic(Method, ClassicParams),
    Generator(&'a TrainedGenerator, SamplingStrategy),
}

impl Oversampler<'_> {
    /// `n` synthetic minority rows for the (undersampled) training set.
    pub fn synthesize(&self, train: &Dataset<f64>, n: usize, seed: u64) -> Result<Matrix<f64>> {
        let mut rng = crate::rng::seeded(seed);
        match self {
            Oversampler::Classic(m, p) => oversample(*m, p, train, n, &mut rng),
            Oversampler::Generator(g, s) => draw(*g, s, n, 1, &mut rng),
        }
    }
}

/// Record of one trained generator, for auditing what it saw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorInfo {
    pub method: String,
    pub sampling: SamplingKind,
    pub fold: usize,
    pub trained_on: Vec<usize>,
    pub fingerprint: String,
    pub wall_time_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridManifest {
    pub toolkit_version: String,
    pub dataset: String,
    pub dataset_fingerprint: String,
    pub rows: usize,
    pub ir: f64,
    pub config: GridConfig,
    pub classifier: BoostConfig,
    pub classifier_label: String,
}

#[derive(Debug, Clone)]
pub struct GridOutput {
    pub records: Vec<ExperimentRecord>,
    pub manifest: GridManifest,
    pub folds: FoldSplit,
    pub generators: Vec<GeneratorInfo>,
}

/// Content hash of an encoded dataset.
pub fn dataset_fingerprint(data: &Dataset<f64>) -> String {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    for r in data.features.iter_rows() {
        for v in r {
            h.update(v.to_le_bytes());
        }
    }
    h.update(&data.labels);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

struct Fold {
    index: usize,
    train: Dataset<f64>,
    test: Dataset<f64>,
    ir: f64,
}

struct Runner<'a> {
    data: &'a Dataset<f64>,
    config: GridConfig,
    classifier: BoostConfig,
    dataset_ir: f64,
}

fn elapsed_ms(t: Instant) -> u64 {
    t.elapsed().as_millis() as u64
}

fn seed_key(x: f64) -> String {
    format!("{x}")
}

impl Runner<'_> {
    fn record(
        &self,
        method: &str,
        sampling: &str,
        usr: f64,
        osr: f64,
        fold: usize,
    ) -> ExperimentRecord {
        ExperimentRecord {
            dataset: self.data.name.clone(),
            method: method.into(),
            sampling: sampling.into(),
            usr,
            osr,
            fold,
            train_f1: None,
            test_f1: None,
            wall_time_ms: None,
            status: Status::Ok,
        }
    }

    /// The fold's training part undersampled to `usr`. A usr at or below the
    /// fold's own ratio (but not below the dataset ratio) keeps every row.
    fn undersampled(&self, fold: &Fold, usr: f64) -> Result<Dataset<f64>> {
        if usr <= fold.ir {
            if usr < self.dataset_ir * (1.0 - RATIO_SLACK) {
                return Err(Error::Ratio {
                    value: usr,
                    reason: format!("usr is below the fold ratio {}", fold.ir),
                });
            }
            return Ok(fold.train.clone());
        }
        let mut rng = derived(
            self.config.seed,
            &[
                &self.data.name,
                "undersample",
                &fold.index.to_string(),
                &seed_key(usr),
            ],
        );
        Ok(random_undersample(&fold.train, usr, &mut rng)?.0)
    }

    fn score(
        &self,
        rec: &mut ExperimentRecord,
        train: &Dataset<f64>,
        test: &Dataset<f64>,
    ) -> Result<()> {
        let (tr, te) = fit_and_score(train, test, &self.classifier)?;
        rec.train_f1 = Some(tr);
        rec.test_f1 = Some(te);
        Ok(())
    }

    fn baseline(&self, fold: &Fold) -> Result<ExperimentRecord> {
        let t = Instant::now();
        let mut rec = self.record(BASELINE, "", fold.ir, fold.ir, fold.index);
        self.score(&mut rec, &fold.train, &fold.test)?;
        rec.wall_time_ms = Some(elapsed_ms(t));
        Ok(rec)
    }

    fn under(&self, fold: &Fold, usr: f64) -> Result<ExperimentRecord> {
        let t = Instant::now();
        let mut rec = self.record(Method::RandomUnder.id(), "", usr, usr, fold.index);
        let train = self.undersampled(fold, usr)?;
        self.score(&mut rec, &train, &fold.test)?;
        rec.wall_time_ms = Some(elapsed_ms(t));
        Ok(rec)
    }

    fn over(
        &self,
        fold: &Fold,
        method: &str,
        sampling: &str,
        source: &Oversampler<'_>,
        usr: f64,
        osr: f64,
    ) -> Result<ExperimentRecord> {
        let t = Instant::now();
        let mut rec = self.record(method, sampling, usr, osr, fold.index);
        let under = self.undersampled(fold, usr)?;
        let (maj, min) = under.class_counts();
        let n = required_synthetic(maj, min, osr);
        let seed = derive_seed(
            self.config.seed,
            &[
                &self.data.name,
                method,
                sampling,
                &fold.index.to_string(),
                &seed_key(usr),
                &seed_key(osr),
            ],
        );
        let train = if n == 0 {
            under
        } else {
            match source.synthesize(&under, n, seed) {
                Ok(rows) => append_minority(&under, &rows)?,
                Err(Error::DrawLimitExceeded {
                    kept,
                    wanted,
                    draws,
                }) => {
                    log::info!("{method}/{sampling} fold {} usr {usr} osr {osr}: timeout ({kept}/{wanted} after {draws} draws)", fold.index);
                    rec.status = Status::Timeout;
                    rec.wall_time_ms = Some(elapsed_ms(t));
                    return Ok(rec);
                }
                Err(e) => return Err(e),
            }
        };
        self.score(&mut rec, &train, &fold.test)?;
        rec.wall_time_ms = Some(elapsed_ms(t));
        Ok(rec)
    }

    fn train_generator(
        &self,
        folds: &FoldSplit,
        fold: &Fold,
        name: &str,
        kind: SamplingKind,
    ) -> Result<(TrainedGenerator, GeneratorInfo)> {
        let t = Instant::now();
        let mut spec = ModelSpec::from_name(name)?.for_strategy(kind);
        self.config.generator.apply(&mut spec);
        let gen_rows = folds.generator_rows(fold.index);
        let set = training_view(self.data, &gen_rows, kind)?;
        let val_rows = folds.validation_rows(fold.index);
        let validation = training_view(self.data, val_rows, kind).ok();
        let seed = derive_seed(
            self.config.seed,
            &[
                &self.data.name,
                name,
                kind.as_str(),
                &fold.index.to_string(),
                "generator",
            ],
        );
        let g = train(&spec, &set, validation.as_ref(), seed)?;
        let info = GeneratorInfo {
            method: name.into(),
            sampling: kind,
            fold: fold.index,
            trained_on: g.trained_on.clone(),
            fingerprint: g.fingerprint.clone(),
            wall_time_ms: elapsed_ms(t),
        };
        log::info!(
            "trained {name}/{kind} for fold {} in {} ms",
            fold.index,
            info.wall_time_ms
        );
        Ok((g, info))
    }
}

/// Trains `model` for `kind` on a whole dataset, holding out a random
/// `validation_fraction` of the rows for early stopping.
pub fn fit_generator(
    data: &Dataset<f64>,
    model: &str,
    kind: SamplingKind,
    overrides: &GeneratorOverrides,
    validation_fraction: f64,
    seed: u64,
) -> Result<TrainedGenerator> {
    if !(0.0..1.0).contains(&validation_fraction) {
        return Err(Error::Config(format!(
            "validation fraction {validation_fraction} must be in [0, 1)"
        )));
    }
    let mut spec = ModelSpec::from_name(model)?.for_strategy(kind);
    overrides.apply(&mut spec);
    let n_val = (data.len() as f64 * validation_fraction).round() as usize;
    let mut rng = derived(seed, &[&data.name, "validation"]);
    let mut held = rand::seq::index::sample(&mut rng, data.len(), n_val).into_vec();
    held.sort_unstable();
    let mut is_held = vec![false; data.len()];
    for &i in &held {
        is_held[i] = true;
    }
    let rows: Vec<usize> = (0..data.len()).filter(|&i| !is_held[i]).collect();
    let set = training_view(data, &rows, kind)?;
    let validation = training_view(data, &held, kind).ok();
    train(
        &spec,
        &set,
        validation.as_ref(),
        derive_seed(seed, &[&data.name, model, kind.as_str(), "generator"]),
    )
}

/// Runs baseline, undersampling sweep and every oversampling cell on
/// `jobs` worker threads. The records are independent of `jobs`.
pub fn run_grid(data: &Dataset<f64>, config: &GridConfig, jobs: usize) -> Result<GridOutput> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| run_grid_inner(data, config))
}

fn run_grid_inner(data: &Dataset<f64>, config: &GridConfig) -> Result<GridOutput> {
    let dataset_ir = compute_ir(&data.labels)?;
    let config = config.resolved(dataset_ir)?;
    let kinds = config.method_kinds()?;
    let folds = make_folds(
        &data.labels,
        config.folds,
        config.validation_fraction,
        derive_seed(config.seed, &[&data.name, "folds"]),
    )?;
    let classifier = match config.classifier {
        Some(c) => {
            c.validate()?;
            c
        }
        None => grid_search(data, &folds, &config.classifier_grid)?.0,
    };
    log::info!("classifier: {classifier:?}");
    let fold_data: Vec<Fold> = (0..folds.fold_count)
        .map(|k| {
            let train = data.subset(&folds.train_rows(k));
            let ir = train.ir()?;
            Ok(Fold {
                index: k,
                train,
                test: data.subset(&folds.test_rows(k)),
                ir,
            })
        })
        .collect::<Result<_>>()?;
    let runner = Runner {
        data,
        config: config.clone(),
        classifier,
        dataset_ir,
    };

    let mut gen_jobs: Vec<(usize, String, SamplingKind)> = Vec::new();
    for k in &kinds {
        if let MethodKind::Generative(name) = k {
            for f in 0..folds.fold_count {
                for &s in &config.sampling {
                    gen_jobs.push((f, name.clone(), s));
                }
            }
        }
    }
    let trained: Vec<(TrainedGenerator, GeneratorInfo)> = gen_jobs
        .par_iter()
        .map(|(f, name, s)| runner.train_generator(&folds, &fold_data[*f], name, *s))
        .collect::<Result<_>>()?;
    let generators: BTreeMap<(usize, String, SamplingKind), &TrainedGenerator> = gen_jobs
        .iter()
        .cloned()
        .zip(trained.iter().map(|t| &t.0))
        .collect();

    enum Job {
        Baseline(usize),
        Under(usize, f64),
        Over(usize, MethodKind, Option<SamplingKind>, f64, f64),
    }
    let mut jobs = Vec::new();
    let cells = config.cells();
    for f in 0..folds.fold_count {
        jobs.push(Job::Baseline(f));
        for &u in &config.usr_grid {
            jobs.push(Job::Under(f, u));
        }
        for k in &kinds {
            let strategies: Vec<Option<SamplingKind>> = match k {
                MethodKind::Classic(_) => vec![None],
                MethodKind::Generative(_) => config.sampling.iter().copied().map(Some).collect(),
            };
            for s in strategies {
                for &(u, o) in &cells {
                    jobs.push(Job::Over(f, k.clone(), s, u, o));
                }
            }
        }
    }
    let mut records: Vec<ExperimentRecord> = jobs
        .par_iter()
        .map(|job| match job {
            Job::Baseline(f) => runner.baseline(&fold_data[*f]),
            Job::Under(f, u) => runner.under(&fold_data[*f], *u),
            Job::Over(f, MethodKind::Classic(m), _, u, o) => {
                let src = Oversampler::Classic(*m, config.classic);
                runner.over(&fold_data[*f], m.id(), "", &src, *u, *o)
            }
            Job::Over(f, MethodKind::Generative(name), s, u, o) => {
                let s = s.expect("generative jobs carry a strategy");
                let g = generators[&(*f, name.clone(), s)];
                let strategy = SamplingStrategy {
                    kind: s,
                    draw_limit: config.draw_limit,
                    batch: config.draw_batch,
                };
                runner.over(
                    &fold_data[*f],
                    name,
                    s.as_str(),
                    &Oversampler::Generator(g, strategy),
                    *u,
                    *o,
                )
            }
        })
        .collect::<Result<_>>()?;
    records.sort_by(ExperimentRecord::canonical_cmp);

    let manifest = GridManifest {
        toolkit_version: crate::VERSION.to_string(),
        dataset: data.name.clone(),
        dataset_fingerprint: dataset_fingerprint(data),
        rows: data.len(),
        ir: dataset_ir,
        config,
        classifier,
        classifier_label: crate::boost::CLASSIFIER_LABEL.to_string(),
    };
    let generators = trained.into_iter().map(|t| t.1).collect();
    Ok(GridOutput {
        records,
        manifest,
        folds,
        generators,
    })
}

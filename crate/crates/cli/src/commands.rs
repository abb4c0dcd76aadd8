use std::fs;
use std::path::{Path, PathBuf};

use rebalance::boost::CLASSIFIER_LABEL;
use rebalance::models::{SamplingKind, TrainedGenerator};
use rebalance::protocol::{
    fit_generator, read_results, run_grid, write_outputs, GridConfig, GridManifest, Oversampler,
    BASELINE,
};
use rebalance::resample::{ClassicParams, Method};
use rebalance::rng::seeded;
use rebalance::samplers::{draw, SamplingStrategy};
use rebalance::tabular::{
    decode_row, encoded_header, load_encoded, load_raw, save_encoded, DatasetMetadata, ENCODED_CSV,
    ENCODED_META,
};
use rebalance::viz::{
    diagnostic_sample, emit_diagnostics, emit_heatmaps, emit_tables, DiagnosticConfig,
};
use rebalance::{Dataset, Error, Result};

use crate::args::{
    Command, GridArgs, PreprocessArgs, ReportArgs, SampleArgs, TrainArgs, VizArgs, VizKindArg,
};
use crate::manifest::RunManifest;

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Preprocess(a) => preprocess(a),
        Command::Train(a) => train(a),
        Command::Sample(a) => sample(a),
        Command::Grid(a) => grid(a),
        Command::Report(a) => report(a),
        Command::Viz(a) => viz(a),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn load_data(dir: &Path, manifest: &mut RunManifest) -> Result<Dataset<f64>> {
    let (data, _) = load_encoded(dir)?;
    manifest.input(&dir.join(ENCODED_CSV))?;
    manifest.input(&dir.join(ENCODED_META))?;
    Ok(data)
}

/// A grid configuration file, or the `config` of a grid manifest.json.
pub fn read_grid_config(path: Option<&Path>) -> Result<GridConfig> {
    let Some(path) = path else {
        return Ok(GridConfig::default());
    };
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
    if value.get("toolkit_version").is_some() {
        if let Some(inner) = value.get_mut("config") {
            value = inner.take();
        }
    }
    serde_json::from_value(value).map_err(|e| Error::json(path.display().to_string(), e))
}

fn preprocess(a: PreprocessArgs) -> Result<()> {
    let mut m = RunManifest::start("preprocess");
    m.input(&a.csv)?;
    m.input(&a.metadata)?;
    let text = fs::read_to_string(&a.metadata).map_err(|e| Error::io(&a.metadata, e))?;
    let meta: DatasetMetadata = serde_json::from_str(&text)
        .map_err(|e| Error::Schema(format!("{}: {e}", a.metadata.display())))?;
    let data = load_raw(&a.csv, &a.metadata)?;
    let dir = &a.out.out;
    save_encoded(&data, &meta.label, &meta.positive_class, dir)?;
    log::info!(
        "encoded {} rows × {} columns into {}",
        data.len(),
        data.width(),
        dir.display()
    );
    m.config(&meta)?;
    m.output(&dir.join(ENCODED_CSV))?;
    m.output(&dir.join(ENCODED_META))?;
    m.finish(dir)
}

fn train(a: TrainArgs) -> Result<()> {
    let mut m = RunManifest::start("train");
    let data = load_data(&a.data, &mut m)?;
    if let Some(p) = &a.config {
        m.input(p)?;
    }
    let mut cfg = read_grid_config(a.config.as_deref())?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(e) = a.epochs {
        cfg.generator.epochs = Some(e);
    }
    let kind: SamplingKind = a.strategy.parse()?;
    let g = fit_generator(
        &data,
        &a.model,
        kind,
        &cfg.generator,
        cfg.validation_fraction,
        cfg.seed,
    )?;
    let dir = &a.out.out;
    create_dir(dir)?;
    let path = dir.join(format!("{}-{}.model.json", a.model, kind.as_str()));
    g.save(&path)?;
    log::info!("saved {}", path.display());
    m.seed = Some(cfg.seed);
    m.config(&serde_json::json!({
        "model": a.model,
        "strategy": kind,
        "generator": cfg.generator,
        "validation_fraction": cfg.validation_fraction,
        "spec": g.spec,
    }))?;
    m.output(&path)?;
    m.finish(dir)
}

fn sample(a: SampleArgs) -> Result<()> {
    let mut m = RunManifest::start("sample");
    m.input(&a.model)?;
    let g = TrainedGenerator::load(&a.model)?;
    let kind: SamplingKind = match &a.strategy {
        Some(s) => s.parse()?,
        None => g.spec.strategy(),
    };
    let mut strategy = SamplingStrategy::new(kind);
    if let Some(l) = a.draw_limit {
        strategy.draw_limit = l;
    }
    let rows = draw(&g, &strategy, a.n, a.class, &mut seeded(a.seed))?;
    let meta = if g.spec.label_as_variable {
        &g.meta[..g.meta.len() - 1]
    } else {
        &g.meta[..]
    };

    let dir = &a.out.out;
    create_dir(dir)?;
    let path = dir.join(&a.file);
    let mut w =
        csv::Writer::from_path(&path).map_err(|e| Error::csv(path.display().to_string(), e))?;
    let err = |e| Error::csv("writing samples", e);
    let mut header = if a.encoded {
        encoded_header(meta)
    } else {
        meta.iter().map(|v| v.name.clone()).collect()
    };
    header.push("label".into());
    w.write_record(&header).map_err(err)?;
    for r in rows.iter_rows() {
        let mut rec = if a.encoded {
            r.iter().map(|x| x.to_string()).collect()
        } else {
            decode_row(r, meta)
        };
        rec.push(a.class.to_string());
        w.write_record(&rec).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    m.seed = Some(a.seed);
    m.config(&serde_json::json!({
        "strategy": kind,
        "n": a.n,
        "class": a.class,
        "draw_limit": strategy.draw_limit,
        "encoded": a.encoded,
    }))?;
    m.output(&path)?;
    m.finish(dir)
}

fn grid(a: GridArgs) -> Result<()> {
    let mut m = RunManifest::start("grid");
    let data = load_data(&a.data, &mut m)?;
    if let Some(p) = &a.config {
        m.input(p)?;
    }
    let mut cfg = read_grid_config(a.config.as_deref())?;
    if let Some(v) = a.methods {
        cfg.methods = v;
    }
    if let Some(v) = a.sampling {
        cfg.sampling = v.iter().map(|s| s.parse()).collect::<Result<_>>()?;
    }
    if let Some(v) = a.usr_grid {
        cfg.usr_grid = v;
    }
    if let Some(v) = a.osr_grid {
        cfg.osr_grid = v;
    }
    if let Some(v) = a.folds {
        cfg.folds = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.draw_limit {
        cfg.draw_limit = v;
    }
    if let Some(v) = a.epochs {
        cfg.generator.epochs = Some(v);
    }
    if a.record_wall_time {
        cfg.record_wall_time = true;
    }
    let out = run_grid(&data, &cfg, a.jobs)?;
    let dir = &a.out.out;
    write_outputs(dir, &out)?;
    m.seed = Some(out.manifest.config.seed);
    m.config(&out.manifest.config)?;
    for f in ["results.csv", "summary.md", "manifest.json"] {
        m.output(&dir.join(f))?;
    }
    m.finish(dir)
}

fn neighbour_manifest(results: &Path) -> Option<GridManifest> {
    let path = results.parent()?.join("manifest.json");
    serde_json::from_str(&fs::read_to_string(path).ok()?).ok()
}

fn report(a: ReportArgs) -> Result<()> {
    let mut m = RunManifest::start("report");
    m.input(&a.results)?;
    let records = read_results(&a.results)?;
    let grid = neighbour_manifest(&a.results);
    let dataset = records
        .first()
        .map(|r| r.dataset.clone())
        .unwrap_or_else(|| "dataset".into());
    let ir = match (a.ir, &grid) {
        (Some(ir), _) => ir,
        (None, Some(g)) => g.ir,
        (None, None) => {
            let base: Vec<f64> = records
                .iter()
                .filter(|r| r.method == BASELINE)
                .map(|r| r.usr)
                .collect();
            if base.is_empty() {
                return Err(Error::Config(
                    "no --ir given and no baseline records to derive it from".into(),
                ));
            }
            base.iter().sum::<f64>() / base.len() as f64
        }
    };
    let label = grid
        .as_ref()
        .map_or(CLASSIFIER_LABEL.to_string(), |g| g.classifier_label.clone());
    let dir = &a.out.out;
    let files = emit_tables(&records, &dataset, ir, &label, dir)?;
    m.config(&serde_json::json!({ "ir": ir, "classifier_label": label }))?;
    for f in &files {
        m.output(f)?;
    }
    m.finish(dir)
}

fn viz(a: VizArgs) -> Result<()> {
    let mut m = RunManifest::start("viz");
    let dir = a.out.out.clone();
    let files: Vec<PathBuf> = match a.kind {
        VizKindArg::Heatmap => {
            let results = a
                .results
                .as_ref()
                .ok_or_else(|| Error::Config("--kind heatmap needs --results".into()))?;
            m.input(results)?;
            let records = read_results(results)?;
            let dataset = records
                .first()
                .map(|r| r.dataset.clone())
                .unwrap_or_else(|| "dataset".into());
            m.config(&serde_json::json!({ "kind": "heatmap" }))?;
            emit_heatmaps(&records, &dataset, &dir)?
        }
        VizKindArg::Diagnostics => {
            let data_dir = a
                .data
                .as_ref()
                .ok_or_else(|| Error::Config("--kind diagnostics needs --data".into()))?;
            let data = load_data(data_dir, &mut m)?;
            let mut config = DiagnosticConfig {
                seed: a.seed,
                ..DiagnosticConfig::default()
            };
            if let Some(p) = a.perplexity {
                config.tsne.perplexity = p;
            }
            if let Some(i) = a.tsne_iterations {
                config.tsne.iterations = i;
            }
            if let Some(e) = a.som_epochs {
                config.som.epochs = e;
            }
            let model = match &a.model {
                Some(p) => {
                    m.input(p)?;
                    Some(TrainedGenerator::load(p)?)
                }
                None => None,
            };
            let (label, sampling, source) = match (&a.method, &model) {
                (Some(name), None) => {
                    let method: Method = name.parse()?;
                    if method == Method::RandomUnder {
                        return Err(Error::Config(
                            "random_under does not synthesize rows".into(),
                        ));
                    }
                    (
                        method.id().to_string(),
                        String::new(),
                        Oversampler::Classic(method, ClassicParams::default()),
                    )
                }
                (None, Some(g)) => {
                    let kind = g.spec.strategy();
                    (
                        g.spec.name(),
                        kind.as_str().to_string(),
                        Oversampler::Generator(g, SamplingStrategy::new(kind)),
                    )
                }
                _ => {
                    return Err(Error::Config(
                        "--kind diagnostics needs exactly one of --method and --model".into(),
                    ))
                }
            };
            let sample = diagnostic_sample(&data, &source, a.n_real, a.n_synth, a.seed)?;
            m.seed = Some(a.seed);
            m.config(&serde_json::json!({
                "kind": "diagnostics",
                "method": label,
                "n_real": a.n_real,
                "n_synth": a.n_synth,
                "diagnostics": config,
            }))?;
            emit_diagnostics(&sample, &data.name, &label, &sampling, &config, &dir)?
        }
    };
    for f in &files {
        m.output(f)?;
    }
    m.finish(&dir)
}

use std::path::Path;

use serde::Serialize;
use sincfront::audio::{load_split, synth_class_corpus, write_corpus, Split};
use sincfront::filter::FilterExport;
use sincfront::train::{evaluate_utterances, run_training, scores_csv, verify_speakers, TrainRun};
use sincfront::{Checkpoint, Error, ExperimentConfig, FrontendKind, Result};

use crate::outdir::OutDir;
use crate::{require_out, Cli, Command};

pub const CONFIG_ECHO: &str = "config.json";

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg = cfg.with_seed(seed);
    }
    Ok(cfg)
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report serializes") + "\n"
}

fn print_json<T: Serialize>(v: &T) {
    println!("{}", serde_json::to_string(v).expect("report serializes"));
}

pub fn run(cli: &Cli) -> Result<()> {
    let mut cfg = load_config(cli)?;
    if let Command::Train { frontend, epochs, .. } = &cli.command {
        if let Some(k) = frontend {
            cfg.network.frontend.kind = *k;
        }
        if let Some(e) = epochs {
            cfg.train.epochs = *e;
        }
    }
    cfg.validate()?;
    let out = OutDir::claim(require_out(cli)?)?;
    out.write(CONFIG_ECHO, cfg.echo())?;

    match &cli.command {
        Command::GenCorpus => gen_corpus(&cfg, &out),
        Command::Train {
            manifest, no_timing, ..
        } => train(&cfg, cli.config.is_some(), manifest, !no_timing, &out),
        Command::InspectFilters {
            checkpoint,
            n_points,
        } => inspect_filters(checkpoint, n_points.unwrap_or(cfg.analysis.n_points), &out),
        Command::Verify {
            checkpoint,
            enroll,
            trials,
        } => verify(&cfg, checkpoint, enroll, trials, &out),
        Command::Eval {
            checkpoint,
            manifest,
            split,
        } => eval(&cfg, checkpoint, manifest, split, &out),
    }
}

#[derive(Serialize)]
struct CorpusSummary {
    manifest: String,
    class_ids: Vec<u32>,
    n_train: usize,
    n_test: usize,
}

fn gen_corpus(cfg: &ExperimentConfig, out: &OutDir) -> Result<()> {
    let corpus = synth_class_corpus(&cfg.corpus)?;
    let manifest = write_corpus(out.root(), &corpus)?;
    out.write("signatures.json", to_json(&corpus.signatures))?;
    print_json(&CorpusSummary {
        manifest: manifest.display().to_string(),
        class_ids: cfg.corpus.class_ids(),
        n_train: corpus.train.len(),
        n_test: corpus.test.len(),
    });
    Ok(())
}

#[derive(Serialize)]
struct TrainSummary {
    frontend: FrontendKind,
    first_layer_params: usize,
    total_params: usize,
    class_ids: Vec<u32>,
    epochs: usize,
    steps: usize,
    final_train_loss: Option<f64>,
    final_heldout_fer: Option<f64>,
}

fn train(cfg: &ExperimentConfig, explicit_config: bool, manifest: &Path, timing: bool, out: &OutDir) -> Result<()> {
    // A config that pins the class count must agree with the manifest.
    let pinned = !cfg.corpus.classes.is_empty() || cfg.corpus.n_classes.is_some();
    let run = TrainRun {
        network: cfg.network.clone(),
        manifest: manifest.to_path_buf(),
        settings: cfg.train.clone(),
        out_dir: out.root().to_path_buf(),
        seed: cfg.seed,
        timing,
        expected_classes: (explicit_config && pinned).then(|| cfg.corpus.class_count()),
    };
    let outcome = run_training(&run)?;
    let model = &outcome.checkpoint.model;
    let last = outcome.records.last();
    let summary = TrainSummary {
        frontend: model.frontend().kind(),
        first_layer_params: model.first_layer_parameter_count(),
        total_params: model.parameter_count(),
        class_ids: outcome.checkpoint.class_ids.clone(),
        epochs: outcome.checkpoint.epoch,
        steps: outcome.checkpoint.step,
        final_train_loss: last.map(|r| r.train_loss),
        final_heldout_fer: last.map(|r| r.heldout_fer),
    };
    log::info!(
        "{} front-end: {} first-layer parameters of {}",
        summary.frontend,
        summary.first_layer_params,
        summary.total_params
    );
    out.write("summary.json", to_json(&summary))?;
    print_json(&summary);
    Ok(())
}

#[derive(Serialize)]
struct FiltersJson {
    frontend: FrontendKind,
    #[serde(flatten)]
    export: FilterExport,
}

fn inspect_filters(checkpoint: &Path, n_points: usize, out: &OutDir) -> Result<()> {
    if n_points < 2 {
        return Err(Error::Config(format!("--n-points must be at least 2, got {n_points}")));
    }
    let ck = Checkpoint::load(checkpoint)?;
    let frontend = ck.model.frontend();
    let export = FilterExport::from_bank(&frontend.filter_bank()?, ck.model.shape().sample_rate, n_points)?;
    out.write("filters.csv", export.filters_csv())?;
    out.write("cumulative.csv", export.cumulative_csv())?;
    out.write(
        "filters.json",
        to_json(&FiltersJson {
            frontend: frontend.kind(),
            export,
        }),
    )?;
    Ok(())
}

fn verify(cfg: &ExperimentConfig, checkpoint: &Path, enroll: &Path, trials: &Path, out: &OutDir) -> Result<()> {
    let ck = Checkpoint::load(checkpoint)?;
    let framing = cfg.train.framing(ck.model.shape().sample_rate)?;
    let enroll = load_split(enroll, Split::Train)?;
    let trials = load_split(trials, Split::Test)?;
    let (scored, report) = verify_speakers(
        &ck.model,
        &ck.class_ids,
        &enroll,
        &trials,
        framing,
        cfg.train.impostors_per_genuine,
        cfg.seed,
    )?;
    out.write("scores.csv", scores_csv(&scored))?;
    out.write("verify.json", to_json(&report))?;
    print_json(&report);
    Ok(())
}

fn eval(cfg: &ExperimentConfig, checkpoint: &Path, manifest: &Path, split: &str, out: &OutDir) -> Result<()> {
    let split = if split == "train" { Split::Train } else { Split::Test };
    let ck = Checkpoint::load(checkpoint)?;
    let framing = cfg.train.framing(ck.model.shape().sample_rate)?;
    let waves = load_split(manifest, split)?;
    let report = evaluate_utterances(&ck.model, &ck.class_ids, &waves, framing)?;
    out.write("eval.json", to_json(&report))?;
    print_json(&report);
    Ok(())
}

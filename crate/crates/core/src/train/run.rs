//! File-driven training: manifest in, log and checkpoints out.

use std::fmt::Write as _;
use std::path::PathBuf;

use super::{prepare_dataset, train, EpochRecord, ScoredTrial, TrainOutcome, TrainSettings};
use crate::audio::{load_split, Split};
use crate::error::{Error, Result};
use crate::nn::{Checkpoint, NetworkConfig};

pub const TRAIN_LOG: &str = "train_log.csv";
pub const FINAL_CHECKPOINT: &str = "model.ckpt";
pub const CHECKPOINT_DIR: &str = "checkpoints";

#[derive(Debug, Clone, PartialEq)]
pub struct TrainRun {
    pub network: NetworkConfig,
    pub manifest: PathBuf,
    pub settings: TrainSettings,
    pub out_dir: PathBuf,
    pub seed: u64,
    /// Record wall time in the log; off for byte-identical reruns.
    pub timing: bool,
    /// Fail unless the manifest holds exactly this many training classes.
    pub expected_classes: Option<usize>,
}

pub fn records_csv(records: &[EpochRecord]) -> String {
    let mut s = String::from("epoch,train_loss,heldout_fer,wall_s\n");
    for r in records {
        let _ = writeln!(s, "{},{},{},{}", r.epoch, r.train_loss, r.heldout_fer, r.wall_s);
    }
    s
}

pub fn scores_csv(trials: &[ScoredTrial]) -> String {
    let mut s = String::from("score,is_genuine\n");
    for t in trials {
        let _ = writeln!(s, "{},{}", t.score, u8::from(t.is_genuine));
    }
    s
}

fn write(path: PathBuf, contents: &[u8]) -> Result<()> {
    std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))
}

/// Trains on the `train` split of the manifest. Writes `train_log.csv`,
/// `model.ckpt`, and `checkpoints/epoch_NNNN.ckpt` at the configured
/// cadence. Zero epochs writes the initial model and an empty log.
pub fn run_training(run: &TrainRun) -> Result<TrainOutcome> {
    run.settings.validate()?;
    run.network.validate()?;
    if !run.manifest.is_file() {
        return Err(Error::io(
            &run.manifest,
            std::io::Error::new(std::io::ErrorKind::NotFound, "manifest not found"),
        ));
    }
    let waves = load_split(&run.manifest, Split::Train)?;
    let Some(first) = waves.first() else {
        return Err(Error::InvalidInput(format!(
            "{}: no training utterances",
            run.manifest.display()
        )));
    };
    let framing = run.settings.framing(first.sample_rate)?;
    let data = prepare_dataset(&waves, framing, run.settings.heldout_fraction, run.seed)?;
    if let Some(n) = run.expected_classes {
        if n != data.class_ids.len() {
            return Err(Error::Config(format!(
                "config expects {n} classes but {} has {}",
                run.manifest.display(),
                data.class_ids.len()
            )));
        }
    }
    std::fs::create_dir_all(&run.out_dir).map_err(|e| Error::io(&run.out_dir, e))?;
    let ckpt_dir = run.out_dir.join(CHECKPOINT_DIR);
    let every = run.settings.checkpoint_every;
    if every > 0 {
        std::fs::create_dir_all(&ckpt_dir).map_err(|e| Error::io(&ckpt_dir, e))?;
    }
    let seed = run.seed;
    let outcome = train(&run.network, &data, &run.settings, seed, run.timing, &mut |ev| {
        if every > 0 && ev.record.epoch % every == 0 {
            let ck = Checkpoint {
                model: ev.model.clone(),
                optimizer: ev.optimizer.clone(),
                class_ids: ev.class_ids.to_vec(),
                seed,
                epoch: ev.record.epoch,
                step: ev.step,
            };
            ck.save(&ckpt_dir.join(format!("epoch_{:04}.ckpt", ev.record.epoch)))?;
        }
        Ok(())
    })?;
    write(run.out_dir.join(TRAIN_LOG), records_csv(&outcome.records).as_bytes())?;
    outcome.checkpoint.save(&run.out_dir.join(FINAL_CHECKPOINT))?;
    Ok(outcome)
}

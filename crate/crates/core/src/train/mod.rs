//! Minibatch training, classification metrics and speaker verification.

mod data;
mod metrics;
mod run;
mod verify;

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audio::{Framing, Waveform};
use crate::error::{Error, Result};
use crate::nn::{softmax, softmax_cross_entropy, Checkpoint, Mode, Model, ModelShape, NetworkConfig, RmsProp, Tensor};

pub use data::{class_index, prepare_dataset, Dataset, Examples};
pub use metrics::{argmax, frame_error_rate, sentence_error_rate, UtterancePosteriors};
pub use run::{records_csv, run_training, scores_csv, TrainRun, CHECKPOINT_DIR, FINAL_CHECKPOINT, TRAIN_LOG};
pub use verify::{
    average_embeddings, build_trials, cosine, dvector_for, equal_error_rate, extract_dvector, hidden_activations,
    l2_normalize, overlapping, score_trials, EerPoint, ScoredTrial, Trial,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSettings {
    pub epochs: usize,
    pub batch_size: usize,
    pub heldout_fraction: f64,
    /// Write a checkpoint every this many epochs; 0 keeps only the final one.
    pub checkpoint_every: usize,
    pub chunk_ms: f64,
    /// Samples shared by consecutive chunks.
    pub overlap_ms: f64,
    /// Overrides the hop, in samples.
    pub hop: Option<usize>,
    pub impostors_per_genuine: usize,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 128,
            heldout_fraction: 0.2,
            checkpoint_every: 0,
            chunk_ms: 200.0,
            overlap_ms: 10.0,
            hop: None,
            impostors_per_genuine: 10,
        }
    }
}

impl TrainSettings {
    pub fn framing(&self, sample_rate: f64) -> Result<Framing> {
        let f = Framing::from_ms(sample_rate, self.chunk_ms, self.overlap_ms)?;
        match self.hop {
            Some(h) => f.with_hop(h),
            None => Ok(f),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::Config(format!(
                "train.batch_size must be at least 2 for batch normalization, got {}",
                self.batch_size
            )));
        }
        if !(self.heldout_fraction > 0.0 && self.heldout_fraction < 1.0) {
            return Err(Error::Config("train.heldout_fraction must lie in (0, 1)".into()));
        }
        if !(self.chunk_ms > 0.0 && self.overlap_ms >= 0.0 && self.overlap_ms < self.chunk_ms) {
            return Err(Error::Config("train.chunk_ms must be positive and exceed train.overlap_ms".into()));
        }
        if self.hop == Some(0) {
            return Err(Error::Config("train.hop must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    /// Percentage in `[0, 100]`.
    pub heldout_fer: f64,
    pub wall_s: f64,
}

/// Handed to the observer after each epoch.
pub struct EpochEvent<'a> {
    pub record: &'a EpochRecord,
    pub model: &'a Model,
    pub optimizer: &'a RmsProp,
    pub class_ids: &'a [u32],
    pub step: usize,
    pub total_steps: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub records: Vec<EpochRecord>,
}

const EVAL_BATCH: usize = 256;

/// Class posteriors `[N, C]` for every example, in evaluation mode.
pub fn predict(model: &Model, examples: &Examples) -> Result<Tensor> {
    let c = model.shape().n_classes;
    let mut out = Vec::with_capacity(examples.len() * c);
    let idx: Vec<usize> = (0..examples.len()).collect();
    for block in idx.chunks(EVAL_BATCH) {
        let (x, _) = examples.batch(block);
        let pass = model.forward(&x, Mode::Eval)?;
        out.extend_from_slice(softmax(&pass.logits)?.data());
    }
    Tensor::new(vec![examples.len(), c], out)
}

fn step_seed(seed: u64, step: usize) -> u64 {
    let mut z = seed ^ (step as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^ (z >> 31)
}

/// Minibatch split of one epoch; a trailing batch of one example is dropped
/// because batch normalization cannot use it.
fn epoch_batches(order: &[usize], batch: usize) -> Vec<&[usize]> {
    order.chunks(batch).filter(|b| b.len() >= 2).collect()
}

/// Trains a fresh model. `seed` drives initialization, the per-epoch
/// shuffles and the dropout masks. With `timing` off, `wall_s` is 0 so logs
/// are bit-reproducible.
pub fn train(
    network: &NetworkConfig,
    data: &Dataset,
    settings: &TrainSettings,
    seed: u64,
    timing: bool,
    observer: &mut dyn FnMut(&EpochEvent) -> Result<()>,
) -> Result<TrainOutcome> {
    settings.validate()?;
    if data.train.len() < 2 {
        return Err(Error::InvalidInput("training needs at least 2 chunks".into()));
    }
    let shape = ModelShape {
        input_len: data.framing.chunk,
        n_classes: data.class_ids.len(),
        sample_rate: data.sample_rate,
    };
    let mut model = Model::new(network, shape, seed)?;
    let mut optimizer = RmsProp::new(network.optimizer);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5348_5546_464c_4521);
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let steps_per_epoch = epoch_batches(&order, settings.batch_size).len();
    let total_steps = steps_per_epoch * settings.epochs;
    let mut step = 0;
    let mut records = Vec::with_capacity(settings.epochs);
    let start = Instant::now();

    for epoch in 1..=settings.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut seen) = (0.0, 0usize);
        for batch in epoch_batches(&order, settings.batch_size) {
            let (x, y) = data.train.batch(batch);
            let pass = model.forward(&x, Mode::Train { dropout_seed: step_seed(seed, step) })?;
            let (loss, g) = softmax_cross_entropy(&pass.logits, &y)?;
            if !loss.is_finite() {
                return Err(Error::Diverged(format!("loss {loss} at epoch {epoch}, step {step}")));
            }
            let grads = model.backward(&pass, &g)?;
            model.commit_batch_stats(&pass);
            optimizer.step(&mut model.parameters_mut(), &grads)?;
            loss_sum += loss * batch.len() as f64;
            seen += batch.len();
            step += 1;
        }
        let posteriors = predict(&model, &data.heldout)?;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / seen as f64,
            heldout_fer: frame_error_rate(&posteriors, &data.heldout.labels)?,
            wall_s: if timing { start.elapsed().as_secs_f64() } else { 0.0 },
        };
        log::info!(
            "epoch {epoch}: loss {:.4}, held-out FER {:.2}%",
            record.train_loss,
            record.heldout_fer
        );
        observer(&EpochEvent {
            record: &record,
            model: &model,
            optimizer: &optimizer,
            class_ids: &data.class_ids,
            step,
            total_steps,
        })?;
        records.push(record);
    }
    Ok(TrainOutcome {
        checkpoint: Checkpoint {
            model,
            optimizer,
            class_ids: data.class_ids.clone(),
            seed,
            epoch: settings.epochs,
            step,
        },
        records,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub fer_pct: f64,
    pub cer_pct: f64,
    pub n_chunks: usize,
    pub n_utterances: usize,
}

/// Frame and sentence error rates of labelled utterances.
pub fn evaluate_utterances(model: &Model, class_ids: &[u32], waves: &[Waveform], framing: Framing) -> Result<EvalReport> {
    check_rate(model, waves)?;
    let mut all = Examples::new(framing.chunk);
    for w in waves {
        all.push_utterance(w, class_index(class_ids, w.label)?, framing);
    }
    if all.is_empty() {
        return Err(Error::InvalidInput("no utterance is long enough for one chunk".into()));
    }
    let posteriors = predict(model, &all)?;
    let fer_pct = frame_error_rate(&posteriors, &all.labels)?;
    let c = posteriors.dim(1);
    let mut utterances = Vec::new();
    for u in 0..all.utterance_ids.len() {
        let rows: Vec<usize> = (0..all.len()).filter(|&i| all.utterance[i] == u).collect();
        if rows.is_empty() {
            continue;
        }
        let data = rows.iter().flat_map(|&i| posteriors.outer(i).to_vec()).collect();
        utterances.push(UtterancePosteriors {
            posteriors: Tensor::new(vec![rows.len(), c], data)?,
            label: all.labels[rows[0]],
        });
    }
    Ok(EvalReport {
        fer_pct,
        cer_pct: sentence_error_rate(&utterances)?,
        n_chunks: all.len(),
        n_utterances: utterances.len(),
    })
}

fn check_rate(model: &Model, waves: &[Waveform]) -> Result<()> {
    let fs = model.shape().sample_rate;
    if let Some(w) = waves.iter().find(|w| w.sample_rate != fs) {
        return Err(Error::InvalidInput(format!(
            "{} is sampled at {} Hz but the model was trained at {fs} Hz",
            w.utterance_id, w.sample_rate
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub eer_pct: f64,
    pub n_genuine: usize,
    pub n_impostor: usize,
    pub threshold: f64,
}

/// Enrols each speaker from all of their `enroll` utterances, embeds every
/// `trials` utterance, and scores genuine trials plus
/// `impostors_per_genuine` impostor trials each. Speakers the model was
/// trained on are refused.
pub fn verify_speakers(
    model: &Model,
    training_classes: &[u32],
    enroll: &[Waveform],
    trials: &[Waveform],
    framing: Framing,
    impostors_per_genuine: usize,
    seed: u64,
) -> Result<(Vec<ScoredTrial>, VerifyReport)> {
    let seen = overlapping(
        training_classes.iter().copied(),
        enroll.iter().chain(trials).map(|w| w.label),
    );
    if !seen.is_empty() {
        return Err(Error::SpeakerOverlap(seen));
    }
    check_rate(model, enroll)?;
    check_rate(model, trials)?;
    if framing.chunk != model.shape().input_len {
        return Err(Error::Shape(format!(
            "framing chunk {} does not match the model input {}",
            framing.chunk,
            model.shape().input_len
        )));
    }
    let mut by_speaker: std::collections::BTreeMap<u32, Vec<&Waveform>> = Default::default();
    for w in enroll {
        by_speaker.entry(w.label).or_default().push(w);
    }
    let mut enrolled = std::collections::BTreeMap::new();
    for (s, utts) in by_speaker {
        enrolled.insert(s, dvector_for(model, &utts, framing)?);
    }
    let usable: Vec<&Waveform> = trials.iter().filter(|w| framing.count(w.samples.len()) > 0).collect();
    if let Some(w) = usable.iter().find(|w| !enrolled.contains_key(&w.label)) {
        return Err(Error::InvalidInput(format!(
            "trial utterance {} belongs to speaker {} who has no enrolment audio",
            w.utterance_id, w.label
        )));
    }
    let embeddings = usable
        .iter()
        .map(|w| dvector_for(model, &[w], framing))
        .collect::<Result<Vec<_>>>()?;
    let speakers: Vec<u32> = usable.iter().map(|w| w.label).collect();
    let pairs = build_trials(&speakers, impostors_per_genuine, seed)?;
    let trials: Vec<Trial> = pairs
        .into_iter()
        .map(|(j, claimed, is_genuine)| Trial {
            embedding: embeddings[j].clone(),
            claimed,
            is_genuine,
        })
        .collect();
    let scored = score_trials(&enrolled, &trials)?;
    let eer = equal_error_rate(&scored)?;
    let n_genuine = scored.iter().filter(|t| t.is_genuine).count();
    let report = VerifyReport {
        eer_pct: eer.eer_pct,
        n_genuine,
        n_impostor: scored.len() - n_genuine,
        threshold: eer.threshold,
    };
    Ok((scored, report))
}

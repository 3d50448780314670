//! d-vectors, cosine scoring and the equal error rate.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::data::{chunk_batch, utterance_chunks};
use crate::audio::{Framing, Waveform};
use crate::error::{Error, Result};
use crate::nn::{Mode, Model, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredTrial {
    pub score: f64,
    pub is_genuine: bool,
}

pub fn l2_normalize(v: &mut [f64]) -> Result<()> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::InvalidInput(format!("cannot normalize a vector of norm {norm}")));
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Ok(())
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Rows are L2-normalized, averaged, and the mean normalized again.
pub fn average_embeddings(rows: &Tensor) -> Result<Vec<f64>> {
    if rows.rank() != 2 || rows.dim(0) == 0 {
        return Err(Error::InvalidInput(format!(
            "need at least one embedding row, got shape {:?}",
            rows.shape()
        )));
    }
    let mut mean = vec![0.0; rows.dim(1)];
    for i in 0..rows.dim(0) {
        let mut r = rows.outer(i).to_vec();
        l2_normalize(&mut r)?;
        mean.iter_mut().zip(&r).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= rows.dim(0) as f64);
    l2_normalize(&mut mean)?;
    Ok(mean)
}

/// Last-hidden-layer embeddings of `[n, 1, T]` chunks in evaluation mode.
pub fn hidden_activations(model: &Model, chunks: &Tensor) -> Result<Tensor> {
    Ok(model.forward(chunks, Mode::Eval)?.last_hidden())
}

/// Unit-norm d-vector for chunks given as `[n, 1, T]`.
pub fn extract_dvector(model: &Model, chunks: &Tensor) -> Result<Vec<f64>> {
    let t = model.shape().input_len;
    if chunks.rank() != 3 || chunks.dim(1) != 1 || chunks.dim(2) != t {
        return Err(Error::Shape(format!(
            "model expects [n, 1, {t}] chunks, got {:?}",
            chunks.shape()
        )));
    }
    average_embeddings(&hidden_activations(model, chunks)?)
}

/// d-vector over every chunk of the given utterances.
pub fn dvector_for(model: &Model, utterances: &[&Waveform], framing: Framing) -> Result<Vec<f64>> {
    let mut samples = Vec::new();
    for w in utterances {
        samples.extend(utterance_chunks(w, framing)?);
    }
    if samples.is_empty() {
        return Err(Error::InvalidInput("no chunks to embed".into()));
    }
    extract_dvector(model, &chunk_batch(&samples, framing.chunk)?)
}

/// A trial before scoring: the test embedding and the identity it claims.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub embedding: Vec<f64>,
    pub claimed: u32,
    pub is_genuine: bool,
}

pub fn score_trials(enrolled: &BTreeMap<u32, Vec<f64>>, trials: &[Trial]) -> Result<Vec<ScoredTrial>> {
    trials
        .iter()
        .map(|t| {
            let e = enrolled.get(&t.claimed).ok_or_else(|| {
                Error::InvalidInput(format!("trial claims speaker {} who is not enrolled", t.claimed))
            })?;
            if e.len() != t.embedding.len() {
                return Err(Error::Shape(format!(
                    "enrolment vector has {} dims, trial {}",
                    e.len(),
                    t.embedding.len()
                )));
            }
            Ok(ScoredTrial {
                score: cosine(e, &t.embedding),
                is_genuine: t.is_genuine,
            })
        })
        .collect()
}

/// Trial pairs by index into a list of `(speaker, ...)` test items: every
/// item is a genuine trial for its own speaker, followed by
/// `impostors_per_genuine` items from other speakers claiming that speaker.
/// Impostors are drawn without replacement while the pool lasts.
pub fn build_trials(speakers: &[u32], impostors_per_genuine: usize, seed: u64) -> Result<Vec<(usize, u32, bool)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(speakers.len() * (impostors_per_genuine + 1));
    for (i, &s) in speakers.iter().enumerate() {
        out.push((i, s, true));
        let pool: Vec<usize> = (0..speakers.len()).filter(|&j| speakers[j] != s).collect();
        if impostors_per_genuine == 0 {
            continue;
        }
        if pool.is_empty() {
            return Err(Error::InvalidInput(format!(
                "no impostor utterances available for speaker {s}"
            )));
        }
        let mut drawn = Vec::with_capacity(impostors_per_genuine);
        while drawn.len() < impostors_per_genuine {
            let mut round = pool.clone();
            round.shuffle(&mut rng);
            drawn.extend(round.into_iter().take(impostors_per_genuine - drawn.len()));
        }
        out.extend(drawn.into_iter().map(|j| (j, s, false)));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EerPoint {
    pub eer_pct: f64,
    pub threshold: f64,
}

fn split_scores(trials: &[ScoredTrial]) -> Result<(Vec<f64>, Vec<f64>)> {
    let (g, i): (Vec<&ScoredTrial>, Vec<&ScoredTrial>) = trials.iter().partition(|t| t.is_genuine);
    if g.is_empty() || i.is_empty() {
        return Err(Error::InvalidInput(format!(
            "EER needs genuine and impostor trials, got {} and {}",
            g.len(),
            i.len()
        )));
    }
    if trials.iter().any(|t| !t.score.is_finite()) {
        return Err(Error::InvalidInput("trial scores must be finite".into()));
    }
    let mut g: Vec<f64> = g.iter().map(|t| t.score).collect();
    let mut i: Vec<f64> = i.iter().map(|t| t.score).collect();
    g.sort_by(f64::total_cmp);
    i.sort_by(f64::total_cmp);
    Ok((g, i))
}

/// Threshold sweep over the sorted unique scores. At threshold `t`, FAR is
/// the fraction of impostors scoring `>= t` and FRR the fraction of genuine
/// trials scoring `< t`; the reported point minimizes `|FAR - FRR|` (lowest
/// threshold on ties) and the EER is `100 (FAR + FRR) / 2` there.
pub fn equal_error_rate(trials: &[ScoredTrial]) -> Result<EerPoint> {
    let (g, i) = split_scores(trials)?;
    let mut thresholds: Vec<f64> = g.iter().chain(&i).copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    let (ng, ni) = (g.len() as f64, i.len() as f64);
    let mut best: Option<(f64, EerPoint)> = None;
    for t in thresholds {
        let far = (i.len() - i.partition_point(|&s| s < t)) as f64 / ni;
        let frr = g.partition_point(|&s| s < t) as f64 / ng;
        let gap = (far - frr).abs();
        if best.map_or(true, |(b, _)| gap < b) {
            best = Some((
                gap,
                EerPoint {
                    eer_pct: (far + frr) / 2.0 * 100.0,
                    threshold: t,
                },
            ));
        }
    }
    Ok(best.expect("at least two scores").1)
}

/// Speakers present in both sets, for refusing evaluation on training
/// identities.
pub fn overlapping(a: impl IntoIterator<Item = u32>, b: impl IntoIterator<Item = u32>) -> Vec<u32> {
    let a: BTreeSet<u32> = a.into_iter().collect();
    let b: BTreeSet<u32> = b.into_iter().collect();
    a.intersection(&b).copied().collect()
}

//! Labelled chunk sets and the held-out split.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::audio::{frame_signal, Framing, Waveform};
use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Chunks stored contiguously, with output-unit labels and the utterance
/// each came from.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Examples {
    pub chunk: usize,
    pub samples: Vec<f64>,
    pub labels: Vec<usize>,
    pub utterance: Vec<usize>,
    pub utterance_ids: Vec<String>,
}

impl Examples {
    pub fn new(chunk: usize) -> Self {
        Self {
            chunk,
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn push_utterance(&mut self, w: &Waveform, label: usize, framing: Framing) {
        let u = self.utterance_ids.len();
        self.utterance_ids.push(w.utterance_id.clone());
        for c in frame_signal(w, framing).chunks {
            self.samples.extend_from_slice(&c.samples);
            self.labels.push(label);
            self.utterance.push(u);
        }
    }

    pub fn example(&self, i: usize) -> &[f64] {
        &self.samples[i * self.chunk..(i + 1) * self.chunk]
    }

    /// `[b, 1, chunk]` inputs and labels for the given example indices.
    pub fn batch(&self, indices: &[usize]) -> (Tensor, Vec<usize>) {
        let mut data = Vec::with_capacity(indices.len() * self.chunk);
        for &i in indices {
            data.extend_from_slice(self.example(i));
        }
        let x = Tensor::new(vec![indices.len(), 1, self.chunk], data).expect("batch size");
        (x, indices.iter().map(|&i| self.labels[i]).collect())
    }
}

/// Training and held-out chunks of a labelled corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Corpus class id of each output unit, ascending.
    pub class_ids: Vec<u32>,
    pub sample_rate: f64,
    pub framing: Framing,
    pub train: Examples,
    pub heldout: Examples,
}

pub fn class_index(class_ids: &[u32], label: u32) -> Result<usize> {
    class_ids.binary_search(&label).map_err(|_| {
        Error::InvalidLabel(format!("class {label} is not one of the model's classes {class_ids:?}"))
    })
}

pub(crate) fn common_rate<'a>(waves: impl IntoIterator<Item = &'a Waveform>) -> Result<f64> {
    let mut rate = None;
    for w in waves {
        match rate {
            None => rate = Some(w.sample_rate),
            Some(r) if r != w.sample_rate => {
                return Err(Error::InvalidInput(format!(
                    "{} is sampled at {} Hz, others at {r} Hz",
                    w.utterance_id, w.sample_rate
                )))
            }
            _ => {}
        }
    }
    rate.ok_or_else(|| Error::InvalidInput("empty corpus".into()))
}

/// Frames the training utterances and holds out `round(fraction n)` of the
/// `n` utterances of each class (at least one, never all), chosen by `seed`.
pub fn prepare_dataset(waves: &[Waveform], framing: Framing, heldout_fraction: f64, seed: u64) -> Result<Dataset> {
    if !(heldout_fraction > 0.0 && heldout_fraction < 1.0) {
        return Err(Error::Config(format!(
            "heldout_fraction must lie in (0, 1), got {heldout_fraction}"
        )));
    }
    let sample_rate = common_rate(waves)?;
    let mut by_class: BTreeMap<u32, Vec<&Waveform>> = BTreeMap::new();
    for w in waves {
        by_class.entry(w.label).or_default().push(w);
    }
    if by_class.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "training needs at least 2 classes, found {}",
            by_class.len()
        )));
    }
    let class_ids: Vec<u32> = by_class.keys().copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x4845_4c44_4f55_5421);
    let mut train = Examples::new(framing.chunk);
    let mut heldout = Examples::new(framing.chunk);
    for (idx, (class, mut utts)) in by_class.into_iter().enumerate() {
        if utts.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "class {class} has {} training utterance(s); a held-out split needs at least 2",
                utts.len()
            )));
        }
        utts.sort_by(|a, b| a.utterance_id.cmp(&b.utterance_id));
        utts.shuffle(&mut rng);
        let k = ((utts.len() as f64 * heldout_fraction).round() as usize).clamp(1, utts.len() - 1);
        for (i, w) in utts.iter().enumerate() {
            let target = if i < k { &mut heldout } else { &mut train };
            target.push_utterance(w, idx, framing);
        }
    }
    if train.is_empty() || heldout.is_empty() {
        return Err(Error::InvalidInput(format!(
            "framing left {} training and {} held-out chunks",
            train.len(),
            heldout.len()
        )));
    }
    Ok(Dataset {
        class_ids,
        sample_rate,
        framing,
        train,
        heldout,
    })
}

pub(crate) fn utterance_chunks(w: &Waveform, framing: Framing) -> Result<Vec<Vec<f64>>> {
    Ok(frame_signal(w, framing).chunks.into_iter().map(|c| c.samples).collect())
}

pub(crate) fn chunk_batch(chunks: &[Vec<f64>], chunk: usize) -> Result<Tensor> {
    let mut data = Vec::with_capacity(chunks.len() * chunk);
    for c in chunks {
        if c.len() != chunk {
            return Err(Error::Shape(format!("chunk of {} samples, expected {chunk}", c.len())));
        }
        data.extend_from_slice(c);
    }
    Tensor::new(vec![chunks.len(), 1, chunk], data)
}

//! Waveforms, framing into fixed-length chunks, and the synthetic corpus.

mod manifest;
mod noise;
mod synth;
mod wav;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use manifest::{load_manifest, load_split, write_corpus, ManifestEntry, Split};
pub use noise::{corrupt_band, BandNoise, CORRUPTION_FILTER_LENGTH};
pub use synth::{
    peak_normalize, synth_class_corpus, ClassSignature, Corpus, CorpusSpec, NoiseBand, Resonance,
};
pub use wav::{encode_wav, parse_wav, read_wav, write_wav};

#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
    pub label: u32,
    pub utterance_id: String,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: f64, label: u32, utterance_id: impl Into<String>) -> Result<Self> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::InvalidInput(format!("sample rate must be positive, got {sample_rate}")));
        }
        if samples.is_empty() {
            return Err(Error::InvalidInput("waveform has no samples".into()));
        }
        Ok(Self {
            samples,
            sample_rate,
            label,
            utterance_id: utterance_id.into(),
        })
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    pub fn power(&self) -> f64 {
        mean_power(&self.samples)
    }
}

pub(crate) fn mean_power(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// Chunk length and hop in samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Framing {
    pub chunk: usize,
    pub hop: usize,
}

impl Framing {
    /// `chunk_ms` windows sharing `overlap_ms` of samples with their neighbour.
    pub fn from_ms(sample_rate: f64, chunk_ms: f64, overlap_ms: f64) -> Result<Self> {
        let chunk = (chunk_ms * 1e-3 * sample_rate).round() as usize;
        let overlap = (overlap_ms * 1e-3 * sample_rate).round() as usize;
        if overlap >= chunk {
            return Err(Error::InvalidParameter(format!(
                "overlap of {overlap} samples leaves no hop for {chunk}-sample chunks"
            )));
        }
        Self::new(chunk, chunk - overlap)
    }

    /// 200 ms chunks with 10 ms of overlap.
    pub fn for_rate(sample_rate: f64) -> Result<Self> {
        Self::from_ms(sample_rate, 200.0, 10.0)
    }

    pub fn new(chunk: usize, hop: usize) -> Result<Self> {
        if chunk == 0 || hop == 0 {
            return Err(Error::InvalidParameter(format!(
                "chunk ({chunk}) and hop ({hop}) must both be positive"
            )));
        }
        Ok(Self { chunk, hop })
    }

    pub fn with_hop(self, hop: usize) -> Result<Self> {
        Self::new(self.chunk, hop)
    }

    /// Number of whole chunks in a signal of `len` samples.
    pub fn count(&self, len: usize) -> usize {
        if len < self.chunk {
            0
        } else {
            (len - self.chunk) / self.hop + 1
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chunk {
    pub samples: Vec<f64>,
    pub utterance_id: String,
    pub label: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChunkStream {
    pub framing: Framing,
    pub chunks: Vec<Chunk>,
}

impl ChunkStream {
    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }
}

/// Cuts a waveform into chunks starting at `0, hop, 2 hop, ...`; a trailing
/// partial window is dropped. Utterances shorter than one chunk yield
/// nothing and log a warning.
pub fn frame_signal(w: &Waveform, framing: Framing) -> ChunkStream {
    let n = framing.count(w.samples.len());
    if n == 0 {
        log::warn!(
            "skipping {}: {} samples is shorter than one {}-sample chunk",
            w.utterance_id,
            w.samples.len(),
            framing.chunk
        );
    }
    let chunks = (0..n)
        .map(|i| Chunk {
            samples: w.samples[i * framing.hop..i * framing.hop + framing.chunk].to_vec(),
            utterance_id: w.utterance_id.clone(),
            label: w.label,
        })
        .collect();
    ChunkStream { framing, chunks }
}

pub fn frame_all<'a>(waves: impl IntoIterator<Item = &'a Waveform>, framing: Framing) -> ChunkStream {
    let mut chunks = Vec::new();
    for w in waves {
        chunks.extend(frame_signal(w, framing).chunks);
    }
    ChunkStream { framing, chunks }
}

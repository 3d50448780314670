//! Synthetic "speaker" corpus: a harmonic source at a class fundamental,
//! shaped by class resonances, over a white noise floor.

use std::f64::consts::TAU;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::noise::corrupt_band;
use super::{mean_power, Waveform};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Resonance {
    pub center_hz: f64,
    pub bandwidth_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassSignature {
    pub f0_hz: f64,
    pub resonances: Vec<Resonance>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseBand {
    pub lo_hz: f64,
    pub hi_hz: f64,
    pub snr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusSpec {
    pub sample_rate: f64,
    /// Class count when `classes` is empty; otherwise it must agree with it.
    pub n_classes: Option<usize>,
    /// Explicit signatures. When empty, signatures are drawn from the ranges
    /// below, stratified so classes spread over each range.
    pub classes: Vec<ClassSignature>,
    pub f0_range_hz: [f64; 2],
    pub resonances_per_class: usize,
    pub resonance_range_hz: [f64; 2],
    pub bandwidth_range_hz: [f64; 2],
    /// Peak gain of each resonance over the 1/k source tilt.
    pub resonance_gain: f64,
    pub train_utterances: usize,
    /// Total training seconds per class, drawn uniformly.
    pub train_total_s: [f64; 2],
    pub test_utterances: usize,
    pub test_duration_s: [f64; 2],
    /// Relative per-utterance jitter of the fundamental.
    pub f0_jitter: f64,
    /// Relative per-utterance jitter of each resonance center.
    pub resonance_jitter: f64,
    /// Hop of the overlapping Hann-windowed segments an utterance is built
    /// from when either segment jitter is nonzero.
    pub segment_s: f64,
    /// Relative per-segment jitter of the fundamental, on top of the
    /// utterance value.
    pub segment_f0_jitter: f64,
    /// Relative per-segment jitter of each resonance center.
    pub segment_resonance_jitter: f64,
    pub noise_floor_db: f64,
    pub noise_band: Option<NoiseBand>,
    pub peak: f64,
    /// Class ids run from `class_id_offset` upwards.
    pub class_id_offset: u32,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            sample_rate: 16000.0,
            n_classes: None,
            classes: Vec::new(),
            f0_range_hz: [100.0, 250.0],
            resonances_per_class: 3,
            resonance_range_hz: [300.0, 3400.0],
            bandwidth_range_hz: [80.0, 200.0],
            resonance_gain: 4.0,
            train_utterances: 5,
            train_total_s: [12.0, 15.0],
            test_utterances: 2,
            test_duration_s: [2.0, 6.0],
            f0_jitter: 0.03,
            resonance_jitter: 0.0,
            segment_s: 0.15,
            segment_f0_jitter: 0.0,
            segment_resonance_jitter: 0.0,
            noise_floor_db: -30.0,
            noise_band: None,
            peak: 0.95,
            class_id_offset: 0,
            seed: 0,
        }
    }
}

const DEFAULT_CLASSES: usize = 10;
/// Chunk length every utterance must exceed.
const MIN_DURATION_S: f64 = 0.2;
/// Training utterance lengths vary by this factor around an even split.
const SPLIT_SPREAD: f64 = 0.3;

fn check_range(name: &str, r: [f64; 2], min: f64, max: f64) -> Result<()> {
    if !(r[0].is_finite() && r[1].is_finite() && r[0] <= r[1] && r[0] >= min && r[1] < max) {
        return Err(Error::InvalidSpec(format!(
            "{name} = [{}, {}] must be ordered and lie in [{min}, {max})",
            r[0], r[1]
        )));
    }
    Ok(())
}

impl CorpusSpec {
    pub fn class_count(&self) -> usize {
        if self.classes.is_empty() {
            self.n_classes.unwrap_or(DEFAULT_CLASSES)
        } else {
            self.classes.len()
        }
    }

    pub fn class_ids(&self) -> Vec<u32> {
        (0..self.class_count() as u32).map(|i| self.class_id_offset + i).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let fs = self.sample_rate;
        let nyq = fs / 2.0;
        if !(fs > 0.0 && fs.is_finite()) {
            return Err(Error::InvalidSpec(format!("sample_rate = {fs} must be positive")));
        }
        if let Some(n) = self.n_classes {
            if !self.classes.is_empty() && n != self.classes.len() {
                return Err(Error::InvalidSpec(format!(
                    "n_classes = {n} but {} class signatures are given",
                    self.classes.len()
                )));
            }
        }
        if self.class_count() == 0 {
            return Err(Error::InvalidSpec("n_classes must be at least 1".into()));
        }
        if self
            .class_id_offset
            .checked_add(self.class_count() as u32)
            .is_none()
        {
            return Err(Error::InvalidSpec("class_id_offset overflows the id range".into()));
        }
        for (i, c) in self.classes.iter().enumerate() {
            if !(c.f0_hz > 0.0 && c.f0_hz < nyq) {
                return Err(Error::InvalidSpec(format!(
                    "classes[{i}].f0_hz = {} must lie in (0, {nyq})",
                    c.f0_hz
                )));
            }
            for (j, r) in c.resonances.iter().enumerate() {
                if !(r.center_hz > 0.0 && r.center_hz < nyq) {
                    return Err(Error::InvalidSpec(format!(
                        "classes[{i}].resonances[{j}].center_hz = {} must lie below fs/2 = {nyq}",
                        r.center_hz
                    )));
                }
                if !(r.bandwidth_hz > 0.0 && r.bandwidth_hz.is_finite()) {
                    return Err(Error::InvalidSpec(format!(
                        "classes[{i}].resonances[{j}].bandwidth_hz = {} must be positive",
                        r.bandwidth_hz
                    )));
                }
            }
        }
        if self.classes.is_empty() {
            check_range("f0_range_hz", self.f0_range_hz, f64::MIN_POSITIVE, nyq)?;
            check_range("resonance_range_hz", self.resonance_range_hz, f64::MIN_POSITIVE, nyq)?;
            check_range("bandwidth_range_hz", self.bandwidth_range_hz, f64::MIN_POSITIVE, f64::INFINITY)?;
        }
        for (name, v) in [
            ("f0_jitter", self.f0_jitter),
            ("resonance_jitter", self.resonance_jitter),
            ("segment_f0_jitter", self.segment_f0_jitter),
            ("segment_resonance_jitter", self.segment_resonance_jitter),
        ] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::InvalidSpec(format!("{name} = {v} must lie in [0, 1)")));
            }
        }
        if self.segmented() && !(self.segment_s * self.sample_rate >= 1.0 && self.segment_s.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "segment_s = {} must span at least one sample",
                self.segment_s
            )));
        }
        if !(self.resonance_gain >= 0.0 && self.resonance_gain.is_finite()) {
            return Err(Error::InvalidSpec("resonance_gain must be non-negative".into()));
        }
        if self.train_utterances == 0 {
            return Err(Error::InvalidSpec("train_utterances must be at least 1".into()));
        }
        check_range("train_total_s", self.train_total_s, 0.0, f64::INFINITY)?;
        check_range("test_duration_s", self.test_duration_s, 0.0, f64::INFINITY)?;
        let shortest_train =
            self.train_total_s[0] / self.train_utterances as f64 * (1.0 - SPLIT_SPREAD) / (1.0 + SPLIT_SPREAD);
        if shortest_train <= MIN_DURATION_S {
            return Err(Error::InvalidSpec(format!(
                "train_total_s = {} over {} utterances can yield utterances of {shortest_train:.3} s, \
                 not longer than one {MIN_DURATION_S} s chunk",
                self.train_total_s[0], self.train_utterances
            )));
        }
        if self.test_utterances > 0 && self.test_duration_s[0] <= MIN_DURATION_S {
            return Err(Error::InvalidSpec(format!(
                "test_duration_s lower bound {} must exceed the {MIN_DURATION_S} s chunk",
                self.test_duration_s[0]
            )));
        }
        if !self.noise_floor_db.is_finite() {
            return Err(Error::InvalidSpec("noise_floor_db must be finite".into()));
        }
        if !(self.peak > 0.0 && self.peak <= 1.0) {
            return Err(Error::InvalidSpec(format!("peak = {} must lie in (0, 1]", self.peak)));
        }
        if let Some(b) = self.noise_band {
            if !(0.0 <= b.lo_hz && b.lo_hz < b.hi_hz && b.hi_hz <= nyq) {
                return Err(Error::InvalidSpec(format!(
                    "noise_band = [{}, {}] Hz must satisfy 0 <= lo < hi <= {nyq}",
                    b.lo_hz, b.hi_hz
                )));
            }
            if !b.snr_db.is_finite() {
                return Err(Error::InvalidSpec("noise_band.snr_db must be finite".into()));
            }
        }
        Ok(())
    }

    fn segmented(&self) -> bool {
        self.segment_f0_jitter > 0.0 || self.segment_resonance_jitter > 0.0
    }

    /// Class signatures, drawing them when none are given explicitly.
    pub fn signatures(&self) -> Vec<ClassSignature> {
        if !self.classes.is_empty() {
            return self.classes.clone();
        }
        let n = self.class_count();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, u64::MAX, 0, 0));
        let stratified = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| -> Vec<f64> {
            let mut slots: Vec<usize> = (0..n).collect();
            slots.shuffle(rng);
            slots
                .into_iter()
                .map(|s| lo + (hi - lo) * (s as f64 + rng.gen::<f64>()) / n as f64)
                .collect()
        };
        let [f0_lo, f0_hi] = self.f0_range_hz;
        let f0s = stratified(&mut rng, f0_lo, f0_hi);
        // Resonance r of every class lives in the r-th sub-band of the range.
        let k = self.resonances_per_class;
        let [r_lo, r_hi] = self.resonance_range_hz;
        let width = (r_hi - r_lo) / k.max(1) as f64;
        let centers: Vec<Vec<f64>> = (0..k)
            .map(|r| stratified(&mut rng, r_lo + r as f64 * width, r_lo + (r + 1) as f64 * width))
            .collect();
        let [b_lo, b_hi] = self.bandwidth_range_hz;
        (0..n)
            .map(|c| ClassSignature {
                f0_hz: f0s[c],
                resonances: (0..k)
                    .map(|r| Resonance {
                        center_hz: centers[r][c],
                        bandwidth_hz: b_lo + (b_hi - b_lo) * rng.gen::<f64>(),
                    })
                    .collect(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub train: Vec<Waveform>,
    pub test: Vec<Waveform>,
    pub signatures: Vec<ClassSignature>,
}

/// SplitMix64 finalizer over the inputs, so every utterance gets an
/// independent stream.
fn derive_seed(seed: u64, class: u64, split: u64, index: u64) -> u64 {
    let mut z = seed;
    for v in [class, split, index] {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(v);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

fn lorentz(f: f64, r: &Resonance) -> f64 {
    let d = (f - r.center_hz) / (0.5 * r.bandwidth_hz);
    1.0 / (1.0 + d * d)
}

/// Scales `x` so that its largest magnitude equals `peak`. Silent input is
/// returned unchanged.
pub fn peak_normalize(x: &mut [f64], peak: f64) {
    let m = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if m > 0.0 {
        let g = peak / m;
        x.iter_mut().for_each(|v| *v *= g);
    }
}

fn jittered(sig: &ClassSignature, f0_jitter: f64, res_jitter: f64, rng: &mut ChaCha8Rng) -> ClassSignature {
    ClassSignature {
        f0_hz: sig.f0_hz * (1.0 + f0_jitter * rng.gen_range(-1.0..=1.0)),
        resonances: sig
            .resonances
            .iter()
            .map(|r| Resonance {
                center_hz: r.center_hz * (1.0 + res_jitter * rng.gen_range(-1.0..=1.0)),
                bandwidth_hz: r.bandwidth_hz,
            })
            .collect(),
    }
}

/// Adds the harmonic series of `sig` to `x[start..]`, optionally weighted
/// by `window` (whose length then bounds the span).
fn add_harmonics(
    x: &mut [f64],
    start: usize,
    window: Option<&[f64]>,
    offset: usize,
    sig: &ClassSignature,
    spec: &CorpusSpec,
    rng: &mut ChaCha8Rng,
) {
    let fs = spec.sample_rate;
    let f0 = sig.f0_hz;
    let end = window.map_or(x.len(), |w| (start + w.len() - offset).min(x.len()));
    let span = &mut x[start..end];
    let mut k = 1;
    while (k as f64) * f0 < fs / 2.0 {
        let f = k as f64 * f0;
        let env: f64 = sig.resonances.iter().map(|r| lorentz(f, r)).sum();
        let amp = (1.0 + spec.resonance_gain * env) / k as f64;
        let phase = TAU * rng.gen::<f64>();
        // Rotating phasor; drift over a few hundred thousand steps is ~1e-11.
        let (ds, dc) = (TAU * f / fs).sin_cos();
        let (mut s, mut c) = phase.sin_cos();
        for (n, v) in span.iter_mut().enumerate() {
            let g = window.map_or(1.0, |w| w[n + offset]);
            *v += g * amp * s;
            let s_next = s * dc + c * ds;
            c = c * dc - s * ds;
            s = s_next;
        }
        k += 1;
    }
}

fn render(spec: &CorpusSpec, sig: &ClassSignature, n_samples: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let utt = jittered(sig, spec.f0_jitter, spec.resonance_jitter, rng);
    let mut x = vec![0.0; n_samples];
    if spec.segmented() {
        // Periodic Hann frames of twice the hop sum to one everywhere.
        let hop = (spec.segment_s * spec.sample_rate).round() as usize;
        let len = 2 * hop;
        let window: Vec<f64> = (0..len)
            .map(|n| 0.5 - 0.5 * (TAU * n as f64 / len as f64).cos())
            .collect();
        let mut m = 0;
        while m * hop < n_samples + hop {
            let seg = jittered(&utt, spec.segment_f0_jitter, spec.segment_resonance_jitter, rng);
            // Frame m covers [(m - 1) hop, (m + 1) hop).
            let (start, offset) = if m == 0 { (0, hop) } else { ((m - 1) * hop, 0) };
            add_harmonics(&mut x, start, Some(&window), offset, &seg, spec, rng);
            m += 1;
        }
    } else {
        add_harmonics(&mut x, 0, None, 0, &utt, spec, rng);
    }
    let floor_std = (mean_power(&x) * 10f64.powf(spec.noise_floor_db / 10.0)).sqrt();
    for v in x.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *v += floor_std * z;
    }
    x
}

fn utterance(
    spec: &CorpusSpec,
    sig: &ClassSignature,
    class_id: u32,
    split: &str,
    index: usize,
    duration_s: f64,
) -> Result<Waveform> {
    let split_code = if split == "train" { 0 } else { 1 };
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, class_id as u64, split_code, index as u64));
    let n = (duration_s * spec.sample_rate).round() as usize;
    let mut samples = render(spec, sig, n, &mut rng);
    peak_normalize(&mut samples, spec.peak);
    let mut w = Waveform::new(samples, spec.sample_rate, class_id, format!("c{class_id:03}_{split}_{index:02}"))?;
    if let Some(b) = spec.noise_band {
        let mut noisy = corrupt_band(&w, b.lo_hz, b.hi_hz, b.snr_db, &mut rng)?.waveform;
        peak_normalize(&mut noisy.samples, spec.peak);
        w = noisy;
    }
    Ok(w)
}

/// Generates the train and test sets. A pure function of the corpus settings.
pub fn synth_class_corpus(spec: &CorpusSpec) -> Result<Corpus> {
    spec.validate()?;
    let signatures = spec.signatures();
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (c, sig) in signatures.iter().enumerate() {
        let class_id = spec.class_id_offset + c as u32;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, class_id as u64, 2, 0));
        let [lo, hi] = spec.train_total_s;
        let total = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
        let weights: Vec<f64> = (0..spec.train_utterances)
            .map(|_| 1.0 + SPLIT_SPREAD * rng.gen_range(-1.0..=1.0))
            .collect();
        let wsum: f64 = weights.iter().sum();
        for (i, w) in weights.iter().enumerate() {
            train.push(utterance(spec, sig, class_id, "train", i, total * w / wsum)?);
        }
        let [lo, hi] = spec.test_duration_s;
        for i in 0..spec.test_utterances {
            let d = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
            test.push(utterance(spec, sig, class_id, "test", i, d)?);
        }
    }
    Ok(Corpus {
        train,
        test,
        signatures,
    })
}

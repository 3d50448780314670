use rand::Rng;
use rand_distr::StandardNormal;

use super::{mean_power, Waveform};
use crate::error::{Error, Result};
use crate::filter::{constrain_cutoffs, FilterBank, FilterSpec, RawCutoffs, WindowKind};

pub const CORRUPTION_FILTER_LENGTH: usize = 501;

#[derive(Debug, Clone, PartialEq)]
pub struct BandNoise {
    /// Input plus `noise`.
    pub waveform: Waveform,
    /// The scaled band-limited noise that was added.
    pub noise: Vec<f64>,
}

/// Adds white noise passed through a Hamming-windowed sinc band-pass on
/// `[lo_hz, hi_hz]`, scaled so the signal-to-added-noise power ratio is
/// `snr_db`. The result is not clipped.
pub fn corrupt_band<R: Rng>(w: &Waveform, lo_hz: f64, hi_hz: f64, snr_db: f64, rng: &mut R) -> Result<BandNoise> {
    let fs = w.sample_rate;
    if !(0.0 <= lo_hz && lo_hz < hi_hz && hi_hz <= fs / 2.0) {
        return Err(Error::InvalidSpec(format!(
            "noise band [{lo_hz}, {hi_hz}] Hz must satisfy 0 <= lo < hi <= {}",
            fs / 2.0
        )));
    }
    if !snr_db.is_finite() {
        return Err(Error::InvalidSpec(format!("snr_db = {snr_db} must be finite")));
    }
    let signal_power = w.power();
    if signal_power == 0.0 {
        return Err(Error::InvalidInput(format!(
            "{}: cannot set an SNR against a silent signal",
            w.utterance_id
        )));
    }
    let spec = FilterSpec::new(CORRUPTION_FILTER_LENGTH, WindowKind::Hamming, fs)?;
    let cutoffs = constrain_cutoffs(RawCutoffs::new(lo_hz / fs, hi_hz / fs))?;
    let bank = FilterBank::from_cutoffs(&spec, &[cutoffs])?;
    let h = bank.row(0);

    let n = w.samples.len();
    let white: Vec<f64> = (0..n + h.len() - 1).map(|_| rng.sample(StandardNormal)).collect();
    let mut noise: Vec<f64> = (0..n)
        .map(|i| h.iter().zip(&white[i..]).map(|(a, b)| a * b).sum())
        .collect();
    let target = signal_power / 10f64.powf(snr_db / 10.0);
    let raw = mean_power(&noise);
    let gain = if raw > 0.0 { (target / raw).sqrt() } else { 0.0 };
    noise.iter_mut().for_each(|v| *v *= gain);

    let samples = w.samples.iter().zip(&noise).map(|(s, v)| s + v).collect();
    Ok(BandNoise {
        waveform: Waveform {
            samples,
            ..w.clone()
        },
        noise,
    })
}

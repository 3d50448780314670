use super::RawCutoffs;
use crate::error::{Error, Result};

/// Lowest band edge used by the mel initializer.
pub const MEL_INIT_LOW_HZ: f64 = 30.0;
/// Distance kept between the highest band edge and Nyquist.
pub const MEL_INIT_HIGH_GUARD_HZ: f64 = 100.0;

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// `n_filters + 1` edges in Hz, equally spaced in mel between
/// [`MEL_INIT_LOW_HZ`] and `fs / 2 - MEL_INIT_HIGH_GUARD_HZ`.
pub fn mel_band_edges_hz(n_filters: usize, sample_rate: f64) -> Result<Vec<f64>> {
    if n_filters == 0 {
        return Err(Error::InvalidSpec("need at least one filter".into()));
    }
    if !(sample_rate > 0.0 && sample_rate.is_finite()) {
        return Err(Error::InvalidSpec(format!(
            "sample rate must be positive, got {sample_rate}"
        )));
    }
    let high = sample_rate / 2.0 - MEL_INIT_HIGH_GUARD_HZ;
    if high <= MEL_INIT_LOW_HZ {
        return Err(Error::InvalidSpec(format!(
            "sample rate {sample_rate} Hz leaves no room for mel bands above {MEL_INIT_LOW_HZ} Hz"
        )));
    }
    let (mel_lo, mel_hi) = (hz_to_mel(MEL_INIT_LOW_HZ), hz_to_mel(high));
    let step = (mel_hi - mel_lo) / n_filters as f64;
    let mut edges: Vec<f64> = (0..=n_filters)
        .map(|i| mel_to_hz(mel_lo + step * i as f64))
        .collect();
    // Pin the ends so that the round trip through mel does not move them.
    edges[0] = MEL_INIT_LOW_HZ;
    edges[n_filters] = high;
    if edges.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidSpec(format!(
            "{} mel edges are not distinct at {sample_rate} Hz",
            n_filters + 1
        )));
    }
    Ok(edges)
}

/// Mel-spaced band-pass cutoffs, normalized by the sample rate.
pub fn mel_init_cutoffs(n_filters: usize, sample_rate: f64) -> Result<Vec<RawCutoffs>> {
    let edges = mel_band_edges_hz(n_filters, sample_rate)?;
    Ok(edges
        .windows(2)
        .map(|w| RawCutoffs::new(w[0] / sample_rate, w[1] / sample_rate))
        .collect())
}

//! Band-pass filter construction from cutoff frequencies.
//!
//! Every frequency handled here is normalized by the sample rate, i.e. expressed
//! in cycles/sample with the representable band being `[0, 0.5]`. Hertz only
//! appears at initialization and export boundaries.

mod export;
mod mel;
mod response;
mod window;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use export::{FilterExport, FilterRecord};
pub use mel::{hz_to_mel, mel_band_edges_hz, mel_init_cutoffs, mel_to_hz, MEL_INIT_HIGH_GUARD_HZ, MEL_INIT_LOW_HZ};
pub use response::{
    complex_response, cumulative_frequency_response, frequency_grid, frequency_response,
    CumulativeResponse,
};
pub use window::{hamming_window, make_window, rectangular_window, windowed_filter, WindowKind};

/// Unconstrained learnable cutoffs of one filter.
///
/// Values may be negative or out of order; [`constrain_cutoffs`] maps any
/// finite pair onto a valid band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawCutoffs {
    pub f1: f64,
    pub f2: f64,
}

impl RawCutoffs {
    pub fn new(f1: f64, f2: f64) -> Self {
        Self { f1, f2 }
    }
}

/// Cutoffs guaranteed to satisfy `0 <= f1_abs <= f2_abs`.
///
/// There is no upper clamp: `f2_abs` may exceed Nyquist (0.5).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstrainedCutoffs {
    f1_abs: f64,
    f2_abs: f64,
}

impl ConstrainedCutoffs {
    pub fn f1_abs(&self) -> f64 {
        self.f1_abs
    }

    pub fn f2_abs(&self) -> f64 {
        self.f2_abs
    }

    /// Band edges in Hz for a given sample rate.
    pub fn to_hz(&self, sample_rate: f64) -> (f64, f64) {
        (self.f1_abs * sample_rate, self.f2_abs * sample_rate)
    }

    pub fn as_raw(&self) -> RawCutoffs {
        RawCutoffs::new(self.f1_abs, self.f2_abs)
    }
}

/// `f1_abs = |f1|`, `f2_abs = f1_abs + |f2 - f1_abs|`.
pub fn constrain_cutoffs(raw: RawCutoffs) -> Result<ConstrainedCutoffs> {
    if !raw.f1.is_finite() || !raw.f2.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "cutoffs must be finite, got ({}, {})",
            raw.f1, raw.f2
        )));
    }
    let f1_abs = raw.f1.abs();
    let f2_abs = f1_abs + (raw.f2 - f1_abs).abs();
    Ok(ConstrainedCutoffs { f1_abs, f2_abs })
}

/// Shape of one first-layer filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub length: usize,
    pub window: WindowKind,
    pub sample_rate: f64,
}

impl FilterSpec {
    pub fn new(length: usize, window: WindowKind, sample_rate: f64) -> Result<Self> {
        let spec = Self {
            length,
            window,
            sample_rate,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        check_odd_length(self.length)?;
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "sample rate must be positive, got {}",
                self.sample_rate
            )));
        }
        Ok(())
    }

    /// Index of the symmetry center, `(L - 1) / 2`.
    pub fn center(&self) -> usize {
        (self.length - 1) / 2
    }
}

pub(crate) fn check_odd_length(length: usize) -> Result<()> {
    if length == 0 || length % 2 == 0 {
        return Err(Error::InvalidSpec(format!(
            "filter length must be odd and positive, got {length}"
        )));
    }
    Ok(())
}

/// `sin(x) / x` with `sinc(0) = 1`.
#[inline]
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.sin() / x
    }
}

/// Unwindowed band-pass taps as the difference of two ideal low-pass sincs.
///
/// Output is indexed `0..L` with the center at `(L - 1) / 2`. Only the right
/// half is evaluated; the left half is mirrored from it, so the result is
/// symmetric bit for bit.
pub fn bandpass_impulse_response(cutoffs: ConstrainedCutoffs, length: usize) -> Result<Vec<f64>> {
    check_odd_length(length)?;
    let center = (length - 1) / 2;
    let two_pi = 2.0 * std::f64::consts::PI;
    let (f1, f2) = (cutoffs.f1_abs, cutoffs.f2_abs);
    let mut taps = vec![0.0; length];
    for k in 0..=center {
        let n = k as f64;
        let value = 2.0 * f2 * sinc(two_pi * f2 * n) - 2.0 * f1 * sinc(two_pi * f1 * n);
        taps[center + k] = value;
        taps[center - k] = value;
    }
    Ok(taps)
}

/// A bank of `F` filters of `L` taps each, stored row-major.
///
/// Banks built from cutoffs remember them; banks wrapping freely learned taps
/// have no cutoffs.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    length: usize,
    taps: Vec<f64>,
    cutoffs: Vec<ConstrainedCutoffs>,
}

impl FilterBank {
    /// Windowed band-pass bank, one row per cutoff pair.
    pub fn from_cutoffs(spec: &FilterSpec, cutoffs: &[ConstrainedCutoffs]) -> Result<Self> {
        spec.validate()?;
        let window = make_window(spec.window, spec.length)?;
        let mut taps = Vec::with_capacity(cutoffs.len() * spec.length);
        for &c in cutoffs {
            let g = bandpass_impulse_response(c, spec.length)?;
            taps.extend(windowed_filter(&g, &window)?);
        }
        Ok(Self {
            length: spec.length,
            taps,
            cutoffs: cutoffs.to_vec(),
        })
    }

    /// Wraps arbitrary taps (e.g. a learned convolution kernel).
    pub fn from_taps(length: usize, taps: Vec<f64>) -> Result<Self> {
        if length == 0 || taps.len() % length != 0 {
            return Err(Error::Shape(format!(
                "{} taps do not split into rows of {length}",
                taps.len()
            )));
        }
        Ok(Self {
            length,
            taps,
            cutoffs: Vec::new(),
        })
    }

    pub fn num_filters(&self) -> usize {
        self.taps.len() / self.length
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.taps[i * self.length..(i + 1) * self.length]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.taps.chunks_exact(self.length)
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn cutoffs(&self) -> &[ConstrainedCutoffs] {
        &self.cutoffs
    }
}

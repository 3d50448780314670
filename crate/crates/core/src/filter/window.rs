use serde::{Deserialize, Serialize};

use super::check_odd_length;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    Hamming,
    Rectangular,
}

/// Symmetric Hamming window, `0.54 - 0.46 cos(2 pi n / (L - 1))`.
///
/// The left half is mirrored from the right so that `w[n] == w[L - 1 - n]`.
pub fn hamming_window(length: usize) -> Result<Vec<f64>> {
    if length < 3 {
        return Err(Error::InvalidSpec(format!(
            "Hamming window needs at least 3 taps, got {length}"
        )));
    }
    check_odd_length(length)?;
    let denom = (length - 1) as f64;
    let center = (length - 1) / 2;
    let mut w = vec![0.0; length];
    for n in center..length {
        let v = 0.54 - 0.46 * (2.0 * std::f64::consts::PI * n as f64 / denom).cos();
        w[n] = v;
        w[length - 1 - n] = v;
    }
    Ok(w)
}

pub fn rectangular_window(length: usize) -> Result<Vec<f64>> {
    check_odd_length(length)?;
    Ok(vec![1.0; length])
}

pub fn make_window(kind: WindowKind, length: usize) -> Result<Vec<f64>> {
    match kind {
        WindowKind::Hamming => hamming_window(length),
        WindowKind::Rectangular => rectangular_window(length),
    }
}

/// Elementwise product of taps and window.
pub fn windowed_filter(taps: &[f64], window: &[f64]) -> Result<Vec<f64>> {
    if taps.len() != window.len() {
        return Err(Error::InvalidSpec(format!(
            "filter has {} taps but window has {}",
            taps.len(),
            window.len()
        )));
    }
    Ok(taps.iter().zip(window).map(|(g, w)| g * w).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hamming_endpoints_and_center() {
        let w = hamming_window(251).unwrap();
        assert!((w[0] - 0.08).abs() < 1e-15);
        assert_eq!(w[125], 1.0);
        assert!((w[250] - 0.08).abs() < 1e-15);
    }

    #[test]
    fn hamming_is_bitwise_symmetric() {
        for length in [3, 5, 31, 129, 251, 501] {
            let w = hamming_window(length).unwrap();
            for n in 0..length {
                assert_eq!(w[n].to_bits(), w[length - 1 - n].to_bits());
            }
        }
    }

    #[test]
    fn hamming_rejects_short_and_even() {
        assert!(hamming_window(1).is_err());
        assert!(hamming_window(2).is_err());
        assert!(hamming_window(250).is_err());
    }

    #[test]
    fn windowing_identities() {
        let g: Vec<f64> = (0..7).map(|i| (i as f64 - 3.0).powi(2) * 0.1).collect();
        let rect = rectangular_window(7).unwrap();
        assert_eq!(windowed_filter(&g, &rect).unwrap(), g);
        let zero = vec![0.0; 7];
        let w = hamming_window(7).unwrap();
        assert!(windowed_filter(&zero, &w).unwrap().iter().all(|&v| v == 0.0));
        let gw = windowed_filter(&g, &w).unwrap();
        for k in 0..=3 {
            assert_eq!(gw[3 + k].to_bits(), gw[3 - k].to_bits());
        }
        assert_eq!(
            windowed_filter(&g, &w[..5]).unwrap_err().kind(),
            "invalid-spec"
        );
    }
}

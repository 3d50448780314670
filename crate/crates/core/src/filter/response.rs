use std::f64::consts::PI;

use super::FilterBank;
use crate::error::{Error, Result};

/// `n_points` frequencies spread uniformly over `[0, 0.5]` cycles/sample.
pub fn frequency_grid(n_points: usize) -> Vec<f64> {
    match n_points {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => {
            let step = 0.5 / (n_points - 1) as f64;
            (0..n_points).map(|k| k as f64 * step).collect()
        }
    }
}

fn check_points(len: usize, n_points: usize) -> Result<()> {
    if len == 0 {
        return Err(Error::InvalidSpec("empty filter".into()));
    }
    if n_points < 2 || n_points < len {
        return Err(Error::InvalidSpec(format!(
            "need at least max(2, L) = {} response points, got {n_points}",
            len.max(2)
        )));
    }
    Ok(())
}

/// DTFT `sum_n h[n] exp(-j 2 pi f n)` on [`frequency_grid`], as `(re, im)` pairs.
pub fn complex_response(h: &[f64], n_points: usize) -> Result<Vec<(f64, f64)>> {
    check_points(h.len(), n_points)?;
    Ok(frequency_grid(n_points)
        .into_iter()
        .map(|f| {
            let omega = 2.0 * PI * f;
            h.iter().enumerate().fold((0.0, 0.0), |(re, im), (n, &v)| {
                let phase = omega * n as f64;
                (re + v * phase.cos(), im - v * phase.sin())
            })
        })
        .collect())
}

/// Magnitude of the DTFT of `h`, sampled by direct evaluation.
pub fn frequency_response(h: &[f64], n_points: usize) -> Result<Vec<f64>> {
    Ok(complex_response(h, n_points)?
        .into_iter()
        .map(|(re, im)| re.hypot(im))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeResponse {
    /// Sum of the per-filter magnitude responses.
    pub raw: Vec<f64>,
    /// `raw` scaled so its maximum is 1 (all zeros if `raw` is).
    pub normalized: Vec<f64>,
}

/// Sum of magnitude responses over every filter of the bank.
pub fn cumulative_frequency_response(bank: &FilterBank, n_points: usize) -> Result<CumulativeResponse> {
    if bank.is_empty() {
        return Err(Error::InvalidSpec("empty filter bank".into()));
    }
    let mut raw = vec![0.0; n_points];
    for row in bank.rows() {
        for (acc, m) in raw.iter_mut().zip(frequency_response(row, n_points)?) {
            *acc += m;
        }
    }
    let peak = raw.iter().cloned().fold(0.0, f64::max);
    let normalized = if peak > 0.0 {
        raw.iter().map(|v| v / peak).collect()
    } else {
        raw.clone()
    };
    Ok(CumulativeResponse { raw, normalized })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::{constrain_cutoffs, FilterSpec, RawCutoffs, WindowKind};

    #[test]
    fn impulse_is_flat_and_zero_is_zero() {
        let mut h = vec![0.0; 9];
        h[4] = 1.0;
        let m = frequency_response(&h, 64).unwrap();
        assert!(m.iter().all(|v| (v - 1.0).abs() < 1e-12));
        let z = frequency_response(&[0.0; 9], 64).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn too_few_points_rejected() {
        assert!(frequency_response(&[1.0; 9], 8).is_err());
        assert!(frequency_response(&[], 8).is_err());
    }

    #[test]
    fn cumulative_is_sum_of_magnitudes() {
        let spec = FilterSpec::new(31, WindowKind::Hamming, 8000.0).unwrap();
        let c = constrain_cutoffs(RawCutoffs::new(0.05, 0.2)).unwrap();
        let one = FilterBank::from_cutoffs(&spec, &[c]).unwrap();
        let two = FilterBank::from_cutoffs(&spec, &[c, c]).unwrap();
        let single = frequency_response(one.row(0), 128).unwrap();
        let r1 = cumulative_frequency_response(&one, 128).unwrap();
        let r2 = cumulative_frequency_response(&two, 128).unwrap();
        assert_eq!(r1.raw, single);
        for (a, b) in r1.raw.iter().zip(&r2.raw) {
            assert_eq!(2.0 * a, *b);
        }
        let peak = r2.normalized.iter().cloned().fold(0.0, f64::max);
        assert_eq!(peak, 1.0);
        let empty = FilterBank::from_taps(31, Vec::new()).unwrap();
        assert!(cumulative_frequency_response(&empty, 128).is_err());
    }
}

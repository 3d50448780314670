//! Band integrals of a filterbank's cumulative response.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{cumulative_frequency_response, frequency_grid, FilterBank};

fn interp(x: &[f64], y: &[f64], at: f64) -> f64 {
    let j = x.partition_point(|&v| v < at).clamp(1, x.len() - 1);
    let (x0, x1) = (x[j - 1], x[j]);
    let t = if x1 > x0 { (at - x0) / (x1 - x0) } else { 0.0 };
    y[j - 1] + t * (y[j] - y[j - 1])
}

/// Trapezoidal integral of a sampled curve over `[lo, hi]`, interpolating
/// linearly at the band edges. `x` must be increasing.
pub fn band_integral(x: &[f64], y: &[f64], lo: f64, hi: f64) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Shape(format!("{} abscissae for {} values", x.len(), y.len())));
    }
    if !(lo < hi && lo >= x[0] && hi <= x[x.len() - 1]) {
        return Err(Error::InvalidParameter(format!(
            "band [{lo}, {hi}] is empty or outside [{}, {}]",
            x[0],
            x[x.len() - 1]
        )));
    }
    let mut pts = vec![(lo, interp(x, y, lo))];
    pts.extend(x.iter().zip(y).filter(|(&xi, _)| xi > lo && xi < hi).map(|(&a, &b)| (a, b)));
    pts.push((hi, interp(x, y, hi)));
    Ok(pts.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValleyReport {
    pub inside: f64,
    pub lower_flank: f64,
    pub upper_flank: f64,
    /// `inside / mean(lower_flank, upper_flank)`.
    pub ratio: f64,
}

/// Integrates the max-normalized cumulative response over `[lo, hi]` Hz and
/// over the two flanking bands of the same width.
pub fn valley_ratio(bank: &FilterBank, sample_rate: f64, n_points: usize, lo_hz: f64, hi_hz: f64) -> Result<ValleyReport> {
    let cum = cumulative_frequency_response(bank, n_points)?;
    let hz: Vec<f64> = frequency_grid(n_points).iter().map(|f| f * sample_rate).collect();
    let w = hi_hz - lo_hz;
    let inside = band_integral(&hz, &cum.normalized, lo_hz, hi_hz)?;
    let lower_flank = band_integral(&hz, &cum.normalized, lo_hz - w, lo_hz)?;
    let upper_flank = band_integral(&hz, &cum.normalized, hi_hz, hi_hz + w)?;
    Ok(ValleyReport {
        inside,
        lower_flank,
        upper_flank,
        ratio: inside / (0.5 * (lower_flank + upper_flank)),
    })
}

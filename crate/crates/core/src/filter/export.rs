use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{cumulative_frequency_response, frequency_grid, frequency_response, FilterBank};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f1_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f2_hz: Option<f64>,
    pub taps: Vec<f64>,
    pub response: Vec<f64>,
}

/// Plot-ready dump of a filter bank: taps, magnitude responses and the
/// cumulative response, with cutoffs in Hz when the bank has them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterExport {
    pub filters: Vec<FilterRecord>,
    pub n_points: usize,
    pub fs: f64,
    pub cumulative: Vec<f64>,
    pub cumulative_normalized: Vec<f64>,
}

impl FilterExport {
    pub fn from_bank(bank: &FilterBank, sample_rate: f64, n_points: usize) -> Result<Self> {
        let cumulative = cumulative_frequency_response(bank, n_points)?;
        let cutoffs = bank.cutoffs();
        let filters = bank
            .rows()
            .enumerate()
            .map(|(i, row)| {
                let hz = cutoffs.get(i).map(|c| c.to_hz(sample_rate));
                Ok(FilterRecord {
                    f1_hz: hz.map(|h| h.0),
                    f2_hz: hz.map(|h| h.1),
                    taps: row.to_vec(),
                    response: frequency_response(row, n_points)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            filters,
            n_points,
            fs: sample_rate,
            cumulative: cumulative.raw,
            cumulative_normalized: cumulative.normalized,
        })
    }

    pub fn has_cutoffs(&self) -> bool {
        self.filters.iter().any(|f| f.f1_hz.is_some())
    }

    /// One row per filter: `f1_abs_hz,f2_abs_hz,tap_0,...` (cutoff columns
    /// only for banks built from cutoffs).
    pub fn filters_csv(&self) -> String {
        let with_cutoffs = self.has_cutoffs();
        let length = self.filters.first().map_or(0, |f| f.taps.len());
        let mut out = String::new();
        let mut header: Vec<String> = Vec::new();
        if with_cutoffs {
            header.push("f1_abs_hz".into());
            header.push("f2_abs_hz".into());
        }
        header.extend((0..length).map(|i| format!("tap_{i}")));
        out.push_str(&header.join(","));
        out.push('\n');
        for f in &self.filters {
            let mut fields: Vec<String> = Vec::with_capacity(length + 2);
            if with_cutoffs {
                fields.push(format!("{}", f.f1_hz.unwrap_or(f64::NAN)));
                fields.push(format!("{}", f.f2_hz.unwrap_or(f64::NAN)));
            }
            fields.extend(f.taps.iter().map(|t| format!("{t}")));
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    /// `freq_hz,cumulative,normalized`, one row per response point.
    pub fn cumulative_csv(&self) -> String {
        let mut out = String::from("freq_hz,cumulative,normalized\n");
        for ((f, raw), norm) in frequency_grid(self.n_points)
            .iter()
            .zip(&self.cumulative)
            .zip(&self.cumulative_normalized)
        {
            let _ = writeln!(out, "{},{},{}", f * self.fs, raw, norm);
        }
        out
    }
}

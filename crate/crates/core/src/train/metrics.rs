//! Frame and sentence error rates.

use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Percentage of rows of an `[N, C]` posterior matrix whose argmax differs
/// from the label.
pub fn frame_error_rate(posteriors: &Tensor, labels: &[usize]) -> Result<f64> {
    if posteriors.rank() != 2 || posteriors.dim(0) != labels.len() {
        return Err(Error::Shape(format!(
            "posteriors {:?} against {} labels",
            posteriors.shape(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::InvalidInput("frame error rate of zero frames".into()));
    }
    let wrong = labels
        .iter()
        .enumerate()
        .filter(|&(i, &l)| argmax(posteriors.outer(i)) != l)
        .count();
    Ok(100.0 * wrong as f64 / labels.len() as f64)
}

/// Chunk posteriors of one utterance, `[n_chunks, C]`.
#[derive(Debug, Clone, PartialEq)]
pub struct UtterancePosteriors {
    pub posteriors: Tensor,
    pub label: usize,
}

/// Per-utterance decisions from the argmax of the mean chunk posterior.
pub fn sentence_error_rate(utterances: &[UtterancePosteriors]) -> Result<f64> {
    if utterances.is_empty() {
        return Err(Error::InvalidInput("sentence error rate of zero utterances".into()));
    }
    let mut wrong = 0;
    for (u, utt) in utterances.iter().enumerate() {
        let p = &utt.posteriors;
        if p.rank() != 2 || p.dim(0) == 0 {
            return Err(Error::InvalidInput(format!(
                "utterance {u} has no chunk posteriors (shape {:?})",
                p.shape()
            )));
        }
        let n = p.dim(0);
        let mut mean = vec![0.0; p.dim(1)];
        for i in 0..n {
            for (m, v) in mean.iter_mut().zip(p.outer(i)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        if argmax(&mean) != utt.label {
            wrong += 1;
        }
    }
    Ok(100.0 * wrong as f64 / utterances.len() as f64)
}

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use super::{dot, Tensor};
use crate::math::{exp, ln};
use crate::rng::SeededRng;
use crate::{Error, Result};

/// Probabilities are clamped here before taking logs.
pub(crate) const PROB_FLOOR: f64 = 1e-12;

/// Rows `ids[t]` of the embedding matrix, stacked.
pub fn embed(ids: &[usize], embedding: &Tensor) -> Result<Tensor> {
    let (vocab, dim) = (embedding.rows(), embedding.cols());
    let mut out = Vec::with_capacity(ids.len() * dim);
    for &id in ids {
        if id >= vocab {
            return Err(Error::SymbolOutOfRange { id, size: vocab });
        }
        out.extend_from_slice(embedding.row(id));
    }
    Tensor::matrix(ids.len(), dim, out)
}

/// Max-subtracted softmax. Entries are floored at the smallest positive
/// normal `f64`, so no probability is exactly zero.
pub fn softmax_in_place(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in logits.iter_mut() {
        *v = exp(*v - max);
        sum += *v;
    }
    for v in logits.iter_mut() {
        *v = (*v / sum).max(f64::MIN_POSITIVE);
    }
}

pub fn dense_softmax(h: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (labels, width) = (weight.rows(), weight.cols());
    if h.cols() != width || bias.len() != labels {
        return Err(Error::ShapeMismatch {
            op: "dense_softmax",
            detail: format!(
                "input {:?}, weight {:?}, bias {:?}",
                h.shape(),
                weight.shape(),
                bias.shape()
            ),
        });
    }
    let steps = h.rows();
    let mut out = alloc::vec![0.0; steps * labels];
    for t in 0..steps {
        let x = h.row(t);
        let row = &mut out[t * labels..(t + 1) * labels];
        for (l, v) in row.iter_mut().enumerate() {
            *v = dot(weight.row(l), x) + bias.data()[l];
        }
        softmax_in_place(row);
    }
    Tensor::matrix(steps, labels, out)
}

/// Mean negative log-likelihood of `gold` under `probs`.
pub fn cross_entropy(probs: &Tensor, gold: &[usize]) -> Result<f64> {
    let (steps, labels) = (probs.rows(), probs.cols());
    if gold.len() != steps {
        return Err(Error::LengthMismatch {
            left: steps,
            right: gold.len(),
        });
    }
    if steps == 0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (t, &g) in gold.iter().enumerate() {
        if g >= labels {
            return Err(Error::LabelOutOfRange { id: g, size: labels });
        }
        total -= ln(probs.row(t)[g].max(PROB_FLOOR));
    }
    Ok(total / steps as f64)
}

/// Per-element multipliers for inverted dropout: 0 with probability `p`,
/// `1 / (1 - p)` otherwise.
pub(crate) fn dropout_mask(len: usize, p: f64, rng: &mut SeededRng) -> Vec<f64> {
    let keep = 1.0 / (1.0 - p);
    (0..len)
        .map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep })
        .collect()
}

pub(crate) fn check_dropout(p: f64) -> Result<()> {
    if (0.0..1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidDropout(p))
    }
}

/// Inverted dropout; the identity outside training or when `p == 0`.
pub fn apply_dropout(h: &Tensor, p: f64, rng: &mut SeededRng, training: bool) -> Result<Tensor> {
    check_dropout(p)?;
    if !training || p == 0.0 {
        return Ok(h.clone());
    }
    let mask = dropout_mask(h.len(), p, rng);
    let data = h.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
    Tensor::from_vec(h.shape(), data)
}

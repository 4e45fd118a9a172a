//! Central finite-difference check of [`backward`](super::backward).

use alloc::string::String;

use super::{backward, forward, Dense, Encoder, ParamSet};
use crate::rng::seeded;
use crate::Result;

/// Gradients smaller than this are compared on an absolute scale.
pub const RELATIVE_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR);
    (analytic - numeric).abs() / scale
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub worst_parameter: String,
    pub worst_index: usize,
    pub entries_checked: usize,
}

fn loss(
    encoder: &Encoder,
    head: &Dense,
    ids: &[usize],
    gold: &[usize],
    dropout: Option<(f64, u64)>,
) -> Result<f64> {
    let trace = match dropout {
        Some((p, seed)) => {
            let mut rng = seeded(seed);
            forward(encoder, head, ids, Some((p, &mut rng)))?
        }
        None => forward(encoder, head, ids, None)?,
    };
    trace.loss(gold)
}

/// Compares every analytic gradient entry with `(L(w+eps) - L(w-eps)) / 2eps`.
/// With `dropout = Some((p, seed))` each evaluation regenerates the same
/// masks from `seed`.
pub fn check_gradients(
    encoder: &Encoder,
    head: &Dense,
    ids: &[usize],
    gold: &[usize],
    dropout: Option<(f64, u64)>,
    eps: f64,
) -> Result<GradCheckReport> {
    let trace = match dropout {
        Some((p, seed)) => {
            let mut rng = seeded(seed);
            forward(encoder, head, ids, Some((p, &mut rng)))?
        }
        None => forward(encoder, head, ids, None)?,
    };
    let grads = backward(encoder, head, &trace, gold)?;

    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst_parameter: String::new(),
        worst_index: 0,
        entries_checked: 0,
    };
    let mut enc = encoder.clone();
    let mut hd = head.clone();
    let enc_names = encoder.names();
    let head_names = head.names();

    let mut record = |name: &str, index: usize, analytic: f64, numeric: f64| {
        let err = relative_error(analytic, numeric);
        report.entries_checked += 1;
        if err > report.max_relative_error || report.worst_parameter.is_empty() {
            report.max_relative_error = err;
            report.worst_parameter = String::from(name);
            report.worst_index = index;
        }
    };

    let analytic_enc = grads.encoder.tensors();
    for ti in 0..analytic_enc.len() {
        for j in 0..analytic_enc[ti].len() {
            let original = enc.tensors()[ti].data()[j];
            enc.tensors_mut()[ti].data_mut()[j] = original + eps;
            let plus = loss(&enc, &hd, ids, gold, dropout)?;
            enc.tensors_mut()[ti].data_mut()[j] = original - eps;
            let minus = loss(&enc, &hd, ids, gold, dropout)?;
            enc.tensors_mut()[ti].data_mut()[j] = original;
            record(&enc_names[ti], j, analytic_enc[ti].data()[j], (plus - minus) / (2.0 * eps));
        }
    }
    let analytic_head = grads.head.tensors();
    for ti in 0..analytic_head.len() {
        for j in 0..analytic_head[ti].len() {
            let original = hd.tensors()[ti].data()[j];
            hd.tensors_mut()[ti].data_mut()[j] = original + eps;
            let plus = loss(&enc, &hd, ids, gold, dropout)?;
            hd.tensors_mut()[ti].data_mut()[j] = original - eps;
            let minus = loss(&enc, &hd, ids, gold, dropout)?;
            hd.tensors_mut()[ti].data_mut()[j] = original;
            record(&head_names[ti], j, analytic_head[ti].data()[j], (plus - minus) / (2.0 * eps));
        }
    }
    Ok(report)
}

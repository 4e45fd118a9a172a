//! A small dense-tensor engine for the bi-LSTM tagger: embeddings, LSTM
//! layers read in both directions, a softmax prediction layer, inverted
//! dropout, hand-written backpropagation and an Adam optimizer.
//!
//! Everything is `f64` and single-sequence (no minibatches).

mod layers;
mod lstm;
mod network;
mod optim;
mod tensor;

pub mod gradcheck;

pub use layers::{apply_dropout, cross_entropy, dense_softmax, embed, softmax_in_place};
pub use lstm::{bilstm_layer, lstm_cell, stack_forward, LstmDirection, LstmLayerParams};
pub use network::{backward, forward, Dense, Encoder, ForwardTrace, GradientStore, ParamSet};
pub use optim::{optimizer_step, AdamConfig, AdamState};
pub use tensor::Tensor;

/// Four-accumulator dot product; fixed summation order keeps results
/// reproducible while letting the compiler vectorize.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += alpha * x`
#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

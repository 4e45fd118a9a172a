use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::layers::{check_dropout, cross_entropy, dropout_mask, softmax_in_place};
use super::lstm::{backward_direction, check_layer, glorot_limit, run_layer, DirectionTrace};
use super::{axpy, dot, LstmDirection, LstmLayerParams, Tensor};
use crate::rng::{uniform, SeededRng};
use crate::{Error, Result};

/// A named, ordered collection of parameter tensors.
pub trait ParamSet {
    fn tensors(&self) -> Vec<&Tensor>;
    fn tensors_mut(&mut self) -> Vec<&mut Tensor>;
    fn names(&self) -> Vec<String>;

    /// Same shapes, all zeros.
    fn zeros_like(&self) -> Self
    where
        Self: Sized;
}

/// Embedding plus the stack of bi-LSTM layers. Shared by every task head.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    /// `V x d`
    pub embedding: Tensor,
    pub layers: Vec<LstmLayerParams>,
}

impl Encoder {
    pub fn init(
        vocab: usize,
        embed_dim: usize,
        hidden: usize,
        num_layers: usize,
        rng: &mut SeededRng,
    ) -> Self {
        let limit = glorot_limit(vocab, embed_dim);
        let embedding = Tensor::from_vec(
            &[vocab, embed_dim],
            (0..vocab * embed_dim).map(|_| uniform(rng, -limit, limit)).collect(),
        )
        .expect("shape matches data");
        let layers = (0..num_layers)
            .map(|k| {
                let input = if k == 0 { embed_dim } else { 2 * hidden };
                LstmLayerParams::init(input, hidden, rng)
            })
            .collect();
        Encoder { embedding, layers }
    }

    /// Width of the vectors handed to prediction heads.
    pub fn output_width(&self) -> usize {
        self.layers
            .last()
            .map(|l| 2 * l.hidden())
            .unwrap_or_else(|| self.embedding.cols())
    }

    pub fn vocab_size(&self) -> usize {
        self.embedding.rows()
    }
}

impl ParamSet for Encoder {
    fn tensors(&self) -> Vec<&Tensor> {
        let mut out = alloc::vec![&self.embedding];
        for layer in &self.layers {
            for dir in [&layer.forward, &layer.backward] {
                out.extend([&dir.w, &dir.u, &dir.b]);
            }
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = alloc::vec![&mut self.embedding];
        for layer in &mut self.layers {
            let LstmLayerParams { forward, backward } = layer;
            for dir in [forward, backward] {
                let LstmDirection { w, u, b } = dir;
                out.extend([w, u, b]);
            }
        }
        out
    }

    fn names(&self) -> Vec<String> {
        let mut out = alloc::vec![String::from("embedding")];
        for k in 0..self.layers.len() {
            for dir in ["forward", "backward"] {
                for t in ["w", "u", "b"] {
                    out.push(format!("layer{k}.{dir}.{t}"));
                }
            }
        }
        out
    }

    fn zeros_like(&self) -> Self {
        Encoder {
            embedding: Tensor::zeros(self.embedding.shape()),
            layers: self
                .layers
                .iter()
                .map(|l| LstmLayerParams::zeros(l.input(), l.hidden()))
                .collect(),
        }
    }
}

/// Task-specific prediction layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `L x width`
    pub weight: Tensor,
    /// `L`
    pub bias: Tensor,
}

impl Dense {
    pub fn init(labels: usize, width: usize, rng: &mut SeededRng) -> Self {
        let limit = glorot_limit(width, labels);
        Dense {
            weight: Tensor::from_vec(
                &[labels, width],
                (0..labels * width).map(|_| uniform(rng, -limit, limit)).collect(),
            )
            .expect("shape matches data"),
            bias: Tensor::zeros(&[labels]),
        }
    }

    pub fn labels(&self) -> usize {
        self.weight.rows()
    }
}

impl ParamSet for Dense {
    fn tensors(&self) -> Vec<&Tensor> {
        alloc::vec![&self.weight, &self.bias]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        alloc::vec![&mut self.weight, &mut self.bias]
    }

    fn names(&self) -> Vec<String> {
        alloc::vec![String::from("head.weight"), String::from("head.bias")]
    }

    fn zeros_like(&self) -> Self {
        Dense {
            weight: Tensor::zeros(self.weight.shape()),
            bias: Tensor::zeros(self.bias.shape()),
        }
    }
}

/// Activations recorded by [`forward`] for one sequence.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub ids: Vec<usize>,
    layer_inputs: Vec<Vec<f64>>,
    directions: Vec<(DirectionTrace, DirectionTrace)>,
    masks: Vec<Option<Vec<f64>>>,
    top: Vec<f64>,
    /// `T x L`
    pub probs: Tensor,
}

impl ForwardTrace {
    pub fn steps(&self) -> usize {
        self.ids.len()
    }

    /// Mean cross-entropy of `gold` under the recorded distribution.
    pub fn loss(&self, gold: &[usize]) -> Result<f64> {
        cross_entropy(&self.probs, gold)
    }
}

/// Embeds `ids`, runs the bi-LSTM stack and the head. With `dropout`, each
/// layer output is masked (training mode); without it the pass is
/// deterministic.
pub fn forward(
    encoder: &Encoder,
    head: &Dense,
    ids: &[usize],
    mut dropout: Option<(f64, &mut SeededRng)>,
) -> Result<ForwardTrace> {
    if let Some((p, _)) = &dropout {
        check_dropout(*p)?;
    }
    let steps = ids.len();
    let dim = encoder.embedding.cols();
    let vocab = encoder.vocab_size();
    let mut xs = Vec::with_capacity(steps * dim);
    for &id in ids {
        if id >= vocab {
            return Err(Error::SymbolOutOfRange { id, size: vocab });
        }
        xs.extend_from_slice(encoder.embedding.row(id));
    }
    let mut width = dim;
    let mut layer_inputs = Vec::with_capacity(encoder.layers.len());
    let mut directions = Vec::with_capacity(encoder.layers.len());
    let mut masks = Vec::with_capacity(encoder.layers.len());
    for layer in &encoder.layers {
        check_layer(layer, width)?;
        let (fwd, bwd, mut out) = run_layer(layer, &xs, steps);
        let mask = match &mut dropout {
            Some((p, rng)) if *p > 0.0 => {
                let m = dropout_mask(out.len(), *p, rng);
                out.iter_mut().zip(&m).for_each(|(v, k)| *v *= k);
                Some(m)
            }
            _ => None,
        };
        layer_inputs.push(core::mem::replace(&mut xs, out));
        directions.push((fwd, bwd));
        masks.push(mask);
        width = 2 * layer.hidden();
    }
    if head.weight.cols() != width || head.bias.len() != head.labels() {
        return Err(Error::ShapeMismatch {
            op: "head",
            detail: format!(
                "head weight {:?} / bias {:?} on encoder width {}",
                head.weight.shape(),
                head.bias.shape(),
                width
            ),
        });
    }
    let labels = head.labels();
    let mut probs = alloc::vec![0.0; steps * labels];
    for t in 0..steps {
        let x = &xs[t * width..(t + 1) * width];
        let row = &mut probs[t * labels..(t + 1) * labels];
        for (l, v) in row.iter_mut().enumerate() {
            *v = dot(head.weight.row(l), x) + head.bias.data()[l];
        }
        softmax_in_place(row);
    }
    Ok(ForwardTrace {
        ids: ids.to_vec(),
        layer_inputs,
        directions,
        masks,
        top: xs,
        probs: Tensor::matrix(steps, labels, probs)?,
    })
}

/// Gradients shaped like the parameters they belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientStore {
    pub encoder: Encoder,
    pub head: Dense,
}

impl GradientStore {
    pub fn is_finite(&self) -> bool {
        self.encoder.tensors().iter().all(|t| t.is_finite())
            && self.head.tensors().iter().all(|t| t.is_finite())
    }
}

/// Exact gradient of the mean cross-entropy of `gold` w.r.t. every
/// parameter, given the activations in `trace`.
pub fn backward(
    encoder: &Encoder,
    head: &Dense,
    trace: &ForwardTrace,
    gold: &[usize],
) -> Result<GradientStore> {
    let steps = trace.steps();
    let labels = head.labels();
    if gold.len() != steps {
        return Err(Error::LengthMismatch {
            left: steps,
            right: gold.len(),
        });
    }
    let mut grads = GradientStore {
        encoder: encoder.zeros_like(),
        head: head.zeros_like(),
    };
    if steps == 0 {
        return Ok(grads);
    }
    let width = head.weight.cols();
    let scale = 1.0 / steps as f64;
    let mut d_top = alloc::vec![0.0; steps * width];
    let mut d_logits = alloc::vec![0.0; labels];
    for t in 0..steps {
        let g = gold[t];
        if g >= labels {
            return Err(Error::LabelOutOfRange { id: g, size: labels });
        }
        let p = trace.probs.row(t);
        for l in 0..labels {
            d_logits[l] = (p[l] - if l == g { 1.0 } else { 0.0 }) * scale;
        }
        let x = &trace.top[t * width..(t + 1) * width];
        let dx = &mut d_top[t * width..(t + 1) * width];
        for (l, &d) in d_logits.iter().enumerate() {
            axpy(d, x, grads.head.weight.row_mut(l));
            grads.head.bias.data_mut()[l] += d;
            axpy(d, head.weight.row(l), dx);
        }
    }

    let mut d_out = d_top;
    for k in (0..encoder.layers.len()).rev() {
        let layer = &encoder.layers[k];
        let hs = layer.hidden();
        let input = layer.input();
        if let Some(mask) = &trace.masks[k] {
            d_out.iter_mut().zip(mask).for_each(|(d, m)| *d *= m);
        }
        let mut dh_fwd = alloc::vec![0.0; steps * hs];
        let mut dh_bwd = alloc::vec![0.0; steps * hs];
        for t in 0..steps {
            let row = &d_out[t * 2 * hs..(t + 1) * 2 * hs];
            dh_fwd[t * hs..(t + 1) * hs].copy_from_slice(&row[..hs]);
            dh_bwd[t * hs..(t + 1) * hs].copy_from_slice(&row[hs..]);
        }
        let xs = &trace.layer_inputs[k];
        let (fwd_trace, bwd_trace) = &trace.directions[k];
        let mut dxs = alloc::vec![0.0; steps * input];
        let g = &mut grads.encoder.layers[k];
        backward_direction(&layer.forward, xs, fwd_trace, &dh_fwd, &mut g.forward, &mut dxs);
        backward_direction(&layer.backward, xs, bwd_trace, &dh_bwd, &mut g.backward, &mut dxs);
        d_out = dxs;
    }

    let dim = encoder.embedding.cols();
    for (t, &id) in trace.ids.iter().enumerate() {
        axpy(1.0, &d_out[t * dim..(t + 1) * dim], grads.encoder.embedding.row_mut(id));
    }
    Ok(grads)
}

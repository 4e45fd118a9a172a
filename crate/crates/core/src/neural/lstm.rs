use alloc::format;
use alloc::vec::Vec;

use super::{axpy, dot, Tensor};
use crate::math::{sigmoid, tanh};
use crate::rng::{uniform, SeededRng};
use crate::{Error, Result};

/// Weights of one reading direction. Rows are packed by gate in the order
/// input, forget, cell candidate, output.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmDirection {
    /// `4h x in`
    pub w: Tensor,
    /// `4h x h`
    pub u: Tensor,
    /// `4h`
    pub b: Tensor,
}

impl LstmDirection {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmDirection {
            w: Tensor::zeros(&[4 * hidden, input]),
            u: Tensor::zeros(&[4 * hidden, hidden]),
            b: Tensor::zeros(&[4 * hidden]),
        }
    }

    /// Glorot-uniform weights, zero biases except a forget-gate bias of 1.
    pub fn init(input: usize, hidden: usize, rng: &mut SeededRng) -> Self {
        let mut p = Self::zeros(input, hidden);
        let wl = glorot_limit(input, 4 * hidden);
        p.w.data_mut().iter_mut().for_each(|v| *v = uniform(rng, -wl, wl));
        let ul = glorot_limit(hidden, 4 * hidden);
        p.u.data_mut().iter_mut().for_each(|v| *v = uniform(rng, -ul, ul));
        p.b.data_mut()[hidden..2 * hidden].iter_mut().for_each(|v| *v = 1.0);
        p
    }

    pub fn hidden(&self) -> usize {
        self.u.cols()
    }

    pub fn input(&self) -> usize {
        self.w.cols()
    }

    fn check(&self) -> Result<()> {
        let h = self.hidden();
        if self.u.rows() != 4 * h || self.w.rows() != 4 * h || self.b.len() != 4 * h {
            return Err(Error::ShapeMismatch {
                op: "lstm",
                detail: format!(
                    "w {:?}, u {:?}, b {:?} for hidden size {}",
                    self.w.shape(),
                    self.u.shape(),
                    self.b.shape(),
                    h
                ),
            });
        }
        Ok(())
    }
}

pub(crate) fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    crate::math::sqrt(6.0 / (fan_in + fan_out) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayerParams {
    pub forward: LstmDirection,
    pub backward: LstmDirection,
}

impl LstmLayerParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmLayerParams {
            forward: LstmDirection::zeros(input, hidden),
            backward: LstmDirection::zeros(input, hidden),
        }
    }

    pub fn init(input: usize, hidden: usize, rng: &mut SeededRng) -> Self {
        let forward = LstmDirection::init(input, hidden, rng);
        let backward = LstmDirection::init(input, hidden, rng);
        LstmLayerParams { forward, backward }
    }

    pub fn hidden(&self) -> usize {
        self.forward.hidden()
    }

    pub fn input(&self) -> usize {
        self.forward.input()
    }
}

/// Applies the gate nonlinearities to the pre-activations in `z` (in place)
/// and writes the new cell and hidden state.
fn cell_update(z: &mut [f64], c_prev: &[f64], c: &mut [f64], tanh_c: &mut [f64], h: &mut [f64]) {
    let hs = c.len();
    for k in 0..hs {
        let i = sigmoid(z[k]);
        let f = sigmoid(z[hs + k]);
        let g = tanh(z[2 * hs + k]);
        let o = sigmoid(z[3 * hs + k]);
        z[k] = i;
        z[hs + k] = f;
        z[2 * hs + k] = g;
        z[3 * hs + k] = o;
        c[k] = f * c_prev[k] + i * g;
        tanh_c[k] = tanh(c[k]);
        h[k] = o * tanh_c[k];
    }
}

/// One LSTM step: returns the new hidden and cell state.
pub fn lstm_cell(
    x: &Tensor,
    h_prev: &Tensor,
    c_prev: &Tensor,
    p: &LstmDirection,
) -> Result<(Tensor, Tensor)> {
    p.check()?;
    let hs = p.hidden();
    if x.len() != p.input() || h_prev.len() != hs || c_prev.len() != hs {
        return Err(Error::ShapeMismatch {
            op: "lstm_cell",
            detail: format!(
                "x {}, h {}, c {} for input {} and hidden {}",
                x.len(),
                h_prev.len(),
                c_prev.len(),
                p.input(),
                hs
            ),
        });
    }
    let mut z: Vec<f64> = (0..4 * hs)
        .map(|r| dot(p.w.row(r), x.data()) + dot(p.u.row(r), h_prev.data()) + p.b.data()[r])
        .collect();
    let mut c = alloc::vec![0.0; hs];
    let mut tc = alloc::vec![0.0; hs];
    let mut h = alloc::vec![0.0; hs];
    cell_update(&mut z, c_prev.data(), &mut c, &mut tc, &mut h);
    Ok((Tensor::vector(h), Tensor::vector(c)))
}

/// Activations of one direction over a sequence, indexed by position.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct DirectionTrace {
    pub reversed: bool,
    /// `T x 4h`, post-activation gates.
    pub gates: Vec<f64>,
    /// `T x h`
    pub cells: Vec<f64>,
    pub tanh_cells: Vec<f64>,
    pub hidden: Vec<f64>,
}

impl DirectionTrace {
    /// Position processed just before `t`, if any.
    fn previous(&self, t: usize, steps: usize) -> Option<usize> {
        if self.reversed {
            (t + 1 < steps).then_some(t + 1)
        } else {
            t.checked_sub(1)
        }
    }
}

/// Runs one direction over `xs` (`T x in`, row-major).
pub(crate) fn run_direction(
    p: &LstmDirection,
    xs: &[f64],
    steps: usize,
    reversed: bool,
) -> DirectionTrace {
    let (hs, input) = (p.hidden(), p.input());
    let g4 = 4 * hs;
    let mut gates = alloc::vec![0.0; steps * g4];
    for t in 0..steps {
        let x = &xs[t * input..(t + 1) * input];
        let z = &mut gates[t * g4..(t + 1) * g4];
        for (r, zr) in z.iter_mut().enumerate() {
            *zr = dot(p.w.row(r), x) + p.b.data()[r];
        }
    }
    let mut trace = DirectionTrace {
        reversed,
        gates,
        cells: alloc::vec![0.0; steps * hs],
        tanh_cells: alloc::vec![0.0; steps * hs],
        hidden: alloc::vec![0.0; steps * hs],
    };
    let zeros = alloc::vec![0.0; hs];
    let mut h_prev = zeros.clone();
    let mut c_prev = zeros;
    for n in 0..steps {
        let t = if reversed { steps - 1 - n } else { n };
        let z = &mut trace.gates[t * g4..(t + 1) * g4];
        for (r, zr) in z.iter_mut().enumerate() {
            *zr += dot(p.u.row(r), &h_prev);
        }
        let (c, tc, h) = (
            &mut trace.cells[t * hs..(t + 1) * hs],
            &mut trace.tanh_cells[t * hs..(t + 1) * hs],
            &mut trace.hidden[t * hs..(t + 1) * hs],
        );
        cell_update(z, &c_prev, c, tc, h);
        h_prev.copy_from_slice(h);
        c_prev.copy_from_slice(c);
    }
    trace
}

/// Backpropagation through time for one direction. `dh_out` is the loss
/// gradient w.r.t. this direction's hidden outputs (`T x h`). Parameter
/// gradients are accumulated into `grads`, input gradients into `dxs`.
pub(crate) fn backward_direction(
    p: &LstmDirection,
    xs: &[f64],
    trace: &DirectionTrace,
    dh_out: &[f64],
    grads: &mut LstmDirection,
    dxs: &mut [f64],
) {
    let (hs, input) = (p.hidden(), p.input());
    let g4 = 4 * hs;
    let steps = dh_out.len() / hs.max(1);
    let mut dh_next = alloc::vec![0.0; hs];
    let mut dc_next = alloc::vec![0.0; hs];
    let mut dz = alloc::vec![0.0; g4];
    let zeros = alloc::vec![0.0; hs];
    for n in 0..steps {
        // reverse of processing order
        let t = if trace.reversed { n } else { steps - 1 - n };
        let prev = trace.previous(t, steps);
        let (h_prev, c_prev) = match prev {
            Some(q) => (&trace.hidden[q * hs..(q + 1) * hs], &trace.cells[q * hs..(q + 1) * hs]),
            None => (&zeros[..], &zeros[..]),
        };
        let gate = &trace.gates[t * g4..(t + 1) * g4];
        let tanh_c = &trace.tanh_cells[t * hs..(t + 1) * hs];
        for k in 0..hs {
            let (i, f, g, o) = (gate[k], gate[hs + k], gate[2 * hs + k], gate[3 * hs + k]);
            let dh = dh_out[t * hs + k] + dh_next[k];
            let tc = tanh_c[k];
            let d_o = dh * tc;
            let dc = dh * o * (1.0 - tc * tc) + dc_next[k];
            let di = dc * g;
            let dg = dc * i;
            let df = dc * c_prev[k];
            dc_next[k] = dc * f;
            dz[k] = di * i * (1.0 - i);
            dz[hs + k] = df * f * (1.0 - f);
            dz[2 * hs + k] = dg * (1.0 - g * g);
            dz[3 * hs + k] = d_o * o * (1.0 - o);
        }
        let x = &xs[t * input..(t + 1) * input];
        let dx = &mut dxs[t * input..(t + 1) * input];
        dh_next.iter_mut().for_each(|v| *v = 0.0);
        for (r, &d) in dz.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            axpy(d, x, grads.w.row_mut(r));
            axpy(d, h_prev, grads.u.row_mut(r));
            grads.b.data_mut()[r] += d;
            axpy(d, p.w.row(r), dx);
            axpy(d, p.u.row(r), &mut dh_next);
        }
    }
}

/// Forward pass of one bi-directional layer; zero initial states.
pub(crate) fn run_layer(
    p: &LstmLayerParams,
    xs: &[f64],
    steps: usize,
) -> (DirectionTrace, DirectionTrace, Vec<f64>) {
    let fwd = run_direction(&p.forward, xs, steps, false);
    let bwd = run_direction(&p.backward, xs, steps, true);
    let hs = p.hidden();
    let mut out = Vec::with_capacity(steps * 2 * hs);
    for t in 0..steps {
        out.extend_from_slice(&fwd.hidden[t * hs..(t + 1) * hs]);
        out.extend_from_slice(&bwd.hidden[t * hs..(t + 1) * hs]);
    }
    (fwd, bwd, out)
}

pub(crate) fn check_layer(p: &LstmLayerParams, input: usize) -> Result<()> {
    p.forward.check()?;
    p.backward.check()?;
    if p.backward.hidden() != p.hidden() || p.backward.input() != p.input() || p.input() != input {
        return Err(Error::ShapeMismatch {
            op: "bilstm_layer",
            detail: format!(
                "layer expects input {} (backward {}), got {}",
                p.input(),
                p.backward.input(),
                input
            ),
        });
    }
    Ok(())
}

/// `T x 2h`: forward and backward hidden states concatenated per position.
pub fn bilstm_layer(xs: &Tensor, p: &LstmLayerParams) -> Result<Tensor> {
    check_layer(p, xs.cols())?;
    let steps = xs.rows();
    let (_, _, out) = run_layer(p, xs.data(), steps);
    Tensor::matrix(steps, 2 * p.hidden(), out)
}

/// Layers applied in sequence; each layer's output feeds the next.
pub fn stack_forward(xs: &Tensor, layers: &[LstmLayerParams]) -> Result<Tensor> {
    let mut current = xs.clone();
    for layer in layers {
        current = bilstm_layer(&current, layer)?;
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::exp;
    use crate::rng::seeded;
    use alloc::vec;

    fn scalar_sigmoid(x: f64) -> f64 {
        1.0 / (1.0 + exp(-x))
    }

    /// Reference cell written element by element from the textbook
    /// equations, independent of the packed-row implementation.
    #[allow(clippy::needless_range_loop)]
    fn reference_cell(x: &[f64], h: &[f64], c: &[f64], p: &LstmDirection) -> (Vec<f64>, Vec<f64>) {
        let hs = h.len();
        let pre = |gate: usize, k: usize| {
            let r = gate * hs + k;
            let mut s = p.b.data()[r];
            for j in 0..x.len() {
                s += p.w.data()[r * x.len() + j] * x[j];
            }
            for j in 0..hs {
                s += p.u.data()[r * hs + j] * h[j];
            }
            s
        };
        let mut h_new = vec![0.0; hs];
        let mut c_new = vec![0.0; hs];
        for k in 0..hs {
            let i = scalar_sigmoid(pre(0, k));
            let f = scalar_sigmoid(pre(1, k));
            let g = libm::tanh(pre(2, k));
            let o = scalar_sigmoid(pre(3, k));
            c_new[k] = f * c[k] + i * g;
            h_new[k] = o * libm::tanh(c_new[k]);
        }
        (h_new, c_new)
    }

    #[test]
    fn zero_weights_give_zero_state() {
        let p = LstmDirection::zeros(3, 2);
        let (h, c) = lstm_cell(
            &Tensor::vector(vec![1.0, -2.0, 0.5]),
            &Tensor::zeros(&[2]),
            &Tensor::zeros(&[2]),
            &p,
        )
        .unwrap();
        assert_eq!(h.data(), &[0.0, 0.0]);
        assert_eq!(c.data(), &[0.0, 0.0]);
    }

    #[test]
    fn saturated_forget_gate_keeps_cell() {
        let mut p = LstmDirection::zeros(2, 2);
        p.b.data_mut()[2..4].iter_mut().for_each(|v| *v = 50.0);
        let c_prev = Tensor::vector(vec![0.7, -1.3]);
        let (_, c) = lstm_cell(&Tensor::zeros(&[2]), &Tensor::zeros(&[2]), &c_prev, &p).unwrap();
        assert!((c.data()[0] - 0.7).abs() < 1e-12);
        assert!((c.data()[1] + 1.3).abs() < 1e-12);
    }

    #[test]
    fn cell_matches_scalar_reference() {
        let mut rng = seeded(3);
        for _ in 0..20 {
            let p = LstmDirection::init(4, 3, &mut rng);
            let x: Vec<f64> = (0..4).map(|_| uniform(&mut rng, -1.0, 1.0)).collect();
            let h: Vec<f64> = (0..3).map(|_| uniform(&mut rng, -1.0, 1.0)).collect();
            let c: Vec<f64> = (0..3).map(|_| uniform(&mut rng, -1.0, 1.0)).collect();
            let (h1, c1) = lstm_cell(
                &Tensor::vector(x.clone()),
                &Tensor::vector(h.clone()),
                &Tensor::vector(c.clone()),
                &p,
            )
            .unwrap();
            let (h2, c2) = reference_cell(&x, &h, &c, &p);
            for (a, b) in h1.data().iter().zip(&h2).chain(c1.data().iter().zip(&c2)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cell_shape_errors() {
        let p = LstmDirection::zeros(3, 2);
        let bad = lstm_cell(&Tensor::zeros(&[2]), &Tensor::zeros(&[2]), &Tensor::zeros(&[2]), &p);
        assert!(matches!(bad, Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn single_step_layer() {
        let mut rng = seeded(5);
        let p = LstmLayerParams::init(3, 4, &mut rng);
        let xs = Tensor::matrix(1, 3, vec![0.1, 0.2, -0.3]).unwrap();
        let out = bilstm_layer(&xs, &p).unwrap();
        assert_eq!(out.shape(), &[1, 8]);
        let zero = Tensor::zeros(&[4]);
        let x = Tensor::vector(xs.data().to_vec());
        let (hf, _) = lstm_cell(&x, &zero, &zero, &p.forward).unwrap();
        let (hb, _) = lstm_cell(&x, &zero, &zero, &p.backward).unwrap();
        assert_eq!(&out.data()[..4], hf.data());
        assert_eq!(&out.data()[4..], hb.data());
    }

    #[test]
    fn palindrome_with_mirrored_weights() {
        let mut rng = seeded(8);
        let forward = LstmDirection::init(2, 3, &mut rng);
        let p = LstmLayerParams {
            backward: forward.clone(),
            forward,
        };
        let xs = Tensor::matrix(5, 2, vec![0.1, 0.5, -0.2, 0.3, 0.9, 0.9, -0.2, 0.3, 0.1, 0.5]).unwrap();
        let out = bilstm_layer(&xs, &p).unwrap();
        for t in 0..5 {
            let fwd = &out.row(t)[..3];
            let bwd = &out.row(4 - t)[3..];
            for (a, b) in fwd.iter().zip(bwd) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn stacks() {
        let mut rng = seeded(9);
        let xs = Tensor::matrix(4, 3, (0..12).map(|i| f64::from(i) * 0.1 - 0.5).collect()).unwrap();
        let l1 = LstmLayerParams::init(3, 2, &mut rng);
        let l2 = LstmLayerParams::init(4, 2, &mut rng);
        assert_eq!(stack_forward(&xs, core::slice::from_ref(&l1)).unwrap(), bilstm_layer(&xs, &l1).unwrap());
        let manual = bilstm_layer(&bilstm_layer(&xs, &l1).unwrap(), &l2).unwrap();
        assert_eq!(stack_forward(&xs, &[l1.clone(), l2]).unwrap(), manual);

        let zero = vec![LstmLayerParams::zeros(3, 2), LstmLayerParams::zeros(4, 2), LstmLayerParams::zeros(4, 2)];
        assert!(stack_forward(&xs, &zero).unwrap().data().iter().all(|v| *v == 0.0));
        assert!(bilstm_layer(&xs, &LstmLayerParams::zeros(3, 2)).unwrap().data().iter().all(|v| *v == 0.0));

        let broken = vec![l1.clone(), l1];
        assert!(matches!(stack_forward(&xs, &broken), Err(Error::ShapeMismatch { .. })));
    }
}

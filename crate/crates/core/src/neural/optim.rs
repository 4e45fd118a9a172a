use alloc::vec::Vec;

use super::{ParamSet, Tensor};
use crate::math::sqrt;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates for one parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub steps: u64,
}

impl AdamState {
    pub fn new<P: ParamSet>(params: &P) -> Self {
        let zeros: Vec<Tensor> = params
            .tensors()
            .iter()
            .map(|t| Tensor::zeros(t.shape()))
            .collect();
        AdamState {
            v: zeros.clone(),
            m: zeros,
            steps: 0,
        }
    }
}

/// One bias-corrected Adam update. Nothing is modified if any gradient is
/// non-finite.
pub fn optimizer_step<P: ParamSet>(
    params: &mut P,
    grads: &P,
    state: &mut AdamState,
    cfg: &AdamConfig,
) -> Result<()> {
    let grad_tensors = grads.tensors();
    if let Some(i) = grad_tensors.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient(grads.names().swap_remove(i)));
    }
    let mut targets = params.tensors_mut();
    if targets.len() != grad_tensors.len() || state.m.len() != targets.len() {
        return Err(Error::ShapeMismatch {
            op: "optimizer_step",
            detail: alloc::format!(
                "{} parameters, {} gradients, {} moment slots",
                targets.len(),
                grad_tensors.len(),
                state.m.len()
            ),
        });
    }
    for (i, (p, g)) in targets.iter().zip(&grad_tensors).enumerate() {
        if p.shape() != g.shape() || state.m[i].shape() != p.shape() {
            return Err(Error::ShapeMismatch {
                op: "optimizer_step",
                detail: alloc::format!("parameter {} has shape {:?}, gradient {:?}", i, p.shape(), g.shape()),
            });
        }
    }
    state.steps += 1;
    let t = state.steps as i32;
    let correct1 = 1.0 - libm::pow(cfg.beta1, f64::from(t));
    let correct2 = 1.0 - libm::pow(cfg.beta2, f64::from(t));
    let step_size = cfg.learning_rate / correct1;
    for (i, p) in targets.iter_mut().enumerate() {
        let g = grad_tensors[i].data();
        let m = state.m[i].data_mut();
        let v = state.v[i].data_mut();
        for (((w, gj), mj), vj) in p.data_mut().iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
            *mj = cfg.beta1 * *mj + (1.0 - cfg.beta1) * gj;
            *vj = cfg.beta2 * *vj + (1.0 - cfg.beta2) * gj * gj;
            *w -= step_size * *mj / (sqrt(*vj / correct2) + cfg.epsilon);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::String;
    use alloc::vec;

    #[derive(Debug, Clone, PartialEq)]
    struct Scalar(Tensor);

    impl ParamSet for Scalar {
        fn tensors(&self) -> Vec<&Tensor> {
            vec![&self.0]
        }
        fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
            vec![&mut self.0]
        }
        fn names(&self) -> Vec<String> {
            vec![String::from("w")]
        }
        fn zeros_like(&self) -> Self {
            Scalar(Tensor::zeros(self.0.shape()))
        }
    }

    fn scalar(v: f64) -> Scalar {
        Scalar(Tensor::vector(vec![v]))
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut w = scalar(0.5);
        let mut st = AdamState::new(&w);
        for _ in 0..10 {
            optimizer_step(&mut w, &scalar(0.0), &mut st, &AdamConfig::default()).unwrap();
        }
        assert_eq!(w, scalar(0.5));
    }

    #[test]
    fn constant_gradient_moves_against_its_sign() {
        for g in [2.0, -0.3] {
            let mut w = scalar(0.0);
            let mut st = AdamState::new(&w);
            for _ in 0..100 {
                optimizer_step(&mut w, &scalar(g), &mut st, &AdamConfig::default()).unwrap();
            }
            assert!(w.0.data()[0] * g < 0.0);
        }
    }

    #[test]
    fn quadratic_bowl_converges() {
        // Expected values from an independent scalar run of the same
        // update rule (Python, defaults): w(2000) = 0.020662311203...,
        // |w| < 0.01 first at step 2203.
        let mut w = scalar(1.0);
        let mut st = AdamState::new(&w);
        let mut hit = None;
        for step in 1..=3000 {
            let grad = scalar(2.0 * w.0.data()[0]);
            optimizer_step(&mut w, &grad, &mut st, &AdamConfig::default()).unwrap();
            if step == 2000 {
                assert!((w.0.data()[0] - 0.020_662_311_203_246_5).abs() < 1e-9, "{:?}", w);
            }
            if hit.is_none() && w.0.data()[0].abs() < 0.01 {
                hit = Some(step);
            }
        }
        assert_eq!(hit, Some(2203));
    }

    #[test]
    fn non_finite_gradient_is_rejected_untouched() {
        let mut w = scalar(0.5);
        let mut st = AdamState::new(&w);
        let err = optimizer_step(&mut w, &scalar(f64::NAN), &mut st, &AdamConfig::default());
        assert_eq!(err, Err(Error::NonFiniteGradient(String::from("w"))));
        assert_eq!(w, scalar(0.5));
        assert_eq!(st.steps, 0);
    }
}

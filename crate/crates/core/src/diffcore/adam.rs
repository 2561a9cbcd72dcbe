//! Adam with bias correction.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment estimates for a fixed list of parameters.
#[derive(Debug, Clone)]
pub struct AdamState {
    config: AdamConfig,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
    step: u64,
}

impl AdamState {
    pub fn new(params: &[Tensor], config: AdamConfig) -> Self {
        let zeros = |p: &Tensor| Tensor::zeros(p.shape());
        AdamState {
            config,
            first: params.iter().map(zeros).collect(),
            second: params.iter().map(zeros).collect(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn config(&self) -> AdamConfig {
        self.config
    }

    /// Applies one Adam update in place.
    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor], lr: f64) -> Result<()> {
        if !(lr > 0.0) || !lr.is_finite() {
            return Err(Error::invalid(format!(
                "learning rate must be > 0, got {lr}"
            )));
        }
        if params.len() != self.first.len() || grads.len() != params.len() {
            return Err(Error::invalid(format!(
                "adam state tracks {} parameters, got {} params and {} grads",
                self.first.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != self.first[i].shape() || g.shape() != p.shape() {
                return Err(Error::shape(
                    "adam_step",
                    format!(
                        "parameter {i}: param {:?}, grad {:?}, state {:?}",
                        p.shape(),
                        g.shape(),
                        self.first[i].shape()
                    ),
                ));
            }
        }

        self.step += 1;
        let AdamConfig { beta1, beta2, eps } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first.iter_mut().zip(self.second.iter_mut()))
        {
            for (((pv, &gv), mv), vv) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mv = beta1 * *mv + (1.0 - beta1) * gv;
                *vv = beta2 * *vv + (1.0 - beta2) * gv * gv;
                let m_hat = *mv / c1;
                let v_hat = *vv / c2;
                *pv -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut params = vec![Tensor::from_vec(vec![1.0, -2.0, 3.5])];
        let before = params.clone();
        let mut state = AdamState::new(&params, AdamConfig::default());
        for _ in 0..5 {
            state
                .step(&mut params, &[Tensor::zeros(&[3])], 0.1)
                .unwrap();
        }
        assert_eq!(params, before);
        assert_eq!(state.step_count(), 5);
    }

    #[test]
    fn first_step_matches_hand_recurrence() {
        // m = 0.1, v = 0.001, m̂ = 1, v̂ = 1  =>  p = 1 - 0.1 / (1 + 1e-8)
        let mut params = vec![Tensor::scalar(1.0)];
        let mut state = AdamState::new(&params, AdamConfig::default());
        state
            .step(&mut params, &[Tensor::scalar(1.0)], 0.1)
            .unwrap();
        let expected = 1.0 - 0.1 / (1.0 + 1e-8);
        assert!((params[0].data()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn converges_on_quadratic() {
        let mut params = vec![Tensor::scalar(0.0)];
        let mut state = AdamState::new(&params, AdamConfig::default());
        for _ in 0..100 {
            let p = params[0].data()[0];
            let g = Tensor::scalar(2.0 * (p - 3.0));
            state.step(&mut params, &[g], 0.1).unwrap();
        }
        assert!((params[0].data()[0] - 3.0).abs() < 0.1, "{:?}", params[0]);
    }

    #[test]
    fn rejects_bad_lr_and_shapes() {
        let mut params = vec![Tensor::scalar(0.0)];
        let mut state = AdamState::new(&params, AdamConfig::default());
        assert!(state
            .step(&mut params, &[Tensor::scalar(1.0)], 0.0)
            .is_err());
        assert!(state
            .step(&mut params, &[Tensor::scalar(1.0)], -1.0)
            .is_err());
        assert!(state
            .step(&mut params, &[Tensor::zeros(&[2])], 0.1)
            .is_err());
        assert_eq!(state.step_count(), 0);
    }
}

//! Adam with bias correction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ParamStore;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates for every parameter of one store.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(params: &ParamStore, config: AdamConfig) -> Self {
        let zeros: Vec<Vec<f64>> = params.iter().map(|p| vec![0.0; p.tensor.numel()]).collect();
        Self {
            config,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one update from the accumulated gradients. Gradients are left
    /// in place; the caller zeroes them.
    pub fn step(&mut self, params: &ParamStore) -> Result<()> {
        if params.len() != self.first.len() {
            return Err(Error::Dimension(format!(
                "optimizer tracks {} parameters but store has {}",
                self.first.len(),
                params.len()
            )));
        }
        for p in params.iter() {
            if p.tensor.grad().is_none() {
                return Err(Error::MissingGradient(p.name.clone()));
            }
        }

        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);

        for ((p, m), v) in params.iter().zip(&mut self.first).zip(&mut self.second) {
            p.tensor.update(|values, grad| {
                for i in 0..values.len() {
                    let g = grad[i];
                    m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                    v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                    let m_hat = m[i] / c1;
                    let v_hat = v[i] / c2;
                    values[i] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
                }
            })?;
        }
        Ok(())
    }
}

/// Convenience wrapper: one Adam update over `params`.
pub fn adam_step(params: &ParamStore, state: &mut AdamState) -> Result<()> {
    state.step(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn single(value: f64) -> (ParamStore, Tensor) {
        let mut store = ParamStore::new();
        let t = store
            .insert("x", Tensor::param(&[1], vec![value]).unwrap())
            .unwrap();
        (store, t)
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let (store, x) = single(0.75);
        let mut state = AdamState::new(&store, AdamConfig::default());
        for _ in 0..3 {
            adam_step(&store, &mut state).unwrap();
        }
        assert_eq!(x.item(), 0.75);
        assert_eq!(state.step_count(), 3);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // t=1: m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
        let (store, x) = single(1.0);
        x.sum().backward().unwrap();
        let mut state = AdamState::new(&store, AdamConfig::default());
        adam_step(&store, &mut state).unwrap();
        let expected = 1.0 - 1e-5 * 1.0 / (1.0 + 1e-8);
        assert!((x.item() - expected).abs() < 1e-15);
        assert_eq!(x.grad().unwrap(), vec![1.0]);
    }

    #[test]
    fn two_steps_decrease_a_quadratic() {
        let (store, x) = single(2.0);
        let loss = |x: &Tensor| x.hadamard(x).unwrap().sum();
        let before = loss(&x).item();
        let mut state = AdamState::new(
            &store,
            AdamConfig {
                learning_rate: 0.1,
                ..AdamConfig::default()
            },
        );
        for _ in 0..2 {
            store.zero_grad();
            loss(&x).backward().unwrap();
            adam_step(&store, &mut state).unwrap();
        }
        assert!(loss(&x).item() < before);
    }

    #[test]
    fn missing_gradient_is_an_error() {
        let mut store = ParamStore::new();
        store
            .insert("frozen", Tensor::new(&[2], vec![1.0, 2.0]).unwrap())
            .unwrap();
        let mut state = AdamState::new(&store, AdamConfig::default());
        assert!(matches!(
            adam_step(&store, &mut state),
            Err(Error::MissingGradient(name)) if name == "frozen"
        ));
        assert_eq!(state.step_count(), 0);
    }
}

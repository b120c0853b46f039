//! Named, ordered parameter storage and seeded initialization.

use std::collections::HashMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// A learnable tensor with a stable, unique name.
#[derive(Clone, Debug)]
pub struct Parameter {
    pub name: String,
    pub tensor: Tensor,
}

/// Insertion-ordered set of parameters. Iteration order is the order in
/// which parameters were registered, which keeps checkpoints and optimizer
/// state aligned across runs.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    params: Vec<Parameter>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers an existing tensor under `name`.
    pub fn insert(&mut self, name: &str, tensor: Tensor) -> Result<Tensor> {
        if self.index.contains_key(name) {
            return Err(Error::Config(format!("duplicate parameter name `{name}`")));
        }
        self.index.insert(name.to_string(), self.params.len());
        self.params.push(Parameter {
            name: name.to_string(),
            tensor: tensor.clone(),
        });
        Ok(tensor)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.index.get(name).map(|&i| &self.params[i].tensor)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter()
    }

    pub fn names(&self) -> Vec<&str> {
        self.params.iter().map(|p| p.name.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalar entries across all parameters.
    pub fn num_values(&self) -> usize {
        self.params.iter().map(|p| p.tensor.numel()).sum()
    }

    pub fn zero_grad(&self) {
        for p in &self.params {
            p.tensor.zero_grad();
        }
    }

    /// Flattened copy of every parameter value, in registration order.
    pub fn snapshot(&self) -> Vec<Vec<f64>> {
        self.params.iter().map(|p| p.tensor.to_vec()).collect()
    }
}

/// Seeded source of initial parameter values.
pub struct Initializer {
    rng: ChaCha8Rng,
}

impl Initializer {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Values uniform in `±1/sqrt(fan_in)`.
    pub fn fan_in(&mut self, shape: &[usize], fan_in: usize) -> Vec<f64> {
        let bound = 1.0 / (fan_in as f64).sqrt();
        self.uniform(shape, bound)
    }

    pub fn uniform(&mut self, shape: &[usize], bound: f64) -> Vec<f64> {
        let n: usize = shape.iter().product();
        (0..n).map(|_| self.rng.gen_range(-bound..=bound)).collect()
    }

    /// Creates a `fan_in`-initialized parameter and registers it.
    pub fn register(
        &mut self,
        store: &mut ParamStore,
        name: &str,
        shape: &[usize],
        fan_in: usize,
    ) -> Result<Tensor> {
        let values = self.fan_in(shape, fan_in);
        store.insert(name, Tensor::param(shape, values)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_names_are_rejected() {
        let mut store = ParamStore::new();
        store
            .insert("w", Tensor::param(&[1], vec![0.0]).unwrap())
            .unwrap();
        assert!(store
            .insert("w", Tensor::param(&[1], vec![0.0]).unwrap())
            .is_err());
        assert_eq!(store.names(), vec!["w"]);
    }

    #[test]
    fn fan_in_bound_and_determinism() {
        let a = Initializer::new(3).fan_in(&[4, 25], 25);
        let b = Initializer::new(3).fan_in(&[4, 25], 25);
        assert_eq!(a, b);
        assert!(a.iter().all(|v| v.abs() <= 0.2));
    }
}

//! Projection, Hadamard fusion and the answer classifier.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{Initializer, ParamStore};
use crate::tensor::Tensor;

/// Affine layer over row vectors: `x W + b`.
#[derive(Clone, Debug)]
pub struct Linear {
    /// `in × out`
    pub weight: Tensor,
    /// `out`
    pub bias: Tensor,
}

impl Linear {
    pub fn init(
        name: &str,
        inputs: usize,
        outputs: usize,
        init: &mut Initializer,
        store: &mut ParamStore,
    ) -> Result<Self> {
        Ok(Self {
            weight: init.register(store, &format!("{name}.w"), &[inputs, outputs], inputs)?,
            bias: init.register(store, &format!("{name}.b"), &[outputs], inputs)?,
        })
    }

    pub fn inputs(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn outputs(&self) -> usize {
        self.weight.shape()[1]
    }

    /// Applies the layer to `[B × in]` rows.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        x.matmul(&self.weight)?.add_row(&self.bias)
    }
}

/// Views a vector as a single row; leaves matrices alone.
pub(crate) fn as_rows(x: &Tensor) -> Result<Tensor> {
    match x.rank() {
        1 => x.reshape(&[1, x.numel()]),
        2 => Ok(x.clone()),
        _ => Err(Error::Rank(format!(
            "expected a vector or matrix, got {:?}",
            x.shape()
        ))),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FusionConfig {
    pub d_q: usize,
    pub d_h: usize,
    pub d_f: usize,
    pub d_mlp: usize,
    pub n_classes: usize,
}

#[derive(Clone, Debug)]
pub struct FusionParams {
    pub f_q: Linear,
    pub f_h: Linear,
    pub hidden: Linear,
    pub output: Linear,
}

impl FusionParams {
    pub fn init(cfg: FusionConfig, init: &mut Initializer, store: &mut ParamStore) -> Result<Self> {
        let FusionConfig {
            d_q,
            d_h,
            d_f,
            d_mlp,
            n_classes,
        } = cfg;
        if [d_q, d_h, d_f, d_mlp, n_classes].contains(&0) {
            return Err(Error::Config(format!(
                "fusion sizes must be positive: {cfg:?}"
            )));
        }
        Ok(Self {
            f_q: Linear::init("fusion.f_q", d_q, d_f, init, store)?,
            f_h: Linear::init("fusion.f_h", d_h, d_f, init, store)?,
            hidden: Linear::init("classifier.hidden", d_f, d_mlp, init, store)?,
            output: Linear::init("classifier.output", d_mlp, n_classes, init, store)?,
        })
    }
}

/// `F_Q(q*)` and `F_H(h*)`, each `[B × d_f]`.
pub fn project(
    q_star: &Tensor,
    h_star: &Tensor,
    params: &FusionParams,
) -> Result<(Tensor, Tensor)> {
    let fq = params.f_q.forward(&as_rows(q_star)?)?;
    let fh = params.f_h.forward(&as_rows(h_star)?)?;
    Ok((fq, fh))
}

/// `F_Q(q*) ⊙ F_H(h*)`. Vector inputs give a `[1 × d_f]` row.
pub fn fuse(q_star: &Tensor, h_star: &Tensor, params: &FusionParams) -> Result<Tensor> {
    let (fq, fh) = project(q_star, h_star, params)?;
    fq.hadamard(&fh)
}

/// Two-layer MLP logits, no softmax.
pub fn classify(fused: &Tensor, params: &FusionParams) -> Result<Tensor> {
    let hidden = params.hidden.forward(&as_rows(fused)?)?.relu();
    params.output.forward(&hidden)
}

/// Mean categorical cross-entropy over the batch.
pub fn cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<Tensor> {
    as_rows(logits)?.cross_entropy(labels)
}

/// Index of the largest logit; ties go to the lowest index.
pub fn predict(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate() {
        if v > logits[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{grad_check, DEFAULT_EPS};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const CFG: FusionConfig = FusionConfig {
        d_q: 3,
        d_h: 4,
        d_f: 5,
        d_mlp: 6,
        n_classes: 4,
    };

    fn setup(seed: u64) -> (FusionParams, ParamStore) {
        let mut store = ParamStore::new();
        let p = FusionParams::init(CFG, &mut Initializer::new(seed), &mut store).unwrap();
        (p, store)
    }

    fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    /// Row vector times `in × out` matrix plus bias, spelled out.
    fn affine(x: &[f64], w: &[f64], b: &[f64]) -> Vec<f64> {
        let out = b.len();
        (0..out)
            .map(|j| {
                b[j] + x
                    .iter()
                    .enumerate()
                    .map(|(i, xi)| xi * w[i * out + j])
                    .sum::<f64>()
            })
            .collect()
    }

    #[test]
    fn fuse_matches_direct_evaluation() {
        let (p, _) = setup(1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let q = rand_vec(&mut rng, 3);
        let h = rand_vec(&mut rng, 4);
        let got = fuse(
            &Tensor::vector(q.clone()).unwrap(),
            &Tensor::vector(h.clone()).unwrap(),
            &p,
        )
        .unwrap()
        .to_vec();
        let a = affine(&q, &p.f_q.weight.to_vec(), &p.f_q.bias.to_vec());
        let b = affine(&h, &p.f_h.weight.to_vec(), &p.f_h.bias.to_vec());
        for (g, (x, y)) in got.iter().zip(a.iter().zip(&b)) {
            assert!((g - x * y).abs() < 1e-14);
        }
    }

    #[test]
    fn fuse_identity_and_annihilation() {
        let (p, _) = setup(2);
        let q = Tensor::vector(vec![0.2, -0.4, 0.6]).unwrap();
        let h = Tensor::vector(vec![0.1; 4]).unwrap();
        p.f_h.weight.set_values(&[0.0; 20]).unwrap();
        p.f_h.bias.set_values(&[1.0; 5]).unwrap();
        let fq = p.f_q.forward(&as_rows(&q).unwrap()).unwrap().to_vec();
        assert_eq!(fuse(&q, &h, &p).unwrap().to_vec(), fq);
        p.f_h.bias.set_values(&[0.0; 5]).unwrap();
        assert!(fuse(&q, &h, &p).unwrap().to_vec().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fuse_is_linear_in_query_without_bias() {
        let (p, _) = setup(3);
        p.f_q.bias.set_values(&[0.0; 5]).unwrap();
        let q = vec![0.5, -0.3, 0.8];
        let h = Tensor::vector(vec![0.4, 0.1, -0.7, 0.2]).unwrap();
        let base = fuse(&Tensor::vector(q.clone()).unwrap(), &h, &p)
            .unwrap()
            .to_vec();
        let scaled: Vec<f64> = q.iter().map(|v| v * 2.5).collect();
        let out = fuse(&Tensor::vector(scaled).unwrap(), &h, &p)
            .unwrap()
            .to_vec();
        for (a, b) in base.iter().zip(&out) {
            assert!((a * 2.5 - b).abs() < 1e-14);
        }
    }

    #[test]
    fn width_mismatch_is_dimension_error() {
        let (p, _) = setup(4);
        let q = Tensor::vector(vec![0.0; 2]).unwrap();
        let h = Tensor::vector(vec![0.0; 4]).unwrap();
        assert!(matches!(fuse(&q, &h, &p), Err(Error::Dimension(_))));
    }

    #[test]
    fn zero_weights_give_output_bias() {
        let (p, _) = setup(5);
        p.output.weight.set_values(&[0.0; 24]).unwrap();
        let logits = classify(&Tensor::vector(vec![1.0; 5]).unwrap(), &p).unwrap();
        assert_eq!(logits.to_vec(), p.output.bias.to_vec());
    }

    #[test]
    fn classify_matches_unrolled_mlp() {
        let (p, _) = setup(6);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = rand_vec(&mut rng, 5);
        let hidden: Vec<f64> = affine(&x, &p.hidden.weight.to_vec(), &p.hidden.bias.to_vec())
            .into_iter()
            .map(|v| v.max(0.0))
            .collect();
        let expected = affine(&hidden, &p.output.weight.to_vec(), &p.output.bias.to_vec());
        let got = classify(&Tensor::vector(x).unwrap(), &p).unwrap().to_vec();
        for (g, e) in got.iter().zip(&expected) {
            assert!((g - e).abs() < 1e-14);
        }
    }

    #[test]
    fn predict_rules() {
        assert_eq!(predict(&[0.1, 0.9, 0.2]), 1);
        assert_eq!(predict(&[0.3, 0.3, 0.3]), 0);
        let shifted: Vec<f64> = [0.1, 0.9, 0.2].iter().map(|v| v + 17.0).collect();
        assert_eq!(predict(&shifted), 1);
    }

    #[test]
    fn output_bias_shift_keeps_argmax() {
        let (p, _) = setup(9);
        let x = Tensor::vector(vec![0.3, -0.1, 0.5, 0.2, -0.6]).unwrap();
        let before = predict(&classify(&x, &p).unwrap().to_vec());
        let shifted: Vec<f64> = p.output.bias.to_vec().iter().map(|b| b + 3.0).collect();
        p.output.bias.set_values(&shifted).unwrap();
        assert_eq!(predict(&classify(&x, &p).unwrap().to_vec()), before);
    }

    #[test]
    fn cross_entropy_gradient_at_uniform_logits() {
        let mut store = ParamStore::new();
        let logits = store
            .insert("z", Tensor::param(&[3, 4], vec![0.0; 12]).unwrap())
            .unwrap();
        let labels = [0, 2, 3];
        let loss = cross_entropy(&logits, &labels).unwrap();
        assert!((loss.item() - 4f64.ln()).abs() < 1e-12);
        loss.backward().unwrap();
        let g = logits.grad().unwrap();
        for i in 0..3 {
            for c in 0..4 {
                let onehot = if labels[i] == c { 1.0 } else { 0.0 };
                assert!((g[i * 4 + c] - (0.25 - onehot) / 3.0).abs() < 1e-15);
            }
        }
        let err = grad_check(
            |s| cross_entropy(s.get("z").unwrap(), &labels),
            &store,
            DEFAULT_EPS,
        )
        .unwrap();
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn pipeline_gradients_match_finite_differences() {
        let (p, store) = setup(7);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let q = Tensor::new(&[2, 3], rand_vec(&mut rng, 6)).unwrap();
        let h = Tensor::new(&[2, 4], rand_vec(&mut rng, 8)).unwrap();
        let err = grad_check(
            |_| cross_entropy(&classify(&fuse(&q, &h, &p)?, &p)?, &[1, 3]),
            &store,
            DEFAULT_EPS,
        )
        .unwrap();
        assert!(err < 1e-6, "{err}");
    }
}

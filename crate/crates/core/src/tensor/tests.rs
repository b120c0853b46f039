use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::gradcheck::{grad_check, DEFAULT_EPS};
use crate::params::ParamStore;

fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

#[test]
fn matmul_identity_and_hand_product() {
    let eye = Tensor::matrix(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let a = Tensor::matrix(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
    let b = Tensor::matrix(&[vec![5.0, 6.0], vec![7.0, 8.0]]).unwrap();
    assert_eq!(eye.matmul(&a).unwrap().to_vec(), vec![1.0, 2.0, 3.0, 4.0]);
    assert_eq!(a.matmul(&b).unwrap().to_vec(), vec![19.0, 22.0, 43.0, 50.0]);
}

#[test]
fn matmul_shape_error_names_both_shapes() {
    let a = Tensor::zeros(&[2, 3]);
    let b = Tensor::zeros(&[2, 3]);
    let msg = a.matmul(&b).unwrap_err().to_string();
    assert!(msg.contains("[2, 3]") && msg.contains("dimension"), "{msg}");
}

#[test]
fn matmul_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut store = ParamStore::new();
    store
        .insert("a", Tensor::param(&[3, 4], rand_vec(&mut rng, 12)).unwrap())
        .unwrap();
    let b = Tensor::new(&[4, 2], rand_vec(&mut rng, 8)).unwrap();
    let err = grad_check(
        |s| Ok(s.get("a").unwrap().matmul(&b)?.sum()),
        &store,
        DEFAULT_EPS,
    )
    .unwrap();
    assert!(err < 1e-6, "{err}");
}

#[test]
fn hadamard_examples() {
    let a = Tensor::vector(vec![1.0, 2.0, 3.0]).unwrap();
    let ones = Tensor::vector(vec![1.0; 3]).unwrap();
    let b = Tensor::vector(vec![4.0, 5.0, 6.0]).unwrap();
    assert_eq!(a.hadamard(&ones).unwrap().to_vec(), vec![1.0, 2.0, 3.0]);
    assert_eq!(a.hadamard(&b).unwrap().to_vec(), vec![4.0, 10.0, 18.0]);
    assert!(matches!(
        a.hadamard(&Tensor::zeros(&[2])),
        Err(Error::Dimension(_))
    ));
}

#[test]
fn relu_examples() {
    let x = Tensor::param(&[3], vec![-1.0, 0.0, 2.0]).unwrap();
    let y = x.relu();
    assert_eq!(y.to_vec(), vec![0.0, 0.0, 2.0]);
    y.sum().backward().unwrap();
    // Subgradient at exactly zero is zero.
    assert_eq!(x.grad().unwrap(), vec![0.0, 0.0, 1.0]);

    let neg = Tensor::param(&[4], vec![-0.5, -1.0, -2.0, -3.0]).unwrap();
    let out = neg.relu();
    assert!(out.to_vec().iter().all(|&v| v == 0.0));
    out.sum().backward().unwrap();
    assert_eq!(neg.grad().unwrap(), vec![0.0; 4]);
}

#[test]
fn softmax_examples() {
    let c = Tensor::vector(vec![0.3, 0.3])
        .unwrap()
        .softmax(None)
        .unwrap();
    assert_eq!(c.to_vec(), vec![0.5, 0.5]);
    let s = Tensor::vector(vec![0.0, 3f64.ln()])
        .unwrap()
        .softmax(None)
        .unwrap()
        .to_vec();
    assert!((s[0] - 0.25).abs() < 1e-15 && (s[1] - 0.75).abs() < 1e-15);
    let big = Tensor::vector(vec![1000.0, 1000.0])
        .unwrap()
        .softmax(None)
        .unwrap();
    assert_eq!(big.to_vec(), vec![0.5, 0.5]);
}

#[test]
fn softmax_mask_zeroes_entries_and_gradient() {
    let x = Tensor::param(&[4], vec![0.1, 5.0, -0.4, 0.9]).unwrap();
    let mask = [true, false, true, true];
    let y = x.softmax(Some(&mask)).unwrap();
    let v = y.to_vec();
    assert_eq!(v[1], 0.0);
    assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let w = Tensor::vector(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    y.hadamard(&w).unwrap().sum().backward().unwrap();
    assert_eq!(x.grad().unwrap()[1], 0.0);

    let err = x.softmax(Some(&[false; 4])).unwrap_err();
    assert!(matches!(err, Error::InvalidMask));
}

#[test]
fn backward_examples() {
    let x = Tensor::param(&[2, 2], vec![1.5, -2.0, 0.25, 4.0]).unwrap();
    x.sum().backward().unwrap();
    assert_eq!(x.grad().unwrap(), vec![1.0; 4]);

    let x = Tensor::param(&[3], vec![1.5, -2.0, 0.25]).unwrap();
    x.hadamard(&x).unwrap().sum().backward().unwrap();
    assert_eq!(x.grad().unwrap(), vec![3.0, -4.0, 0.5]);
}

#[test]
fn backward_requires_scalar() {
    let x = Tensor::param(&[2], vec![1.0, 2.0]).unwrap();
    assert!(matches!(x.relu().backward(), Err(Error::Rank(_))));
}

#[test]
fn repeated_backward_accumulates() {
    let x = Tensor::param(&[2], vec![1.0, -3.0]).unwrap();
    let loss = x.hadamard(&x).unwrap().sum();
    loss.backward().unwrap();
    loss.backward().unwrap();
    assert_eq!(x.grad().unwrap(), vec![4.0, -12.0]);
    x.zero_grad();
    assert_eq!(x.grad().unwrap(), vec![0.0, 0.0]);
}

#[test]
fn shared_use_sums_path_gradients() {
    // f = sum(tanh(x) ⊙ x) + sum(3x), rewritten with each use spelled out once:
    // df/dx = (1 - tanh²x)·x + tanh x + 3.
    let vals = vec![0.2, -0.9, 1.4];
    let x = Tensor::param(&[3], vals.clone()).unwrap();
    let loss = x
        .tanh()
        .hadamard(&x)
        .unwrap()
        .sum()
        .add(&x.scale(3.0).sum())
        .unwrap();
    loss.backward().unwrap();
    let expected: Vec<f64> = vals
        .iter()
        .map(|&v| (1.0 - v.tanh().powi(2)) * v + v.tanh() + 3.0)
        .collect();
    for (g, e) in x.grad().unwrap().iter().zip(&expected) {
        assert!((g - e).abs() < 1e-14);
    }
}

#[test]
fn cross_entropy_uniform_is_ln_classes() {
    let logits = Tensor::param(&[2, 4], vec![0.7; 8]).unwrap();
    let loss = logits.cross_entropy(&[0, 3]).unwrap();
    assert!((loss.item() - 4f64.ln()).abs() < 1e-12);
    loss.backward().unwrap();
    let g = logits.grad().unwrap();
    assert!((g[0] - (0.25 - 1.0) / 2.0).abs() < 1e-15);
    assert!((g[1] - 0.25 / 2.0).abs() < 1e-15);
    assert!(matches!(
        logits.cross_entropy(&[0, 4]),
        Err(Error::Label {
            label: 4,
            n_classes: 4
        })
    ));
}

#[test]
fn cross_entropy_confident_limit() {
    let logits = Tensor::matrix(&[vec![1000.0, 0.0, 0.0]]).unwrap();
    assert!(logits.cross_entropy(&[0]).unwrap().item() < 1e-300);
}

#[test]
fn gather_rejects_out_of_range_ids() {
    let table = Tensor::zeros(&[5, 2]);
    assert!(matches!(
        table.gather_rows(&[1, 5]),
        Err(Error::Vocabulary {
            id: 5,
            vocab_size: 5
        })
    ));
}

#[test]
fn structural_ops_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut store = ParamStore::new();
    store
        .insert("t", Tensor::param(&[6, 3], rand_vec(&mut rng, 18)).unwrap())
        .unwrap();
    let w = Tensor::new(&[3, 6], rand_vec(&mut rng, 18)).unwrap();
    let err = grad_check(
        |s| {
            let t = s.get("t").unwrap();
            let g = t.gather_rows(&[4, 0, 4])?;
            let sl = t.slice_rows(1, 2)?;
            let stacked = Tensor::concat_rows(&[g, sl])?;
            let tt = stacked.transpose()?.reshape(&[1, 15])?.reshape(&[5, 3])?;
            Ok(tt.matmul(&w)?.tanh().sum())
        },
        &store,
        DEFAULT_EPS,
    )
    .unwrap();
    assert!(err < 1e-6, "{err}");
}

#[test]
fn deterministic_repeated_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let a = Tensor::new(&[5, 7], rand_vec(&mut rng, 35)).unwrap();
    let b = Tensor::new(&[7, 3], rand_vec(&mut rng, 21)).unwrap();
    let run = || {
        a.matmul(&b)
            .unwrap()
            .tanh()
            .reshape(&[15])
            .unwrap()
            .softmax(None)
            .unwrap()
            .to_vec()
    };
    let first = run();
    let second = run();
    assert!(first
        .iter()
        .zip(&second)
        .all(|(x, y)| x.to_bits() == y.to_bits()));
}

proptest! {
    #[test]
    fn softmax_sums_to_one_and_is_shift_invariant(
        logits in prop::collection::vec(-50.0f64..50.0, 1..12),
        shift in -100.0f64..100.0,
    ) {
        let base = Tensor::vector(logits.clone()).unwrap().softmax(None).unwrap().to_vec();
        let shifted: Vec<f64> = logits.iter().map(|v| v + shift).collect();
        let moved = Tensor::vector(shifted).unwrap().softmax(None).unwrap().to_vec();
        prop_assert!((base.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for (a, b) in base.iter().zip(&moved) {
            prop_assert!((a - b).abs() < 1e-9);
            prop_assert!(*a >= 0.0);
        }
    }

    #[test]
    fn hadamard_commutes(
        pair in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..20)
    ) {
        let (a, b): (Vec<f64>, Vec<f64>) = pair.into_iter().unzip();
        let ta = Tensor::vector(a).unwrap();
        let tb = Tensor::vector(b).unwrap();
        prop_assert_eq!(ta.hadamard(&tb).unwrap().to_vec(), tb.hadamard(&ta).unwrap().to_vec());
    }
}

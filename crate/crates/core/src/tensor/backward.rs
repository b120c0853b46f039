use std::collections::{HashMap, HashSet};

use super::ops::{gemm, sigmoid};
use super::{Op, Tensor};
use crate::error::{Error, Result};

fn accumulate(grads: &mut HashMap<usize, Vec<f64>>, t: &Tensor, delta: Vec<f64>) {
    if !t.requires_grad() {
        return;
    }
    match grads.get_mut(&t.0.id) {
        Some(g) => g.iter_mut().zip(&delta).for_each(|(a, b)| *a += b),
        None => {
            grads.insert(t.0.id, delta);
        }
    }
}

fn zip_map(g: &[f64], x: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    g.iter().zip(x).map(|(&g, &x)| f(g, x)).collect()
}

fn transpose(src: &[f64], m: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = src[i * n + j];
        }
    }
    out
}

impl Tensor {
    /// Reverse-mode pass from a rank-0 loss.
    ///
    /// Gradients are added to whatever each tensor already holds, so calling
    /// this twice without [`Tensor::zero_grad`] doubles them.
    pub fn backward(&self) -> Result<()> {
        if self.rank() != 0 {
            return Err(Error::Rank(format!(
                "backward needs a rank-0 loss, got shape {:?}",
                self.shape()
            )));
        }
        if !self.requires_grad() {
            return Ok(());
        }

        let mut order = Vec::new();
        let mut seen = HashSet::new();
        let mut stack = vec![self.clone()];
        while let Some(t) = stack.pop() {
            if !seen.insert(t.0.id) {
                continue;
            }
            for input in t.0.op.inputs() {
                if input.requires_grad() && !seen.contains(&input.0.id) {
                    stack.push(input.clone());
                }
            }
            order.push(t);
        }
        order.sort_by_key(|n| std::cmp::Reverse(n.0.id));

        let mut grads: HashMap<usize, Vec<f64>> = HashMap::new();
        grads.insert(self.0.id, vec![1.0]);

        for node in &order {
            let Some(g) = grads.remove(&node.0.id) else {
                continue;
            };
            node.propagate(&g, &mut grads);
            if let Some(stored) = node.0.grad.borrow_mut().as_mut() {
                stored.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
                continue;
            }
            *node.0.grad.borrow_mut() = Some(g);
        }
        Ok(())
    }

    fn propagate(&self, g: &[f64], grads: &mut HashMap<usize, Vec<f64>>) {
        let out = self.values();
        match &self.0.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
                if a.requires_grad() {
                    let bt = transpose(&b.values(), k, n);
                    let mut da = vec![0.0; m * k];
                    gemm(g, &bt, &mut da, m, n, k);
                    accumulate(grads, a, da);
                }
                if b.requires_grad() {
                    let at = transpose(&a.values(), m, k);
                    let mut db = vec![0.0; k * n];
                    gemm(&at, g, &mut db, k, m, n);
                    accumulate(grads, b, db);
                }
            }
            Op::Hadamard(a, b) => {
                if a.requires_grad() {
                    let d = zip_map(g, &b.values(), |g, y| g * y);
                    accumulate(grads, a, d);
                }
                if b.requires_grad() {
                    let d = zip_map(g, &a.values(), |g, x| g * x);
                    accumulate(grads, b, d);
                }
            }
            Op::Add(a, b) => {
                accumulate(grads, a, g.to_vec());
                accumulate(grads, b, g.to_vec());
            }
            Op::Sub(a, b) => {
                accumulate(grads, a, g.to_vec());
                accumulate(grads, b, g.iter().map(|v| -v).collect());
            }
            Op::AddRow(x, bias) => {
                accumulate(grads, x, g.to_vec());
                if bias.requires_grad() {
                    let n = bias.numel();
                    let mut db = vec![0.0; n];
                    for row in g.chunks(n) {
                        db.iter_mut().zip(row).for_each(|(a, b)| *a += b);
                    }
                    accumulate(grads, bias, db);
                }
            }
            Op::Scale(x, c) => accumulate(grads, x, g.iter().map(|v| v * c).collect()),
            Op::Relu(x) => {
                let d = zip_map(g, &x.values(), |g, v| if v > 0.0 { g } else { 0.0 });
                accumulate(grads, x, d);
            }
            Op::Tanh(x) => {
                let d = g.iter().zip(out.iter()).map(|(g, y)| g * (1.0 - y * y));
                accumulate(grads, x, d.collect());
            }
            Op::Exp(x) => {
                let d = g.iter().zip(out.iter()).map(|(g, y)| g * y);
                accumulate(grads, x, d.collect());
            }
            Op::Softplus(x) => {
                let d = zip_map(g, &x.values(), |g, v| g * sigmoid(v));
                accumulate(grads, x, d);
            }
            Op::Clamp(x, lo, hi) => {
                let d = zip_map(
                    g,
                    &x.values(),
                    |g, v| {
                        if v > *lo && v < *hi {
                            g
                        } else {
                            0.0
                        }
                    },
                );
                accumulate(grads, x, d);
            }
            Op::Sum(x) => accumulate(grads, x, vec![g[0]; x.numel()]),
            Op::Reshape(x) => accumulate(grads, x, g.to_vec()),
            Op::Transpose(x) => {
                let (m, n) = (x.shape()[0], x.shape()[1]);
                accumulate(grads, x, transpose(g, n, m));
            }
            Op::Softmax(x) => {
                let dot: f64 = g.iter().zip(out.iter()).map(|(g, y)| g * y).sum();
                let d = g.iter().zip(out.iter()).map(|(g, y)| y * (g - dot));
                accumulate(grads, x, d.collect());
            }
            Op::CrossEntropy {
                logits,
                labels,
                probs,
            } => {
                let c = logits.shape()[1];
                let scale = g[0] / labels.len() as f64;
                let mut d: Vec<f64> = probs.iter().map(|p| p * scale).collect();
                for (i, &l) in labels.iter().enumerate() {
                    d[i * c + l] -= scale;
                }
                accumulate(grads, logits, d);
            }
            Op::GatherRows { table, ids } => {
                let d = table.shape()[1];
                let mut dt = vec![0.0; table.numel()];
                for (row, &i) in g.chunks(d).zip(ids) {
                    dt[i * d..(i + 1) * d]
                        .iter_mut()
                        .zip(row)
                        .for_each(|(a, b)| *a += b);
                }
                accumulate(grads, table, dt);
            }
            Op::SliceRows { input, start } => {
                let d = input.shape()[1];
                let mut di = vec![0.0; input.numel()];
                di[start * d..start * d + g.len()].copy_from_slice(g);
                accumulate(grads, input, di);
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for p in parts {
                    let n = p.numel();
                    accumulate(grads, p, g[offset..offset + n].to_vec());
                    offset += n;
                }
            }
        }
    }
}

use super::{Op, Tensor};
use crate::error::{Error, Result};

/// Logit offset applied to masked softmax entries.
pub const MASK_LOGIT: f64 = -1e30;

fn shape_mismatch(op: &str, a: &Tensor, b: &Tensor) -> Error {
    Error::Dimension(format!(
        "{op}: incompatible shapes {:?} and {:?}",
        a.shape(),
        b.shape()
    ))
}

fn map_unary(x: &Tensor, f: impl Fn(f64) -> f64, op: Op) -> Tensor {
    let data = x.values().iter().map(|&v| f(v)).collect();
    Tensor::from_op(x.shape().to_vec(), data, op)
}

/// `out[m×n] += a[m×k] · b[k×n]`
pub(crate) fn gemm(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

impl Tensor {
    /// Matrix product of two rank-2 tensors.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        let (sa, sb) = (self.shape(), other.shape());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(shape_mismatch("matmul", self, other));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * n];
        gemm(&self.values(), &other.values(), &mut out, m, k, n);
        Ok(Tensor::from_op(
            vec![m, n],
            out,
            Op::MatMul(self.clone(), other.clone()),
        ))
    }

    /// Elementwise product of equal-shape tensors.
    pub fn hadamard(&self, other: &Tensor) -> Result<Tensor> {
        if self.shape() != other.shape() {
            return Err(shape_mismatch("hadamard", self, other));
        }
        let data = self
            .values()
            .iter()
            .zip(other.values().iter())
            .map(|(a, b)| a * b)
            .collect();
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            data,
            Op::Hadamard(self.clone(), other.clone()),
        ))
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        if self.shape() != other.shape() {
            return Err(shape_mismatch("add", self, other));
        }
        let data = self
            .values()
            .iter()
            .zip(other.values().iter())
            .map(|(a, b)| a + b)
            .collect();
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            data,
            Op::Add(self.clone(), other.clone()),
        ))
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        if self.shape() != other.shape() {
            return Err(shape_mismatch("sub", self, other));
        }
        let data = self
            .values()
            .iter()
            .zip(other.values().iter())
            .map(|(a, b)| a - b)
            .collect();
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            data,
            Op::Sub(self.clone(), other.clone()),
        ))
    }

    /// Adds the vector `bias[n]` to every row of `self[m×n]`.
    pub fn add_row(&self, bias: &Tensor) -> Result<Tensor> {
        let (sx, sb) = (self.shape(), bias.shape());
        if sx.len() != 2 || sb.len() != 1 || sx[1] != sb[0] {
            return Err(shape_mismatch("add_row", self, bias));
        }
        let n = sx[1];
        let b = bias.values();
        let data = self
            .values()
            .iter()
            .enumerate()
            .map(|(i, v)| v + b[i % n])
            .collect();
        drop(b);
        Ok(Tensor::from_op(
            sx.to_vec(),
            data,
            Op::AddRow(self.clone(), bias.clone()),
        ))
    }

    /// Multiplies every element by a constant.
    pub fn scale(&self, factor: f64) -> Tensor {
        map_unary(self, |v| v * factor, Op::Scale(self.clone(), factor))
    }

    /// `max(0, x)`; the subgradient at exactly zero is zero.
    pub fn relu(&self) -> Tensor {
        map_unary(
            self,
            |v| if v > 0.0 { v } else { 0.0 },
            Op::Relu(self.clone()),
        )
    }

    pub fn tanh(&self) -> Tensor {
        map_unary(self, f64::tanh, Op::Tanh(self.clone()))
    }

    pub fn exp(&self) -> Tensor {
        map_unary(self, f64::exp, Op::Exp(self.clone()))
    }

    /// `ln(1 + e^x)`, evaluated without overflow.
    pub fn softplus(&self) -> Tensor {
        map_unary(self, softplus, Op::Softplus(self.clone()))
    }

    /// Clamps into `[lo, hi]`; gradient is zero outside the open interval.
    pub fn clamp(&self, lo: f64, hi: f64) -> Tensor {
        map_unary(self, |v| v.clamp(lo, hi), Op::Clamp(self.clone(), lo, hi))
    }

    /// Sum of all elements as a rank-0 tensor.
    pub fn sum(&self) -> Tensor {
        let s = self.values().iter().sum();
        Tensor::from_op(Vec::new(), vec![s], Op::Sum(self.clone()))
    }

    pub fn mean(&self) -> Tensor {
        let n = self.numel() as f64;
        self.sum().scale(1.0 / n)
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        let numel: usize = shape.iter().product();
        if numel != self.numel() {
            return Err(Error::Dimension(format!(
                "reshape: cannot view {:?} as {:?}",
                self.shape(),
                shape
            )));
        }
        Ok(Tensor::from_op(
            shape.to_vec(),
            self.to_vec(),
            Op::Reshape(self.clone()),
        ))
    }

    pub fn transpose(&self) -> Result<Tensor> {
        let s = self.shape();
        if s.len() != 2 {
            return Err(Error::Rank(format!("transpose needs rank 2, got {s:?}")));
        }
        let (m, n) = (s[0], s[1]);
        let src = self.values();
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = src[i * n + j];
            }
        }
        drop(src);
        Ok(Tensor::from_op(
            vec![n, m],
            out,
            Op::Transpose(self.clone()),
        ))
    }

    /// Softmax over a rank-1 tensor. Entries where `mask` is false get
    /// [`MASK_LOGIT`] added before normalization and come out exactly zero.
    pub fn softmax(&self, mask: Option<&[bool]>) -> Result<Tensor> {
        if self.rank() != 1 {
            return Err(Error::Rank(format!(
                "softmax needs rank 1, got {:?}",
                self.shape()
            )));
        }
        let n = self.shape()[0];
        let mut logits = self.to_vec();
        if let Some(mask) = mask {
            if mask.len() != n {
                return Err(Error::Dimension(format!(
                    "softmax mask has length {} for {n} logits",
                    mask.len()
                )));
            }
            if !mask.iter().any(|&m| m) {
                return Err(Error::InvalidMask);
            }
            for (l, &keep) in logits.iter_mut().zip(mask) {
                if !keep {
                    *l += MASK_LOGIT;
                }
            }
        }
        Ok(Tensor::from_op(
            vec![n],
            softmax_in_place(logits),
            Op::Softmax(self.clone()),
        ))
    }

    /// Mean over rows of `-log softmax(logits[i])[labels[i]]` for `logits[B×C]`.
    pub fn cross_entropy(&self, labels: &[usize]) -> Result<Tensor> {
        let s = self.shape();
        if s.len() != 2 {
            return Err(Error::Rank(format!(
                "cross_entropy needs [batch, classes] logits, got {s:?}"
            )));
        }
        let (b, c) = (s[0], s[1]);
        if labels.len() != b {
            return Err(Error::Dimension(format!(
                "cross_entropy: {} labels for batch of {b}",
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
            return Err(Error::Label {
                label: bad,
                n_classes: c,
            });
        }
        let logits = self.values();
        let mut probs = Vec::with_capacity(b * c);
        let mut total = 0.0;
        for (row, &label) in logits.chunks(c).zip(labels) {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            total += lse - row[label];
            probs.extend(row.iter().map(|v| (v - lse).exp()));
        }
        drop(logits);
        Ok(Tensor::from_op(
            Vec::new(),
            vec![total / b as f64],
            Op::CrossEntropy {
                logits: self.clone(),
                labels: labels.to_vec(),
                probs,
            },
        ))
    }

    /// Selects rows of a rank-2 lookup table; used for token embeddings.
    pub fn gather_rows(&self, ids: &[usize]) -> Result<Tensor> {
        let s = self.shape();
        if s.len() != 2 {
            return Err(Error::Rank(format!("gather_rows needs rank 2, got {s:?}")));
        }
        let (rows, d) = (s[0], s[1]);
        if let Some(&bad) = ids.iter().find(|&&i| i >= rows) {
            return Err(Error::Vocabulary {
                id: bad,
                vocab_size: rows,
            });
        }
        if ids.is_empty() {
            return Err(Error::Dimension("gather_rows with no ids".into()));
        }
        let table = self.values();
        let mut out = Vec::with_capacity(ids.len() * d);
        for &i in ids {
            out.extend_from_slice(&table[i * d..(i + 1) * d]);
        }
        drop(table);
        Ok(Tensor::from_op(
            vec![ids.len(), d],
            out,
            Op::GatherRows {
                table: self.clone(),
                ids: ids.to_vec(),
            },
        ))
    }

    /// Rows `start..start+len` of a rank-2 tensor.
    pub fn slice_rows(&self, start: usize, len: usize) -> Result<Tensor> {
        let s = self.shape();
        if s.len() != 2 || len == 0 || start + len > s[0] {
            return Err(Error::Dimension(format!(
                "slice_rows {start}..{} out of range for {s:?}",
                start + len
            )));
        }
        let d = s[1];
        let out = self.values()[start * d..(start + len) * d].to_vec();
        Ok(Tensor::from_op(
            vec![len, d],
            out,
            Op::SliceRows {
                input: self.clone(),
                start,
            },
        ))
    }

    /// Stacks rank-2 tensors with equal column counts vertically.
    pub fn concat_rows(parts: &[Tensor]) -> Result<Tensor> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Dimension("concat_rows of nothing".into()))?;
        if first.rank() != 2 {
            return Err(Error::Rank(format!(
                "concat_rows needs rank 2, got {:?}",
                first.shape()
            )));
        }
        let d = first.shape()[1];
        let mut rows = 0;
        let mut out = Vec::new();
        for p in parts {
            if p.rank() != 2 || p.shape()[1] != d {
                return Err(shape_mismatch("concat_rows", first, p));
            }
            rows += p.shape()[0];
            out.extend_from_slice(&p.values());
        }
        Ok(Tensor::from_op(
            vec![rows, d],
            out,
            Op::ConcatRows(parts.to_vec()),
        ))
    }
}

pub(crate) fn softplus(v: f64) -> f64 {
    if v > 30.0 {
        v + (-v).exp().ln_1p()
    } else {
        v.exp().ln_1p()
    }
}

pub(crate) fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

fn softmax_in_place(mut logits: Vec<f64>) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for l in logits.iter_mut() {
        *l = (*l - max).exp();
        total += *l;
    }
    for l in logits.iter_mut() {
        *l /= total;
    }
    logits
}

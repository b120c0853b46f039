//! Question self-attention and question-conditioned image attention.
//!
//! All embeddings are row vectors, so every weight is applied on the right:
//!
//! ```text
//! a^q_k = relu(q_k W_aq) J_aq            α^q = softmax(a^q)     q* = Σ_k α^q_k q_k
//! h'_t  = (h_t W_h) ⊙ (q* W_q*)
//! a^h_t = relu(h'_t W_ah) J_ah           α^h = softmax(a^h)     h* = Σ_t α^h_t h_t
//! ```
//!
//! `h*` pools the original object rows `h_t`, not the fused `h'_t`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{Initializer, ParamStore};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttentionConfig {
    pub d_q: usize,
    pub d_h: usize,
    pub d_ff: usize,
    pub d_p: usize,
}

#[derive(Clone, Debug)]
pub struct AttentionParams {
    /// `d_q × d_ff`
    pub w_aq: Tensor,
    /// `d_ff × 1`
    pub j_aq: Tensor,
    /// `d_h × d_p`
    pub w_h: Tensor,
    /// `d_q × d_p`
    pub w_qstar: Tensor,
    /// `d_p × d_ff`
    pub w_ah: Tensor,
    /// `d_ff × 1`
    pub j_ah: Tensor,
}

impl AttentionParams {
    pub fn init(
        cfg: AttentionConfig,
        init: &mut Initializer,
        store: &mut ParamStore,
    ) -> Result<Self> {
        let AttentionConfig {
            d_q,
            d_h,
            d_ff,
            d_p,
        } = cfg;
        if [d_q, d_h, d_ff, d_p].contains(&0) {
            return Err(Error::Config(format!(
                "attention sizes must be positive: {cfg:?}"
            )));
        }
        Ok(Self {
            w_aq: init.register(store, "attention.query.w_a", &[d_q, d_ff], d_q)?,
            j_aq: init.register(store, "attention.query.j_a", &[d_ff, 1], d_ff)?,
            w_h: init.register(store, "attention.image.w_h", &[d_h, d_p], d_h)?,
            w_qstar: init.register(store, "attention.image.w_qstar", &[d_q, d_p], d_q)?,
            w_ah: init.register(store, "attention.image.w_a", &[d_p, d_ff], d_p)?,
            j_ah: init.register(store, "attention.image.j_a", &[d_ff, 1], d_ff)?,
        })
    }
}

/// Normalized weights over rows and the weighted sum of those rows.
#[derive(Clone, Debug)]
pub struct AttentionResult {
    /// `[n]`, zero at masked positions.
    pub weights: Tensor,
    /// `[d]`
    pub pooled: Tensor,
}

impl AttentionResult {
    pub fn weights_vec(&self) -> Vec<f64> {
        self.weights.to_vec()
    }
}

fn pool(weights: Tensor, rows: &Tensor) -> Result<AttentionResult> {
    let n = weights.numel();
    let d = rows.shape()[1];
    let pooled = weights.reshape(&[1, n])?.matmul(rows)?.reshape(&[d])?;
    Ok(AttentionResult { weights, pooled })
}

fn check_rows(name: &str, rows: &Tensor, mask: &[bool]) -> Result<()> {
    if rows.rank() != 2 || rows.shape()[0] != mask.len() {
        return Err(Error::Dimension(format!(
            "{name}: rows {:?} do not match mask of length {}",
            rows.shape(),
            mask.len()
        )));
    }
    Ok(())
}

/// Self-attention over question positions.
pub fn query_attention(
    q: &Tensor,
    mask: &[bool],
    params: &AttentionParams,
) -> Result<AttentionResult> {
    check_rows("query_attention", q, mask)?;
    let k = q.shape()[0];
    let logits = q
        .matmul(&params.w_aq)?
        .relu()
        .matmul(&params.j_aq)?
        .reshape(&[k])?;
    pool(logits.softmax(Some(mask))?, q)
}

/// Attention over image objects, conditioned on the pooled question.
pub fn image_attention(
    h: &Tensor,
    q_star: &Tensor,
    mask: &[bool],
    params: &AttentionParams,
) -> Result<AttentionResult> {
    check_rows("image_attention", h, mask)?;
    let t = h.shape()[0];
    let q_row = q_star.reshape(&[1, q_star.numel()])?;
    let objects = h.matmul(&params.w_h)?;
    let query = Tensor::ones(&[t, 1]).matmul(&q_row.matmul(&params.w_qstar)?)?;
    let fused = objects.hadamard(&query)?;
    let logits = fused
        .matmul(&params.w_ah)?
        .relu()
        .matmul(&params.j_ah)?
        .reshape(&[t])?;
    pool(logits.softmax(Some(mask))?, h)
}

/// Uniform weights over unmasked rows; the no-attention baseline.
pub fn mean_pool(rows: &Tensor, mask: &[bool]) -> Result<AttentionResult> {
    check_rows("mean_pool", rows, mask)?;
    let n = mask.iter().filter(|&&m| m).count();
    if n == 0 {
        return Err(Error::InvalidMask);
    }
    let w = mask
        .iter()
        .map(|&m| if m { 1.0 / n as f64 } else { 0.0 })
        .collect();
    pool(Tensor::vector(w)?, rows)
}

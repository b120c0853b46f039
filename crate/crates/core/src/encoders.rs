//! Trainable image-object and question encoders.
//!
//! Objects go through one ReLU layer each. Questions go through a token
//! embedding followed by a unidirectional tanh recurrence
//! `q_k = tanh(q_{k-1} W_r + E[token_k])`, so word order matters.

use serde::{Deserialize, Serialize};

use crate::data::{ImageObjectFeatures, QueryTokens};
use crate::error::{Error, Result};
use crate::params::{Initializer, ParamStore};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingConfig {
    pub d_h: usize,
    pub d_q: usize,
    pub t_max: usize,
    pub k_max: usize,
    pub vocab_size: usize,
    pub d_raw: usize,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            d_h: 32,
            d_q: 32,
            t_max: 16,
            k_max: 12,
            vocab_size: crate::data::vocab::vocab_size(),
            d_raw: crate::data::RAW_FEATURES,
        }
    }
}

impl EmbeddingConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.d_h,
            self.d_q,
            self.t_max,
            self.k_max,
            self.vocab_size,
            self.d_raw,
        ];
        if dims.contains(&0) {
            return Err(Error::Config(format!(
                "embedding sizes must be positive: {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct EncoderParams {
    /// `d_raw × d_h`
    pub w_img: Tensor,
    /// `d_h`
    pub b_img: Tensor,
    /// `vocab_size × d_q`
    pub embedding: Tensor,
    /// `d_q × d_q`
    pub w_rec: Tensor,
    pub config: EmbeddingConfig,
}

impl EncoderParams {
    pub fn init(
        config: EmbeddingConfig,
        init: &mut Initializer,
        store: &mut ParamStore,
    ) -> Result<Self> {
        config.validate()?;
        let EmbeddingConfig {
            d_h,
            d_q,
            vocab_size,
            d_raw,
            ..
        } = config;
        Ok(Self {
            w_img: init.register(store, "encoder.image.w", &[d_raw, d_h], d_raw)?,
            b_img: init.register(store, "encoder.image.b", &[d_h], d_raw)?,
            // Lookup rows see a single one-hot input.
            embedding: init.register(store, "encoder.query.embedding", &[vocab_size, d_q], 1)?,
            w_rec: init.register(store, "encoder.query.w_rec", &[d_q, d_q], d_q)?,
            config,
        })
    }
}

/// `relu(raw_t W_img + b_img)` per object; padded rows are forced to zero.
pub fn encode_image(features: &ImageObjectFeatures, params: &EncoderParams) -> Result<Tensor> {
    let cfg = &params.config;
    if features.t_max() != cfg.t_max || features.values.len() != cfg.t_max * cfg.d_raw {
        return Err(Error::Dimension(format!(
            "image features hold {} values for {} objects; config wants {} × {}",
            features.values.len(),
            features.t_max(),
            cfg.t_max,
            cfg.d_raw
        )));
    }
    let raw = Tensor::new(&[cfg.t_max, cfg.d_raw], features.values.clone())?;
    let keep: Vec<f64> = features
        .mask
        .iter()
        .flat_map(|&m| std::iter::repeat_n(if m { 1.0 } else { 0.0 }, cfg.d_h))
        .collect();
    let keep = Tensor::new(&[cfg.t_max, cfg.d_h], keep)?;
    raw.matmul(&params.w_img)?
        .add_row(&params.b_img)?
        .relu()
        .hadamard(&keep)
}

/// Contextual embedding per question position. Rows past the last real
/// token are zero and carry no graph history.
pub fn encode_query(tokens: &QueryTokens, params: &EncoderParams) -> Result<Tensor> {
    let cfg = &params.config;
    if tokens.ids.len() != cfg.k_max || tokens.mask.len() != cfg.k_max {
        return Err(Error::Dimension(format!(
            "query has {} positions; config wants {}",
            tokens.ids.len(),
            cfg.k_max
        )));
    }
    let len = tokens.len();
    if len == 0 {
        return Err(Error::InvalidMask);
    }
    if tokens.mask[..len].iter().any(|&m| !m) {
        return Err(Error::Dimension("query mask must be a prefix".into()));
    }
    let embedded = params.embedding.gather_rows(&tokens.ids[..len])?;
    let mut rows = Vec::with_capacity(cfg.k_max);
    let mut state: Option<Tensor> = None;
    for k in 0..len {
        let input = embedded.slice_rows(k, 1)?;
        let pre = match &state {
            None => input,
            Some(prev) => prev.matmul(&params.w_rec)?.add(&input)?,
        };
        let next = pre.tanh();
        rows.push(next.clone());
        state = Some(next);
    }
    if len < cfg.k_max {
        rows.push(Tensor::zeros(&[cfg.k_max - len, cfg.d_q]));
    }
    Tensor::concat_rows(&rows)
}

//! End-to-end wiring of encoders, attention, fusion and the bottleneck.

use serde::{Deserialize, Serialize};

use crate::attention::{
    image_attention, mean_pool, query_attention, AttentionConfig, AttentionParams,
};
use crate::data::{vocab, Category, DatasetConfig, ImageObjectFeatures, QueryTokens, VqaSample};
use crate::encoders::{encode_image, encode_query, EmbeddingConfig, EncoderParams};
use crate::error::{Error, Result};
use crate::fusion::{classify, predict, project, FusionConfig, FusionParams};
use crate::infomax::{
    encode_latent, info_loss, total_loss, BottleneckConfig, BottleneckParams, InfoNce, InfoTerms,
    LossBreakdown,
};
use crate::params::{Initializer, ParamStore};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(flatten)]
    pub embedding: EmbeddingConfig,
    pub d_ff: usize,
    pub d_p: usize,
    pub d_f: usize,
    pub d_mlp: usize,
    pub d_z: usize,
    pub n_classes: usize,
    pub cross_attention: bool,
    pub infomax: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            embedding: EmbeddingConfig::default(),
            d_ff: 16,
            d_p: 32,
            d_f: 64,
            d_mlp: 64,
            d_z: 16,
            n_classes: vocab::n_answers(),
            cross_attention: true,
            infomax: true,
        }
    }
}

impl ModelConfig {
    /// Default widths with object and token limits taken from the dataset.
    pub fn for_dataset(data: &DatasetConfig) -> Self {
        let mut cfg = Self::default();
        cfg.embedding.t_max = data.t_max;
        cfg.embedding.k_max = data.k_max;
        cfg
    }
}

/// A sample converted to model inputs once, ahead of training.
#[derive(Clone, Debug)]
pub struct Example {
    pub image: ImageObjectFeatures,
    pub query: QueryTokens,
    pub answer: usize,
    pub category: Category,
}

impl Example {
    pub fn from_sample(sample: &VqaSample, cfg: &EmbeddingConfig) -> Result<Self> {
        Ok(Self {
            image: sample.image_features(cfg.t_max)?,
            query: sample.query_tokens(cfg.k_max)?,
            answer: sample.answer,
            category: sample.category,
        })
    }
}

pub fn prepare<'a>(
    samples: impl IntoIterator<Item = &'a VqaSample>,
    cfg: &EmbeddingConfig,
) -> Result<Vec<Example>> {
    samples
        .into_iter()
        .map(|s| Example::from_sample(s, cfg))
        .collect()
}

/// Reparameterization noise for one batch, `[B × d_z]` per modality.
#[derive(Clone, Debug)]
pub struct LatentNoise {
    pub query: Tensor,
    pub image: Tensor,
}

impl LatentNoise {
    pub fn zeros(batch: usize, d_z: usize) -> Self {
        Self {
            query: Tensor::zeros(&[batch, d_z]),
            image: Tensor::zeros(&[batch, d_z]),
        }
    }
}

/// Intermediate tensors of one batched forward pass.
#[derive(Clone, Debug)]
pub struct Forward {
    /// `[B × d_q]`
    pub q_star: Tensor,
    /// `[B × d_h]`
    pub h_star: Tensor,
    /// `F_Q(q*)`, `[B × d_f]`
    pub f_q: Tensor,
    /// `F_H(h*)`, `[B × d_f]`
    pub f_h: Tensor,
    /// `[B × n_classes]`
    pub logits: Tensor,
}

/// Graph nodes of the training objective.
#[derive(Clone, Debug)]
pub struct LossGraph {
    pub ce: Tensor,
    pub info: Option<InfoTerms>,
    pub gamma: Option<Tensor>,
    pub total: Tensor,
}

impl LossGraph {
    pub fn breakdown(&self) -> LossBreakdown {
        let (mi_estimate, skl, info_loss) = self.info.as_ref().map_or((0.0, 0.0, 0.0), |t| {
            (t.mi.item(), t.skl.item(), t.total.item())
        });
        LossBreakdown {
            ce: self.ce.item(),
            mi_estimate,
            skl,
            gamma: self.gamma.as_ref().map_or(0.0, Tensor::item),
            info_loss,
            final_loss: self.total.item(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct VqaModel {
    pub config: ModelConfig,
    params: ParamStore,
    pub encoders: EncoderParams,
    pub attention: Option<AttentionParams>,
    pub fusion: FusionParams,
    pub bottleneck: Option<BottleneckParams>,
}

impl VqaModel {
    /// Builds a freshly initialized model. Attention and bottleneck
    /// parameters exist only when their flags are set.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        let mut store = ParamStore::new();
        let mut init = Initializer::new(seed);
        let e = config.embedding;
        let encoders = EncoderParams::init(e, &mut init, &mut store)?;
        let attention = if config.cross_attention {
            let cfg = AttentionConfig {
                d_q: e.d_q,
                d_h: e.d_h,
                d_ff: config.d_ff,
                d_p: config.d_p,
            };
            Some(AttentionParams::init(cfg, &mut init, &mut store)?)
        } else {
            None
        };
        let fusion = FusionParams::init(
            FusionConfig {
                d_q: e.d_q,
                d_h: e.d_h,
                d_f: config.d_f,
                d_mlp: config.d_mlp,
                n_classes: config.n_classes,
            },
            &mut init,
            &mut store,
        )?;
        let bottleneck = if config.infomax {
            let cfg = BottleneckConfig {
                d_f: config.d_f,
                d_z: config.d_z,
            };
            Some(BottleneckParams::init(cfg, &mut init, &mut store)?)
        } else {
            None
        };
        Ok(Self {
            config,
            params: store,
            encoders,
            attention,
            fusion,
            bottleneck,
        })
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    /// Pooled question and image vectors `(q*, h*)` for one example.
    pub fn embed(&self, ex: &Example) -> Result<(Tensor, Tensor)> {
        let h = encode_image(&ex.image, &self.encoders)?;
        let q = encode_query(&ex.query, &self.encoders)?;
        match &self.attention {
            Some(att) => {
                let q_star = query_attention(&q, &ex.query.mask, att)?.pooled;
                let h_star = image_attention(&h, &q_star, &ex.image.mask, att)?.pooled;
                Ok((q_star, h_star))
            }
            None => Ok((
                mean_pool(&q, &ex.query.mask)?.pooled,
                mean_pool(&h, &ex.image.mask)?.pooled,
            )),
        }
    }

    pub fn forward(&self, batch: &[&Example]) -> Result<Forward> {
        if batch.is_empty() {
            return Err(Error::Dimension("empty batch".into()));
        }
        let e = &self.config.embedding;
        let mut qs = Vec::with_capacity(batch.len());
        let mut hs = Vec::with_capacity(batch.len());
        for ex in batch {
            let (q, h) = self.embed(ex)?;
            qs.push(q.reshape(&[1, e.d_q])?);
            hs.push(h.reshape(&[1, e.d_h])?);
        }
        let q_star = Tensor::concat_rows(&qs)?;
        let h_star = Tensor::concat_rows(&hs)?;
        let (f_q, f_h) = project(&q_star, &h_star, &self.fusion)?;
        let logits = classify(&f_q.hadamard(&f_h)?, &self.fusion)?;
        Ok(Forward {
            q_star,
            h_star,
            f_q,
            f_h,
            logits,
        })
    }

    /// `L_CE + λ L_I`. Without the bottleneck the objective is `L_CE` alone.
    pub fn loss(&self, batch: &[&Example], noise: &LatentNoise, lambda: f64) -> Result<LossGraph> {
        let fwd = self.forward(batch)?;
        let labels: Vec<usize> = batch.iter().map(|ex| ex.answer).collect();
        let ce = fwd.logits.cross_entropy(&labels)?;
        let Some(bn) = &self.bottleneck else {
            return Ok(LossGraph {
                total: ce.clone(),
                ce,
                info: None,
                gamma: None,
            });
        };
        let z_q = encode_latent(&fwd.f_q, &bn.phi, &noise.query)?;
        let z_h = encode_latent(&fwd.f_h, &bn.psi, &noise.image)?;
        let gamma = bn.gamma();
        let info = info_loss(&InfoNce { critic: &bn.critic }, &z_q, &z_h, &gamma)?;
        let total = total_loss(&ce, &info.total, lambda)?;
        Ok(LossGraph {
            ce,
            info: Some(info),
            gamma: Some(gamma),
            total,
        })
    }

    pub fn predict(&self, batch: &[&Example]) -> Result<Vec<usize>> {
        let logits = self.forward(batch)?.logits;
        let c = self.config.n_classes;
        let preds = logits.values().chunks(c).map(predict).collect();
        Ok(preds)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_dataset, DatasetConfig};

    fn small() -> (VqaModel, Vec<Example>) {
        let data = generate_dataset(&DatasetConfig {
            n_samples: 6,
            seed: 4,
            ..DatasetConfig::lr_like()
        })
        .unwrap();
        let cfg = ModelConfig::for_dataset(&data.config);
        let model = VqaModel::new(cfg, 1).unwrap();
        let examples = prepare(&data.samples, &cfg.embedding).unwrap();
        (model, examples)
    }

    #[test]
    fn flags_control_parameter_allocation() {
        let cfg = ModelConfig {
            cross_attention: false,
            infomax: false,
            ..ModelConfig::default()
        };
        let model = VqaModel::new(cfg, 0).unwrap();
        let names = model.params().names();
        assert!(names
            .iter()
            .all(|n| !n.starts_with("bottleneck") && !n.starts_with("attention")));
        let full = VqaModel::new(ModelConfig::default(), 0).unwrap();
        assert!(full
            .params()
            .names()
            .iter()
            .any(|n| n.starts_with("bottleneck")));
        assert!(full
            .params()
            .names()
            .iter()
            .any(|n| n.starts_with("attention")));
    }

    #[test]
    fn forward_shapes() {
        let (model, ex) = small();
        let batch: Vec<&Example> = ex.iter().collect();
        let fwd = model.forward(&batch).unwrap();
        assert_eq!(fwd.q_star.shape(), &[6, 32]);
        assert_eq!(fwd.h_star.shape(), &[6, 32]);
        assert_eq!(fwd.logits.shape(), &[6, vocab::n_answers()]);
        assert_eq!(model.predict(&batch).unwrap().len(), 6);
    }

    #[test]
    fn loss_breakdown_is_consistent() {
        let (model, ex) = small();
        let batch: Vec<&Example> = ex.iter().collect();
        let g = model.loss(&batch, &LatentNoise::zeros(6, 16), 1.0).unwrap();
        let b = g.breakdown();
        assert_eq!(b.final_loss, b.ce + b.info_loss);
        assert!((b.info_loss - (-b.mi_estimate + b.gamma * b.skl)).abs() < 1e-12);
        let g0 = model.loss(&batch, &LatentNoise::zeros(6, 16), 0.0).unwrap();
        assert_eq!(g0.breakdown().final_loss, g0.breakdown().ce);
    }
}

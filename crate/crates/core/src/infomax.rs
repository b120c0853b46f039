//! Multimodal information bottleneck.
//!
//! Each projected modality is mapped to a diagonal Gaussian latent. The
//! objective rewards mutual information between the two latents (InfoNCE)
//! and penalizes the symmetrized KL divergence between their conditional
//! distributions:
//!
//! ```text
//! L_I     = -MI(z_q; z_h) + γ · D_SKL(p(z_q | F_Q) ‖ p(z_h | F_H))
//! L_final = L_CE + λ · L_I
//! ```
//!
//! `γ = softplus(gamma_raw)` is learned and stays strictly positive.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{as_rows, Linear};
use crate::params::{Initializer, ParamStore};
use crate::tensor::Tensor;

pub const LOG_VAR_MIN: f64 = -10.0;
pub const LOG_VAR_MAX: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BottleneckConfig {
    pub d_f: usize,
    pub d_z: usize,
}

/// Mean and log-variance heads over one modality.
#[derive(Clone, Debug)]
pub struct GaussianHead {
    pub mean: Linear,
    pub log_var: Linear,
}

#[derive(Clone, Debug)]
pub struct BottleneckParams {
    /// Over the projected question, `F_Q(q*)`.
    pub phi: GaussianHead,
    /// Over the projected image, `F_H(h*)`.
    pub psi: GaussianHead,
    /// Bilinear InfoNCE critic, `d_z × d_z`.
    pub critic: Tensor,
    /// Rank-0; `γ = softplus(gamma_raw)`.
    pub gamma_raw: Tensor,
}

impl BottleneckParams {
    pub fn init(
        cfg: BottleneckConfig,
        init: &mut Initializer,
        store: &mut ParamStore,
    ) -> Result<Self> {
        let BottleneckConfig { d_f, d_z } = cfg;
        if d_f == 0 || d_z == 0 {
            return Err(Error::Config(format!(
                "bottleneck sizes must be positive: {cfg:?}"
            )));
        }
        let mut head = |name: &str| -> Result<GaussianHead> {
            Ok(GaussianHead {
                mean: Linear::init(&format!("bottleneck.{name}.mean"), d_f, d_z, init, store)?,
                log_var: Linear::init(
                    &format!("bottleneck.{name}.log_var"),
                    d_f,
                    d_z,
                    init,
                    store,
                )?,
            })
        };
        let phi = head("phi")?;
        let psi = head("psi")?;
        let critic = init.register(store, "bottleneck.critic", &[d_z, d_z], d_z)?;
        // softplus(ln(e - 1)) = 1
        let gamma_raw = store.insert(
            "bottleneck.gamma_raw",
            Tensor::param(&[], vec![(std::f64::consts::E - 1.0).ln()])?,
        )?;
        Ok(Self {
            phi,
            psi,
            critic,
            gamma_raw,
        })
    }

    pub fn gamma(&self) -> Tensor {
        self.gamma_raw.softplus()
    }

    pub fn head(&self, which: Modality) -> &GaussianHead {
        match which {
            Modality::Query => &self.phi,
            Modality::Image => &self.psi,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Modality {
    Query,
    Image,
}

/// Batch of diagonal Gaussians and one reparameterized draw from each.
#[derive(Clone, Debug)]
pub struct GaussianLatent {
    /// `[B × d_z]`
    pub mean: Tensor,
    /// `[B × d_z]`, clamped to `[LOG_VAR_MIN, LOG_VAR_MAX]`.
    pub log_var: Tensor,
    /// `mean + exp(log_var / 2) ⊙ noise`
    pub sample: Tensor,
}

/// Applies a head to `x` (`[d_f]` or `[B × d_f]`) and draws
/// `mean + σ ⊙ noise` with caller-supplied noise of the latent's shape.
pub fn encode_latent(x: &Tensor, head: &GaussianHead, noise: &Tensor) -> Result<GaussianLatent> {
    let x = as_rows(x)?;
    let mean = head.mean.forward(&x)?;
    let log_var = head.log_var.forward(&x)?.clamp(LOG_VAR_MIN, LOG_VAR_MAX);
    let noise = if noise.rank() == 1 {
        noise.reshape(&[1, noise.numel()])?
    } else {
        noise.clone()
    };
    let sample = mean.add(&log_var.scale(0.5).exp().hadamard(&noise)?)?;
    Ok(GaussianLatent {
        mean,
        log_var,
        sample,
    })
}

/// Symmetrized KL, `½[KL(p‖q) + KL(q‖p)]`, summed over latent dimensions
/// and averaged over the batch rows. For diagonal Gaussians the log terms
/// cancel, leaving
/// `¼ Σ [σp²/σq² + σq²/σp² + (μp − μq)²(1/σp² + 1/σq²) − 2]`.
pub fn skl_gaussian(p: &GaussianLatent, q: &GaussianLatent) -> Result<Tensor> {
    if p.mean.shape() != q.mean.shape() {
        return Err(Error::Dimension(format!(
            "symmetrized KL between latents of shape {:?} and {:?}",
            p.mean.shape(),
            q.mean.shape()
        )));
    }
    let rows = p.mean.shape()[0] as f64;
    let n = p.mean.numel() as f64;
    let ratio = p.log_var.sub(&q.log_var)?.exp();
    let inverse = q.log_var.sub(&p.log_var)?.exp();
    let diff = p.mean.sub(&q.mean)?;
    let precision = p
        .log_var
        .scale(-1.0)
        .exp()
        .add(&q.log_var.scale(-1.0).exp())?;
    let total = ratio
        .add(&inverse)?
        .add(&diff.hadamard(&diff)?.hadamard(&precision)?)?
        .sum()
        .add(&Tensor::scalar(-2.0 * n))?;
    Ok(total.scale(0.25 / rows))
}

/// Mutual-information lower bound between paired batches of latents.
pub trait MiEstimator {
    fn estimate(&self, z_q: &Tensor, z_h: &Tensor) -> Result<Tensor>;
}

/// InfoNCE with the bilinear critic `score(i, j) = z_q[i] · W · z_h[j]`:
/// `mean_i [score(i,i) − logsumexp_j score(i,j)] + ln B`, never above `ln B`.
pub struct InfoNce<'a> {
    pub critic: &'a Tensor,
}

impl MiEstimator for InfoNce<'_> {
    fn estimate(&self, z_q: &Tensor, z_h: &Tensor) -> Result<Tensor> {
        mi_estimate(z_q, z_h, self.critic)
    }
}

pub fn mi_estimate(z_q: &Tensor, z_h: &Tensor, critic: &Tensor) -> Result<Tensor> {
    let z_q = as_rows(z_q)?;
    let z_h = as_rows(z_h)?;
    if z_q.shape() != z_h.shape() {
        return Err(Error::Dimension(format!(
            "mutual information between batches {:?} and {:?}",
            z_q.shape(),
            z_h.shape()
        )));
    }
    let b = z_q.shape()[0];
    let scores = z_q.matmul(critic)?.matmul(&z_h.transpose()?)?;
    let labels: Vec<usize> = (0..b).collect();
    // -CE over matched pairs is the mean log-probability of the diagonal.
    let nce = scores.cross_entropy(&labels)?;
    Tensor::scalar((b as f64).ln()).sub(&nce)
}

/// `−MI + γ · SKL`, with the MI term taken from `estimator`.
pub fn info_loss(
    estimator: &dyn MiEstimator,
    latents_q: &GaussianLatent,
    latents_h: &GaussianLatent,
    gamma: &Tensor,
) -> Result<InfoTerms> {
    if latents_q.sample.shape() != latents_h.sample.shape() {
        return Err(Error::Dimension(format!(
            "latent batches differ: {:?} vs {:?}",
            latents_q.sample.shape(),
            latents_h.sample.shape()
        )));
    }
    let mi = estimator.estimate(&latents_q.sample, &latents_h.sample)?;
    let skl = skl_gaussian(latents_q, latents_h)?;
    let total = gamma.hadamard(&skl)?.sub(&mi)?;
    Ok(InfoTerms { mi, skl, total })
}

/// The graph nodes that make up `L_I`.
#[derive(Clone, Debug)]
pub struct InfoTerms {
    pub mi: Tensor,
    pub skl: Tensor,
    pub total: Tensor,
}

/// `ce + λ · info`
pub fn total_loss(ce: &Tensor, info: &Tensor, lambda: f64) -> Result<Tensor> {
    ce.add(&info.scale(lambda))
}

/// Scalar values of every loss term for one step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub ce: f64,
    pub mi_estimate: f64,
    pub skl: f64,
    pub gamma: f64,
    pub info_loss: f64,
    pub final_loss: f64,
}

//! Seeded mini-batch training and evaluation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, DatasetConfig, VqaSample};
use crate::error::{Error, Result};
use crate::infomax::LossBreakdown;
use crate::metrics::Metrics;
use crate::model::{prepare, Example, LatentNoise, ModelConfig, VqaModel};
use crate::optim::{AdamConfig, AdamState};
use crate::tensor::Tensor;

const SHUFFLE_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;
const EVAL_CHUNK: usize = 256;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    pub seed: u64,
    pub cross_attention: bool,
    pub infomax: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::lr_like()
    }
}

impl TrainConfig {
    /// 150 epochs at a small learning rate; pairs with the low-resolution data preset.
    pub fn lr_like() -> Self {
        Self {
            epochs: 150,
            batch_size: 280,
            learning_rate: 1e-5,
            lambda: 1.0,
            seed: 42,
            cross_attention: true,
            infomax: true,
        }
    }

    /// Shorter schedule with smaller batches; pairs with the high-resolution data preset.
    pub fn hr_like() -> Self {
        Self {
            epochs: 35,
            batch_size: 70,
            ..Self::lr_like()
        }
    }

    /// Schedule sized for the synthetic task on one CPU core.
    pub fn desk() -> Self {
        Self {
            epochs: 60,
            batch_size: 256,
            learning_rate: 2e-2,
            ..Self::lr_like()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "lr_like" => Ok(Self::lr_like()),
            "hr_like" => Ok(Self::hr_like()),
            "desk" => Ok(Self::desk()),
            other => Err(Error::Config(format!(
                "unknown preset `{other}` (expected lr_like, hr_like or desk)"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "epochs and batch_size must be positive".into(),
            ));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::Config(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        Ok(())
    }

    pub fn model_config(&self, data: &DatasetConfig) -> ModelConfig {
        ModelConfig {
            cross_attention: self.cross_attention,
            infomax: self.infomax,
            ..ModelConfig::for_dataset(data)
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            ..AdamConfig::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub epoch: usize,
    pub step: u64,
    pub batch_size: usize,
    pub loss: LossBreakdown,
}

/// Sample-weighted means of the step losses within one epoch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub steps: u64,
    pub loss: LossBreakdown,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub steps: Vec<StepRecord>,
    pub epochs: Vec<EpochRecord>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub config: TrainConfig,
    pub model: VqaModel,
    pub history: History,
    pub steps: u64,
}

/// Training state that advances one epoch at a time.
pub struct Trainer {
    config: TrainConfig,
    model: VqaModel,
    optimizer: AdamState,
    examples: Vec<Example>,
    order: Vec<usize>,
    shuffle_rng: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
    step: u64,
    history: History,
}

impl Trainer {
    /// Prepares a model over the dataset's first split.
    pub fn new(config: &TrainConfig, dataset: &Dataset) -> Result<Self> {
        config.validate()?;
        let split = dataset
            .split_names()
            .into_iter()
            .next()
            .ok_or_else(|| Error::Config("dataset declares no splits".into()))?;
        let model = VqaModel::new(config.model_config(&dataset.config), config.seed)?;
        let examples = prepare(dataset.split(&split), &model.config.embedding)?;
        if examples.is_empty() {
            return Err(Error::Config(format!("training split `{split}` is empty")));
        }
        let rng = |stream| {
            let mut r = ChaCha8Rng::seed_from_u64(config.seed);
            r.set_stream(stream);
            r
        };
        Ok(Self {
            optimizer: AdamState::new(model.params(), config.adam()),
            order: (0..examples.len()).collect(),
            config: config.clone(),
            model,
            examples,
            shuffle_rng: rng(SHUFFLE_STREAM),
            noise_rng: rng(NOISE_STREAM),
            step: 0,
            history: History::default(),
        })
    }

    pub fn model(&self) -> &VqaModel {
        &self.model
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn epochs_done(&self) -> usize {
        self.history.epochs.len()
    }

    fn noise(&mut self, rows: usize) -> Result<LatentNoise> {
        let d_z = self.model.config.d_z;
        if !self.model.config.infomax {
            return Ok(LatentNoise::zeros(rows, d_z));
        }
        let mut draw = || -> Result<Tensor> {
            let v = (0..rows * d_z)
                .map(|_| StandardNormal.sample(&mut self.noise_rng))
                .collect();
            Tensor::new(&[rows, d_z], v)
        };
        Ok(LatentNoise {
            query: draw()?,
            image: draw()?,
        })
    }

    pub fn run_epoch(&mut self) -> Result<EpochRecord> {
        let epoch = self.history.epochs.len() + 1;
        self.order.shuffle(&mut self.shuffle_rng);
        let order = self.order.clone();
        let mut sums = LossBreakdown::default();
        let mut steps = 0;
        for chunk in order.chunks(self.config.batch_size) {
            let noise = self.noise(chunk.len())?;
            let batch: Vec<&Example> = chunk.iter().map(|&i| &self.examples[i]).collect();
            let lambda = self.config.lambda;
            let graph = self.model.loss(&batch, &noise, lambda)?;
            self.step += 1;
            let loss = graph.breakdown();
            check_finite(&loss, self.step)?;
            self.model.params().zero_grad();
            graph.total.backward()?;
            self.optimizer.step(self.model.params())?;

            let w = batch.len() as f64;
            sums.ce += w * loss.ce;
            sums.mi_estimate += w * loss.mi_estimate;
            sums.skl += w * loss.skl;
            sums.gamma += w * loss.gamma;
            sums.info_loss += w * loss.info_loss;
            sums.final_loss += w * loss.final_loss;
            steps += 1;
            self.history.steps.push(StepRecord {
                epoch,
                step: self.step,
                batch_size: batch.len(),
                loss,
            });
        }
        let n = self.examples.len() as f64;
        let record = EpochRecord {
            epoch,
            steps,
            loss: LossBreakdown {
                ce: sums.ce / n,
                mi_estimate: sums.mi_estimate / n,
                skl: sums.skl / n,
                gamma: sums.gamma / n,
                info_loss: sums.info_loss / n,
                final_loss: sums.final_loss / n,
            },
        };
        log::debug!(
            "epoch {epoch}: ce {:.4} mi {:.4} skl {:.4} gamma {:.4} final {:.4}",
            record.loss.ce,
            record.loss.mi_estimate,
            record.loss.skl,
            record.loss.gamma,
            record.loss.final_loss
        );
        self.history.epochs.push(record);
        Ok(record)
    }

    pub fn finish(self) -> TrainOutcome {
        TrainOutcome {
            config: self.config,
            model: self.model,
            history: self.history,
            steps: self.step,
        }
    }
}

fn check_finite(loss: &LossBreakdown, step: u64) -> Result<()> {
    let terms = [
        ("cross-entropy", loss.ce),
        ("mutual-information", loss.mi_estimate),
        ("symmetrized-KL", loss.skl),
        ("gamma", loss.gamma),
        ("final", loss.final_loss),
    ];
    match terms.iter().find(|(_, v)| !v.is_finite()) {
        Some(&(term, _)) => Err(Error::Divergence { term, step }),
        None => Ok(()),
    }
}

/// Runs the configured number of epochs over the dataset's first split.
pub fn train(config: &TrainConfig, dataset: &Dataset) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(config, dataset)?;
    for _ in 0..config.epochs {
        trainer.run_epoch()?;
    }
    Ok(trainer.finish())
}

/// Deterministic metrics; no latent sampling takes place.
pub fn evaluate(model: &VqaModel, samples: &[&VqaSample]) -> Result<Metrics> {
    let examples = prepare(samples.iter().copied(), &model.config.embedding)?;
    let mut predictions = Vec::with_capacity(examples.len());
    for chunk in examples.chunks(EVAL_CHUNK) {
        let batch: Vec<&Example> = chunk.iter().collect();
        predictions.extend(model.predict(&batch)?);
    }
    let categories: Vec<_> = examples.iter().map(|e| e.category).collect();
    let labels: Vec<usize> = examples.iter().map(|e| e.answer).collect();
    Metrics::compute(&categories, &predictions, &labels, model.config.n_classes)
}

/// Evaluates a named split and warns about categories it lacks.
pub fn evaluate_split(model: &VqaModel, dataset: &Dataset, split: &str) -> Result<Metrics> {
    let samples = dataset.split(split);
    if samples.is_empty() {
        return Err(Error::Config(format!("split `{split}` has no samples")));
    }
    let metrics = evaluate(model, &samples)?;
    metrics.warn_missing(&dataset.config.variant.categories());
    Ok(metrics)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::generate_dataset;

    fn tiny(n: usize, seed: u64) -> Dataset {
        generate_dataset(&DatasetConfig {
            n_samples: n,
            seed,
            ..DatasetConfig::lr_like()
        })
        .unwrap()
    }

    fn quick() -> TrainConfig {
        TrainConfig {
            epochs: 2,
            batch_size: 16,
            learning_rate: 1e-3,
            ..TrainConfig::lr_like()
        }
    }

    #[test]
    fn same_seed_gives_identical_steps() {
        let data = tiny(80, 1);
        let a = train(&quick(), &data).unwrap();
        let b = train(&quick(), &data).unwrap();
        let bits = |h: &History| -> Vec<u64> {
            h.steps
                .iter()
                .map(|s| s.loss.final_loss.to_bits())
                .collect()
        };
        assert_eq!(bits(&a.history), bits(&b.history));
        assert_eq!(a.model.params().snapshot(), b.model.params().snapshot());
        let other = train(&TrainConfig { seed: 7, ..quick() }, &data).unwrap();
        assert_ne!(bits(&a.history), bits(&other.history));
    }

    #[test]
    fn zero_lambda_leaves_only_cross_entropy() {
        let data = tiny(40, 2);
        let out = train(
            &TrainConfig {
                lambda: 0.0,
                ..quick()
            },
            &data,
        )
        .unwrap();
        for s in &out.history.steps {
            assert_eq!(s.loss.final_loss, s.loss.ce);
        }
    }

    #[test]
    fn disabled_bottleneck_is_never_allocated() {
        let data = tiny(40, 3);
        let out = train(
            &TrainConfig {
                infomax: false,
                ..quick()
            },
            &data,
        )
        .unwrap();
        assert!(out
            .model
            .params()
            .names()
            .iter()
            .all(|n| !n.starts_with("bottleneck")));
        assert!(out
            .history
            .steps
            .iter()
            .all(|s| s.loss.final_loss == s.loss.ce));
    }

    #[test]
    fn configuration_is_validated() {
        let data = tiny(10, 4);
        for bad in [
            TrainConfig {
                epochs: 0,
                ..quick()
            },
            TrainConfig {
                batch_size: 0,
                ..quick()
            },
            TrainConfig {
                learning_rate: 0.0,
                ..quick()
            },
            TrainConfig {
                lambda: -1.0,
                ..quick()
            },
        ] {
            assert!(matches!(train(&bad, &data), Err(Error::Config(_))));
        }
        assert!(TrainConfig::preset("nope").is_err());
    }

    #[test]
    fn divergence_names_the_term() {
        let loss = LossBreakdown {
            skl: f64::NAN,
            final_loss: f64::NAN,
            ..LossBreakdown::default()
        };
        assert!(matches!(
            check_finite(&loss, 9),
            Err(Error::Divergence {
                term: "symmetrized-KL",
                step: 9
            })
        ));
    }

    #[test]
    fn evaluation_is_deterministic() {
        let data = tiny(60, 5);
        let out = train(&quick(), &data).unwrap();
        let a = evaluate_split(&out.model, &data, "test").unwrap();
        let b = evaluate_split(&out.model, &data, "test").unwrap();
        assert_eq!(a, b);
    }
}

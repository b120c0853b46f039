//! Plain-text model checkpoints.
//!
//! ```text
//! ckpt v1 <seed> <n_params>
//! config <model config as JSON>
//! train <training config as JSON>
//! steps <optimizer steps taken>
//! metrics <split → metrics as JSON>
//! tensor <name> <rank> <dims...>
//! <values, 17 significant digits>
//! ...
//! ```
//!
//! The `train` and `metrics` lines are optional.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::Metrics;
use crate::model::{ModelConfig, VqaModel};
use crate::train::{TrainConfig, TrainOutcome};

pub const VERSION: &str = "v1";
const VALUES_PER_LINE: usize = 8;
const HEADER: &str = "<header>";

#[derive(Clone, Debug, PartialEq)]
pub struct TensorRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub seed: u64,
    pub model: ModelConfig,
    pub train: Option<TrainConfig>,
    pub steps: u64,
    pub metrics: BTreeMap<String, Metrics>,
    pub tensors: Vec<TensorRecord>,
}

fn json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("configuration types serialize to JSON")
}

fn err(tensor: &str, message: impl Into<String>) -> Error {
    Error::Checkpoint {
        tensor: tensor.to_string(),
        message: message.into(),
    }
}

impl Checkpoint {
    pub fn from_model(model: &VqaModel, seed: u64, steps: u64) -> Self {
        let tensors = model
            .params()
            .iter()
            .map(|p| TensorRecord {
                name: p.name.clone(),
                shape: p.tensor.shape().to_vec(),
                values: p.tensor.to_vec(),
            })
            .collect();
        Self {
            seed,
            model: model.config,
            train: None,
            steps,
            metrics: BTreeMap::new(),
            tensors,
        }
    }

    pub fn from_outcome(outcome: &TrainOutcome) -> Self {
        Self {
            train: Some(outcome.config.clone()),
            ..Self::from_model(&outcome.model, outcome.config.seed, outcome.steps)
        }
    }

    /// Rebuilds the model and checks every stored tensor against the
    /// parameters its configuration declares.
    pub fn to_model(&self) -> Result<VqaModel> {
        let model = VqaModel::new(self.model, self.seed)?;
        let params = model.params();
        if params.len() != self.tensors.len() {
            return Err(err(
                HEADER,
                format!(
                    "configuration declares {} parameters, file holds {}",
                    params.len(),
                    self.tensors.len()
                ),
            ));
        }
        for (p, record) in params.iter().zip(&self.tensors) {
            if p.name != record.name {
                return Err(err(
                    &record.name,
                    format!("expected parameter `{}` at this position", p.name),
                ));
            }
            if p.tensor.shape() != record.shape.as_slice() {
                return Err(err(
                    &record.name,
                    format!(
                        "shape {:?} does not match configured {:?}",
                        record.shape,
                        p.tensor.shape()
                    ),
                ));
            }
            p.tensor
                .set_values(&record.values)
                .map_err(|e| err(&record.name, e.to_string()))?;
        }
        Ok(model)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "ckpt {VERSION} {} {}", self.seed, self.tensors.len());
        let _ = writeln!(out, "config {}", json(&self.model));
        if let Some(train) = &self.train {
            let _ = writeln!(out, "train {}", json(train));
        }
        let _ = writeln!(out, "steps {}", self.steps);
        if !self.metrics.is_empty() {
            let _ = writeln!(out, "metrics {}", json(&self.metrics));
        }
        for t in &self.tensors {
            let _ = write!(out, "tensor {} {}", t.name, t.shape.len());
            for d in &t.shape {
                let _ = write!(out, " {d}");
            }
            out.push('\n');
            for line in t.values.chunks(VALUES_PER_LINE) {
                let parts: Vec<String> = line.iter().map(|v| format!("{v:.16e}")).collect();
                out.push_str(&parts.join(" "));
                out.push('\n');
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().peekable();
        let header = lines.next().ok_or_else(|| err(HEADER, "empty file"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 || fields[0] != "ckpt" {
            return Err(err(HEADER, format!("malformed header `{header}`")));
        }
        if fields[1] != VERSION {
            return Err(err(
                HEADER,
                format!("unsupported version `{}`, expected `{VERSION}`", fields[1]),
            ));
        }
        let seed: u64 = fields[2]
            .parse()
            .map_err(|_| err(HEADER, format!("bad seed `{}`", fields[2])))?;
        let n_params: usize = fields[3]
            .parse()
            .map_err(|_| err(HEADER, format!("bad parameter count `{}`", fields[3])))?;

        let mut model = None;
        let mut train = None;
        let mut steps = None;
        let mut metrics = BTreeMap::new();
        while let Some(line) = lines.peek() {
            if line.starts_with("tensor ") {
                break;
            }
            let line = lines.next().unwrap_or_default();
            let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
            let bad = |e: serde_json::Error| err(HEADER, format!("{key}: {e}"));
            match key {
                "config" => model = Some(serde_json::from_str(rest).map_err(bad)?),
                "train" => train = Some(serde_json::from_str(rest).map_err(bad)?),
                "metrics" => metrics = serde_json::from_str(rest).map_err(bad)?,
                "steps" => {
                    steps = Some(
                        rest.trim()
                            .parse()
                            .map_err(|_| err(HEADER, format!("bad steps `{rest}`")))?,
                    )
                }
                "" => {}
                other => return Err(err(HEADER, format!("unknown line `{other}`"))),
            }
        }
        let model: ModelConfig = model.ok_or_else(|| err(HEADER, "missing config line"))?;

        let mut tensors = Vec::with_capacity(n_params);
        while let Some(line) = lines.next() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let name = fields.get(1).copied().unwrap_or("<unnamed>");
            if fields.len() < 3 || fields[0] != "tensor" {
                return Err(err(name, format!("expected a tensor line, found `{line}`")));
            }
            let rank: usize = fields[2]
                .parse()
                .map_err(|_| err(name, format!("bad rank `{}`", fields[2])))?;
            if fields.len() != 3 + rank {
                return Err(err(
                    name,
                    format!(
                        "rank {rank} needs {rank} dimensions, found {}",
                        fields.len() - 3
                    ),
                ));
            }
            let shape = fields[3..]
                .iter()
                .map(|d| {
                    d.parse::<usize>()
                        .map_err(|_| err(name, format!("bad dimension `{d}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            let numel: usize = shape.iter().product();
            let mut values = Vec::with_capacity(numel);
            while values.len() < numel {
                let line = lines.next().ok_or_else(|| {
                    err(
                        name,
                        format!("expected {numel} values, found {}", values.len()),
                    )
                })?;
                for token in line.split_whitespace() {
                    let v: f64 = token
                        .parse()
                        .map_err(|_| err(name, format!("malformed float `{token}`")))?;
                    values.push(v);
                }
            }
            if values.len() != numel {
                return Err(err(
                    name,
                    format!("expected {numel} values, found {}", values.len()),
                ));
            }
            tensors.push(TensorRecord {
                name: name.to_string(),
                shape,
                values,
            });
        }
        if tensors.len() != n_params {
            return Err(err(
                HEADER,
                format!(
                    "header announces {n_params} tensors, file holds {}",
                    tensors.len()
                ),
            ));
        }
        Ok(Self {
            seed,
            model,
            train,
            steps: steps.unwrap_or(0),
            metrics,
            tensors,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

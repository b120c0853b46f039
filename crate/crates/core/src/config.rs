//! TOML run configuration.
//!
//! ```toml
//! [data]
//! preset = "lr_like"
//! n_samples = 1000
//!
//! [train]
//! preset = "desk"
//! epochs = 20
//! ```
//!
//! Both tables are optional. Each may name a `preset`; its remaining keys
//! override the preset's fields.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::data::DatasetConfig;
use crate::error::{Error, Result};
use crate::train::TrainConfig;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunConfig {
    pub data: DatasetConfig,
    pub train: TrainConfig,
}

fn data_preset(name: &str) -> Result<DatasetConfig> {
    match name {
        "lr_like" => Ok(DatasetConfig::lr_like()),
        "hr_like" => Ok(DatasetConfig::hr_like()),
        other => Err(Error::Config(format!(
            "unknown data preset `{other}` (expected lr_like or hr_like)"
        ))),
    }
}

/// Overlays `table` onto `base`, field by field.
fn overlay<T: Serialize + DeserializeOwned>(
    base: &T,
    table: toml::Table,
    section: &str,
) -> Result<T> {
    let mut merged =
        toml::Table::try_from(base).map_err(|e| Error::Config(format!("[{section}]: {e}")))?;
    merged.extend(table);
    merged
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(format!("[{section}]: {}", e.message())))
}

fn section<T: Serialize + DeserializeOwned>(
    root: &mut toml::Table,
    name: &str,
    preset: impl Fn(&str) -> Result<T>,
    default: T,
) -> Result<T> {
    let Some(value) = root.remove(name) else {
        return Ok(default);
    };
    let toml::Value::Table(mut table) = value else {
        return Err(Error::Config(format!("`{name}` must be a table")));
    };
    let base = match table.remove("preset") {
        None => default,
        Some(toml::Value::String(p)) => preset(&p)?,
        Some(_) => return Err(Error::Config(format!("[{name}] preset must be a string"))),
    };
    overlay(&base, table, name)
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut root: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        let data = section(&mut root, "data", data_preset, DatasetConfig::default())?;
        let train = section(
            &mut root,
            "train",
            TrainConfig::preset,
            TrainConfig::default(),
        )?;
        if let Some(key) = root.keys().next() {
            return Err(Error::Config(format!("unknown top-level key `{key}`")));
        }
        data.validate()?;
        train.validate()?;
        Ok(Self { data, train })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        #[derive(Serialize)]
        struct View<'a> {
            data: &'a DatasetConfig,
            train: &'a TrainConfig,
        }
        toml::to_string(&View {
            data: &self.data,
            train: &self.train,
        })
        .expect("run config serializes to TOML")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn preset_then_overrides() {
        let cfg = RunConfig::parse(
            "[data]\npreset = \"hr_like\"\nn_samples = 300\n[train]\npreset = \"desk\"\nepochs = 3\n",
        )
        .unwrap();
        assert_eq!(cfg.data.n_samples, 300);
        assert_eq!(cfg.data.splits, DatasetConfig::hr_like().splits);
        assert_eq!(cfg.train.epochs, 3);
        assert_eq!(cfg.train.learning_rate, TrainConfig::desk().learning_rate);
    }

    #[test]
    fn round_trip() {
        let cfg = RunConfig {
            data: DatasetConfig::hr_like(),
            train: TrainConfig::desk(),
        };
        assert_eq!(RunConfig::parse(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        for text in [
            "[train]\nepochz = 3\n",
            "[train]\npreset = \"fast\"\n",
            "[train]\nepochs = 0\n",
            "[data]\nn_samples = -1\n",
            "seed = 3\n",
            "[data\n",
        ] {
            assert!(
                matches!(RunConfig::parse(text), Err(Error::Config(_))),
                "{text}"
            );
        }
    }
}

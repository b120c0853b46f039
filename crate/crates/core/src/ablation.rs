//! Four-variant ablation over the cross-attention and bottleneck switches.
//!
//! Variant `i` trains with seed `master_seed + i`, in the order
//! Baseline, CrossAtt, InfoMax, InfoMax + CrossAtt.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{Category, Dataset};
use crate::error::{Error, Result};
use crate::metrics::Metrics;
use crate::train::{evaluate_split, train, TrainConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AblationVariant {
    Baseline,
    CrossAtt,
    InfoMax,
    InfoMaxCrossAtt,
}

impl AblationVariant {
    pub const ALL: [AblationVariant; 4] = [
        AblationVariant::Baseline,
        AblationVariant::CrossAtt,
        AblationVariant::InfoMax,
        AblationVariant::InfoMaxCrossAtt,
    ];

    pub fn label(self) -> &'static str {
        match self {
            AblationVariant::Baseline => "Baseline",
            AblationVariant::CrossAtt => "CrossAtt",
            AblationVariant::InfoMax => "InfoMax",
            AblationVariant::InfoMaxCrossAtt => "InfoMax + CrossAtt",
        }
    }

    /// `(cross_attention, infomax)`
    pub fn flags(self) -> (bool, bool) {
        match self {
            AblationVariant::Baseline => (false, false),
            AblationVariant::CrossAtt => (true, false),
            AblationVariant::InfoMax => (false, true),
            AblationVariant::InfoMaxCrossAtt => (true, true),
        }
    }

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&v| v == self).unwrap_or(0)
    }

    /// Training configuration for this variant under `master_seed`.
    pub fn config(self, base: &TrainConfig, master_seed: u64) -> TrainConfig {
        let (cross_attention, infomax) = self.flags();
        TrainConfig {
            seed: master_seed.wrapping_add(self.index() as u64),
            cross_attention,
            infomax,
            ..base.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: AblationVariant,
    pub label: String,
    pub seed: u64,
    pub cross_attention: bool,
    pub infomax: bool,
    /// Final-epoch metrics per evaluation split.
    pub metrics: BTreeMap<String, Metrics>,
    pub final_train_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub master_seed: u64,
    pub train: TrainConfig,
    pub categories: Vec<Category>,
    pub splits: Vec<String>,
    pub rows: Vec<AblationRow>,
}

/// Trains and evaluates every variant. `base.seed` is the master seed.
pub fn ablate(base: &TrainConfig, dataset: &Dataset) -> Result<AblationReport> {
    let splits = dataset.eval_splits();
    if splits.is_empty() {
        return Err(Error::Config("dataset has no evaluation split".into()));
    }
    let mut rows = Vec::with_capacity(AblationVariant::ALL.len());
    for variant in AblationVariant::ALL {
        let config = variant.config(base, base.seed);
        log::info!(
            "ablation: training {} (seed {})",
            variant.label(),
            config.seed
        );
        let outcome = train(&config, dataset)?;
        let metrics = splits
            .iter()
            .map(|s| Ok((s.clone(), evaluate_split(&outcome.model, dataset, s)?)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        rows.push(AblationRow {
            variant,
            label: variant.label().to_string(),
            seed: config.seed,
            cross_attention: config.cross_attention,
            infomax: config.infomax,
            metrics,
            final_train_loss: outcome
                .history
                .epochs
                .last()
                .map_or(f64::NAN, |e| e.loss.final_loss),
        });
    }
    Ok(AblationReport {
        master_seed: base.seed,
        train: base.clone(),
        categories: dataset.config.variant.categories().to_vec(),
        splits,
        rows,
    })
}

fn percent(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{:.2}", 100.0 * v))
}

impl AblationReport {
    /// Accuracy table for one split, in percent.
    pub fn table(&self, split: &str) -> String {
        let mut header: Vec<String> = vec!["Variant".into()];
        header.extend(self.categories.iter().map(|c| c.name().to_string()));
        header.push("OA".into());
        header.push("AA".into());

        let body: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|row| {
                let m = row.metrics.get(split);
                let mut cells = vec![row.label.clone()];
                for c in &self.categories {
                    cells.push(percent(
                        m.and_then(|m| m.per_class_accuracy.get(c).copied()),
                    ));
                }
                cells.push(percent(m.map(|m| m.overall_accuracy)));
                cells.push(percent(m.map(|m| m.average_accuracy)));
                cells
            })
            .collect();

        let widths: Vec<usize> = (0..header.len())
            .map(|i| {
                body.iter()
                    .map(|r| r[i].len())
                    .chain([header[i].len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let render = |cells: &[String]| -> String {
            let padded: Vec<String> = cells
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (c, &w))| {
                    if i == 0 {
                        format!("{c:<w$}")
                    } else {
                        format!("{c:>w$}")
                    }
                })
                .collect();
            format!("| {} |\n", padded.join(" | "))
        };
        let mut out = String::new();
        out.push_str(&render(&header));
        let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
        let _ = writeln!(out, "|-{}-|", rule.join("-|-"));
        for row in &body {
            out.push_str(&render(row));
        }
        out
    }

    /// One titled table per evaluation split.
    pub fn tables(&self) -> String {
        let mut out = String::new();
        for (i, split) in self.splits.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            let _ = writeln!(
                out,
                "Accuracy (%) on split `{split}`, master seed {}\n",
                self.master_seed
            );
            out.push_str(&self.table(split));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ablation report serializes to JSON")
    }

    /// Writes `ablation.txt` and `ablation.json` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<(PathBuf, PathBuf)> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let table = dir.join("ablation.txt");
        let json = dir.join("ablation.json");
        std::fs::write(&table, self.tables()).map_err(|e| Error::io(&table, e))?;
        std::fs::write(&json, self.to_json() + "\n").map_err(|e| Error::io(&json, e))?;
        Ok((table, json))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_dataset, DatasetConfig};

    fn setup() -> (TrainConfig, Dataset) {
        let data = generate_dataset(&DatasetConfig {
            n_samples: 60,
            seed: 21,
            ..DatasetConfig::lr_like()
        })
        .unwrap();
        let cfg = TrainConfig {
            epochs: 1,
            batch_size: 16,
            learning_rate: 1e-2,
            seed: 100,
            ..TrainConfig::lr_like()
        };
        (cfg, data)
    }

    #[test]
    fn table_has_four_rows_and_all_columns() {
        let (cfg, data) = setup();
        let report = ablate(&cfg, &data).unwrap();
        let table = report.table("test");
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 2 + 4);
        let header: Vec<&str> = lines[0]
            .split('|')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .collect();
        assert_eq!(
            header,
            [
                "Variant",
                "count",
                "presence",
                "comparison",
                "rural_urban",
                "OA",
                "AA"
            ]
        );
        let seeds: Vec<u64> = report.rows.iter().map(|r| r.seed).collect();
        assert_eq!(seeds, [100, 101, 102, 103]);
    }

    #[test]
    fn baseline_row_matches_standalone_run() {
        let (cfg, data) = setup();
        let report = ablate(&cfg, &data).unwrap();
        let standalone = train(
            &TrainConfig {
                cross_attention: false,
                infomax: false,
                ..cfg
            },
            &data,
        )
        .unwrap();
        let m = evaluate_split(&standalone.model, &data, "test").unwrap();
        assert_eq!(report.rows[0].metrics["test"], m);
    }

    #[test]
    fn variant_flags() {
        let flags: Vec<(bool, bool)> = AblationVariant::ALL.iter().map(|v| v.flags()).collect();
        assert_eq!(
            flags,
            [(false, false), (true, false), (false, true), (true, true)]
        );
    }
}

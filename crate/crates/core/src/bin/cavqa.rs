use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cavqa::ablation::ablate;
use cavqa::checkpoint::Checkpoint;
use cavqa::config::RunConfig;
use cavqa::data::{export_dataset, generate_dataset, import_dataset};
use cavqa::metrics::Metrics;
use cavqa::train::{evaluate_split, TrainConfig, Trainer};
use cavqa::{Error, Result};

#[derive(Parser)]
#[command(
    name = "cavqa",
    version,
    about = "Cross-attention VQA with a multimodal information bottleneck"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset file.
    GenData {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        n_samples: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model and write a checkpoint.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Evaluate a checkpoint on one split.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long)]
        json_out: Option<PathBuf>,
    },
    /// Train and evaluate the four ablation variants.
    Ablate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        train: TrainArgs,
    },
}

#[derive(Args)]
struct TrainArgs {
    /// TOML file; its [train] table is used.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// lr_like, hr_like or desk.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    no_cross_attention: bool,
    #[arg(long)]
    no_infomax: bool,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
}

impl TrainArgs {
    fn resolve(&self) -> Result<TrainConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => RunConfig::load(path)?.train,
            (None, Some(name)) => TrainConfig::preset(name)?,
            (None, None) => TrainConfig::default(),
        };
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if self.no_cross_attention {
            cfg.cross_attention = false;
        }
        if self.no_infomax {
            cfg.infomax = false;
        }
        if let Some(v) = self.lambda {
            cfg.lambda = v;
        }
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = self.batch_size {
            cfg.batch_size = v;
        }
        if let Some(v) = self.lr {
            cfg.learning_rate = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn metrics_table(split: &str, m: &Metrics) -> String {
    let mut out = format!("split {split}, {} samples\n", m.n_samples);
    for (c, acc) in &m.per_class_accuracy {
        out.push_str(&format!("{:<12} {:>7.2}\n", c.name(), 100.0 * acc));
    }
    out.push_str(&format!(
        "{:<12} {:>7.2}\n",
        "OA",
        100.0 * m.overall_accuracy
    ));
    out.push_str(&format!(
        "{:<12} {:>7.2}\n",
        "AA",
        100.0 * m.average_accuracy
    ));
    out
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("metrics serialize to JSON");
    std::fs::write(path, text + "\n").map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData {
            config,
            seed,
            n_samples,
            out,
        } => {
            let mut cfg = match config {
                Some(path) => RunConfig::load(path)?.data,
                None => Default::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(n) = n_samples {
                cfg.n_samples = n;
            }
            let dataset = generate_dataset(&cfg)?;
            export_dataset(&dataset, &out)?;
            let counts: Vec<String> = dataset
                .split_names()
                .iter()
                .map(|s| format!("{s}={}", dataset.split(s).len()))
                .collect();
            println!(
                "wrote {} samples ({}) to {}",
                dataset.samples.len(),
                counts.join(", "),
                out.display()
            );
        }
        Command::Train { data, out, train } => {
            let cfg = train.resolve()?;
            let dataset = import_dataset(&data)?;
            let mut trainer = Trainer::new(&cfg, &dataset)?;
            for _ in 0..cfg.epochs {
                let rec = trainer.run_epoch()?;
                log::info!(
                    "epoch {:>4}  final {:.5}  ce {:.5}  mi {:.5}  skl {:.5}  gamma {:.4}",
                    rec.epoch,
                    rec.loss.final_loss,
                    rec.loss.ce,
                    rec.loss.mi_estimate,
                    rec.loss.skl,
                    rec.loss.gamma
                );
            }
            let outcome = trainer.finish();
            let mut ckpt = Checkpoint::from_outcome(&outcome);
            for split in dataset.eval_splits() {
                let m = evaluate_split(&outcome.model, &dataset, &split)?;
                print!("{}", metrics_table(&split, &m));
                ckpt.metrics.insert(split, m);
            }
            ckpt.save(&out)?;
            println!("checkpoint written to {}", out.display());
        }
        Command::Eval {
            ckpt,
            data,
            split,
            json_out,
        } => {
            let model = Checkpoint::load(&ckpt)?.to_model()?;
            let dataset = import_dataset(&data)?;
            let m = evaluate_split(&model, &dataset, &split)?;
            print!("{}", metrics_table(&split, &m));
            if let Some(path) = json_out {
                #[derive(serde::Serialize)]
                struct Record<'a> {
                    checkpoint: &'a Path,
                    data: &'a Path,
                    split: &'a str,
                    metrics: &'a Metrics,
                }
                write_json(
                    &path,
                    &Record {
                        checkpoint: &ckpt,
                        data: &data,
                        split: &split,
                        metrics: &m,
                    },
                )?;
            }
        }
        Command::Ablate { data, out, train } => {
            let cfg = train.resolve()?;
            let dataset = import_dataset(&data)?;
            let report = ablate(&cfg, &dataset)?;
            let (table, json) = report.write(&out)?;
            print!("{}", report.tables());
            log::info!("wrote {} and {}", table.display(), json.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

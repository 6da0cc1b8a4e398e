//! `morerm`: synthesize data, train reward models, evaluate them and run the
//! K-sweep and ECE/alignment studies. Every output carries the digest of the
//! effective configuration and the seed it was produced with.

mod commands;
mod error;
mod output;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use morerm::metrics::ConfidenceMode;
use morerm::{ExperimentConfig, Scheme};

use crate::error::CliResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "morerm", version, about = "Multi-objective reward modeling experiments")]
struct Cli {
    /// TOML experiment config; built-in benchmark defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the synthesis and training seed (and the seed list of sweep-k / study).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory [default: runs; report: the run directory].
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// single:<i>, multitask or more.
    #[arg(long, global = true)]
    scheme: Option<Scheme>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    /// Confidence used for ECE: folded or literal.
    #[arg(long, global = true)]
    ece_confidence: Option<ConfidenceMode>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write synthetic train / test JSONL files and the ground-truth sidecar.
    Synth,
    /// Train one reward model.
    Train {
        /// JSONL file, or a directory containing train.jsonl.
        #[arg(long)]
        data: PathBuf,
    },
    /// Score a checkpoint: accuracy, ECE, reliability bins, reward-difference statistics.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// JSONL file, or a directory containing test_sources.jsonl.
        #[arg(long)]
        test: PathBuf,
    },
    /// MORE vs MultiTask for each K on the first K sources.
    SweepK {
        /// Comma-separated K values, overriding the config.
        #[arg(long, value_delimiter = ',')]
        k: Option<Vec<usize>>,
    },
    /// ECE against best-of-S alignment over single-source, MultiTask and MORE models.
    Study,
    /// Aggregate metrics CSVs of a run directory over seeds.
    Report { run_dir: PathBuf },
}

impl Cli {
    fn config(&self) -> CliResult<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg = cfg.with_seed(seed);
            cfg.sweep.seeds = vec![seed];
            cfg.study.seeds = vec![seed];
        }
        if let Some(s) = self.scheme {
            cfg.train.scheme = s;
        }
        if let Some(c) = self.ece_confidence {
            cfg.eval.confidence = c;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn out(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("runs"))
    }

    fn run(&self) -> CliResult<()> {
        let cfg = self.config()?;
        let out = self.out();
        match &self.command {
            Command::Synth => commands::synth(&cfg, &out),
            Command::Train { data } => commands::train(&cfg, data, &out, self.format),
            Command::Eval { checkpoint, test } => {
                commands::eval(&cfg, checkpoint, test, self.scheme, &out, self.format)
            }
            Command::SweepK { k } => {
                let mut cfg = cfg;
                if let Some(k) = k {
                    cfg.sweep.k_values = k.clone();
                }
                commands::sweep_k(&cfg, &out, self.format)
            }
            Command::Study => commands::study(&cfg, &out, self.format),
            Command::Report { run_dir } => {
                let out = self.out.clone().unwrap_or_else(|| run_dir.clone());
                report::report(run_dir, &out, cfg.eval.outlier_fence, self.format).map(|_| ())
            }
        }
    }
}

fn fail(category: &str, message: &str, code: u8) -> ExitCode {
    eprintln!("error[{category}]: {message}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            return fail("usage", first.trim_start_matches("error: "), 2);
        }
    };
    match cli.run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.category(), &e.one_line(), 1),
    }
}

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use super::{execute, AppError, Command, RunConfig};
use crate::filters::Preset;

#[derive(Debug, Parser)]
#[command(name = "lf-forge", version, about = "Leader-follower pair identification and filtering")]
pub struct Cli {
    /// Run configuration (JSON). Defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `out_dir` in the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Filter preset: approach1, approach2, approach3 or approach4.
    #[arg(long, global = true)]
    pub preset: Option<String>,
    /// Seed for fold assignment and synthetic generation.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Validate and resample the raw trajectory CSV.
    Ingest,
    /// Desirable-gap table for every class.
    Thresholds,
    /// Extract candidate leader-follower pairs.
    Pairs,
    /// Run the filter stages.
    Filter,
    /// Wavelet speed matching on every candidate pair.
    Wavelet,
    /// Before/after regression evaluation.
    Eval,
    /// Write review dossiers (flagged pairs unless --all).
    Dossier {
        #[arg(long)]
        all: bool,
    },
    /// Manual review.
    Review {
        #[command(subcommand)]
        action: ReviewSub,
    },
    /// Generate a labeled synthetic trajectory suite.
    Synth,
    /// Markdown report over the artifacts present.
    Report,
    /// Every stage from ingest to report.
    All {
        /// Write a dossier for every pair.
        #[arg(long)]
        all: bool,
    },
}

#[derive(Debug, Subcommand)]
pub enum ReviewSub {
    /// Apply reviewer decisions to the filtered pairs.
    Apply {
        #[arg(long, required = true, num_args = 1..)]
        decisions: Vec<PathBuf>,
    },
}

impl Sub {
    fn into_command(self) -> Command {
        match self {
            Sub::Ingest => Command::Ingest,
            Sub::Thresholds => Command::Thresholds,
            Sub::Pairs => Command::Pairs,
            Sub::Filter => Command::Filter,
            Sub::Wavelet => Command::Wavelet,
            Sub::Eval => Command::Eval,
            Sub::Dossier { all } => Command::Dossier { all },
            Sub::Review {
                action: ReviewSub::Apply { decisions },
            } => Command::ReviewApply { decisions },
            Sub::Synth => Command::Synth,
            Sub::Report => Command::Report,
            Sub::All { all } => Command::All { all_dossiers: all },
        }
    }
}

/// Config with command-line overrides applied.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig, AppError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if let Some(p) = &cli.preset {
        cfg.pipeline.preset = p.parse::<Preset>().map_err(|e| AppError::Config {
            path: "--preset".into(),
            message: e.to_string(),
        })?;
        cfg.pipeline.stages = None;
    }
    if let Some(seed) = cli.seed {
        cfg.eval.seed = seed;
        cfg.synth.seed = seed;
    }
    Ok(cfg)
}

/// Parses arguments, runs the subcommand and returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = resolve_config(&cli).and_then(|cfg| execute(&cli.command.into_command(), &cfg));
    match result {
        Ok(steps) => {
            for s in steps {
                println!("{}: {}", s.subcommand, s.summary);
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

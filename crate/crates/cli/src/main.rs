//! `aim`: search interactions, interaction functions and embedding sizes
//! for CTR models, then re-train the selected architecture.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use aim_core::data::{DataFormat, SplitTag};
use aim_core::interactions::InteractionTuple;
use aim_core::model::HeadKind;
use aim_core::synth::SynthConfig;
use aim_core::AimError;
use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use crate::commands::{print_json, print_line};
use crate::config::RunConfig;

#[derive(Parser)]
#[command(name = "aim", version, about)]
struct Cli {
    /// Log progress to stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with planted interactions.
    Synth {
        /// Output directory for data.svm and manifest.json.
        #[arg(long)]
        out: PathBuf,
        /// TOML generator settings (fields, cardinality, instances, planted_pairs,
        /// interaction_scale, planted, main_effect, noise_fields, positive_ratio, seed).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        instances: Option<usize>,
        #[arg(long)]
        fields: Option<usize>,
    },
    /// Stage 1: search interactions and interaction functions.
    SearchInteractions {
        #[arg(long)]
        config: PathBuf,
    },
    /// Stage 2: search embedding dimensions and write artifact.json.
    SearchEmbed {
        #[arg(long)]
        config: PathBuf,
    },
    /// Stage 3: re-train the searched architecture.
    Retrain {
        #[arg(long)]
        config: PathBuf,
        /// Artifact to re-train; defaults to the run directory's artifact.json.
        #[arg(long)]
        artifact: Option<PathBuf>,
        /// Output head, overriding the config (fm, deepfm, ipnn).
        #[arg(long)]
        head: Option<HeadKind>,
    },
    /// Run all three stages.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
    },
    /// Evaluate a checkpoint on a data file.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "svm")]
        format: DataFormat,
        /// train, valid or test re-applies the checkpoint's split; all uses every instance.
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// AUC of per-tuple training click rates on the test split.
    StatsAuc {
        #[arg(long)]
        config: PathBuf,
        /// 1-based fields, e.g. 1,3. Repeatable; all pairs when omitted.
        #[arg(long = "tuple", value_parser = parse_tuple)]
        tuples: Vec<InteractionTuple>,
    },
    /// Run the pipeline once per seed and summarize test metrics.
    Repeat {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
        seeds: Vec<u64>,
    },
}

fn parse_tuple(s: &str) -> Result<InteractionTuple, String> {
    let fields: Vec<usize> = s
        .split(',')
        .map(|f| f.trim().parse().map_err(|_| format!("bad field `{f}`")))
        .collect::<Result<_, _>>()?;
    InteractionTuple::from_one_based(&fields).map_err(|e| e.to_string())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { out, config, seed, instances, fields } => {
            let mut cfg: SynthConfig = match config {
                Some(path) => {
                    let text = std::fs::read_to_string(&path)
                        .map_err(|e| AimError::Config(format!("cannot read {}: {e}", path.display())))?;
                    toml::from_str(&text).map_err(|e| AimError::Config(format!("{}: {e}", path.display())))?
                }
                None => SynthConfig::default(),
            };
            cfg.seed = seed.unwrap_or(cfg.seed);
            cfg.instances = instances.unwrap_or(cfg.instances);
            cfg.fields = fields.unwrap_or(cfg.fields);
            commands::synth(&cfg, &out)
        }
        Command::SearchInteractions { config } => {
            let cfg = RunConfig::load(&config)?;
            let data = commands::load(&cfg)?;
            print_json(&commands::search_interactions(&cfg, &data)?)
        }
        Command::SearchEmbed { config } => {
            let cfg = RunConfig::load(&config)?;
            let data = commands::load(&cfg)?;
            print_json(&commands::search_embed(&cfg, &data)?)
        }
        Command::Retrain { config, artifact, head } => {
            let cfg = RunConfig::load(&config)?;
            let data = commands::load(&cfg)?;
            print_json(&commands::retrain(&cfg, &data, artifact.as_deref(), head)?)
        }
        Command::Pipeline { config } => {
            let cfg = RunConfig::load(&config)?;
            print_json(&commands::pipeline(&cfg)?)
        }
        Command::Evaluate { checkpoint, data, format, split } => {
            let split = match split.as_str() {
                "all" => None,
                other => Some(other.parse::<SplitTag>()?),
            };
            print_json(&commands::evaluate_checkpoint(&checkpoint, &data, format, split)?)
        }
        Command::StatsAuc { config, tuples } => {
            let cfg = RunConfig::load(&config)?;
            for line in commands::stats_auc(&cfg, &tuples)? {
                print_line(&serde_json::to_string(&line)?)?;
            }
            Ok(())
        }
        Command::Repeat { config, seeds } => {
            let cfg = RunConfig::load(&config)?;
            print_json(&commands::repeat(&cfg, &seeds).context("repeated runs")?)
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<AimError>()) {
        Some(e) if e.is_user_error() => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

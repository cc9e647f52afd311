mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use pjfit_core::error::Error;
use pjfit_core::model::Ablation;

/// Person-job fit ranking: synthesize data, augment short JDs, train, evaluate and rank.
#[derive(Debug, Parser)]
#[command(name = "pjfit", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ClientKind {
    Mock,
    Http,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset directory (entities, train/test pairs, metadata).
    Synth {
        /// JSON generator settings; defaults apply to missing fields.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Rewrite short job descriptions and write an updated dataset directory plus augment_log.jsonl.
    Augment {
        /// Input dataset directory.
        #[arg(long)]
        data: PathBuf,
        /// Directory with prompt.tmpl and optional prompt.<category>.tmpl overrides (built-in template if omitted).
        #[arg(long)]
        template_dir: Option<PathBuf>,
        /// JDs with fewer characters than this are rewritten.
        #[arg(long, default_value_t = 200)]
        threshold: usize,
        /// Completion backend. `http` reads PJF_LLM_ENDPOINT, PJF_LLM_MODEL and PJF_LLM_API_KEY.
        #[arg(long, value_enum, default_value_t = ClientKind::Mock)]
        client: ClientKind,
        /// Maximum concurrent completion requests.
        #[arg(long, default_value_t = 4)]
        parallelism: usize,
        /// Seed of the mock client.
        #[arg(long, default_value_t = 0)]
        mock_seed: u64,
        /// Share of mock requests that fail (fault injection).
        #[arg(long, default_value_t = 0.0)]
        mock_failure_rate: f64,
        /// Output dataset directory (may equal --data).
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model and write a checkpoint and a JSON report.
    Train {
        /// Dataset directory.
        #[arg(long)]
        data: PathBuf,
        /// JSON run config with `model` and `train` sections.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides train.seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides model.ablation.
        #[arg(long, value_parser = parse_ablation)]
        ablation: Option<Ablation>,
        #[arg(long)]
        checkpoint_out: PathBuf,
        #[arg(long)]
        report_out: PathBuf,
    },
    /// Evaluate a checkpoint on the dataset's test pairs.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        report_out: PathBuf,
    },
    /// Rank candidates for one job and write a TSV (rank, candidate_id, score).
    Rank {
        #[arg(long)]
        job: String,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Candidate ids to rank (comma separated or repeated); all candidates when omitted.
        #[arg(long, value_delimiter = ',')]
        candidates: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_ablation(s: &str) -> Result<Ablation, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 1,
        Error::Data(_) | Error::Checkpoint(_) | Error::Metric(_) | Error::Json(_) => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).format_timestamp(None).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Synth { config, seed, out } => commands::synth(config.as_deref(), seed, &out),
        Command::Augment { data, template_dir, threshold, client, parallelism, mock_seed, mock_failure_rate, out } => {
            let client = match client {
                ClientKind::Mock => commands::ClientChoice::Mock { seed: mock_seed, failure_rate: mock_failure_rate },
                ClientKind::Http => commands::ClientChoice::Http,
            };
            commands::augment(&data, template_dir.as_deref(), threshold, client, parallelism, &out)
        }
        Command::Train { data, config, seed, ablation, checkpoint_out, report_out } => {
            commands::train(&data, config.as_deref(), seed, ablation, &checkpoint_out, &report_out)
        }
        Command::Eval { data, checkpoint, report_out } => commands::eval(&data, &checkpoint, &report_out),
        Command::Rank { job, checkpoint, data, candidates, out } => {
            commands::rank(&job, &checkpoint, &data, &candidates, &out)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

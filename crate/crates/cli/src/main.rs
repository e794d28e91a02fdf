//! `semcomm`: extract, render, receive and score semantic payloads.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "semcomm", version, about = "Semantic image transmission toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    /// Deterministic in-process models.
    Mock,
    /// Remote models behind a protocol v1 gateway.
    Gateway,
}

#[derive(Args, Debug, Clone)]
pub struct BackendArgs {
    #[arg(long, value_enum, default_value_t = BackendKind::Mock)]
    pub backend: BackendKind,
    /// Gateway base URL, e.g. http://127.0.0.1:8000.
    #[arg(long, env = semcomm_gateway_client::URL_ENV)]
    pub gateway_url: Option<String>,
}

#[derive(Args, Debug, Clone)]
pub struct ScoringArgs {
    /// Score captions on all tokens, stop words included.
    #[arg(long)]
    pub no_stop_word_removal: bool,
    /// Compute the matching rate over non-background reference pixels only.
    #[arg(long)]
    pub foreground_smr: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Extract caption, segmentation and palette from an image into an SMC1 file.
    Extract {
        image: PathBuf,
        output: PathBuf,
        /// Set the background palette entry to white.
        #[arg(long)]
        recolor_bg: bool,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Render the colored-segmented image carried by an SMC1 file.
    Render { payload: PathBuf, output: PathBuf },
    /// Generate candidates from an SMC1 file and write the best one.
    Receive {
        payload: PathBuf,
        output: PathBuf,
        /// Number of candidates to generate.
        #[arg(long, default_value_t = semcomm_core::pipeline::DEFAULT_CANDIDATE_COUNT as u64,
              value_parser = clap::value_parser!(u64).range(1..=u32::MAX as u64))]
        k: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Weight of the matching rate in the combined score, in [0, 1].
        #[arg(long, default_value_t = 0.5, value_parser = parse_weight)]
        smr_weight: f64,
        #[command(flatten)]
        scoring: ScoringArgs,
        #[arg(long)]
        negative_prompt: Option<String>,
        /// Write one JSON object per candidate to this file.
        #[arg(long)]
        audit_json: Option<PathBuf>,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Score a candidate image against an SMC1 file.
    Score {
        payload: PathBuf,
        candidate: PathBuf,
        #[arg(long)]
        no_stop_word_removal: bool,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Payload size table (CSV) for every image in a directory.
    BenchSizes {
        directory: PathBuf,
        #[arg(long)]
        recolor_bg: bool,
        #[command(flatten)]
        backend: BackendArgs,
    },
}

fn parse_weight(s: &str) -> Result<f64, String> {
    let w: f64 = s.parse().map_err(|_| format!("not a number: {s}"))?;
    if (0.0..=1.0).contains(&w) {
        Ok(w)
    } else {
        Err(format!("must be within [0, 1], got {w}"))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Extract {
            image,
            output,
            recolor_bg,
            backend,
        } => commands::extract(&image, &output, recolor_bg, &backend),
        Command::Render { payload, output } => commands::render(&payload, &output),
        Command::Receive {
            payload,
            output,
            k,
            seed,
            smr_weight,
            scoring,
            negative_prompt,
            audit_json,
            jobs,
            backend,
        } => commands::receive(commands::ReceiveOptions {
            payload: &payload,
            output: &output,
            k: k as usize,
            seed,
            smr_weight,
            scoring: &scoring,
            negative_prompt: negative_prompt.as_deref(),
            audit_json: audit_json.as_deref(),
            jobs,
            backend: &backend,
        }),
        Command::Score {
            payload,
            candidate,
            no_stop_word_removal,
            backend,
        } => commands::score(&payload, &candidate, no_stop_word_removal, &backend),
        Command::BenchSizes {
            directory,
            recolor_bg,
            backend,
        } => commands::bench_sizes(&directory, recolor_bg, &backend),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

//! `auralab`: virtual-stage and laboratory-room auralization pipeline.

mod commands;
mod config;
mod manifest;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail};
use clap::{Args, Parser, Subcommand};

use commands::{InStage, Outputs, StageResult, CONFIG_STAGE};
use manifest::Manifest;

#[derive(Debug, Parser)]
#[command(name = "auralab", version, about = "Virtual-stage auralization and residual-sound analysis")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration file (`[run]` section, `key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Compare the hashes of this run's outputs against the existing manifest.
    #[arg(long, global = true)]
    check: bool,

    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct Overrides {
    /// Virtual stage presets or scene files, comma separated.
    #[arg(long, global = true)]
    scene_stage: Option<String>,
    /// Laboratory room presets or scene files, comma separated.
    #[arg(long, global = true)]
    scene_lab: Option<String>,
    /// Dry input WAV; a synthetic excerpt is used when absent.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    sample_rate: Option<u32>,
    /// Rays per simulation.
    #[arg(long, global = true)]
    rays: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Image-source order for shoebox lab rooms.
    #[arg(long, global = true)]
    order: Option<u32>,
    /// Response length in seconds (default: from the Sabine estimate).
    #[arg(long, global = true)]
    max_time: Option<f64>,
    #[arg(long, global = true)]
    window_ms: Option<f64>,
    /// Frame hop; defaults to the window.
    #[arg(long, global = true)]
    hop_ms: Option<f64>,
    #[arg(long, global = true)]
    jnd_db: Option<f64>,
    /// Frames quieter than the loudest by more than this are not analyzed.
    #[arg(long, global = true)]
    gate_db: Option<f64>,
    /// Artifact kinds to write: any of wav,csv,svg,json.
    #[arg(long, global = true)]
    emit: Option<String>,
    /// Seed of the synthetic excerpt.
    #[arg(long, global = true)]
    excerpt_seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize h_v and h_u for every stage and lab room.
    Simulate,
    /// Convolve the input with the responses written by `simulate`.
    Auralize,
    /// Level tracks, boxplot statistics and verdicts for the written signals.
    Analyze,
    /// simulate, auralize and analyze in one run.
    Pipeline,
    /// Verify the files listed in the output directory's manifest.
    Check,
}

fn init_threads() -> anyhow::Result<()> {
    let Ok(v) = std::env::var("AURALAB_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| anyhow!("AURALAB_THREADS must be a positive integer, got `{v}`"))?;
    if n == 0 {
        bail!("AURALAB_THREADS must be a positive integer, got `{v}`");
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn check_manifest(cli: &Cli) -> StageResult<()> {
    let out = cli.overrides.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let manifest = Manifest::load(&out)
        .stage(CONFIG_STAGE)?
        .ok_or_else(|| anyhow!("no manifest in {}", out.display()))
        .stage(CONFIG_STAGE)?;
    let bad = manifest.verify(&out);
    if !bad.is_empty() {
        return Err(anyhow!("{} file(s) failed verification:\n  {}", bad.len(), bad.join("\n  ")))
            .stage("check");
    }
    println!("{} files verified", manifest.files.len());
    Ok(())
}

fn run(cli: &Cli) -> StageResult<()> {
    init_threads().stage(CONFIG_STAGE)?;
    if matches!(cli.command, Command::Check) {
        return check_manifest(cli);
    }
    let cfg = config::load(cli).stage(CONFIG_STAGE)?;
    let mut out = Outputs::open(&cfg.out).stage(CONFIG_STAGE)?;
    let previous = if cli.check {
        let prev = out.manifest.clone();
        if prev.files.is_empty() {
            return Err(anyhow!("--check needs an existing manifest in {}", cfg.out.display()))
                .stage(CONFIG_STAGE);
        }
        Some(prev)
    } else {
        None
    };

    match cli.command {
        Command::Simulate => {
            commands::simulate(&cfg, &mut out, true)?;
        }
        Command::Auralize => {
            commands::auralize_from_files(&cfg, &mut out)?;
        }
        Command::Analyze => {
            let signals = commands::load_signals(&cfg)?;
            let report = commands::analyze_pairs(&cfg, &mut out, &signals)?;
            commands::print_summary(&report);
        }
        Command::Pipeline => {
            let report = commands::pipeline(&cfg, &mut out)?;
            commands::print_summary(&report);
        }
        Command::Check => unreachable!(),
    }

    if let Some(prev) = previous {
        let diff = out.written.differences(&prev);
        if !diff.is_empty() {
            return Err(anyhow!(
                "{} output(s) differ from the manifest:\n  {}",
                diff.len(),
                diff.join("\n  ")
            ))
            .stage("check");
        }
        println!("{} outputs match the manifest", out.written.files.len());
    }
    out.finish().stage("manifest")?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error in stage `{}`: {:#}", e.stage, e.error);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

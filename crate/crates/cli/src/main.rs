use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sincfront::{Error, FrontendKind};

mod commands;
mod outdir;

#[derive(Debug, Parser)]
#[command(name = "sincfront", version, about = "Sinc filterbank front-end experiments on raw waveforms")]
struct Cli {
    /// Experiment config, TOML or JSON (by extension). Defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Overrides both the run seed and the corpus seed.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Output directory; created if missing.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// More log output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize the configured corpus as WAV files plus manifest.jsonl.
    GenCorpus,
    /// Train a classifier on the train split of a manifest.
    Train {
        #[arg(long, value_name = "PATH")]
        manifest: PathBuf,
        /// Replaces network.frontend.kind from the config.
        #[arg(long)]
        frontend: Option<FrontendKind>,
        /// Replaces train.epochs from the config.
        #[arg(long)]
        epochs: Option<usize>,
        /// Write zero wall times so reruns are byte-identical.
        #[arg(long)]
        no_timing: bool,
    },
    /// Export cutoffs, taps and frequency responses of a checkpoint's front-end.
    InspectFilters {
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
        /// Response points from 0 to Nyquist; defaults to analysis.n_points.
        #[arg(long)]
        n_points: Option<usize>,
    },
    /// Score d-vector verification trials on speakers unseen in training.
    Verify {
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
        /// Manifest whose train split enrols each speaker.
        #[arg(long, value_name = "PATH")]
        enroll: PathBuf,
        /// Manifest whose test split supplies the trial utterances.
        #[arg(long, value_name = "PATH")]
        trials: PathBuf,
    },
    /// Frame and sentence error rates on a manifest split.
    Eval {
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
        #[arg(long, value_name = "PATH")]
        manifest: PathBuf,
        #[arg(long, default_value = "test", value_parser = ["train", "test"])]
        split: String,
    },
}

/// Glibc returns large freed blocks to the OS and maps them afresh on the
/// next allocation, so every training step page-faults its activations back
/// in. Keeping them on the heap is worth about a third of the runtime.
fn tune_allocator() {
    #[cfg(all(target_os = "linux", target_env = "gnu"))]
    unsafe {
        libc::mallopt(libc::M_MMAP_MAX, 0);
        libc::mallopt(libc::M_TRIM_THRESHOLD, i32::MAX);
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.render().to_string();
            let first = rendered.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error: usage: {first}");
            return ExitCode::from(2);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    tune_allocator();

    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: {}: {msg}", e.kind());
            ExitCode::FAILURE
        }
    }
}

fn require_out(cli: &Cli) -> Result<&PathBuf, Error> {
    cli.out
        .as_ref()
        .ok_or_else(|| Error::Config("--out <DIR> is required".into()))
}

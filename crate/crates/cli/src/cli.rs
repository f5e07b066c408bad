use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::commands::{self, Run};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::pipeline::EncoderSource;
use crate::sweep::{self, Protocol};

#[derive(Debug, Parser)]
#[command(name = "uijepa", version, about = "Synthetic UI video data, JEPA tuning, intent decoding and evaluation")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML run config; defaults are used for missing keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Run directory for every artifact.
    #[arg(long, global = true, default_value = "run")]
    pub out: PathBuf,
    /// Worker threads for ingest, encoding and decoding.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic UI video dataset into the run directory.
    Datagen,
    /// Self-supervised tuning of the video encoder.
    JepaTune {
        #[arg(long)]
        dataset: PathBuf,
        /// Continue from a JEPA checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Stop once this many steps are done; resume later with `--resume`.
        #[arg(long)]
        stop_after: Option<u64>,
    },
    /// Train the intent decoder on a frozen encoder.
    DecodeTune {
        #[arg(long)]
        dataset: PathBuf,
        /// JEPA checkpoint, or `random` for an untrained encoder.
        #[arg(long)]
        encoder: String,
    },
    /// Score a trained model on the configured eval splits.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Model name in the metrics CSV (default: the checkpoint's directory name).
        #[arg(long)]
        name: Option<String>,
    },
    /// Silhouette, video-text correlation and 2-D projection of encoders.
    EmbedAnalyze {
        #[arg(long)]
        dataset: PathBuf,
        /// Checkpoint or `random`; repeat to compare encoders side by side.
        #[arg(long, required = true)]
        encoder: Vec<String>,
    },
    /// Run an ablation grid.
    Sweep {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum)]
        protocol: Protocol,
        /// Run up to this many cells at once, each in its own process.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Run a single cell and leave merging to the caller.
        #[arg(long, hide = true)]
        cell: Option<usize>,
    },
}

/// Build the run settings from the config file and flag overrides.
pub fn load_run(config: Option<&Path>, seed: Option<u64>, out: &Path, threads: usize) -> CliResult<Run> {
    let (mut cfg, text) = match config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            (RunConfig::from_toml(&text)?, text)
        }
        None => {
            let cfg = RunConfig::default();
            let text = cfg.to_toml();
            (cfg, text)
        }
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if threads == 0 {
        return Err(CliError::Config("--threads must be at least 1".into()));
    }
    Ok(Run { config: cfg, config_text: text, out: out.to_path_buf(), threads })
}

pub fn execute(cli: &Cli) -> CliResult<String> {
    let c = &cli.common;
    let run = load_run(c.config.as_deref(), c.seed, &c.out, c.threads)?;
    let out = run.out.display();
    Ok(match &cli.command {
        Command::Datagen => format!("wrote {} samples to {out}", commands::cmd_datagen(&run)?),
        Command::JepaTune { dataset, resume, stop_after } => {
            let rows = commands::cmd_jepa_tune(&run, dataset, resume.as_deref(), *stop_after)?;
            match rows.last() {
                Some(r) => format!("trained to step {}, loss {:.4}; wrote {out}", r.step + 1, r.loss),
                None => format!("nothing to train; wrote {out}"),
            }
        }
        Command::DecodeTune { dataset, encoder } => {
            let rows = commands::cmd_decode_tune(&run, dataset, &EncoderSource::parse(encoder))?;
            format!("{} decoder steps; wrote {out}", rows.len())
        }
        Command::Eval { dataset, model, name } => {
            let rows = commands::cmd_eval(&run, model, dataset, name.as_deref())?;
            let parts: Vec<String> = rows.iter().map(|r| format!("{:?} IntentSim {:.2}", r.split, r.intent_sim)).collect();
            format!("{}; wrote {out}", parts.join(", "))
        }
        Command::EmbedAnalyze { dataset, encoder } => {
            let sources: Vec<EncoderSource> = encoder.iter().map(|e| EncoderSource::parse(e)).collect();
            let rows = commands::cmd_embed_analyze(&run, dataset, &sources)?;
            let parts: Vec<String> =
                rows.iter().map(|r| format!("{}: silhouette {:.4}, pearson {:.4}", r.encoder, r.silhouette, r.pearson)).collect();
            format!("{}; wrote {out}", parts.join("; "))
        }
        Command::Sweep { dataset, protocol, jobs, cell } => match cell {
            Some(n) => {
                sweep::run_single_cell(&run, dataset, *protocol, *n)?;
                format!("cell {n} done")
            }
            None => {
                if *jobs == 0 {
                    return Err(CliError::Config("--jobs must be at least 1".into()));
                }
                let rows = sweep::run_sweep(&run, dataset, *protocol, *jobs)?;
                format!("{} rows; wrote {out}", rows.len())
            }
        },
    })
}

/// Parse `args` (program name first) and run. Returns the exit code and the
/// message that would be printed (on stdout for 0, stderr otherwise).
pub fn run_with_args<I, T>(args: I) -> (i32, String)
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => return (if e.use_stderr() { 2 } else { 0 }, e.render().to_string()),
    };
    match execute(&cli) {
        Ok(msg) => (0, msg),
        Err(e) => (e.exit_code(), format!("error: {e}")),
    }
}

/// Parse `args` (program name first), run, print the outcome and return the
/// exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let (code, msg) = run_with_args(args);
    if code == 0 {
        println!("{}", msg.trim_end());
    } else {
        eprintln!("{}", msg.trim_end());
    }
    code
}

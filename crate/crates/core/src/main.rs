use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ivdoa::commands::{cmd_estimate, cmd_eval, cmd_plot, cmd_simulate, cmd_train, EstimateMode, EvalItem};
use ivdoa::config::{ConfigBuilder, RunConfig};
use ivdoa::Error;

/// Intensity-vector DOA estimation for first-order ambisonics.
///
/// Configuration precedence: defaults < --config file < IVDOA_<KEY>
/// environment variables < flags (including --set KEY=VALUE).
#[derive(Parser)]
#[command(name = "ivdoa", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML key-value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Files processed concurrently.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// on|off
    #[arg(long, global = true)]
    augment: Option<String>,
    /// Energy mask for the baseline (on|off).
    #[arg(long, global = true)]
    mask: Option<String>,
    /// Activity thresholding and per-event median smoothing (on|off).
    #[arg(long, global = true)]
    smooth: Option<String>,
    /// wxyz|acn
    #[arg(long = "channel-order", global = true)]
    channel_order: Option<String>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    /// Any configuration key, e.g. --set hop_ms=10
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Render scenes from a scene file into WAV + metadata CSV.
    Simulate {
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-frame DOA and activity for each input WAV.
    Estimate {
        /// baseline|baseline-nomask|neural
        #[arg(long, default_value = "baseline")]
        mode: String,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Train a network from lists of `wav,csv` lines.
    Train {
        #[arg(long = "train")]
        train_list: PathBuf,
        #[arg(long = "val")]
        val_list: Option<PathBuf>,
        /// Output checkpoint.
        #[arg(long)]
        out: PathBuf,
        /// Loss log CSV (default: checkpoint path with .csv).
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// DOA error and frame recall; --est/--gt (and optional --fold) pair up by position.
    Eval {
        #[arg(long, required = true)]
        est: Vec<PathBuf>,
        #[arg(long, required = true)]
        gt: Vec<PathBuf>,
        #[arg(long)]
        fold: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time/azimuth/elevation plots plus plot-data CSV.
    Plot {
        #[arg(long, required = true)]
        est: Vec<PathBuf>,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn build_config(c: &Common) -> ivdoa::Result<RunConfig> {
    let mut b = ConfigBuilder::new();
    if let Some(p) = &c.config {
        b = b.file(p)?;
    }
    b = b.env(std::env::vars())?;
    let flags = [
        ("seed", c.seed.map(|v| v.to_string())),
        ("jobs", c.jobs.map(|v| v.to_string())),
        ("augment", c.augment.clone()),
        ("mask", c.mask.clone()),
        ("smooth", c.smooth.clone()),
        ("channel_order", c.channel_order.clone()),
        ("epochs", c.epochs.map(|v| v.to_string())),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            b = b.set(k, &v)?;
        }
    }
    for kv in &c.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::InvalidArgument(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        b = b.set(k.trim(), v)?;
    }
    b.build()
}

fn run(cli: Cli) -> ivdoa::Result<()> {
    let cfg = build_config(&cli.common)?;
    match cli.command {
        Command::Simulate { scenes, out } => {
            let names = cmd_simulate(&cfg, &scenes, &out)?;
            eprintln!("wrote {} scenes to {}", names.len(), out.display());
        }
        Command::Estimate { mode, checkpoint, out, inputs } => {
            let files = cmd_estimate(&cfg, &inputs, mode.parse::<EstimateMode>()?, checkpoint.as_deref(), &out)?;
            eprintln!("wrote {} frame files to {}", files.len(), out.display());
        }
        Command::Train { train_list, val_list, out, log } => {
            cmd_train(&cfg, &train_list, val_list.as_deref(), &out, log.as_deref(), |l| {
                eprintln!("epoch {:>3}  lr {:.2e}  loss {:.5}  doa {:.5}  sad {:.5}  val DE {:.3}", l.epoch, l.lr, l.loss, l.loss_doa, l.loss_sad, l.val_de);
            })?;
        }
        Command::Eval { est, gt, fold, out } => {
            if est.len() != gt.len() || !(fold.is_empty() || fold.len() == est.len()) {
                return Err(Error::InvalidArgument("--est, --gt (and --fold, if given) must be repeated the same number of times".into()));
            }
            let items = est
                .iter()
                .zip(&gt)
                .enumerate()
                .map(|(i, (e, g))| EvalItem {
                    fold: fold.get(i).cloned().unwrap_or_else(|| e.file_stem().map_or_else(|| i.to_string(), |s| s.to_string_lossy().into_owned())),
                    est: e.clone(),
                    gt: g.clone(),
                })
                .collect::<Vec<_>>();
            print!("{}", cmd_eval(&cfg, &items, &out)?.to_table());
        }
        Command::Plot { est, gt, out } => {
            let files = cmd_plot(&cfg, &est, &gt, &out)?;
            eprintln!("wrote {} plots to {}", files.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(_) => ExitCode::from(3),
    }
}

//! The `simulate | estimate | train | eval | plot` commands. Each takes the
//! effective [`RunConfig`] plus its own arguments, writes its outputs and
//! echoes the configuration next to them.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::io::{
    plot_rows, read_foa, read_frame_csv, read_metadata_csv, read_reference_csv, write_foa, write_frame_csv, write_loss_log, write_metadata_csv,
    write_metrics_csv, write_plot_csv, write_svg, parse_scene_file,
};
use crate::metrics::{frame_recall, DeAccumulator, MetricsReport};
use crate::neural::{load_checkpoint, save_checkpoint, train, EpochLog, FeatureExtractor, Network, TrainExample};
use crate::pipeline::{run_baseline, run_neural, smooth_with_activity, Estimate};
use crate::scene::simulate_scene_with;
use crate::tracks::rasterize_events;

/// Name of the `wav,csv` list written by `simulate`, usable as a training list.
pub const SCENE_LIST: &str = "scenes.txt";

fn pool(cfg: &RunConfig) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new().num_threads(cfg.jobs).build().map_err(|e| Error::InvalidState(format!("thread pool: {e}")))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::InvalidInput(format!("{}: {e}", dir.display())))
}

fn stem(path: &Path) -> Result<String> {
    path.file_stem().and_then(|s| s.to_str()).map(str::to_string).ok_or_else(|| Error::InvalidInput(format!("{}: no file name", path.display())))
}

/// Renders every scene of a scene file into `<name>.wav` + `<name>.csv`.
pub fn cmd_simulate(cfg: &RunConfig, scenes: &Path, out_dir: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(scenes).map_err(|e| Error::InvalidInput(format!("{}: {e}", scenes.display())))?;
    let entries = parse_scene_file(&text, cfg.sample_rate)?;
    ensure_dir(out_dir)?;
    let stft = cfg.stft();
    pool(cfg)?.install(|| {
        entries.par_iter().try_for_each(|e| -> Result<()> {
            let render = simulate_scene_with(&e.spec, &stft)?;
            write_foa(&out_dir.join(format!("{}.wav", e.name)), &render.mixture)?;
            write_metadata_csv(&out_dir.join(format!("{}.csv", e.name)), &e.spec.timed_events())
        })
    })?;
    let list: String = entries.iter().map(|e| format!("{0}.wav,{0}.csv\n", e.name)).collect();
    std::fs::write(out_dir.join(SCENE_LIST), list)?;
    cfg.echo_to(out_dir)?;
    Ok(entries.into_iter().map(|e| e.name).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateMode {
    /// Energy-masked intensity vectors (masking follows `RunConfig::mask`).
    Baseline,
    BaselineNoMask,
    Neural,
}

impl std::str::FromStr for EstimateMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Self::Baseline),
            "baseline-nomask" => Ok(Self::BaselineNoMask),
            "neural" => Ok(Self::Neural),
            other => Err(Error::InvalidArgument(format!("unknown mode '{other}' (baseline|baseline-nomask|neural)"))),
        }
    }
}

/// Writes one frame CSV per input, named after the input file.
pub fn cmd_estimate(cfg: &RunConfig, inputs: &[PathBuf], mode: EstimateMode, checkpoint: Option<&Path>, out_dir: &Path) -> Result<Vec<PathBuf>> {
    if inputs.is_empty() {
        return Err(Error::InvalidArgument("no input files".into()));
    }
    let net = match (mode, checkpoint) {
        (EstimateMode::Neural, Some(p)) => Some(load_checkpoint(p)?),
        (EstimateMode::Neural, None) => return Err(Error::InvalidArgument("neural mode needs --checkpoint".into())),
        _ => None,
    };
    let extractor = match &net {
        Some(n) => {
            if n.arch.bands != cfg.mel_bands {
                return Err(Error::InvalidCheckpoint(format!("checkpoint has {} mel bands, configuration {}", n.arch.bands, cfg.mel_bands)));
            }
            Some(FeatureExtractor::new(cfg.stft(), cfg.mel_bands)?)
        }
        None => None,
    };
    let order = cfg.channel_order()?;
    let stft = cfg.stft();
    ensure_dir(out_dir)?;
    let outputs = pool(cfg)?.install(|| {
        inputs
            .par_iter()
            .map(|input| -> Result<PathBuf> {
                let foa = read_foa(input, order)?;
                let est: Estimate = match mode {
                    EstimateMode::Baseline => run_baseline(&foa, &stft, cfg.mask)?,
                    EstimateMode::BaselineNoMask => run_baseline(&foa, &stft, false)?,
                    EstimateMode::Neural => run_neural(&foa, net.as_ref().expect("loaded"), extractor.as_ref().expect("built"))?,
                };
                let (track, active) = if cfg.smooth { smooth_with_activity(&est, cfg.sad_alpha)? } else { (est.doa.clone(), est.active_frames(cfg.sad_alpha)) };
                let out = out_dir.join(format!("{}.csv", stem(input)?));
                write_frame_csv(&out, &track, &active)?;
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    cfg.echo_to(out_dir)?;
    Ok(outputs)
}

/// Reads a `wav,csv` list; relative paths are resolved against the list's directory.
pub fn read_pair_list(list: &Path) -> Result<Vec<(PathBuf, PathBuf)>> {
    let text = std::fs::read_to_string(list).map_err(|e| Error::InvalidInput(format!("{}: {e}", list.display())))?;
    let base = list.parent().unwrap_or(Path::new("."));
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (w, c) = line.split_once(',').ok_or_else(|| Error::InvalidInput(format!("{}:{}: expected 'wav,csv'", list.display(), i + 1)))?;
        out.push((base.join(w.trim()), base.join(c.trim())));
    }
    if out.is_empty() {
        return Err(Error::InvalidInput(format!("{}: empty list", list.display())));
    }
    Ok(out)
}

/// Features and frame labels for every `(wav, metadata csv)` pair.
pub fn load_examples(cfg: &RunConfig, pairs: &[(PathBuf, PathBuf)]) -> Result<Vec<TrainExample>> {
    let extractor = FeatureExtractor::new(cfg.stft(), cfg.mel_bands)?;
    let order = cfg.channel_order()?;
    pool(cfg)?.install(|| {
        pairs
            .par_iter()
            .map(|(wav, meta)| {
                let foa = read_foa(wav, order)?;
                if foa.sample_rate != cfg.sample_rate {
                    return Err(Error::InvalidInput(format!("{}: {} Hz, configuration expects {}", wav.display(), foa.sample_rate, cfg.sample_rate)));
                }
                let ex = extractor.extract(&foa)?;
                let (gt, z) = rasterize_events(&read_metadata_csv(meta)?, &extractor.stft, ex.features.frames());
                TrainExample::new(ex.features, gt, z)
            })
            .collect()
    })
}

/// Trains from scratch and writes the checkpoint plus a per-epoch log CSV
/// (`log`, or the checkpoint path with a `.csv` extension).
pub fn cmd_train(
    cfg: &RunConfig,
    train_list: &Path,
    val_list: Option<&Path>,
    checkpoint: &Path,
    log: Option<&Path>,
    on_epoch: impl FnMut(&EpochLog),
) -> Result<Vec<EpochLog>> {
    let train_set = load_examples(cfg, &read_pair_list(train_list)?)?;
    let val_set = match val_list {
        Some(v) => load_examples(cfg, &read_pair_list(v)?)?,
        None => Vec::new(),
    };
    let mut net = Network::new(cfg.arch(), cfg.seed)?;
    let logs = train(&mut net, &train_set, &val_set, &cfg.train_config(), on_epoch)?;
    let dir = checkpoint.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    ensure_dir(dir)?;
    save_checkpoint(&net, checkpoint)?;
    let log_path = log.map(Path::to_path_buf).unwrap_or_else(|| checkpoint.with_extension("csv"));
    write_loss_log(&log_path, &logs)?;
    cfg.echo_to(dir)?;
    Ok(logs)
}

/// One estimate/reference pair in an evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalItem {
    pub fold: String,
    pub est: PathBuf,
    pub gt: PathBuf,
}

/// Scores every pair; pairs sharing a fold are pooled frame-wise, and the
/// report's aggregate row is the mean over folds. Writes `metrics.txt` and
/// `metrics.csv`.
pub fn cmd_eval(cfg: &RunConfig, items: &[EvalItem], out_dir: &Path) -> Result<MetricsReport> {
    if items.is_empty() {
        return Err(Error::InvalidArgument("nothing to evaluate".into()));
    }
    let stft = cfg.stft();
    let mut folds: BTreeMap<&str, (DeAccumulator, usize, usize)> = BTreeMap::new();
    let mut order: Vec<&str> = Vec::new();
    for it in items {
        let est = read_frame_csv(&it.est)?;
        let (gt_doa, gt_act) = read_reference_csv(&it.gt, &stft, est.len())?;
        let entry = folds.entry(&it.fold).or_insert_with(|| {
            order.push(&it.fold);
            (DeAccumulator::default(), 0, 0)
        });
        entry.0.add(&gt_doa, &est.doa, &gt_act)?;
        frame_recall(&est.active, &gt_act)?;
        entry.1 += est.active.iter().enumerate().filter(|&(t, &a)| a == gt_act.is_active(t)).count();
        entry.2 += est.len();
    }
    let mut report = MetricsReport::default();
    for f in order {
        let (de, hits, total) = &folds[f];
        report.push(f, de.mean().map_err(|e| Error::UndefinedMetric(format!("fold '{f}': {e}")))?, *hits as f64 / *total as f64);
    }
    ensure_dir(out_dir)?;
    std::fs::write(out_dir.join("metrics.txt"), report.to_table())?;
    write_metrics_csv(&out_dir.join("metrics.csv"), &report)?;
    cfg.echo_to(out_dir)?;
    Ok(report)
}

/// One SVG and one plot-data CSV per estimate track.
pub fn cmd_plot(cfg: &RunConfig, estimates: &[PathBuf], gt: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    if estimates.is_empty() {
        return Err(Error::InvalidArgument("no estimate files".into()));
    }
    let stft = cfg.stft();
    ensure_dir(out_dir)?;
    let mut written = Vec::new();
    for e in estimates {
        let est = read_frame_csv(e)?;
        let (gt_doa, gt_act) = read_reference_csv(gt, &stft, est.len())?;
        let rows = plot_rows(&est, &gt_doa, &gt_act, &stft)?;
        let name = stem(e)?;
        let svg = out_dir.join(format!("{name}.svg"));
        write_svg(&svg, &rows, &name)?;
        write_plot_csv(&out_dir.join(format!("{name}_plot.csv")), &rows)?;
        written.push(svg);
    }
    cfg.echo_to(out_dir)?;
    Ok(written)
}

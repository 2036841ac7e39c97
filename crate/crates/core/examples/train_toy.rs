//! Trains a small network on synthetic reverberant scenes and compares the
//! held-out DOA error with the untrained network and the masked baseline.
//!
//! cargo run --release --example train_toy -- [scenes] [epochs] [rt60] [snr_db]

use ivdoa::dsp::StftConfig;
use ivdoa::metrics::DeAccumulator;
use ivdoa::neural::{train, ArchConfig, FeatureExtractor, Network, TrainConfig, TrainExample};
use ivdoa::pipeline::{baseline_from_spectra, neural_from_features, run_mel_baseline};
use ivdoa::scene::{random_scene, simulate_scene, NoiseKind, NoiseSpec, ReverbSpec};
use rayon::prelude::*;

fn main() -> ivdoa::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, d: f64| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(d);
    let (n, epochs, rt60, snr) = (arg(0, 40.0) as usize, arg(1, 5.0) as usize, arg(2, 0.5), arg(3, 6.0));
    let stft = StftConfig::standard(48_000);
    let extractor = FeatureExtractor::new(stft, 96)?;

    let t0 = std::time::Instant::now();
    let data: Vec<_> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let spec = random_scene(1000 + i, 5.0, ReverbSpec { rt60_s: rt60, drr_db: 0.0, ..Default::default() }, NoiseSpec { snr_db: snr, kind: NoiseKind::White });
            let r = simulate_scene(&spec)?;
            let ex = extractor.extract(&r.mixture)?;
            let base = baseline_from_spectra(&ex.spectra, true)?.doa;
            // spectra are large; only the derived tracks are kept
            let mel = run_mel_baseline(&ex, None)?.doa;
            Ok((TrainExample::new(ex.features, r.gt_doa, r.gt_activity)?, base, mel))
        })
        .collect::<ivdoa::Result<_>>()?;
    eprintln!("{n} scenes prepared in {:.1?}", t0.elapsed());

    let split = n * 3 / 4;
    let (train_part, held) = data.split_at(split);
    let train_set: Vec<TrainExample> = train_part.iter().map(|d| d.0.clone()).collect();
    let val_set: Vec<TrainExample> = held.iter().map(|d| d.0.clone()).collect();

    let arch = ArchConfig { bands: 96, conv_channels: vec![8, 16, 16], gru_hidden: 16 };
    let mut net = Network::new(arch, 1)?;
    let untrained = net.clone();
    let cfg = TrainConfig { epochs, seed: 1, ..Default::default() };
    let t1 = std::time::Instant::now();
    train(&mut net, &train_set, &val_set, &cfg, |l| {
        eprintln!("epoch {:>3} loss {:.4} (doa {:.4}, sad {:.4}) val DE {:.2} [{:.1?}]", l.epoch, l.loss, l.loss_doa, l.loss_sad, l.val_de, t1.elapsed())
    })?;

    let mut de_base = DeAccumulator::default();
    let mut de_mel = DeAccumulator::default();
    let mut de_untrained = DeAccumulator::default();
    let mut de_trained = DeAccumulator::default();
    for (ex, base, mel) in held {
        de_base.add(&ex.gt_doa, base, &ex.gt_activity)?;
        de_mel.add(&ex.gt_doa, mel, &ex.gt_activity)?;
        de_untrained.add(&ex.gt_doa, &neural_from_features(&ex.features, &untrained)?.doa, &ex.gt_activity)?;
        de_trained.add(&ex.gt_doa, &neural_from_features(&ex.features, &net)?.doa, &ex.gt_activity)?;
    }
    println!("held-out DE: masked baseline {:.2}  mel baseline {:.2}  untrained {:.2}  trained {:.2}", de_base.mean()?, de_mel.mean()?, de_untrained.mean()?, de_trained.mean()?);
    Ok(())
}

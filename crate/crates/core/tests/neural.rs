use ivdoa::dsp::{MonoSignal, StftConfig};
use ivdoa::foa::{encode_plane_wave, Direction};
use ivdoa::neural::{train, ArchConfig, AugPattern, FeatureExtractor, LrSchedule, Network, TrainConfig, TrainExample};
use ivdoa::pipeline::{run_mel_baseline, run_neural};
use ivdoa::scene::{random_scene, simulate_scene, NoiseKind, NoiseSpec, ReverbSpec};
use ivdoa::Error;

fn small_stft() -> StftConfig {
    StftConfig { fft_size: 256, hop: 128, sample_rate: 8_000 }
}

fn tiny_net(bands: usize, seed: u64) -> Network {
    Network::new(ArchConfig { bands, conv_channels: vec![3, 4], gru_hidden: 4 }, seed).unwrap()
}

fn reverberant_scene(seed: u64) -> ivdoa::scene::SceneRender {
    let mut spec = random_scene(seed, 1.0, ReverbSpec { rt60_s: 0.3, ..Default::default() }, NoiseSpec { snr_db: 10.0, kind: NoiseKind::White });
    spec.sample_rate = 8_000;
    ivdoa::scene::simulate_scene_with(&spec, &small_stft()).unwrap()
}

#[test]
fn untrained_network_reduces_to_mel_baseline() {
    let stft = StftConfig::standard(48_000);
    // with some noise no band sits near the normalisation epsilon, where
    // normalising twice (features, then refinement) differs from once
    let noise = NoiseSpec { snr_db: 30.0, kind: NoiseKind::Pink };
    let r = simulate_scene(&random_scene(3, 2.0, ReverbSpec { rt60_s: 0.4, ..Default::default() }, noise)).unwrap();
    let ex = FeatureExtractor::new(stft, 96).unwrap();
    let net = Network::new(ArchConfig { bands: 96, conv_channels: vec![4, 8], gru_hidden: 4 }, 9).unwrap();
    let neural = run_neural(&r.mixture, &net, &ex).unwrap();
    let mel = run_mel_baseline(&ex.extract(&r.mixture).unwrap(), None).unwrap();
    for (a, b) in neural.doa.directions().zip(mel.doa.directions()) {
        assert!((a.azimuth - b.azimuth).abs() < 1e-9 && (a.elevation - b.elevation).abs() < 1e-9, "{a:?} vs {b:?}");
    }
    // zero-initialised activity head outputs 0.5 everywhere
    assert!(neural.activity.unwrap().values.iter().all(|&p| p == 0.5));
}

#[test]
fn band_mismatch_is_a_checkpoint_error() {
    let r = reverberant_scene(1);
    let ex = FeatureExtractor::new(small_stft(), 8).unwrap();
    let err = run_neural(&r.mixture, &tiny_net(12, 0), &ex).unwrap_err();
    assert!(matches!(err, Error::InvalidCheckpoint(_)), "{err}");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn feature_augmentation_commutes_with_extraction() {
    let ex = FeatureExtractor::new(small_stft(), 8).unwrap();
    let src = MonoSignal::new((0..2048).map(|i| ((i * 7919) % 101) as f64 / 101.0 - 0.5).collect(), 8_000).unwrap();
    let foa = encode_plane_wave(&src, Direction::from_degrees(-35.0, 25.0));
    let base = ex.extract(&foa).unwrap();
    for p in AugPattern::all() {
        let direct = ex.extract(&p.apply_foa(&foa)).unwrap();
        let permuted = p.apply_features(&base.features);
        let worst = direct.features.tensor.data.iter().zip(&permuted.tensor.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-9, "pattern {}: {worst}", p.id());
    }
}

fn training_logs(seed: u64) -> Vec<ivdoa::neural::EpochLog> {
    let ex = FeatureExtractor::new(small_stft(), 8).unwrap();
    let set: Vec<TrainExample> = (0..2)
        .map(|s| {
            let r = reverberant_scene(s);
            TrainExample::new(ex.extract(&r.mixture).unwrap().features, r.gt_doa, r.gt_activity).unwrap()
        })
        .collect();
    let mut net = tiny_net(8, 4);
    train(&mut net, &set, &set[..1], &TrainConfig { epochs: 100, seed, ..Default::default() }, |_| {}).unwrap()
}

#[test]
fn learning_rate_follows_schedule_and_runs_repeat() {
    let logs = training_logs(5);
    assert_eq!(logs.len(), 100);
    let closed_form = |e: f64| if e <= 50.0 { 0.001 } else { 0.001 * (1.0 - (e - 50.0) / 50.0 * 0.99) };
    for e in [1usize, 50, 75, 100] {
        let l = &logs[e - 1];
        assert_eq!(l.epoch, e);
        assert!((l.lr - closed_form(e as f64)).abs() < 1e-15, "epoch {e}: {}", l.lr);
    }
    assert!((logs[99].lr - 1e-5).abs() < 1e-15);
    assert!((LrSchedule::default().lr_at(75) - 0.001 * (1.0 - 25.0 / 50.0 * 0.99)).abs() < 1e-15);
    assert_eq!(logs, training_logs(5));
    assert!(logs.iter().all(|l| l.loss.is_finite() && l.val_de.is_finite()));
}

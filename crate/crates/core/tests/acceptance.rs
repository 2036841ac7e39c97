//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Pass a number (or name fragment) to run a subset.

mod common;

use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use ivdoa::commands::{cmd_simulate, cmd_train};
use ivdoa::config::{ConfigBuilder, RunConfig};
use ivdoa::dsp::{MonoSignal, StftConfig};
use ivdoa::foa::{encode_plane_wave, Direction, SpectrogramSet};
use ivdoa::metrics::{central_angle_deg, doa_error, frame_recall, DeAccumulator};
use ivdoa::neural::{azimuth_distance, train, ArchConfig, AugPattern, FeatureExtractor, Network, TrainConfig, TrainExample};
use ivdoa::pipeline::{baseline_from_spectra, neural_from_features, postprocess, run_baseline, run_oracle};
use ivdoa::scene::{random_scene, simulate_scene, NoiseKind, NoiseSpec, ReverbSpec, SceneRender};
use ivdoa::tracks::{ActivityTrack, DoaTrack, EventSegment};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, detail: String) -> Result<String, String> {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn e2s(e: ivdoa::Error) -> String {
    e.to_string()
}

fn white(len: usize, seed: u64) -> MonoSignal {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    MonoSignal::new((0..len).map(|_| rng.gen_range(-1.0..1.0)).collect(), 48_000).unwrap()
}

fn anechoic_grid() -> Result<String, String> {
    let stft = StftConfig::standard(48_000);
    let src = white(stft.fft_size + 4 * stft.hop, 11);
    let dirs: Vec<(i32, i32)> = (-17..=18).flat_map(|a| (-9..=9).map(move |e| (a * 10, e * 10))).collect();
    let worst = dirs
        .par_iter()
        .map(|&(a, e)| {
            let d = Direction::from_degrees(a as f64, e as f64);
            let est = run_baseline(&encode_plane_wave(&src, d), &stft, true).map_err(e2s)?;
            Ok(est.doa.directions().map(|x| central_angle_deg(x, d)).fold(0.0, f64::max))
        })
        .collect::<Result<Vec<f64>, String>>()?
        .into_iter()
        .fold(0.0, f64::max);
    ensure(dirs.len() == 36 * 19 && worst < 0.01, format!("{} directions, worst frame error {worst:.2e} deg", dirs.len()))
}

fn renders(seeds: std::ops::Range<u64>, reverb: ReverbSpec, noise: NoiseSpec) -> Result<Vec<SceneRender>, String> {
    seeds.into_par_iter().map(|s| simulate_scene(&random_scene(s, 3.0, reverb, noise)).map_err(e2s)).collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn mask_benefit() -> Result<String, String> {
    let stft = StftConfig::standard(48_000);
    let scenes = renders(200..220, ReverbSpec::default(), NoiseSpec { snr_db: 0.0, kind: NoiseKind::White })?;
    let (mut masked, mut plain) = (Vec::new(), Vec::new());
    for r in &scenes {
        let sp = SpectrogramSet::from_foa(&r.mixture, &stft).map_err(e2s)?;
        masked.push(doa_error(&baseline_from_spectra(&sp, true).map_err(e2s)?.doa, &r.gt_doa, &r.gt_activity).map_err(e2s)?);
        plain.push(doa_error(&baseline_from_spectra(&sp, false).map_err(e2s)?.doa, &r.gt_doa, &r.gt_activity).map_err(e2s)?);
    }
    let (m, p) = (mean(&masked), mean(&plain));
    ensure(m <= p, format!("mean DE masked {m:.3} deg vs unmasked {p:.3} deg over {} scenes", scenes.len()))
}

fn oracle_refinement() -> Result<String, String> {
    let stft = StftConfig::standard(48_000);
    let scenes = renders(300..320, ReverbSpec { rt60_s: 0.5, ..Default::default() }, NoiseSpec { snr_db: 6.0, kind: NoiseKind::White })?;
    let (mut oracle, mut masked) = (Vec::new(), Vec::new());
    for r in &scenes {
        oracle.push(doa_error(&run_oracle(r, &stft).map_err(e2s)?.doa, &r.gt_doa, &r.gt_activity).map_err(e2s)?);
        masked.push(doa_error(&run_baseline(&r.mixture, &stft, true).map_err(e2s)?.doa, &r.gt_doa, &r.gt_activity).map_err(e2s)?);
    }
    let (o, m) = (mean(&oracle), mean(&masked));
    ensure(o <= 0.5 * m, format!("mean DE oracle {o:.3e} deg vs masked baseline {m:.3} deg"))
}

fn gradients() -> Result<String, String> {
    let mut parts = Vec::new();
    let mut worst: f64 = 0.0;
    for (name, err) in common::layer_gradient_checks(21) {
        worst = worst.max(err);
        parts.push(format!("{name} {err:.1e}"));
    }
    let c = common::composed_gradient_check(22);
    worst = worst.max(c);
    parts.push(format!("composed {c:.1e}"));
    ensure(worst < common::FD_TOL, parts.join(", "))
}

/// 200 five-second scenes (rt60 0.5 s, 6 dB SNR), 150 train / 50 held out.
fn toy_training() -> Result<String, String> {
    let stft = StftConfig::standard(48_000);
    let extractor = FeatureExtractor::new(stft, 96).map_err(e2s)?;
    let data = (0..200u64)
        .into_par_iter()
        .map(|i| {
            let spec = random_scene(5000 + i, 5.0, ReverbSpec { rt60_s: 0.5, ..Default::default() }, NoiseSpec { snr_db: 6.0, kind: NoiseKind::White });
            let r = simulate_scene(&spec)?;
            let ex = extractor.extract(&r.mixture)?;
            let base = baseline_from_spectra(&ex.spectra, true)?.doa;
            Ok((TrainExample::new(ex.features, r.gt_doa, r.gt_activity)?, base))
        })
        .collect::<ivdoa::Result<Vec<_>>>()
        .map_err(e2s)?;
    let (train_part, held) = data.split_at(150);
    let train_set: Vec<TrainExample> = train_part.iter().map(|d| d.0.clone()).collect();

    let mut net = Network::new(ArchConfig { bands: 96, conv_channels: vec![8, 16, 16], gru_hidden: 16 }, 1).map_err(e2s)?;
    let untrained = net.clone();
    let logs = train(&mut net, &train_set, &[], &TrainConfig { epochs: 20, seed: 1, ..Default::default() }, |_| {}).map_err(e2s)?;
    let losses: Vec<f64> = logs.iter().map(|l| l.loss).collect();
    // trailing three-epoch average
    let smooth = |i: usize| mean(&losses[i.saturating_sub(2)..=i]);
    let (first, last) = (smooth(0), smooth(losses.len() - 1));

    let (mut de_base, mut de_untrained, mut de_trained) = (DeAccumulator::default(), DeAccumulator::default(), DeAccumulator::default());
    for (ex, base) in held {
        de_base.add(&ex.gt_doa, base, &ex.gt_activity).map_err(e2s)?;
        de_untrained.add(&ex.gt_doa, &neural_from_features(&ex.features, &untrained).map_err(e2s)?.doa, &ex.gt_activity).map_err(e2s)?;
        de_trained.add(&ex.gt_doa, &neural_from_features(&ex.features, &net).map_err(e2s)?.doa, &ex.gt_activity).map_err(e2s)?;
    }
    let (b, u, t) = (de_base.mean().map_err(e2s)?, de_untrained.mean().map_err(e2s)?, de_trained.mean().map_err(e2s)?);
    ensure(
        last < first && t < u && t < b,
        format!("smoothed loss {first:.4} -> {last:.4}; held-out DE trained {t:.3}, untrained {u:.3}, masked baseline {b:.3} deg"),
    )
}

fn augmentation() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let src = white(2048, 61);
    let mut worst: f64 = 0.0;
    for p in AugPattern::all() {
        for _ in 0..50 {
            let d = Direction::wrapped(rng.gen_range(-PI..PI), rng.gen_range(-PI / 2.0..PI / 2.0));
            let a = p.apply_foa(&encode_plane_wave(&src, d));
            let b = encode_plane_wave(&src, p.map_direction(d));
            for (x, y) in a.channels.iter().flatten().zip(b.channels.iter().flatten()) {
                worst = worst.max((x - y).abs());
            }
        }
    }
    ensure(worst <= 1e-9, format!("16 patterns x 50 directions, max deviation {worst:.2e}"))
}

fn wrap_property() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..1_000_000 {
        let a = Direction::wrapped(rng.gen_range(-PI..=PI), 0.0).azimuth;
        let b = Direction::wrapped(rng.gen_range(-PI..=PI), 0.0).azimuth;
        let d = azimuth_distance(a, b);
        let oracle = (-3..=3).map(|k| (a + k as f64 * 2.0 * PI - b).abs()).fold(f64::INFINITY, f64::min);
        if !(0.0..=PI).contains(&d) || d != oracle {
            return Err(format!("pair {i}: ({a}, {b}) -> {d}, oracle {oracle}"));
        }
    }
    Ok("10^6 pairs in [0, pi] and equal to the shift oracle".into())
}

/// Integer-degree brute force with its own distance; ties -> smaller |az|, then positive.
fn circular_median_oracle(values: &[f64]) -> f64 {
    let mut best = (f64::INFINITY, 0i32);
    for c in -179..=180i32 {
        let cost: f64 = values.iter().map(|&v| ((v - c as f64).to_radians().cos().clamp(-1.0, 1.0)).acos().to_degrees()).sum();
        let tie = (cost - best.0).abs() < 1e-6;
        if (!tie && cost < best.0) || (tie && (c.abs() < best.1.abs() || (c.abs() == best.1.abs() && c > best.1))) {
            best = (cost, c);
        }
    }
    best.1 as f64
}

fn lower_median_oracle(values: &[f64]) -> f64 {
    let need = values.len().div_ceil(2);
    let mut cands = values.to_vec();
    cands.sort_by(f64::total_cmp);
    *cands.iter().find(|&&v| values.iter().filter(|&&x| x <= v).count() >= need).unwrap()
}

fn postprocessing() -> Result<String, String> {
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/postprocess_golden.csv");
    let mut rdr = csv::Reader::from_path(&golden).map_err(|e| e.to_string())?;
    let rows: Vec<Vec<f64>> = rdr.records().map(|r| r.unwrap().iter().map(|f| f.parse().unwrap()).collect()).collect();
    let track = DoaTrack::from_directions(rows.iter().map(|r| Direction::from_degrees(r[2], r[3])));
    let active: Vec<bool> = rows.iter().map(|r| r[1] == 1.0).collect();
    let out = postprocess(&track, &ivdoa::pipeline::segment_events(&active)).map_err(e2s)?;
    for (r, d) in rows.iter().zip(out.directions()) {
        if (d.azimuth_deg() - r[4]).abs() > 1e-9 || (d.elevation_deg() - r[5]).abs() > 1e-9 {
            return Err(format!("golden frame {}: got ({}, {})", r[0], d.azimuth_deg(), d.elevation_deg()));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut seam = 0;
    for ev in 0..100 {
        let n = rng.gen_range(1..=25);
        let centre: f64 = if ev % 2 == 0 { 180.0 } else { rng.gen_range(-180.0..180.0) };
        let spread: f64 = rng.gen_range(5.0..60.0);
        let dirs: Vec<Direction> =
            (0..n).map(|_| Direction::from_degrees(centre + rng.gen_range(-spread..spread), rng.gen_range(-90.0..=90.0))).collect();
        let out = postprocess(&DoaTrack::from_directions(dirs.iter().copied()), &[EventSegment::new(0, n, n).map_err(e2s)?]).map_err(e2s)?;
        let disc = |x: f64| (x / 10.0).round() * 10.0;
        let az: Vec<f64> = dirs.iter().map(|d| disc(d.azimuth_deg())).collect();
        let el: Vec<f64> = dirs.iter().map(|d| disc(d.elevation_deg())).collect();
        if az.iter().any(|&a| a.abs() >= 170.0) {
            seam += 1;
        }
        let (ea, ee) = (circular_median_oracle(&az), lower_median_oracle(&el));
        for d in out.directions() {
            let got_az = if d.azimuth_deg() <= -180.0 + 1e-9 { 180.0 } else { d.azimuth_deg() };
            if (got_az - ea).abs() > 1e-9 || (d.elevation_deg() - ee).abs() > 1e-9 {
                return Err(format!("event {ev}: got ({got_az}, {}), oracle ({ea}, {ee}); az {az:?}", d.elevation_deg()));
            }
        }
    }
    Ok(format!("golden example ok; 100 random events ({seam} near the +-180 seam) match the brute-force median"))
}

fn metrics() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 10_000;
    let rand_dir = |rng: &mut ChaCha8Rng| Direction::wrapped(rng.gen_range(-PI..=PI), (rng.gen_range(-1.0f64..=1.0)).asin());
    let est: Vec<Direction> = (0..n).map(|_| rand_dir(&mut rng)).collect();
    let gt: Vec<Direction> = (0..n).map(|_| rand_dir(&mut rng)).collect();
    let mut worst: f64 = 0.0;
    let mut sum = 0.0;
    for (a, b) in est.iter().zip(&gt) {
        let (u, v) = (a.unit_vector(), b.unit_vector());
        let oracle = (u[0] * v[0] + u[1] * v[1] + u[2] * v[2]).clamp(-1.0, 1.0).acos().to_degrees();
        worst = worst.max((central_angle_deg(*a, *b) - oracle).abs());
        sum += oracle;
    }
    let all = ActivityTrack::from_bools(vec![true; n]);
    let de = doa_error(&DoaTrack::from_directions(est), &DoaTrack::from_directions(gt), &all).map_err(e2s)?;
    worst = worst.max((de - sum / n as f64).abs());

    let z = ActivityTrack::from_bools((0..40).map(|t| t % 3 == 0));
    let same: Vec<bool> = (0..40).map(|t| t % 3 == 0).collect();
    let inv: Vec<bool> = same.iter().map(|a| !a).collect();
    let half: Vec<bool> = (0..40).map(|t| if t < 20 { t % 3 == 0 } else { t % 3 != 0 }).collect();
    let frs = [frame_recall(&same, &z).map_err(e2s)?, frame_recall(&inv, &z).map_err(e2s)?, frame_recall(&half, &z).map_err(e2s)?];
    ensure(worst < 1e-9 && frs == [1.0, 0.0, 0.5], format!("max |DE - oracle| {worst:.2e} deg over 10^4 pairs; FR {frs:?}"))
}

fn files_in(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())).collect();
    v.sort();
    v
}

fn determinism() -> Result<String, String> {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let scenes = tmp.path().join("scenes.toml");
    std::fs::write(
        &scenes,
        "[[scene]]\nname = \"fixed\"\nduration_s = 1.5\nseed = 7\nrt60_s = 0.3\nsnr_db = 10.0\nnoise = \"pink\"\n\
         [[scene.event]]\nonset_s = 0.2\noffset_s = 1.2\nazimuth_deg = -150.0\nelevation_deg = 20.0\nkind = \"speech\"\n\
         [generate]\ncount = 3\nduration_s = 1.5\nseed = 40\nrt60_s = 0.4\nsnr_db = 12.0\n",
    )
    .unwrap();
    let cfg = |jobs: &str| -> Result<RunConfig, String> {
        ConfigBuilder::new()
            .set("jobs", jobs)
            .and_then(|b| b.set("epochs", "2"))
            .and_then(|b| b.set("conv_channels", "4,8"))
            .and_then(|b| b.set("gru_hidden", "6"))
            .and_then(|b| b.set("seed", "3"))
            .and_then(|b| b.build())
            .map_err(e2s)
    };
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    cmd_simulate(&cfg("1")?, &scenes, &a).map_err(e2s)?;
    cmd_simulate(&cfg("1")?, &scenes, &b).map_err(e2s)?;
    cmd_simulate(&cfg("3")?, &scenes, &c).map_err(e2s)?;
    let (fa, fb) = (files_in(&a), files_in(&b));
    if fa != fb {
        return Err("simulate outputs differ between runs".into());
    }
    // the config echo records the worker count; everything else must match
    let strip = |v: Vec<(String, Vec<u8>)>| v.into_iter().filter(|f| f.0 != ivdoa::config::ECHO_FILE).collect::<Vec<_>>();
    if strip(files_in(&c)) != strip(fa.clone()) {
        return Err("simulate outputs depend on the worker count".into());
    }
    let list = a.join(ivdoa::commands::SCENE_LIST);
    let (ca, cb) = (tmp.path().join("ta/net.bin"), tmp.path().join("tb/net.bin"));
    cmd_train(&cfg("1")?, &list, Some(&list), &ca, None, |_| {}).map_err(e2s)?;
    cmd_train(&cfg("1")?, &list, Some(&list), &cb, None, |_| {}).map_err(e2s)?;
    let same_ckpt = std::fs::read(&ca).unwrap() == std::fs::read(&cb).unwrap();
    let same_log = std::fs::read(ca.with_extension("csv")).unwrap() == std::fs::read(cb.with_extension("csv")).unwrap();
    ensure(same_ckpt && same_log, format!("{} simulate files identical; checkpoint identical: {same_ckpt}; loss log identical: {same_log}", fa.len()))
}

fn main() {
    let criteria: [(&str, Check); 10] = [
        ("anechoic grid recovery", anechoic_grid),
        ("energy mask benefit", mask_benefit),
        ("oracle refinement", oracle_refinement),
        ("gradient correctness", gradients),
        ("toy training", toy_training),
        ("augmentation commutation", augmentation),
        ("azimuth wrap property", wrap_property),
        ("post-processing median", postprocessing),
        ("metrics", metrics),
        ("determinism", determinism),
    ];
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let num = (i + 1).to_string();
        if !filters.is_empty() && !filters.iter().any(|f| *f == num || name.contains(f.as_str())) {
            continue;
        }
        let t = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        match result {
            Ok(d) => println!("criterion {num:>2} PASS  {name}: {d} [{secs:.1}s]"),
            Err(d) => {
                failed += 1;
                println!("criterion {num:>2} FAIL  {name}: {d} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}

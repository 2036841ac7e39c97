//! Compares the intensity-vector baseline with and without the energy mask
//! across a sweep of noise levels.
//!
//! cargo run --release --example mask_vs_nomask -- [scenes per level]

use ivdoa::dsp::StftConfig;
use ivdoa::foa::SpectrogramSet;
use ivdoa::metrics::DeAccumulator;
use ivdoa::pipeline::baseline_from_spectra;
use ivdoa::scene::{random_scene, simulate_scene, NoiseKind, NoiseSpec, ReverbSpec};

fn main() -> ivdoa::Result<()> {
    let n: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let stft = StftConfig::standard(48_000);
    println!("{:>8} {:>10} {:>10}", "SNR dB", "masked", "unmasked");
    for snr in [20.0, 10.0, 5.0, 0.0, -5.0] {
        let (mut masked, mut plain) = (DeAccumulator::default(), DeAccumulator::default());
        for seed in 0..n {
            let r = simulate_scene(&random_scene(seed, 3.0, ReverbSpec::default(), NoiseSpec { snr_db: snr, kind: NoiseKind::White }))?;
            let sp = SpectrogramSet::from_foa(&r.mixture, &stft)?;
            masked.add(&r.gt_doa, &baseline_from_spectra(&sp, true)?.doa, &r.gt_activity)?;
            plain.add(&r.gt_doa, &baseline_from_spectra(&sp, false)?.doa, &r.gt_activity)?;
        }
        println!("{snr:>8.1} {:>10.3} {:>10.3}", masked.mean()?, plain.mean()?);
    }
    Ok(())
}

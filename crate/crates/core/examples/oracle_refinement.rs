//! Upper bound for refinement: subtracting the true reverberant/noise
//! intensity and weighting by the ideal mask, versus the plain baseline.
//!
//! cargo run --release --example oracle_refinement -- [rt60_s] [snr_db]

use ivdoa::dsp::StftConfig;
use ivdoa::metrics::doa_error;
use ivdoa::pipeline::{run_baseline, run_oracle};
use ivdoa::scene::{random_scene, simulate_scene, NoiseKind, NoiseSpec, ReverbSpec};

fn main() -> ivdoa::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let (rt60, snr) = (args.first().copied().unwrap_or(0.5), args.get(1).copied().unwrap_or(6.0));
    let stft = StftConfig::standard(48_000);
    for seed in 0..5 {
        let spec = random_scene(seed, 4.0, ReverbSpec { rt60_s: rt60, ..Default::default() }, NoiseSpec { snr_db: snr, kind: NoiseKind::Pink });
        let r = simulate_scene(&spec)?;
        let masked = doa_error(&run_baseline(&r.mixture, &stft, true)?.doa, &r.gt_doa, &r.gt_activity)?;
        let oracle = doa_error(&run_oracle(&r, &stft)?.doa, &r.gt_doa, &r.gt_activity)?;
        let d = spec.events[0].direction;
        println!(
            "scene {seed} (az {:6.1}, el {:5.1}): masked baseline {masked:7.3} deg, oracle {oracle:.2e} deg",
            d.azimuth_deg(),
            d.elevation_deg()
        );
    }
    Ok(())
}

//! Encodes white noise as a plane wave and recovers its direction from the
//! intensity vector.
//!
//! cargo run --release --example anechoic_doa -- [azimuth_deg] [elevation_deg]

use ivdoa::dsp::{MonoSignal, StftConfig};
use ivdoa::foa::{encode_plane_wave, Direction};
use ivdoa::metrics::central_angle_deg;
use ivdoa::pipeline::run_baseline;
use rand::{Rng, SeedableRng};

fn main() -> ivdoa::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let truth = Direction::from_degrees(args.first().copied().unwrap_or(-120.0), args.get(1).copied().unwrap_or(30.0));
    let stft = StftConfig::standard(48_000);

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let noise: Vec<f64> = (0..48_000).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let foa = encode_plane_wave(&MonoSignal::new(noise, 48_000)?, truth);

    let est = run_baseline(&foa, &stft, true)?;
    println!("true direction: az {:.2}  el {:.2}", truth.azimuth_deg(), truth.elevation_deg());
    for (t, d) in est.doa.directions().enumerate() {
        println!("frame {t:>3}: az {:8.4}  el {:8.4}  error {:.2e} deg", d.azimuth_deg(), d.elevation_deg(), central_angle_deg(d, truth));
    }
    Ok(())
}

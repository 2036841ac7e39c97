//! Lists the 16 rotation/reflection patterns and shows that transforming the
//! recording equals recording the transformed direction.

use ivdoa::dsp::MonoSignal;
use ivdoa::foa::{encode_plane_wave, Direction};
use ivdoa::neural::AugPattern;

fn main() -> ivdoa::Result<()> {
    let src = MonoSignal::new((0..512).map(|i| ((i * 7919) % 97) as f64 / 97.0 - 0.5).collect(), 48_000)?;
    let d = Direction::from_degrees(30.0, 20.0);
    let foa = encode_plane_wave(&src, d);
    for p in AugPattern::all() {
        let m = p.map_direction(d);
        let dev = p
            .apply_foa(&foa)
            .channels
            .iter()
            .flatten()
            .zip(encode_plane_wave(&src, m).channels.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        println!(
            "pattern {:>2} (turns {}, mirror {:5}, flip {:5}): ({:.0}, {:.0}) -> ({:6.1}, {:5.1})  max deviation {dev:.1e}",
            p.id(),
            p.quarter_turns,
            p.mirror,
            p.flip_elevation,
            d.azimuth_deg(),
            d.elevation_deg(),
            m.azimuth_deg(),
            m.elevation_deg()
        );
    }
    Ok(())
}

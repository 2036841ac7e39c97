//! Event-wise median smoothing on the 10 degree grid, and the DE / FR metrics
//! before and after, including an event straddling the +-180 seam.

use ivdoa::foa::Direction;
use ivdoa::metrics::{doa_error, frame_recall};
use ivdoa::pipeline::{postprocess, segment_events};
use ivdoa::tracks::{ActivityTrack, DoaTrack};

fn main() -> ivdoa::Result<()> {
    let raw = [(12.0, 3.0), (18.0, -4.0), (9.0, 6.0), (0.0, 0.0), (176.0, 10.0), (-172.0, 12.0), (-179.0, 8.0), (160.0, 9.0)];
    let active = [true, true, true, false, true, true, true, true];
    let gt_dirs = [(10.0, 0.0), (10.0, 0.0), (10.0, 0.0), (0.0, 0.0), (180.0, 10.0), (180.0, 10.0), (180.0, 10.0), (180.0, 10.0)];

    let est = DoaTrack::from_directions(raw.iter().map(|&(a, e)| Direction::from_degrees(a, e)));
    let gt = DoaTrack::from_directions(gt_dirs.iter().map(|&(a, e)| Direction::from_degrees(a, e)));
    let z = ActivityTrack::from_bools(active);

    let events = segment_events(&active);
    let smooth = postprocess(&est, &events)?;
    for (t, (r, s)) in est.directions().zip(smooth.directions()).enumerate() {
        println!("frame {t}: ({:7.1}, {:5.1}) -> ({:7.1}, {:5.1})", r.azimuth_deg(), r.elevation_deg(), s.azimuth_deg(), s.elevation_deg());
    }
    println!("events: {:?}", events.iter().map(|e| (e.start, e.end)).collect::<Vec<_>>());
    println!("DE raw {:.3} deg, smoothed {:.3} deg", doa_error(&est, &gt, &z)?, doa_error(&smooth, &gt, &z)?);
    let predicted = [true, true, false, false, true, true, true, true];
    println!("FR {:.3}", frame_recall(&predicted, &z)?);
    Ok(())
}

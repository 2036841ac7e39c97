//! Training objective: activity-gated angular error plus binary cross-entropy
//! on the activity head, and the refinement step that turns network outputs
//! into per-frame intensity vectors.

use std::f64::consts::PI;

use crate::error::{invalid_arg, Result};
use crate::foa::{aggregate_refined, extract_doa, normalize_iv, Domain, IntensityField, MaskField, Vec3, DEFAULT_NORM_EPS};
use crate::tracks::{ActivityTrack, DoaTrack};

use super::network::{NetOutput, OutputGrads};

/// Probability clamp applied before the log in the cross-entropy.
pub const BCE_CLAMP: f64 = 1e-7;

/// Azimuth difference with the +-2pi wrap: `min(|a - b|, |a + 2pi - b|, |a - 2pi - b|)`.
pub fn azimuth_distance(gt: f64, est: f64) -> f64 {
    azimuth_distance_branch(gt, est).0
}

/// Distance and the shift (0, +2pi or -2pi applied to `gt`) that attains it.
fn azimuth_distance_branch(gt: f64, est: f64) -> (f64, f64) {
    let mut best = ((gt - est).abs(), 0.0);
    for shift in [2.0 * PI, -2.0 * PI] {
        let d = (gt + shift - est).abs();
        if d < best.0 {
            best = (d, shift);
        }
    }
    best
}

/// Mean of `|dtheta| + dphi` over frames with `z_t = 1`; zero when no frame is active.
pub fn doa_loss(gt: &DoaTrack, est: &DoaTrack, z: &ActivityTrack) -> Result<f64> {
    if gt.len() != est.len() || gt.len() != z.len() {
        return Err(invalid_arg(format!("track lengths differ: gt {}, est {}, z {}", gt.len(), est.len(), z.len())));
    }
    let mut sum = 0.0;
    let mut count = 0.0;
    for t in 0..gt.len() {
        let zt = z.values[t];
        if zt == 0.0 {
            continue;
        }
        let (g, e) = (gt.direction(t), est.direction(t));
        sum += zt * ((g.elevation - e.elevation).abs() + azimuth_distance(g.azimuth, e.azimuth));
        count += zt;
    }
    Ok(if count == 0.0 { 0.0 } else { sum / count })
}

pub fn bce(z: f64, a: f64) -> f64 {
    let a = a.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
    -z * a.ln() - (1.0 - z) * (1.0 - a).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossParts {
    pub total: f64,
    pub doa: f64,
    pub sad: f64,
}

/// `L = L_doa + mean_t BCE(z_t, a_t)`.
pub fn total_loss(doa: f64, sad: &[f64], z: &ActivityTrack) -> Result<LossParts> {
    if sad.len() != z.len() {
        return Err(invalid_arg(format!("activity lengths differ: {} vs {}", sad.len(), z.len())));
    }
    let t = sad.len().max(1) as f64;
    let sad_loss = sad.iter().zip(&z.values).map(|(&a, &zt)| bce(zt, a)).sum::<f64>() / t;
    Ok(LossParts { total: doa + sad_loss, doa, sad: sad_loss })
}

/// `normalize(iv_mel - riv_hat)` aggregated with the mask over bands.
pub fn refine_with_net(iv_mel: &IntensityField, riv_hat: &IntensityField, mask: &MaskField) -> Result<Vec<Vec3>> {
    if iv_mel.domain != Domain::Mel {
        return Err(invalid_arg("network refinement works on mel-band intensity fields"));
    }
    let refined = normalize_iv(&iv_mel.sub(riv_hat)?, DEFAULT_NORM_EPS);
    aggregate_refined(&refined, Some(mask), None)
}

/// Per-frame DOA track from network outputs (refined directions already
/// computed inside the forward pass).
pub fn doa_track_from_output(out: &NetOutput) -> Result<(DoaTrack, Vec<Vec3>)> {
    let agg = aggregate_refined(&out.refined, Some(&out.mask), None)?;
    Ok((DoaTrack { frames: agg.iter().map(|&v| extract_doa(v)).collect() }, agg))
}

/// Loss of a training-mode forward pass and its gradients w.r.t. the outputs.
///
/// Frames whose aggregated vector has no horizontal component contribute no
/// DOA gradient (the arctangent is not differentiable there).
pub fn objective(out: &NetOutput, gt: &DoaTrack, z: &ActivityTrack) -> Result<(LossParts, OutputGrads)> {
    let (bands, frames) = (out.refined.bands, out.refined.frames);
    if gt.len() != frames || z.len() != frames {
        return Err(invalid_arg(format!("labels cover {} / {} frames, outputs {}", gt.len(), z.len(), frames)));
    }
    let (est, agg) = doa_track_from_output(out)?;
    let doa = doa_loss(gt, &est, z)?;
    let parts = total_loss(doa, &out.sad, z)?;

    let mut og = OutputGrads::zeros(bands, frames);
    let zsum: f64 = z.values.iter().sum();
    if zsum > 0.0 {
        for t in 0..frames {
            let zt = z.values[t];
            if zt == 0.0 {
                continue;
            }
            let [x, y, zc] = agg[t];
            let rho2 = x * x + y * y;
            if rho2 == 0.0 {
                continue;
            }
            let rho = rho2.sqrt();
            let (g, e) = (gt.direction(t), est.direction(t));
            // d loss / d estimated angles
            let d_el = -sign(g.elevation - e.elevation) * zt / zsum;
            let (_, shift) = azimuth_distance_branch(g.azimuth, e.azimuth);
            let d_az = -sign(g.azimuth + shift - e.azimuth) * zt / zsum;
            let r2 = rho2 + zc * zc;
            let ds = [
                d_az * (-y / rho2) + d_el * (-zc * x / (rho * r2)),
                d_az * (x / rho2) + d_el * (-zc * y / (rho * r2)),
                d_el * (rho / r2),
            ];
            for b in 0..bands {
                let i = b * frames + t;
                let r = out.refined.iv[i];
                let m = out.mask.m.data[i];
                og.mask[i] = ds[0] * r[0] + ds[1] * r[1] + ds[2] * r[2];
                og.refined[i] = [m * ds[0], m * ds[1], m * ds[2]];
            }
        }
    }
    let tn = frames.max(1) as f64;
    for t in 0..frames {
        let a = out.sad[t];
        og.sad[t] = if a < BCE_CLAMP || a > 1.0 - BCE_CLAMP {
            0.0
        } else {
            let zt = z.values[t];
            (-zt / a + (1.0 - zt) / (1.0 - a)) / tn
        };
    }
    Ok((parts, og))
}

#[inline]
fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::foa::Direction;

    #[test]
    fn wrap_example() {
        let d = azimuth_distance(0.1, 6.2);
        assert!((d - (0.1 + 2.0 * PI - 6.2)).abs() < 1e-12);
        assert!((d - 0.18319).abs() < 1e-5);
    }

    #[test]
    fn loss_zero_on_match_and_empty_activity() {
        let gt = DoaTrack::from_directions([Direction::from_degrees(10.0, 5.0), Direction::from_degrees(-170.0, 20.0)]);
        let z = ActivityTrack::from_bools([true, true]);
        assert_eq!(doa_loss(&gt, &gt, &z).unwrap(), 0.0);
        let est = DoaTrack::from_directions([Direction::default(), Direction::default()]);
        let none = ActivityTrack::from_bools([false, false]);
        assert_eq!(doa_loss(&gt, &est, &none).unwrap(), 0.0);
        let parts = total_loss(0.0, &[0.3, 0.6], &none).unwrap();
        assert_eq!(parts.total, parts.sad);
        assert!(doa_loss(&gt, &est, &ActivityTrack::from_bools([true])).is_err());
    }

    #[test]
    fn bce_examples() {
        assert!((bce(1.0, 0.5) - 2f64.ln()).abs() < 1e-12);
        assert!(bce(1.0, 1.0) < 1e-6);
        assert!(bce(0.0, 0.0) < 1e-6);
        assert!(bce(1.0, 0.0).is_finite());
    }
}

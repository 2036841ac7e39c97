//! DOA error (spherical central angle) and frame recall.

use crate::error::{invalid_arg, Error, Result};
use crate::foa::Direction;
use crate::tracks::{ActivityTrack, DoaTrack};

/// Great-circle angle between two directions, in degrees.
///
/// Uses the atan2 (Vincenty) form: accurate near 0 and 180 degrees, where the
/// arccos of the dot product loses precision, and exactly 0 for equal inputs.
pub fn central_angle_deg(a: Direction, b: Direction) -> f64 {
    let (s1, c1) = a.elevation.sin_cos();
    let (s2, c2) = b.elevation.sin_cos();
    let (sd, cd) = (a.azimuth - b.azimuth).sin_cos();
    let cross = (c2 * sd).hypot(c1 * s2 - s1 * c2 * cd);
    let dot = s1 * s2 + c1 * c2 * cd;
    cross.atan2(dot).to_degrees()
}

/// Running sum of central angles over ground-truth active frames.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DeAccumulator {
    pub sum_deg: f64,
    pub frames: usize,
}

impl DeAccumulator {
    pub fn add(&mut self, gt: &DoaTrack, est: &DoaTrack, z: &ActivityTrack) -> Result<()> {
        if est.len() != gt.len() || z.len() != gt.len() {
            return Err(invalid_arg(format!("track lengths differ: est {}, gt {}, activity {}", est.len(), gt.len(), z.len())));
        }
        for t in 0..gt.len() {
            if z.is_active(t) {
                self.sum_deg += central_angle_deg(est.direction(t), gt.direction(t));
                self.frames += 1;
            }
        }
        Ok(())
    }

    pub fn mean(&self) -> Result<f64> {
        if self.frames == 0 {
            return Err(Error::UndefinedMetric("no ground-truth active frames".into()));
        }
        Ok(self.sum_deg / self.frames as f64)
    }
}

/// Mean central angle in degrees over frames where `z` is active.
pub fn doa_error(est: &DoaTrack, gt: &DoaTrack, z: &ActivityTrack) -> Result<f64> {
    let mut acc = DeAccumulator::default();
    acc.add(gt, est, z)?;
    acc.mean()
}

/// Fraction of frames where the binary estimate matches the ground truth.
pub fn frame_recall(est: &[bool], gt: &ActivityTrack) -> Result<f64> {
    if est.len() != gt.len() {
        return Err(invalid_arg(format!("activity lengths differ: {} vs {}", est.len(), gt.len())));
    }
    if est.is_empty() {
        return Err(Error::UndefinedMetric("frame recall of an empty track".into()));
    }
    let hits = est.iter().enumerate().filter(|&(t, &a)| a == gt.is_active(t)).count();
    Ok(hits as f64 / est.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldMetrics {
    pub fold: String,
    pub de_deg: f64,
    pub fr: f64,
}

/// Per-fold rows plus their mean.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsReport {
    pub folds: Vec<FoldMetrics>,
}

impl MetricsReport {
    pub fn push(&mut self, fold: impl Into<String>, de_deg: f64, fr: f64) {
        self.folds.push(FoldMetrics { fold: fold.into(), de_deg, fr });
    }

    /// Unweighted mean over folds; `None` when empty.
    pub fn aggregate(&self) -> Option<FoldMetrics> {
        if self.folds.is_empty() {
            return None;
        }
        let n = self.folds.len() as f64;
        Some(FoldMetrics {
            fold: "mean".into(),
            de_deg: self.folds.iter().map(|f| f.de_deg).sum::<f64>() / n,
            fr: self.folds.iter().map(|f| f.fr).sum::<f64>() / n,
        })
    }

    pub fn rows(&self) -> Vec<FoldMetrics> {
        let mut rows = self.folds.clone();
        rows.extend(self.aggregate());
        rows
    }

    pub fn to_table(&self) -> String {
        let mut s = format!("{:<16} {:>10} {:>8}\n", "fold", "DE (deg)", "FR");
        for r in self.rows() {
            s.push_str(&format!("{:<16} {:>10.4} {:>8.4}\n", r.fold, r.de_deg, r.fr));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_and_antipodal() {
        let a = Direction::from_degrees(40.0, 20.0);
        assert_eq!(central_angle_deg(a, a), 0.0);
        let b = Direction::from_degrees(-140.0, -20.0);
        assert!((central_angle_deg(a, b) - 180.0).abs() < 1e-6);
    }

    #[test]
    fn no_active_frames_is_undefined() {
        let t = DoaTrack::from_directions([Direction::default()]);
        let z = ActivityTrack::from_bools([false]);
        assert!(matches!(doa_error(&t, &t, &z), Err(Error::UndefinedMetric(_))));
        assert!(matches!(frame_recall(&[], &ActivityTrack::from_bools([])), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn recall_cases() {
        let gt = ActivityTrack::from_bools([true, false, true, false]);
        assert_eq!(frame_recall(&[true, false, true, false], &gt).unwrap(), 1.0);
        assert_eq!(frame_recall(&[false, true, false, true], &gt).unwrap(), 0.0);
        assert_eq!(frame_recall(&[true, true, false, false], &gt).unwrap(), 0.5);
    }

    #[test]
    fn aggregate_is_fold_mean() {
        let mut r = MetricsReport::default();
        r.push("a", 2.0, 0.5);
        r.push("b", 4.0, 1.0);
        let m = r.aggregate().unwrap();
        assert_eq!((m.de_deg, m.fr), (3.0, 0.75));
    }
}

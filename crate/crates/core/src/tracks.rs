//! Per-frame DOA and activity tracks, event segments, and the rule that
//! maps event times onto STFT frames.

use crate::dsp::StftConfig;
use crate::error::{invalid_arg, Result};
use crate::foa::{Degeneracy, Direction, DoaEstimate};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DoaTrack {
    pub frames: Vec<DoaEstimate>,
}

impl DoaTrack {
    pub fn from_directions(dirs: impl IntoIterator<Item = Direction>) -> Self {
        Self { frames: dirs.into_iter().map(|direction| DoaEstimate { direction, degeneracy: Degeneracy::None }).collect() }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn direction(&self, t: usize) -> Direction {
        self.frames[t].direction
    }

    pub fn directions(&self) -> impl Iterator<Item = Direction> + '_ {
        self.frames.iter().map(|f| f.direction)
    }
}

/// Ground truth holds `z_t` in {0, 1}; predictions hold `a_t` in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ActivityTrack {
    pub values: Vec<f64>,
}

impl ActivityTrack {
    pub fn from_bools(active: impl IntoIterator<Item = bool>) -> Self {
        Self { values: active.into_iter().map(|a| if a { 1.0 } else { 0.0 }).collect() }
    }

    pub fn probabilities(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(invalid_arg("activity probabilities must lie in [0, 1]"));
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Binary view; meaningful for ground-truth or thresholded tracks.
    pub fn is_active(&self, t: usize) -> bool {
        self.values[t] >= 0.5
    }

    pub fn active_count(&self) -> usize {
        (0..self.len()).filter(|&t| self.is_active(t)).count()
    }
}

/// Frame interval `[start, end)` of one detected or labelled event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventSegment {
    pub start: usize,
    pub end: usize,
}

impl EventSegment {
    pub fn new(start: usize, end: usize, frames: usize) -> Result<Self> {
        if start >= end || end > frames {
            return Err(invalid_arg(format!("segment {start}..{end} invalid for {frames} frames")));
        }
        Ok(Self { start, end })
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// A labelled event in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedEvent {
    pub onset_s: f64,
    pub offset_s: f64,
    pub direction: Direction,
}

/// Each frame owns a hop-long cell centred on its analysis window. A frame is
/// active when an event covers at least half of that cell.
pub fn frame_cell(config: &StftConfig, t: usize) -> (f64, f64) {
    let c = config.frame_center_s(t);
    let h = config.hop_s() / 2.0;
    (c - h, c + h)
}

/// Rasterises non-overlapping events onto `frames` frames.
pub fn rasterize_events(events: &[TimedEvent], config: &StftConfig, frames: usize) -> (DoaTrack, ActivityTrack) {
    let hop_s = config.hop_s();
    let mut doa = vec![DoaEstimate { direction: Direction::default(), degeneracy: Degeneracy::Full }; frames];
    let mut active = vec![false; frames];
    for t in 0..frames {
        let (lo, hi) = frame_cell(config, t);
        let best = events
            .iter()
            .map(|e| ((hi.min(e.offset_s) - lo.max(e.onset_s)).max(0.0), e))
            .max_by(|a, b| a.0.total_cmp(&b.0));
        if let Some((overlap, e)) = best {
            // Small slack keeps exact half-cell overlaps from flipping on rounding.
            if overlap >= 0.5 * hop_s - 1e-12 {
                active[t] = true;
                doa[t] = DoaEstimate { direction: e.direction, degeneracy: Degeneracy::None };
            }
        }
    }
    (DoaTrack { frames: doa }, ActivityTrack::from_bools(active))
}

//! FOA-domain data augmentation: 16 signed permutations of the X, Y, Z
//! channels that correspond to rotating the sound field by multiples of 90
//! degrees in azimuth, optionally mirroring it across the x-z plane and/or
//! flipping elevation. W is unaffected.
//!
//! Because the transform is linear and acts on channels only, it commutes
//! with the STFT, the intensity computation and feature extraction.

use std::f64::consts::FRAC_PI_2;

use crate::foa::{wrap_angle, Direction, DoaEstimate, FoaSignal, IntensityField, SpectrogramSet, Vec3};
use crate::tracks::DoaTrack;

use super::features::{FeatureTensor, LOGMEL_CHANNELS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AugPattern {
    /// Azimuth rotation in quarter turns, 0..4.
    pub quarter_turns: u8,
    /// Negate azimuth (before rotating).
    pub mirror: bool,
    /// Negate elevation.
    pub flip_elevation: bool,
}

impl AugPattern {
    pub const COUNT: usize = 16;

    pub const IDENTITY: AugPattern = AugPattern { quarter_turns: 0, mirror: false, flip_elevation: false };

    /// `id = quarter_turns + 4 * mirror + 8 * flip_elevation`.
    pub fn from_id(id: usize) -> Option<Self> {
        (id < Self::COUNT).then(|| Self { quarter_turns: (id % 4) as u8, mirror: id & 4 != 0, flip_elevation: id & 8 != 0 })
    }

    pub fn id(&self) -> usize {
        self.quarter_turns as usize + 4 * self.mirror as usize + 8 * self.flip_elevation as usize
    }

    pub fn all() -> impl Iterator<Item = AugPattern> {
        (0..Self::COUNT).filter_map(Self::from_id)
    }

    /// Signed permutation as `(source axis, sign)` for each output axis.
    pub fn axis_map(&self) -> [(usize, f64); 3] {
        let ys = if self.mirror { -1.0 } else { 1.0 };
        // (x, y) -> (x, ys*y), then rotate by quarter turns: (x, y) -> (-y, x).
        let (xy, yx) = match self.quarter_turns % 4 {
            0 => ((0, 1.0), (1, ys)),
            1 => ((1, -ys), (0, 1.0)),
            2 => ((0, -1.0), (1, -ys)),
            _ => ((1, ys), (0, -1.0)),
        };
        [xy, yx, (2, if self.flip_elevation { -1.0 } else { 1.0 })]
    }

    pub fn map_vector(&self, v: Vec3) -> Vec3 {
        let m = self.axis_map();
        [m[0].1 * v[m[0].0], m[1].1 * v[m[1].0], m[2].1 * v[m[2].0]]
    }

    pub fn map_direction(&self, d: Direction) -> Direction {
        let az = if self.mirror { -d.azimuth } else { d.azimuth };
        let el = if self.flip_elevation { -d.elevation } else { d.elevation };
        Direction::wrapped(wrap_angle(az + self.quarter_turns as f64 * FRAC_PI_2), el)
    }

    pub fn apply_foa(&self, foa: &FoaSignal) -> FoaSignal {
        let m = self.axis_map();
        let ch = &foa.channels;
        let out = |k: usize| ch[1 + m[k].0].iter().map(|&s| m[k].1 * s).collect::<Vec<_>>();
        FoaSignal { channels: [ch[0].clone(), out(0), out(1), out(2)], sample_rate: foa.sample_rate }
    }

    pub fn apply_spectra(&self, sp: &SpectrogramSet) -> SpectrogramSet {
        let m = self.axis_map();
        let src = [&sp.x, &sp.y, &sp.z];
        let out = |k: usize| {
            let mut s = src[m[k].0].clone();
            if m[k].1 < 0.0 {
                s.bins.iter_mut().for_each(|v| *v = -*v);
            }
            s
        };
        SpectrogramSet { w: sp.w.clone(), x: out(0), y: out(1), z: out(2) }
    }

    pub fn apply_field(&self, f: &IntensityField) -> IntensityField {
        IntensityField { iv: f.iv.iter().map(|&v| self.map_vector(v)).collect(), ..f.clone() }
    }

    /// Permutes the X/Y/Z log-mel channels (sign-free) and maps the intensity channels.
    pub fn apply_features(&self, x: &FeatureTensor) -> FeatureTensor {
        let m = self.axis_map();
        let t = &x.tensor;
        let mut out = t.clone();
        for k in 0..3 {
            let (src, sign) = m[k];
            out.plane_mut(1 + k).copy_from_slice(t.plane(1 + src));
            let dst = out.plane_mut(LOGMEL_CHANNELS + k);
            dst.copy_from_slice(t.plane(LOGMEL_CHANNELS + src));
            if sign < 0.0 {
                dst.iter_mut().for_each(|v| *v = -*v);
            }
        }
        FeatureTensor { tensor: out, layout: x.layout }
    }

    /// Maps every frame's direction; degeneracy flags are kept.
    pub fn apply_track(&self, track: &DoaTrack) -> DoaTrack {
        DoaTrack {
            frames: track.frames.iter().map(|e| DoaEstimate { direction: self.map_direction(e.direction), degeneracy: e.degeneracy }).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::foa::extract_doa;

    #[test]
    fn ids_round_trip_and_cover_16() {
        let all: Vec<_> = AugPattern::all().collect();
        assert_eq!(all.len(), 16);
        for (i, p) in all.iter().enumerate() {
            assert_eq!(p.id(), i);
        }
        assert!(AugPattern::from_id(16).is_none());
    }

    #[test]
    fn vector_map_matches_direction_map() {
        let d = Direction::from_degrees(37.0, 21.0);
        for p in AugPattern::all() {
            let via_vec = extract_doa(p.map_vector(d.unit_vector())).direction;
            let via_dir = p.map_direction(d);
            assert!((via_vec.elevation - via_dir.elevation).abs() < 1e-12);
            assert!(wrap_angle(via_vec.azimuth - via_dir.azimuth).abs() < 1e-12, "{p:?}");
        }
    }

    #[test]
    fn identity_is_noop() {
        let d = Direction::from_degrees(-120.0, -10.0);
        assert_eq!(AugPattern::IDENTITY.map_direction(d), d);
    }
}

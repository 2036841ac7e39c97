//! First-order ambisonics (B-format) helpers and intensity-vector DOA math.
//!
//! Channel order everywhere in this crate is W, X, Y, Z. The steering
//! gains are frequency-flat: `W = 3^-1/2` and `(X, Y, Z)` is the unit vector
//! of the arrival direction.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::dsp::{apply_mel, stft_with, ComplexSpectrogram, MelFilterbank, MonoSignal, RealMatrix, StftConfig};
use crate::error::{invalid_arg, Result};

pub type Vec3 = [f64; 3];

pub const W_GAIN: f64 = 0.577_350_269_189_625_8; // 3^-1/2

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w += 2.0 * PI;
    }
    w
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Direction {
    /// Radians in `(-pi, pi]`.
    pub azimuth: f64,
    /// Radians in `[-pi/2, pi/2]`.
    pub elevation: f64,
}

impl Direction {
    pub fn new(azimuth: f64, elevation: f64) -> Result<Self> {
        if !(azimuth > -PI && azimuth <= PI) {
            return Err(invalid_arg(format!("azimuth {azimuth} outside (-pi, pi]")));
        }
        if !(-PI / 2.0..=PI / 2.0).contains(&elevation) {
            return Err(invalid_arg(format!("elevation {elevation} outside [-pi/2, pi/2]")));
        }
        Ok(Self { azimuth, elevation })
    }

    /// Builds a direction, wrapping the azimuth and clamping the elevation.
    pub fn wrapped(azimuth: f64, elevation: f64) -> Self {
        Self { azimuth: wrap_angle(azimuth), elevation: elevation.clamp(-PI / 2.0, PI / 2.0) }
    }

    pub fn from_degrees(azimuth_deg: f64, elevation_deg: f64) -> Self {
        Self::wrapped(azimuth_deg.to_radians(), elevation_deg.to_radians())
    }

    pub fn azimuth_deg(&self) -> f64 {
        self.azimuth.to_degrees()
    }

    pub fn elevation_deg(&self) -> f64 {
        self.elevation.to_degrees()
    }

    pub fn unit_vector(&self) -> Vec3 {
        let (sa, ca) = self.azimuth.sin_cos();
        let (se, ce) = self.elevation.sin_cos();
        [ca * ce, sa * ce, se]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteeringVector {
    pub h_w: f64,
    pub h_x: f64,
    pub h_y: f64,
    pub h_z: f64,
}

impl SteeringVector {
    pub fn gains(&self) -> [f64; 4] {
        [self.h_w, self.h_x, self.h_y, self.h_z]
    }
}

pub fn steering_vector(d: Direction) -> SteeringVector {
    let [x, y, z] = d.unit_vector();
    SteeringVector { h_w: W_GAIN, h_x: x, h_y: y, h_z: z }
}

/// Four time-domain channels in W, X, Y, Z order.
#[derive(Debug, Clone, PartialEq)]
pub struct FoaSignal {
    pub channels: [Vec<f64>; 4],
    pub sample_rate: u32,
}

impl FoaSignal {
    pub fn silent(len: usize, sample_rate: u32) -> Self {
        Self { channels: std::array::from_fn(|_| vec![0.0; len]), sample_rate }
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channel(&self, c: usize) -> MonoSignal {
        MonoSignal { samples: self.channels[c].clone(), sample_rate: self.sample_rate }
    }

    /// Sample-wise sum; the shorter operand is treated as zero-padded.
    pub fn add(&self, other: &FoaSignal) -> FoaSignal {
        let len = self.len().max(other.len());
        let channels = std::array::from_fn(|c| {
            (0..len)
                .map(|i| self.channels[c].get(i).copied().unwrap_or(0.0) + other.channels[c].get(i).copied().unwrap_or(0.0))
                .collect()
        });
        FoaSignal { channels, sample_rate: self.sample_rate }
    }

    pub fn accumulate(&mut self, other: &FoaSignal) {
        for (dst, src) in self.channels.iter_mut().zip(&other.channels) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
    }

    pub fn scale(&mut self, g: f64) {
        self.channels.iter_mut().flatten().for_each(|v| *v *= g);
    }

    /// Sum of squared samples over all four channels in `[start, end)`.
    pub fn energy_in(&self, start: usize, end: usize) -> f64 {
        let end = end.min(self.len());
        self.channels.iter().map(|ch| ch[start.min(end)..end].iter().map(|v| v * v).sum::<f64>()).sum()
    }

    pub fn energy(&self) -> f64 {
        self.energy_in(0, self.len())
    }
}

/// Encodes a mono source arriving from `d` with frequency-flat FOA gains.
pub fn encode_plane_wave(s: &MonoSignal, d: Direction) -> FoaSignal {
    encode_samples(&s.samples, d, s.sample_rate)
}

pub(crate) fn encode_samples(samples: &[f64], d: Direction, sample_rate: u32) -> FoaSignal {
    let g = steering_vector(d).gains();
    FoaSignal { channels: std::array::from_fn(|c| samples.iter().map(|v| g[c] * v).collect()), sample_rate }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrogramSet {
    pub w: ComplexSpectrogram,
    pub x: ComplexSpectrogram,
    pub y: ComplexSpectrogram,
    pub z: ComplexSpectrogram,
}

impl SpectrogramSet {
    pub fn new(w: ComplexSpectrogram, x: ComplexSpectrogram, y: ComplexSpectrogram, z: ComplexSpectrogram) -> Result<Self> {
        for other in [&x, &y, &z] {
            if other.num_bins != w.num_bins || other.num_frames != w.num_frames || other.config != w.config {
                return Err(invalid_arg("FOA spectrograms differ in shape or STFT configuration"));
            }
        }
        Ok(Self { w, x, y, z })
    }

    pub fn from_foa(foa: &FoaSignal, config: &StftConfig) -> Result<Self> {
        let spec = |c: usize| stft_with(&foa.channel(c), config);
        Self::new(spec(0)?, spec(1)?, spec(2)?, spec(3)?)
    }

    pub fn num_bins(&self) -> usize {
        self.w.num_bins
    }

    pub fn num_frames(&self) -> usize {
        self.w.num_frames
    }

    pub fn channels(&self) -> [&ComplexSpectrogram; 4] {
        [&self.w, &self.x, &self.y, &self.z]
    }

    pub fn channels_mut(&mut self) -> [&mut ComplexSpectrogram; 4] {
        [&mut self.w, &mut self.x, &mut self.y, &mut self.z]
    }

    /// Power summed over the four channels, `[f][t]`.
    pub fn total_power(&self) -> RealMatrix {
        let mut out = RealMatrix::zeros(self.num_bins(), self.num_frames());
        for ch in self.channels() {
            for (o, c) in out.data.iter_mut().zip(&ch.bins) {
                *o += c.norm_sqr();
            }
        }
        out
    }
}

/// Whether a field is indexed by linear FFT bins or by mel bands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Linear,
    Mel,
}

/// Per-(band, frame) intensity vectors, stored `[band][t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityField {
    pub bands: usize,
    pub frames: usize,
    pub domain: Domain,
    pub iv: Vec<Vec3>,
}

impl IntensityField {
    pub fn zeros(bands: usize, frames: usize, domain: Domain) -> Self {
        Self { bands, frames, domain, iv: vec![[0.0; 3]; bands * frames] }
    }

    #[inline]
    pub fn get(&self, band: usize, t: usize) -> Vec3 {
        self.iv[band * self.frames + t]
    }

    #[inline]
    pub fn set(&mut self, band: usize, t: usize, v: Vec3) {
        self.iv[band * self.frames + t] = v;
    }

    fn check_compatible(&self, other: &IntensityField) -> Result<()> {
        if self.bands != other.bands || self.frames != other.frames || self.domain != other.domain {
            return Err(invalid_arg(format!(
                "field shapes differ: {}x{} {:?} vs {}x{} {:?}",
                self.bands, self.frames, self.domain, other.bands, other.frames, other.domain
            )));
        }
        Ok(())
    }

    pub fn sub(&self, other: &IntensityField) -> Result<IntensityField> {
        self.check_compatible(other)?;
        let iv = self.iv.iter().zip(&other.iv).map(|(a, b)| [a[0] - b[0], a[1] - b[1], a[2] - b[2]]).collect();
        Ok(IntensityField { iv, ..*self })
    }

    pub fn add(&self, other: &IntensityField) -> Result<IntensityField> {
        self.check_compatible(other)?;
        let iv = self.iv.iter().zip(&other.iv).map(|(a, b)| [a[0] + b[0], a[1] + b[1], a[2] + b[2]]).collect();
        Ok(IntensityField { iv, ..*self })
    }

    pub fn component(&self, k: usize) -> RealMatrix {
        RealMatrix { rows: self.bands, cols: self.frames, data: self.iv.iter().map(|v| v[k]).collect() }
    }

    pub fn from_components(c: [RealMatrix; 3], domain: Domain) -> Result<Self> {
        if c[1].rows != c[0].rows || c[2].rows != c[0].rows || c[1].cols != c[0].cols || c[2].cols != c[0].cols {
            return Err(invalid_arg("component matrices differ in shape"));
        }
        let iv = (0..c[0].data.len()).map(|i| [c[0].data[i], c[1].data[i], c[2].data[i]]).collect();
        Ok(Self { bands: c[0].rows, frames: c[0].cols, domain, iv })
    }

    /// Compresses each component of a linear-frequency field onto mel bands.
    pub fn to_mel(&self, fb: &MelFilterbank) -> Result<IntensityField> {
        if self.domain != Domain::Linear {
            return Err(invalid_arg("mel compression expects a linear-frequency field"));
        }
        let comps = [apply_mel(fb, &self.component(0))?, apply_mel(fb, &self.component(1))?, apply_mel(fb, &self.component(2))?];
        Self::from_components(comps, Domain::Mel)
    }
}

/// Nonnegative per-(band, frame) weights, stored `[band][t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskField {
    pub m: RealMatrix,
    pub domain: Domain,
}

impl MaskField {
    pub fn new(m: RealMatrix, domain: Domain) -> Result<Self> {
        if m.data.iter().any(|&v| !(v >= 0.0)) {
            return Err(invalid_arg("mask weights must be nonnegative"));
        }
        Ok(Self { m, domain })
    }

    pub fn ones(bands: usize, frames: usize, domain: Domain) -> Self {
        Self { m: RealMatrix { rows: bands, cols: frames, data: vec![1.0; bands * frames] }, domain }
    }

    pub fn scaled(&self, c: f64) -> MaskField {
        let mut m = self.m.clone();
        m.data.iter_mut().for_each(|v| *v *= c);
        MaskField { m, domain: self.domain }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Air density in kg/m^3.
    pub rho0: f64,
    /// Speed of sound in m/s.
    pub c: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self { rho0: 1.2, c: 343.0 }
    }
}

impl PhysicalConstants {
    pub fn lambda(&self) -> f64 {
        1.0 / (2.0 * self.rho0 * self.c * self.c)
    }
}

/// `Re(conj(W) * (X, Y, Z))` per bin, linear-frequency domain.
pub fn intensity_field(sp: &SpectrogramSet) -> IntensityField {
    let n = sp.w.bins.len();
    let mut iv = Vec::with_capacity(n);
    for i in 0..n {
        let w: Complex64 = sp.w.bins[i].conj();
        iv.push([(w * sp.x.bins[i]).re, (w * sp.y.bins[i]).re, (w * sp.z.bins[i]).re]);
    }
    IntensityField { bands: sp.num_bins(), frames: sp.num_frames(), domain: Domain::Linear, iv }
}

/// `lambda * (|W|^2 + (|X|^2 + |Y|^2 + |Z|^2) / 3)` per bin.
pub fn energy_mask(sp: &SpectrogramSet, k: &PhysicalConstants) -> MaskField {
    let lambda = k.lambda();
    let data = (0..sp.w.bins.len())
        .map(|i| {
            let dip = sp.x.bins[i].norm_sqr() + sp.y.bins[i].norm_sqr() + sp.z.bins[i].norm_sqr();
            lambda * (sp.w.bins[i].norm_sqr() + dip / 3.0)
        })
        .collect();
    MaskField { m: RealMatrix { rows: sp.num_bins(), cols: sp.num_frames(), data }, domain: Domain::Linear }
}

pub const DEFAULT_NORM_EPS: f64 = 1e-12;

#[inline]
pub fn normalize_vec(v: Vec3, eps: f64) -> Vec3 {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if n == 0.0 {
        return [0.0; 3];
    }
    let s = 1.0 / (n + eps);
    [v[0] * s, v[1] * s, v[2] * s]
}

pub fn normalize_iv(field: &IntensityField, eps: f64) -> IntensityField {
    IntensityField { iv: field.iv.iter().map(|&v| normalize_vec(v, eps)).collect(), ..*field }
}

/// `I_t = sum_band M[band][t] * (iv[band][t] - reverb[band][t])`.
///
/// A missing mask counts as all ones and a missing reverb field as zero.
pub fn aggregate_refined(iv: &IntensityField, mask: Option<&MaskField>, reverb: Option<&IntensityField>) -> Result<Vec<Vec3>> {
    if let Some(m) = mask {
        if m.m.rows != iv.bands || m.m.cols != iv.frames || m.domain != iv.domain {
            return Err(invalid_arg(format!(
                "mask is {}x{} {:?}, field is {}x{} {:?}",
                m.m.rows, m.m.cols, m.domain, iv.bands, iv.frames, iv.domain
            )));
        }
    }
    if let Some(r) = reverb {
        iv.check_compatible(r)?;
    }
    let mut out = vec![[0.0; 3]; iv.frames];
    for b in 0..iv.bands {
        for (t, acc) in out.iter_mut().enumerate() {
            let i = b * iv.frames + t;
            let mut v = iv.iv[i];
            if let Some(r) = reverb {
                let rv = r.iv[i];
                v = [v[0] - rv[0], v[1] - rv[1], v[2] - rv[2]];
            }
            let w = mask.map_or(1.0, |m| m.m.data[i]);
            acc[0] += w * v[0];
            acc[1] += w * v[1];
            acc[2] += w * v[2];
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Degeneracy {
    #[default]
    None,
    /// Horizontal component is zero, so the azimuth is a convention (0).
    Azimuth,
    /// Zero vector; both angles are conventions.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoaEstimate {
    pub direction: Direction,
    pub degeneracy: Degeneracy,
}

impl DoaEstimate {
    pub fn is_degenerate(&self) -> bool {
        self.degeneracy != Degeneracy::None
    }
}

/// Azimuth and elevation of an aggregated intensity vector via two-argument arctangents.
pub fn extract_doa(v: Vec3) -> DoaEstimate {
    let [x, y, z] = v;
    let rho = (x * x + y * y).sqrt();
    if rho == 0.0 {
        if z == 0.0 {
            return DoaEstimate { direction: Direction::default(), degeneracy: Degeneracy::Full };
        }
        let elevation = if z > 0.0 { PI / 2.0 } else { -PI / 2.0 };
        return DoaEstimate { direction: Direction { azimuth: 0.0, elevation }, degeneracy: Degeneracy::Azimuth };
    }
    let mut azimuth = y.atan2(x);
    if azimuth <= -PI {
        azimuth = PI;
    }
    DoaEstimate { direction: Direction { azimuth, elevation: z.atan2(rho) }, degeneracy: Degeneracy::None }
}

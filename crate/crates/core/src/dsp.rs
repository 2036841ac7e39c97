//! Analysis-side signal processing: Hann window, one-sided STFT, power
//! spectra and a peak-normalized triangular mel filterbank.
//!
//! Frames are never padded: frame `t` reads samples `[t * hop, t * hop + fft_size)`
//! and frames that would run past the end of the signal are dropped.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{invalid_arg, Error, Result};

pub const DEFAULT_SAMPLE_RATE: u32 = 48_000;

/// Floor added before taking the log of mel energies.
pub const LOG_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct MonoSignal {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl MonoSignal {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(invalid_arg("sample rate must be positive"));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(invalid_arg("signal contains non-finite samples"));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Row-major dense real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RealMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl RealMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }
}

/// STFT frame layout shared by every channel of a recording.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StftConfig {
    pub fft_size: usize,
    pub hop: usize,
    pub sample_rate: u32,
}

impl StftConfig {
    /// 8192-point window, 20 ms hop at the given rate.
    pub fn standard(sample_rate: u32) -> Self {
        Self { fft_size: 8192, hop: (sample_rate as usize) / 50, sample_rate }
    }

    pub fn from_hop_ms(fft_size: usize, hop_ms: f64, sample_rate: u32) -> Self {
        let hop = (hop_ms * 1e-3 * sample_rate as f64).round().max(1.0) as usize;
        Self { fft_size, hop, sample_rate }
    }

    pub fn num_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Number of complete frames for a signal of `len` samples.
    pub fn num_frames(&self, len: usize) -> usize {
        if len < self.fft_size {
            0
        } else {
            (len - self.fft_size) / self.hop + 1
        }
    }

    /// Time in seconds of the centre of frame `t`'s analysis window.
    pub fn frame_center_s(&self, t: usize) -> f64 {
        (t * self.hop) as f64 / self.sample_rate as f64 + self.fft_size as f64 / (2.0 * self.sample_rate as f64)
    }

    pub fn hop_s(&self) -> f64 {
        self.hop as f64 / self.sample_rate as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !self.fft_size.is_power_of_two() || self.fft_size < 2 {
            return Err(invalid_arg(format!("fft size {} is not a power of two", self.fft_size)));
        }
        if self.hop == 0 {
            return Err(invalid_arg("hop must be at least one sample"));
        }
        if self.sample_rate == 0 {
            return Err(invalid_arg("sample rate must be positive"));
        }
        Ok(())
    }
}

/// One-sided STFT of a single channel. `bins` is stored `[f][t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    pub bins: Vec<Complex64>,
    pub num_bins: usize,
    pub num_frames: usize,
    pub config: StftConfig,
}

impl ComplexSpectrogram {
    #[inline]
    pub fn get(&self, f: usize, t: usize) -> Complex64 {
        self.bins[f * self.num_frames + t]
    }

    pub fn power(&self) -> RealMatrix {
        RealMatrix {
            rows: self.num_bins,
            cols: self.num_frames,
            data: self.bins.iter().map(|c| c.norm_sqr()).collect(),
        }
    }

    /// Windowed time-domain energy of frame `t` recovered from the
    /// one-sided bins (interior bins counted twice).
    pub fn frame_energy(&self, t: usize) -> f64 {
        let n = self.config.fft_size as f64;
        let last = self.num_bins - 1;
        let mut acc = 0.0;
        for f in 0..self.num_bins {
            let p = self.get(f, t).norm_sqr();
            acc += if f == 0 || f == last { p } else { 2.0 * p };
        }
        acc / n
    }
}

/// Symmetric Hann window, zero at both ends.
pub fn hann_window(n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(invalid_arg(format!("window length {n} is below 2")));
    }
    let denom = (n - 1) as f64;
    Ok((0..n).map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / denom).cos()).collect())
}

pub fn stft(x: &MonoSignal, fft_size: usize, hop: usize) -> Result<ComplexSpectrogram> {
    let config = StftConfig { fft_size, hop, sample_rate: x.sample_rate };
    stft_with(x, &config)
}

pub fn stft_with(x: &MonoSignal, config: &StftConfig) -> Result<ComplexSpectrogram> {
    config.validate()?;
    if x.len() < config.fft_size {
        return Err(Error::EmptySpectrogram { len: x.len(), fft_size: config.fft_size });
    }
    let window = hann_window(config.fft_size)?;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(config.fft_size);
    let num_frames = config.num_frames(x.len());
    let num_bins = config.num_bins();
    let mut bins = vec![Complex64::new(0.0, 0.0); num_bins * num_frames];
    let mut buf = vec![Complex64::new(0.0, 0.0); config.fft_size];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for t in 0..num_frames {
        let frame = &x.samples[t * config.hop..t * config.hop + config.fft_size];
        for ((b, &s), &w) in buf.iter_mut().zip(frame).zip(&window) {
            *b = Complex64::new(s * w, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (f, v) in buf.iter().take(num_bins).enumerate() {
            bins[f * num_frames + t] = *v;
        }
    }
    Ok(ComplexSpectrogram { bins, num_bins, num_frames, config: *config })
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters with mel-spaced centres, each scaled to a peak of 1.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    /// Dense weights `[band][bin]`.
    pub weights: RealMatrix,
    /// `num_bands + 2` edge frequencies in Hz; band `b` spans `edges[b]..edges[b + 2]`.
    pub band_edges: Vec<f64>,
    /// Half-open range of nonzero bins per band.
    support: Vec<(usize, usize)>,
}

impl MelFilterbank {
    pub fn num_bands(&self) -> usize {
        self.weights.rows
    }

    pub fn num_bins(&self) -> usize {
        self.weights.cols
    }

    pub fn support(&self, band: usize) -> (usize, usize) {
        self.support[band]
    }

    pub fn center_hz(&self, band: usize) -> f64 {
        self.band_edges[band + 1]
    }
}

pub fn mel_filterbank(
    num_bands: usize,
    fft_size: usize,
    sample_rate: u32,
    f_min: f64,
    f_max: f64,
) -> Result<MelFilterbank> {
    if num_bands == 0 {
        return Err(invalid_arg("need at least one mel band"));
    }
    if fft_size < 2 || !fft_size.is_power_of_two() {
        return Err(invalid_arg(format!("fft size {fft_size} is not a power of two")));
    }
    let nyquist = sample_rate as f64 / 2.0;
    if !(f_min >= 0.0 && f_min < f_max && f_max <= nyquist) {
        return Err(invalid_arg(format!("need 0 <= f_min < f_max <= {nyquist}, got {f_min}..{f_max}")));
    }
    let num_bins = fft_size / 2 + 1;
    let bin_hz = sample_rate as f64 / fft_size as f64;
    let (mel_lo, mel_hi) = (hz_to_mel(f_min), hz_to_mel(f_max));
    let edges: Vec<f64> = (0..num_bands + 2)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (num_bands + 1) as f64))
        .collect();
    let mut edges = edges;
    edges[0] = f_min;
    edges[num_bands + 1] = f_max;

    let mut weights = RealMatrix::zeros(num_bands, num_bins);
    let mut support = Vec::with_capacity(num_bands);
    for b in 0..num_bands {
        let (lo, mid, hi) = (edges[b], edges[b + 1], edges[b + 2]);
        let row = weights.row_mut(b);
        for (k, w) in row.iter_mut().enumerate() {
            let f = k as f64 * bin_hz;
            *w = if f > lo && f <= mid {
                (f - lo) / (mid - lo)
            } else if f > mid && f < hi {
                (hi - f) / (hi - mid)
            } else {
                0.0
            };
        }
        let peak = row.iter().cloned().fold(0.0, f64::max);
        if peak <= 0.0 {
            return Err(invalid_arg(format!(
                "mel band {b} ({lo:.2}..{hi:.2} Hz) contains no FFT bin; too many bands for {fft_size}-point FFT"
            )));
        }
        row.iter_mut().for_each(|w| *w /= peak);
        let first = row.iter().position(|&w| w > 0.0).unwrap_or(0);
        let last = row.iter().rposition(|&w| w > 0.0).unwrap_or(0);
        support.push((first, last + 1));
    }
    Ok(MelFilterbank { weights, band_edges: edges, support })
}

/// `out[b][t] = sum_f weights[b][f] * field[f][t]`.
pub fn apply_mel(fb: &MelFilterbank, field: &RealMatrix) -> Result<RealMatrix> {
    if field.rows != fb.num_bins() {
        return Err(invalid_arg(format!(
            "field has {} rows but the filterbank expects {} bins",
            field.rows,
            fb.num_bins()
        )));
    }
    let mut out = RealMatrix::zeros(fb.num_bands(), field.cols);
    for b in 0..fb.num_bands() {
        let (lo, hi) = fb.support[b];
        let wrow = fb.weights.row(b);
        let orow = &mut out.data[b * field.cols..(b + 1) * field.cols];
        for f in lo..hi {
            let w = wrow[f];
            if w == 0.0 {
                continue;
            }
            for (o, &v) in orow.iter_mut().zip(field.row(f)) {
                *o += w * v;
            }
        }
    }
    Ok(out)
}

pub fn logmel(power: &RealMatrix, fb: &MelFilterbank) -> Result<RealMatrix> {
    if power.data.iter().any(|&p| p < 0.0 || p.is_nan()) {
        return Err(invalid_arg("power spectrum has negative entries"));
    }
    let mut out = apply_mel(fb, power)?;
    out.data.iter_mut().for_each(|e| *e = (*e + LOG_FLOOR).ln());
    Ok(out)
}

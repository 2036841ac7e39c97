//! Synthetic FOA scenes with separately rendered direct, reverberant and
//! noise components.
//!
//! Randomness comes from one ChaCha8 generator seeded with the scene seed;
//! each component draws from its own stream (`set_stream`), so adding an
//! event never perturbs the noise or the reverberation of the others:
//!
//! | stream        | component                     |
//! |---------------|-------------------------------|
//! | 1             | reverberation tail            |
//! | 2             | noise field                   |
//! | 100 + index   | source signal of event `index`|
//!
//! Reverberation is a diffuse tail: for each of `diffuse_directions` random
//! directions, delayed copies of the dry source with amplitude
//! `exp(-6.9 * delay / rt60)` and random sign, encoded as plane waves. The
//! tail is scaled to the requested direct-to-reverberant energy ratio. Noise
//! is a sum of independent noise plane waves from random directions, scaled to
//! the requested SNR against the direct sound over the active samples.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dsp::{apply_mel, MelFilterbank, RealMatrix, StftConfig};
use crate::error::{invalid_arg, Result};
use crate::foa::{encode_samples, intensity_field, Direction, Domain, FoaSignal, IntensityField, MaskField, SpectrogramSet, W_GAIN};
use crate::tracks::{rasterize_events, ActivityTrack, DoaTrack, TimedEvent};

/// RMS of every dry source signal.
pub const SOURCE_RMS: f64 = 0.1;
/// Number of independent plane waves forming the isotropic noise field.
pub const NOISE_DIRECTIONS: usize = 16;
/// Delayed copies per diffuse reverberation direction.
pub const TAPS_PER_DIRECTION: usize = 8;
/// Earliest reflection delay in seconds.
pub const PRE_DELAY_S: f64 = 0.005;
const FADE_S: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceKind {
    White,
    /// Low-passed noise with a slow (3-6 Hz) amplitude envelope.
    SpeechLike,
    /// Harmonic tone with three partials.
    Tone,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    White,
    Pink,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneEvent {
    pub onset_s: f64,
    pub offset_s: f64,
    pub direction: Direction,
    pub kind: SourceKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReverbSpec {
    pub rt60_s: f64,
    pub drr_db: f64,
    pub diffuse_directions: usize,
}

impl Default for ReverbSpec {
    fn default() -> Self {
        Self { rt60_s: 0.0, drr_db: 0.0, diffuse_directions: 32 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Direct-to-noise ratio; `f64::INFINITY` disables noise.
    pub snr_db: f64,
    pub kind: NoiseKind,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self { snr_db: f64::INFINITY, kind: NoiseKind::White }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub duration_s: f64,
    pub sample_rate: u32,
    pub events: Vec<SceneEvent>,
    pub reverb: ReverbSpec,
    pub noise: NoiseSpec,
    pub seed: u64,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(invalid_arg(format!("duration {} must be positive", self.duration_s)));
        }
        if self.sample_rate == 0 {
            return Err(invalid_arg("sample rate must be positive"));
        }
        if !(self.reverb.rt60_s >= 0.0 && self.reverb.rt60_s.is_finite()) {
            return Err(invalid_arg(format!("rt60 {} must be >= 0", self.reverb.rt60_s)));
        }
        if self.reverb.drr_db.is_nan() || self.noise.snr_db.is_nan() {
            return Err(invalid_arg("DRR and SNR must be numbers"));
        }
        let mut sorted: Vec<&SceneEvent> = self.events.iter().collect();
        sorted.sort_by(|a, b| a.onset_s.total_cmp(&b.onset_s));
        for e in &sorted {
            if !(e.onset_s >= 0.0 && e.onset_s < e.offset_s && e.offset_s <= self.duration_s) {
                return Err(invalid_arg(format!(
                    "event {}..{} s must satisfy 0 <= onset < offset <= {}",
                    e.onset_s, e.offset_s, self.duration_s
                )));
            }
            Direction::new(e.direction.azimuth, e.direction.elevation)?;
        }
        for pair in sorted.windows(2) {
            if pair[1].onset_s < pair[0].offset_s {
                return Err(invalid_arg(format!(
                    "events {}..{} and {}..{} overlap",
                    pair[0].onset_s, pair[0].offset_s, pair[1].onset_s, pair[1].offset_s
                )));
            }
        }
        Ok(())
    }

    pub fn num_samples(&self) -> usize {
        (self.duration_s * self.sample_rate as f64).round() as usize
    }

    pub fn timed_events(&self) -> Vec<TimedEvent> {
        self.events
            .iter()
            .map(|e| TimedEvent { onset_s: e.onset_s, offset_s: e.offset_s, direction: e.direction })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneRender {
    pub direct: FoaSignal,
    pub reverb: FoaSignal,
    pub noise: FoaSignal,
    pub mixture: FoaSignal,
    pub gt_doa: DoaTrack,
    pub gt_activity: ActivityTrack,
    pub stft: StftConfig,
}

fn component_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn random_direction(rng: &mut impl Rng) -> Direction {
    let z: f64 = rng.gen_range(-1.0..=1.0);
    let az: f64 = rng.gen_range(-PI..PI);
    Direction::wrapped(az, z.asin())
}

fn gaussian(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Pink noise by Paul Kellet's filter bank over white Gaussian input.
fn pink(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let mut b = [0.0f64; 7];
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let w: f64 = rng.sample(StandardNormal);
        b[0] = 0.99886 * b[0] + w * 0.0555179;
        b[1] = 0.99332 * b[1] + w * 0.0750759;
        b[2] = 0.96900 * b[2] + w * 0.1538520;
        b[3] = 0.86650 * b[3] + w * 0.3104856;
        b[4] = 0.55000 * b[4] + w * 0.5329522;
        b[5] = -0.7616 * b[5] - w * 0.0168980;
        out.push(b[0] + b[1] + b[2] + b[3] + b[4] + b[5] + b[6] + w * 0.5362);
        b[6] = w * 0.115926;
    }
    out
}

fn set_rms(x: &mut [f64], rms: f64) {
    let cur = (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt();
    if cur > 0.0 {
        x.iter_mut().for_each(|v| *v *= rms / cur);
    }
}

fn source_signal(kind: SourceKind, n: usize, sample_rate: u32, rng: &mut impl Rng) -> Vec<f64> {
    let sr = sample_rate as f64;
    let mut x = match kind {
        SourceKind::White => gaussian(rng, n),
        SourceKind::SpeechLike => {
            let rate: f64 = rng.gen_range(3.0..6.0);
            let phase: f64 = rng.gen_range(0.0..2.0 * PI);
            let mut y = 0.0;
            gaussian(rng, n)
                .into_iter()
                .enumerate()
                .map(|(i, w)| {
                    y = w + 0.85 * y;
                    let env = 0.55 + 0.45 * (2.0 * PI * rate * i as f64 / sr + phase).sin();
                    y * env
                })
                .collect()
        }
        SourceKind::Tone => {
            let f0: f64 = rng.gen_range(200.0..3000.0);
            let phases: [f64; 3] = std::array::from_fn(|_| rng.gen_range(0.0..2.0 * PI));
            (0..n)
                .map(|i| {
                    let t = i as f64 / sr;
                    (0..3)
                        .filter(|&h| f0 * ((h + 1) as f64) < sr / 2.0)
                        .map(|h| 0.5f64.powi(h as i32) * (2.0 * PI * f0 * (h + 1) as f64 * t + phases[h]).sin())
                        .sum()
                })
                .collect()
        }
    };
    set_rms(&mut x, SOURCE_RMS);
    let fade = ((FADE_S * sr) as usize).min(n / 2);
    for i in 0..fade {
        let g = 0.5 - 0.5 * (PI * i as f64 / fade as f64).cos();
        x[i] *= g;
        x[n - 1 - i] *= g;
    }
    x
}

fn event_span(e: &SceneEvent, sample_rate: u32, len: usize) -> (usize, usize) {
    let sr = sample_rate as f64;
    let a = ((e.onset_s * sr).round() as usize).min(len);
    let b = ((e.offset_s * sr).round() as usize).min(len);
    (a, b)
}

/// Renders a scene with frame labels on the standard 8192-point / 20 ms grid.
pub fn simulate_scene(spec: &SceneSpec) -> Result<SceneRender> {
    simulate_scene_with(spec, &StftConfig::standard(spec.sample_rate))
}

pub fn simulate_scene_with(spec: &SceneSpec, stft: &StftConfig) -> Result<SceneRender> {
    spec.validate()?;
    stft.validate()?;
    let sr = spec.sample_rate;
    let len = spec.num_samples();

    // Dry mono mix of every event (events never overlap) plus the direct field.
    let mut dry = vec![0.0; len];
    let mut direct = FoaSignal::silent(len, sr);
    let mut active_samples = 0usize;
    for (i, e) in spec.events.iter().enumerate() {
        let (a, b) = event_span(e, sr, len);
        if b <= a {
            continue;
        }
        active_samples += b - a;
        let mut rng = component_rng(spec.seed, 100 + i as u64);
        let sig = source_signal(e.kind, b - a, sr, &mut rng);
        dry[a..b].copy_from_slice(&sig);
        let enc = encode_samples(&sig, e.direction, sr);
        for c in 0..4 {
            direct.channels[c][a..b].copy_from_slice(&enc.channels[c]);
        }
    }

    let reverb = render_reverb(spec, &dry, &direct, len);
    let noise = render_noise(spec, &direct, len, active_samples);
    let mut mixture = direct.clone();
    mixture.accumulate(&reverb);
    mixture.accumulate(&noise);

    let frames = stft.num_frames(len);
    let (gt_doa, gt_activity) = rasterize_events(&spec.timed_events(), stft, frames);
    Ok(SceneRender { direct, reverb, noise, mixture, gt_doa, gt_activity, stft: *stft })
}

fn render_reverb(spec: &SceneSpec, dry: &[f64], direct: &FoaSignal, len: usize) -> FoaSignal {
    let sr = spec.sample_rate;
    let mut out = FoaSignal::silent(len, sr);
    let rv = &spec.reverb;
    if rv.rt60_s <= 0.0 || rv.diffuse_directions == 0 || rv.drr_db == f64::INFINITY {
        return out;
    }
    let direct_energy = direct.energy();
    if direct_energy == 0.0 {
        return out;
    }
    let mut rng = component_rng(spec.seed, 1);
    let max_delay = rv.rt60_s.max(PRE_DELAY_S * 2.0);
    let mut tail = vec![0.0; len];
    for _ in 0..rv.diffuse_directions {
        let dir = random_direction(&mut rng);
        tail.iter_mut().for_each(|v| *v = 0.0);
        for _ in 0..TAPS_PER_DIRECTION {
            let delay_s: f64 = rng.gen_range(PRE_DELAY_S..max_delay);
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let amp = sign * (-6.9 * delay_s / rv.rt60_s).exp();
            let d = (delay_s * sr as f64).round() as usize;
            if d >= len {
                continue;
            }
            for (o, &s) in tail[d..].iter_mut().zip(dry) {
                *o += amp * s;
            }
        }
        out.accumulate(&encode_samples(&tail, dir, sr));
    }
    let reverb_energy = out.energy();
    if reverb_energy > 0.0 {
        let target = direct_energy / 10f64.powf(rv.drr_db / 10.0);
        out.scale((target / reverb_energy).sqrt());
    }
    out
}

fn render_noise(spec: &SceneSpec, direct: &FoaSignal, len: usize, active_samples: usize) -> FoaSignal {
    let sr = spec.sample_rate;
    let mut out = FoaSignal::silent(len, sr);
    if spec.noise.snr_db == f64::INFINITY || len == 0 {
        return out;
    }
    let mut rng = component_rng(spec.seed, 2);
    for _ in 0..NOISE_DIRECTIONS {
        let dir = random_direction(&mut rng);
        let sig = match spec.noise.kind {
            NoiseKind::White => gaussian(&mut rng, len),
            NoiseKind::Pink => pink(&mut rng, len),
        };
        out.accumulate(&encode_samples(&sig, dir, sr));
    }
    // Reference power: direct sound over its active samples, or a nominal
    // plane wave at the source level when the scene has no events.
    let (direct_power, noise_power) = if active_samples > 0 {
        let mut de = 0.0;
        let mut ne = 0.0;
        for e in &spec.events {
            let (a, b) = event_span(e, sr, len);
            de += direct.energy_in(a, b);
            ne += out.energy_in(a, b);
        }
        (de / active_samples as f64, ne / active_samples as f64)
    } else {
        (SOURCE_RMS * SOURCE_RMS * (W_GAIN * W_GAIN + 1.0), out.energy() / len as f64)
    };
    if noise_power > 0.0 {
        let target = direct_power / 10f64.powf(spec.noise.snr_db / 10.0);
        out.scale((target / noise_power).sqrt());
    }
    out
}

/// Intensity fields of the mixture, of the direct sound alone, and the residual
/// `total - direct` that absorbs reverberation, noise and every cross term.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleComponents {
    pub total: IntensityField,
    pub direct: IntensityField,
    pub residual: IntensityField,
}

/// STFTs of the mixture and of the direct component of one render.
#[derive(Debug, Clone)]
pub struct OracleAnalysis {
    pub mixture: SpectrogramSet,
    pub direct: SpectrogramSet,
}

impl OracleAnalysis {
    pub fn new(r: &SceneRender, config: &StftConfig) -> Result<Self> {
        Ok(Self { mixture: SpectrogramSet::from_foa(&r.mixture, config)?, direct: SpectrogramSet::from_foa(&r.direct, config)? })
    }

    pub fn components(&self) -> Result<OracleComponents> {
        let total = intensity_field(&self.mixture);
        let direct = intensity_field(&self.direct);
        let residual = total.sub(&direct)?;
        Ok(OracleComponents { total, direct, residual })
    }

    /// Direct power and residual power (both summed over channels), `[f][t]`.
    pub fn energies(&self) -> (RealMatrix, RealMatrix) {
        let es = self.direct.total_power();
        let mut erest = RealMatrix::zeros(es.rows, es.cols);
        for (m, d) in self.mixture.channels().into_iter().zip(self.direct.channels()) {
            for (o, (a, b)) in erest.data.iter_mut().zip(m.bins.iter().zip(&d.bins)) {
                *o += (a - b).norm_sqr();
            }
        }
        (es, erest)
    }

    pub fn mask(&self) -> MaskField {
        let (es, erest) = self.energies();
        MaskField { m: ratio_mask(&es, &erest), domain: Domain::Linear }
    }

    /// Ratio mask computed from mel-compressed energies.
    pub fn mask_mel(&self, fb: &MelFilterbank) -> Result<MaskField> {
        let (es, erest) = self.energies();
        Ok(MaskField { m: ratio_mask(&apply_mel(fb, &es)?, &apply_mel(fb, &erest)?), domain: Domain::Mel })
    }
}

/// Added to the denominator of the ideal ratio mask.
pub const MASK_EPS: f64 = 1e-12;

fn ratio_mask(es: &RealMatrix, erest: &RealMatrix) -> RealMatrix {
    RealMatrix {
        rows: es.rows,
        cols: es.cols,
        data: es.data.iter().zip(&erest.data).map(|(&s, &r)| s / (s + r + MASK_EPS)).collect(),
    }
}

pub fn oracle_components(r: &SceneRender, config: &StftConfig) -> Result<OracleComponents> {
    OracleAnalysis::new(r, config)?.components()
}

/// `E_s / (E_s + E_rest + eps)` per bin, energies summed over the four channels.
pub fn oracle_mask(r: &SceneRender, config: &StftConfig) -> Result<MaskField> {
    Ok(OracleAnalysis::new(r, config)?.mask())
}

/// Random single-event scene: one source of random kind on the 10 degree
/// grid, elevation within +-40 degrees.
pub fn random_scene(seed: u64, duration_s: f64, reverb: ReverbSpec, noise: NoiseSpec) -> SceneSpec {
    let mut rng = component_rng(seed, 0);
    let az = rng.gen_range(-17i32..=18) as f64 * 10.0;
    let el = rng.gen_range(-4i32..=4) as f64 * 10.0;
    let len = rng.gen_range(0.5..0.8) * duration_s;
    let onset = rng.gen_range(0.05 * duration_s..(duration_s - len - 0.05 * duration_s).max(0.05 * duration_s + 1e-3));
    let kind = match rng.gen_range(0..3) {
        0 => SourceKind::White,
        1 => SourceKind::SpeechLike,
        _ => SourceKind::Tone,
    };
    SceneSpec {
        duration_s,
        sample_rate: crate::dsp::DEFAULT_SAMPLE_RATE,
        events: vec![SceneEvent {
            onset_s: onset,
            offset_s: (onset + len).min(duration_s),
            direction: Direction::from_degrees(az, el),
            kind,
        }],
        reverb,
        noise,
        seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(events: Vec<SceneEvent>) -> SceneSpec {
        SceneSpec {
            duration_s: 0.5,
            sample_rate: 48_000,
            events,
            reverb: ReverbSpec::default(),
            noise: NoiseSpec::default(),
            seed: 7,
        }
    }

    fn ev(on: f64, off: f64) -> SceneEvent {
        SceneEvent { onset_s: on, offset_s: off, direction: Direction::from_degrees(30.0, 10.0), kind: SourceKind::White }
    }

    #[test]
    fn dry_scene_is_direct_only() {
        let r = simulate_scene(&base(vec![ev(0.1, 0.4)])).unwrap();
        assert!(r.reverb.channels.iter().flatten().all(|&v| v == 0.0));
        assert!(r.noise.channels.iter().flatten().all(|&v| v == 0.0));
        assert_eq!(r.mixture, r.direct);
    }

    #[test]
    fn empty_scene() {
        let mut spec = base(vec![]);
        spec.noise.snr_db = 10.0;
        let r = simulate_scene(&spec).unwrap();
        assert!(r.direct.channels.iter().flatten().all(|&v| v == 0.0));
        assert!(r.gt_activity.values.iter().all(|&v| v == 0.0));
        assert!(r.noise.energy() > 0.0);
    }

    #[test]
    fn invalid_specs() {
        assert!(simulate_scene(&base(vec![ev(0.3, 0.2)])).is_err());
        assert!(simulate_scene(&base(vec![ev(0.1, 0.6)])).is_err());
        assert!(simulate_scene(&base(vec![ev(0.1, 0.3), ev(0.25, 0.4)])).is_err());
        let mut s = base(vec![]);
        s.reverb.rt60_s = -1.0;
        assert!(simulate_scene(&s).is_err());
        let mut s = base(vec![]);
        s.duration_s = 0.0;
        assert!(simulate_scene(&s).is_err());
    }

    #[test]
    fn mixture_is_sum_of_components() {
        let mut spec = base(vec![ev(0.05, 0.3)]);
        spec.reverb = ReverbSpec { rt60_s: 0.3, drr_db: 3.0, diffuse_directions: 8 };
        spec.noise = NoiseSpec { snr_db: 5.0, kind: NoiseKind::Pink };
        let r = simulate_scene(&spec).unwrap();
        for c in 0..4 {
            for i in 0..r.mixture.len() {
                let s = r.direct.channels[c][i] + r.reverb.channels[c][i] + r.noise.channels[c][i];
                assert_eq!(r.mixture.channels[c][i], s);
            }
        }
        let drr = 10.0 * (r.direct.energy() / r.reverb.energy()).log10();
        assert!((drr - 3.0).abs() < 1e-9);
    }

    #[test]
    fn deterministic_given_seed() {
        let mut spec = base(vec![ev(0.05, 0.3)]);
        spec.reverb = ReverbSpec { rt60_s: 0.2, drr_db: 0.0, diffuse_directions: 4 };
        spec.noise.snr_db = 0.0;
        assert_eq!(simulate_scene(&spec).unwrap(), simulate_scene(&spec).unwrap());
        let mut other = spec.clone();
        other.seed = 8;
        assert_ne!(simulate_scene(&spec).unwrap().mixture, simulate_scene(&other).unwrap().mixture);
    }

    #[test]
    fn random_scene_is_valid() {
        for seed in 0..50 {
            let s = random_scene(seed, 5.0, ReverbSpec::default(), NoiseSpec::default());
            s.validate().unwrap();
            let az = s.events[0].direction.azimuth_deg();
            assert!(((az / 10.0).round() * 10.0 - az).abs() < 1e-9);
        }
    }
}

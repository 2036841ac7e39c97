//! End-to-end estimators, activity thresholding, event segmentation and the
//! median smoothing applied inside each detected event.

use crate::dsp::StftConfig;
use crate::error::{Error, Result};
use crate::foa::{
    aggregate_refined, energy_mask, extract_doa, intensity_field, normalize_iv, wrap_angle, Degeneracy, Direction, DoaEstimate, FoaSignal,
    MaskField, PhysicalConstants, SpectrogramSet, Vec3, DEFAULT_NORM_EPS,
};
use crate::neural::features::ExtractedFeatures;
use crate::neural::{refine_with_net, FeatureExtractor, FeatureTensor, Mode, Network};
use crate::scene::{OracleAnalysis, SceneRender};
use crate::tracks::{ActivityTrack, DoaTrack, EventSegment};

/// Default activity threshold.
pub const SAD_THRESHOLD: f64 = 0.5;
/// Discretisation step for smoothed angles, degrees.
pub const GRID_STEP_DEG: f64 = 10.0;

/// Output of one estimator run.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub doa: DoaTrack,
    /// Euclidean norm of each frame's aggregated intensity vector.
    pub iv_norms: Vec<f64>,
    /// Activity probabilities, when the estimator predicts them.
    pub activity: Option<ActivityTrack>,
}

impl Estimate {
    fn from_aggregate(agg: &[Vec3], activity: Option<ActivityTrack>) -> Self {
        Self {
            doa: DoaTrack { frames: agg.iter().map(|&v| extract_doa(v)).collect() },
            iv_norms: agg.iter().map(|v| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()).collect(),
            activity,
        }
    }

    /// Binary activity: thresholded probabilities, or every non-degenerate
    /// frame for estimators without an activity head.
    pub fn active_frames(&self, alpha: f64) -> Vec<bool> {
        match &self.activity {
            Some(a) => sad_threshold(a, alpha),
            None => self.doa.frames.iter().map(|e| !e.is_degenerate()).collect(),
        }
    }
}

fn check_input(foa: &FoaSignal, stft: &StftConfig) -> Result<()> {
    if foa.sample_rate != stft.sample_rate {
        return Err(Error::InvalidInput(format!("recording is {} Hz, analysis expects {} Hz", foa.sample_rate, stft.sample_rate)));
    }
    if foa.len() < stft.fft_size {
        return Err(Error::EmptySpectrogram { len: foa.len(), fft_size: stft.fft_size });
    }
    Ok(())
}

/// Intensity vectors summed over all linear frequency bins, optionally
/// weighted by the energy mask.
pub fn run_baseline(foa: &FoaSignal, stft: &StftConfig, use_mask: bool) -> Result<Estimate> {
    check_input(foa, stft)?;
    let sp = SpectrogramSet::from_foa(foa, stft)?;
    baseline_from_spectra(&sp, use_mask)
}

pub fn baseline_from_spectra(sp: &SpectrogramSet, use_mask: bool) -> Result<Estimate> {
    let iv = intensity_field(sp);
    let mask = use_mask.then(|| energy_mask(sp, &PhysicalConstants::default()));
    Ok(Estimate::from_aggregate(&aggregate_refined(&iv, mask.as_ref(), None)?, None))
}

/// Unit-normalised mel-band intensity vectors summed over bands, optionally
/// weighted. This is the input representation of the network, so an
/// untrained network reproduces it exactly (with a flat mask).
pub fn run_mel_baseline(features: &ExtractedFeatures, mask: Option<&MaskField>) -> Result<Estimate> {
    let iv = normalize_iv(&features.iv_mel, DEFAULT_NORM_EPS);
    Ok(Estimate::from_aggregate(&aggregate_refined(&iv, mask, None)?, None))
}

/// Network-refined estimate with activity probabilities.
pub fn run_neural(foa: &FoaSignal, net: &Network, extractor: &FeatureExtractor) -> Result<Estimate> {
    check_input(foa, &extractor.stft)?;
    if net.arch.bands != extractor.bands() {
        return Err(Error::InvalidCheckpoint(format!("network expects {} mel bands, configuration has {}", net.arch.bands, extractor.bands())));
    }
    neural_from_features(&extractor.extract(foa)?.features, net)
}

pub fn neural_from_features(features: &FeatureTensor, net: &Network) -> Result<Estimate> {
    let (out, _) = net.forward(features, Mode::Infer)?;
    let agg = refine_with_net(&features.normalized_iv(), &out.riv_hat, &out.mask)?;
    Ok(Estimate::from_aggregate(&agg, Some(ActivityTrack::probabilities(out.sad)?)))
}

/// Refinement with exact components: ideal ratio mask and subtraction of the
/// true residual (everything but the direct sound).
pub fn run_oracle(render: &SceneRender, stft: &StftConfig) -> Result<Estimate> {
    let oa = OracleAnalysis::new(render, stft)?;
    let comps = oa.components()?;
    let agg = aggregate_refined(&comps.total, Some(&oa.mask()), Some(&comps.residual))?;
    Ok(Estimate::from_aggregate(&agg, None))
}

/// `a_t > alpha` (strict).
pub fn sad_threshold(a: &ActivityTrack, alpha: f64) -> Vec<bool> {
    a.values.iter().map(|&v| v > alpha).collect()
}

/// Maximal runs of active frames, `[start, end)`.
pub fn segment_events(active: &[bool]) -> Vec<EventSegment> {
    let mut out = Vec::new();
    let mut start = None;
    for (t, &a) in active.iter().enumerate() {
        match (a, start) {
            (true, None) => start = Some(t),
            (false, Some(s)) => {
                out.push(EventSegment { start: s, end: t });
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(EventSegment { start: s, end: active.len() });
    }
    out
}

/// Rounds to the nearest multiple of 10 degrees; azimuth -180 maps to 180.
pub fn discretize_deg(deg: f64) -> f64 {
    (deg / GRID_STEP_DEG).round() * GRID_STEP_DEG
}

fn discretize_azimuth_deg(deg: f64) -> f64 {
    let d = discretize_deg(deg);
    if d <= -180.0 {
        d + 360.0
    } else if d > 180.0 {
        d - 360.0
    } else {
        d
    }
}

/// Absolute angular difference on the circle, degrees, in `[0, 180]`.
pub fn wrapped_distance_deg(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

/// Lower median.
pub fn lower_median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v[(v.len() - 1) / 2]
}

/// Grid azimuth minimising the summed wrapped distance to `values` (which
/// are expected on the grid). Ties go to the smaller absolute azimuth, then
/// to the positive one.
pub fn circular_median_deg(values: &[f64]) -> f64 {
    let steps = (360.0 / GRID_STEP_DEG) as i64;
    let mut best: (f64, f64) = (f64::INFINITY, 0.0);
    for k in (-steps / 2 + 1)..=(steps / 2) {
        let c = k as f64 * GRID_STEP_DEG;
        let cost: f64 = values.iter().map(|&v| wrapped_distance_deg(v, c)).sum();
        let better = cost < best.0 - 1e-9
            || ((cost - best.0).abs() <= 1e-9 && (c.abs() < best.1.abs() || (c.abs() == best.1.abs() && c > best.1)));
        if better {
            best = (cost, c);
        }
    }
    best.1
}

/// Discretises every frame to the 10 degree grid, then replaces each event's
/// frames with the event median (circular for azimuth, lower median for
/// elevation).
pub fn postprocess(doa: &DoaTrack, events: &[EventSegment]) -> Result<DoaTrack> {
    let n = doa.len();
    let mut az: Vec<f64> = doa.directions().map(|d| discretize_azimuth_deg(d.azimuth_deg())).collect();
    let mut el: Vec<f64> = doa.directions().map(|d| discretize_deg(d.elevation_deg())).collect();
    for ev in events {
        if ev.start >= ev.end || ev.end > n {
            return Err(Error::InvalidArgument(format!("event [{}, {}) outside a {n}-frame track", ev.start, ev.end)));
        }
        let ma = circular_median_deg(&az[ev.start..ev.end]);
        let me = lower_median(&el[ev.start..ev.end]);
        az[ev.start..ev.end].iter_mut().for_each(|v| *v = ma);
        el[ev.start..ev.end].iter_mut().for_each(|v| *v = me);
    }
    Ok(DoaTrack {
        frames: (0..n)
            .map(|t| DoaEstimate {
                direction: Direction { azimuth: wrap_angle(az[t].to_radians()), elevation: el[t].to_radians() },
                degeneracy: doa.frames[t].degeneracy,
            })
            .collect(),
    })
}

/// Thresholding, segmentation and smoothing in one call.
pub fn smooth_with_activity(est: &Estimate, alpha: f64) -> Result<(DoaTrack, Vec<bool>)> {
    let active = est.active_frames(alpha);
    let track = postprocess(&est.doa, &segment_events(&active))?;
    Ok((track, active))
}

/// Frames flagged fully degenerate (zero aggregated vector).
pub fn degenerate_count(track: &DoaTrack) -> usize {
    track.frames.iter().filter(|e| e.degeneracy == Degeneracy::Full).count()
}

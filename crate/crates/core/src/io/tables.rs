//! CSV formats.
//!
//! - frame CSV: `frame_index, active, azimuth_deg, elevation_deg` (extra columns ignored on read)
//! - metadata CSV: `onset_s, offset_s, azimuth_deg, elevation_deg`; TAU-style
//!   `start_time, end_time, azi, ele` headers are accepted as well
//! - metrics CSV: `fold, DE_deg, FR`
//! - loss log: `epoch, lr, loss, loss_doa, loss_sad, val_de`

use std::path::Path;

use crate::dsp::StftConfig;
use crate::error::{Error, Result};
use crate::foa::{Degeneracy, Direction, DoaEstimate};
use crate::metrics::MetricsReport;
use crate::neural::EpochLog;
use crate::tracks::{rasterize_events, ActivityTrack, DoaTrack, TimedEvent};

/// Per-frame directions and binary activity as stored in a frame CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTrack {
    pub doa: DoaTrack,
    pub active: Vec<bool>,
}

impl FrameTrack {
    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn activity(&self) -> ActivityTrack {
        ActivityTrack::from_bools(self.active.iter().copied())
    }
}

fn bad(path: &Path, msg: impl std::fmt::Display) -> Error {
    Error::InvalidInput(format!("{}: {msg}", path.display()))
}

fn column(headers: &csv::StringRecord, names: &[&str], path: &Path) -> Result<usize> {
    headers
        .iter()
        .position(|h| names.iter().any(|n| h.trim().eq_ignore_ascii_case(n)))
        .ok_or_else(|| bad(path, format!("missing column '{}'", names[0])))
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, path: &Path, line: usize) -> Result<T> {
    let s = rec.get(i).unwrap_or("").trim();
    s.parse().map_err(|_| bad(path, format!("line {line}: cannot parse '{s}'")))
}

fn open(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let f = std::fs::File::open(path).map_err(|e| bad(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(f))
}

pub fn write_frame_csv(path: &Path, doa: &DoaTrack, active: &[bool]) -> Result<()> {
    if doa.len() != active.len() {
        return Err(Error::InvalidArgument(format!("{} directions but {} activity flags", doa.len(), active.len())));
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["frame_index", "active", "azimuth_deg", "elevation_deg"])?;
    for (t, d) in doa.directions().enumerate() {
        w.write_record([t.to_string(), u8::from(active[t]).to_string(), d.azimuth_deg().to_string(), d.elevation_deg().to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_frame_csv(path: &Path) -> Result<FrameTrack> {
    let mut r = open(path)?;
    let h = r.headers()?.clone();
    let (ci, ca, caz, cel) = (
        column(&h, &["frame_index"], path)?,
        column(&h, &["active"], path)?,
        column(&h, &["azimuth_deg"], path)?,
        column(&h, &["elevation_deg"], path)?,
    );
    let mut frames = Vec::new();
    let mut active = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = line + 2;
        let idx: usize = field(&rec, ci, path, line)?;
        if idx != frames.len() {
            return Err(bad(path, format!("line {line}: frame_index {idx}, expected {}", frames.len())));
        }
        let a: u8 = field(&rec, ca, path, line)?;
        if a > 1 {
            return Err(bad(path, format!("line {line}: active must be 0 or 1")));
        }
        let az: f64 = field(&rec, caz, path, line)?;
        let el: f64 = field(&rec, cel, path, line)?;
        if !(az.abs() <= 180.0 + 1e-9 && el.abs() <= 90.0 + 1e-9) {
            return Err(bad(path, format!("line {line}: angles out of range")));
        }
        let direction = Direction::from_degrees(az, el);
        frames.push(DoaEstimate { direction, degeneracy: Degeneracy::None });
        active.push(a == 1);
    }
    Ok(FrameTrack { doa: DoaTrack { frames }, active })
}

pub fn write_metadata_csv(path: &Path, events: &[TimedEvent]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["onset_s", "offset_s", "azimuth_deg", "elevation_deg"])?;
    for e in events {
        w.write_record([e.onset_s.to_string(), e.offset_s.to_string(), e.direction.azimuth_deg().to_string(), e.direction.elevation_deg().to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metadata_csv(path: &Path) -> Result<Vec<TimedEvent>> {
    let mut r = open(path)?;
    let h = r.headers()?.clone();
    let c_on = column(&h, &["onset_s", "start_time"], path)?;
    let c_off = column(&h, &["offset_s", "end_time"], path)?;
    let c_az = column(&h, &["azimuth_deg", "azi"], path)?;
    let c_el = column(&h, &["elevation_deg", "ele"], path)?;
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = line + 2;
        let onset_s: f64 = field(&rec, c_on, path, line)?;
        let offset_s: f64 = field(&rec, c_off, path, line)?;
        if !(onset_s >= 0.0 && onset_s < offset_s) {
            return Err(bad(path, format!("line {line}: need 0 <= onset < offset")));
        }
        let az: f64 = field(&rec, c_az, path, line)?;
        let el: f64 = field(&rec, c_el, path, line)?;
        if !(az > -180.0 && az <= 180.0 && (-90.0..=90.0).contains(&el)) {
            return Err(bad(path, format!("line {line}: azimuth must be in (-180, 180], elevation in [-90, 90]")));
        }
        out.push(TimedEvent { onset_s, offset_s, direction: Direction::from_degrees(az, el) });
    }
    Ok(out)
}

/// Ground truth from either a metadata CSV (rasterised onto `frames` frames)
/// or a frame CSV (which must have exactly `frames` rows).
pub fn read_reference_csv(path: &Path, stft: &StftConfig, frames: usize) -> Result<(DoaTrack, ActivityTrack)> {
    let headers = open(path)?.headers()?.clone();
    let is_meta = headers.iter().any(|h| matches!(h.trim(), "onset_s" | "start_time"));
    if is_meta {
        Ok(rasterize_events(&read_metadata_csv(path)?, stft, frames))
    } else {
        let t = read_frame_csv(path)?;
        if t.len() != frames {
            return Err(bad(path, format!("{} frames, estimate has {frames}", t.len())));
        }
        Ok((t.doa.clone(), t.activity()))
    }
}

pub fn write_metrics_csv(path: &Path, report: &MetricsReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["fold", "DE_deg", "FR"])?;
    for r in report.rows() {
        w.write_record([r.fold.clone(), r.de_deg.to_string(), r.fr.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_loss_log(path: &Path, logs: &[EpochLog]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["epoch", "lr", "loss", "loss_doa", "loss_sad", "val_de"])?;
    for l in logs {
        w.write_record([l.epoch.to_string(), l.lr.to_string(), l.loss.to_string(), l.loss_doa.to_string(), l.loss_sad.to_string(), l.val_de.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

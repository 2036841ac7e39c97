//! Time vs azimuth/elevation overlays: raw plot data as CSV and a static SVG.
//!
//! The plot CSV keeps the frame CSV columns first, so it can be fed back
//! wherever a frame CSV is accepted.

use std::fmt::Write as _;
use std::path::Path;

use crate::dsp::StftConfig;
use crate::error::{Error, Result};
use crate::tracks::{ActivityTrack, DoaTrack};

use super::tables::FrameTrack;

#[derive(Debug, Clone, PartialEq)]
pub struct PlotRow {
    pub frame_index: usize,
    pub time_s: f64,
    pub active: bool,
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub gt_active: bool,
    pub gt_azimuth_deg: f64,
    pub gt_elevation_deg: f64,
}

pub fn plot_rows(est: &FrameTrack, gt_doa: &DoaTrack, gt_activity: &ActivityTrack, stft: &StftConfig) -> Result<Vec<PlotRow>> {
    if gt_doa.len() != est.len() || gt_activity.len() != est.len() {
        return Err(Error::InvalidInput(format!("estimate has {} frames, reference {}", est.len(), gt_doa.len())));
    }
    Ok((0..est.len())
        .map(|t| {
            let (d, g) = (est.doa.direction(t), gt_doa.direction(t));
            PlotRow {
                frame_index: t,
                time_s: stft.frame_center_s(t),
                active: est.active[t],
                azimuth_deg: d.azimuth_deg(),
                elevation_deg: d.elevation_deg(),
                gt_active: gt_activity.is_active(t),
                gt_azimuth_deg: g.azimuth_deg(),
                gt_elevation_deg: g.elevation_deg(),
            }
        })
        .collect())
}

pub fn write_plot_csv(path: &Path, rows: &[PlotRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["frame_index", "active", "azimuth_deg", "elevation_deg", "time_s", "gt_active", "gt_azimuth_deg", "gt_elevation_deg"])?;
    for r in rows {
        w.write_record([
            r.frame_index.to_string(),
            u8::from(r.active).to_string(),
            r.azimuth_deg.to_string(),
            r.elevation_deg.to_string(),
            r.time_s.to_string(),
            u8::from(r.gt_active).to_string(),
            r.gt_azimuth_deg.to_string(),
            r.gt_elevation_deg.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

const WIDTH: f64 = 800.0;
const PANEL_H: f64 = 220.0;
const MARGIN_L: f64 = 60.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const GAP: f64 = 50.0;

struct Panel {
    top: f64,
    lo: f64,
    hi: f64,
    ticks: &'static [f64],
    label: &'static str,
}

impl Panel {
    fn y(&self, v: f64) -> f64 {
        self.top + (self.hi - v) / (self.hi - self.lo) * PANEL_H
    }
}

/// Ground truth as line segments over active frames, estimates as dots on
/// active frames.
pub fn write_svg(path: &Path, rows: &[PlotRow], title: &str) -> Result<()> {
    let t_max = rows.last().map_or(1.0, |r| r.time_s).max(1e-3);
    let x = |t: f64| MARGIN_L + t / t_max * (WIDTH - MARGIN_L - MARGIN_R);
    let panels = [
        Panel { top: MARGIN_T, lo: -180.0, hi: 180.0, ticks: &[-180.0, -90.0, 0.0, 90.0, 180.0], label: "azimuth (deg)" },
        Panel { top: MARGIN_T + PANEL_H + GAP, lo: -90.0, hi: 90.0, ticks: &[-90.0, -45.0, 0.0, 45.0, 90.0], label: "elevation (deg)" },
    ];
    let height = MARGIN_T + 2.0 * PANEL_H + GAP + 40.0;
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" font-size="14">{}</text>"#, MARGIN_L, escape(title));
    for (k, p) in panels.iter().enumerate() {
        let _ = writeln!(s, r#"<rect x="{MARGIN_L}" y="{}" width="{}" height="{PANEL_H}" fill="none" stroke="black"/>"#, p.top, WIDTH - MARGIN_L - MARGIN_R);
        for &tk in p.ticks {
            let y = p.y(tk);
            let _ = writeln!(s, r##"<line x1="{MARGIN_L}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/>"##, WIDTH - MARGIN_R);
            let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{tk}</text>"#, MARGIN_L - 6.0, y + 4.0);
        }
        let _ = writeln!(s, r#"<text x="14" y="{:.2}" transform="rotate(-90 14 {:.2})" text-anchor="middle">{}</text>"#, p.top + PANEL_H / 2.0, p.top + PANEL_H / 2.0, p.label);
        let value = |r: &PlotRow, gt: bool| match (k, gt) {
            (0, true) => r.gt_azimuth_deg,
            (0, false) => r.azimuth_deg,
            (_, true) => r.gt_elevation_deg,
            (_, false) => r.elevation_deg,
        };
        // reference: polyline per active run, broken at the azimuth seam
        let mut run: Vec<(f64, f64)> = Vec::new();
        let flush = |run: &mut Vec<(f64, f64)>, s: &mut String| {
            if run.len() > 1 {
                let pts: Vec<String> = run.iter().map(|(a, b)| format!("{a:.2},{b:.2}")).collect();
                let _ = writeln!(s, r##"<polyline points="{}" fill="none" stroke="#1f77b4" stroke-width="3"/>"##, pts.join(" "));
            } else if let Some(&(a, b)) = run.first() {
                let _ = writeln!(s, r##"<circle cx="{a:.2}" cy="{b:.2}" r="2" fill="#1f77b4"/>"##);
            }
            run.clear();
        };
        let mut prev: Option<f64> = None;
        for r in rows {
            if !r.gt_active {
                flush(&mut run, &mut s);
                prev = None;
                continue;
            }
            let v = value(r, true);
            if prev.is_some_and(|p| (p - v).abs() > 180.0) {
                flush(&mut run, &mut s);
            }
            run.push((x(r.time_s), p.y(v)));
            prev = Some(v);
        }
        flush(&mut run, &mut s);
        for r in rows.iter().filter(|r| r.active) {
            let _ = writeln!(s, r##"<circle cx="{:.2}" cy="{:.2}" r="1.8" fill="#d62728"/>"##, x(r.time_s), p.y(value(r, false)));
        }
    }
    let base = MARGIN_T + 2.0 * PANEL_H + GAP;
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">time (s)</text>"#, (MARGIN_L + WIDTH - MARGIN_R) / 2.0, base + 30.0);
    let _ = writeln!(s, r#"<text x="{MARGIN_L}" y="{:.2}">0</text><text x="{:.2}" y="{:.2}" text-anchor="end">{t_max:.2}</text>"#, base + 16.0, WIDTH - MARGIN_R, base + 16.0);
    let _ = writeln!(s, r##"<text x="{:.2}" y="20" text-anchor="end"><tspan fill="#1f77b4">reference</tspan>  <tspan fill="#d62728">estimate</tspan></text>"##, WIDTH - MARGIN_R);
    s.push_str("</svg>\n");
    std::fs::write(path, s)?;
    Ok(())
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

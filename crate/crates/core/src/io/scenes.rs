//! Scene list files (TOML).
//!
//! ```toml
//! sample_rate = 48000            # optional
//!
//! [[scene]]
//! name = "demo"
//! duration_s = 5.0
//! seed = 7
//! rt60_s = 0.4                   # optional, default 0 (anechoic)
//! drr_db = 3.0                   # optional, default 0
//! snr_db = 10.0                  # optional, omitted = no noise
//! noise = "pink"                 # optional: white | pink
//!
//! [[scene.event]]
//! onset_s = 0.5
//! offset_s = 3.0
//! azimuth_deg = 30.0
//! elevation_deg = 10.0
//! kind = "speech"                # optional: white | speech | tone
//!
//! [generate]                     # optional: random single-event scenes
//! count = 200
//! duration_s = 5.0
//! seed = 1
//! rt60_s = 0.5
//! snr_db = 6.0
//! prefix = "train"
//! ```

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::foa::Direction;
use crate::scene::{random_scene, NoiseKind, NoiseSpec, ReverbSpec, SceneEvent, SceneSpec, SourceKind};

#[derive(Debug, Clone, PartialEq)]
pub struct SceneEntry {
    pub name: String,
    pub spec: SceneSpec,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FileToml {
    sample_rate: Option<u32>,
    #[serde(default)]
    scene: Vec<SceneToml>,
    generate: Option<GenerateToml>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneToml {
    name: String,
    duration_s: f64,
    seed: u64,
    #[serde(default)]
    rt60_s: f64,
    #[serde(default)]
    drr_db: f64,
    snr_db: Option<f64>,
    #[serde(default)]
    noise: NoiseToml,
    #[serde(default)]
    event: Vec<EventToml>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EventToml {
    onset_s: f64,
    offset_s: f64,
    azimuth_deg: f64,
    elevation_deg: f64,
    #[serde(default)]
    kind: KindToml,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GenerateToml {
    count: usize,
    #[serde(default = "default_duration")]
    duration_s: f64,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    rt60_s: f64,
    #[serde(default)]
    drr_db: f64,
    snr_db: Option<f64>,
    #[serde(default)]
    noise: NoiseToml,
    #[serde(default = "default_prefix")]
    prefix: String,
}

fn default_duration() -> f64 {
    5.0
}

fn default_prefix() -> String {
    "scene".into()
}

#[derive(Deserialize, Default, Clone, Copy)]
#[serde(rename_all = "lowercase")]
enum NoiseToml {
    #[default]
    White,
    Pink,
}

#[derive(Deserialize, Default, Clone, Copy)]
#[serde(rename_all = "lowercase")]
enum KindToml {
    #[default]
    White,
    Speech,
    Tone,
}

fn noise_spec(snr_db: Option<f64>, kind: NoiseToml) -> NoiseSpec {
    NoiseSpec {
        snr_db: snr_db.unwrap_or(f64::INFINITY),
        kind: match kind {
            NoiseToml::White => NoiseKind::White,
            NoiseToml::Pink => NoiseKind::Pink,
        },
    }
}

fn reverb_spec(rt60_s: f64, drr_db: f64) -> ReverbSpec {
    ReverbSpec { rt60_s, drr_db, ..ReverbSpec::default() }
}

fn check_name(name: &str) -> Result<()> {
    let ok = !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.')) && !name.starts_with('.');
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("scene name '{name}' must be non-empty and use only [A-Za-z0-9_.-]")))
    }
}

/// Parses a scene list; explicit scenes come first, then generated ones.
/// `default_rate` applies when the file has no `sample_rate` key.
pub fn parse_scene_file(text: &str, default_rate: u32) -> Result<Vec<SceneEntry>> {
    let file: FileToml = toml::from_str(text).map_err(|e| Error::InvalidInput(format!("scene file: {e}")))?;
    let sample_rate = file.sample_rate.unwrap_or(default_rate);
    let mut out = Vec::new();
    for s in file.scene {
        check_name(&s.name)?;
        let events = s
            .event
            .iter()
            .map(|e| {
                if !(e.azimuth_deg > -180.0 && e.azimuth_deg <= 180.0 && (-90.0..=90.0).contains(&e.elevation_deg)) {
                    return Err(Error::InvalidInput(format!("scene '{}': azimuth must be in (-180, 180], elevation in [-90, 90]", s.name)));
                }
                Ok(SceneEvent {
                    onset_s: e.onset_s,
                    offset_s: e.offset_s,
                    direction: Direction::from_degrees(e.azimuth_deg, e.elevation_deg),
                    kind: match e.kind {
                        KindToml::White => SourceKind::White,
                        KindToml::Speech => SourceKind::SpeechLike,
                        KindToml::Tone => SourceKind::Tone,
                    },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let spec = SceneSpec {
            duration_s: s.duration_s,
            sample_rate,
            events,
            reverb: reverb_spec(s.rt60_s, s.drr_db),
            noise: noise_spec(s.snr_db, s.noise),
            seed: s.seed,
        };
        spec.validate().map_err(|e| Error::InvalidInput(format!("scene '{}': {e}", s.name)))?;
        out.push(SceneEntry { name: s.name, spec });
    }
    if let Some(g) = file.generate {
        check_name(&g.prefix)?;
        for i in 0..g.count {
            let mut spec = random_scene(g.seed.wrapping_add(i as u64), g.duration_s, reverb_spec(g.rt60_s, g.drr_db), noise_spec(g.snr_db, g.noise));
            spec.sample_rate = sample_rate;
            spec.validate().map_err(|e| Error::InvalidInput(format!("generated scene {i}: {e}")))?;
            out.push(SceneEntry { name: format!("{}_{i:04}", g.prefix), spec });
        }
    }
    let mut names: Vec<&str> = out.iter().map(|e| e.name.as_str()).collect();
    names.sort_unstable();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::InvalidInput(format!("duplicate scene name '{}'", w[0])));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::DEFAULT_SAMPLE_RATE;

    #[test]
    fn explicit_and_generated() {
        let text = r#"
[[scene]]
name = "a"
duration_s = 1.0
seed = 3
snr_db = 10.0
[[scene.event]]
onset_s = 0.1
offset_s = 0.6
azimuth_deg = 30.0
elevation_deg = 10.0
kind = "tone"

[[scene]]
name = "empty"
duration_s = 0.5
seed = 1

[generate]
count = 3
seed = 10
prefix = "g"
"#;
        let s = parse_scene_file(text, DEFAULT_SAMPLE_RATE).unwrap();
        assert_eq!(s.len(), 5);
        assert_eq!(s[0].spec.events[0].kind, SourceKind::Tone);
        assert_eq!(s[0].spec.noise.snr_db, 10.0);
        assert!(s[1].spec.events.is_empty());
        assert!(s[1].spec.noise.snr_db.is_infinite());
        assert_eq!(s[4].name, "g_0002");
    }

    fn parse_scene_file_default(text: &str) -> Result<Vec<SceneEntry>> {
        parse_scene_file(text, DEFAULT_SAMPLE_RATE)
    }

    #[test]
    fn malformed_files() {
        assert!(parse_scene_file_default("[[scene]]\nname = 'x'\n").is_err());
        assert!(parse_scene_file_default("bogus = 1\n").is_err());
        let dup = "[[scene]]\nname='a'\nduration_s=1.0\nseed=1\n[[scene]]\nname='a'\nduration_s=1.0\nseed=2\n";
        assert!(parse_scene_file_default(dup).is_err());
        let bad_name = "[[scene]]\nname='../x'\nduration_s=1.0\nseed=1\n";
        assert!(parse_scene_file_default(bad_name).is_err());
    }
}

//! Run configuration: built-in defaults, overridden in turn by a TOML
//! key-value file, by `IVDOA_<KEY>` environment variables and by
//! command-line flags.
//!
//! ```toml
//! sample_rate = 48000
//! fft_size = 8192
//! hop_ms = 20.0
//! mel_bands = 96
//! sad_alpha = 0.5
//! epochs = 100
//! lr = 0.001
//! lr_flat_epochs = 50
//! lr_end_epoch = 100
//! lr_final_factor = 0.01
//! conv_channels = [16, 32, 32]
//! gru_hidden = 32
//! seed = 0
//! augment = true
//! mask = true
//! smooth = true
//! channel_order = "wxyz"
//! jobs = 1
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::dsp::StftConfig;
use crate::error::{Error, Result};
use crate::io::ChannelOrder;
use crate::neural::{AdamConfig, ArchConfig, LrSchedule, TrainConfig};

pub const ENV_PREFIX: &str = "IVDOA_";
/// File name of the effective configuration written next to outputs.
pub const ECHO_FILE: &str = "effective_config.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub sample_rate: u32,
    pub fft_size: usize,
    pub hop_ms: f64,
    pub mel_bands: usize,
    pub sad_alpha: f64,
    pub epochs: usize,
    pub lr: f64,
    pub lr_flat_epochs: usize,
    pub lr_end_epoch: usize,
    pub lr_final_factor: f64,
    pub conv_channels: Vec<usize>,
    pub gru_hidden: usize,
    pub seed: u64,
    pub augment: bool,
    pub mask: bool,
    /// Activity thresholding plus per-event median smoothing of estimates.
    pub smooth: bool,
    pub channel_order: String,
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let arch = ArchConfig::default();
        let sched = LrSchedule::default();
        Self {
            sample_rate: 48_000,
            fft_size: 8192,
            hop_ms: 20.0,
            mel_bands: arch.bands,
            sad_alpha: 0.5,
            epochs: 100,
            lr: sched.base,
            lr_flat_epochs: sched.flat_epochs,
            lr_end_epoch: sched.end_epoch,
            lr_final_factor: sched.final_factor,
            conv_channels: arch.conv_channels,
            gru_hidden: arch.gru_hidden,
            seed: 0,
            augment: true,
            mask: true,
            smooth: true,
            channel_order: "wxyz".into(),
            jobs: 1,
        }
    }
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

/// Parses `raw` into the TOML type of `like`.
fn coerce(key: &str, raw: &str, like: &Value) -> Result<Value> {
    let raw = raw.trim();
    let fail = || cfg_err(format!("cannot parse '{raw}' for '{key}'"));
    Ok(match like {
        Value::Integer(_) => Value::Integer(raw.parse().map_err(|_| fail())?),
        Value::Float(_) => Value::Float(raw.parse().map_err(|_| fail())?),
        Value::Boolean(_) => Value::Boolean(match raw.to_ascii_lowercase().as_str() {
            "on" | "true" | "1" | "yes" => true,
            "off" | "false" | "0" | "no" => false,
            _ => return Err(fail()),
        }),
        Value::Array(_) => Value::Array(
            raw.trim_matches(|c| c == '[' || c == ']')
                .split(',')
                .map(|p| p.trim().parse::<i64>().map(Value::Integer).map_err(|_| fail()))
                .collect::<Result<_>>()?,
        ),
        _ => Value::String(raw.to_string()),
    })
}

/// Accumulates override layers on top of the defaults.
#[derive(Debug, Clone)]
pub struct ConfigBuilder {
    table: Table,
}

impl Default for ConfigBuilder {
    fn default() -> Self {
        Self::new()
    }
}

impl ConfigBuilder {
    pub fn new() -> Self {
        let table = Table::try_from(RunConfig::default()).expect("defaults serialise");
        Self { table }
    }

    fn check_key(&self, key: &str) -> Result<&Value> {
        self.table.get(key).ok_or_else(|| cfg_err(format!("unknown configuration key '{key}'")))
    }

    pub fn file_text(mut self, text: &str) -> Result<Self> {
        let t: Table = text.parse().map_err(|e| cfg_err(format!("config file: {e}")))?;
        for (k, v) in t {
            let like = self.check_key(&k)?;
            let v = match (like, v) {
                (Value::Float(_), Value::Integer(i)) => Value::Float(i as f64),
                (_, v) => v,
            };
            self.table.insert(k, v);
        }
        Ok(self)
    }

    pub fn file(self, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| cfg_err(format!("{}: {e}", path.display())))?;
        self.file_text(&text)
    }

    /// Applies `IVDOA_<KEY>` variables from `vars` (normally `std::env::vars()`).
    pub fn env(mut self, vars: impl IntoIterator<Item = (String, String)>) -> Result<Self> {
        let mut pending: Vec<(String, String)> =
            vars.into_iter().filter_map(|(k, v)| k.strip_prefix(ENV_PREFIX).map(|s| (s.to_ascii_lowercase(), v))).collect();
        pending.sort();
        for (k, v) in pending {
            self = self.set(&k, &v)?;
        }
        Ok(self)
    }

    pub fn set(mut self, key: &str, raw: &str) -> Result<Self> {
        let v = coerce(key, raw, self.check_key(key)?)?;
        self.table.insert(key.to_string(), v);
        Ok(self)
    }

    pub fn build(self) -> Result<RunConfig> {
        let cfg: RunConfig = self.table.try_into().map_err(|e: toml::de::Error| cfg_err(format!("configuration: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("sample_rate", self.sample_rate as f64),
            ("fft_size", self.fft_size as f64),
            ("hop_ms", self.hop_ms),
            ("mel_bands", self.mel_bands as f64),
            ("lr", self.lr),
            ("lr_final_factor", self.lr_final_factor),
            ("gru_hidden", self.gru_hidden as f64),
            ("jobs", self.jobs as f64),
        ];
        for (k, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(cfg_err(format!("'{k}' must be positive, got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.sad_alpha) {
            return Err(cfg_err(format!("'sad_alpha' must be in [0, 1), got {}", self.sad_alpha)));
        }
        self.stft().validate()?;
        self.arch().validate()?;
        self.channel_order()?;
        Ok(())
    }

    pub fn stft(&self) -> StftConfig {
        StftConfig::from_hop_ms(self.fft_size, self.hop_ms, self.sample_rate)
    }

    pub fn arch(&self) -> ArchConfig {
        ArchConfig { bands: self.mel_bands, conv_channels: self.conv_channels.clone(), gru_hidden: self.gru_hidden }
    }

    pub fn schedule(&self) -> LrSchedule {
        LrSchedule { base: self.lr, flat_epochs: self.lr_flat_epochs, end_epoch: self.lr_end_epoch, final_factor: self.lr_final_factor }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig { epochs: self.epochs, seed: self.seed, schedule: self.schedule(), adam: AdamConfig::default(), augment: self.augment }
    }

    pub fn channel_order(&self) -> Result<ChannelOrder> {
        self.channel_order.parse()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Writes the effective configuration into `dir`.
    pub fn echo_to(&self, dir: &Path) -> Result<()> {
        std::fs::write(dir.join(ECHO_FILE), self.to_toml())?;
        Ok(())
    }
}

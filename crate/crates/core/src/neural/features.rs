use crate::dsp::{logmel, mel_filterbank, MelFilterbank, StftConfig};
use crate::error::{invalid_arg, Result};
use crate::foa::{intensity_field, normalize_iv, Domain, FoaSignal, IntensityField, SpectrogramSet, DEFAULT_NORM_EPS};

use super::tensor::Tensor3;

pub const LOGMEL_CHANNELS: usize = 4;
pub const IV_CHANNELS: usize = 3;
pub const INPUT_CHANNELS: usize = LOGMEL_CHANNELS + IV_CHANNELS;

/// Channel layout of a [`FeatureTensor`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureLayout {
    /// Channels 0-3: log-mel power of W, X, Y, Z. Channels 4-6: x, y, z of
    /// the mel-compressed intensity vector, normalised to unit length.
    LogmelWxyzNormIvXyz,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    pub tensor: Tensor3,
    pub layout: FeatureLayout,
}

impl FeatureTensor {
    pub fn new(tensor: Tensor3) -> Result<Self> {
        if tensor.channels != INPUT_CHANNELS {
            return Err(invalid_arg(format!("feature tensor needs {INPUT_CHANNELS} channels, got {}", tensor.channels)));
        }
        if tensor.data.iter().any(|v| !v.is_finite()) {
            return Err(invalid_arg("feature tensor has non-finite entries"));
        }
        Ok(Self { tensor, layout: FeatureLayout::LogmelWxyzNormIvXyz })
    }

    pub fn bands(&self) -> usize {
        self.tensor.bands
    }

    pub fn frames(&self) -> usize {
        self.tensor.frames
    }

    /// The normalised mel intensity field carried in channels 4-6.
    pub fn normalized_iv(&self) -> IntensityField {
        let (bands, frames) = (self.tensor.bands, self.tensor.frames);
        let mut f = IntensityField::zeros(bands, frames, Domain::Mel);
        let plane = bands * frames;
        for i in 0..plane {
            f.iv[i] = [
                self.tensor.data[LOGMEL_CHANNELS * plane + i],
                self.tensor.data[(LOGMEL_CHANNELS + 1) * plane + i],
                self.tensor.data[(LOGMEL_CHANNELS + 2) * plane + i],
            ];
        }
        f
    }
}

/// Everything the neural path derives from one recording.
#[derive(Debug, Clone)]
pub struct ExtractedFeatures {
    pub features: FeatureTensor,
    /// Mel-compressed (not normalised) intensity field.
    pub iv_mel: IntensityField,
    pub spectra: SpectrogramSet,
}

#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    pub stft: StftConfig,
    pub filterbank: MelFilterbank,
}

impl FeatureExtractor {
    pub fn new(stft: StftConfig, bands: usize) -> Result<Self> {
        stft.validate()?;
        let filterbank = mel_filterbank(bands, stft.fft_size, stft.sample_rate, 0.0, stft.sample_rate as f64 / 2.0)?;
        Ok(Self { stft, filterbank })
    }

    pub fn bands(&self) -> usize {
        self.filterbank.num_bands()
    }

    pub fn extract(&self, foa: &FoaSignal) -> Result<ExtractedFeatures> {
        let spectra = SpectrogramSet::from_foa(foa, &self.stft)?;
        self.from_spectra(spectra)
    }

    pub fn from_spectra(&self, spectra: SpectrogramSet) -> Result<ExtractedFeatures> {
        let lm: Vec<_> = spectra.channels().iter().map(|c| logmel(&c.power(), &self.filterbank)).collect::<Result<_>>()?;
        let iv_mel = intensity_field(&spectra).to_mel(&self.filterbank)?;
        let iv_norm = normalize_iv(&iv_mel, DEFAULT_NORM_EPS);
        let (bands, frames) = (self.bands(), spectra.num_frames());
        let tensor = Tensor3::from_fn(INPUT_CHANNELS, bands, frames, |c, b, t| {
            if c < LOGMEL_CHANNELS {
                lm[c].get(b, t)
            } else {
                iv_norm.get(b, t)[c - LOGMEL_CHANNELS]
            }
        });
        Ok(ExtractedFeatures { features: FeatureTensor::new(tensor)?, iv_mel, spectra })
    }
}

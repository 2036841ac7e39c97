use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::error::{Error, Result};
use crate::foa::FoaSignal;

/// Channel order of a 4-channel file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChannelOrder {
    /// W, X, Y, Z (B-format order used throughout the crate).
    #[default]
    Wxyz,
    /// ACN: W, Y, Z, X.
    Acn,
}

impl std::str::FromStr for ChannelOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "wxyz" => Ok(Self::Wxyz),
            "acn" => Ok(Self::Acn),
            other => Err(Error::InvalidArgument(format!("unknown channel order '{other}' (wxyz|acn)"))),
        }
    }
}

impl std::fmt::Display for ChannelOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Wxyz => "wxyz",
            Self::Acn => "acn",
        })
    }
}

/// Reads a 4-channel integer or float WAV into W, X, Y, Z.
pub fn read_foa(path: &Path, order: ChannelOrder) -> Result<FoaSignal> {
    let reader = WavReader::open(path).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
    let spec = reader.spec();
    if spec.channels != 4 {
        return Err(Error::InvalidInput(format!("{}: expected 4 channels, found {}", path.display(), spec.channels)));
    }
    let interleaved: Vec<f64> = match spec.sample_format {
        SampleFormat::Float => reader.into_samples::<f32>().map(|s| s.map(f64::from)).collect::<std::result::Result<_, _>>()?,
        SampleFormat::Int => {
            let scale = 1.0 / (1u64 << (spec.bits_per_sample - 1)) as f64;
            reader.into_samples::<i32>().map(|s| s.map(|v| v as f64 * scale)).collect::<std::result::Result<_, _>>()?
        }
    };
    let n = interleaved.len() / 4;
    let mut ch: [Vec<f64>; 4] = std::array::from_fn(|_| Vec::with_capacity(n));
    for frame in interleaved.chunks_exact(4) {
        for (c, &v) in frame.iter().enumerate() {
            ch[c].push(v);
        }
    }
    if ch.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("{}: non-finite samples", path.display())));
    }
    let channels = match order {
        ChannelOrder::Wxyz => ch,
        ChannelOrder::Acn => {
            let [w, y, z, x] = ch;
            [w, x, y, z]
        }
    };
    Ok(FoaSignal { channels, sample_rate: spec.sample_rate })
}

/// Writes W, X, Y, Z as 32-bit float samples.
pub fn write_foa(path: &Path, foa: &FoaSignal) -> Result<()> {
    let spec = WavSpec { channels: 4, sample_rate: foa.sample_rate, bits_per_sample: 32, sample_format: SampleFormat::Float };
    let mut w = WavWriter::create(path, spec)?;
    for i in 0..foa.len() {
        for c in &foa.channels {
            w.write_sample(c[i] as f32)?;
        }
    }
    w.finalize()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_acn() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.wav");
        let foa = FoaSignal { channels: [vec![0.5, -0.25], vec![0.125, 0.0], vec![-1.0, 0.75], vec![0.0625, 0.5]], sample_rate: 48000 };
        write_foa(&p, &foa).unwrap();
        assert_eq!(read_foa(&p, ChannelOrder::Wxyz).unwrap(), foa);
        let acn = read_foa(&p, ChannelOrder::Acn).unwrap();
        // file channels 1..3 are read as Y, Z, X
        assert_eq!(acn.channels[1], foa.channels[3]);
        assert_eq!(acn.channels[2], foa.channels[1]);
        assert_eq!(acn.channels[3], foa.channels[2]);
    }

    #[test]
    fn rejects_wrong_channel_count_and_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("stereo.wav");
        let spec = WavSpec { channels: 2, sample_rate: 48000, bits_per_sample: 16, sample_format: SampleFormat::Int };
        let mut w = WavWriter::create(&p, spec).unwrap();
        w.write_sample(0i16).unwrap();
        w.write_sample(0i16).unwrap();
        w.finalize().unwrap();
        assert!(matches!(read_foa(&p, ChannelOrder::Wxyz), Err(Error::InvalidInput(_))));
        let g = dir.path().join("g.wav");
        std::fs::write(&g, b"not a wav file").unwrap();
        assert!(matches!(read_foa(&g, ChannelOrder::Wxyz), Err(Error::InvalidInput(_))));
    }
}

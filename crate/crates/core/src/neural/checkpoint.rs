//! Binary checkpoint format (little-endian):
//!
//! ```text
//! magic     8 bytes  "IVDOANET"
//! version   u32      1
//! desc_len  u32, then the architecture descriptor (UTF-8)
//! count     u32      number of tensors
//! per tensor:
//!   name_len u32, name (UTF-8)
//!   ndim     u32, dims as u64 each
//!   values   f64 x prod(dims)
//! ```
//!
//! Tensors are the trainable parameters followed by batch-norm running
//! statistics. Loading checks every name and shape against the architecture
//! in the descriptor.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::network::{ArchConfig, Network};

pub const MAGIC: &[u8; 8] = b"IVDOANET";
pub const VERSION: u32 = 1;

fn bad(msg: impl Into<String>) -> Error {
    Error::InvalidCheckpoint(msg.into())
}

/// Parameter names in the order of `Network::params()`.
pub fn param_names(net: &Network) -> Vec<String> {
    let mut names = Vec::new();
    let trunk = |prefix: &str, blocks: usize, names: &mut Vec<String>| {
        for i in 0..blocks {
            for s in ["conv.weight", "conv.bias", "bn.gamma", "bn.beta"] {
                names.push(format!("{prefix}.block{i}.{s}"));
            }
        }
        for dir in ["fwd", "bwd"] {
            for s in ["w_ih", "w_hh", "b_ih", "b_hh"] {
                names.push(format!("{prefix}.gru.{dir}.{s}"));
            }
        }
    };
    trunk("riv", net.riv.blocks.len(), &mut names);
    names.extend(["riv_head.weight".to_string(), "riv_head.bias".to_string()]);
    trunk("mask", net.mask.blocks.len(), &mut names);
    names.extend(["mask_head.weight", "mask_head.bias", "mask_skip.weight", "sad_head.weight", "sad_head.bias"].map(String::from));
    names
}

fn stat_names(net: &Network) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for (p, n) in [("riv", net.riv.blocks.len()), ("mask", net.mask.blocks.len())] {
        out.extend((0..n).map(|i| (format!("{p}.block{i}.bn.running_mean"), format!("{p}.block{i}.bn.running_var"))));
    }
    out
}

pub fn write_checkpoint(net: &Network, mut w: impl Write) -> Result<()> {
    let mut tensors: Vec<(String, Vec<usize>, &[f64])> = Vec::new();
    for (name, p) in param_names(net).into_iter().zip(net.params()) {
        tensors.push((name, p.shape.clone(), &p.value));
    }
    for ((mn, vn), bn) in stat_names(net).into_iter().zip(net.batch_norms()) {
        tensors.push((mn, vec![bn.channels], &bn.running_mean));
        tensors.push((vn, vec![bn.channels], &bn.running_var));
    }
    let desc = net.arch.descriptor();
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(desc.len() as u32).to_le_bytes());
    buf.extend_from_slice(desc.as_bytes());
    buf.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, dims, values) in tensors {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&(dims.len() as u32).to_le_bytes());
        for d in dims {
            buf.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(bad(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| bad("string is not UTF-8"))
    }
}

pub fn read_checkpoint(mut r: impl Read) -> Result<Network> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    let mut c = Cursor { buf: &buf, pos: 0 };
    if c.take(8).map_err(|_| bad("file too short for header"))? != MAGIC {
        return Err(bad("bad magic"));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let desc = c.string()?;
    let arch = ArchConfig::parse_descriptor(&desc).map_err(|e| bad(format!("descriptor '{desc}': {e}")))?;
    let mut net = Network::new(arch, 0).map_err(|e| bad(e.to_string()))?;

    let count = c.u32()? as usize;
    let mut found: HashMap<String, (Vec<usize>, Vec<f64>)> = HashMap::with_capacity(count);
    for _ in 0..count {
        let name = c.string()?;
        let ndim = c.u32()? as usize;
        if ndim > 8 {
            return Err(bad(format!("tensor '{name}' has {ndim} dims")));
        }
        let dims = (0..ndim).map(|_| c.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let n = dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or_else(|| bad("tensor size overflows"))?;
        let bytes = c.take(n.checked_mul(8).ok_or_else(|| bad("tensor size overflows"))?)?;
        let values = bytes.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes"))).collect();
        if found.insert(name.clone(), (dims, values)).is_some() {
            return Err(bad(format!("duplicate tensor '{name}'")));
        }
    }
    if c.pos != buf.len() {
        return Err(bad(format!("{} trailing bytes", buf.len() - c.pos)));
    }

    let mut take = |name: &str, shape: &[usize]| -> Result<Vec<f64>> {
        let (dims, values) = found.remove(name).ok_or_else(|| bad(format!("missing tensor '{name}'")))?;
        if dims != shape {
            return Err(bad(format!("tensor '{name}' has shape {dims:?}, expected {shape:?}")));
        }
        Ok(values)
    };
    let names = param_names(&net);
    let stats = stat_names(&net);
    for (name, p) in names.iter().zip(net.params_mut()) {
        p.value = take(name, &p.shape.clone())?;
    }
    for ((mn, vn), bn) in stats.iter().zip(net.batch_norms_mut()) {
        bn.running_mean = take(mn, &[bn.channels])?;
        bn.running_var = take(vn, &[bn.channels])?;
    }
    if let Some(extra) = found.keys().next() {
        return Err(bad(format!("unexpected tensor '{extra}'")));
    }
    Ok(net)
}

pub fn save_checkpoint(net: &Network, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(f);
    write_checkpoint(net, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Network> {
    read_checkpoint(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Network {
        let mut net = Network::new(ArchConfig { bands: 8, conv_channels: vec![2, 3], gru_hidden: 4 }, 5).unwrap();
        net.riv_head.weight.value[3] = 0.25;
        net.batch_norms_mut()[1].running_var[0] = 2.5;
        net
    }

    #[test]
    fn round_trip_is_exact() {
        let net = tiny();
        let mut buf = Vec::new();
        write_checkpoint(&net, &mut buf).unwrap();
        assert_eq!(&buf[..8], MAGIC);
        let back = read_checkpoint(&buf[..]).unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let net = tiny();
        let mut buf = Vec::new();
        write_checkpoint(&net, &mut buf).unwrap();
        let mut bad_magic = buf.clone();
        bad_magic[0] = b'X';
        assert!(matches!(read_checkpoint(&bad_magic[..]), Err(Error::InvalidCheckpoint(_))));
        assert!(matches!(read_checkpoint(&buf[..buf.len() - 3]), Err(Error::InvalidCheckpoint(_))));
        let mut extra = buf.clone();
        extra.push(0);
        assert!(matches!(read_checkpoint(&extra[..]), Err(Error::InvalidCheckpoint(_))));
        assert!(matches!(read_checkpoint(&b"IVDO"[..]), Err(Error::InvalidCheckpoint(_))));
    }
}

//! Two CRNN trunks wired as in the refinement pipeline:
//!
//! ```text
//! features [logmel W,X,Y,Z | IV_norm x,y,z]
//!   -> RIV trunk -> riv head            => riv_hat (3 x bands x frames)
//! refined = normalize(IV_norm - riv_hat)
//! [logmel W,X,Y,Z | refined x,y,z]
//!   -> MASK trunk -> mask head (+ log-mel skip), sigmoid => mask (bands x frames)
//!                 -> sad head,  sigmoid => activity probability per frame
//! ```
//!
//! The skip adds a per-channel weighted sum of the log-mel channels,
//! standardised over the whole recording, to every mask logit. It gives the
//! mask direct band resolution, which the pooled GRU path lacks.
//!
//! A trunk is a stack of conv blocks (3x3 conv, batch norm, ELU, max-pool by
//! two over bands) followed by one bidirectional GRU. Pooling never touches
//! the frame axis, so every output keeps the input frame count.
//!
//! The three heads and the skip start at zero, so a fresh network predicts
//! no reverberation, a flat 0.5 mask and 0.5 activity.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::features::{FeatureTensor, INPUT_CHANNELS, IV_CHANNELS, LOGMEL_CHANNELS};
use super::gru::{BiGru, BiGruCache};
use super::layers::{
    elu_backward, elu_forward, maxpool_bands_backward, maxpool_bands_forward, sigmoid, BatchNorm, BatchNormCache, Conv2d, Dense, Mode, Param,
};
use super::tensor::Tensor3;
use crate::dsp::RealMatrix;
use crate::error::{invalid_arg, Error, Result};
use crate::foa::{Domain, IntensityField, MaskField, Vec3, DEFAULT_NORM_EPS};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchConfig {
    pub bands: usize,
    pub conv_channels: Vec<usize>,
    pub gru_hidden: usize,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self { bands: 96, conv_channels: vec![16, 32, 32], gru_hidden: 32 }
    }
}

impl ArchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.conv_channels.is_empty() || self.conv_channels.contains(&0) || self.gru_hidden == 0 {
            return Err(invalid_arg("architecture needs nonzero conv channels and GRU width"));
        }
        if self.pooled_bands() == 0 {
            return Err(invalid_arg(format!("{} bands cannot be pooled {} times", self.bands, self.conv_channels.len())));
        }
        Ok(())
    }

    pub fn pooled_bands(&self) -> usize {
        self.conv_channels.iter().fold(self.bands, |b, _| b / 2)
    }

    pub fn gru_inputs(&self) -> usize {
        self.conv_channels.last().copied().unwrap_or(0) * self.pooled_bands()
    }

    /// Text form stored in checkpoints, e.g. `bands=96;conv=16,32,32;gru=32`.
    pub fn descriptor(&self) -> String {
        let conv: Vec<String> = self.conv_channels.iter().map(|c| c.to_string()).collect();
        format!("bands={};conv={};gru={}", self.bands, conv.join(","), self.gru_hidden)
    }

    pub fn parse_descriptor(s: &str) -> Result<Self> {
        let mut bands = None;
        let mut conv = None;
        let mut gru = None;
        for part in s.split(';') {
            let (k, v) = part.split_once('=').ok_or_else(|| invalid_arg(format!("bad descriptor field '{part}'")))?;
            let num = |x: &str| x.trim().parse::<usize>().map_err(|_| invalid_arg(format!("bad number '{x}' in descriptor")));
            match k.trim() {
                "bands" => bands = Some(num(v)?),
                "gru" => gru = Some(num(v)?),
                "conv" => conv = Some(v.split(',').map(num).collect::<Result<Vec<_>>>()?),
                other => return Err(invalid_arg(format!("unknown descriptor key '{other}'"))),
            }
        }
        let arch = ArchConfig {
            bands: bands.ok_or_else(|| invalid_arg("descriptor lacks bands"))?,
            conv_channels: conv.ok_or_else(|| invalid_arg("descriptor lacks conv"))?,
            gru_hidden: gru.ok_or_else(|| invalid_arg("descriptor lacks gru"))?,
        };
        arch.validate()?;
        Ok(arch)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvBlock {
    pub conv: Conv2d,
    pub bn: BatchNorm,
}

#[derive(Debug, Clone)]
struct BlockCache {
    input: Tensor3,
    bn: BatchNormCache,
    act: Tensor3,
    pool_arg: Vec<u8>,
}

/// Conv blocks followed by a bidirectional GRU.
#[derive(Debug, Clone, PartialEq)]
pub struct Crnn {
    pub blocks: Vec<ConvBlock>,
    pub gru: BiGru,
}

#[derive(Debug, Clone)]
pub struct CrnnCache {
    blocks: Vec<BlockCache>,
    gru_input: Vec<f64>,
    gru: BiGruCache,
    frames: usize,
}

impl Crnn {
    fn new(in_ch: usize, arch: &ArchConfig, rng: &mut ChaCha8Rng) -> Self {
        let mut blocks = Vec::new();
        let mut c = in_ch;
        for &oc in &arch.conv_channels {
            blocks.push(ConvBlock { conv: Conv2d::new(c, oc, rng), bn: BatchNorm::new(oc) });
            c = oc;
        }
        Self { blocks, gru: BiGru::new(arch.gru_inputs(), arch.gru_hidden, rng) }
    }

    pub fn params(&self) -> Vec<&Param> {
        let mut p = Vec::new();
        for b in &self.blocks {
            p.extend(b.conv.params());
            p.extend(b.bn.params());
        }
        p.extend(self.gru.params());
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = Vec::new();
        for b in &mut self.blocks {
            p.extend(b.conv.params_mut());
            p.extend(b.bn.params_mut());
        }
        p.extend(self.gru.params_mut());
        p
    }

    /// Returns the GRU output `[2 * hidden][frames]`.
    pub fn forward(&self, x: &Tensor3, mode: Mode) -> (Vec<f64>, Option<CrnnCache>) {
        let frames = x.frames;
        let mut cur = x.clone();
        let mut caches = Vec::with_capacity(self.blocks.len());
        for blk in &self.blocks {
            let c = blk.conv.forward(&cur);
            let (n, bn_cache) = blk.bn.forward(&c, mode);
            let act = elu_forward(&n);
            let (pooled, pool_arg) = maxpool_bands_forward(&act);
            if let Some(bn) = bn_cache {
                caches.push(BlockCache { input: std::mem::replace(&mut cur, pooled), bn, act, pool_arg });
            } else {
                cur = pooled;
            }
        }
        let gru_input = cur.data;
        let (seq, gru_cache) = self.gru.forward(&gru_input, frames);
        let cache = (mode == Mode::Train).then(|| CrnnCache { blocks: caches, gru_input, gru: gru_cache, frames });
        (seq, cache)
    }

    fn backward(&self, cache: &CrnnCache, dseq: &[f64], grads: &mut [Vec<f64>], need_input_grad: bool) -> Option<Tensor3> {
        let per_block = 4;
        let gru_off = per_block * self.blocks.len();
        let dflat = self.gru.backward(&cache.gru_input, cache.frames, &cache.gru, dseq, &mut grads[gru_off..]);
        let last = self.blocks.last().expect("at least one block");
        let last_cache = cache.blocks.last().expect("block caches");
        let mut d = Tensor3 { channels: last.conv.out_ch, bands: last_cache.act.bands / 2, frames: cache.frames, data: dflat };
        let mut dx = None;
        for (i, (blk, bc)) in self.blocks.iter().zip(&cache.blocks).enumerate().rev() {
            let dact = maxpool_bands_backward(&bc.pool_arg, bc.act.bands, &d);
            let dn = elu_backward(&bc.act, &dact);
            let g = &mut grads[i * per_block..(i + 1) * per_block];
            let (gconv, gbn) = g.split_at_mut(2);
            let dc = blk.bn.backward(&bc.bn, &dn, gbn);
            let want = i > 0 || need_input_grad;
            let din = blk.conv.backward(&bc.input, &dc, gconv, want);
            match din {
                Some(t) if i > 0 => d = t,
                other => dx = other,
            }
        }
        dx
    }

    fn absorb(&mut self, cache: &CrnnCache) {
        for (blk, bc) in self.blocks.iter_mut().zip(&cache.blocks) {
            blk.bn.absorb(&bc.bn);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub arch: ArchConfig,
    pub riv: Crnn,
    pub riv_head: Dense,
    pub mask: Crnn,
    pub mask_head: Dense,
    /// One weight per log-mel channel.
    pub mask_skip: Param,
    pub sad_head: Dense,
}

/// Network outputs on mel bands.
#[derive(Debug, Clone, PartialEq)]
pub struct NetOutput {
    pub riv_hat: IntensityField,
    /// `normalize(IV_norm - riv_hat)`, the refined directions fed to the mask trunk.
    pub refined: IntensityField,
    pub mask: MaskField,
    pub sad: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ForwardCache {
    x_riv: Tensor3,
    riv: CrnnCache,
    riv_seq: Vec<f64>,
    diff: Vec<Vec3>,
    mask: CrnnCache,
    mask_seq: Vec<f64>,
    skip_in: Tensor3,
}

/// Loss gradients with respect to the network outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputGrads {
    /// Per (band, frame), w.r.t. `NetOutput::refined`.
    pub refined: Vec<Vec3>,
    /// W.r.t. mask values.
    pub mask: Vec<f64>,
    /// W.r.t. activity probabilities.
    pub sad: Vec<f64>,
    /// Optional direct term w.r.t. `riv_hat`.
    pub riv_hat: Option<Vec<Vec3>>,
}

impl OutputGrads {
    pub fn zeros(bands: usize, frames: usize) -> Self {
        Self { refined: vec![[0.0; 3]; bands * frames], mask: vec![0.0; bands * frames], sad: vec![0.0; frames], riv_hat: None }
    }
}

/// Gradients in the order of `Network::params()`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    pub tensors: Vec<Vec<f64>>,
}

impl Grads {
    pub fn zeros_for(net: &Network) -> Self {
        Self { tensors: net.params().iter().map(|p| vec![0.0; p.len()]).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.tensors.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Normalises `v` and returns `(unit, norm)`.
#[inline]
fn normalize_with_norm(v: Vec3) -> (Vec3, f64) {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if n == 0.0 {
        return ([0.0; 3], 0.0);
    }
    let s = 1.0 / (n + DEFAULT_NORM_EPS);
    ([v[0] * s, v[1] * s, v[2] * s], n)
}

/// Backward of `v / (|v| + eps)`; zero at the origin.
#[inline]
pub(crate) fn normalize_backward(v: Vec3, g: Vec3) -> Vec3 {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if n == 0.0 {
        return [0.0; 3];
    }
    let a = 1.0 / (n + DEFAULT_NORM_EPS);
    let vg = v[0] * g[0] + v[1] * g[1] + v[2] * g[2];
    let k = vg / (n * (n + DEFAULT_NORM_EPS) * (n + DEFAULT_NORM_EPS));
    [a * g[0] - k * v[0], a * g[1] - k * v[1], a * g[2] - k * v[2]]
}

/// Zero mean, unit variance per channel over bands and frames; a constant
/// channel maps to zeros.
fn standardize_channels(x: &Tensor3) -> Tensor3 {
    let plane = x.bands * x.frames;
    let mut out = x.clone();
    for c in 0..x.channels {
        let ch = &mut out.data[c * plane..(c + 1) * plane];
        let mean = ch.iter().sum::<f64>() / plane as f64;
        let var = ch.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / plane as f64;
        let inv = if var > 1e-12 { 1.0 / var.sqrt() } else { 0.0 };
        ch.iter_mut().for_each(|v| *v = (*v - mean) * inv);
    }
    out
}

impl Network {
    pub fn new(arch: ArchConfig, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let riv = Crnn::new(INPUT_CHANNELS, &arch, &mut rng);
        let mask = Crnn::new(INPUT_CHANNELS, &arch, &mut rng);
        let seq = 2 * arch.gru_hidden;
        Ok(Self {
            riv_head: Dense::zeroed(seq, IV_CHANNELS * arch.bands),
            mask_head: Dense::zeroed(seq, arch.bands),
            mask_skip: Param::zeros(&[LOGMEL_CHANNELS]),
            sad_head: Dense::zeroed(seq, 1),
            riv,
            mask,
            arch,
        })
    }

    pub fn params(&self) -> Vec<&Param> {
        let mut p = self.riv.params();
        p.extend(self.riv_head.params());
        p.extend(self.mask.params());
        p.extend(self.mask_head.params());
        p.push(&self.mask_skip);
        p.extend(self.sad_head.params());
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.riv.params_mut();
        p.extend(self.riv_head.params_mut());
        p.extend(self.mask.params_mut());
        p.extend(self.mask_head.params_mut());
        p.push(&mut self.mask_skip);
        p.extend(self.sad_head.params_mut());
        p
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Batch-norm layers in a fixed order (RIV trunk first).
    pub fn batch_norms(&self) -> Vec<&BatchNorm> {
        self.riv.blocks.iter().chain(&self.mask.blocks).map(|b| &b.bn).collect()
    }

    pub fn batch_norms_mut(&mut self) -> Vec<&mut BatchNorm> {
        self.riv.blocks.iter_mut().chain(self.mask.blocks.iter_mut()).map(|b| &mut b.bn).collect()
    }

    fn check_input(&self, x: &FeatureTensor) -> Result<()> {
        let t = &x.tensor;
        if t.channels != INPUT_CHANNELS || t.bands != self.arch.bands || t.frames == 0 {
            return Err(invalid_arg(format!(
                "features are {}x{}x{}, network expects {}x{}xT",
                t.channels, t.bands, t.frames, INPUT_CHANNELS, self.arch.bands
            )));
        }
        Ok(())
    }

    /// Runs both trunks. In [`Mode::Train`] the returned cache feeds
    /// [`Network::backward`]; in [`Mode::Infer`] it is `None`.
    pub fn forward(&self, x: &FeatureTensor, mode: Mode) -> Result<(NetOutput, Option<ForwardCache>)> {
        self.check_input(x)?;
        let (bands, frames) = (self.arch.bands, x.tensor.frames);
        let plane = bands * frames;

        let (riv_seq, riv_cache) = self.riv.forward(&x.tensor, mode);
        let riv_flat = self.riv_head.forward(&riv_seq, frames);
        let mut riv_hat = IntensityField::zeros(bands, frames, Domain::Mel);
        let mut diff = vec![[0.0; 3]; plane];
        let mut refined = IntensityField::zeros(bands, frames, Domain::Mel);
        let iv_in = x.tensor.slice_channels(LOGMEL_CHANNELS, INPUT_CHANNELS);
        for i in 0..plane {
            let r = [riv_flat[i], riv_flat[plane + i], riv_flat[2 * plane + i]];
            let d = [iv_in.data[i] - r[0], iv_in.data[plane + i] - r[1], iv_in.data[2 * plane + i] - r[2]];
            riv_hat.iv[i] = r;
            diff[i] = d;
            refined.iv[i] = normalize_with_norm(d).0;
        }

        let logmel = x.tensor.slice_channels(0, LOGMEL_CHANNELS);
        let refined_t = Tensor3::from_fn(IV_CHANNELS, bands, frames, |k, b, t| refined.iv[b * frames + t][k]);
        let x_mask = Tensor3::concat_channels(&[&logmel, &refined_t]);
        let (mask_seq, mask_cache) = self.mask.forward(&x_mask, mode);
        let mut mask_logits = self.mask_head.forward(&mask_seq, frames);
        let skip_in = standardize_channels(&logmel);
        for (c, &w) in self.mask_skip.value.iter().enumerate() {
            if w != 0.0 {
                mask_logits.iter_mut().zip(&skip_in.data[c * plane..(c + 1) * plane]).for_each(|(l, &z)| *l += w * z);
            }
        }
        let sad_logits = self.sad_head.forward(&mask_seq, frames);
        let mask = MaskField { m: RealMatrix { rows: bands, cols: frames, data: mask_logits.iter().map(|&v| sigmoid(v)).collect() }, domain: Domain::Mel };
        let sad = sad_logits.iter().map(|&v| sigmoid(v)).collect();

        let out = NetOutput { riv_hat, refined, mask, sad };
        let cache = match (riv_cache, mask_cache) {
            (Some(riv), Some(mask)) => Some(ForwardCache { x_riv: x.tensor.clone(), riv, riv_seq, diff, mask, mask_seq, skip_in }),
            _ => None,
        };
        Ok((out, cache))
    }

    /// Reverse-mode gradients of a scalar loss given its derivatives with
    /// respect to the outputs of a training-mode forward pass.
    pub fn backward(&self, cache: Option<&ForwardCache>, out: &NetOutput, og: &OutputGrads) -> Result<Grads> {
        let cache = cache.ok_or_else(|| Error::InvalidState("backward called without a training-mode forward cache".into()))?;
        let (bands, frames) = (self.arch.bands, cache.x_riv.frames);
        let plane = bands * frames;
        let mut grads = Grads::zeros_for(self);
        let n_riv = self.riv.params().len();
        let (g_riv, rest) = grads.tensors.split_at_mut(n_riv);
        let (g_riv_head, rest) = rest.split_at_mut(2);
        let n_mask = self.mask.params().len();
        let (g_mask, rest) = rest.split_at_mut(n_mask);
        let (g_mask_head, rest) = rest.split_at_mut(2);
        let (g_skip, g_sad_head) = rest.split_at_mut(1);

        // Mask and activity heads (sigmoid outputs).
        let d_mask_logit: Vec<f64> = og.mask.iter().zip(&out.mask.m.data).map(|(&g, &m)| g * m * (1.0 - m)).collect();
        let d_sad_logit: Vec<f64> = og.sad.iter().zip(&out.sad).map(|(&g, &a)| g * a * (1.0 - a)).collect();
        for (c, g) in g_skip[0].iter_mut().enumerate() {
            *g = d_mask_logit.iter().zip(&cache.skip_in.data[c * plane..(c + 1) * plane]).map(|(d, z)| d * z).sum();
        }
        let mut dseq = self.mask_head.backward(&cache.mask_seq, &d_mask_logit, frames, g_mask_head);
        let dseq_sad = self.sad_head.backward(&cache.mask_seq, &d_sad_logit, frames, g_sad_head);
        dseq.iter_mut().zip(&dseq_sad).for_each(|(a, b)| *a += b);

        let dx_mask = self.mask.backward(&cache.mask, &dseq, g_mask, true).expect("input gradient requested");

        // Refined directions feed both the aggregation and the mask trunk.
        let mut d_riv_flat = vec![0.0; IV_CHANNELS * plane];
        for i in 0..plane {
            let b = i / frames;
            let t = i % frames;
            let g = [
                og.refined[i][0] + dx_mask.get(LOGMEL_CHANNELS, b, t),
                og.refined[i][1] + dx_mask.get(LOGMEL_CHANNELS + 1, b, t),
                og.refined[i][2] + dx_mask.get(LOGMEL_CHANNELS + 2, b, t),
            ];
            let dd = normalize_backward(cache.diff[i], g);
            let extra = og.riv_hat.as_ref().map_or([0.0; 3], |r| r[i]);
            for k in 0..3 {
                d_riv_flat[k * plane + i] = -dd[k] + extra[k];
            }
        }
        let dseq_riv = self.riv_head.backward(&cache.riv_seq, &d_riv_flat, frames, g_riv_head);
        self.riv.backward(&cache.riv, &dseq_riv, g_riv, false);
        Ok(grads)
    }

    /// Updates batch-norm running statistics from a training pass.
    pub fn absorb_batch_stats(&mut self, cache: &ForwardCache) {
        self.riv.absorb(&cache.riv);
        self.mask.absorb(&cache.mask);
    }
}

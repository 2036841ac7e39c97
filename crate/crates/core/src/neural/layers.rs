//! Layer primitives with explicit forward caches and hand-written backward
//! passes. Every backward *accumulates* into the gradient buffers it is
//! given, so callers zero them once per step.

use rand::Rng;
use rand_distr::StandardNormal;

use super::tensor::Tensor3;

/// A trainable tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub shape: Vec<usize>,
    pub value: Vec<f64>,
}

impl Param {
    pub fn zeros(shape: &[usize]) -> Self {
        Self { shape: shape.to_vec(), value: vec![0.0; shape.iter().product()] }
    }

    pub fn filled(shape: &[usize], v: f64) -> Self {
        Self { shape: shape.to_vec(), value: vec![v; shape.iter().product()] }
    }

    /// Zero-mean Gaussian entries with standard deviation `std`.
    pub fn gaussian(shape: &[usize], std: f64, rng: &mut impl Rng) -> Self {
        let n = shape.iter().product();
        Self { shape: shape.to_vec(), value: (0..n).map(|_| std * rng.sample::<f64, _>(StandardNormal)).collect() }
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub(crate) fn axpy(dst: &mut [f64], a: f64, src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += a * s;
    }
}

/// Dot product with four independent accumulators so the compiler can
/// vectorise it; summation order is fixed, so results are reproducible.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let chunks = n / 4;
    for i in 0..chunks {
        let k = 4 * i;
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
    }
    let mut tail = 0.0;
    for k in 4 * chunks..n {
        tail += a[k] * b[k];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// 3x3 convolution over (band, frame) with zero "same" padding.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub in_ch: usize,
    pub out_ch: usize,
    /// `[out][in][3][3]`
    pub weight: Param,
    pub bias: Param,
}

impl Conv2d {
    pub fn new(in_ch: usize, out_ch: usize, rng: &mut impl Rng) -> Self {
        let std = (2.0 / (9 * in_ch) as f64).sqrt();
        Self { in_ch, out_ch, weight: Param::gaussian(&[out_ch, in_ch, 3, 3], std, rng), bias: Param::zeros(&[out_ch]) }
    }

    pub fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }

    /// Valid destination range in `t` for a kernel tap `kt` and the source offset.
    #[inline]
    fn t_span(kt: usize, w: usize) -> (usize, usize) {
        let lo = 1usize.saturating_sub(kt);
        let hi = (w + 1).saturating_sub(kt).min(w);
        (lo, hi)
    }

    pub fn forward(&self, x: &Tensor3) -> Tensor3 {
        assert_eq!(x.channels, self.in_ch, "conv input channels");
        let (h, w) = (x.bands, x.frames);
        let mut out = Tensor3::zeros(self.out_ch, h, w);
        for oc in 0..self.out_ch {
            let plane = out.plane_mut(oc);
            plane.iter_mut().for_each(|v| *v = self.bias.value[oc]);
            for ic in 0..self.in_ch {
                let kern = &self.weight.value[(oc * self.in_ch + ic) * 9..(oc * self.in_ch + ic + 1) * 9];
                for b in 0..h {
                    let dst = &mut plane[b * w..(b + 1) * w];
                    for kb in 0..3 {
                        let sb = b + kb;
                        if sb == 0 || sb > h {
                            continue;
                        }
                        let src = x.row(ic, sb - 1);
                        for kt in 0..3 {
                            let (lo, hi) = Self::t_span(kt, w);
                            if lo >= hi {
                                continue;
                            }
                            axpy(&mut dst[lo..hi], kern[kb * 3 + kt], &src[lo + kt - 1..hi + kt - 1]);
                        }
                    }
                }
            }
        }
        out
    }

    /// `grads = [d_weight, d_bias]`. Returns the input gradient when requested.
    pub fn backward(&self, x: &Tensor3, dout: &Tensor3, grads: &mut [Vec<f64>], need_input_grad: bool) -> Option<Tensor3> {
        let (h, w) = (x.bands, x.frames);
        let mut dx = need_input_grad.then(|| Tensor3::zeros(self.in_ch, h, w));
        let (gw, rest) = grads.split_at_mut(1);
        let gw = &mut gw[0];
        let gb = &mut rest[0];
        for oc in 0..self.out_ch {
            let dplane = dout.plane(oc);
            gb[oc] += dplane.iter().sum::<f64>();
            for ic in 0..self.in_ch {
                let base = (oc * self.in_ch + ic) * 9;
                for b in 0..h {
                    let drow = &dplane[b * w..(b + 1) * w];
                    for kb in 0..3 {
                        let sb = b + kb;
                        if sb == 0 || sb > h {
                            continue;
                        }
                        let src = x.row(ic, sb - 1);
                        for kt in 0..3 {
                            let (lo, hi) = Self::t_span(kt, w);
                            if lo >= hi {
                                continue;
                            }
                            gw[base + kb * 3 + kt] += dot(&drow[lo..hi], &src[lo + kt - 1..hi + kt - 1]);
                        }
                    }
                }
                if let Some(dx) = dx.as_mut() {
                    let kern = &self.weight.value[base..base + 9];
                    for b in 0..h {
                        let drow = &dplane[b * w..(b + 1) * w];
                        for kb in 0..3 {
                            let sb = b + kb;
                            if sb == 0 || sb > h {
                                continue;
                            }
                            let dst = dx.row_mut(ic, sb - 1);
                            for kt in 0..3 {
                                let (lo, hi) = Self::t_span(kt, w);
                                if lo >= hi {
                                    continue;
                                }
                                axpy(&mut dst[lo + kt - 1..hi + kt - 1], kern[kb * 3 + kt], &drow[lo..hi]);
                            }
                        }
                    }
                }
            }
        }
        dx
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics in batch norm; caches kept for backward.
    Train,
    /// Running statistics in batch norm.
    Infer,
}

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.9;

/// Per-channel batch normalisation over (band, frame).
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub channels: usize,
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct BatchNormCache {
    pub xhat: Tensor3,
    pub inv_std: Vec<f64>,
    pub batch_mean: Vec<f64>,
    pub batch_var: Vec<f64>,
}

impl BatchNorm {
    pub fn new(channels: usize) -> Self {
        Self {
            channels,
            gamma: Param::filled(&[channels], 1.0),
            beta: Param::zeros(&[channels]),
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
        }
    }

    pub fn params(&self) -> Vec<&Param> {
        vec![&self.gamma, &self.beta]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.gamma, &mut self.beta]
    }

    pub fn forward(&self, x: &Tensor3, mode: Mode) -> (Tensor3, Option<BatchNormCache>) {
        let n = (x.bands * x.frames) as f64;
        let mut out = x.clone();
        match mode {
            Mode::Infer => {
                for c in 0..self.channels {
                    let inv = 1.0 / (self.running_var[c] + BN_EPS).sqrt();
                    let (g, b, m) = (self.gamma.value[c], self.beta.value[c], self.running_mean[c]);
                    out.plane_mut(c).iter_mut().for_each(|v| *v = g * (*v - m) * inv + b);
                }
                (out, None)
            }
            Mode::Train => {
                let mut xhat = x.clone();
                let mut inv_std = Vec::with_capacity(self.channels);
                let mut batch_mean = Vec::with_capacity(self.channels);
                let mut batch_var = Vec::with_capacity(self.channels);
                for c in 0..self.channels {
                    let p = x.plane(c);
                    let mean = p.iter().sum::<f64>() / n;
                    let var = p.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                    let inv = 1.0 / (var + BN_EPS).sqrt();
                    let (g, b) = (self.gamma.value[c], self.beta.value[c]);
                    for (xh, o) in xhat.plane_mut(c).iter_mut().zip(out.plane_mut(c).iter_mut()) {
                        *xh = (*xh - mean) * inv;
                        *o = g * *xh + b;
                    }
                    inv_std.push(inv);
                    batch_mean.push(mean);
                    batch_var.push(var);
                }
                (out, Some(BatchNormCache { xhat, inv_std, batch_mean, batch_var }))
            }
        }
    }

    /// `grads = [d_gamma, d_beta]`.
    pub fn backward(&self, cache: &BatchNormCache, dout: &Tensor3, grads: &mut [Vec<f64>]) -> Tensor3 {
        let n = (dout.bands * dout.frames) as f64;
        let mut dx = Tensor3::zeros(dout.channels, dout.bands, dout.frames);
        for c in 0..self.channels {
            let dplane = dout.plane(c);
            let xh = cache.xhat.plane(c);
            let sum_d: f64 = dplane.iter().sum();
            let sum_dx: f64 = dot(dplane, xh);
            grads[0][c] += sum_dx;
            grads[1][c] += sum_d;
            let g = self.gamma.value[c];
            let k = g * cache.inv_std[c] / n;
            for ((o, &d), &x) in dx.plane_mut(c).iter_mut().zip(dplane).zip(xh) {
                *o = k * (n * d - sum_d - x * sum_dx);
            }
        }
        dx
    }

    /// Folds a training batch's statistics into the running averages.
    pub fn absorb(&mut self, cache: &BatchNormCache) {
        for c in 0..self.channels {
            self.running_mean[c] = BN_MOMENTUM * self.running_mean[c] + (1.0 - BN_MOMENTUM) * cache.batch_mean[c];
            self.running_var[c] = BN_MOMENTUM * self.running_var[c] + (1.0 - BN_MOMENTUM) * cache.batch_var[c];
        }
    }
}

/// Exponential linear unit.
pub fn elu_forward(x: &Tensor3) -> Tensor3 {
    let mut y = x.clone();
    y.data.iter_mut().for_each(|v| {
        if *v <= 0.0 {
            *v = v.exp_m1();
        }
    });
    y
}

/// Uses the cached *output*: derivative is 1 for positive inputs, `y + 1` otherwise.
pub fn elu_backward(y: &Tensor3, dout: &Tensor3) -> Tensor3 {
    let mut dx = dout.clone();
    for (d, &v) in dx.data.iter_mut().zip(&y.data) {
        if v <= 0.0 {
            *d *= v + 1.0;
        }
    }
    dx
}

/// Max-pooling by 2 along the band axis only; frames are untouched.
/// A trailing odd band is dropped.
pub fn maxpool_bands_forward(x: &Tensor3) -> (Tensor3, Vec<u8>) {
    let hb = x.bands / 2;
    let mut out = Tensor3::zeros(x.channels, hb, x.frames);
    let mut arg = vec![0u8; x.channels * hb * x.frames];
    for c in 0..x.channels {
        for b in 0..hb {
            let (r0, r1) = (x.row(c, 2 * b), x.row(c, 2 * b + 1));
            let base = (c * hb + b) * x.frames;
            let dst = out.row_mut(c, b);
            for t in 0..x.frames {
                if r1[t] > r0[t] {
                    dst[t] = r1[t];
                    arg[base + t] = 1;
                } else {
                    dst[t] = r0[t];
                }
            }
        }
    }
    (out, arg)
}

pub fn maxpool_bands_backward(arg: &[u8], in_bands: usize, dout: &Tensor3) -> Tensor3 {
    let mut dx = Tensor3::zeros(dout.channels, in_bands, dout.frames);
    for c in 0..dout.channels {
        for b in 0..dout.bands {
            let base = (c * dout.bands + b) * dout.frames;
            for t in 0..dout.frames {
                let src = 2 * b + arg[base + t] as usize;
                dx.row_mut(c, src)[t] += dout.row(c, b)[t];
            }
        }
    }
    dx
}

/// Frame-wise affine map on a `[features][frames]` sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// `[out][in]`
    pub weight: Param,
    pub bias: Param,
}

impl Dense {
    pub fn new(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let std = (1.0 / inputs as f64).sqrt();
        Self { inputs, outputs, weight: Param::gaussian(&[outputs, inputs], std, rng), bias: Param::zeros(&[outputs]) }
    }

    pub fn zeroed(inputs: usize, outputs: usize) -> Self {
        Self { inputs, outputs, weight: Param::zeros(&[outputs, inputs]), bias: Param::zeros(&[outputs]) }
    }

    pub fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }

    /// `x` is `[inputs][frames]`, row-major.
    pub fn forward(&self, x: &[f64], frames: usize) -> Vec<f64> {
        assert_eq!(x.len(), self.inputs * frames, "dense input shape");
        let mut out = vec![0.0; self.outputs * frames];
        for o in 0..self.outputs {
            let dst = &mut out[o * frames..(o + 1) * frames];
            dst.iter_mut().for_each(|v| *v = self.bias.value[o]);
            let wrow = &self.weight.value[o * self.inputs..(o + 1) * self.inputs];
            for (i, &wv) in wrow.iter().enumerate() {
                if wv != 0.0 {
                    axpy(dst, wv, &x[i * frames..(i + 1) * frames]);
                }
            }
        }
        out
    }

    /// `grads = [d_weight, d_bias]`; returns the input gradient.
    pub fn backward(&self, x: &[f64], dout: &[f64], frames: usize, grads: &mut [Vec<f64>]) -> Vec<f64> {
        let mut dx = vec![0.0; self.inputs * frames];
        for o in 0..self.outputs {
            let drow = &dout[o * frames..(o + 1) * frames];
            grads[1][o] += drow.iter().sum::<f64>();
            for i in 0..self.inputs {
                let xi = &x[i * frames..(i + 1) * frames];
                grads[0][o * self.inputs + i] += dot(drow, xi);
                let wv = self.weight.value[o * self.inputs + i];
                if wv != 0.0 {
                    axpy(&mut dx[i * frames..(i + 1) * frames], wv, drow);
                }
            }
        }
        dx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_gradient_is_outer_product_for_squared_error() {
        // One output, squared error 0.5 * (y - target)^2 on a single frame.
        let mut d = Dense::zeroed(3, 1);
        d.weight.value = vec![0.2, -0.4, 0.1];
        d.bias.value = vec![0.05];
        let x = [1.0, 2.0, -1.5];
        let y = d.forward(&x, 1);
        let delta = y[0] - 0.7;
        let mut g = vec![vec![0.0; 3], vec![0.0; 1]];
        d.backward(&x, &[delta], 1, &mut g);
        for i in 0..3 {
            assert!((g[0][i] - x[i] * delta).abs() < 1e-15);
        }
        assert!((g[1][0] - delta).abs() < 1e-15);
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
        assert!((sigmoid(2.0) + sigmoid(-2.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn maxpool_keeps_frames() {
        let x = Tensor3::from_fn(2, 5, 7, |c, b, t| (c * 100 + b * 10 + t) as f64);
        let (y, _) = maxpool_bands_forward(&x);
        assert_eq!((y.channels, y.bands, y.frames), (2, 2, 7));
        assert_eq!(y.get(1, 1, 3), x.get(1, 3, 3));
    }

    #[test]
    fn conv_identity_kernel() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mut conv = Conv2d::new(1, 1, &mut rng);
        conv.weight.value = vec![0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        let x = Tensor3::from_fn(1, 4, 5, |_, b, t| (b * 5 + t) as f64);
        assert_eq!(conv.forward(&x), x);
        // Shift right by one frame: output[t] = x[t - 1].
        conv.weight.value = vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let y = conv.forward(&x);
        assert_eq!(y.get(0, 2, 0), 0.0);
        assert_eq!(y.get(0, 2, 3), x.get(0, 2, 2));
    }

    use rand::SeedableRng;
}

//! Bidirectional GRU over a `[features][frames]` sequence.
//!
//! Gate order in the stacked weights is reset, update, candidate:
//!
//! ```text
//! r = sigmoid(W_ir x + b_ir + W_hr h + b_hr)
//! z = sigmoid(W_iz x + b_iz + W_hz h + b_hz)
//! n = tanh(W_in x + b_in + r * (W_hn h + b_hn))
//! h' = (1 - z) * n + z * h
//! ```
//!
//! The initial state is zero in both directions. Output rows `0..hidden` are
//! the forward direction and `hidden..2*hidden` the backward direction.

use rand::Rng;

use super::layers::{axpy, dot, sigmoid, Param};

#[derive(Debug, Clone, PartialEq)]
pub struct GruDirection {
    /// `[3 * hidden][inputs]`
    pub w_ih: Param,
    /// `[3 * hidden][hidden]`
    pub w_hh: Param,
    pub b_ih: Param,
    pub b_hh: Param,
}

#[derive(Debug, Clone)]
pub struct GruDirCache {
    /// Hidden states `[frames + 1][hidden]` in processing order; entry 0 is the zero state.
    h: Vec<f64>,
    r: Vec<f64>,
    z: Vec<f64>,
    n: Vec<f64>,
    /// `W_hn h + b_hn` per step.
    hn: Vec<f64>,
}

impl GruDirection {
    fn new(inputs: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let std = (1.0 / hidden as f64).sqrt();
        Self {
            w_ih: Param::gaussian(&[3 * hidden, inputs], (1.0 / inputs as f64).sqrt(), rng),
            w_hh: Param::gaussian(&[3 * hidden, hidden], std, rng),
            b_ih: Param::zeros(&[3 * hidden]),
            b_hh: Param::zeros(&[3 * hidden]),
        }
    }

    fn params(&self) -> Vec<&Param> {
        vec![&self.w_ih, &self.w_hh, &self.b_ih, &self.b_hh]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.w_ih, &mut self.w_hh, &mut self.b_ih, &mut self.b_hh]
    }

    fn hidden(&self) -> usize {
        self.b_hh.len() / 3
    }

    fn inputs(&self) -> usize {
        self.w_ih.shape[1]
    }

    /// Input projections for every frame, `[3 * hidden][frames]`.
    fn project_inputs(&self, x: &[f64], frames: usize) -> Vec<f64> {
        let (g3, d) = (3 * self.hidden(), self.inputs());
        let mut gi = vec![0.0; g3 * frames];
        for g in 0..g3 {
            let dst = &mut gi[g * frames..(g + 1) * frames];
            dst.iter_mut().for_each(|v| *v = self.b_ih.value[g]);
            for i in 0..d {
                let w = self.w_ih.value[g * d + i];
                axpy(dst, w, &x[i * frames..(i + 1) * frames]);
            }
        }
        gi
    }

    /// Runs the recurrence over `order` and writes hidden states into `out`
    /// (`[hidden][frames]`, indexed by real frame).
    fn forward(&self, x: &[f64], frames: usize, reverse: bool, out: &mut [f64]) -> GruDirCache {
        let hs = self.hidden();
        let gi = self.project_inputs(x, frames);
        let mut cache = GruDirCache {
            h: vec![0.0; (frames + 1) * hs],
            r: vec![0.0; frames * hs],
            z: vec![0.0; frames * hs],
            n: vec![0.0; frames * hs],
            hn: vec![0.0; frames * hs],
        };
        let mut gh = vec![0.0; 3 * hs];
        for step in 0..frames {
            let t = if reverse { frames - 1 - step } else { step };
            let (prev, rest) = cache.h.split_at_mut((step + 1) * hs);
            let hprev = &prev[step * hs..];
            for (g, v) in gh.iter_mut().enumerate() {
                *v = self.b_hh.value[g] + dot(&self.w_hh.value[g * hs..(g + 1) * hs], hprev);
            }
            let hnew = &mut rest[..hs];
            for j in 0..hs {
                let r = sigmoid(gi[j * frames + t] + gh[j]);
                let z = sigmoid(gi[(hs + j) * frames + t] + gh[hs + j]);
                let n = (gi[(2 * hs + j) * frames + t] + r * gh[2 * hs + j]).tanh();
                let h = (1.0 - z) * n + z * hprev[j];
                cache.r[step * hs + j] = r;
                cache.z[step * hs + j] = z;
                cache.n[step * hs + j] = n;
                cache.hn[step * hs + j] = gh[2 * hs + j];
                hnew[j] = h;
                out[j * frames + t] = h;
            }
        }
        cache
    }

    /// `dout` is `[hidden][frames]`; accumulates into `grads` (4 tensors) and `dx`.
    fn backward(&self, x: &[f64], frames: usize, reverse: bool, cache: &GruDirCache, dout: &[f64], grads: &mut [Vec<f64>], dx: &mut [f64]) {
        let hs = self.hidden();
        let d = self.inputs();
        let mut dgi = vec![0.0; 3 * hs * frames];
        let mut dh_next = vec![0.0; hs];
        let mut dgh = vec![0.0; 3 * hs];
        for step in (0..frames).rev() {
            let t = if reverse { frames - 1 - step } else { step };
            let hprev = &cache.h[step * hs..(step + 1) * hs];
            let mut dh_prev = vec![0.0; hs];
            for j in 0..hs {
                let k = step * hs + j;
                let (r, z, n, hn) = (cache.r[k], cache.z[k], cache.n[k], cache.hn[k]);
                let dh = dout[j * frames + t] + dh_next[j];
                let dn = dh * (1.0 - z);
                let dz = dh * (hprev[j] - n);
                dh_prev[j] += dh * z;
                let dan = dn * (1.0 - n * n);
                let dar = dan * hn * r * (1.0 - r);
                let daz = dz * z * (1.0 - z);
                dgi[j * frames + t] = dar;
                dgi[(hs + j) * frames + t] = daz;
                dgi[(2 * hs + j) * frames + t] = dan;
                dgh[j] = dar;
                dgh[hs + j] = daz;
                dgh[2 * hs + j] = dan * r;
            }
            for g in 0..3 * hs {
                let dg = dgh[g];
                grads[3][g] += dg;
                if dg == 0.0 {
                    continue;
                }
                let wrow = &self.w_hh.value[g * hs..(g + 1) * hs];
                axpy(&mut grads[1][g * hs..(g + 1) * hs], dg, hprev);
                axpy(&mut dh_prev, dg, wrow);
            }
            dh_next = dh_prev;
        }
        for g in 0..3 * hs {
            let drow = &dgi[g * frames..(g + 1) * frames];
            grads[2][g] += drow.iter().sum::<f64>();
            for i in 0..d {
                let xi = &x[i * frames..(i + 1) * frames];
                grads[0][g * d + i] += dot(drow, xi);
                let w = self.w_ih.value[g * d + i];
                axpy(&mut dx[i * frames..(i + 1) * frames], w, drow);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiGru {
    pub inputs: usize,
    pub hidden: usize,
    pub fwd: GruDirection,
    pub bwd: GruDirection,
}

#[derive(Debug, Clone)]
pub struct BiGruCache {
    fwd: GruDirCache,
    bwd: GruDirCache,
}

impl BiGru {
    pub fn new(inputs: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        Self { inputs, hidden, fwd: GruDirection::new(inputs, hidden, rng), bwd: GruDirection::new(inputs, hidden, rng) }
    }

    pub fn params(&self) -> Vec<&Param> {
        let mut p = self.fwd.params();
        p.extend(self.bwd.params());
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.fwd.params_mut();
        p.extend(self.bwd.params_mut());
        p
    }

    /// `x` is `[inputs][frames]`; returns `[2 * hidden][frames]`.
    pub fn forward(&self, x: &[f64], frames: usize) -> (Vec<f64>, BiGruCache) {
        assert_eq!(x.len(), self.inputs * frames, "gru input shape");
        let mut out = vec![0.0; 2 * self.hidden * frames];
        let (of, ob) = out.split_at_mut(self.hidden * frames);
        let fwd = self.fwd.forward(x, frames, false, of);
        let bwd = self.bwd.forward(x, frames, true, ob);
        (out, BiGruCache { fwd, bwd })
    }

    /// `grads` holds the 8 tensors of `params()`; returns the input gradient.
    pub fn backward(&self, x: &[f64], frames: usize, cache: &BiGruCache, dout: &[f64], grads: &mut [Vec<f64>]) -> Vec<f64> {
        let mut dx = vec![0.0; self.inputs * frames];
        let (gf, gb) = grads.split_at_mut(4);
        let (df, db) = dout.split_at(self.hidden * frames);
        self.fwd.backward(x, frames, false, &cache.fwd, df, gf, &mut dx);
        self.bwd.backward(x, frames, true, &cache.bwd, db, gb, &mut dx);
        dx
    }
}

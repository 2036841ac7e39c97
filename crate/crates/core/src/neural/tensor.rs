/// Dense `[channels][bands][frames]` array, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    pub channels: usize,
    pub bands: usize,
    pub frames: usize,
    pub data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(channels: usize, bands: usize, frames: usize) -> Self {
        Self { channels, bands, frames, data: vec![0.0; channels * bands * frames] }
    }

    pub fn from_fn(channels: usize, bands: usize, frames: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(channels * bands * frames);
        for c in 0..channels {
            for b in 0..bands {
                for t in 0..frames {
                    data.push(f(c, b, t));
                }
            }
        }
        Self { channels, bands, frames, data }
    }

    #[inline]
    pub fn idx(&self, c: usize, b: usize, t: usize) -> usize {
        (c * self.bands + b) * self.frames + t
    }

    #[inline]
    pub fn get(&self, c: usize, b: usize, t: usize) -> f64 {
        self.data[self.idx(c, b, t)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, b: usize, t: usize, v: f64) {
        let i = self.idx(c, b, t);
        self.data[i] = v;
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.bands * self.frames;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.bands * self.frames;
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn row(&self, c: usize, b: usize) -> &[f64] {
        let i = self.idx(c, b, 0);
        &self.data[i..i + self.frames]
    }

    pub fn row_mut(&mut self, c: usize, b: usize) -> &mut [f64] {
        let i = self.idx(c, b, 0);
        let f = self.frames;
        &mut self.data[i..i + f]
    }

    /// Stacks channel blocks of equal (bands, frames).
    pub fn concat_channels(parts: &[&Tensor3]) -> Tensor3 {
        let (bands, frames) = (parts[0].bands, parts[0].frames);
        let mut data = Vec::with_capacity(parts.iter().map(|p| p.data.len()).sum());
        let mut channels = 0;
        for p in parts {
            assert!(p.bands == bands && p.frames == frames, "concat shape mismatch");
            data.extend_from_slice(&p.data);
            channels += p.channels;
        }
        Tensor3 { channels, bands, frames, data }
    }

    /// Channels `[start, end)` as a new tensor.
    pub fn slice_channels(&self, start: usize, end: usize) -> Tensor3 {
        let n = self.bands * self.frames;
        Tensor3 { channels: end - start, bands: self.bands, frames: self.frames, data: self.data[start * n..end * n].to_vec() }
    }
}

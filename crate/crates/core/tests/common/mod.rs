#![allow(dead_code)]

use ivdoa::foa::Direction;
use ivdoa::neural::features::INPUT_CHANNELS;
use ivdoa::neural::gru::BiGru;
use ivdoa::neural::layers::{elu_backward, elu_forward, maxpool_bands_backward, maxpool_bands_forward, BatchNorm, Conv2d, Dense, Mode};
use ivdoa::neural::{objective, ArchConfig, FeatureTensor, Network, Tensor3};
use ivdoa::tracks::{ActivityTrack, DoaTrack};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOL: f64 = 1e-4;
pub const FD_POINTS: usize = 10;

/// Worst relative error between analytic gradients and central differences
/// at `FD_POINTS` random coordinates whose gradient is not negligible.
///
/// `loss(i, delta)` evaluates the loss with coordinate `i` shifted by `delta`.
pub fn fd_worst(analytic: &[f64], rng: &mut ChaCha8Rng, mut loss: impl FnMut(usize, f64) -> f64) -> f64 {
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let mut tries = 0;
    while checked < FD_POINTS {
        tries += 1;
        assert!(tries < 2000, "could not find {FD_POINTS} non-degenerate coordinates");
        let i = rng.gen_range(0..analytic.len());
        let a = analytic[i];
        if a.abs() < 1e-6 {
            continue;
        }
        let n = (loss(i, FD_STEP) - loss(i, -FD_STEP)) / (2.0 * FD_STEP);
        worst = worst.max((a - n).abs() / a.abs().max(n.abs()));
        checked += 1;
    }
    worst
}

pub fn random_tensor(rng: &mut ChaCha8Rng, c: usize, b: usize, t: usize) -> Tensor3 {
    Tensor3::from_fn(c, b, t, |_, _, _| rng.gen_range(-1.0..1.0))
}

fn weighted(y: &[f64], r: &[f64]) -> f64 {
    y.iter().zip(r).map(|(a, b)| a * b).sum()
}

/// Per-layer checks; returns `(name, worst relative error)`.
pub fn layer_gradient_checks(seed: u64) -> Vec<(&'static str, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    // conv: weights, bias, input
    {
        let mut conv = Conv2d::new(2, 3, &mut rng);
        conv.bias.value.iter_mut().for_each(|v| *v = 0.1);
        let x = random_tensor(&mut rng, 2, 5, 4);
        let r: Vec<f64> = (0..3 * 5 * 4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let dout = Tensor3 { channels: 3, bands: 5, frames: 4, data: r.clone() };
        let mut g = vec![vec![0.0; conv.weight.len()], vec![0.0; 3]];
        let dx = conv.backward(&x, &dout, &mut g, true).unwrap();
        let w = fd_worst(&g[0], &mut rng, |i, d| {
            let mut c = conv.clone();
            c.weight.value[i] += d;
            weighted(&c.forward(&x).data, &r)
        });
        let b = fd_worst(&g[1], &mut rng, |i, d| {
            let mut c = conv.clone();
            c.bias.value[i] += d;
            weighted(&c.forward(&x).data, &r)
        });
        let xi = fd_worst(&dx.data, &mut rng, |i, d| {
            let mut x2 = x.clone();
            x2.data[i] += d;
            weighted(&conv.forward(&x2).data, &r)
        });
        out.push(("conv2d", w.max(b).max(xi)));
    }

    // batch norm in training mode
    {
        let mut bn = BatchNorm::new(3);
        bn.gamma.value = vec![0.7, 1.3, -0.4];
        bn.beta.value = vec![0.1, -0.2, 0.3];
        let x = random_tensor(&mut rng, 3, 4, 5);
        let r: Vec<f64> = (0..x.data.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let dout = Tensor3 { data: r.clone(), ..x.clone() };
        let (_, cache) = bn.forward(&x, Mode::Train);
        let mut g = vec![vec![0.0; 3], vec![0.0; 3]];
        let dx = bn.backward(cache.as_ref().unwrap(), &dout, &mut g);
        let loss = |bn: &BatchNorm, x: &Tensor3| weighted(&bn.forward(x, Mode::Train).0.data, &r);
        let gg = fd_worst(&g[0], &mut rng, |i, d| {
            let mut b = bn.clone();
            b.gamma.value[i] += d;
            loss(&b, &x)
        });
        let gb = fd_worst(&g[1], &mut rng, |i, d| {
            let mut b = bn.clone();
            b.beta.value[i] += d;
            loss(&b, &x)
        });
        let gx = fd_worst(&dx.data, &mut rng, |i, d| {
            let mut x2 = x.clone();
            x2.data[i] += d;
            loss(&bn, &x2)
        });
        out.push(("batchnorm", gg.max(gb).max(gx)));
    }

    // ELU away from the kink
    {
        let mut x = random_tensor(&mut rng, 2, 3, 4);
        x.data.iter_mut().for_each(|v| {
            if v.abs() < 0.05 {
                *v += 0.1
            }
        });
        let r: Vec<f64> = (0..x.data.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y = elu_forward(&x);
        let dx = elu_backward(&y, &Tensor3 { data: r.clone(), ..x.clone() });
        let e = fd_worst(&dx.data, &mut rng, |i, d| {
            let mut x2 = x.clone();
            x2.data[i] += d;
            weighted(&elu_forward(&x2).data, &r)
        });
        out.push(("elu", e));
    }

    // max-pool over bands
    {
        let x = random_tensor(&mut rng, 2, 6, 3);
        let (y, arg) = maxpool_bands_forward(&x);
        let r: Vec<f64> = (0..y.data.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let dx = maxpool_bands_backward(&arg, 6, &Tensor3 { data: r.clone(), ..y.clone() });
        let e = fd_worst(&dx.data, &mut rng, |i, d| {
            let mut x2 = x.clone();
            x2.data[i] += d;
            weighted(&maxpool_bands_forward(&x2).0.data, &r)
        });
        out.push(("maxpool", e));
    }

    // dense
    {
        let mut dense = Dense::new(4, 3, &mut rng);
        dense.bias.value = vec![0.2, -0.1, 0.05];
        let frames = 5;
        let x: Vec<f64> = (0..4 * frames).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r: Vec<f64> = (0..3 * frames).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut g = vec![vec![0.0; 12], vec![0.0; 3]];
        let dx = dense.backward(&x, &r, frames, &mut g);
        let w = fd_worst(&g[0], &mut rng, |i, d| {
            let mut l = dense.clone();
            l.weight.value[i] += d;
            weighted(&l.forward(&x, frames), &r)
        });
        let b = fd_worst(&g[1], &mut rng, |i, d| {
            let mut l = dense.clone();
            l.bias.value[i] += d;
            weighted(&l.forward(&x, frames), &r)
        });
        let xi = fd_worst(&dx, &mut rng, |i, d| {
            let mut x2 = x.clone();
            x2[i] += d;
            weighted(&dense.forward(&x2, frames), &r)
        });
        out.push(("dense", w.max(b).max(xi)));
    }

    // bidirectional GRU
    {
        let mut gru = BiGru::new(3, 4, &mut rng);
        for p in gru.params_mut() {
            if p.shape.len() == 1 {
                p.value.iter_mut().for_each(|v| *v = 0.1);
            }
        }
        let frames = 6;
        let x: Vec<f64> = (0..3 * frames).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r: Vec<f64> = (0..8 * frames).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, cache) = gru.forward(&x, frames);
        let mut g: Vec<Vec<f64>> = gru.params().iter().map(|p| vec![0.0; p.len()]).collect();
        let dx = gru.backward(&x, frames, &cache, &r, &mut g);
        let mut worst: f64 = 0.0;
        for k in 0..8 {
            worst = worst.max(fd_worst(&g[k], &mut rng, |i, d| {
                let mut m = gru.clone();
                m.params_mut()[k].value[i] += d;
                weighted(&m.forward(&x, frames).0, &r)
            }));
        }
        worst = worst.max(fd_worst(&dx, &mut rng, |i, d| {
            let mut x2 = x.clone();
            x2[i] += d;
            weighted(&gru.forward(&x2, frames).0, &r)
        }));
        out.push(("bigru", worst));
    }
    out
}

/// Small network with every head randomised so that all paths carry gradient.
pub fn toy_network(seed: u64) -> Network {
    let mut net = Network::new(ArchConfig { bands: 8, conv_channels: vec![3, 4], gru_hidden: 4 }, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for head in [&mut net.riv_head, &mut net.mask_head, &mut net.sad_head] {
        head.weight.value.iter_mut().for_each(|v| *v = rng.gen_range(-0.3..0.3));
        head.bias.value.iter_mut().for_each(|v| *v = rng.gen_range(-0.1..0.1));
    }
    net.mask_skip.value.iter_mut().for_each(|v| *v = rng.gen_range(-0.5..0.5));
    for bn in net.batch_norms_mut() {
        bn.gamma.value.iter_mut().for_each(|v| *v = rng.gen_range(0.5..1.5));
    }
    net
}

/// Gradient of the full training loss with respect to every parameter tensor.
pub fn composed_gradient_check(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = toy_network(seed);
    let frames = 6;
    let x = FeatureTensor::new(random_tensor(&mut rng, INPUT_CHANNELS, 8, frames)).unwrap();
    let gt = DoaTrack::from_directions((0..frames).map(|_| Direction::wrapped(rng.gen_range(-3.0..3.0), rng.gen_range(-1.2..1.2))));
    let z = ActivityTrack::from_bools((0..frames).map(|t| t % 3 != 0));
    let loss = |n: &Network| {
        let (out, _) = n.forward(&x, Mode::Train).unwrap();
        objective(&out, &gt, &z).unwrap().0.total
    };
    let (out, cache) = net.forward(&x, Mode::Train).unwrap();
    let (_, og) = objective(&out, &gt, &z).unwrap();
    let grads = net.backward(cache.as_ref(), &out, &og).unwrap();
    let flat: Vec<(usize, usize)> = grads.tensors.iter().enumerate().flat_map(|(k, g)| (0..g.len()).map(move |i| (k, i))).collect();
    let analytic: Vec<f64> = flat.iter().map(|&(k, i)| grads.tensors[k][i]).collect();
    fd_worst(&analytic, &mut rng, |j, d| {
        let (k, i) = flat[j];
        let mut n = net.clone();
        n.params_mut()[k].value[i] += d;
        loss(&n)
    })
}

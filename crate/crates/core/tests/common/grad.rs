//! Central finite-difference checks of every backward pass, in f64.

use inkportrait_core::layers::{
    conv2d, conv2d_backward, nearest_upsample2x, nearest_upsample2x_backward, reflection_pad, reflection_pad_backward,
    relu, relu_backward, sigmoid, sigmoid_backward, sigmoid_backward_from_input, Conv2d, LayerSpec,
};
use inkportrait_core::maskops::SparsityMask;
use inkportrait_core::moments::{channel_moments, channel_moments_backward};
use inkportrait_core::net::{BackwardMode, Sequential};
use inkportrait_core::stylenet::{
    adain, compositional_sparsity_loss, content_loss, mse, self_consistency_loss, step_gradients, style_loss,
    style_loss_to_moments, Decoder, Encoder, LossWeights, SparseReduction, StepInputs, StyleNet,
};
use inkportrait_core::{Dims, Tensor4};

use super::Rng;

pub const TOLERANCE: f64 = 1e-4;
const H: f64 = 1e-6;

type T64 = Tensor4<f64>;

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub rel_err: f64,
}

impl Check {
    pub fn ok(&self) -> bool {
        self.rel_err < TOLERANCE
    }
}

pub fn random(d: Dims, rng: &mut Rng, lo: f64, hi: f64) -> T64 {
    Tensor4::from_fn(d, |_, _, _, _| rng.range(lo, hi))
}

/// Uniform values kept at least `gap` away from zero, so a relu kink is
/// never crossed by a perturbation.
fn away_from_zero(d: Dims, rng: &mut Rng, gap: f64) -> T64 {
    Tensor4::from_fn(d, |_, _, _, _| {
        let v = rng.range(gap, 1.0);
        if rng.unit() < 0.5 {
            -v
        } else {
            v
        }
    })
}

fn project(y: &T64, w: &T64) -> f64 {
    y.data().iter().zip(w.data()).map(|(a, b)| a * b).sum()
}

/// `‖a - n‖ / max(‖a‖, ‖n‖)`.
pub fn rel_err(a: &[f64], n: &[f64]) -> f64 {
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut a.iter().zip(n).map(|(x, y)| x - y));
    let scale = norm(&mut a.iter().copied()).max(norm(&mut n.iter().copied()));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// At most `max` evenly spread coordinates of `0..len`.
fn coords(len: usize, max: usize) -> Vec<usize> {
    if len <= max {
        return (0..len).collect();
    }
    (0..max).map(|i| i * len / max).collect()
}

/// Finite differences of `f` at `x` along the coordinates `idx`.
fn fd(f: impl Fn(&T64) -> f64, x: &T64, idx: &[usize]) -> Vec<f64> {
    let mut xp = x.clone();
    idx.iter()
        .map(|&i| {
            let v = x.data()[i];
            xp.data_mut()[i] = v + H;
            let fp = f(&xp);
            xp.data_mut()[i] = v - H;
            let fm = f(&xp);
            xp.data_mut()[i] = v;
            (fp - fm) / (2.0 * H)
        })
        .collect()
}

fn check(out: &mut Vec<Check>, name: &str, f: impl Fn(&T64) -> f64, x: &T64, analytic: &T64, max: usize) {
    let idx = coords(x.len(), max);
    let num = fd(f, x, &idx);
    let ana: Vec<f64> = idx.iter().map(|&i| analytic.data()[i]).collect();
    out.push(Check {
        name: name.to_string(),
        rel_err: rel_err(&ana, &num),
    });
}

const C: usize = 3;
const S: usize = 16;

fn instance() -> Dims {
    Dims::new(1, C, S, S)
}

fn conv_checks(out: &mut Vec<Check>, rng: &mut Rng, label: &str, stride: usize, pad: usize) {
    let x = random(instance(), rng, -1.0, 1.0);
    let conv = Conv2d::new(
        random(Dims::new(4, C, 3, 3), rng, -0.5, 0.5),
        random(Dims::new(1, 4, 1, 1), rng, -0.5, 0.5),
        stride,
        pad,
    )
    .unwrap();
    let y = conv2d(&x, &conv).unwrap();
    let w = random(y.dims(), rng, -1.0, 1.0);
    let g = conv2d_backward(&w, &x, &conv).unwrap();
    let with = |k: &T64, b: &T64| Conv2d::new(k.clone(), b.clone(), stride, pad).unwrap();
    check(
        out,
        &format!("conv2d {label} input"),
        |xi| project(&conv2d(xi, &conv).unwrap(), &w),
        &x,
        &g.input,
        1000,
    );
    check(
        out,
        &format!("conv2d {label} kernel"),
        |k| project(&conv2d(&x, &with(k, &conv.bias)).unwrap(), &w),
        &conv.kernel,
        &g.kernel,
        1000,
    );
    check(
        out,
        &format!("conv2d {label} bias"),
        |b| project(&conv2d(&x, &with(&conv.kernel, b)).unwrap(), &w),
        &conv.bias,
        &g.bias,
        1000,
    );
}

fn elementwise_checks(out: &mut Vec<Check>, rng: &mut Rng) {
    let x = away_from_zero(instance(), rng, 1e-3);
    let w = random(instance(), rng, -1.0, 1.0);
    check(
        out,
        "relu",
        |xi| project(&relu(xi), &w),
        &x,
        &relu_backward(&w, &x).unwrap(),
        1000,
    );

    let x = random(instance(), rng, -4.0, 4.0);
    let y = sigmoid(&x);
    check(
        out,
        "sigmoid (output form)",
        |xi| project(&sigmoid(xi), &w),
        &x,
        &sigmoid_backward(&w, &y).unwrap(),
        1000,
    );
    check(
        out,
        "sigmoid (input form)",
        |xi| project(&sigmoid(xi), &w),
        &x,
        &sigmoid_backward_from_input(&w, &x).unwrap(),
        1000,
    );

    let wu = random(Dims::new(1, C, 2 * S, 2 * S), rng, -1.0, 1.0);
    check(
        out,
        "nearest upsample",
        |xi| project(&nearest_upsample2x(xi), &wu),
        &x,
        &nearest_upsample2x_backward(&wu).unwrap(),
        1000,
    );

    let wp = random(Dims::new(1, C, S + 4, S + 4), rng, -1.0, 1.0);
    check(
        out,
        "reflection pad",
        |xi| project(&reflection_pad(xi, 2).unwrap(), &wp),
        &x,
        &reflection_pad_backward(&wp, 2).unwrap(),
        1000,
    );
}

fn moment_checks(out: &mut Vec<Check>, rng: &mut Rng) {
    let x = random(instance(), rng, -1.0, 1.0);
    let gm: Vec<f64> = (0..C).map(|_| rng.range(-1.0, 1.0)).collect();
    let gs: Vec<f64> = (0..C).map(|_| rng.range(-1.0, 1.0)).collect();
    let m = channel_moments(&x).unwrap();
    let g = channel_moments_backward(&x, &m, &gm, &gs).unwrap();
    let f = |xi: &T64| {
        let m = channel_moments(xi).unwrap();
        (0..C).map(|i| gm[i] * m.mean[i] + gs[i] * m.std[i]).sum()
    };
    check(out, "channel moments", f, &x, &g, 1000);
}

fn sequential_checks(out: &mut Vec<Check>, rng: &mut Rng) {
    let conv = |i: usize, o: usize, stride: usize, pad: usize, rng: &mut Rng| {
        LayerSpec::Conv2d(
            Conv2d::new(
                random(Dims::new(o, i, 3, 3), rng, -0.5, 0.5),
                random(Dims::new(1, o, 1, 1), rng, -0.2, 0.2),
                stride,
                pad,
            )
            .unwrap(),
        )
    };
    let layers = vec![
        LayerSpec::ReflectionPad(1),
        conv(C, 4, 1, 0, rng),
        LayerSpec::Relu,
        conv(4, 2, 2, 1, rng),
        LayerSpec::NearestUpsample2x,
    ];
    let net = Sequential::new(layers);
    let x = random(instance(), rng, -1.0, 1.0);
    let tr = net.forward_traced(&x).unwrap();
    let w_out = random(tr.output.dims(), rng, -1.0, 1.0);
    let w_tap = random(tr.output_of(2).unwrap().dims(), rng, -1.0, 1.0);
    let g = net
        .backward_with_taps(&tr, Some(&w_out), &[(2, &w_tap)], BackwardMode::ALL)
        .unwrap();
    let loss = |n: &Sequential<f64>, xi: &T64| {
        let t = n.forward_traced(xi).unwrap();
        project(&t.output, &w_out) + project(t.output_of(2).unwrap(), &w_tap)
    };
    check(
        out,
        "sequential with taps input",
        |xi| loss(&net, xi),
        &x,
        g.input.as_ref().unwrap(),
        1000,
    );
    for layer in [1, 3] {
        let LayerSpec::Conv2d(c) = &net.layers[layer] else {
            unreachable!()
        };
        let pg = g.params[layer].as_ref().unwrap();
        let with_kernel = |k: &T64| {
            let mut n = net.clone();
            if let LayerSpec::Conv2d(c) = &mut n.layers[layer] {
                c.kernel = k.clone();
            }
            loss(&n, &x)
        };
        check(
            out,
            &format!("sequential layer {layer} kernel"),
            with_kernel,
            &c.kernel,
            &pg.kernel,
            1000,
        );
    }
}

fn encoder_checks(out: &mut Vec<Check>, rng: &mut Rng) {
    let enc = Encoder::<f64>::standard(11);
    let x = random(Dims::new(1, 1, S, S), rng, 0.0, 1.0);
    let (tr, e) = enc.encode_traced(&x).unwrap();
    let ws: Vec<T64> = e.taps.iter().map(|t| random(t.dims(), rng, -1.0, 1.0)).collect();
    let g = enc
        .backward_input(&tr, &ws.iter().cloned().map(Some).collect::<Vec<_>>())
        .unwrap();
    let f = |xi: &T64| {
        let e = enc.encode(xi).unwrap();
        e.taps.iter().zip(&ws).map(|(t, w)| project(t, w)).sum()
    };
    check(out, "encoder input through all taps", f, &x, &g, 1000);
}

fn loss_checks(out: &mut Vec<Check>, rng: &mut Rng) {
    let a = random(instance(), rng, -1.0, 1.0);
    let b = random(instance(), rng, -1.0, 1.0);
    check(
        out,
        "mse",
        |ai| mse(ai, &b).unwrap().0,
        &a,
        &mse(&a, &b).unwrap().1,
        1000,
    );
    check(
        out,
        "content loss",
        |ai| content_loss(ai, &b).unwrap().0,
        &a,
        &content_loss(&a, &b).unwrap().1,
        1000,
    );

    let out_taps = vec![
        random(instance(), rng, -1.0, 1.0),
        random(Dims::new(1, 5, 8, 8), rng, 0.0, 2.0),
    ];
    let style_taps = vec![
        random(instance(), rng, -0.3, 1.5),
        random(Dims::new(1, 5, 4, 4), rng, -1.0, 0.5),
    ];
    let (_, g) = style_loss(&out_taps, &style_taps).unwrap();
    for k in 0..2 {
        let f = |t: &T64| {
            let mut taps = out_taps.clone();
            taps[k] = t.clone();
            style_loss(&taps, &style_taps).unwrap().0
        };
        check(out, &format!("style loss tap {k}"), f, &out_taps[k], &g[k], 1000);
    }
    // batch of two against single-sample style moments
    let batch = random(Dims::new(2, C, S, S), rng, -1.0, 1.0);
    let sm = vec![channel_moments(&style_taps[0]).unwrap()];
    let (_, g) = style_loss_to_moments(std::slice::from_ref(&batch), &sm).unwrap();
    check(
        out,
        "style loss broadcast moments",
        |t| style_loss_to_moments(std::slice::from_ref(t), &sm).unwrap().0,
        &batch,
        &g[0],
        1000,
    );

    let o = random(Dims::new(1, 1, S, S), rng, 0.0, 1.0);
    let bits: Vec<bool> = (0..S * S).map(|_| rng.unit() < 0.6).collect();
    let mask = SparsityMask::new(S, S, bits).unwrap();
    let (_, g) = compositional_sparsity_loss(&o, &[&mask]).unwrap();
    check(
        out,
        "sparsity loss",
        |oi| compositional_sparsity_loss(oi, &[&mask]).unwrap().0,
        &o,
        &g,
        1000,
    );
}

/// Decoder parameters as one flat vector per conv layer: `(layer, kernel?)`.
fn param_tensor(dec: &Decoder<f64>, layer: usize, kernel: bool) -> T64 {
    match &dec.net.layers[layer] {
        LayerSpec::Conv2d(c) if kernel => c.kernel.clone(),
        LayerSpec::Conv2d(c) => c.bias.clone(),
        _ => unreachable!("not a convolution"),
    }
}

fn with_param(net: &StyleNet<f64>, layer: usize, kernel: bool, v: &T64) -> StyleNet<f64> {
    let mut n = net.clone();
    if let LayerSpec::Conv2d(c) = &mut n.decoder.net.layers[layer] {
        if kernel {
            c.kernel = v.clone();
        } else {
            c.bias = v.clone();
        }
    }
    n
}

fn objective_checks(out: &mut Vec<Check>, rng: &mut Rng) {
    let mut net = StyleNet::<f64>::standard(5);
    // non-zero biases so their gradients are exercised away from the init
    for p in net.decoder.net.params_mut() {
        if p.dims().h == 1 {
            p.data_mut().iter_mut().for_each(|b| *b = rng.range(-0.05, 0.05));
        }
    }
    let photo = random(Dims::new(1, 1, S, S), rng, 0.0, 1.0);
    let style = Tensor4::from_fn(
        Dims::new(1, 1, S, S),
        |_, _, y, x| if (x + 2 * y) % 7 == 0 { 0.0 } else { 1.0 },
    );
    let fc = vec![net.encoder.encode(&photo).unwrap().features().clone()];
    let es = net.encoder.encode(&style).unwrap();
    let fs = es.features().clone();
    let moments: Vec<_> = es.taps.iter().map(|t| channel_moments(t).unwrap()).collect();
    let self_target = adain(&fs, &fs).unwrap();
    let bits: Vec<bool> = (0..S * S).map(|i| !(i / S + i % S).is_multiple_of(3)).collect();
    let mask = SparsityMask::new(S, S, bits).unwrap();
    let masks = [&mask];
    let inputs = StepInputs {
        content_features: &fc,
        style_image: &style,
        style_features: &fs,
        style_moments: &moments,
        self_target: &self_target,
        masks: &masks,
    };
    let conv_layers: Vec<usize> = net
        .decoder
        .net
        .layers
        .iter()
        .enumerate()
        .filter(|(_, l)| matches!(l, LayerSpec::Conv2d(_)))
        .map(|(i, _)| i)
        .collect();

    let (terms, _) = step_gradients(
        &net,
        &inputs,
        &LossWeights {
            content: 0.0,
            style: 0.0,
            consist: 1.0,
            sparse: 0.0,
        },
        SparseReduction::Sum,
    )
    .unwrap();
    let direct = self_consistency_loss(&style, &net).unwrap();
    out.push(Check {
        name: "self-consistency value".into(),
        rel_err: (terms.consist - direct).abs() / direct.abs().max(1e-300),
    });

    let cases = [
        (
            "content",
            LossWeights {
                content: 1.0,
                style: 0.0,
                consist: 0.0,
                sparse: 0.0,
            },
            SparseReduction::Sum,
        ),
        (
            "style",
            LossWeights {
                content: 0.0,
                style: 1.0,
                consist: 0.0,
                sparse: 0.0,
            },
            SparseReduction::Sum,
        ),
        (
            "self-consistency",
            LossWeights {
                content: 0.0,
                style: 0.0,
                consist: 1.0,
                sparse: 0.0,
            },
            SparseReduction::Sum,
        ),
        (
            "sparsity",
            LossWeights {
                content: 0.0,
                style: 0.0,
                consist: 0.0,
                sparse: 1.0,
            },
            SparseReduction::Sum,
        ),
        ("total", LossWeights::default(), SparseReduction::Sum),
        ("total, mean sparsity", LossWeights::default(), SparseReduction::Mean),
    ];
    for (name, w, red) in cases {
        let total = |n: &StyleNet<f64>| {
            let (t, _) = step_gradients(n, &inputs, &w, red).unwrap();
            w.content * t.content + w.style * t.style + w.consist * t.consist + w.sparse * t.sparse
        };
        let (_, g) = step_gradients(&net, &inputs, &w, red).unwrap();
        let g = g.unwrap();
        let (mut ana, mut num) = (Vec::new(), Vec::new());
        for &layer in &conv_layers {
            let pg = g.params[layer].as_ref().unwrap();
            for kernel in [true, false] {
                let p = param_tensor(&net.decoder, layer, kernel);
                let ag = if kernel { &pg.kernel } else { &pg.bias };
                let idx = coords(p.len(), 6);
                num.extend(fd(|v| total(&with_param(&net, layer, kernel, v)), &p, &idx));
                ana.extend(idx.iter().map(|&i| ag.data()[i]));
            }
        }
        out.push(Check {
            name: format!("decoder params, {name} loss"),
            rel_err: rel_err(&ana, &num),
        });
    }
}

/// Every gradient check, in a fixed order.
pub fn gradient_suite() -> Vec<Check> {
    let mut rng = Rng::new(2024);
    let mut out = Vec::new();
    conv_checks(&mut out, &mut rng, "dense", 1, 0);
    conv_checks(&mut out, &mut rng, "padded", 1, 1);
    conv_checks(&mut out, &mut rng, "strided", 2, 1);
    elementwise_checks(&mut out, &mut rng);
    moment_checks(&mut out, &mut rng);
    sequential_checks(&mut out, &mut rng);
    encoder_checks(&mut out, &mut rng);
    loss_checks(&mut out, &mut rng);
    objective_checks(&mut out, &mut rng);
    out
}

/// Straightforward convolution with implicit zero padding.
pub fn naive_conv(x: &T64, conv: &Conv2d<f64>) -> T64 {
    let (d, kd) = (x.dims(), conv.kernel.dims());
    let (s, p) = (conv.stride, conv.pad as isize);
    let oh = (d.h + 2 * conv.pad - kd.h) / s + 1;
    let ow = (d.w + 2 * conv.pad - kd.w) / s + 1;
    Tensor4::from_fn(Dims::new(d.n, kd.n, oh, ow), |n, o, oy, ox| {
        let mut acc = conv.bias.at(0, o, 0, 0);
        for c in 0..d.c {
            for ky in 0..kd.h {
                for kx in 0..kd.w {
                    let iy = (oy * s + ky) as isize - p;
                    let ix = (ox * s + kx) as isize - p;
                    if iy >= 0 && ix >= 0 && (iy as usize) < d.h && (ix as usize) < d.w {
                        acc += conv.kernel.at(o, c, ky, kx) * x.at(n, c, iy as usize, ix as usize);
                    }
                }
            }
        }
        acc
    })
}

//! Encoder, AdaIN transfer and decoder.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::layers::{sigmoid, sigmoid_backward_from_input, Conv2d, LayerSpec};
use crate::net::{BackwardMode, NetGrads, Sequential, Trace};
use crate::tensor::{Dims, Scalar, Tensor4};

/// PRNG stream ids derived from the run seed.
pub(crate) const ENCODER_STREAM: u64 = 1;
pub(crate) const DECODER_STREAM: u64 = 2;
pub(crate) const SAMPLING_STREAM: u64 = 3;

/// Seeded ChaCha8 generator on a given stream.
pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// He-normal kernels (`std = sqrt(2 / fan_in)`), zero biases.
fn init_convs<T: Scalar>(net: &mut Sequential<T>, rng: &mut ChaCha8Rng) {
    for layer in &mut net.layers {
        if let LayerSpec::Conv2d(c) = layer {
            let kd = c.kernel.dims();
            let std = (2.0 / (kd.c * kd.h * kd.w) as f64).sqrt();
            for v in c.kernel.data_mut() {
                let z: f64 = StandardNormal.sample(rng);
                *v = T::from_f64(z * std);
            }
            c.bias.data_mut().iter_mut().for_each(|b| *b = T::ZERO);
        }
    }
}

fn conv_block<T: Scalar>(layers: &mut Vec<LayerSpec<T>>, in_c: usize, out_c: usize, stride: usize, relu: bool) {
    layers.push(LayerSpec::ReflectionPad(1));
    layers.push(LayerSpec::Conv2d(Conv2d::zeros(out_c, in_c, 3, stride, 0)));
    if relu {
        layers.push(LayerSpec::Relu);
    }
}

/// Frozen feature extractor exposing four tap activations.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder<T: Scalar = f32> {
    pub net: Sequential<T>,
    /// Layer indices whose outputs are exposed; the last one is the encoder output.
    pub taps: Vec<usize>,
}

/// Encoder activations at every tap; `taps.last()` is the feature map.
#[derive(Debug, Clone)]
pub struct Encoded<T: Scalar = f32> {
    pub taps: Vec<Tensor4<T>>,
}

impl<T: Scalar> Encoded<T> {
    pub fn features(&self) -> &Tensor4<T> {
        self.taps.last().expect("encoder has at least one tap")
    }
}

pub const ENCODER_WIDTHS: [usize; 4] = [16, 32, 64, 128];

impl<T: Scalar> Encoder<T> {
    pub fn new(net: Sequential<T>, taps: Vec<usize>) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::Param("encoder needs at least one tap".into()));
        }
        if taps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Param(format!(
                "encoder taps {taps:?} must be strictly increasing"
            )));
        }
        if *taps.last().unwrap() + 1 != net.layers.len() {
            return Err(Error::Param(format!(
                "last encoder tap {} must be the final layer {}",
                taps.last().unwrap(),
                net.layers.len().saturating_sub(1)
            )));
        }
        if net.layers.iter().any(|l| matches!(l, LayerSpec::NearestUpsample2x)) {
            return Err(Error::Param("encoder cannot upsample".into()));
        }
        Ok(Self { net, taps })
    }

    /// Four conv+relu stages of widths 16/32/64/128 on a 1-channel input,
    /// stride 2 from the second stage on, with seeded He-normal weights.
    pub fn standard(seed: u64) -> Self {
        let mut layers = Vec::new();
        let mut taps = Vec::new();
        let mut in_c = 1;
        for (i, &w) in ENCODER_WIDTHS.iter().enumerate() {
            conv_block(&mut layers, in_c, w, if i == 0 { 1 } else { 2 }, true);
            taps.push(layers.len() - 1);
            in_c = w;
        }
        let mut net = Sequential::new(layers);
        init_convs(&mut net, &mut stream_rng(seed, ENCODER_STREAM));
        Self { net, taps }
    }

    pub fn cast<U: Scalar>(&self) -> Encoder<U> {
        Encoder {
            net: self.net.cast(),
            taps: self.taps.clone(),
        }
    }

    /// Product of the convolution strides; inputs must be a multiple of it.
    pub fn downsample_factor(&self) -> usize {
        self.net
            .layers
            .iter()
            .map(|l| match l {
                LayerSpec::Conv2d(c) => c.stride,
                _ => 1,
            })
            .product()
    }

    pub fn out_channels(&self) -> usize {
        self.net
            .layers
            .iter()
            .rev()
            .find_map(|l| match l {
                LayerSpec::Conv2d(c) => Some(c.out_channels()),
                _ => None,
            })
            .unwrap_or(0)
    }

    fn check_input(&self, input: &Tensor4<T>) -> Result<()> {
        let f = self.downsample_factor();
        let d = input.dims();
        if !d.h.is_multiple_of(f) || !d.w.is_multiple_of(f) || d.h == 0 || d.w == 0 {
            return Err(Error::shape(
                "encode",
                format!("height and width that are non-zero multiples of {f}"),
                d,
            ));
        }
        Ok(())
    }

    pub fn encode(&self, input: &Tensor4<T>) -> Result<Encoded<T>> {
        Ok(self.encode_traced(input)?.1)
    }

    pub fn encode_traced(&self, input: &Tensor4<T>) -> Result<(Trace<T>, Encoded<T>)> {
        self.check_input(input)?;
        let trace = self.net.forward_traced(input)?;
        let taps = self
            .taps
            .iter()
            .map(|&i| trace.output_of(i).cloned().expect("tap within range"))
            .collect();
        Ok((trace, Encoded { taps }))
    }

    /// Gradient w.r.t. the encoder input given gradients at each tap.
    pub fn backward_input(&self, trace: &Trace<T>, tap_grads: &[Option<Tensor4<T>>]) -> Result<Tensor4<T>> {
        if tap_grads.len() != self.taps.len() {
            return Err(Error::shape(
                "Encoder::backward_input",
                self.taps.len(),
                tap_grads.len(),
            ));
        }
        let taps: Vec<(usize, &Tensor4<T>)> = self
            .taps
            .iter()
            .zip(tap_grads)
            .filter_map(|(&i, g)| g.as_ref().map(|g| (i, g)))
            .collect();
        let grads = self
            .net
            .backward_with_taps(trace, None, &taps, BackwardMode::INPUT_ONLY)?;
        match grads.input {
            Some(g) => Ok(g),
            None => Ok(Tensor4::zeros(
                trace.inputs[0]
                    .as_ref()
                    .map(|t| t.dims())
                    .unwrap_or(Dims::new(0, 0, 0, 0)),
            )),
        }
    }
}

/// Content channels with a smaller population variance are treated as
/// constant and mapped to the style mean.
pub const ADAIN_DEGENERATE_VAR: f64 = 1e-10;

/// Spatial mean and population variance of every `(n, c)` plane.
fn raw_moments<T: Scalar>(t: &Tensor4<T>) -> Vec<(T, T)> {
    let d = t.dims();
    let count = T::from_usize(d.plane().max(1));
    (0..d.n * d.c)
        .map(|i| {
            let plane = &t.data()[i * d.plane()..(i + 1) * d.plane()];
            let mu = plane.iter().copied().sum::<T>() / count;
            let var = plane.iter().map(|&v| (v - mu) * (v - mu)).sum::<T>() / count;
            (mu, var)
        })
        .collect()
}

/// Adaptive instance normalization.
///
/// Each content channel is re-normalized to the matching style channel's
/// mean and standard deviation. A single-sample style batch is broadcast
/// over the content batch. The moments are exact population moments, so the
/// output carries the style moments up to rounding and `adain(x, x) == x`
/// on every non-constant channel.
pub fn adain<T: Scalar>(content: &Tensor4<T>, style: &Tensor4<T>) -> Result<Tensor4<T>> {
    let (cd, sd) = (content.dims(), style.dims());
    if cd.c != sd.c || !(sd.n == 1 || sd.n == cd.n) {
        return Err(Error::shape(
            "adain",
            format!("style with {} channels and batch 1 or {}", cd.c, cd.n),
            sd,
        ));
    }
    if cd.plane() == 0 || sd.plane() == 0 {
        return Err(Error::shape("adain", "h*w >= 1", if cd.plane() == 0 { cd } else { sd }));
    }
    let cm = raw_moments(content);
    let sm = raw_moments(style);
    let degenerate = T::from_f64(ADAIN_DEGENERATE_VAR);
    let mut out = Tensor4::zeros(cd);
    let p = cd.plane();
    for n in 0..cd.n {
        for c in 0..cd.c {
            let i = n * cd.c + c;
            let si = if sd.n == 1 { c } else { i };
            let ((mu_c, var_c), (mu_s, var_s)) = (cm[i], sm[si]);
            let scale = if var_c > degenerate {
                (var_s / var_c).sqrt()
            } else {
                T::ZERO
            };
            let src = content.plane(n, c);
            let dst = &mut out.data_mut()[i * p..(i + 1) * p];
            for (o, &x) in dst.iter_mut().zip(src) {
                *o = scale * (x - mu_c) + mu_s;
            }
        }
    }
    Ok(out)
}

/// Convolutional decoder followed by a sigmoid onto `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoder<T: Scalar = f32> {
    pub net: Sequential<T>,
}

/// Decoder activations for a backward pass.
#[derive(Debug, Clone)]
pub struct DecoderTrace<T: Scalar = f32> {
    pub trace: Trace<T>,
    /// Sigmoid output, i.e. the sketch.
    pub output: Tensor4<T>,
}

impl<T: Scalar> Decoder<T> {
    pub fn new(net: Sequential<T>) -> Self {
        Self { net }
    }

    /// Nine 3x3 convolutions with three nearest upsamplings, mirroring
    /// [`Encoder::standard`]: 128→64 ↑ 64→64→64→32 ↑ 32→32→16 ↑ 16→16→16→1.
    pub fn standard(seed: u64) -> Self {
        let mut layers = Vec::new();
        conv_block(&mut layers, 128, 64, 1, true);
        layers.push(LayerSpec::NearestUpsample2x);
        conv_block(&mut layers, 64, 64, 1, true);
        conv_block(&mut layers, 64, 64, 1, true);
        conv_block(&mut layers, 64, 32, 1, true);
        layers.push(LayerSpec::NearestUpsample2x);
        conv_block(&mut layers, 32, 32, 1, true);
        conv_block(&mut layers, 32, 16, 1, true);
        layers.push(LayerSpec::NearestUpsample2x);
        conv_block(&mut layers, 16, 16, 1, true);
        conv_block(&mut layers, 16, 16, 1, true);
        conv_block(&mut layers, 16, 1, 1, false);
        let mut net = Sequential::new(layers);
        init_convs(&mut net, &mut stream_rng(seed, DECODER_STREAM));
        Self { net }
    }

    pub fn cast<U: Scalar>(&self) -> Decoder<U> {
        Decoder { net: self.net.cast() }
    }

    pub fn upsample_count(&self) -> usize {
        self.net
            .layers
            .iter()
            .filter(|l| matches!(l, LayerSpec::NearestUpsample2x))
            .count()
    }

    pub fn conv_count(&self) -> usize {
        self.net
            .layers
            .iter()
            .filter(|l| matches!(l, LayerSpec::Conv2d(_)))
            .count()
    }

    pub fn in_channels(&self) -> Option<usize> {
        self.net.layers.iter().find_map(|l| match l {
            LayerSpec::Conv2d(c) => Some(c.in_channels()),
            _ => None,
        })
    }

    fn check_input(&self, t: &Tensor4<T>) -> Result<()> {
        if let Some(c) = self.in_channels() {
            if t.dims().c != c {
                return Err(Error::shape("decode", format!("{c} input channels"), t.dims()));
            }
        }
        let out = self.net.output_dims(t.dims())?;
        if out.c != 1 {
            return Err(Error::shape("decode", "1 output channel", out));
        }
        Ok(())
    }

    pub fn decode(&self, t: &Tensor4<T>) -> Result<Tensor4<T>> {
        self.check_input(t)?;
        Ok(sigmoid(&self.net.forward(t)?))
    }

    pub fn decode_traced(&self, t: &Tensor4<T>) -> Result<DecoderTrace<T>> {
        self.check_input(t)?;
        let trace = self.net.forward_traced(t)?;
        let output = sigmoid(&trace.output);
        Ok(DecoderTrace { trace, output })
    }

    /// Parameter gradients given the gradient w.r.t. the sketch output.
    pub fn backward(&self, dt: &DecoderTrace<T>, grad_output: &Tensor4<T>) -> Result<NetGrads<T>> {
        let g = sigmoid_backward_from_input(grad_output, &dt.trace.output)?;
        self.net.backward(&dt.trace, &g, BackwardMode::PARAMS_ONLY)
    }
}

/// Encoder and decoder of the sketch-synthesis network.
#[derive(Debug, Clone, PartialEq)]
pub struct StyleNet<T: Scalar = f32> {
    pub encoder: Encoder<T>,
    pub decoder: Decoder<T>,
}

impl<T: Scalar> StyleNet<T> {
    pub fn standard(seed: u64) -> Self {
        Self {
            encoder: Encoder::standard(seed),
            decoder: Decoder::standard(seed),
        }
    }

    pub fn cast<U: Scalar>(&self) -> StyleNet<U> {
        StyleNet {
            encoder: self.encoder.cast(),
            decoder: self.decoder.cast(),
        }
    }

    /// `g(adain(f(content), f(style)))`.
    pub fn transfer(&self, content: &Tensor4<T>, style: &Tensor4<T>) -> Result<Tensor4<T>> {
        let fc = self.encoder.encode(content)?;
        let fs = self.encoder.encode(style)?;
        let t = adain(fc.features(), fs.features())?;
        self.decoder.decode(&t)
    }
}

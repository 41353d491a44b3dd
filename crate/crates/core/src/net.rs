//! Fixed feed-forward chains of [`LayerSpec`]s with explicit backward passes.

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::layers::{
    conv2d_input_grad, conv2d_param_grads, conv2d_with, nearest_upsample2x, nearest_upsample2x_backward,
    reflection_pad, reflection_pad_backward, relu, relu_backward, LayerKind, LayerSpec,
};
use crate::tensor::{Dims, Scalar, Tensor4};

#[derive(Debug, Clone, PartialEq)]
pub struct Sequential<T: Scalar = f32> {
    pub layers: Vec<LayerSpec<T>>,
}

/// Activations cached by [`Sequential::forward_traced`].
///
/// `inputs[i]` is what layer `i` consumed; the output of layer `i` is
/// `inputs[i + 1]` or, for the last layer, `output`.
#[derive(Debug, Clone)]
pub struct Trace<T: Scalar = f32> {
    pub inputs: Vec<Option<Tensor4<T>>>,
    pub output: Tensor4<T>,
}

impl<T: Scalar> Trace<T> {
    pub fn output_of(&self, layer: usize) -> Option<&Tensor4<T>> {
        if layer + 1 == self.inputs.len() {
            Some(&self.output)
        } else {
            self.inputs.get(layer + 1).and_then(Option::as_ref)
        }
    }
}

/// Which gradients a backward pass should produce.
#[derive(Debug, Clone, Copy)]
pub struct BackwardMode {
    pub params: bool,
    pub input: bool,
}

impl BackwardMode {
    pub const ALL: Self = Self {
        params: true,
        input: true,
    };
    pub const INPUT_ONLY: Self = Self {
        params: false,
        input: true,
    };
    pub const PARAMS_ONLY: Self = Self {
        params: true,
        input: false,
    };
}

/// Kernel and bias gradients for one convolution layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrad<T: Scalar = f32> {
    pub kernel: Tensor4<T>,
    pub bias: Tensor4<T>,
}

#[derive(Debug, Clone)]
pub struct NetGrads<T: Scalar = f32> {
    /// `None` when the backward pass was asked not to compute it.
    pub input: Option<Tensor4<T>>,
    /// One entry per layer; `Some` only for convolutions.
    pub params: Vec<Option<ParamGrad<T>>>,
}

impl<T: Scalar> NetGrads<T> {
    /// Add another set of gradients for the same network into this one.
    pub fn accumulate(&mut self, other: &NetGrads<T>) -> Result<()> {
        if self.params.len() != other.params.len() {
            return Err(Error::shape(
                "NetGrads::accumulate",
                self.params.len(),
                other.params.len(),
            ));
        }
        for (a, b) in self.params.iter_mut().zip(&other.params) {
            match (a, b) {
                (Some(a), Some(b)) => {
                    add_into(&mut a.kernel, &b.kernel)?;
                    add_into(&mut a.bias, &b.bias)?;
                }
                (a @ None, Some(b)) => *a = Some(b.clone()),
                _ => {}
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: T) {
        for g in self.params.iter_mut().flatten() {
            g.kernel.data_mut().iter_mut().for_each(|v| *v *= factor);
            g.bias.data_mut().iter_mut().for_each(|v| *v *= factor);
        }
    }
}

pub(crate) fn add_into<T: Scalar>(dst: &mut Tensor4<T>, src: &Tensor4<T>) -> Result<()> {
    dst.check_same_dims(src, "add_into")?;
    for (a, &b) in dst.data_mut().iter_mut().zip(src.data()) {
        *a += b;
    }
    Ok(())
}

impl<T: Scalar> Sequential<T> {
    pub fn new(layers: Vec<LayerSpec<T>>) -> Self {
        Self { layers }
    }

    pub fn from_kinds(kinds: &[LayerKind]) -> Self {
        Self::new(kinds.iter().map(LayerKind::instantiate).collect())
    }

    pub fn kinds(&self) -> Vec<LayerKind> {
        self.layers.iter().map(LayerSpec::kind).collect()
    }

    pub fn cast<U: Scalar>(&self) -> Sequential<U> {
        Sequential::new(self.layers.iter().map(LayerSpec::cast).collect())
    }

    pub fn output_dims(&self, mut d: Dims) -> Result<Dims> {
        for layer in &self.layers {
            d = match layer {
                LayerSpec::Conv2d(c) => c.output_dims(d)?,
                LayerSpec::Relu => d,
                LayerSpec::NearestUpsample2x => Dims::new(d.n, d.c, d.h * 2, d.w * 2),
                LayerSpec::ReflectionPad(w) => {
                    if *w > 0 && *w >= d.h.min(d.w) {
                        return Err(Error::Param(format!("reflection pad width {w} too large for {d}")));
                    }
                    Dims::new(d.n, d.c, d.h + 2 * w, d.w + 2 * w)
                }
            };
        }
        Ok(d)
    }

    /// Convolution layers in order, as `(kernel, bias)` parameter references.
    pub fn params(&self) -> Vec<&Tensor4<T>> {
        self.layers
            .iter()
            .filter_map(|l| match l {
                LayerSpec::Conv2d(c) => Some([&c.kernel, &c.bias]),
                _ => None,
            })
            .flatten()
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor4<T>> {
        self.layers
            .iter_mut()
            .filter_map(|l| match l {
                LayerSpec::Conv2d(c) => Some([&mut c.kernel, &mut c.bias]),
                _ => None,
            })
            .flatten()
            .collect()
    }

    fn apply(layer: &LayerSpec<T>, x: &Tensor4<T>, exec: Execution) -> Result<Tensor4<T>> {
        let y = match layer {
            LayerSpec::Conv2d(c) => conv2d_with(x, c, exec)?,
            LayerSpec::Relu => relu(x),
            LayerSpec::NearestUpsample2x => nearest_upsample2x(x),
            LayerSpec::ReflectionPad(w) => reflection_pad(x, *w)?,
        };
        debug_assert!(y.all_finite(), "non-finite activation after {:?}", layer.kind());
        Ok(y)
    }

    pub fn forward(&self, input: &Tensor4<T>) -> Result<Tensor4<T>> {
        self.forward_with(input, Execution::default())
    }

    pub fn forward_with(&self, input: &Tensor4<T>, exec: Execution) -> Result<Tensor4<T>> {
        let mut x = input.clone();
        for layer in &self.layers {
            x = Self::apply(layer, &x, exec)?;
        }
        Ok(x)
    }

    pub fn forward_traced(&self, input: &Tensor4<T>) -> Result<Trace<T>> {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut x = input.clone();
        for layer in &self.layers {
            let y = Self::apply(layer, &x, Execution::default())?;
            inputs.push(Some(x));
            x = y;
        }
        Ok(Trace { inputs, output: x })
    }

    /// Backpropagate `grad_out` (gradient w.r.t. the network output).
    pub fn backward(&self, trace: &Trace<T>, grad_out: &Tensor4<T>, mode: BackwardMode) -> Result<NetGrads<T>> {
        self.backward_with_taps(trace, Some(grad_out), &[], mode)
    }

    /// Backpropagate gradients arriving at the network output and/or at
    /// intermediate layer outputs. `taps` holds `(layer index, gradient of
    /// that layer's output)` pairs.
    pub fn backward_with_taps(
        &self,
        trace: &Trace<T>,
        grad_out: Option<&Tensor4<T>>,
        taps: &[(usize, &Tensor4<T>)],
        mode: BackwardMode,
    ) -> Result<NetGrads<T>> {
        let n = self.layers.len();
        if trace.inputs.len() != n {
            return Err(Error::Usage(format!(
                "trace holds {} cached inputs for a {n}-layer network",
                trace.inputs.len()
            )));
        }
        if let Some(&(i, _)) = taps.iter().find(|(i, _)| *i >= n) {
            return Err(Error::Param(format!("tap index {i} out of range for {n} layers")));
        }
        let mut params: Vec<Option<ParamGrad<T>>> = vec![None; n];
        let mut g: Option<Tensor4<T>> = grad_out.cloned();
        let exec = Execution::default();
        for i in (0..n).rev() {
            for (_, tg) in taps.iter().filter(|(j, _)| *j == i) {
                match &mut g {
                    Some(acc) => add_into(acc, tg)?,
                    None => g = Some((*tg).clone()),
                }
            }
            let Some(go) = g.take() else { continue };
            let cached = trace.inputs[i]
                .as_ref()
                .ok_or_else(|| Error::Usage(format!("missing cached input for layer {i}")))?;
            let need_below = mode.input || (mode.params && i > 0);
            g = match &self.layers[i] {
                LayerSpec::Conv2d(c) => {
                    if mode.params {
                        let (kernel, bias) = conv2d_param_grads(&go, cached, c, exec)?;
                        params[i] = Some(ParamGrad { kernel, bias });
                    }
                    if need_below {
                        Some(conv2d_input_grad(&go, cached.dims(), c, exec)?)
                    } else {
                        None
                    }
                }
                _ if !need_below => None,
                LayerSpec::Relu => Some(relu_backward(&go, cached)?),
                LayerSpec::NearestUpsample2x => Some(nearest_upsample2x_backward(&go)?),
                LayerSpec::ReflectionPad(w) => Some(reflection_pad_backward(&go, *w)?),
            };
        }
        Ok(NetGrads {
            input: if mode.input { g } else { None },
            params,
        })
    }
}

//! Layer kernels with hand-derived backward passes.
//!
//! Every function here is pure: inputs are borrowed immutably and results are
//! freshly allocated. Backward functions take whatever the forward pass needs
//! (usually its input) explicitly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::tensor::{Dims, Scalar, Tensor4};

/// Convolution parameters. `kernel` is `(out_c, in_c, kh, kw)`, `bias` is `(1, out_c, 1, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d<T: Scalar = f32> {
    pub kernel: Tensor4<T>,
    pub bias: Tensor4<T>,
    pub stride: usize,
    /// Zero padding applied on every side.
    pub pad: usize,
}

impl<T: Scalar> Conv2d<T> {
    pub fn new(kernel: Tensor4<T>, bias: Tensor4<T>, stride: usize, pad: usize) -> Result<Self> {
        let kd = kernel.dims();
        if bias.dims() != Dims::new(1, kd.n, 1, 1) {
            return Err(Error::shape("Conv2d::new", Dims::new(1, kd.n, 1, 1), bias.dims()));
        }
        if stride == 0 {
            return Err(Error::Param("conv2d stride must be >= 1".into()));
        }
        if kd.h == 0 || kd.w == 0 {
            return Err(Error::Param("conv2d kernel must be non-empty".into()));
        }
        Ok(Self {
            kernel,
            bias,
            stride,
            pad,
        })
    }

    pub fn zeros(out_c: usize, in_c: usize, k: usize, stride: usize, pad: usize) -> Self {
        Self {
            kernel: Tensor4::zeros(Dims::new(out_c, in_c, k, k)),
            bias: Tensor4::zeros(Dims::new(1, out_c, 1, 1)),
            stride,
            pad,
        }
    }

    pub fn out_channels(&self) -> usize {
        self.kernel.dims().n
    }

    pub fn in_channels(&self) -> usize {
        self.kernel.dims().c
    }

    pub fn output_dims(&self, input: Dims) -> Result<Dims> {
        let kd = self.kernel.dims();
        if input.c != kd.c {
            return Err(Error::shape("conv2d", format!("{} input channels", kd.c), input));
        }
        let (ph, pw) = (input.h + 2 * self.pad, input.w + 2 * self.pad);
        if ph < kd.h || pw < kd.w {
            return Err(Error::shape(
                "conv2d",
                format!("padded input at least {}x{}", kd.h, kd.w),
                input,
            ));
        }
        Ok(Dims::new(
            input.n,
            kd.n,
            (ph - kd.h) / self.stride + 1,
            (pw - kd.w) / self.stride + 1,
        ))
    }

    pub fn cast<U: Scalar>(&self) -> Conv2d<U> {
        Conv2d {
            kernel: self.kernel.cast(),
            bias: self.bias.cast(),
            stride: self.stride,
            pad: self.pad,
        }
    }
}

/// One stage of a feed-forward chain.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec<T: Scalar = f32> {
    Conv2d(Conv2d<T>),
    Relu,
    NearestUpsample2x,
    ReflectionPad(usize),
}

/// Weight-free description of a layer, as stored in checkpoint headers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerKind {
    Conv2d {
        out_c: usize,
        in_c: usize,
        kh: usize,
        kw: usize,
        stride: usize,
        pad: usize,
    },
    Relu,
    NearestUpsample2x,
    ReflectionPad {
        width: usize,
    },
}

impl<T: Scalar> LayerSpec<T> {
    pub fn kind(&self) -> LayerKind {
        match self {
            LayerSpec::Conv2d(c) => {
                let d = c.kernel.dims();
                LayerKind::Conv2d {
                    out_c: d.n,
                    in_c: d.c,
                    kh: d.h,
                    kw: d.w,
                    stride: c.stride,
                    pad: c.pad,
                }
            }
            LayerSpec::Relu => LayerKind::Relu,
            LayerSpec::NearestUpsample2x => LayerKind::NearestUpsample2x,
            LayerSpec::ReflectionPad(w) => LayerKind::ReflectionPad { width: *w },
        }
    }

    pub fn cast<U: Scalar>(&self) -> LayerSpec<U> {
        match self {
            LayerSpec::Conv2d(c) => LayerSpec::Conv2d(c.cast()),
            LayerSpec::Relu => LayerSpec::Relu,
            LayerSpec::NearestUpsample2x => LayerSpec::NearestUpsample2x,
            LayerSpec::ReflectionPad(w) => LayerSpec::ReflectionPad(*w),
        }
    }
}

impl LayerKind {
    /// A layer of this kind with all-zero weights.
    pub fn instantiate<T: Scalar>(&self) -> LayerSpec<T> {
        match *self {
            LayerKind::Conv2d {
                out_c,
                in_c,
                kh,
                kw,
                stride,
                pad,
            } => LayerSpec::Conv2d(Conv2d {
                kernel: Tensor4::zeros(Dims::new(out_c, in_c, kh, kw)),
                bias: Tensor4::zeros(Dims::new(1, out_c, 1, 1)),
                stride,
                pad,
            }),
            LayerKind::Relu => LayerSpec::Relu,
            LayerKind::NearestUpsample2x => LayerSpec::NearestUpsample2x,
            LayerKind::ReflectionPad { width } => LayerSpec::ReflectionPad(width),
        }
    }
}

/// Output indices `ox` for which `ox * stride + k - pad` lands in `0..len`.
#[inline]
fn axpy<T: Scalar>(dst: &mut [T], w: T, src: &[T]) {
    for (d, &x) in dst.iter_mut().zip(src) {
        *d += w * x;
    }
}

/// Dot product with eight independent accumulators, summed in a fixed order.
#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [T::ZERO; 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut tail = T::ZERO;
    for (&x, &y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += x * y;
    }
    let mut s = T::ZERO;
    for v in acc {
        s += v;
    }
    s + tail
}

/// Stride 1 without implicit padding: every kernel tap is one contiguous
/// run over "wide" rows of the input's width.
#[inline]
fn is_dense(conv_stride: usize, conv_pad: usize) -> bool {
    conv_stride == 1 && conv_pad == 0
}

/// Length of the contiguous run covering all valid outputs in wide layout.
#[inline]
fn wide_len(od: Dims, id: Dims) -> usize {
    (od.h - 1) * id.w + od.w
}

/// Copy each `h x w` plane of `t` into an `h x wide` plane padded with zeros.
fn widen<T: Scalar>(t: &Tensor4<T>, wide: usize) -> Vec<T> {
    let d = t.dims();
    let mut out = vec![T::ZERO; d.n * d.c * d.h * wide];
    for (i, plane) in t.data().chunks(d.plane().max(1)).enumerate().take(d.n * d.c) {
        for (y, row) in plane.chunks(d.w.max(1)).enumerate() {
            let o = (i * d.h + y) * wide;
            out[o..o + d.w].copy_from_slice(row);
        }
    }
    out
}

#[inline]
fn valid_range(out_len: usize, len: usize, k: usize, stride: usize, pad: usize) -> (usize, usize) {
    let lo = if pad > k { (pad - k).div_ceil(stride) } else { 0 };
    let hi_excl = if len + pad > k {
        ((len - 1 + pad - k) / stride + 1).min(out_len)
    } else {
        0
    };
    (lo, hi_excl.max(lo))
}

pub fn conv2d<T: Scalar>(input: &Tensor4<T>, conv: &Conv2d<T>) -> Result<Tensor4<T>> {
    conv2d_with(input, conv, Execution::default())
}

pub fn conv2d_with<T: Scalar>(input: &Tensor4<T>, conv: &Conv2d<T>, exec: Execution) -> Result<Tensor4<T>> {
    let id = input.dims();
    let od = conv.output_dims(id)?;
    let kd = conv.kernel.dims();
    let (s, p) = (conv.stride, conv.pad);
    let kernel = conv.kernel.data();
    let bias = conv.bias.data();
    let mut out = vec![T::ZERO; od.len()];
    let work = od.len() * kd.c * kd.h * kd.w;
    exec.for_work(work)
        .for_each_chunk(&mut out, od.plane(), |plane_idx, dst| {
            let (n, oc) = (plane_idx / od.c, plane_idx % od.c);
            if is_dense(s, p) && !od.is_empty() {
                let len = wide_len(od, id);
                let mut wide = vec![T::ZERO; len];
                for ic in 0..kd.c {
                    let src = input.plane(n, ic);
                    for ky in 0..kd.h {
                        for kx in 0..kd.w {
                            let wgt = kernel[((oc * kd.c + ic) * kd.h + ky) * kd.w + kx];
                            let off = ky * id.w + kx;
                            axpy(&mut wide, wgt, &src[off..off + len]);
                        }
                    }
                }
                for (oy, drow) in dst.chunks_mut(od.w).enumerate() {
                    for (d, &v) in drow.iter_mut().zip(&wide[oy * id.w..]) {
                        *d = bias[oc] + v;
                    }
                }
                return;
            }
            dst.iter_mut().for_each(|v| *v = bias[oc]);
            for ic in 0..kd.c {
                let src = input.plane(n, ic);
                for ky in 0..kd.h {
                    let (oy0, oy1) = valid_range(od.h, id.h, ky, s, p);
                    for kx in 0..kd.w {
                        let wgt = kernel[((oc * kd.c + ic) * kd.h + ky) * kd.w + kx];
                        let (ox0, ox1) = valid_range(od.w, id.w, kx, s, p);
                        for oy in oy0..oy1 {
                            let iy = oy * s + ky - p;
                            let row = &src[iy * id.w..(iy + 1) * id.w];
                            let drow = &mut dst[oy * od.w..(oy + 1) * od.w];
                            if s == 1 {
                                let ix0 = ox0 + kx - p;
                                for (d, &x) in drow[ox0..ox1].iter_mut().zip(&row[ix0..]) {
                                    *d += wgt * x;
                                }
                            } else {
                                for ox in ox0..ox1 {
                                    drow[ox] += wgt * row[ox * s + kx - p];
                                }
                            }
                        }
                    }
                }
            }
        });
    Tensor4::from_vec(od, out)
}

/// Gradients of a convolution with respect to its input and parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads<T: Scalar = f32> {
    pub input: Tensor4<T>,
    pub kernel: Tensor4<T>,
    pub bias: Tensor4<T>,
}

pub fn conv2d_backward<T: Scalar>(
    grad_out: &Tensor4<T>,
    cached_input: &Tensor4<T>,
    conv: &Conv2d<T>,
) -> Result<ConvGrads<T>> {
    conv2d_backward_with(grad_out, cached_input, conv, Execution::default())
}

pub fn conv2d_backward_with<T: Scalar>(
    grad_out: &Tensor4<T>,
    cached_input: &Tensor4<T>,
    conv: &Conv2d<T>,
    exec: Execution,
) -> Result<ConvGrads<T>> {
    let input = conv2d_input_grad(grad_out, cached_input.dims(), conv, exec)?;
    let (kernel, bias) = conv2d_param_grads(grad_out, cached_input, conv, exec)?;
    Ok(ConvGrads { input, kernel, bias })
}

fn check_grad_out<T: Scalar>(grad_out: &Tensor4<T>, input: Dims, conv: &Conv2d<T>) -> Result<Dims> {
    let od = conv.output_dims(input)?;
    if grad_out.dims() != od {
        return Err(Error::shape("conv2d_backward", od, grad_out.dims()));
    }
    Ok(od)
}

/// Gradient w.r.t. the convolution input only; needs no cached activations.
pub fn conv2d_input_grad<T: Scalar>(
    grad_out: &Tensor4<T>,
    input_dims: Dims,
    conv: &Conv2d<T>,
    exec: Execution,
) -> Result<Tensor4<T>> {
    let id = input_dims;
    let od = check_grad_out(grad_out, id, conv)?;
    let kd = conv.kernel.dims();
    let (s, p) = (conv.stride, conv.pad);
    let kernel = conv.kernel.data();
    let exec = exec.for_work(od.len() * kd.c * kd.h * kd.w);

    let mut gin = vec![T::ZERO; id.len()];
    if is_dense(s, p) && !od.is_empty() {
        let len = wide_len(od, id);
        let gw = widen(grad_out, id.w);
        let gplane = od.h * id.w;
        exec.for_each_chunk(&mut gin, id.plane(), |plane_idx, dst| {
            let (n, ic) = (plane_idx / id.c, plane_idx % id.c);
            for oc in 0..kd.n {
                let g = &gw[(n * od.c + oc) * gplane..][..len];
                for ky in 0..kd.h {
                    for kx in 0..kd.w {
                        let wgt = kernel[((oc * kd.c + ic) * kd.h + ky) * kd.w + kx];
                        let off = ky * id.w + kx;
                        axpy(&mut dst[off..off + len], wgt, g);
                    }
                }
            }
        });
        return Tensor4::from_vec(id, gin);
    }
    exec.for_each_chunk(&mut gin, id.plane(), |plane_idx, dst| {
        let (n, ic) = (plane_idx / id.c, plane_idx % id.c);
        for oc in 0..kd.n {
            let g = grad_out.plane(n, oc);
            for ky in 0..kd.h {
                let (oy0, oy1) = valid_range(od.h, id.h, ky, s, p);
                for kx in 0..kd.w {
                    let wgt = kernel[((oc * kd.c + ic) * kd.h + ky) * kd.w + kx];
                    let (ox0, ox1) = valid_range(od.w, id.w, kx, s, p);
                    for oy in oy0..oy1 {
                        let iy = oy * s + ky - p;
                        let grow = &g[oy * od.w..(oy + 1) * od.w];
                        let drow = &mut dst[iy * id.w..(iy + 1) * id.w];
                        if s == 1 {
                            let ix0 = ox0 + kx - p;
                            for (d, &gv) in drow[ix0..].iter_mut().zip(&grow[ox0..ox1]) {
                                *d += wgt * gv;
                            }
                        } else {
                            for ox in ox0..ox1 {
                                drow[ox * s + kx - p] += wgt * grow[ox];
                            }
                        }
                    }
                }
            }
        }
    });
    Tensor4::from_vec(id, gin)
}

/// Gradients w.r.t. kernel and bias.
pub fn conv2d_param_grads<T: Scalar>(
    grad_out: &Tensor4<T>,
    cached_input: &Tensor4<T>,
    conv: &Conv2d<T>,
    exec: Execution,
) -> Result<(Tensor4<T>, Tensor4<T>)> {
    let id = cached_input.dims();
    let od = check_grad_out(grad_out, id, conv)?;
    let kd = conv.kernel.dims();
    let (s, p) = (conv.stride, conv.pad);
    let exec = exec.for_work(od.len() * kd.c * kd.h * kd.w);

    let per_oc = kd.c * kd.h * kd.w;
    let mut gk = vec![T::ZERO; kd.len()];
    let dense = is_dense(s, p) && !od.is_empty();
    let gw = if dense { widen(grad_out, id.w) } else { Vec::new() };
    exec.for_each_chunk(&mut gk, per_oc, |oc, dst| {
        if dense {
            let len = wide_len(od, id);
            let gplane = od.h * id.w;
            for n in 0..od.n {
                let g = &gw[(n * od.c + oc) * gplane..][..len];
                for ic in 0..kd.c {
                    let src = cached_input.plane(n, ic);
                    for ky in 0..kd.h {
                        for kx in 0..kd.w {
                            let off = ky * id.w + kx;
                            dst[(ic * kd.h + ky) * kd.w + kx] += dot(g, &src[off..off + len]);
                        }
                    }
                }
            }
            return;
        }
        for n in 0..od.n {
            let g = grad_out.plane(n, oc);
            for ic in 0..kd.c {
                let src = cached_input.plane(n, ic);
                for ky in 0..kd.h {
                    let (oy0, oy1) = valid_range(od.h, id.h, ky, s, p);
                    for kx in 0..kd.w {
                        let (ox0, ox1) = valid_range(od.w, id.w, kx, s, p);
                        let mut acc = T::ZERO;
                        for oy in oy0..oy1 {
                            let iy = oy * s + ky - p;
                            let row = &src[iy * id.w..(iy + 1) * id.w];
                            let grow = &g[oy * od.w..(oy + 1) * od.w];
                            if s == 1 {
                                let ix0 = ox0 + kx - p;
                                for (&gv, &x) in grow[ox0..ox1].iter().zip(&row[ix0..]) {
                                    acc += gv * x;
                                }
                            } else {
                                for ox in ox0..ox1 {
                                    acc += grow[ox] * row[ox * s + kx - p];
                                }
                            }
                        }
                        dst[(ic * kd.h + ky) * kd.w + kx] += acc;
                    }
                }
            }
        }
    });

    let mut gb = vec![T::ZERO; kd.n];
    for n in 0..od.n {
        for (oc, b) in gb.iter_mut().enumerate() {
            *b += grad_out.plane(n, oc).iter().copied().sum::<T>();
        }
    }
    Ok((
        Tensor4::from_vec(kd, gk)?,
        Tensor4::from_vec(Dims::new(1, kd.n, 1, 1), gb)?,
    ))
}

pub fn relu<T: Scalar>(input: &Tensor4<T>) -> Tensor4<T> {
    input.map(|v| if v > T::ZERO { v } else { T::ZERO })
}

/// Passes `grad_out` through where the forward input was positive.
pub fn relu_backward<T: Scalar>(grad_out: &Tensor4<T>, cached_input: &Tensor4<T>) -> Result<Tensor4<T>> {
    grad_out.check_same_dims(cached_input, "relu_backward")?;
    let data = grad_out
        .data()
        .iter()
        .zip(cached_input.data())
        .map(|(&g, &x)| if x > T::ZERO { g } else { T::ZERO })
        .collect();
    Tensor4::from_vec(grad_out.dims(), data)
}

pub fn nearest_upsample2x<T: Scalar>(input: &Tensor4<T>) -> Tensor4<T> {
    let d = input.dims();
    let od = Dims::new(d.n, d.c, d.h * 2, d.w * 2);
    let mut out = Vec::with_capacity(od.len());
    for plane in input.data().chunks(d.plane().max(1)).take(d.n * d.c) {
        for y in 0..od.h {
            let row = &plane[(y / 2) * d.w..(y / 2 + 1) * d.w];
            for &v in row {
                out.push(v);
                out.push(v);
            }
        }
    }
    Tensor4::from_vec(od, out).expect("upsample dims are consistent")
}

/// Sums each 2x2 block of `grad_out`.
pub fn nearest_upsample2x_backward<T: Scalar>(grad_out: &Tensor4<T>) -> Result<Tensor4<T>> {
    let od = grad_out.dims();
    if !od.h.is_multiple_of(2) || !od.w.is_multiple_of(2) {
        return Err(Error::shape("nearest_upsample2x_backward", "even height and width", od));
    }
    let d = Dims::new(od.n, od.c, od.h / 2, od.w / 2);
    Ok(Tensor4::from_fn(d, |n, c, y, x| {
        grad_out.at(n, c, 2 * y, 2 * x)
            + grad_out.at(n, c, 2 * y, 2 * x + 1)
            + grad_out.at(n, c, 2 * y + 1, 2 * x)
            + grad_out.at(n, c, 2 * y + 1, 2 * x + 1)
    }))
}

/// Source index of padded position `i` (in `0..len + 2*width`) under reflection.
#[inline]
fn reflect(i: usize, width: usize, len: usize) -> usize {
    let j = i as isize - width as isize;
    let last = len as isize - 1;
    let r = if j < 0 {
        -j
    } else if j > last {
        2 * last - j
    } else {
        j
    };
    r as usize
}

fn check_reflect_width(d: Dims, width: usize) -> Result<()> {
    if width > 0 && width >= d.h.min(d.w) {
        return Err(Error::Param(format!(
            "reflection pad width {width} must be smaller than min(h, w) = {}",
            d.h.min(d.w)
        )));
    }
    Ok(())
}

/// Mirror-pads each plane by `width` without repeating the edge pixel.
pub fn reflection_pad<T: Scalar>(input: &Tensor4<T>, width: usize) -> Result<Tensor4<T>> {
    let d = input.dims();
    check_reflect_width(d, width)?;
    let od = Dims::new(d.n, d.c, d.h + 2 * width, d.w + 2 * width);
    Ok(Tensor4::from_fn(od, |n, c, y, x| {
        input.at(n, c, reflect(y, width, d.h), reflect(x, width, d.w))
    }))
}

/// Scatters `grad_out` back onto the source pixels each padded position copied.
pub fn reflection_pad_backward<T: Scalar>(grad_out: &Tensor4<T>, width: usize) -> Result<Tensor4<T>> {
    let od = grad_out.dims();
    if od.h < 2 * width + 1 || od.w < 2 * width + 1 {
        return Err(Error::shape(
            "reflection_pad_backward",
            format!("at least {0}x{0}", 2 * width + 1),
            od,
        ));
    }
    let d = Dims::new(od.n, od.c, od.h - 2 * width, od.w - 2 * width);
    check_reflect_width(d, width)?;
    let mut gin = Tensor4::zeros(d);
    for n in 0..od.n {
        for c in 0..od.c {
            for y in 0..od.h {
                let sy = reflect(y, width, d.h);
                for x in 0..od.w {
                    let sx = reflect(x, width, d.w);
                    let i = gin.index(n, c, sy, sx);
                    gin.data_mut()[i] += grad_out.at(n, c, y, x);
                }
            }
        }
    }
    Ok(gin)
}

pub fn sigmoid<T: Scalar>(input: &Tensor4<T>) -> Tensor4<T> {
    input.map(|v| T::ONE / (T::ONE + (-v).exp()))
}

/// Backward of [`sigmoid`] expressed through its output.
pub fn sigmoid_backward<T: Scalar>(grad_out: &Tensor4<T>, cached_output: &Tensor4<T>) -> Result<Tensor4<T>> {
    grad_out.check_same_dims(cached_output, "sigmoid_backward")?;
    let data = grad_out
        .data()
        .iter()
        .zip(cached_output.data())
        .map(|(&g, &y)| g * y * (T::ONE - y))
        .collect();
    Tensor4::from_vec(grad_out.dims(), data)
}

/// Backward of [`sigmoid`] expressed through its input. Stays non-zero
/// where the output has rounded to exactly 0 or 1.
pub fn sigmoid_backward_from_input<T: Scalar>(grad_out: &Tensor4<T>, cached_input: &Tensor4<T>) -> Result<Tensor4<T>> {
    grad_out.check_same_dims(cached_input, "sigmoid_backward")?;
    let data = grad_out
        .data()
        .iter()
        .zip(cached_input.data())
        .map(|(&g, &z)| {
            let e = (-z.abs()).exp();
            let d = T::ONE + e;
            g * e / (d * d)
        })
        .collect();
    Tensor4::from_vec(grad_out.dims(), data)
}

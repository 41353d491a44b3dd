//! Per-(sample, channel) spatial mean and standard deviation.

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor4};

/// Added to the variance inside the square root so constant channels have
/// a finite, non-zero standard deviation.
pub const EPS_VAR: f64 = 1e-5;

/// Spatial moments, one entry per `(n, c)` in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments<T: Scalar = f32> {
    pub mean: Vec<T>,
    pub std: Vec<T>,
}

/// `mean` is the spatial mean; `std = sqrt(population variance + EPS_VAR)`.
pub fn channel_moments<T: Scalar>(input: &Tensor4<T>) -> Result<Moments<T>> {
    let d = input.dims();
    if d.plane() == 0 {
        return Err(Error::shape("channel_moments", "h*w >= 1", d));
    }
    let count = T::from_usize(d.plane());
    let eps = T::from_f64(EPS_VAR);
    let mut mean = Vec::with_capacity(d.n * d.c);
    let mut std = Vec::with_capacity(d.n * d.c);
    for n in 0..d.n {
        for c in 0..d.c {
            let plane = input.plane(n, c);
            let mu = plane.iter().copied().sum::<T>() / count;
            let var = plane.iter().map(|&v| (v - mu) * (v - mu)).sum::<T>() / count;
            mean.push(mu);
            std.push((var + eps).sqrt());
        }
    }
    Ok(Moments { mean, std })
}

/// Gradient w.r.t. the input given upstream gradients of `mean` and `std`.
///
/// `d mean/dx = 1/N`, `d std/dx = (x - mean) / (N * std)`.
pub fn channel_moments_backward<T: Scalar>(
    input: &Tensor4<T>,
    moments: &Moments<T>,
    grad_mean: &[T],
    grad_std: &[T],
) -> Result<Tensor4<T>> {
    let d = input.dims();
    let k = d.n * d.c;
    for (name, len) in [
        ("mean", moments.mean.len()),
        ("std", moments.std.len()),
        ("grad_mean", grad_mean.len()),
        ("grad_std", grad_std.len()),
    ] {
        if len != k {
            return Err(Error::shape(
                "channel_moments_backward",
                format!("{k} {name} entries"),
                len,
            ));
        }
    }
    let count = T::from_usize(d.plane());
    let mut out = Tensor4::zeros(d);
    let p = d.plane();
    for i in 0..k {
        let (mu, sd) = (moments.mean[i], moments.std[i]);
        let a = grad_mean[i] / count;
        let b = grad_std[i] / (count * sd);
        let src = &input.data()[i * p..(i + 1) * p];
        let dst = &mut out.data_mut()[i * p..(i + 1) * p];
        for (o, &x) in dst.iter_mut().zip(src) {
            *o = a + b * (x - mu);
        }
    }
    Ok(out)
}

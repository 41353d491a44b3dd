//! Training objectives. Every loss returns its value together with the
//! gradient w.r.t. its first argument.
//!
//! Reductions: content, style and self-consistency terms are mean squared
//! errors; the sparsity term is a per-sample pixel sum averaged over the
//! batch.

use crate::error::{Error, Result};
use crate::maskops::SparsityMask;
use crate::moments::{channel_moments, channel_moments_backward, Moments};
use crate::tensor::{Scalar, Tensor4};

use super::network::{adain, StyleNet};

/// `mean((a - b)^2)` and its gradient w.r.t. `a`.
pub fn mse<T: Scalar>(a: &Tensor4<T>, b: &Tensor4<T>) -> Result<(T, Tensor4<T>)> {
    a.check_same_dims(b, "mse")?;
    if a.is_empty() {
        return Ok((T::ZERO, Tensor4::zeros(a.dims())));
    }
    let k = T::from_usize(a.len());
    let two = T::from_f64(2.0);
    let mut grad = Tensor4::zeros(a.dims());
    let mut sum = T::ZERO;
    for ((g, &x), &y) in grad.data_mut().iter_mut().zip(a.data()).zip(b.data()) {
        let d = x - y;
        sum += d * d;
        *g = two * d / k;
    }
    Ok((sum / k, grad))
}

/// Distance between the re-encoded output features and the AdaIN target.
pub fn content_loss<T: Scalar>(out_feat: &Tensor4<T>, target: &Tensor4<T>) -> Result<(T, Tensor4<T>)> {
    mse(out_feat, target)
}

fn vec_mse<T: Scalar>(a: &[T], b: &[T], grad: &mut [T]) -> T {
    let k = T::from_usize(a.len());
    let two = T::from_f64(2.0);
    let mut sum = T::ZERO;
    for ((g, &x), &y) in grad.iter_mut().zip(a).zip(b) {
        let d = x - y;
        sum += d * d;
        *g = two * d / k;
    }
    sum / k
}

/// Style moments of one tap, broadcast from batch 1 when needed.
fn expand_moments<T: Scalar>(m: &Moments<T>, n: usize, c: usize) -> Result<Moments<T>> {
    if m.mean.len() == n * c {
        return Ok(m.clone());
    }
    if m.mean.len() == c {
        return Ok(Moments {
            mean: m.mean.iter().cycle().take(n * c).copied().collect(),
            std: m.std.iter().cycle().take(n * c).copied().collect(),
        });
    }
    Err(Error::shape(
        "style_loss",
        format!("{c} or {} style moments", n * c),
        m.mean.len(),
    ))
}

/// Style loss against precomputed style moments, one entry per tap.
pub fn style_loss_to_moments<T: Scalar>(out_taps: &[Tensor4<T>], style: &[Moments<T>]) -> Result<(T, Vec<Tensor4<T>>)> {
    if out_taps.len() != style.len() {
        return Err(Error::shape(
            "style_loss",
            format!("{} taps", style.len()),
            out_taps.len(),
        ));
    }
    let mut total = T::ZERO;
    let mut grads = Vec::with_capacity(out_taps.len());
    for (tap, sm) in out_taps.iter().zip(style) {
        let d = tap.dims();
        let sm = expand_moments(sm, d.n, d.c)?;
        let om = channel_moments(tap)?;
        let mut gm = vec![T::ZERO; om.mean.len()];
        let mut gs = vec![T::ZERO; om.std.len()];
        total += vec_mse(&om.mean, &sm.mean, &mut gm);
        total += vec_mse(&om.std, &sm.std, &mut gs);
        grads.push(channel_moments_backward(tap, &om, &gm, &gs)?);
    }
    Ok((total, grads))
}

/// Sum over taps of the mean squared differences of per-channel means and
/// per-channel standard deviations.
pub fn style_loss<T: Scalar>(out_taps: &[Tensor4<T>], style_taps: &[Tensor4<T>]) -> Result<(T, Vec<Tensor4<T>>)> {
    let mut moments = Vec::with_capacity(style_taps.len());
    for (o, s) in out_taps.iter().zip(style_taps) {
        if o.dims().c != s.dims().c {
            return Err(Error::shape("style_loss", o.dims(), s.dims()));
        }
        moments.push(channel_moments(s)?);
    }
    style_loss_to_moments(out_taps, &moments)
}

/// Reconstruction error of a sketch transferred onto itself.
pub fn self_consistency_loss<T: Scalar>(style_image: &Tensor4<T>, net: &StyleNet<T>) -> Result<T> {
    let fs = net.encoder.encode(style_image)?;
    let t = adain(fs.features(), fs.features())?;
    let out = net.decoder.decode(&t)?;
    Ok(mse(&out, style_image)?.0)
}

/// Per-sample `sum(M' * (1 - out))`, averaged over the batch, and its
/// gradient w.r.t. `out`.
pub fn compositional_sparsity_loss<T: Scalar>(out: &Tensor4<T>, masks: &[&SparsityMask]) -> Result<(T, Tensor4<T>)> {
    let d = out.dims();
    if d.c != 1 || masks.len() != d.n {
        return Err(Error::shape(
            "compositional_sparsity_loss",
            format!("{} masks for a single-channel output", d.n),
            format!("{} masks for {d}", masks.len()),
        ));
    }
    let mut grad = Tensor4::zeros(d);
    let mut total = T::ZERO;
    let inv_n = T::ONE / T::from_usize(d.n.max(1));
    let p = d.plane();
    for (n, mask) in masks.iter().enumerate() {
        if mask.width() != d.w || mask.height() != d.h {
            return Err(Error::shape(
                "compositional_sparsity_loss",
                format!("{}x{} mask", d.w, d.h),
                format!("{}x{}", mask.width(), mask.height()),
            ));
        }
        let src = &out.data()[n * p..(n + 1) * p];
        let dst = &mut grad.data_mut()[n * p..(n + 1) * p];
        for ((g, &v), &m) in dst.iter_mut().zip(src).zip(mask.bits()) {
            if m {
                total += T::ONE - v;
                *g = -inv_n;
            }
        }
    }
    Ok((total * inv_n, grad))
}

/// How the sparsity term is reduced over pixels during training.
///
/// `Sum` is the unnormalized ink mass returned by
/// [`compositional_sparsity_loss`]; `Mean` divides it by the pixel count so
/// the term is on the scale of the mean-reduced ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SparseReduction {
    #[default]
    Sum,
    Mean,
}

impl SparseReduction {
    pub fn factor(self, pixels: usize) -> f64 {
        match self {
            SparseReduction::Sum => 1.0,
            SparseReduction::Mean => 1.0 / pixels.max(1) as f64,
        }
    }
}

/// Weights of the four terms. Defaults give the reference weighting.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossWeights {
    pub content: f64,
    pub style: f64,
    pub consist: f64,
    pub sparse: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            content: 1.0,
            style: 1.0,
            consist: 1.0,
            sparse: 10.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("content", self.content),
            ("style", self.style),
            ("consist", self.consist),
            ("sparse", self.sparse),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!(
                    "loss weight {name} = {v} must be finite and >= 0"
                )));
            }
        }
        Ok(())
    }
}

/// Per-term on/off switches for ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct LossToggles {
    pub content: bool,
    pub style: bool,
    pub consist: bool,
    pub sparse: bool,
}

impl Default for LossToggles {
    fn default() -> Self {
        Self::ALL
    }
}

impl LossToggles {
    pub const ALL: Self = Self {
        content: true,
        style: true,
        consist: true,
        sparse: true,
    };
    pub const NONE: Self = Self {
        content: false,
        style: false,
        consist: false,
        sparse: false,
    };
    pub const CONSIST_ONLY: Self = Self {
        content: false,
        style: false,
        consist: true,
        sparse: false,
    };
}

/// Unweighted term values plus the weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub content: f64,
    pub style: f64,
    pub consist: f64,
    pub sparse: f64,
    pub total: f64,
}

/// Effective weight of each term: its weight if toggled on, else 0.
pub fn effective_weights(w: &LossWeights, on: &LossToggles) -> LossWeights {
    let pick = |enabled: bool, v: f64| if enabled { v } else { 0.0 };
    LossWeights {
        content: pick(on.content, w.content),
        style: pick(on.style, w.style),
        consist: pick(on.consist, w.consist),
        sparse: pick(on.sparse, w.sparse),
    }
}

/// Weighted sum of the enabled terms. Disabled terms are reported as 0.
pub fn total_loss(terms: LossBreakdown, w: &LossWeights, on: &LossToggles) -> LossBreakdown {
    let e = effective_weights(w, on);
    let keep = |enabled: bool, v: f64| if enabled { v } else { 0.0 };
    let mut out = LossBreakdown {
        content: keep(on.content, terms.content),
        style: keep(on.style, terms.style),
        consist: keep(on.consist, terms.consist),
        sparse: keep(on.sparse, terms.sparse),
        total: 0.0,
    };
    out.total = e.content * out.content + e.style * out.style + e.consist * out.consist + e.sparse * out.sparse;
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Dims;

    #[test]
    fn mse_closed_forms() {
        let a = Tensor4::<f64>::filled(Dims::new(1, 2, 3, 3), 1.5);
        assert_eq!(content_loss(&a, &a).unwrap().0, 0.0);
        let b = a.map(|v| v - 1.0);
        assert_eq!(content_loss(&a, &b).unwrap().0, 1.0);
        assert!(content_loss(&a, &Tensor4::zeros(Dims::new(1, 1, 3, 3))).is_err());
    }

    #[test]
    fn style_loss_mean_shift() {
        let s = Tensor4::<f64>::from_fn(Dims::new(1, 3, 4, 4), |_, c, y, x| (c + y * x) as f64 * 0.1);
        let o = s.map(|v| v + 1.0);
        assert_eq!(
            style_loss(std::slice::from_ref(&s), std::slice::from_ref(&s))
                .unwrap()
                .0,
            0.0
        );
        let (v, _) = style_loss(&[o], &[s]).unwrap();
        assert!((v - 1.0).abs() < 1e-12, "{v}");
    }

    #[test]
    fn style_loss_permutation_invariant() {
        let s = Tensor4::<f64>::from_fn(Dims::new(1, 2, 4, 4), |_, c, y, x| {
            ((c * 5 + y * 3 + x * 7) % 11) as f64
        });
        let o = Tensor4::<f64>::from_fn(Dims::new(1, 2, 4, 4), |_, c, y, x| ((c + y * 4 + x) % 5) as f64);
        let flipped = Tensor4::<f64>::from_fn(o.dims(), |n, c, y, x| o.at(n, c, 3 - y, 3 - x));
        let a = style_loss(&[o], std::slice::from_ref(&s)).unwrap().0;
        let b = style_loss(&[flipped], &[s]).unwrap().0;
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn sparsity_closed_forms() {
        let mask = SparsityMask::ones(4, 3);
        let white = Tensor4::<f64>::filled(Dims::new(1, 1, 3, 4), 1.0);
        assert_eq!(compositional_sparsity_loss(&white, &[&mask]).unwrap().0, 0.0);
        let black = Tensor4::<f64>::zeros(Dims::new(1, 1, 3, 4));
        assert_eq!(compositional_sparsity_loss(&black, &[&mask]).unwrap().0, 12.0);
    }

    #[test]
    fn sparsity_respects_mask() {
        let mut bits = vec![true; 4];
        bits[0] = false;
        let mask = SparsityMask::new(2, 2, bits).unwrap();
        let base = Tensor4::<f64>::filled(Dims::new(1, 1, 2, 2), 0.8);
        let l0 = compositional_sparsity_loss(&base, &[&mask]).unwrap().0;
        let mut off = base.clone();
        off.data_mut()[0] = 0.1;
        assert_eq!(compositional_sparsity_loss(&off, &[&mask]).unwrap().0, l0);
        let mut on = base.clone();
        on.data_mut()[1] = 0.1;
        assert!(compositional_sparsity_loss(&on, &[&mask]).unwrap().0 > l0);
    }

    #[test]
    fn total_with_toggles() {
        let terms = LossBreakdown {
            content: 1.0,
            style: 2.0,
            consist: 3.0,
            sparse: 0.5,
            total: 0.0,
        };
        let w = LossWeights::default();
        assert_eq!((w.content, w.style, w.consist, w.sparse), (1.0, 1.0, 1.0, 10.0));
        assert_eq!(total_loss(terms, &w, &LossToggles::ALL).total, 11.0);
        assert_eq!(total_loss(terms, &w, &LossToggles::NONE).total, 0.0);
        assert!(LossWeights { sparse: -1.0, ..w }.validate().is_err());
    }
}

//! Decoder training with a frozen encoder.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::adam::AdamState;
use crate::error::{Error, Result};
use crate::maskops::SparsityMask;
use crate::moments::{channel_moments, Moments};
use crate::net::NetGrads;
use crate::raster::Raster;
use crate::tensor::{Scalar, Tensor4};

use super::checkpoint::{Checkpoint, TrainMeta};
use super::losses::{
    compositional_sparsity_loss, content_loss, effective_weights, mse, style_loss_to_moments, total_loss,
    LossBreakdown, LossToggles, LossWeights, SparseReduction,
};
use super::network::{adain, stream_rng, StyleNet, SAMPLING_STREAM};

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub weights: LossWeights,
    pub toggles: LossToggles,
    pub sparse_reduction: SparseReduction,
    pub iterations: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            weights: LossWeights::default(),
            toggles: LossToggles::ALL,
            sparse_reduction: SparseReduction::Sum,
            iterations: 500,
            batch_size: 8,
            lr: 1e-4,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.lr)));
        }
        Ok(())
    }
}

/// One training photo with its sparsity mask.
#[derive(Debug, Clone)]
pub struct ContentSample {
    pub photo: Raster,
    pub mask: SparsityMask,
}

#[derive(Debug, Clone, Default)]
pub struct TrainData {
    pub contents: Vec<ContentSample>,
    pub styles: Vec<Raster>,
}

impl TrainData {
    fn validate(&self, factor: usize) -> Result<()> {
        let Some(first) = self.contents.first() else {
            return Err(Error::Config("training needs at least one content image".into()));
        };
        if self.styles.is_empty() {
            return Err(Error::Config("training needs at least one style image".into()));
        }
        let (w, h) = (first.photo.width(), first.photo.height());
        for (i, c) in self.contents.iter().enumerate() {
            if !c.photo.same_dims(w, h) {
                return Err(Error::Data(format!(
                    "content image {i} is {}x{}, expected {w}x{h}",
                    c.photo.width(),
                    c.photo.height()
                )));
            }
            if c.mask.width() != w || c.mask.height() != h {
                return Err(Error::Data(format!("sparsity mask {i} does not match its photo")));
            }
        }
        for (i, r) in self
            .styles
            .iter()
            .map(|s| (s.width(), s.height()))
            .chain(std::iter::once((w, h)))
            .enumerate()
        {
            if r.0 % factor != 0 || r.1 % factor != 0 || r.0 == 0 || r.1 == 0 {
                let what = if i < self.styles.len() {
                    format!("style image {i}")
                } else {
                    "content images".to_string()
                };
                return Err(Error::Data(format!(
                    "{what} are {}x{}; training sizes must be multiples of {factor}",
                    r.0, r.1
                )));
            }
        }
        Ok(())
    }
}

/// One row of the loss log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRecord {
    pub iter: usize,
    pub terms: LossBreakdown,
}

pub const LOSS_LOG_HEADER: &str = "iter,L_content,L_style,L_consist,L_sparse,total";

/// Loss log as comma-separated text with a header row.
pub fn loss_log_csv(records: &[LossRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(LOSS_LOG_HEADER);
    out.push('\n');
    for r in records {
        let t = &r.terms;
        let _ = writeln!(
            out,
            "{},{:e},{:e},{:e},{:e},{:e}",
            r.iter, t.content, t.style, t.consist, t.sparse, t.total
        );
    }
    out
}

/// Trailing moving average; entry `i` averages `values[i + 1 - window ..= i]`.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(values.len().saturating_sub(window - 1));
    let mut sum: f64 = values.iter().take(window).sum();
    if values.len() < window {
        return out;
    }
    out.push(sum / window as f64);
    for i in window..values.len() {
        sum += values[i] - values[i - window];
        out.push(sum / window as f64);
    }
    out
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    /// Losses evaluated before each update.
    pub log: Vec<LossRecord>,
}

/// Frozen-encoder quantities for one style image.
struct StyleCache {
    image: Tensor4,
    features: Tensor4,
    moments: Vec<Moments>,
    self_target: Tensor4,
}

/// Yields content indices batch by batch from reshuffled permutations.
struct BatchSampler {
    order: Vec<usize>,
    pos: usize,
}

impl BatchSampler {
    fn next(&mut self, batch: usize, rng: &mut impl Rng) -> Vec<usize> {
        let mut out = Vec::with_capacity(batch);
        while out.len() < batch {
            if self.pos == self.order.len() {
                self.order.shuffle(rng);
                self.pos = 0;
            }
            out.push(self.order[self.pos]);
            self.pos += 1;
        }
        out
    }
}

fn flatten_grads(grads: &NetGrads, net: &StyleNet) -> Vec<Vec<f32>> {
    let mut out = Vec::new();
    for (layer, g) in net.decoder.net.layers.iter().zip(&grads.params) {
        if let crate::layers::LayerSpec::Conv2d(c) = layer {
            match g {
                Some(g) => {
                    out.push(g.kernel.data().to_vec());
                    out.push(g.bias.data().to_vec());
                }
                None => {
                    out.push(vec![0.0; c.kernel.len()]);
                    out.push(vec![0.0; c.bias.len()]);
                }
            }
        }
    }
    out
}

/// Everything one optimisation step needs besides the network.
pub struct StepInputs<'a, T: Scalar> {
    /// Encoded content photos of the batch, one `1 x C x h x w` tensor each.
    pub content_features: &'a [Tensor4<T>],
    pub style_image: &'a Tensor4<T>,
    pub style_features: &'a Tensor4<T>,
    /// Style moments at every encoder tap.
    pub style_moments: &'a [Moments<T>],
    /// `adain(style_features, style_features)`.
    pub self_target: &'a Tensor4<T>,
    /// One sparsity mask per content photo.
    pub masks: &'a [&'a SparsityMask],
}

fn scaled<T: Scalar>(mut t: Tensor4<T>, k: f64) -> Tensor4<T> {
    let k = T::from_f64(k);
    t.data_mut().iter_mut().for_each(|x| *x *= k);
    t
}

/// Unweighted loss terms and the decoder-parameter gradient of
/// `sum(w_i * L_i)`. Terms whose weight is zero are neither evaluated nor
/// differentiated; the gradient is `None` when every weight is zero.
pub fn step_gradients<T: Scalar>(
    net: &StyleNet<T>,
    inp: &StepInputs<'_, T>,
    w: &LossWeights,
    reduction: SparseReduction,
) -> Result<(LossBreakdown, Option<NetGrads<T>>)> {
    let mut terms = LossBreakdown::default();
    let mut grads: Option<NetGrads<T>> = None;

    if w.content > 0.0 || w.style > 0.0 || w.sparse > 0.0 {
        let fc = Tensor4::stack(inp.content_features)?;
        let t = adain(&fc, inp.style_features)?;
        let dt = net.decoder.decode_traced(&t)?;
        let mut grad_out = Tensor4::zeros(dt.output.dims());

        if w.content > 0.0 || w.style > 0.0 {
            let (trace, enc) = net.encoder.encode_traced(&dt.output)?;
            let mut tap_grads: Vec<Option<Tensor4<T>>> = vec![None; enc.taps.len()];
            if w.content > 0.0 {
                let (v, g) = content_loss(enc.features(), &t)?;
                terms.content = v.to_f64();
                *tap_grads.last_mut().expect("encoder has taps") = Some(scaled(g, w.content));
            }
            if w.style > 0.0 {
                let (v, gs) = style_loss_to_moments(&enc.taps, inp.style_moments)?;
                terms.style = v.to_f64();
                for (slot, g) in tap_grads.iter_mut().zip(gs) {
                    let g = scaled(g, w.style);
                    match slot {
                        Some(acc) => crate::net::add_into(acc, &g)?,
                        None => *slot = Some(g),
                    }
                }
            }
            grad_out = net.encoder.backward_input(&trace, &tap_grads)?;
        }
        if w.sparse > 0.0 {
            let (v, g) = compositional_sparsity_loss(&dt.output, inp.masks)?;
            let r = reduction.factor(dt.output.dims().plane());
            terms.sparse = v.to_f64() * r;
            crate::net::add_into(&mut grad_out, &scaled(g, w.sparse * r))?;
        }
        grads = Some(net.decoder.backward(&dt, &grad_out)?);
    }

    if w.consist > 0.0 {
        let dt = net.decoder.decode_traced(inp.self_target)?;
        let (v, g) = mse(&dt.output, inp.style_image)?;
        terms.consist = v.to_f64();
        let gc = net.decoder.backward(&dt, &scaled(g, w.consist))?;
        match &mut grads {
            Some(acc) => acc.accumulate(&gc)?,
            None => grads = Some(gc),
        }
    }
    Ok((terms, grads))
}

/// Train the decoder of a freshly initialized [`StyleNet::standard`].
pub fn train(cfg: &TrainConfig, data: &TrainData) -> Result<TrainOutcome> {
    train_from(StyleNet::standard(cfg.seed), cfg, data)
}

/// Train the decoder of `net`; the encoder stays fixed.
pub fn train_from(mut net: StyleNet, cfg: &TrainConfig, data: &TrainData) -> Result<TrainOutcome> {
    cfg.validate()?;
    data.validate(net.encoder.downsample_factor())?;
    let w = effective_weights(&cfg.weights, &cfg.toggles);
    let main_pass = w.content > 0.0 || w.style > 0.0 || w.sparse > 0.0;

    let content_images: Vec<Tensor4> = data.contents.iter().map(|c| c.photo.to_tensor()).collect();
    let content_features: Vec<Tensor4> = if main_pass {
        content_images
            .iter()
            .map(|x| Ok(net.encoder.encode(x)?.features().clone()))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let styles: Vec<StyleCache> = data
        .styles
        .iter()
        .map(|s| {
            let image = s.to_tensor();
            let enc = net.encoder.encode(&image)?;
            let moments = enc.taps.iter().map(channel_moments).collect::<Result<_>>()?;
            let features = enc.features().clone();
            let self_target = adain(&features, &features)?;
            Ok(StyleCache {
                image,
                features,
                moments,
                self_target,
            })
        })
        .collect::<Result<_>>()?;

    let mut rng = stream_rng(cfg.seed, SAMPLING_STREAM);
    let mut sampler = BatchSampler {
        order: (0..data.contents.len()).collect(),
        pos: data.contents.len(),
    };
    let mut adam = AdamState::with_lr(&net.decoder.net.params(), cfg.lr);
    let mut log = Vec::with_capacity(cfg.iterations);

    for iter in 0..cfg.iterations {
        let style = &styles[rng.random_range(0..styles.len())];
        let batch = sampler.next(cfg.batch_size, &mut rng);
        let feats: Vec<Tensor4> = if main_pass {
            batch.iter().map(|&i| content_features[i].clone()).collect()
        } else {
            Vec::new()
        };
        let masks: Vec<&SparsityMask> = batch.iter().map(|&i| &data.contents[i].mask).collect();
        let step = StepInputs {
            content_features: &feats,
            style_image: &style.image,
            style_features: &style.features,
            style_moments: &style.moments,
            self_target: &style.self_target,
            masks: &masks,
        };
        let (terms, grads) = step_gradients(&net, &step, &w, cfg.sparse_reduction)?;

        let terms = total_loss(terms, &cfg.weights, &cfg.toggles);
        if !terms.total.is_finite() {
            return Err(Error::Data(format!("non-finite loss at iteration {iter}")));
        }
        log.push(LossRecord { iter, terms });
        if iter % 100 == 0 {
            log::debug!("iter {iter}: total {:.6}", terms.total);
        }

        if let Some(g) = grads {
            let flat = flatten_grads(&g, &net);
            let refs: Vec<&[f32]> = flat.iter().map(Vec::as_slice).collect();
            adam.update(&mut net.decoder.net.params_mut(), &refs)?;
        }
    }

    let meta = TrainMeta {
        iteration: cfg.iterations as u64,
        seed: cfg.seed,
        weights: cfg.weights,
        toggles: cfg.toggles,
        sparse_reduction: cfg.sparse_reduction,
    };
    Ok(TrainOutcome {
        checkpoint: Checkpoint::new(net, meta)?,
        log,
    })
}

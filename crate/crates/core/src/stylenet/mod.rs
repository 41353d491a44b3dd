//! Global sketch synthesis.
//!
//! A fixed random-weight encoder `f` maps a photo and a style sketch to
//! feature maps; AdaIN moves the photo features onto the style moments; a
//! trained decoder `g` renders the result as a grayscale sketch.

mod checkpoint;
mod losses;
mod network;
mod train;

pub use checkpoint::{Checkpoint, TrainMeta, FORMAT_VERSION, MAGIC};
pub use losses::{
    compositional_sparsity_loss, content_loss, effective_weights, mse, self_consistency_loss, style_loss,
    style_loss_to_moments, total_loss, LossBreakdown, LossToggles, LossWeights, SparseReduction,
};
pub use network::{adain, Decoder, DecoderTrace, Encoded, Encoder, StyleNet, ENCODER_WIDTHS};
pub use train::{
    loss_log_csv, moving_average, step_gradients, train, train_from, ContentSample, LossRecord, StepInputs,
    TrainConfig, TrainData, TrainOutcome, LOSS_LOG_HEADER,
};

use crate::error::Result;
use crate::raster::{Raster, SketchImage};

fn pad_to_multiple(r: &Raster, f: usize) -> Raster {
    let up = |v: usize| v.max(1).div_ceil(f) * f;
    r.pad_white(up(r.width()), up(r.height()))
}

/// One forward pass `g(adain(f(photo), f(style)))`.
///
/// Inputs whose sides are not multiples of the encoder's downsampling factor
/// are padded with white on the right and bottom; the output is cropped back
/// to the photo's size.
pub fn synthesize(photo: &Raster, style: &Raster, checkpoint: &Checkpoint) -> Result<SketchImage> {
    let net = &checkpoint.net;
    let f = net.encoder.downsample_factor();
    let x = pad_to_multiple(photo, f).to_tensor();
    let s = pad_to_multiple(style, f).to_tensor();
    let out = net.transfer(&x, &s)?;
    let r = Raster::from_tensor(&out)?.crop(photo.width(), photo.height());
    Ok(SketchImage::grayscale(r))
}

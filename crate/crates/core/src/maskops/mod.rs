//! Mask-driven raster logic: sparsity masks, background removal and the
//! sketch post-processing stages (binarization, eyebrow fusion, eyeball
//! renewal, hair style fusion).

pub mod labels;

use log::warn;

use crate::error::{Error, Result};
use crate::raster::{Raster, SketchImage};
use crate::tensor::{Dims, Tensor4};

pub use labels::LabelMap;

/// Binary mask: `true` where ink is discouraged, `false` over protected
/// strokes (eyes, eyebrows, lips and component boundaries).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsityMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl SparsityMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::shape("SparsityMask::new", width * height, bits.len()));
        }
        Ok(Self { width, height, bits })
    }

    pub fn ones(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![true; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// `(1, 1, h, w)` tensor of 0/1 values.
    pub fn to_tensor(&self) -> Tensor4<f32> {
        Tensor4::from_vec(
            Dims::new(1, 1, self.height, self.width),
            self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        )
        .expect("mask dims are consistent")
    }
}

/// Sets background-labelled pixels to white.
pub fn remove_background(photo: &Raster, labels: &LabelMap) -> Result<Raster> {
    labels.check_dims("remove_background", photo.width(), photo.height())?;
    Ok(Raster::from_fn(photo.width(), photo.height(), |x, y| {
        if labels.get(x, y) == labels::BACKGROUND {
            1.0
        } else {
            photo.get(x, y)
        }
    }))
}

/// Erosion radius of the mask's ink-allowed (zero) set at 512 px resolution.
pub const SPARSITY_RADIUS_AT_512: f64 = 3.0;

/// Radius scaled to the label map size.
pub fn scaled_sparsity_radius(labels: &LabelMap) -> usize {
    let size = labels.width().max(labels.height()) as f64;
    (SPARSITY_RADIUS_AT_512 * size / 512.0).round() as usize
}

/// [`derive_sparsity_mask_with_radius`] at the default scaled radius.
pub fn derive_sparsity_mask(labels: &LabelMap) -> SparsityMask {
    derive_sparsity_mask_with_radius(labels, scaled_sparsity_radius(labels))
}

/// Zero over protected classes and 4-neighbour label boundaries, with the
/// zero set then dilated by a Euclidean disk of `radius` pixels.
pub fn derive_sparsity_mask_with_radius(labels: &LabelMap, radius: usize) -> SparsityMask {
    let (w, h) = (labels.width(), labels.height());
    let boundary = labels.boundary();
    let seeds: Vec<bool> = labels
        .ids()
        .iter()
        .zip(&boundary)
        .map(|(&id, &b)| b || labels::is_protected(id))
        .collect();
    let zero = dilate_disk(&seeds, w, h, radius);
    SparsityMask {
        width: w,
        height: h,
        bits: zero.into_iter().map(|z| !z).collect(),
    }
}

fn disk_offsets(radius: usize) -> Vec<(isize, isize)> {
    let r = radius as isize;
    let mut out = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r * r {
                out.push((dx, dy));
            }
        }
    }
    out
}

fn dilate_disk(set: &[bool], w: usize, h: usize, radius: usize) -> Vec<bool> {
    if radius == 0 {
        return set.to_vec();
    }
    let offsets = disk_offsets(radius);
    let mut out = vec![false; set.len()];
    for y in 0..h {
        for x in 0..w {
            if !set[y * w + x] {
                continue;
            }
            for &(dx, dy) in &offsets {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h {
                    out[ny as usize * w + nx as usize] = true;
                }
            }
        }
    }
    out
}

pub const BINARIZE_THRESHOLD: f32 = 0.5;

/// Values at or above `threshold` become white, the rest ink.
pub fn binarize(sketch: &Raster, threshold: f32) -> SketchImage {
    SketchImage::from_ink(sketch.width(), sketch.height(), |x, y| sketch.get(x, y) < threshold)
}

fn require_binary(sketch: &SketchImage, op: &str) -> Result<()> {
    if !sketch.is_binary() {
        return Err(Error::Usage(format!("{op} needs a binary sketch")));
    }
    Ok(())
}

/// Dilates the white region with a 3x3 square `iterations` times, which
/// thins every ink stroke by one pixel per side per iteration.
pub fn thin_ink(sketch: &SketchImage, iterations: usize) -> Result<SketchImage> {
    require_binary(sketch, "thin_ink")?;
    let (w, h) = (sketch.width(), sketch.height());
    let mut ink = sketch.ink_mask();
    for _ in 0..iterations {
        let prev = ink.clone();
        for y in 0..h {
            for x in 0..w {
                if !prev[y * w + x] {
                    continue;
                }
                let touches_white = (y.saturating_sub(1)..(y + 2).min(h))
                    .any(|ny| (x.saturating_sub(1)..(x + 2).min(w)).any(|nx| !prev[ny * w + nx]));
                if touches_white {
                    ink[y * w + x] = false;
                }
            }
        }
        if ink == prev {
            break;
        }
    }
    Ok(SketchImage::from_ink(w, h, |x, y| ink[y * w + x]))
}

/// Axis-aligned pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Rect {
    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && y >= self.y && x < self.x + self.width && y < self.y + self.height
    }

    fn fits(&self, width: usize, height: usize) -> bool {
        self.x + self.width <= width && self.y + self.height <= height
    }
}

/// A locally synthesized eyebrow and where it goes in the portrait.
#[derive(Debug, Clone, PartialEq)]
pub struct EyebrowPatch {
    pub rect: Rect,
    /// Grayscale or binary; binarized at [`BINARIZE_THRESHOLD`] before use.
    pub image: Raster,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FaceAnnotations {
    pub left_eye: Option<(usize, usize)>,
    pub right_eye: Option<(usize, usize)>,
    pub eyebrows: Vec<EyebrowPatch>,
}

impl FaceAnnotations {
    /// Checks every coordinate and rectangle against the image size.
    pub fn validate(&self, width: usize, height: usize) -> Result<()> {
        for (name, c) in [("left_eye", self.left_eye), ("right_eye", self.right_eye)] {
            if let Some((x, y)) = c {
                if x >= width || y >= height {
                    return Err(Error::Data(format!(
                        "{name} center ({x}, {y}) outside {width}x{height} image"
                    )));
                }
            }
        }
        for (i, p) in self.eyebrows.iter().enumerate() {
            if !p.rect.fits(width, height) {
                return Err(Error::Data(format!(
                    "eyebrow patch {i} rectangle {:?} outside {width}x{height} image",
                    p.rect
                )));
            }
            if !p.image.same_dims(p.rect.width, p.rect.height) {
                return Err(Error::Data(format!(
                    "eyebrow patch {i} is {}x{} but its rectangle is {}x{}",
                    p.image.width(),
                    p.image.height(),
                    p.rect.width,
                    p.rect.height
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FuseStatus {
    /// Number of eyebrow pixels replaced.
    Applied(usize),
    /// No patches were supplied; the sketch is returned unchanged.
    NoPatches,
}

/// Replaces eyebrow-labelled pixels with the thinned local patches.
pub fn fuse_eyebrows(
    global: &SketchImage,
    annotations: &FaceAnnotations,
    labels: &LabelMap,
    thin_iterations: usize,
) -> Result<(SketchImage, FuseStatus)> {
    require_binary(global, "fuse_eyebrows")?;
    let (w, h) = (global.width(), global.height());
    labels.check_dims("fuse_eyebrows", w, h)?;
    annotations.validate(w, h)?;
    if annotations.eyebrows.is_empty() {
        warn!("eyebrow fusion enabled but no eyebrow patches supplied");
        return Ok((global.clone(), FuseStatus::NoPatches));
    }
    let mut out = global.clone();
    let mut replaced = 0;
    for patch in &annotations.eyebrows {
        let thinned = thin_ink(&binarize(&patch.image, BINARIZE_THRESHOLD), thin_iterations)?;
        let r = patch.rect;
        for py in 0..r.height {
            for px in 0..r.width {
                let (x, y) = (r.x + px, r.y + py);
                if labels::is_eyebrow(labels.get(x, y)) {
                    out.set_binary(x, y, thinned.is_ink(px, py));
                    replaced += 1;
                }
            }
        }
    }
    Ok((out, FuseStatus::Applied(replaced)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EyeballConfig {
    /// An eye counts as blank when this disk around its center holds no ink.
    pub check_radius: usize,
    /// Spot radius as a fraction of image height.
    pub spot_fraction: f64,
}

impl Default for EyeballConfig {
    fn default() -> Self {
        Self {
            check_radius: 2,
            spot_fraction: 0.015,
        }
    }
}

impl EyeballConfig {
    pub fn spot_radius(&self, height: usize) -> usize {
        ((self.spot_fraction * height as f64).round() as usize).max(1)
    }
}

fn disk_pixels(cx: usize, cy: usize, radius: usize, w: usize, h: usize) -> impl Iterator<Item = (usize, usize)> {
    disk_offsets(radius).into_iter().filter_map(move |(dx, dy)| {
        let (x, y) = (cx as isize + dx, cy as isize + dy);
        (x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h).then_some((x as usize, y as usize))
    })
}

/// Stamps a filled spot at each eye center whose neighbourhood is blank.
pub fn renew_eyeballs(
    sketch: &SketchImage,
    annotations: &FaceAnnotations,
    config: &EyeballConfig,
) -> Result<SketchImage> {
    require_binary(sketch, "renew_eyeballs")?;
    let (w, h) = (sketch.width(), sketch.height());
    let mut out = sketch.clone();
    for (name, center) in [("left_eye", annotations.left_eye), ("right_eye", annotations.right_eye)] {
        let Some((cx, cy)) = center else { continue };
        if cx >= w || cy >= h {
            return Err(Error::Data(format!("{name} center ({cx}, {cy}) outside {w}x{h} image")));
        }
        let blank = disk_pixels(cx, cy, config.check_radius, w, h).all(|(x, y)| !sketch.is_ink(x, y));
        if blank {
            for (x, y) in disk_pixels(cx, cy, config.spot_radius(h), w, h) {
                out.set_binary(x, y, true);
            }
        }
    }
    Ok(out)
}

/// Takes hair-labelled pixels from `hair` and everything else from `primary`.
pub fn style_fuse_hair(primary: &SketchImage, hair: &SketchImage, labels: &LabelMap) -> Result<SketchImage> {
    require_binary(primary, "style_fuse_hair")?;
    require_binary(hair, "style_fuse_hair")?;
    let (w, h) = (primary.width(), primary.height());
    labels.check_dims("style_fuse_hair", w, h)?;
    labels.check_dims("style_fuse_hair", hair.width(), hair.height())?;
    Ok(SketchImage::from_ink(w, h, |x, y| {
        if labels.get(x, y) == labels::HAIR {
            hair.is_ink(x, y)
        } else {
            primary.is_ink(x, y)
        }
    }))
}

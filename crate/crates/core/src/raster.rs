//! Grayscale rasters with white at 1.0 and ink at 0.0.

use crate::error::{Error, Result};
use crate::tensor::{Dims, Tensor4};

/// Row-major grayscale image with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl Raster {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::shape(
                "Raster::new",
                format!("{} values for {width}x{height}", width * height),
                data.len(),
            ));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Data(format!("raster value {v} outside [0, 1]")));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        Self {
            width,
            height,
            data: vec![value.clamp(0.0, 1.0); width * height],
        }
    }

    pub fn white(width: usize, height: usize) -> Self {
        Self::filled(width, height, 1.0)
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y).clamp(0.0, 1.0));
            }
        }
        Self { width, height, data }
    }

    pub fn from_u8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(width, height, bytes.iter().map(|&b| f32::from(b) / 255.0).collect())
    }

    pub fn to_u8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f32) {
        self.data[y * self.width + x] = v.clamp(0.0, 1.0);
    }

    pub fn same_dims(&self, w: usize, h: usize) -> bool {
        self.width == w && self.height == h
    }

    /// `(1, 1, h, w)` tensor view of the image.
    pub fn to_tensor(&self) -> Tensor4<f32> {
        Tensor4::from_vec(Dims::new(1, 1, self.height, self.width), self.data.clone())
            .expect("raster dims are consistent")
    }

    /// Inverse of [`Raster::to_tensor`]; clamps into `[0, 1]`.
    pub fn from_tensor(t: &Tensor4<f32>) -> Result<Self> {
        let d = t.dims();
        if d.n != 1 || d.c != 1 {
            return Err(Error::shape("Raster::from_tensor", "1x1xHxW", d));
        }
        Ok(Self {
            width: d.w,
            height: d.h,
            data: t.data().iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        })
    }

    /// Extend to `width x height` by appending white columns and rows.
    pub fn pad_white(&self, width: usize, height: usize) -> Self {
        Self::from_fn(width, height, |x, y| {
            if x < self.width && y < self.height {
                self.get(x, y)
            } else {
                1.0
            }
        })
    }

    pub fn crop(&self, width: usize, height: usize) -> Self {
        Self::from_fn(width.min(self.width), height.min(self.height), |x, y| self.get(x, y))
    }

    /// Fraction of pixels darker than 0.5.
    pub fn ink_fraction(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().filter(|&&v| v < 0.5).count() as f64 / self.data.len() as f64
    }
}

/// A synthesized sketch, either grayscale or binarized.
#[derive(Debug, Clone, PartialEq)]
pub struct SketchImage {
    raster: Raster,
    binary: bool,
}

impl SketchImage {
    pub fn grayscale(raster: Raster) -> Self {
        Self { raster, binary: false }
    }

    /// Wrap a raster whose values are all exactly 0 or 1.
    pub fn binary(raster: Raster) -> Result<Self> {
        if let Some(v) = raster.data.iter().find(|&&v| v != 0.0 && v != 1.0) {
            return Err(Error::Data(format!("binary sketch contains non-binary value {v}")));
        }
        Ok(Self { raster, binary: true })
    }

    pub fn white(width: usize, height: usize) -> Self {
        Self {
            raster: Raster::white(width, height),
            binary: true,
        }
    }

    /// Binary sketch from an ink predicate.
    pub fn from_ink(width: usize, height: usize, mut ink: impl FnMut(usize, usize) -> bool) -> Self {
        Self {
            raster: Raster::from_fn(width, height, |x, y| if ink(x, y) { 0.0 } else { 1.0 }),
            binary: true,
        }
    }

    pub fn is_binary(&self) -> bool {
        self.binary
    }

    pub fn raster(&self) -> &Raster {
        &self.raster
    }

    pub fn into_raster(self) -> Raster {
        self.raster
    }

    pub fn width(&self) -> usize {
        self.raster.width
    }

    pub fn height(&self) -> usize {
        self.raster.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.raster.get(x, y)
    }

    #[inline]
    pub fn is_ink(&self, x: usize, y: usize) -> bool {
        self.raster.get(x, y) < 0.5
    }

    pub(crate) fn set_binary(&mut self, x: usize, y: usize, ink: bool) {
        debug_assert!(self.binary);
        self.raster.set(x, y, if ink { 0.0 } else { 1.0 });
    }

    /// Ink mask as a row-major bitmap (`true` = ink).
    pub fn ink_mask(&self) -> Vec<bool> {
        self.raster.data.iter().map(|&v| v < 0.5).collect()
    }

    pub fn ink_count(&self) -> usize {
        self.raster.data.iter().filter(|&&v| v < 0.5).count()
    }
}

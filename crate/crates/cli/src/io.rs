//! 8-bit PNG and annotation files.
//!
//! Label maps are grayscale PNGs whose pixel value is the class id.

use std::path::{Path, PathBuf};

use image::{GrayImage, ImageFormat};
use inkportrait_core::maskops::{EyebrowPatch, FaceAnnotations, LabelMap, Rect};
use inkportrait_core::raster::Raster;
use serde::Deserialize;

use crate::error::{CliError, CliResult};

fn decode_luma(path: &Path) -> CliResult<GrayImage> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let img = image::load_from_memory_with_format(&bytes, ImageFormat::Png)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(img.to_luma8())
}

pub fn read_raster(path: &Path) -> CliResult<Raster> {
    let img = decode_luma(path)?;
    Ok(Raster::from_u8(
        img.width() as usize,
        img.height() as usize,
        img.as_raw(),
    )?)
}

pub fn read_labels(path: &Path) -> CliResult<LabelMap> {
    let img = decode_luma(path)?;
    LabelMap::new(img.width() as usize, img.height() as usize, img.into_raw())
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn png_bytes(width: usize, height: usize, pixels: Vec<u8>) -> Vec<u8> {
    let img = GrayImage::from_raw(width as u32, height as u32, pixels).expect("pixel count matches dims");
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)
        .expect("in-memory PNG encoding");
    out.into_inner()
}

pub fn raster_png(r: &Raster) -> Vec<u8> {
    png_bytes(r.width(), r.height(), r.to_u8())
}

pub fn labels_png(l: &LabelMap) -> Vec<u8> {
    png_bytes(l.width(), l.height(), l.ids().to_vec())
}

pub fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBrow {
    x: usize,
    y: usize,
    width: usize,
    height: usize,
    /// Relative to the annotation file.
    image: PathBuf,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAnnotations {
    left_eye: Option<(usize, usize)>,
    right_eye: Option<(usize, usize)>,
    #[serde(default)]
    eyebrows: Vec<RawBrow>,
}

/// JSON annotations: eye centers and locally drawn eyebrow patches.
pub fn read_annotations(path: &Path) -> CliResult<FaceAnnotations> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let raw: RawAnnotations =
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let eyebrows = raw
        .eyebrows
        .into_iter()
        .map(|b| {
            Ok(EyebrowPatch {
                rect: Rect {
                    x: b.x,
                    y: b.y,
                    width: b.width,
                    height: b.height,
                },
                image: read_raster(&base.join(b.image))?,
            })
        })
        .collect::<CliResult<_>>()?;
    Ok(FaceAnnotations {
        left_eye: raw.left_eye,
        right_eye: raw.right_eye,
        eyebrows,
    })
}

//! Face-parsing label maps.
//!
//! Class ids follow the CelebAMask-HQ ordering used by common face parsers.

use crate::error::{Error, Result};

pub const NUM_CLASSES: u8 = 19;

pub const BACKGROUND: u8 = 0;
pub const SKIN: u8 = 1;
pub const LEFT_BROW: u8 = 2;
pub const RIGHT_BROW: u8 = 3;
pub const LEFT_EYE: u8 = 4;
pub const RIGHT_EYE: u8 = 5;
pub const EYEGLASSES: u8 = 6;
pub const LEFT_EAR: u8 = 7;
pub const RIGHT_EAR: u8 = 8;
pub const EARRING: u8 = 9;
pub const NOSE: u8 = 10;
pub const MOUTH: u8 = 11;
pub const UPPER_LIP: u8 = 12;
pub const LOWER_LIP: u8 = 13;
pub const NECK: u8 = 14;
pub const NECKLACE: u8 = 15;
pub const CLOTH: u8 = 16;
pub const HAIR: u8 = 17;
pub const HAT: u8 = 18;

pub const CLASS_NAMES: [&str; NUM_CLASSES as usize] = [
    "background",
    "skin",
    "left_brow",
    "right_brow",
    "left_eye",
    "right_eye",
    "eyeglasses",
    "left_ear",
    "right_ear",
    "earring",
    "nose",
    "mouth",
    "upper_lip",
    "lower_lip",
    "neck",
    "necklace",
    "cloth",
    "hair",
    "hat",
];

pub fn is_eyebrow(id: u8) -> bool {
    id == LEFT_BROW || id == RIGHT_BROW
}

pub fn is_eye(id: u8) -> bool {
    id == LEFT_EYE || id == RIGHT_EYE
}

pub fn is_lip(id: u8) -> bool {
    matches!(id, MOUTH | UPPER_LIP | LOWER_LIP)
}

/// Classes whose strokes carry likeness and are never sparsity-penalized.
pub fn is_protected(id: u8) -> bool {
    is_eye(id) || is_eyebrow(id) || is_lip(id)
}

/// Per-pixel class ids, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    ids: Vec<u8>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, ids: Vec<u8>) -> Result<Self> {
        if ids.len() != width * height {
            return Err(Error::shape(
                "LabelMap::new",
                format!("{} ids for {width}x{height}", width * height),
                ids.len(),
            ));
        }
        if let Some(pos) = ids.iter().position(|&id| id >= NUM_CLASSES) {
            return Err(Error::Data(format!(
                "unknown label id {} at pixel ({}, {})",
                ids[pos],
                pos % width.max(1),
                pos / width.max(1)
            )));
        }
        Ok(Self { width, height, ids })
    }

    pub fn uniform(width: usize, height: usize, id: u8) -> Result<Self> {
        Self::new(width, height, vec![id; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Result<Self> {
        let mut ids = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                ids.push(f(x, y));
            }
        }
        Self::new(width, height, ids)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn ids(&self) -> &[u8] {
        &self.ids
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.ids[y * self.width + x]
    }

    pub fn check_dims(&self, op: &'static str, width: usize, height: usize) -> Result<()> {
        if self.width != width || self.height != height {
            return Err(Error::shape(
                op,
                format!("{}x{} (label map)", self.width, self.height),
                format!("{width}x{height}"),
            ));
        }
        Ok(())
    }

    /// `true` where some 4-neighbour carries a different label.
    pub fn boundary(&self) -> Vec<bool> {
        let (w, h) = (self.width, self.height);
        let mut out = vec![false; w * h];
        for y in 0..h {
            for x in 0..w {
                let id = self.get(x, y);
                let differs = (x > 0 && self.get(x - 1, y) != id)
                    || (x + 1 < w && self.get(x + 1, y) != id)
                    || (y > 0 && self.get(x, y - 1) != id)
                    || (y + 1 < h && self.get(x, y + 1) != id);
                out[y * w + x] = differs;
            }
        }
        out
    }
}

//! Procedural test data: aligned face photos with matching label maps and
//! annotations, and line-drawing style sketches.
//!
//! Everything is a pure function of its arguments, so fixtures can be
//! regenerated byte-for-byte.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::maskops::labels::*;
use crate::maskops::{EyebrowPatch, FaceAnnotations, Rect};
use crate::raster::Raster;

/// Geometry of a synthetic face in unit coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceParams {
    pub center: (f64, f64),
    pub radii: (f64, f64),
    pub eye_dx: f64,
    pub eye_y: f64,
    pub eye_radii: (f64, f64),
    pub brow_y: f64,
    pub mouth_y: f64,
    pub mouth_half_width: f64,
    pub skin_tone: f64,
    pub hair_tone: f64,
}

impl Default for FaceParams {
    fn default() -> Self {
        Self {
            center: (0.5, 0.54),
            radii: (0.27, 0.33),
            eye_dx: 0.11,
            eye_y: 0.47,
            eye_radii: (0.055, 0.03),
            brow_y: 0.39,
            mouth_y: 0.70,
            mouth_half_width: 0.09,
            skin_tone: 0.72,
            hair_tone: 0.22,
        }
    }
}

impl FaceParams {
    /// Default geometry jittered by a seeded generator; seed 0 is the default.
    pub fn jittered(seed: u64) -> Self {
        let base = Self::default();
        if seed == 0 {
            return base;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut j = |a: f64| rng.random_range(-a..=a);
        Self {
            center: (base.center.0 + j(0.03), base.center.1 + j(0.02)),
            radii: (base.radii.0 + j(0.03), base.radii.1 + j(0.03)),
            eye_dx: base.eye_dx + j(0.015),
            eye_y: base.eye_y + j(0.015),
            eye_radii: (base.eye_radii.0 + j(0.01), base.eye_radii.1 + j(0.006)),
            brow_y: base.brow_y + j(0.01),
            mouth_y: base.mouth_y + j(0.02),
            mouth_half_width: base.mouth_half_width + j(0.02),
            skin_tone: base.skin_tone + j(0.08),
            hair_tone: base.hair_tone + j(0.1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaceFixture {
    pub photo: Raster,
    pub labels: LabelMap,
    pub annotations: FaceAnnotations,
}

fn in_ellipse(u: f64, v: f64, c: (f64, f64), r: (f64, f64)) -> bool {
    let (a, b) = ((u - c.0) / r.0, (v - c.1) / r.1);
    a * a + b * b <= 1.0
}

fn brow_rect(p: &FaceParams, side: f64) -> (f64, f64, f64, f64) {
    let cx = p.center.0 + side * p.eye_dx;
    (cx - 0.07, p.brow_y - 0.02, cx + 0.07, p.brow_y + 0.02)
}

fn label_at(p: &FaceParams, u: f64, v: f64) -> u8 {
    let (cx, cy) = p.center;
    for (side, eye, brow) in [(-1.0, LEFT_EYE, LEFT_BROW), (1.0, RIGHT_EYE, RIGHT_BROW)] {
        if in_ellipse(u, v, (cx + side * p.eye_dx, p.eye_y), p.eye_radii) {
            return eye;
        }
        let (x0, y0, x1, y1) = brow_rect(p, side);
        if u >= x0 && u <= x1 && v >= y0 && v <= y1 {
            return brow;
        }
    }
    let mw = p.mouth_half_width;
    if in_ellipse(u, v, (cx, p.mouth_y), (mw, 0.035)) {
        return if (v - p.mouth_y).abs() < 0.006 {
            MOUTH
        } else if v < p.mouth_y {
            UPPER_LIP
        } else {
            LOWER_LIP
        };
    }
    if in_ellipse(u, v, (cx, (p.eye_y + p.mouth_y) / 2.0 + 0.01), (0.035, 0.07)) {
        return NOSE;
    }
    if in_ellipse(u, v, (cx, cy), p.radii) {
        let top = cy - p.radii.1 * 0.55;
        return if v < top { HAIR } else { SKIN };
    }
    if in_ellipse(u, v, (cx, cy - 0.06), (p.radii.0 * 1.25, p.radii.1 * 1.05)) && v < cy + 0.05 {
        return HAIR;
    }
    if (u - cx).abs() < p.radii.0 * 0.45 && v > cy && v < 1.0 {
        return NECK;
    }
    BACKGROUND
}

fn tone(p: &FaceParams, id: u8, u: f64, v: f64) -> f64 {
    let (cx, cy) = p.center;
    match id {
        BACKGROUND => 0.93 - 0.05 * v,
        SKIN | NOSE | NECK => {
            let shade = ((u - cx).powi(2) + (v - cy).powi(2)).sqrt();
            let base = if id == NECK { p.skin_tone - 0.06 } else { p.skin_tone };
            base - 0.35 * shade + if id == NOSE { -0.08 } else { 0.0 }
        }
        HAIR => p.hair_tone + 0.08 * ((u * 40.0 + v * 9.0).sin()),
        LEFT_BROW | RIGHT_BROW => 0.14,
        LEFT_EYE | RIGHT_EYE => {
            let side = if u < cx { -1.0 } else { 1.0 };
            let d = ((u - cx - side * p.eye_dx).powi(2) + (v - p.eye_y).powi(2)).sqrt();
            if d < p.eye_radii.1 * 0.8 {
                0.05
            } else {
                0.85
            }
        }
        MOUTH => 0.15,
        UPPER_LIP | LOWER_LIP => 0.45,
        _ => 0.5,
    }
}

/// Synthetic aligned face photo with its label map and annotations.
///
/// Eyebrow patches are omitted; see [`eyebrow_patches`].
pub fn face(size: usize, seed: u64) -> FaceFixture {
    let p = FaceParams::jittered(seed);
    let s = size as f64;
    let coord = |x: usize| (x as f64 + 0.5) / s;
    let labels =
        LabelMap::from_fn(size, size, |x, y| label_at(&p, coord(x), coord(y))).expect("fixture labels are valid");
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let photo = Raster::from_fn(size, size, |x, y| {
        let (u, v) = (coord(x), coord(y));
        let noise: f64 = rng.random_range(-0.02..=0.02);
        (tone(&p, labels.get(x, y), u, v) + noise) as f32
    });
    let px = |u: f64| ((u * s) as usize).min(size - 1);
    let annotations = FaceAnnotations {
        left_eye: Some((px(p.center.0 - p.eye_dx), px(p.eye_y))),
        right_eye: Some((px(p.center.0 + p.eye_dx), px(p.eye_y))),
        eyebrows: Vec::new(),
    };
    FaceFixture {
        photo,
        labels,
        annotations,
    }
}

/// Locally drawn eyebrow patches covering both brow regions of [`face`].
pub fn eyebrow_patches(size: usize, seed: u64) -> Vec<EyebrowPatch> {
    let p = FaceParams::jittered(seed);
    let s = size as f64;
    [-1.0, 1.0]
        .into_iter()
        .map(|side| {
            let (x0, y0, x1, y1) = brow_rect(&p, side);
            let (rx, ry) = ((x0 * s).floor() as usize, (y0 * s).floor() as usize);
            let (rw, rh) = (
                ((x1 * s).ceil() as usize).min(size) - rx,
                ((y1 * s).ceil() as usize).min(size) - ry,
            );
            let image = Raster::from_fn(rw, rh, |x, y| {
                let t = x as f64 / rw.max(1) as f64;
                let arch = (rh as f64 - 1.0) * (0.7 - 0.4 * (std::f64::consts::PI * t).sin());
                if (y as f64 - arch).abs() < 0.9 {
                    0.1
                } else {
                    0.95
                }
            });
            EyebrowPatch {
                rect: Rect {
                    x: rx,
                    y: ry,
                    width: rw,
                    height: rh,
                },
                image,
            }
        })
        .collect()
}

fn stamp(ink: &mut [bool], size: usize, x: f64, y: f64, radius: f64) {
    let r = radius.ceil() as isize;
    let (xi, yi) = (x.round() as isize, y.round() as isize);
    for dy in -r..=r {
        for dx in -r..=r {
            let (px, py) = (xi + dx, yi + dy);
            if px < 0 || py < 0 || px as usize >= size || py as usize >= size {
                continue;
            }
            if ((dx * dx + dy * dy) as f64) <= radius * radius {
                ink[py as usize * size + px as usize] = true;
            }
        }
    }
}

fn draw_ellipse(ink: &mut [bool], size: usize, c: (f64, f64), r: (f64, f64), arc: (f64, f64), pen: f64) {
    let s = size as f64;
    let steps = (4.0 * s * (r.0 + r.1)).ceil() as usize + 8;
    for i in 0..=steps {
        let a = arc.0 + (arc.1 - arc.0) * i as f64 / steps as f64;
        stamp(ink, size, (c.0 + r.0 * a.cos()) * s, (c.1 + r.1 * a.sin()) * s, pen);
    }
}

fn draw_line(ink: &mut [bool], size: usize, a: (f64, f64), b: (f64, f64), pen: f64) {
    let s = size as f64;
    let steps = (2.0 * s * ((b.0 - a.0).abs() + (b.1 - a.1).abs())).ceil() as usize + 2;
    for i in 0..=steps {
        let t = i as f64 / steps as f64;
        stamp(ink, size, (a.0 + t * (b.0 - a.0)) * s, (a.1 + t * (b.1 - a.1)) * s, pen);
    }
}

/// Number of distinct built-in sketch styles.
pub const SKETCH_STYLES: usize = 3;

/// Binary line drawing of a face in one of [`SKETCH_STYLES`] styles.
///
/// Style 0 is a thin sparse outline, style 1 uses a heavier pen with hair
/// hatching, style 2 adds a shaded jaw and filled pupils.
pub fn line_sketch(size: usize, style: usize) -> Raster {
    use std::f64::consts::PI;
    let p = FaceParams::default();
    let mut ink = vec![false; size * size];
    let pen = match style % SKETCH_STYLES {
        0 => 0.0,
        1 => 0.8,
        _ => 0.5,
    };
    let (cx, cy) = p.center;
    draw_ellipse(&mut ink, size, (cx, cy), p.radii, (0.15 * PI, 0.85 * PI), pen);
    draw_ellipse(
        &mut ink,
        size,
        (cx, cy - 0.06),
        (p.radii.0 * 1.2, p.radii.1 * 1.0),
        (1.05 * PI, 1.95 * PI),
        pen,
    );
    for side in [-1.0, 1.0] {
        let ex = cx + side * p.eye_dx;
        draw_ellipse(&mut ink, size, (ex, p.eye_y), p.eye_radii, (0.0, 2.0 * PI), pen);
        draw_line(
            &mut ink,
            size,
            (ex - 0.06, p.brow_y + 0.01),
            (ex + 0.06, p.brow_y - 0.005),
            pen,
        );
        if style % SKETCH_STYLES == 2 {
            stamp(
                &mut ink,
                size,
                ex * size as f64,
                p.eye_y * size as f64,
                0.015 * size as f64,
            );
        }
    }
    draw_line(&mut ink, size, (cx, p.eye_y + 0.05), (cx - 0.02, p.mouth_y - 0.08), pen);
    draw_line(
        &mut ink,
        size,
        (cx - 0.02, p.mouth_y - 0.08),
        (cx + 0.02, p.mouth_y - 0.07),
        pen,
    );
    draw_line(
        &mut ink,
        size,
        (cx - p.mouth_half_width, p.mouth_y),
        (cx + p.mouth_half_width, p.mouth_y),
        pen,
    );
    match style % SKETCH_STYLES {
        1 => {
            for k in 0..5 {
                let x = cx - 0.2 + 0.1 * k as f64;
                draw_line(&mut ink, size, (x, 0.16), (x + 0.05, 0.3), pen);
            }
        }
        2 => {
            for k in 0..4 {
                let x = cx - 0.16 + 0.03 * k as f64;
                draw_line(&mut ink, size, (x, 0.72), (x + 0.04, 0.8), pen);
            }
        }
        _ => {}
    }
    Raster::from_fn(size, size, |x, y| if ink[y * size + x] { 0.0 } else { 1.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn face_contains_every_protected_region() {
        let f = face(64, 0);
        for id in [
            LEFT_EYE, RIGHT_EYE, LEFT_BROW, RIGHT_BROW, UPPER_LIP, LOWER_LIP, SKIN, HAIR,
        ] {
            assert!(f.labels.ids().contains(&id), "missing {}", CLASS_NAMES[id as usize]);
        }
        let (lx, ly) = f.annotations.left_eye.unwrap();
        assert_eq!(f.labels.get(lx, ly), LEFT_EYE);
    }

    #[test]
    fn fixtures_are_deterministic_and_jittered() {
        assert_eq!(face(32, 3), face(32, 3));
        assert_ne!(face(32, 3).photo, face(32, 4).photo);
        assert_eq!(line_sketch(32, 1), line_sketch(32, 1));
    }

    #[test]
    fn sketches_are_binary_and_sparse() {
        for style in 0..SKETCH_STYLES {
            let s = line_sketch(64, style);
            assert!(s.data().iter().all(|&v| v == 0.0 || v == 1.0));
            let f = s.ink_fraction();
            assert!(f > 0.02 && f < 0.35, "style {style}: {f}");
        }
        assert_ne!(line_sketch(64, 0), line_sketch(64, 1));
    }

    #[test]
    fn eyebrow_patches_fit() {
        let f = face(64, 2);
        let ann = FaceAnnotations {
            eyebrows: eyebrow_patches(64, 2),
            ..f.annotations
        };
        ann.validate(64, 64).unwrap();
    }
}

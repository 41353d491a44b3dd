//! Outside-in fills for solid eye and eyebrow marks.

use crate::error::Result;
use crate::maskops::labels::{is_eye, is_eyebrow};
use crate::maskops::LabelMap;
use crate::raster::SketchImage;

use super::{Bitmap, Pixel, Stroke, StrokeKind, NEIGHBOURS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FillConfig {
    /// Regions need more than this many peel layers to be filled; thinner
    /// marks are left to line tracing.
    pub pen_width_px: usize,
}

impl Default for FillConfig {
    fn default() -> Self {
        Self { pen_width_px: 1 }
    }
}

const FOUR: [(isize, isize); 4] = [(0, -1), (1, 0), (0, 1), (-1, 0)];

/// Successive boundary layers: each holds the remaining pixels that have a
/// 4-neighbour outside the remaining set.
pub fn peel_layers(region: &Bitmap) -> Vec<Bitmap> {
    let mut rest = region.clone();
    let mut layers = Vec::new();
    while rest.count() > 0 {
        let layer = Bitmap::from_fn(rest.width(), rest.height(), |x, y| {
            rest.get(x, y)
                && FOUR
                    .iter()
                    .any(|&(dx, dy)| !rest.get_signed(x as isize + dx, y as isize + dy))
        });
        for (x, y) in layer.pixels() {
            rest.set(x, y, false);
        }
        layers.push(layer);
    }
    layers
}

/// Ink inside eye and eyebrow labels, restricted to 8-connected components
/// thicker than the pen.
pub fn fill_regions(binary: &SketchImage, labels: &LabelMap, cfg: &FillConfig) -> Result<Bitmap> {
    let (w, h) = (binary.width(), binary.height());
    labels.check_dims("fill_regions", w, h)?;
    let cand = Bitmap::from_fn(w, h, |x, y| {
        let id = labels.get(x, y);
        binary.is_ink(x, y) && (is_eye(id) || is_eyebrow(id))
    });
    let (ids, n) = cand.label_components8();
    let mut out = Bitmap::new(w, h);
    for c in 0..n {
        let region = Bitmap::from_fn(w, h, |x, y| ids[y * w + x] == c);
        if peel_layers(&region).len() > cfg.pen_width_px {
            for (x, y) in region.pixels() {
                out.set(x, y, true);
            }
        }
    }
    Ok(out)
}

/// Order one layer into closed walks. Each step goes to the unvisited
/// neighbour with the fewest onward options, preferring 4-neighbours and
/// then clockwise order; a new walk starts when a walk gets stuck.
fn layer_loops(layer: &Bitmap) -> Vec<Vec<Pixel>> {
    let mut visited = Bitmap::new(layer.width(), layer.height());
    let unvisited_nbrs = |visited: &Bitmap, (x, y): Pixel| -> Vec<(usize, Pixel)> {
        (0..8)
            .filter_map(|k| {
                let (nx, ny) = (x as isize + NEIGHBOURS[k].0, y as isize + NEIGHBOURS[k].1);
                (layer.get_signed(nx, ny) && !visited.get_signed(nx, ny)).then_some((k, (nx as usize, ny as usize)))
            })
            .collect()
    };
    let mut out = Vec::new();
    for start in layer.pixels() {
        if visited.get(start.0, start.1) {
            continue;
        }
        visited.set(start.0, start.1, true);
        let mut walk = vec![start];
        let mut cur = start;
        loop {
            let cands = unvisited_nbrs(&visited, cur);
            let Some(&(_, next)) = cands.iter().min_by_key(|&&(k, p)| {
                let onward = unvisited_nbrs(&visited, p).iter().filter(|&&(_, q)| q != cur).count();
                (onward, k % 2, k)
            }) else {
                break;
            };
            visited.set(next.0, next.1, true);
            walk.push(next);
            cur = next;
        }
        out.push(walk);
    }
    out
}

/// Fill loops for every 8-connected region of `mask`, outermost layer first.
pub(crate) fn loops_for_mask(mask: &Bitmap) -> Vec<Stroke> {
    let (w, h) = (mask.width(), mask.height());
    let (ids, n) = mask.label_components8();
    let mut strokes = Vec::new();
    for c in 0..n {
        let region = Bitmap::from_fn(w, h, |x, y| ids[y * w + x] == c);
        for layer in peel_layers(&region) {
            for points in layer_loops(&layer) {
                strokes.push(Stroke {
                    kind: StrokeKind::FillLoop,
                    points,
                });
            }
        }
    }
    strokes
}

/// Fill loops for the thick eye and eyebrow marks of a binary sketch.
pub fn plan_fills(binary: &SketchImage, labels: &LabelMap, cfg: &FillConfig) -> Result<Vec<Stroke>> {
    Ok(loops_for_mask(&fill_regions(binary, labels, cfg)?))
}

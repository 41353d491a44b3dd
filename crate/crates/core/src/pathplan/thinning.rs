//! Zhang–Suen thinning.

use crate::raster::SketchImage;

use super::{Bitmap, Skeleton};

/// Neighbours P2..P9 in the usual order: N, NE, E, SE, S, SW, W, NW.
const RING: [(isize, isize); 8] = [(0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1)];

fn ring(b: &Bitmap, x: usize, y: usize) -> [bool; 8] {
    RING.map(|(dx, dy)| b.get_signed(x as isize + dx, y as isize + dy))
}

/// One Zhang–Suen sub-iteration; returns whether anything was removed.
fn sub_iteration(b: &mut Bitmap, first: bool) -> bool {
    let mut remove = Vec::new();
    for y in 0..b.height() {
        for x in 0..b.width() {
            if !b.get(x, y) {
                continue;
            }
            let p = ring(b, x, y);
            let count = p.iter().filter(|&&v| v).count();
            if !(2..=6).contains(&count) {
                continue;
            }
            let transitions = (0..8).filter(|&i| !p[i] && p[(i + 1) % 8]).count();
            if transitions != 1 {
                continue;
            }
            // p[0]=P2 (N), p[2]=P4 (E), p[4]=P6 (S), p[6]=P8 (W)
            let ok = if first {
                !(p[0] && p[2] && p[4]) && !(p[2] && p[4] && p[6])
            } else {
                !(p[0] && p[2] && p[6]) && !(p[0] && p[4] && p[6])
            };
            if ok {
                remove.push((x, y));
            }
        }
    }
    for &(x, y) in &remove {
        b.set(x, y, false);
    }
    !remove.is_empty()
}

/// Thin a foreground bitmap to its Zhang–Suen fixed point.
pub fn zhang_suen(mut b: Bitmap) -> Bitmap {
    loop {
        let a = sub_iteration(&mut b, true);
        let c = sub_iteration(&mut b, false);
        if !a && !c {
            return b;
        }
    }
}

/// Yokoi connectivity number for 8-connected foreground; a pixel whose
/// number is 1 can be removed without changing the topology.
fn connectivity8(b: &Bitmap, x: usize, y: usize) -> usize {
    let p = ring(b, x, y).map(|v| !v);
    [0, 2, 4, 6]
        .iter()
        .filter(|&&k| p[k] && !(p[(k + 1) % 8] && p[(k + 2) % 8]))
        .count()
}

/// Remove one pixel from every fully set 2x2 block, preferring pixels
/// that are topologically simple. Zhang–Suen can leave such blocks where
/// several strokes meet.
pub fn break_full_blocks(mut b: Bitmap) -> Bitmap {
    while let Some((x, y)) = super::find_full_block(&b) {
        let corners = [(x, y), (x + 1, y), (x, y + 1), (x + 1, y + 1)];
        let (cx, cy) = corners
            .into_iter()
            .find(|&(cx, cy)| connectivity8(&b, cx, cy) == 1)
            .unwrap_or(corners[0]);
        b.set(cx, cy, false);
    }
    b
}

/// Zhang–Suen thinning followed by [`break_full_blocks`].
pub fn thin(b: Bitmap) -> Bitmap {
    break_full_blocks(zhang_suen(b))
}

/// Skeleton of the ink (value < 0.5) of a sketch.
pub fn skeletonize(sketch: &SketchImage) -> Skeleton {
    Skeleton::from_bitmap(thin(Bitmap::ink_of(sketch)))
}

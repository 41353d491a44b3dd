//! Independent reference implementations.

use inkportrait_core::maskops::labels::is_protected;
use inkportrait_core::maskops::LabelMap;
use inkportrait_core::pathplan::{Bitmap, Pixel, Stroke};

use super::Rng;

/// Zhang–Suen thinning on a zero-bordered byte grid, written from the
/// textbook conditions:
///
/// * `2 <= B(P1) <= 6` (foreground neighbours),
/// * `A(P1) == 1` (0→1 transitions in P2, P3, ..., P9, P2),
/// * first pass: `P2*P4*P6 == 0` and `P4*P6*P8 == 0`,
/// * second pass: `P2*P4*P8 == 0` and `P2*P6*P8 == 0`.
pub fn zhang_suen_oracle(img: &Bitmap) -> Bitmap {
    let (w, h) = (img.width(), img.height());
    let (gw, gh) = (w + 2, h + 2);
    let mut g = vec![0u8; gw * gh];
    for y in 0..h {
        for x in 0..w {
            g[(y + 1) * gw + x + 1] = u8::from(img.get(x, y));
        }
    }
    loop {
        let mut changed = false;
        for pass in 0..2 {
            let mut kill = Vec::new();
            for y in 1..gh - 1 {
                for x in 1..gw - 1 {
                    if g[y * gw + x] == 0 {
                        continue;
                    }
                    let at = |dx: isize, dy: isize| g[(y as isize + dy) as usize * gw + (x as isize + dx) as usize];
                    let (p2, p3, p4, p5) = (at(0, -1), at(1, -1), at(1, 0), at(1, 1));
                    let (p6, p7, p8, p9) = (at(0, 1), at(-1, 1), at(-1, 0), at(-1, -1));
                    let seq = [p2, p3, p4, p5, p6, p7, p8, p9, p2];
                    let b: u8 = seq[..8].iter().sum();
                    let a = seq.windows(2).filter(|s| s[0] == 0 && s[1] == 1).count();
                    let (c1, c2) = if pass == 0 {
                        (p2 * p4 * p6, p4 * p6 * p8)
                    } else {
                        (p2 * p4 * p8, p2 * p6 * p8)
                    };
                    if (2..=6).contains(&b) && a == 1 && c1 == 0 && c2 == 0 {
                        kill.push(y * gw + x);
                    }
                }
            }
            changed |= !kill.is_empty();
            for i in kill {
                g[i] = 0;
            }
        }
        if !changed {
            break;
        }
    }
    Bitmap::from_fn(w, h, |x, y| g[(y + 1) * gw + x + 1] == 1)
}

/// True where some fully set 2x2 block exists.
pub fn has_full_block(b: &Bitmap) -> bool {
    (0..b.height().saturating_sub(1)).any(|y| {
        (0..b.width().saturating_sub(1))
            .any(|x| b.get(x, y) && b.get(x + 1, y) && b.get(x, y + 1) && b.get(x + 1, y + 1))
    })
}

pub const SHAPE_SIZE: usize = 28;

/// Ten thick binary shapes on a 28x28 canvas.
pub fn shape_suite() -> Vec<(&'static str, Bitmap)> {
    let n = SHAPE_SIZE;
    let f = |g: &dyn Fn(i64, i64) -> bool| Bitmap::from_fn(n, n, |x, y| g(x as i64, y as i64));
    let disk = |cx: i64, cy: i64, r: i64| move |x: i64, y: i64| (x - cx).pow(2) + (y - cy).pow(2) <= r * r;
    let rect = |x0: i64, y0: i64, x1: i64, y1: i64| move |x: i64, y: i64| x >= x0 && x <= x1 && y >= y0 && y <= y1;
    vec![
        ("rectangle", f(&rect(4, 9, 22, 16))),
        ("bar", f(&rect(3, 12, 24, 14))),
        ("diagonal", f(&|x, y| (x - y).abs() <= 1 && (3..=24).contains(&x))),
        (
            "ring",
            f(&|x, y| {
                let d = (x - 13).pow(2) + (y - 13).pow(2);
                (36..=81).contains(&d)
            }),
        ),
        ("ell", f(&|x, y| rect(5, 4, 8, 22)(x, y) || rect(5, 19, 21, 22)(x, y))),
        ("tee", f(&|x, y| rect(3, 4, 23, 7)(x, y) || rect(12, 4, 15, 23)(x, y))),
        (
            "plus",
            f(&|x, y| rect(4, 12, 22, 15)(x, y) || rect(12, 4, 15, 22)(x, y)),
        ),
        ("disk", f(&disk(13, 13, 7))),
        ("two blobs", f(&|x, y| rect(2, 3, 9, 9)(x, y) || disk(19, 18, 5)(x, y))),
        (
            "zigzag",
            f(&|x, y| {
                let t = (x % 12 - 6).abs();
                (3..=24).contains(&x) && (y - 8 - t).abs() <= 1
            }),
        ),
    ]
}

/// M' built pixel by pixel: ink is discouraged at `p` unless some pixel
/// within Euclidean distance `r` is protected or differs from a 4-neighbour.
pub fn brute_sparsity_mask(labels: &LabelMap, r: usize) -> Vec<bool> {
    let (w, h) = (labels.width() as i64, labels.height() as i64);
    let id = |x: i64, y: i64| labels.get(x as usize, y as usize);
    let seed = |x: i64, y: i64| {
        let c = id(x, y);
        is_protected(c)
            || [(1, 0), (-1, 0), (0, 1), (0, -1)].iter().any(|&(dx, dy)| {
                let (nx, ny) = (x + dx, y + dy);
                nx >= 0 && ny >= 0 && nx < w && ny < h && id(nx, ny) != c
            })
    };
    let r = r as i64;
    let mut out = Vec::with_capacity((w * h) as usize);
    for y in 0..h {
        for x in 0..w {
            let mut near = false;
            for qy in (y - r).max(0)..=(y + r).min(h - 1) {
                for qx in (x - r).max(0)..=(x + r).min(w - 1) {
                    if (qx - x).pow(2) + (qy - y).pow(2) <= r * r && seed(qx, qy) {
                        near = true;
                    }
                }
            }
            out.push(!near);
        }
    }
    out
}

fn d(a: Pixel, b: Pixel) -> f64 {
    (a.0 as f64 - b.0 as f64).hypot(a.1 as f64 - b.1 as f64)
}

fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = (1..p.len()).rev().find(|&i| p[i - 1] < p[i]) else {
        return false;
    };
    let j = (i..p.len())
        .rev()
        .find(|&j| p[j] > p[i - 1])
        .expect("pivot has a successor");
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Minimum pen-up travel from (0, 0) over every visiting order; for each
/// order the best choice of stroke directions is found exactly by a
/// two-state recurrence along the sequence.
pub fn brute_force_pen_up(strokes: &[Stroke]) -> f64 {
    if strokes.is_empty() {
        return 0.0;
    }
    let ends: Vec<[(Pixel, Pixel); 2]> = strokes
        .iter()
        .map(|s| [(s.start(), s.end()), (s.end(), s.start())])
        .collect();
    let mut perm: Vec<usize> = (0..strokes.len()).collect();
    let mut best = f64::INFINITY;
    loop {
        let first = &ends[perm[0]];
        let mut cost = [d((0, 0), first[0].0), d((0, 0), first[1].0)];
        for w in perm.windows(2) {
            let (prev, cur) = (&ends[w[0]], &ends[w[1]]);
            let mut next = [f64::INFINITY; 2];
            for (o, slot) in next.iter_mut().enumerate() {
                for p in 0..2 {
                    *slot = slot.min(cost[p] + d(prev[p].1, cur[o].0));
                }
            }
            cost = next;
        }
        best = best.min(cost[0].min(cost[1]));
        if !next_permutation(&mut perm) {
            return best;
        }
    }
}

/// `n` random polyline strokes of 2..=4 points inside `size x size`.
pub fn random_strokes(rng: &mut Rng, n: usize, size: usize) -> Vec<Stroke> {
    (0..n)
        .map(|_| {
            let k = 2 + rng.below(3);
            Stroke::line((0..k).map(|_| (rng.below(size), rng.below(size))).collect())
        })
        .collect()
}

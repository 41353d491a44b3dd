//! Gradient-guided traversal of a skeleton into strokes.
//!
//! Seeds are taken at endpoints first (raster order), then at the
//! topmost-leftmost unvisited pixel, which starts closed loops. From the
//! current pixel the walk moves to an unvisited 8-neighbour:
//!
//! 1. Candidates that touch each other form a cluster; the cluster whose
//!    best member aligns most with the local tangent wins.
//! 2. Inside the cluster 4-neighbours go first, so a staircase corner is
//!    consumed instead of being stranded.
//! 3. Remaining ties are broken by alignment, then clockwise from north.
//!
//! The local tangent is the gradient orientation rotated by 90 degrees, read
//! at the strongest-gradient pixel of the 3x3 window and signed to agree with
//! the travel direction. Where the gradient vanishes the travel direction is
//! used.

use crate::error::{Error, Result};

use super::{Bitmap, GradientField, Pixel, Skeleton, Stroke, NEIGHBOURS};

const FLAT_GRADIENT: f64 = 1e-9;

/// Top-left corner of the first fully set 2x2 block in raster order.
pub fn find_full_block(b: &Bitmap) -> Option<Pixel> {
    for y in 0..b.height().saturating_sub(1) {
        for x in 0..b.width().saturating_sub(1) {
            if b.get(x, y) && b.get(x + 1, y) && b.get(x, y + 1) && b.get(x + 1, y + 1) {
                return Some((x, y));
            }
        }
    }
    None
}

fn tangent(grad: &GradientField, (x, y): Pixel, travel: Option<(f64, f64)>) -> Option<(f64, f64)> {
    let mut best: Option<(f64, f64)> = None;
    for dy in -1isize..=1 {
        for dx in -1isize..=1 {
            let (nx, ny) = (x as isize + dx, y as isize + dy);
            if nx < 0 || ny < 0 || nx as usize >= grad.width || ny as usize >= grad.height {
                continue;
            }
            let (o, m) = grad.at(nx as usize, ny as usize);
            if m > FLAT_GRADIENT && best.is_none_or(|(_, bm)| m > bm) {
                best = Some((o, m));
            }
        }
    }
    let Some((o, _)) = best else {
        return travel;
    };
    let t = (-o.sin(), o.cos());
    match travel {
        Some(d) if t.0 * d.0 + t.1 * d.1 < 0.0 => Some((-t.0, -t.1)),
        _ => Some(t),
    }
}

fn unit(dx: isize, dy: isize) -> (f64, f64) {
    let n = ((dx * dx + dy * dy) as f64).sqrt();
    (dx as f64 / n, dy as f64 / n)
}

/// Alignment of a step with the tangent. Without a travel direction the
/// tangent's sign is arbitrary, so only its axis counts.
fn alignment(step: (isize, isize), t: Option<(f64, f64)>, signed: bool) -> f64 {
    match t {
        None => 0.0,
        Some(t) => {
            let u = unit(step.0, step.1);
            let d = u.0 * t.0 + u.1 * t.1;
            if signed {
                d
            } else {
                d.abs()
            }
        }
    }
}

/// Index into [`NEIGHBOURS`] of each unvisited neighbour, clockwise from north.
fn candidates(skel: &Bitmap, visited: &Bitmap, (x, y): Pixel) -> Vec<usize> {
    (0..8)
        .filter(|&k| {
            let (nx, ny) = (x as isize + NEIGHBOURS[k].0, y as isize + NEIGHBOURS[k].1);
            skel.get_signed(nx, ny) && !visited.get_signed(nx, ny)
        })
        .collect()
}

fn adjacent(a: (isize, isize), b: (isize, isize)) -> bool {
    (a.0 - b.0).abs() <= 1 && (a.1 - b.1).abs() <= 1
}

fn choose(cands: &[usize], t: Option<(f64, f64)>, signed: bool) -> usize {
    if cands.len() == 1 {
        return cands[0];
    }
    // clusters of mutually touching candidates, in clockwise order of first member
    let mut cluster = vec![usize::MAX; cands.len()];
    let mut n = 0;
    for i in 0..cands.len() {
        if cluster[i] != usize::MAX {
            continue;
        }
        cluster[i] = n;
        let mut stack = vec![i];
        while let Some(a) = stack.pop() {
            for b in 0..cands.len() {
                if cluster[b] == usize::MAX && adjacent(NEIGHBOURS[cands[a]], NEIGHBOURS[cands[b]]) {
                    cluster[b] = n;
                    stack.push(b);
                }
            }
        }
        n += 1;
    }
    let score = |i: usize| alignment(NEIGHBOURS[cands[i]], t, signed);
    let mut best_cluster = 0;
    let mut best_score = f64::NEG_INFINITY;
    for c in 0..n {
        let s = (0..cands.len())
            .filter(|&i| cluster[i] == c)
            .map(score)
            .fold(f64::NEG_INFINITY, f64::max);
        if s > best_score + 1e-12 {
            best_score = s;
            best_cluster = c;
        }
    }
    let mut pick: Option<usize> = None;
    for i in (0..cands.len()).filter(|&i| cluster[i] == best_cluster) {
        let better = match pick {
            None => true,
            Some(p) => {
                let (four_i, four_p) = (cands[i].is_multiple_of(2), cands[p].is_multiple_of(2));
                if four_i != four_p {
                    four_i
                } else {
                    score(i) > score(p) + 1e-12
                }
            }
        };
        if better {
            pick = Some(i);
        }
    }
    cands[pick.expect("cluster is non-empty")]
}

/// Decompose a thin skeleton into strokes visiting every pixel exactly once.
pub fn trace_strokes(skeleton: &Skeleton, grad: &GradientField) -> Result<Vec<Stroke>> {
    let skel = skeleton.bitmap();
    let (w, h) = (skel.width(), skel.height());
    if grad.width != w || grad.height != h {
        return Err(Error::shape(
            "trace_strokes",
            format!("{w}x{h} gradient field"),
            format!("{}x{}", grad.width, grad.height),
        ));
    }
    if let Some((x, y)) = find_full_block(skel) {
        return Err(Error::Usage(format!(
            "skeleton is not thin: full 2x2 block with top-left pixel ({x}, {y})"
        )));
    }
    let mut visited = Bitmap::new(w, h);
    let mut remaining = skel.count();
    let mut strokes = Vec::new();
    let mut scan = 0;
    while remaining > 0 {
        let seed = skel
            .pixels()
            .find(|&p| !visited.get(p.0, p.1) && candidates(skel, &visited, p).len() <= 1)
            .or_else(|| {
                while scan < w * h && (!skel.bits()[scan] || visited.bits()[scan]) {
                    scan += 1;
                }
                (scan < w * h).then(|| (scan % w, scan / w))
            })
            .expect("an unvisited pixel remains");
        let mut points = vec![seed];
        visited.set(seed.0, seed.1, true);
        remaining -= 1;
        let mut cur = seed;
        let mut travel: Option<(f64, f64)> = None;
        loop {
            let cands = candidates(skel, &visited, cur);
            if cands.is_empty() {
                break;
            }
            let t = tangent(grad, cur, travel);
            let k = choose(&cands, t, travel.is_some());
            let (dx, dy) = NEIGHBOURS[k];
            cur = ((cur.0 as isize + dx) as usize, (cur.1 as isize + dy) as usize);
            visited.set(cur.0, cur.1, true);
            remaining -= 1;
            points.push(cur);
            travel = Some(unit(dx, dy));
        }
        strokes.push(Stroke::line(points));
    }
    Ok(strokes)
}

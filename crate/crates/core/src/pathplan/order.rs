//! Stroke ordering for short pen-up travel.

use super::{dist, Pixel, Stroke};

/// Where the pen rests before the first stroke.
pub const ORIGIN: Pixel = (0, 0);

/// Pen-up travel from [`ORIGIN`] to the first stroke and between
/// consecutive strokes.
pub fn pen_up_distance(strokes: &[Stroke]) -> f64 {
    let mut pos = ORIGIN;
    let mut total = 0.0;
    for s in strokes {
        total += dist(pos, s.start());
        pos = s.end();
    }
    total
}

/// Greedy nearest-endpoint ordering with per-stroke reversal, refined by
/// [`improve_order`].
///
/// The first stroke is the one with an endpoint nearest [`ORIGIN`]. Each
/// following stroke is the unvisited one with an endpoint nearest the pen,
/// entered from that endpoint. The input order is returned unchanged when it
/// is already cheaper.
pub fn order_strokes(strokes: &[Stroke]) -> Vec<Stroke> {
    let mut out = greedy_order(strokes);
    improve_order(&mut out);
    if pen_up_distance(strokes) <= pen_up_distance(&out) {
        return strokes.to_vec();
    }
    out
}

/// Upper bound on improvement sweeps; each sweep is quadratic in the stroke count.
const MAX_SWEEPS: usize = 64;

/// Local search until neither [`two_opt`] nor [`relocate`] finds a shorter order.
pub fn improve_order(strokes: &mut Vec<Stroke>) {
    for _ in 0..MAX_SWEEPS {
        let a = two_opt(strokes);
        let b = relocate(strokes);
        if !a && !b {
            return;
        }
    }
}

/// One sweep reversing runs `i..=j` of the drawing order, flipping each
/// stroke in the run, wherever that shortens pen-up travel. Only the two
/// legs at the ends of the run change length, so each candidate costs O(1).
/// A run of one is a plain stroke flip. Returns whether anything changed.
pub fn two_opt(strokes: &mut [Stroke]) -> bool {
    let n = strokes.len();
    let mut improved = false;
    for i in 0..n {
        for j in i..n {
            let prev = if i == 0 { ORIGIN } else { strokes[i - 1].end() };
            let (ai, bj) = (strokes[i].start(), strokes[j].end());
            let (mut before, mut after) = (dist(prev, ai), dist(prev, bj));
            if j + 1 < n {
                let next = strokes[j + 1].start();
                before += dist(bj, next);
                after += dist(ai, next);
            }
            if after < before - 1e-9 {
                strokes[i..=j].reverse();
                for s in &mut strokes[i..=j] {
                    s.points.reverse();
                }
                improved = true;
            }
        }
    }
    improved
}

/// One sweep moving single strokes, in either direction, to the gap where
/// they cost least. Returns whether anything changed.
pub fn relocate(strokes: &mut Vec<Stroke>) -> bool {
    let n = strokes.len();
    let mut improved = false;
    for i in 0..n {
        let prev = if i == 0 { ORIGIN } else { strokes[i - 1].end() };
        let next = strokes.get(i + 1).map(Stroke::start);
        let (a, b) = (strokes[i].start(), strokes[i].end());
        let gain = dist(prev, a) + next.map_or(0.0, |q| dist(b, q) - dist(prev, q));
        // gaps of the sequence without stroke i; gap k sits before its k-th element
        let elem = |m: usize| &strokes[if m < i { m } else { m + 1 }];
        let mut best: Option<(f64, usize, bool)> = None;
        for k in 0..n {
            let q = if k == 0 { ORIGIN } else { elem(k - 1).end() };
            let r = (k + 1 < n).then(|| elem(k).start());
            for (rev, (s, e)) in [(false, (a, b)), (true, (b, a))] {
                let cost = dist(q, s) + r.map_or(0.0, |r| dist(e, r) - dist(q, r));
                if cost < gain - 1e-9 && best.is_none_or(|(c, _, _)| cost < c) {
                    best = Some((cost, k, rev));
                }
            }
        }
        if let Some((_, k, rev)) = best {
            let mut s = strokes.remove(i);
            if rev {
                s.points.reverse();
            }
            strokes.insert(k, s);
            improved = true;
        }
    }
    improved
}

fn greedy_order(strokes: &[Stroke]) -> Vec<Stroke> {
    let n = strokes.len();
    let mut used = vec![false; n];
    let mut out = Vec::with_capacity(n);
    let mut pos = ORIGIN;
    for _ in 0..n {
        let mut best: Option<(f64, usize, bool)> = None;
        for (i, s) in strokes.iter().enumerate() {
            if used[i] {
                continue;
            }
            for (d, rev) in [(dist(pos, s.start()), false), (dist(pos, s.end()), true)] {
                if best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, i, rev));
                }
            }
        }
        let (_, i, rev) = best.expect("an unused stroke remains");
        used[i] = true;
        let s = if rev { strokes[i].reversed() } else { strokes[i].clone() };
        pos = s.end();
        out.push(s);
    }
    out
}

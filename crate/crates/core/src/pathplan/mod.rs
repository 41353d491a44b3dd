//! From a binary sketch to ordered pen strokes.
//!
//! Thin lines are skeletonized and traced; thick eye and eyebrow marks are
//! filled by concentric loops; all strokes are then ordered to keep pen-up
//! travel short. Pixel coordinates are `(x, y)` with `y` pointing down.

mod canny;
mod fill;
mod order;
mod thinning;
mod trace;

use std::fmt::Write as _;

pub use canny::{canny_gradient, CannyConfig, GradientField};
pub use fill::{fill_regions, peel_layers, plan_fills, FillConfig};
pub use order::{improve_order, order_strokes, pen_up_distance, relocate, two_opt, ORIGIN};
pub use thinning::{break_full_blocks, skeletonize, thin, zhang_suen};
pub use trace::{find_full_block, trace_strokes};

use crate::error::Result;
use crate::maskops::LabelMap;
use crate::raster::{Raster, SketchImage};

pub type Pixel = (usize, usize);

/// Row-major boolean image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bitmap {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl Bitmap {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    /// Panics if `bits.len() != width * height`.
    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Self {
        assert_eq!(bits.len(), width * height, "bitmap size");
        Self { width, height, bits }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut b = Self::new(width, height);
        for y in 0..height {
            for x in 0..width {
                b.bits[y * width + x] = f(x, y);
            }
        }
        b
    }

    /// Parse rows of `#` (set) and any other character (clear).
    pub fn from_ascii(rows: &[&str]) -> Self {
        let h = rows.len();
        let w = rows.iter().map(|r| r.len()).max().unwrap_or(0);
        Self::from_fn(w, h, |x, y| rows[y].as_bytes().get(x) == Some(&b'#'))
    }

    pub fn ink_of(sketch: &SketchImage) -> Self {
        Self::from_fn(sketch.width(), sketch.height(), |x, y| sketch.is_ink(x, y))
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

    /// Out-of-bounds reads are `false`.
    #[inline]
    pub fn get_signed(&self, x: isize, y: isize) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.bits[y as usize * self.width + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn pixels(&self) -> impl Iterator<Item = Pixel> + '_ {
        (0..self.height).flat_map(move |y| (0..self.width).filter(move |&x| self.get(x, y)).map(move |x| (x, y)))
    }

    /// Set pixels among the 8 neighbours of `(x, y)`.
    pub fn neighbours8(&self, x: usize, y: usize) -> impl Iterator<Item = Pixel> + '_ {
        NEIGHBOURS.iter().filter_map(move |&(dx, dy)| {
            let (nx, ny) = (x as isize + dx, y as isize + dy);
            self.get_signed(nx, ny).then_some((nx as usize, ny as usize))
        })
    }

    /// Number of 8-connected components.
    pub fn components8(&self) -> usize {
        self.label_components8().1
    }

    /// Component id per pixel (`usize::MAX` for background) and the count.
    pub fn label_components8(&self) -> (Vec<usize>, usize) {
        let mut id = vec![usize::MAX; self.bits.len()];
        let mut n = 0;
        let mut stack = Vec::new();
        for start in 0..self.bits.len() {
            if !self.bits[start] || id[start] != usize::MAX {
                continue;
            }
            id[start] = n;
            stack.push(start);
            while let Some(i) = stack.pop() {
                let (x, y) = (i % self.width, i / self.width);
                for (nx, ny) in self.neighbours8(x, y) {
                    let j = ny * self.width + nx;
                    if id[j] == usize::MAX {
                        id[j] = n;
                        stack.push(j);
                    }
                }
            }
            n += 1;
        }
        (id, n)
    }
}

/// Clockwise from north: N, NE, E, SE, S, SW, W, NW.
pub const NEIGHBOURS: [(isize, isize); 8] = [(0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1)];

/// A thinned ink bitmap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Skeleton {
    bitmap: Bitmap,
}

impl Skeleton {
    pub fn from_bitmap(bitmap: Bitmap) -> Self {
        Self { bitmap }
    }

    pub fn bitmap(&self) -> &Bitmap {
        &self.bitmap
    }

    pub fn width(&self) -> usize {
        self.bitmap.width
    }

    pub fn height(&self) -> usize {
        self.bitmap.height
    }

    pub fn count(&self) -> usize {
        self.bitmap.count()
    }

    pub fn degree(&self, x: usize, y: usize) -> usize {
        self.bitmap.neighbours8(x, y).count()
    }

    /// Skeleton pixels with at most one neighbour.
    pub fn endpoints(&self) -> Vec<Pixel> {
        self.bitmap.pixels().filter(|&(x, y)| self.degree(x, y) <= 1).collect()
    }

    /// Skeleton pixels with three or more neighbours.
    pub fn branch_points(&self) -> Vec<Pixel> {
        self.bitmap.pixels().filter(|&(x, y)| self.degree(x, y) >= 3).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StrokeKind {
    Line,
    FillLoop,
}

impl StrokeKind {
    pub fn name(self) -> &'static str {
        match self {
            StrokeKind::Line => "line",
            StrokeKind::FillLoop => "fill",
        }
    }
}

/// A pen-down path through pixel centres; consecutive points are 8-adjacent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stroke {
    pub kind: StrokeKind,
    pub points: Vec<Pixel>,
}

impl Stroke {
    pub fn line(points: Vec<Pixel>) -> Self {
        Self {
            kind: StrokeKind::Line,
            points,
        }
    }

    pub fn start(&self) -> Pixel {
        self.points[0]
    }

    pub fn end(&self) -> Pixel {
        *self.points.last().expect("strokes are non-empty")
    }

    pub fn reversed(&self) -> Self {
        let mut points = self.points.clone();
        points.reverse();
        Self {
            kind: self.kind,
            points,
        }
    }

    /// Euclidean pen-down length in pixels.
    pub fn length(&self) -> f64 {
        self.points.windows(2).map(|w| dist(w[0], w[1])).sum()
    }
}

#[inline]
pub(crate) fn dist(a: Pixel, b: Pixel) -> f64 {
    let (dx, dy) = (a.0 as f64 - b.0 as f64, a.1 as f64 - b.1 as f64);
    (dx * dx + dy * dy).sqrt()
}

/// Strokes in drawing order.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub width: usize,
    pub height: usize,
    pub strokes: Vec<Stroke>,
}

impl Trajectory {
    /// Pen-up travel from [`ORIGIN`] through all strokes.
    pub fn pen_up_distance(&self) -> f64 {
        pen_up_distance(&self.strokes)
    }

    pub fn point_count(&self) -> usize {
        self.strokes.iter().map(|s| s.points.len()).sum()
    }

    /// Debug dump: one stroke per line, `kind x,y x,y ...`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for s in &self.strokes {
            out.push_str(s.kind.name());
            for &(x, y) in &s.points {
                let _ = write!(out, " {x},{y}");
            }
            out.push('\n');
        }
        out
    }

    /// Parse [`Trajectory::dump`] output.
    pub fn parse_dump(width: usize, height: usize, text: &str) -> Result<Self> {
        let bad = |line: usize, what: &str| crate::Error::Data(format!("trajectory dump line {line}: {what}"));
        let mut strokes = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let mut parts = line.split_whitespace();
            let kind = match parts.next() {
                Some("line") => StrokeKind::Line,
                Some("fill") => StrokeKind::FillLoop,
                Some(k) => return Err(bad(i + 1, &format!("unknown stroke kind {k:?}"))),
                None => continue,
            };
            let points = parts
                .map(|p| {
                    let (x, y) = p.split_once(',').ok_or_else(|| bad(i + 1, "expected x,y"))?;
                    Ok((
                        x.parse().map_err(|_| bad(i + 1, "bad x"))?,
                        y.parse().map_err(|_| bad(i + 1, "bad y"))?,
                    ))
                })
                .collect::<Result<Vec<Pixel>>>()?;
            if points.is_empty() {
                return Err(bad(i + 1, "stroke without points"));
            }
            strokes.push(Stroke { kind, points });
        }
        Ok(Self { width, height, strokes })
    }

    /// Pixels touched by the pen, drawing straight segments between points.
    pub fn rasterize(&self) -> Bitmap {
        let mut b = Bitmap::new(self.width, self.height);
        for s in &self.strokes {
            for w in s.points.windows(2) {
                for (x, y) in line_pixels(w[0], w[1]) {
                    b.set(x, y, true);
                }
            }
            let (x, y) = s.start();
            b.set(x, y, true);
        }
        b
    }
}

/// Bresenham line including both endpoints.
pub fn line_pixels(a: Pixel, b: Pixel) -> Vec<Pixel> {
    let (mut x, mut y) = (a.0 as isize, a.1 as isize);
    let (x1, y1) = (b.0 as isize, b.1 as isize);
    let (dx, dy) = ((x1 - x).abs(), -(y1 - y).abs());
    let (sx, sy) = (if x < x1 { 1 } else { -1 }, if y < y1 { 1 } else { -1 });
    let mut err = dx + dy;
    let mut out = Vec::with_capacity((dx.max(-dy) + 1) as usize);
    loop {
        out.push((x as usize, y as usize));
        if x == x1 && y == y1 {
            return out;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanConfig {
    pub canny: CannyConfig,
    pub fill: FillConfig,
    pub fills: bool,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self {
            canny: CannyConfig::default(),
            fill: FillConfig::default(),
            fills: true,
        }
    }
}

/// Intermediate products of [`plan`].
#[derive(Debug, Clone)]
pub struct Plan {
    pub skeleton: Skeleton,
    pub fill_mask: Bitmap,
    pub gradient: GradientField,
    pub trajectory: Trajectory,
}

impl Plan {
    /// Pixels the trajectory must cover: skeleton plus fill regions.
    pub fn obligations(&self) -> Bitmap {
        let s = self.skeleton.bitmap();
        Bitmap::from_fn(s.width, s.height, |x, y| s.get(x, y) || self.fill_mask.get(x, y))
    }
}

/// Full planning pass over a binary sketch.
///
/// `gray` steers tracing through its gradient; pass the binary raster when
/// no grayscale sketch is available. Fills need `labels`.
pub fn plan(binary: &SketchImage, gray: &Raster, labels: Option<&LabelMap>, cfg: &PlanConfig) -> Result<Plan> {
    let (w, h) = (binary.width(), binary.height());
    let fill_mask = match labels {
        Some(l) if cfg.fills => fill_regions(binary, l, &cfg.fill)?,
        _ => Bitmap::new(w, h),
    };
    let ink = Bitmap::from_fn(w, h, |x, y| binary.is_ink(x, y) && !fill_mask.get(x, y));
    let skeleton = Skeleton::from_bitmap(thin(ink));
    let gradient = canny_gradient(gray, &cfg.canny);
    let mut strokes = trace_strokes(&skeleton, &gradient)?;
    if labels.is_some() && cfg.fills {
        strokes.extend(fill::loops_for_mask(&fill_mask));
    }
    let trajectory = Trajectory {
        width: w,
        height: h,
        strokes: order_strokes(&strokes),
    };
    Ok(Plan {
        skeleton,
        fill_mask,
        gradient,
        trajectory,
    })
}

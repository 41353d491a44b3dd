//! Canny-style gradient estimation.

use std::f64::consts::PI;

use crate::raster::Raster;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CannyConfig {
    /// Gaussian smoothing; `<= 0` disables it.
    pub sigma: f64,
    /// Hysteresis thresholds as fractions of the maximum gradient magnitude.
    pub low: f64,
    pub high: f64,
}

impl Default for CannyConfig {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            low: 0.1,
            high: 0.3,
        }
    }
}

/// Per-pixel gradient of a smoothed image.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    pub width: usize,
    pub height: usize,
    /// `atan2(gy, gx)` in `[-pi, pi]`, `y` pointing down.
    pub orientation: Vec<f64>,
    /// Sobel magnitude, `>= 0`.
    pub magnitude: Vec<f64>,
    /// Thin edge mask after non-maximum suppression and hysteresis.
    pub edges: Vec<bool>,
}

impl GradientField {
    #[inline]
    pub fn at(&self, x: usize, y: usize) -> (f64, f64) {
        let i = y * self.width + x;
        (self.orientation[i], self.magnitude[i])
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as isize;
    let k: Vec<f64> = (-r..=r)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

#[inline]
fn clamped(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

/// Separable Gaussian blur with replicated borders.
fn blur(img: &[f64], w: usize, h: usize, sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return img.to_vec();
    }
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as isize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = k
                .iter()
                .enumerate()
                .map(|(i, &kv)| kv * img[y * w + clamped(x as isize + i as isize - r, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = k
                .iter()
                .enumerate()
                .map(|(i, &kv)| kv * tmp[clamped(y as isize + i as isize - r, h) * w + x])
                .sum();
        }
    }
    out
}

pub fn canny_gradient(image: &Raster, cfg: &CannyConfig) -> GradientField {
    let (w, h) = (image.width(), image.height());
    let src: Vec<f64> = image.data().iter().map(|&v| f64::from(v)).collect();
    let s = blur(&src, w, h, cfg.sigma);
    let at = |x: isize, y: isize| s[clamped(y, h) * w + clamped(x, w)];
    let mut orientation = vec![0.0; w * h];
    let mut magnitude = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let gx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            let gy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
            let i = y as usize * w + x as usize;
            magnitude[i] = gx.hypot(gy);
            orientation[i] = gy.atan2(gx);
        }
    }
    let edges = suppress_and_link(&orientation, &magnitude, w, h, cfg);
    GradientField {
        width: w,
        height: h,
        orientation,
        magnitude,
        edges,
    }
}

fn suppress_and_link(orient: &[f64], mag: &[f64], w: usize, h: usize, cfg: &CannyConfig) -> Vec<bool> {
    let max = mag.iter().copied().fold(0.0, f64::max);
    if max <= 1e-12 {
        return vec![false; w * h];
    }
    let m = |x: isize, y: isize| {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            0.0
        } else {
            mag[y as usize * w + x as usize]
        }
    };
    let mut thin = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let mut a = orient[i];
            if a < 0.0 {
                a += PI;
            }
            let sector = ((a / (PI / 4.0)).round() as usize) % 4;
            let (dx, dy) = [(1, 0), (1, 1), (0, 1), (-1, 1)][sector];
            let (xi, yi) = (x as isize, y as isize);
            if mag[i] >= m(xi + dx, yi + dy) && mag[i] >= m(xi - dx, yi - dy) {
                thin[i] = mag[i];
            }
        }
    }
    let (lo, hi) = (cfg.low * max, cfg.high * max);
    let mut edges = vec![false; w * h];
    let mut stack: Vec<usize> = (0..w * h).filter(|&i| thin[i] >= hi && thin[i] > 0.0).collect();
    for &i in &stack {
        edges[i] = true;
    }
    while let Some(i) = stack.pop() {
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if !edges[j] && thin[j] >= lo && thin[j] > 0.0 {
                    edges[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    edges
}

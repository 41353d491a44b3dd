//! Rasterizing stand-in for the plotter.

use crate::error::{Error, Result};
use crate::pathplan::{line_pixels, Bitmap};

use super::{um_to_mm, MachineMap, PlotProgram, PlotStats};

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    /// Row 0 is the top edge of the workspace.
    pub raster: Bitmap,
    pub stats: PlotStats,
}

fn cell(v_um: i64, res: f64, n: usize) -> usize {
    let c = (um_to_mm(v_um) * res).floor();
    c.clamp(0.0, (n - 1) as f64) as usize
}

fn draw_runs(runs: &[Vec<(usize, usize)>], b: &mut Bitmap) {
    for run in runs {
        let (x, y) = run[0];
        b.set(x, y, true);
        for w in run.windows(2) {
            for (x, y) in line_pixels(w[0], w[1]) {
                b.set(x, y, true);
            }
        }
    }
}

/// Draw every pen-down segment with a one-cell pen at `px_per_mm`.
pub fn simulate(prog: &PlotProgram, px_per_mm: f64) -> Result<Simulation> {
    if !(px_per_mm.is_finite() && px_per_mm > 0.0) {
        return Err(Error::Param(format!("resolution must be positive, got {px_per_mm}")));
    }
    prog.validate()?;
    let ws = &prog.workspace;
    let (w, h) = (
        ((ws.width_mm * px_per_mm).ceil() as usize).max(1),
        ((ws.height_mm * px_per_mm).ceil() as usize).max(1),
    );
    let top = ws.height_um();
    let runs: Vec<Vec<(usize, usize)>> = prog
        .runs()
        .into_iter()
        .map(|r| {
            r.into_iter()
                .map(|(x, y)| (cell(x, px_per_mm, w), cell(top - y, px_per_mm, h)))
                .collect()
        })
        .collect();
    let mut raster = Bitmap::new(w, h);
    draw_runs(&runs, &mut raster);
    Ok(Simulation {
        raster,
        stats: prog.stats(),
    })
}

/// Draw the program back in the pixel grid of the `px_w x px_h` sketch it
/// was mapped from, snapping each point to the nearest pixel.
pub fn rasterize_to_sketch(prog: &PlotProgram, px_w: usize, px_h: usize) -> Result<Bitmap> {
    let map = MachineMap::new(&prog.workspace, px_w, px_h)?;
    let snap = |v: f64, n: usize| v.round().clamp(0.0, (n - 1) as f64) as usize;
    let runs: Vec<Vec<(usize, usize)>> = prog
        .runs()
        .into_iter()
        .map(|r| {
            r.into_iter()
                .map(|(x, y)| {
                    let (px, py) = map.invert(um_to_mm(x), um_to_mm(y));
                    (snap(px, px_w), snap(py, px_h))
                })
                .collect()
        })
        .collect();
    let mut b = Bitmap::new(px_w, px_h);
    draw_runs(&runs, &mut b);
    Ok(b)
}

/// Intersection over union of two equally sized bitmaps; two empty sets score 1.
pub fn jaccard(a: &Bitmap, b: &Bitmap) -> Result<f64> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::shape(
            "jaccard",
            format!("{}x{}", a.width(), a.height()),
            format!("{}x{}", b.width(), b.height()),
        ));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&p, &q) in a.bits().iter().zip(b.bits()) {
        inter += usize::from(p && q);
        union += usize::from(p || q);
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

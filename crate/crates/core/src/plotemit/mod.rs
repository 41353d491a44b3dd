//! Workspace mapping, G-code and SVG emission, and a rasterizing simulator.
//!
//! Machine coordinates are millimetres with `y` pointing up and the origin at
//! the bottom-left corner of the workspace. A [`PlotProgram`] stores them as
//! integer micrometres, which is exactly the precision of the emitted text,
//! so emission and parsing are lossless.

mod gcode;
mod sim;
mod svg;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pathplan::Trajectory;

pub use gcode::{emit_gcode, parse_gcode};
pub use sim::{jaccard, rasterize_to_sketch, simulate, Simulation};
pub use svg::emit_svg;

/// Physical drawing area and motion model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkspaceConfig {
    pub width_mm: f64,
    pub height_mm: f64,
    pub margin_mm: f64,
    /// Pen-down drawing speed.
    pub feed_mm_s: f64,
    /// Pen-up travel speed.
    pub travel_mm_s: f64,
    /// Time for one pen lift.
    pub lift_s: f64,
}

impl Default for WorkspaceConfig {
    fn default() -> Self {
        Self {
            width_mm: 160.0,
            height_mm: 160.0,
            margin_mm: 0.0,
            feed_mm_s: 20.0,
            travel_mm_s: 50.0,
            lift_s: 0.4,
        }
    }
}

impl WorkspaceConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("width_mm", self.width_mm),
            ("height_mm", self.height_mm),
            ("feed_mm_s", self.feed_mm_s),
            ("travel_mm_s", self.travel_mm_s),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("workspace.{name} must be positive, got {v}")));
            }
        }
        if !(self.lift_s.is_finite() && self.lift_s >= 0.0) {
            return Err(Error::Config(format!(
                "workspace.lift_s must be >= 0, got {}",
                self.lift_s
            )));
        }
        let limit = self.width_mm.min(self.height_mm) / 2.0;
        if !(self.margin_mm >= 0.0 && self.margin_mm < limit) {
            return Err(Error::Config(format!(
                "workspace.margin_mm must lie in [0, {limit}), got {}",
                self.margin_mm
            )));
        }
        Ok(())
    }

    pub(crate) fn width_um(&self) -> i64 {
        to_um(self.width_mm)
    }

    pub(crate) fn height_um(&self) -> i64 {
        to_um(self.height_mm)
    }

    /// Where the pen rests before the first command: the top-left drawable corner.
    pub fn home_um(&self) -> (i64, i64) {
        (to_um(self.margin_mm), to_um(self.height_mm - self.margin_mm))
    }
}

#[inline]
pub(crate) fn to_um(mm: f64) -> i64 {
    (mm * 1000.0).round() as i64
}

#[inline]
pub(crate) fn um_to_mm(um: i64) -> f64 {
    um as f64 / 1000.0
}

/// Uniform scale and offset from sketch pixels to machine millimetres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MachineMap {
    /// Millimetres per pixel.
    pub scale: f64,
    /// Machine position of pixel (0, 0).
    pub origin: (f64, f64),
}

impl MachineMap {
    /// Fit a `px_w x px_h` sketch into the drawable area, centred.
    pub fn new(ws: &WorkspaceConfig, px_w: usize, px_h: usize) -> Result<Self> {
        ws.validate()?;
        if px_w == 0 || px_h == 0 {
            return Err(Error::Param(format!("sketch must be non-empty, got {px_w}x{px_h}")));
        }
        let (dw, dh) = (ws.width_mm - 2.0 * ws.margin_mm, ws.height_mm - 2.0 * ws.margin_mm);
        let scale = (dw / px_w as f64).min(dh / px_h as f64);
        let ox = ws.margin_mm + (dw - px_w as f64 * scale) / 2.0;
        let oy = ws.height_mm - ws.margin_mm - (dh - px_h as f64 * scale) / 2.0;
        Ok(Self {
            scale,
            origin: (ox, oy),
        })
    }

    /// Machine millimetres of a pixel position; rows grow downwards, `y` grows upwards.
    #[inline]
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        (self.origin.0 + x * self.scale, self.origin.1 - y * self.scale)
    }

    /// Nearest pixel position of a machine point.
    #[inline]
    pub fn invert(&self, x_mm: f64, y_mm: f64) -> (f64, f64) {
        ((x_mm - self.origin.0) / self.scale, (self.origin.1 - y_mm) / self.scale)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Command {
    PenUp,
    PenDown,
    /// Absolute move in micrometres. Travel while the pen is up, a drawn
    /// segment while it is down.
    MoveTo {
        x_um: i64,
        y_um: i64,
    },
}

/// Summary of a program's motion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlotStats {
    pub strokes: usize,
    pub draw_mm: f64,
    pub travel_mm: f64,
    pub lifts: usize,
    pub time_s: f64,
}

/// Device-ready command list. The pen starts up at [`WorkspaceConfig::home_um`].
#[derive(Debug, Clone, PartialEq)]
pub struct PlotProgram {
    pub workspace: WorkspaceConfig,
    pub commands: Vec<Command>,
}

fn seg_mm(a: (i64, i64), b: (i64, i64)) -> f64 {
    um_to_mm(b.0 - a.0).hypot(um_to_mm(b.1 - a.1))
}

impl PlotProgram {
    pub fn empty(workspace: WorkspaceConfig) -> Self {
        Self {
            workspace,
            commands: Vec::new(),
        }
    }

    /// Check bounds and pen-state alternation; errors name the command index.
    pub fn validate(&self) -> Result<()> {
        self.workspace.validate()?;
        let (w, h) = (self.workspace.width_um(), self.workspace.height_um());
        let mut down = false;
        for (i, c) in self.commands.iter().enumerate() {
            match *c {
                Command::PenDown if down => return Err(Error::Usage(format!("command {i}: pen is already down"))),
                Command::PenUp if !down => return Err(Error::Usage(format!("command {i}: pen is already up"))),
                Command::PenDown => down = true,
                Command::PenUp => down = false,
                Command::MoveTo { x_um, y_um } => {
                    if !(0..=w).contains(&x_um) || !(0..=h).contains(&y_um) {
                        return Err(Error::Usage(format!(
                            "command {i}: point ({}, {}) mm lies outside the {}x{} mm workspace",
                            format_um(x_um),
                            format_um(y_um),
                            format_um(w),
                            format_um(h)
                        )));
                    }
                }
            }
        }
        if down {
            return Err(Error::Usage("program ends with the pen down".into()));
        }
        Ok(())
    }

    pub fn stats(&self) -> PlotStats {
        let ws = &self.workspace;
        let mut pos = ws.home_um();
        let (mut draw, mut travel) = (0.0, 0.0);
        let (mut strokes, mut lifts) = (0, 0);
        let mut down = false;
        for c in &self.commands {
            match *c {
                Command::PenDown => {
                    down = true;
                    strokes += 1;
                }
                Command::PenUp => {
                    if down {
                        lifts += 1;
                    }
                    down = false;
                }
                Command::MoveTo { x_um, y_um } => {
                    let d = seg_mm(pos, (x_um, y_um));
                    if down {
                        draw += d;
                    } else {
                        travel += d;
                    }
                    pos = (x_um, y_um);
                }
            }
        }
        PlotStats {
            strokes,
            draw_mm: draw,
            travel_mm: travel,
            lifts,
            time_s: draw / ws.feed_mm_s + travel / ws.travel_mm_s + lifts as f64 * ws.lift_s,
        }
    }

    /// Pen-down runs as point lists: the move that precedes a pen-down,
    /// then every move made while down.
    pub fn runs(&self) -> Vec<Vec<(i64, i64)>> {
        let mut pos = self.workspace.home_um();
        let mut runs = Vec::new();
        let mut cur: Option<Vec<(i64, i64)>> = None;
        for c in &self.commands {
            match *c {
                Command::PenDown => cur = Some(vec![pos]),
                Command::PenUp => runs.extend(cur.take()),
                Command::MoveTo { x_um, y_um } => {
                    pos = (x_um, y_um);
                    if let Some(r) = cur.as_mut() {
                        r.push(pos);
                    }
                }
            }
        }
        runs.extend(cur);
        runs
    }
}

/// `%.3f` rendering of a micrometre count.
pub(crate) fn format_um(um: i64) -> String {
    let sign = if um < 0 { "-" } else { "" };
    let a = um.unsigned_abs();
    format!("{sign}{}.{:03}", a / 1000, a % 1000)
}

/// Scale a trajectory into the workspace. Each stroke becomes a travel to
/// its first point, pen-down, one move per remaining point, pen-up.
pub fn to_machine(traj: &Trajectory, ws: &WorkspaceConfig) -> Result<PlotProgram> {
    ws.validate()?;
    if traj.strokes.is_empty() {
        return Ok(PlotProgram::empty(*ws));
    }
    let map = MachineMap::new(ws, traj.width, traj.height)?;
    let mut commands = Vec::with_capacity(traj.point_count() + 3 * traj.strokes.len());
    for (si, s) in traj.strokes.iter().enumerate() {
        for (pi, &(x, y)) in s.points.iter().enumerate() {
            if x >= traj.width || y >= traj.height {
                return Err(Error::Data(format!(
                    "stroke {si} point {pi}: pixel ({x}, {y}) outside the {}x{} sketch",
                    traj.width, traj.height
                )));
            }
            let (mx, my) = map.apply(x as f64, y as f64);
            commands.push(Command::MoveTo {
                x_um: to_um(mx),
                y_um: to_um(my),
            });
            if pi == 0 {
                commands.push(Command::PenDown);
            }
        }
        commands.push(Command::PenUp);
    }
    let prog = PlotProgram {
        workspace: *ws,
        commands,
    };
    prog.validate()?;
    Ok(prog)
}

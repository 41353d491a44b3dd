//! G-code dialect.
//!
//! ```text
//! ; inkportrait plot program
//! ; workspace <W> x <H> mm
//! G21                     millimetres
//! G90                     absolute positioning
//! G0 X<x> Y<y>            travel, pen up
//! M3 S1000                pen down
//! G1 X<x> Y<y> F<feed>    draw, feed in mm/min
//! M5                      pen up
//! M2                      end of program
//! ```
//!
//! Every number is printed with exactly three decimals.

use std::fmt::Write as _;

use crate::error::{Error, Result};

use super::{format_um, to_um, Command, PlotProgram, WorkspaceConfig};

pub const PEN_DOWN: &str = "M3 S1000";
pub const PEN_UP: &str = "M5";

fn header(ws: &WorkspaceConfig) -> String {
    format!(
        "; inkportrait plot program\n; workspace {} x {} mm\nG21\nG90\n",
        format_um(ws.width_um()),
        format_um(ws.height_um())
    )
}

fn feed_um_per_min(ws: &WorkspaceConfig) -> i64 {
    to_um(ws.feed_mm_s * 60.0)
}

/// Render a program; invalid programs are refused with the offending command.
pub fn emit_gcode(prog: &PlotProgram) -> Result<String> {
    prog.validate()?;
    let ws = &prog.workspace;
    let feed = format_um(feed_um_per_min(ws));
    let mut out = header(ws);
    let mut down = false;
    for c in &prog.commands {
        match *c {
            Command::PenDown => {
                down = true;
                out.push_str(PEN_DOWN);
                out.push('\n');
            }
            Command::PenUp => {
                down = false;
                out.push_str(PEN_UP);
                out.push('\n');
            }
            Command::MoveTo { x_um, y_um } => {
                let (x, y) = (format_um(x_um), format_um(y_um));
                if down {
                    let _ = writeln!(out, "G1 X{x} Y{y} F{feed}");
                } else {
                    let _ = writeln!(out, "G0 X{x} Y{y}");
                }
            }
        }
    }
    out.push_str("M2\n");
    Ok(out)
}

/// Parse a fixed-point number with at most three decimals into thousandths.
fn parse_milli(s: &str) -> Option<i64> {
    let (neg, s) = match s.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, s),
    };
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    if int.is_empty() || frac.len() > 3 || !int.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let mut v: i64 = int.parse().ok()?;
    let mut f = 0;
    for (i, b) in frac.bytes().enumerate() {
        f += i64::from(b - b'0') * [100, 10, 1][i];
    }
    v = v.checked_mul(1000)?.checked_add(f)?;
    Some(if neg { -v } else { v })
}

/// Read back the dialect written by [`emit_gcode`]. Comments and the
/// unit, positioning and end-of-program words are accepted and ignored.
pub fn parse_gcode(text: &str, ws: &WorkspaceConfig) -> Result<PlotProgram> {
    ws.validate()?;
    let bad = |line: usize, what: String| Error::Data(format!("g-code line {line}: {what}"));
    let feed = feed_um_per_min(ws);
    let mut commands = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        let line = raw.split(';').next().unwrap_or("").trim();
        if line.is_empty() || matches!(line, "G21" | "G90" | "M2") {
            continue;
        }
        if line == PEN_DOWN {
            commands.push(Command::PenDown);
            continue;
        }
        if line == PEN_UP {
            commands.push(Command::PenUp);
            continue;
        }
        let mut words = line.split_whitespace();
        let code = words.next().unwrap_or_default();
        if code != "G0" && code != "G1" {
            return Err(bad(n, format!("unsupported command {line:?}")));
        }
        let (mut x, mut y, mut f) = (None, None, None);
        for w in words {
            let (letter, num) = w.split_at(1);
            let v = parse_milli(num).ok_or_else(|| bad(n, format!("bad number in {w:?}")))?;
            match letter {
                "X" => x = Some(v),
                "Y" => y = Some(v),
                "F" => f = Some(v),
                _ => return Err(bad(n, format!("unsupported word {w:?}"))),
            }
        }
        if let Some(f) = f {
            if f != feed {
                return Err(bad(
                    n,
                    format!(
                        "feed {} does not match the workspace feed {}",
                        format_um(f),
                        format_um(feed)
                    ),
                ));
            }
        }
        let (Some(x_um), Some(y_um)) = (x, y) else {
            return Err(bad(n, "move without both X and Y".into()));
        };
        commands.push(Command::MoveTo { x_um, y_um });
    }
    let prog = PlotProgram {
        workspace: *ws,
        commands,
    };
    prog.validate()?;
    Ok(prog)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_program_is_header_and_footer() {
        let ws = WorkspaceConfig::default();
        let g = emit_gcode(&PlotProgram::empty(ws)).unwrap();
        assert_eq!(
            g,
            "; inkportrait plot program\n; workspace 160.000 x 160.000 mm\nG21\nG90\nM2\n"
        );
        assert_eq!(parse_gcode(&g, &ws).unwrap(), PlotProgram::empty(ws));
    }

    #[test]
    fn one_stroke_grammar() {
        let ws = WorkspaceConfig::default();
        let p = PlotProgram {
            workspace: ws,
            commands: vec![
                Command::MoveTo {
                    x_um: 1_000,
                    y_um: 2_500,
                },
                Command::PenDown,
                Command::MoveTo {
                    x_um: 11_000,
                    y_um: 2_500,
                },
                Command::PenUp,
            ],
        };
        let g = emit_gcode(&p).unwrap();
        let body: Vec<&str> = g.lines().skip(4).collect();
        assert_eq!(
            body,
            [
                "G0 X1.000 Y2.500",
                "M3 S1000",
                "G1 X11.000 Y2.500 F1200.000",
                "M5",
                "M2"
            ]
        );
        assert_eq!(parse_gcode(&g, &ws).unwrap(), p);
    }

    #[test]
    fn parser_rejects_foreign_input() {
        let ws = WorkspaceConfig::default();
        assert!(parse_gcode("G2 X1 Y1\n", &ws).is_err());
        assert!(parse_gcode("G0 X1.0001 Y1\n", &ws).is_err());
        assert!(parse_gcode("M3 S1000\nG1 X1 Y1 F60\nM5\n", &ws).is_err());
        assert_eq!(parse_milli("12.5"), Some(12_500));
        assert_eq!(parse_milli("-0.005"), Some(-5));
    }
}

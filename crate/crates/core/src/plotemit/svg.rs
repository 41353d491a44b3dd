//! SVG preview: one polyline per pen-down run, millimetre user units.

use std::fmt::Write as _;

use super::{format_um, PlotProgram};

/// Stroke width of the preview pen in millimetres.
const PEN_MM: &str = "0.400";

pub fn emit_svg(prog: &PlotProgram) -> String {
    let ws = &prog.workspace;
    let (w, h) = (format_um(ws.width_um()), format_um(ws.height_um()));
    let mut out = format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
         <svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}mm\" height=\"{h}mm\" viewBox=\"0 0 {w} {h}\">\n"
    );
    for run in prog.runs() {
        out.push_str("<polyline fill=\"none\" stroke=\"black\" stroke-linecap=\"round\" stroke-linejoin=\"round\" stroke-width=\"");
        out.push_str(PEN_MM);
        out.push_str("\" points=\"");
        for (i, &(x, y)) in run.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            // SVG rows grow downwards
            let _ = write!(out, "{},{}", format_um(x), format_um(ws.height_um() - y));
        }
        out.push_str("\"/>\n");
    }
    out.push_str("</svg>\n");
    out
}

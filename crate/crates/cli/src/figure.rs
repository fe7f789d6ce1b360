//! Overlay of several contour sets in one SVG.

use doa_core::estimates::{Grid2D, Polyline};
use doa_core::json::fmt_f64;

pub struct Layer<'a> {
    pub label: String,
    pub lines: &'a [Polyline],
    pub stroke: &'a str,
    pub width: f64,
}

pub fn overlay_svg(grid: &Grid2D, layers: &[Layer<'_>], points: &[[f64; 2]]) -> String {
    let [[x_lo, x_hi], [y_lo, y_hi]] = grid.bounds;
    let (w, h) = (x_hi - x_lo, y_hi - y_lo);
    let unit = w.max(h) / 600.0;
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{} {} {} {}\" width=\"600\" height=\"{}\">\n",
        fmt_f64(x_lo),
        fmt_f64(-y_hi),
        fmt_f64(w),
        fmt_f64(h),
        (600.0 * h / w).round() as i64
    );
    out.push_str(&format!(
        "  <rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"white\"/>\n",
        fmt_f64(x_lo),
        fmt_f64(-y_hi),
        fmt_f64(w),
        fmt_f64(h)
    ));
    // axes through the origin when visible
    if x_lo < 0.0 && x_hi > 0.0 {
        out.push_str(&format!(
            "  <line x1=\"0\" y1=\"{}\" x2=\"0\" y2=\"{}\" stroke=\"#bbbbbb\" stroke-width=\"{}\"/>\n",
            fmt_f64(-y_hi),
            fmt_f64(-y_lo),
            fmt_f64(unit)
        ));
    }
    if y_lo < 0.0 && y_hi > 0.0 {
        out.push_str(&format!(
            "  <line x1=\"{}\" y1=\"0\" x2=\"{}\" y2=\"0\" stroke=\"#bbbbbb\" stroke-width=\"{}\"/>\n",
            fmt_f64(x_lo),
            fmt_f64(x_hi),
            fmt_f64(unit)
        ));
    }
    for layer in layers {
        out.push_str(&format!("  <g id=\"{}\">\n", layer.label));
        for line in layer.lines {
            let mut d = String::new();
            for (k, p) in line.points.iter().enumerate() {
                d.push_str(if k == 0 { "M" } else { " L" });
                d.push_str(&format!("{} {}", fmt_f64(p[0]), fmt_f64(-p[1])));
            }
            if line.closed {
                d.push_str(" Z");
            }
            out.push_str(&format!(
                "    <path d=\"{d}\" fill=\"none\" stroke=\"{}\" stroke-width=\"{}\"/>\n",
                layer.stroke,
                fmt_f64(layer.width * unit)
            ));
        }
        out.push_str("  </g>\n");
    }
    for p in points {
        out.push_str(&format!(
            "  <circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"black\"/>\n",
            fmt_f64(p[0]),
            fmt_f64(-p[1]),
            fmt_f64(3.0 * unit)
        ));
    }
    out.push_str("</svg>\n");
    out
}

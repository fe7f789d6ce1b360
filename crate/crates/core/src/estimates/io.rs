//! File formats for masks and contours.
//!
//! A mask is stored as a pair of files sharing a stem: `<stem>.csv` holds one
//! line per grid row (first line at `y_lo`) of comma-separated `0`/`1` flags,
//! and `<stem>.json` holds the metadata needed to rebuild it.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{EstimateMask, Grid2D, MaskKind, Polyline};
use crate::json::{self, fmt_f64};

#[derive(Debug, Error)]
pub enum MaskIoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskMetadata {
    pub system: String,
    pub grid: Grid2D,
    pub kind: MaskKind,
    pub p: usize,
    pub radius_used: f64,
    pub threshold_used: Option<f64>,
    pub member_count: usize,
    pub undecided: usize,
    pub component_only: bool,
    /// Start of the iterate window the radius was computed for.
    #[serde(default = "one")]
    pub p_tilde: usize,
    /// Name of the CSV file holding the membership flags.
    pub data: String,
}

fn one() -> usize {
    1
}

/// Run facts recorded next to each mask.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskContext {
    pub system: String,
    pub component_only: bool,
    pub p_tilde: usize,
}

pub fn mask_to_csv(mask: &EstimateMask) -> String {
    let nx = mask.grid.nx();
    let mut out = String::with_capacity(mask.membership.len() * 2);
    for row in mask.membership.chunks(nx) {
        let line: Vec<&str> = row.iter().map(|&m| if m { "1" } else { "0" }).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn membership_from_csv(text: &str, grid: &Grid2D) -> Result<Vec<bool>, String> {
    let mut cells = Vec::with_capacity(grid.len());
    let mut rows = 0;
    for (r, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        rows += 1;
        let before = cells.len();
        for tok in line.split(',') {
            match tok.trim() {
                "0" => cells.push(false),
                "1" => cells.push(true),
                other => return Err(format!("row {}: unexpected value {other:?}", r + 1)),
            }
        }
        if cells.len() - before != grid.nx() {
            return Err(format!(
                "row {}: expected {} values, found {}",
                r + 1,
                grid.nx(),
                cells.len() - before
            ));
        }
    }
    if rows != grid.ny() {
        return Err(format!("expected {} rows, found {rows}", grid.ny()));
    }
    Ok(cells)
}

fn write(path: &Path, contents: &str) -> Result<(), MaskIoError> {
    fs::write(path, contents).map_err(|source| MaskIoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read(path: &Path) -> Result<String, MaskIoError> {
    fs::read_to_string(path).map_err(|source| MaskIoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `<stem>.csv` and `<stem>.json` into `dir`; returns the JSON path.
pub fn write_mask(
    dir: &Path,
    stem: &str,
    mask: &EstimateMask,
    ctx: &MaskContext,
) -> Result<PathBuf, MaskIoError> {
    let csv_name = format!("{stem}.csv");
    let meta = MaskMetadata {
        system: ctx.system.clone(),
        grid: mask.grid.clone(),
        kind: mask.kind,
        p: mask.p,
        radius_used: mask.radius_used,
        threshold_used: mask.threshold_used,
        member_count: mask.count(),
        undecided: mask.undecided,
        component_only: ctx.component_only,
        p_tilde: ctx.p_tilde,
        data: csv_name.clone(),
    };
    write(&dir.join(&csv_name), &mask_to_csv(mask))?;
    let json_path = dir.join(format!("{stem}.json"));
    let text = json::to_string(&meta).expect("metadata serializes");
    write(&json_path, &text)?;
    Ok(json_path)
}

/// Loads a mask from its JSON metadata file and the CSV it names.
pub fn read_mask(json_path: &Path) -> Result<(MaskMetadata, EstimateMask), MaskIoError> {
    let meta: MaskMetadata =
        serde_json::from_str(&read(json_path)?).map_err(|e| MaskIoError::Parse {
            path: json_path.to_path_buf(),
            message: e.to_string(),
        })?;
    meta.grid.validate().map_err(|e| MaskIoError::Parse {
        path: json_path.to_path_buf(),
        message: e.to_string(),
    })?;
    let csv_path = json_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(&meta.data);
    let membership = membership_from_csv(&read(&csv_path)?, &meta.grid).map_err(|message| {
        MaskIoError::Parse {
            path: csv_path.clone(),
            message,
        }
    })?;
    let mask = EstimateMask {
        grid: meta.grid.clone(),
        kind: meta.kind,
        p: meta.p,
        radius_used: meta.radius_used,
        threshold_used: meta.threshold_used,
        membership,
        undecided: meta.undecided,
    };
    Ok((meta, mask))
}

/// One `<path>` per polyline; the view box is the grid rectangle with the
/// y-axis pointing up.
pub fn contours_to_svg(grid: &Grid2D, lines: &[Polyline]) -> String {
    let [[x_lo, x_hi], [y_lo, y_hi]] = grid.bounds;
    let (w, h) = (x_hi - x_lo, y_hi - y_lo);
    let stroke = w.max(h) / 400.0;
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{} {} {} {}\" width=\"600\" height=\"{}\">\n",
        fmt_f64(x_lo),
        fmt_f64(-y_hi),
        fmt_f64(w),
        fmt_f64(h),
        (600.0 * h / w).round() as i64
    );
    for line in lines {
        let mut d = String::new();
        for (k, p) in line.points.iter().enumerate() {
            d.push_str(if k == 0 { "M" } else { " L" });
            d.push_str(&format!("{} {}", fmt_f64(p[0]), fmt_f64(-p[1])));
        }
        if line.closed {
            d.push_str(" Z");
        }
        out.push_str(&format!(
            "  <path d=\"{d}\" fill=\"none\" stroke=\"black\" stroke-width=\"{}\"/>\n",
            fmt_f64(stroke)
        ));
    }
    out.push_str("</svg>\n");
    out
}

#[derive(Serialize)]
struct ContourFile<'a> {
    bounds: [[f64; 2]; 2],
    polylines: &'a [Polyline],
}

pub fn contours_to_json(grid: &Grid2D, lines: &[Polyline]) -> String {
    json::to_string(&ContourFile {
        bounds: grid.bounds,
        polylines: lines,
    })
    .expect("contours serialize")
}

pub fn write_contours(
    dir: &Path,
    stem: &str,
    grid: &Grid2D,
    lines: &[Polyline],
) -> Result<(), MaskIoError> {
    write(
        &dir.join(format!("{stem}.svg")),
        &contours_to_svg(grid, lines),
    )?;
    write(
        &dir.join(format!("{stem}.contours.json")),
        &contours_to_json(grid, lines),
    )
}

//! Run configuration: TOML file values overridden by command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use doa_core::estimates::{Grid2D, MaskKind};
use doa_core::oracle::OracleParams;
use doa_core::systems::{SystemConfig, BUILTIN_NAMES};
use doa_core::DiscreteSystem;
use serde::Deserialize;

/// `[run]` table of a config file. Every key is optional.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub grid: Option<String>,
    pub p: Option<String>,
    pub kinds: Option<String>,
    pub component_only: Option<bool>,
    pub out: Option<PathBuf>,
    pub radius: Option<f64>,
    pub max_iter: Option<usize>,
    pub escape: Option<f64>,
    pub directions: Option<usize>,
    pub max_steps: Option<usize>,
    pub order: Option<usize>,
    /// Periods of cycles to locate and draw (2-D systems only).
    pub periodic: Option<Vec<usize>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    system: toml::Table,
    #[serde(default)]
    run: RunSection,
}

/// Flags shared by every subcommand that needs a system.
#[derive(Debug, Default, Clone, clap::Args)]
pub struct CommonArgs {
    /// Built-in system name or path to a system TOML file.
    #[arg(long)]
    pub system: Option<String>,
    /// Run configuration file with a [system] and an optional [run] table.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Clone, clap::Args)]
pub struct GridArgs {
    /// Sampling grid as "x_lo,x_hi,y_lo,y_hi,nx,ny".
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<String>,
    /// Iterate counts, e.g. "0..6" (inclusive), "2,4" or "3".
    #[arg(long)]
    pub p: Option<String>,
    /// Comma-separated kinds: np, mp, np~, mp~.
    #[arg(long)]
    pub kinds: Option<String>,
    /// Keep only the connected component containing the origin.
    #[arg(long)]
    pub component_only: bool,
    /// Ball radius to use instead of the computed one.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Oracle iteration cap.
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Oracle escape radius.
    #[arg(long)]
    pub escape: Option<f64>,
    /// Directions sampled when computing the ball radius.
    #[arg(long)]
    pub directions: Option<usize>,
}

pub struct Loaded {
    pub system: DiscreteSystem,
    pub run: RunSection,
}

fn system_from_table(table: toml::Table, origin: &str) -> Result<DiscreteSystem> {
    if let Some(name) = table.get("builtin") {
        let name = name
            .as_str()
            .ok_or_else(|| anyhow!("{origin}: `builtin` must be a string"))?;
        if table.len() > 1 {
            bail!("{origin}: `builtin` cannot be combined with other system keys");
        }
        return builtin(name);
    }
    let cfg: SystemConfig = table
        .try_into()
        .map_err(|e: toml::de::Error| anyhow!("{origin}: {e}"))?;
    cfg.build().map_err(|e| anyhow!("{origin}: {e}"))
}

fn builtin(name: &str) -> Result<DiscreteSystem> {
    DiscreteSystem::builtin(name).ok_or_else(|| {
        anyhow!(
            "unknown system `{name}`; built-ins are {}",
            BUILTIN_NAMES.join(", ")
        )
    })
}

fn read_toml(path: &Path) -> Result<toml::Table> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.parse::<toml::Table>()
        .map_err(|e| anyhow!("{}: {e}", path.display()))
}

/// `--system` value: a built-in name, or a TOML file holding either the
/// system keys at top level or a `[system]` table.
fn system_from_arg(arg: &str) -> Result<DiscreteSystem> {
    let path = Path::new(arg);
    if BUILTIN_NAMES.contains(&arg) || !path.exists() {
        return builtin(arg);
    }
    let mut table = read_toml(path)?;
    let origin = path.display().to_string();
    match table.remove("system") {
        Some(toml::Value::Table(t)) => system_from_table(t, &origin),
        Some(_) => bail!("{origin}: `system` must be a table"),
        None => system_from_table(table, &origin),
    }
}

pub fn load(common: &CommonArgs) -> Result<Loaded> {
    let from_file = match &common.config {
        Some(path) => {
            let table = read_toml(path)?;
            let file: ConfigFile = table
                .try_into()
                .map_err(|e: toml::de::Error| anyhow!("{}: {e}", path.display()))?;
            Some((file, path.display().to_string()))
        }
        None => None,
    };
    let (system, run) = match (&common.system, from_file) {
        (Some(arg), file) => (
            system_from_arg(arg)?,
            file.map(|f| f.0.run).unwrap_or_default(),
        ),
        (None, Some((file, origin))) => (system_from_table(file.system, &origin)?, file.run),
        (None, None) => bail!("either --system or --config is required"),
    };
    let mut run = run;
    if let Some(out) = &common.out {
        run.out = Some(out.clone());
    }
    Ok(Loaded { system, run })
}

impl RunSection {
    pub fn merge_grid_args(&mut self, g: &GridArgs) {
        if g.grid.is_some() {
            self.grid = g.grid.clone();
        }
        if g.p.is_some() {
            self.p = g.p.clone();
        }
        if g.kinds.is_some() {
            self.kinds = g.kinds.clone();
        }
        if g.component_only {
            self.component_only = Some(true);
        }
        self.radius = g.radius.or(self.radius);
        self.max_iter = g.max_iter.or(self.max_iter);
        self.escape = g.escape.or(self.escape);
        self.directions = g.directions.or(self.directions);
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn grid_for(&self, system: &DiscreteSystem) -> Result<Grid2D> {
        match &self.grid {
            Some(spec) => parse_grid(spec),
            None => Ok(default_grid(system)),
        }
    }

    pub fn p_values(&self, default: &str) -> Result<Vec<usize>> {
        parse_p(self.p.as_deref().unwrap_or(default))
    }

    pub fn kinds(&self, default: &str) -> Result<Vec<MaskKind>> {
        parse_kinds(self.kinds.as_deref().unwrap_or(default))
    }

    pub fn oracle_params(&self, radius: f64) -> Result<OracleParams> {
        let p = OracleParams {
            radius,
            max_iter: self.max_iter.unwrap_or(OracleParams::DEFAULT_MAX_ITER),
            escape_radius: self.escape.unwrap_or(OracleParams::DEFAULT_ESCAPE),
        };
        if p.max_iter == 0 {
            bail!("--max-iter must be at least 1");
        }
        if p.escape_radius.partial_cmp(&radius) != Some(std::cmp::Ordering::Greater) {
            bail!(
                "--escape {} must exceed the ball radius {radius}",
                p.escape_radius
            );
        }
        Ok(p)
    }
}

/// Viewports used for the built-in systems; 1-D systems use a two-row grid
/// whose y-coordinate is ignored.
pub fn default_grid(system: &DiscreteSystem) -> Grid2D {
    let (bounds, nx, ny) = match system.name() {
        "ellipse" => ([[-1.2, 1.2], [-1.2, 1.2]], 600, 600),
        "predprey" | "vanderpol" => ([[-1.5, 1.5], [-1.5, 1.5]], 600, 600),
        "intro-quartic" => ([[-3.5, 2.0], [-0.5, 0.5]], 2000, 2),
        "moebius-e" => ([[-10.0, 0.999], [-0.5, 0.5]], 2000, 2),
        _ if system.dimension() == 1 => ([[-2.0, 2.0], [-0.5, 0.5]], 2000, 2),
        _ => ([[-2.0, 2.0], [-2.0, 2.0]], 600, 600),
    };
    Grid2D::new(bounds, nx, ny).expect("default grids are valid")
}

pub fn parse_grid(spec: &str) -> Result<Grid2D> {
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    if parts.len() != 6 {
        bail!("--grid expects \"x_lo,x_hi,y_lo,y_hi,nx,ny\", got {spec:?}");
    }
    let f = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| anyhow!("--grid: {s:?} is not a number"))
    };
    let n = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| anyhow!("--grid: {s:?} is not a cell count"))
    };
    let bounds = [[f(parts[0])?, f(parts[1])?], [f(parts[2])?, f(parts[3])?]];
    Grid2D::new(bounds, n(parts[4])?, n(parts[5])?).map_err(|e| anyhow!("--grid: {e}"))
}

/// `"a..b"` is inclusive; comma lists and single values are accepted too.
pub fn parse_p(spec: &str) -> Result<Vec<usize>> {
    let num = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| anyhow!("--p: {s:?} is not a nonnegative integer"))
    };
    let mut out = Vec::new();
    for part in spec.split(',') {
        if let Some((a, b)) = part.split_once("..") {
            let (a, b) = (num(a)?, num(b)?);
            if a > b {
                bail!("--p: empty range {part:?}");
            }
            out.extend(a..=b);
        } else {
            out.push(num(part)?);
        }
    }
    if out.is_empty() {
        bail!("--p: no values given");
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

pub fn parse_kinds(spec: &str) -> Result<Vec<MaskKind>> {
    let mut out = Vec::new();
    for k in spec.split(',').map(str::trim) {
        let kind = match k.to_ascii_lowercase().as_str() {
            "np" => MaskKind::Np,
            "mp" => MaskKind::Mp,
            "np~" | "nptilde" => MaskKind::NpTilde,
            "mp~" | "mptilde" => MaskKind::MpTilde,
            _ => bail!("--kinds: unknown kind {k:?} (use np, mp, np~, mp~)"),
        };
        if !out.contains(&kind) {
            out.push(kind);
        }
    }
    Ok(out)
}

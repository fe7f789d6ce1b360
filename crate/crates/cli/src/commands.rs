use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use doa_core::analysis::{analyze, AnalysisReport};
use doa_core::estimates::io::{read_mask, write_contours, write_mask, MaskContext, MaskMetadata};
use doa_core::estimates::{
    connected_component, extract_contours, mask_field, rasterize, EstimateMask, Grid2D, MaskKind,
    Polyline,
};
use doa_core::json;
use doa_core::linalg::Classification;
use doa_core::oracle::{
    basin_intervals_1d, compare, oracle_mask, periodic_points, MaskComparison, OracleError,
    PeriodicPoint,
};
use doa_core::radius::{BallParams, RadiusError};
use doa_core::series1d::{
    continuation_drive, DriveOptions, EndpointStatus, RadiusMethod, SeriesError,
};
use doa_core::DiscreteSystem;
use serde::Serialize;

use crate::config::{Loaded, RunSection};
use crate::figure::{overlay_svg, Layer};

/// The method does not apply to the system; mapped to exit code 2.
#[derive(Debug)]
pub struct NotApplicable(pub String);

impl fmt::Display for NotApplicable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "not applicable: {}", self.0)
    }
}

impl std::error::Error for NotApplicable {}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn emit<T: Serialize>(value: &T, file: Option<&Path>) -> Result<()> {
    let text = json::to_string(value)?;
    if let Some(path) = file {
        write_text(path, &text)?;
    }
    print!("{text}");
    Ok(())
}

/// System plus the results of the linear analysis, shared by the commands
/// that need a ball radius.
pub struct Session {
    pub system: DiscreteSystem,
    pub run: RunSection,
    pub analysis: AnalysisReport,
    pub radius: f64,
    pub p_tilde: usize,
}

pub fn run_analysis(system: &DiscreteSystem, run: &RunSection) -> Result<AnalysisReport> {
    let params = BallParams {
        directions: run.directions.unwrap_or(BallParams::default().directions),
        ..BallParams::default()
    };
    analyze(system, &params).map_err(|e| match e {
        RadiusError::NoBall { .. } => anyhow!(NotApplicable(e.to_string())),
        other => anyhow!(other),
    })
}

impl Session {
    pub fn new(loaded: Loaded) -> Result<Self> {
        let Loaded { system, run } = loaded;
        let analysis = run_analysis(&system, &run)?;
        if !analysis.is_applicable() {
            let s = &analysis.stability;
            bail!(NotApplicable(format!(
                "spectral radius {} of the Jacobian at the origin is not below 1",
                s.spectral_radius
            )));
        }
        let ball = analysis
            .ball
            .as_ref()
            .expect("applicable analyses have a ball");
        let computed = if ball.radius.is_finite() {
            ball.radius
        } else {
            eprintln!(
                "note: no violation found up to r_max = {}; using B({}) as the certified ball",
                ball.r_max, ball.r_max
            );
            ball.r_max
        };
        let radius = match run.radius {
            Some(r) if r > 0.0 && r.is_finite() => r,
            Some(r) => bail!("--radius must be positive and finite, got {r}"),
            None => computed,
        };
        let p_tilde = analysis
            .stability
            .p_tilde
            .expect("applicable analyses have p~");
        Ok(Self {
            system,
            run,
            analysis,
            radius,
            p_tilde,
        })
    }

    fn out_dir(&self) -> Result<PathBuf> {
        let dir = self.run.out_dir();
        ensure_dir(&dir)?;
        Ok(dir)
    }

    fn context(&self, component_only: bool) -> MaskContext {
        MaskContext {
            system: self.system.name().to_string(),
            component_only,
            p_tilde: self.p_tilde,
        }
    }
}

pub fn cmd_analyze(loaded: Loaded, write_file: bool) -> Result<()> {
    let analysis = run_analysis(&loaded.system, &loaded.run)?;
    let file = if write_file {
        let dir = loaded.run.out_dir();
        ensure_dir(&dir)?;
        Some(dir.join("analysis.json"))
    } else {
        None
    };
    emit(&analysis, file.as_deref())?;
    if !analysis.is_applicable() {
        bail!(NotApplicable(format!(
            "classification {:?}",
            analysis.stability.classification
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct MaskEntry {
    file: String,
    kind: MaskKind,
    p: usize,
    members: usize,
}

#[derive(Serialize)]
struct EstimateSummary<'a> {
    system: &'a str,
    radius: f64,
    p_tilde: usize,
    component_only: bool,
    masks: Vec<MaskEntry>,
}

fn mask_stem(kind: MaskKind, p: usize) -> String {
    format!("mask_{}_p{p}", kind.slug())
}

fn contour_stem(kind: MaskKind, p: usize) -> String {
    format!("contour_{}_p{p}", kind.slug())
}

pub struct EstimateOutput {
    pub masks: Vec<EstimateMask>,
    pub contours: Vec<(MaskKind, usize, Vec<Polyline>)>,
}

pub fn cmd_estimate(session: &Session, print: bool) -> Result<EstimateOutput> {
    let run = &session.run;
    let system = &session.system;
    let grid = run.grid_for(system)?;
    let default_kinds = if session.analysis.stability.classification == Classification::Contraction
    {
        "np,mp"
    } else {
        "np~,mp~"
    };
    let kinds = run.kinds(default_kinds)?;
    let p_values = run.p_values("0..4")?;
    let component_only = run.component_only.unwrap_or(false);
    let dir = session.out_dir()?;
    let ctx = session.context(component_only);

    let mut entries = Vec::new();
    let mut out = EstimateOutput {
        masks: Vec::new(),
        contours: Vec::new(),
    };
    for &kind in &kinds {
        if matches!(kind, MaskKind::Np | MaskKind::Mp)
            && session.analysis.stability.classification != Classification::Contraction
        {
            bail!(NotApplicable(format!(
                "{} needs a contractive Jacobian (‖A‖ < 1); use the windowed kinds np~/mp~",
                kind.slug()
            )));
        }
        for &p in &p_values {
            if kind == MaskKind::NpTilde && p < session.p_tilde {
                eprintln!(
                    "note: skipping {} at p = {p} < p~ = {}",
                    kind.slug(),
                    session.p_tilde
                );
                continue;
            }
            let mut mask = rasterize(system, &grid, kind, p, session.radius)?;
            if component_only {
                let seed = grid
                    .cell_containing([0.0, 0.0])
                    .ok_or_else(|| anyhow!("--component-only needs the origin inside the grid"))?;
                mask = connected_component(&mask, seed)?;
            }
            let stem = mask_stem(kind, p);
            write_mask(&dir, &stem, &mask, &ctx)?;
            let lines = extract_contours(&mask_field(&mask));
            write_contours(&dir, &contour_stem(kind, p), &grid, &lines)?;
            entries.push(MaskEntry {
                file: format!("{stem}.json"),
                kind,
                p,
                members: mask.count(),
            });
            out.contours.push((kind, p, lines));
            out.masks.push(mask);
        }
    }
    let summary = EstimateSummary {
        system: system.name(),
        radius: session.radius,
        p_tilde: session.p_tilde,
        component_only,
        masks: entries,
    };
    let text = json::to_string(&summary)?;
    write_text(&dir.join("estimate.json"), &text)?;
    if print {
        print!("{text}");
    }
    Ok(out)
}

#[derive(Serialize)]
struct OracleSummary<'a> {
    system: &'a str,
    radius: f64,
    max_iter: usize,
    escape_radius: f64,
    members: usize,
    undecided: usize,
    undecided_fraction: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    intervals: Option<Vec<(f64, f64)>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    periodic_points: Vec<PeriodicPoint>,
}

pub struct OracleOutput {
    pub contour: Vec<Polyline>,
    pub periodic: Vec<PeriodicPoint>,
}

pub fn cmd_oracle(session: &Session, print: bool) -> Result<OracleOutput> {
    let run = &session.run;
    let system = &session.system;
    let grid = run.grid_for(system)?;
    let params = run.oracle_params(session.radius)?;
    let dir = session.out_dir()?;

    let mask = oracle_mask(system, &grid, &params)?;
    write_mask(&dir, "mask_oracle", &mask, &session.context(false))?;
    let contour = extract_contours(&mask_field(&mask));
    write_contours(&dir, "contour_oracle", &grid, &contour)?;

    let intervals = if system.dimension() == 1 {
        let range = grid.bounds[0];
        Some(basin_intervals_1d(
            system,
            range,
            grid.nx().max(2),
            &params,
        )?)
    } else {
        None
    };
    let mut periodic = Vec::new();
    if system.dimension() == 2 {
        for &k in run.periodic.as_deref().unwrap_or(&[]) {
            periodic.extend(periodic_points(system, k, grid.bounds, 41)?);
        }
    }
    let summary = OracleSummary {
        system: system.name(),
        radius: params.radius,
        max_iter: params.max_iter,
        escape_radius: params.escape_radius,
        members: mask.count(),
        undecided: mask.undecided,
        undecided_fraction: mask.undecided as f64 / grid.len() as f64,
        intervals,
        periodic_points: periodic.clone(),
    };
    let text = json::to_string(&summary)?;
    write_text(&dir.join("oracle.json"), &text)?;
    if print {
        print!("{text}");
    }
    Ok(OracleOutput { contour, periodic })
}

#[derive(Serialize)]
struct Soundness {
    mask: String,
    comparison: MaskComparison,
}

#[derive(Serialize)]
struct InclusionCheck {
    relation: String,
    /// `theorem` checks must hold; `observation` checks record behaviour
    /// that is not guaranteed.
    status: &'static str,
    subset_violations: usize,
    holds: bool,
}

#[derive(Serialize)]
struct Report {
    system: String,
    p_tilde: usize,
    oracle_undecided_fraction: f64,
    soundness: Vec<Soundness>,
    inclusions: Vec<InclusionCheck>,
    theorem_checks_pass: bool,
    /// `p` with a cell of `M̃_p` outside `M̃_{p+1}`.
    mp_tilde_non_monotone_at: Vec<usize>,
}

fn label(kind: MaskKind, p: usize) -> String {
    let name = match kind {
        MaskKind::Np => "N",
        MaskKind::Mp => "M",
        MaskKind::NpTilde => "N~",
        MaskKind::MpTilde => "M~",
        MaskKind::OracleBasin => "oracle",
    };
    format!("{name}_{p}")
}

pub fn cmd_report(dir: &Path) -> Result<()> {
    let oracle_path = dir.join("mask_oracle.json");
    if !oracle_path.exists() {
        bail!(
            "missing artifacts: {} not found (run `doa oracle` first)",
            oracle_path.display()
        );
    }
    let (oracle_meta, oracle) = read_mask(&oracle_path)?;

    let mut names: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name().and_then(|n| n.to_str()).is_some_and(|n| {
                n.starts_with("mask_") && n.ends_with(".json") && n != "mask_oracle.json"
            })
        })
        .collect();
    names.sort();
    if names.is_empty() {
        bail!("missing artifacts: no estimate masks in {}", dir.display());
    }
    let mut masks: BTreeMap<(MaskKind, usize), (MaskMetadata, EstimateMask)> = BTreeMap::new();
    for path in &names {
        let (meta, mask) = read_mask(path)?;
        masks.insert((meta.kind, meta.p), (meta, mask));
    }

    let cmp = |a: &EstimateMask, b: &EstimateMask| -> Result<MaskComparison> {
        compare(a, b).map_err(|e| match e {
            OracleError::GridMismatch => {
                anyhow!("grid mismatch between masks in {}", dir.display())
            }
            other => anyhow!(other),
        })
    };

    let mut soundness = Vec::new();
    for ((kind, p), (_, mask)) in &masks {
        soundness.push(Soundness {
            mask: label(*kind, *p),
            comparison: cmp(mask, &oracle)?,
        });
    }

    let p_tilde = oracle_meta.p_tilde;
    let mut inclusions = Vec::new();
    let mut mp_tilde_non_monotone_at = Vec::new();
    // returns whether the inclusion holds, or None when a mask is missing
    let mut check =
        |a: (MaskKind, usize), b: (MaskKind, usize), theorem: bool| -> Result<Option<bool>> {
            let (Some((_, ma)), Some((_, mb))) = (masks.get(&a), masks.get(&b)) else {
                return Ok(None);
            };
            let c = cmp(ma, mb)?;
            inclusions.push(InclusionCheck {
                relation: format!("{} ⊆ {}", label(a.0, a.1), label(b.0, b.1)),
                status: if theorem { "theorem" } else { "observation" },
                subset_violations: c.subset_violations,
                holds: c.is_subset(),
            });
            Ok(Some(c.is_subset()))
        };
    let keys: Vec<(MaskKind, usize)> = masks.keys().copied().collect();
    for &(kind, p) in &keys {
        match kind {
            MaskKind::Np => {
                check((kind, p), (kind, p + 1), true)?;
                check((kind, p), (MaskKind::Mp, p), true)?;
            }
            MaskKind::Mp => {
                check((kind, p), (kind, p + 1), true)?;
            }
            MaskKind::NpTilde => {
                check((kind, p), (kind, p + 1), false)?;
                check((kind, p), (MaskKind::MpTilde, p + p_tilde), true)?;
            }
            MaskKind::MpTilde => {
                for q in p_tilde..2 * p_tilde {
                    if p >= q && p % q == 0 {
                        check((kind, p), (kind, p + q), true)?;
                    }
                }
                if p_tilde > 1 && check((kind, p), (kind, p + 1), false)? == Some(false) {
                    mp_tilde_non_monotone_at.push(p);
                }
            }
            MaskKind::OracleBasin => {}
        }
    }

    let theorem_checks_pass = soundness.iter().all(|s| s.comparison.is_subset())
        && inclusions
            .iter()
            .filter(|c| c.status == "theorem")
            .all(|c| c.holds);
    let report = Report {
        system: oracle_meta.system.clone(),
        p_tilde,
        oracle_undecided_fraction: oracle.undecided as f64 / oracle.grid.len() as f64,
        soundness,
        inclusions,
        theorem_checks_pass,
        mp_tilde_non_monotone_at,
    };
    emit(&report, Some(&dir.join("report.json")))
}

#[derive(Serialize)]
struct SeriesStepOut {
    center: f64,
    coefficients: Vec<f64>,
    radius_estimate: f64,
    fit_residual: f64,
    method: RadiusMethod,
    landing_steps: usize,
    interval: (f64, f64),
    cumulative_domain: Vec<(f64, f64)>,
}

#[derive(Serialize)]
struct SeriesOut<'a> {
    system: &'a str,
    order: usize,
    ball_radius: f64,
    steps: Vec<SeriesStepOut>,
    left: EndpointStatus,
    right: EndpointStatus,
}

pub fn cmd_series(loaded: Loaded, max_steps: Option<usize>, order: Option<usize>) -> Result<()> {
    let Loaded { system, run } = loaded;
    if system.dimension() != 1 {
        bail!(
            "dimension error: series continuation needs a 1-D system, `{}` has dimension {}",
            system.name(),
            system.dimension()
        );
    }
    let defaults = DriveOptions::default();
    let opts = DriveOptions {
        order: order.or(run.order).unwrap_or(defaults.order),
        max_steps: max_steps.or(run.max_steps).unwrap_or(defaults.max_steps),
        ..defaults
    };
    if opts.order < 8 || opts.max_steps == 0 {
        bail!("--order must be at least 8 and --max-steps at least 1");
    }
    let result = continuation_drive(&system, &opts).map_err(|e| match e {
        SeriesError::NotContractive(_) | SeriesError::NotFixingOrigin(_) => {
            anyhow!(NotApplicable(e.to_string()))
        }
        other => anyhow!(other),
    })?;

    let dir = run.out_dir();
    ensure_dir(&dir)?;
    let mut csv = String::from("step,center,m,abs_coefficient\n");
    for (i, s) in result.steps.iter().enumerate() {
        for (m, a) in s.series.coefficients().iter().enumerate() {
            csv.push_str(&format!(
                "{i},{},{m},{}\n",
                json::fmt_f64(s.center),
                json::fmt_f64(a.abs())
            ));
        }
    }
    write_text(&dir.join("series_coefficients.csv"), &csv)?;
    let out = SeriesOut {
        system: system.name(),
        order: opts.order,
        ball_radius: result.ball_radius,
        steps: result
            .steps
            .iter()
            .map(|s| SeriesStepOut {
                center: s.center,
                coefficients: s.series.coefficients().iter().take(32).copied().collect(),
                radius_estimate: s.radius_estimate,
                fit_residual: s.fit_residual,
                method: s.method,
                landing_steps: s.landing_steps,
                interval: s.interval,
                cumulative_domain: s.cumulative_domain.clone(),
            })
            .collect(),
        left: result.left,
        right: result.right,
    };
    emit(&out, Some(&dir.join("series.json")))
}

#[derive(Serialize)]
struct MonotoneStep {
    p: usize,
    violations: usize,
    component_violations: usize,
}

#[derive(Serialize)]
struct Experiment<'a> {
    system: &'a str,
    question: &'static str,
    radius: f64,
    p_tilde: usize,
    steps: Vec<MonotoneStep>,
}

/// Cellwise test of `Ñ_p ⊆ Ñ_{p+1}` over the requested `p`, both on the full
/// masks and on the components containing the origin.
pub fn cmd_experiment(session: &Session, write_file: bool) -> Result<()> {
    let system = &session.system;
    let grid: Grid2D = session.run.grid_for(system)?;
    let default_p = format!("{}..{}", session.p_tilde, session.p_tilde + 6);
    let ps = session.run.p_values(&default_p)?;
    let seed = grid.cell_containing([0.0, 0.0]);
    let masks: Vec<(usize, EstimateMask, Option<EstimateMask>)> = ps
        .iter()
        .chain(ps.last().map(|p| p + 1).as_ref())
        .map(|&p| -> Result<_> {
            let m = rasterize(system, &grid, MaskKind::NpTilde, p, session.radius)?;
            let c = match seed {
                Some(s) if m.is_member(s) => Some(connected_component(&m, s)?),
                _ => None,
            };
            Ok((p, m, c))
        })
        .collect::<Result<_>>()?;
    let mut steps = Vec::new();
    for w in masks.windows(2) {
        let (p, a, ac) = &w[0];
        let (q, b, bc) = &w[1];
        if *q != p + 1 {
            continue;
        }
        let component_violations = match (ac, bc) {
            (Some(x), Some(y)) => compare(x, y)?.subset_violations,
            _ => 0,
        };
        steps.push(MonotoneStep {
            p: *p,
            violations: compare(a, b)?.subset_violations,
            component_violations,
        });
    }
    let exp = Experiment {
        system: system.name(),
        question: "is N~_p contained in N~_{p+1}?",
        radius: session.radius,
        p_tilde: session.p_tilde,
        steps,
    };
    let file = if write_file {
        let dir = session.out_dir()?;
        Some(dir.join("experiment_ntilde.json"))
    } else {
        None
    };
    emit(&exp, file.as_deref())
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22",
];

/// Full reproduction from one config: analysis, estimates, oracle, report and
/// an overlay figure.
pub fn cmd_run(loaded: Loaded) -> Result<()> {
    let session = Session::new(loaded)?;
    let dir = session.out_dir()?;
    write_text(
        &dir.join("analysis.json"),
        &json::to_string(&session.analysis)?,
    )?;
    let est = cmd_estimate(&session, false)?;
    let orc = cmd_oracle(&session, false)?;

    let grid = session.run.grid_for(&session.system)?;
    let mut layers: Vec<Layer<'_>> = est
        .contours
        .iter()
        .enumerate()
        .map(|(i, (kind, p, lines))| Layer {
            label: label(*kind, *p).replace('~', "tilde"),
            lines,
            stroke: PALETTE[i % PALETTE.len()],
            width: 1.0,
        })
        .collect();
    layers.push(Layer {
        label: "oracle".into(),
        lines: &orc.contour,
        stroke: "black",
        width: 2.5,
    });
    let points: Vec<[f64; 2]> = orc.periodic.iter().map(|p| p.point).collect();
    write_text(
        &dir.join("figure.svg"),
        &overlay_svg(&grid, &layers, &points),
    )?;
    cmd_report(&dir)
}

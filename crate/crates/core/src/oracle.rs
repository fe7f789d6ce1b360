//! Brute-force basin membership by forward iteration, used as ground truth
//! for the inner estimates.

use serde::Serialize;
use thiserror::Error;

use crate::estimates::{par_cells, EstimateError, EstimateMask, Grid2D, MaskKind};
use crate::systems::{norm, DiscreteSystem};

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("masks are sampled on different grids")]
    GridMismatch,
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error("invalid oracle parameters: {0}")]
    InvalidParams(String),
    #[error("operation needs a {expected}-D system, got dimension {found}")]
    Dimension { expected: usize, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleParams {
    /// Radius of a ball known to lie in the basin.
    pub radius: f64,
    pub max_iter: usize,
    pub escape_radius: f64,
}

impl OracleParams {
    pub const DEFAULT_MAX_ITER: usize = 2000;
    pub const DEFAULT_ESCAPE: f64 = 1e6;

    pub fn new(radius: f64) -> Self {
        Self {
            radius,
            max_iter: Self::DEFAULT_MAX_ITER,
            escape_radius: Self::DEFAULT_ESCAPE,
        }
    }

    fn validate(&self) -> Result<(), OracleError> {
        if !(self.radius > 0.0) {
            return Err(OracleError::InvalidParams(format!(
                "radius {} must be positive",
                self.radius
            )));
        }
        if !(self.escape_radius > self.radius) {
            return Err(OracleError::InvalidParams(format!(
                "escape radius {} must exceed radius {}",
                self.escape_radius, self.radius
            )));
        }
        if self.max_iter == 0 {
            return Err(OracleError::InvalidParams(
                "max_iter must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum VerdictStatus {
    Converged,
    Escaped,
    ExitedDomain,
    Undecided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OracleVerdict {
    pub status: VerdictStatus,
    pub steps_used: usize,
}

pub fn basin_verdict(system: &DiscreteSystem, x: &[f64], params: &OracleParams) -> OracleVerdict {
    let verdict = |status, steps_used| OracleVerdict { status, steps_used };
    let mut cur = x.to_vec();
    let mut next = vec![0.0; cur.len()];
    for k in 0..=params.max_iter {
        if k > 0 {
            system.apply_into(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        if !system.in_domain(&cur) {
            return verdict(VerdictStatus::ExitedDomain, k);
        }
        let r = norm(&cur);
        if r < params.radius {
            return verdict(VerdictStatus::Converged, k);
        }
        if r > params.escape_radius {
            return verdict(VerdictStatus::Escaped, k);
        }
    }
    verdict(VerdictStatus::Undecided, params.max_iter)
}

/// Cells whose centre converges; undecided cells are excluded and counted.
pub fn oracle_mask(
    system: &DiscreteSystem,
    grid: &Grid2D,
    params: &OracleParams,
) -> Result<EstimateMask, OracleError> {
    grid.validate()?;
    params.validate()?;
    if system.dimension() > 2 {
        return Err(EstimateError::UnsupportedDimension(system.dimension()).into());
    }
    let dim = system.dimension();
    let statuses = par_cells(grid, |c| {
        basin_verdict(system, &grid.state(c, dim), params).status
    });
    Ok(EstimateMask {
        grid: grid.clone(),
        kind: MaskKind::OracleBasin,
        p: 0,
        radius_used: params.radius,
        threshold_used: None,
        membership: statuses
            .iter()
            .map(|&s| s == VerdictStatus::Converged)
            .collect(),
        undecided: statuses
            .iter()
            .filter(|&&s| s == VerdictStatus::Undecided)
            .count(),
    })
}

/// Maximal runs of converging samples on `range` (endpoints included).
/// Interior interval ends sit midway between the last converging sample and
/// its non-converging neighbour; runs touching the range keep its end.
pub fn basin_intervals_1d(
    system: &DiscreteSystem,
    range: [f64; 2],
    resolution: usize,
    params: &OracleParams,
) -> Result<Vec<(f64, f64)>, OracleError> {
    if system.dimension() != 1 {
        return Err(OracleError::Dimension {
            expected: 1,
            found: system.dimension(),
        });
    }
    params.validate()?;
    if !(range[0] < range[1]) || resolution < 2 {
        return Err(OracleError::InvalidParams(format!(
            "range {range:?} with {resolution} samples"
        )));
    }
    let step = (range[1] - range[0]) / (resolution - 1) as f64;
    let xs: Vec<f64> = (0..resolution)
        .map(|i| range[0] + i as f64 * step)
        .collect();
    let inside: Vec<bool> = {
        use rayon::prelude::*;
        xs.par_iter()
            .map(|&x| basin_verdict(system, &[x], params).status == VerdictStatus::Converged)
            .collect()
    };
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for i in 0..=resolution {
        let member = i < resolution && inside[i];
        match (start, member) {
            (None, true) => start = Some(i),
            (Some(s), false) => {
                let lo = if s == 0 {
                    xs[0]
                } else {
                    0.5 * (xs[s - 1] + xs[s])
                };
                let hi = if i == resolution {
                    xs[resolution - 1]
                } else {
                    0.5 * (xs[i - 1] + xs[i])
                };
                out.push((lo, hi));
                start = None;
            }
            _ => {}
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MaskComparison {
    /// Cells in A but not in B.
    pub subset_violations: usize,
    pub jaccard: f64,
    pub count_a: usize,
    pub count_b: usize,
    pub intersection: usize,
}

impl MaskComparison {
    pub fn is_subset(&self) -> bool {
        self.subset_violations == 0
    }
}

pub fn compare(a: &EstimateMask, b: &EstimateMask) -> Result<MaskComparison, OracleError> {
    if a.grid != b.grid || a.membership.len() != b.membership.len() {
        return Err(OracleError::GridMismatch);
    }
    let (mut only_a, mut both, mut union) = (0, 0, 0);
    let (mut count_a, mut count_b) = (0, 0);
    for (&x, &y) in a.membership.iter().zip(&b.membership) {
        count_a += x as usize;
        count_b += y as usize;
        both += (x && y) as usize;
        union += (x || y) as usize;
        only_a += (x && !y) as usize;
    }
    Ok(MaskComparison {
        subset_violations: only_a,
        jaccard: if union == 0 {
            0.0
        } else {
            both as f64 / union as f64
        },
        count_a,
        count_b,
        intersection: both,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodicPoint {
    pub point: [f64; 2],
    pub period: usize,
}

const NEWTON_TOL: f64 = 1e-11;
const DISTINCT_TOL: f64 = 1e-6;

fn residual(system: &DiscreteSystem, x: [f64; 2], k: usize) -> Option<[f64; 2]> {
    let y = system.iterate_n(&x, k)?;
    let r = [y[0] - x[0], y[1] - x[1]];
    (r[0].is_finite() && r[1].is_finite() && r[0].abs().max(r[1].abs()) < 1e8).then_some(r)
}

fn newton(system: &DiscreteSystem, mut x: [f64; 2], k: usize) -> Option<[f64; 2]> {
    let h = 1e-7;
    let mut g = residual(system, x, k)?;
    for _ in 0..80 {
        let gn = g[0].hypot(g[1]);
        if gn < NEWTON_TOL {
            return Some(x);
        }
        let gx = residual(system, [x[0] + h, x[1]], k)?;
        let gy = residual(system, [x[0], x[1] + h], k)?;
        let j = [
            [(gx[0] - g[0]) / h, (gy[0] - g[0]) / h],
            [(gx[1] - g[1]) / h, (gy[1] - g[1]) / h],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det.abs() < 1e-14 {
            return None;
        }
        let dx = [
            (j[1][1] * g[0] - j[0][1] * g[1]) / det,
            (-j[1][0] * g[0] + j[0][0] * g[1]) / det,
        ];
        let mut t = 1.0;
        loop {
            let cand = [x[0] - t * dx[0], x[1] - t * dx[1]];
            if let Some(gc) = residual(system, cand, k) {
                if gc[0].hypot(gc[1]) < gn {
                    x = cand;
                    g = gc;
                    break;
                }
            }
            t *= 0.5;
            if t < 1e-6 {
                return None;
            }
        }
    }
    None
}

/// Points of minimal period `k` found by damped Newton on `f^k(x) - x` from
/// an `n × n` seed grid over `bounds`. Sorted and deduplicated; the fixed
/// point at the origin is never reported.
pub fn periodic_points(
    system: &DiscreteSystem,
    k: usize,
    bounds: [[f64; 2]; 2],
    seeds_per_axis: usize,
) -> Result<Vec<PeriodicPoint>, OracleError> {
    if system.dimension() != 2 {
        return Err(OracleError::Dimension {
            expected: 2,
            found: system.dimension(),
        });
    }
    let grid = Grid2D::new(bounds, seeds_per_axis, seeds_per_axis)?;
    let found: Vec<Option<[f64; 2]>> = par_cells(&grid, |c| newton(system, grid.center(c), k));
    let mut out: Vec<[f64; 2]> = Vec::new();
    for x in found.into_iter().flatten() {
        let inside = x[0] >= bounds[0][0]
            && x[0] <= bounds[0][1]
            && x[1] >= bounds[1][0]
            && x[1] <= bounds[1][1];
        let lower_period = (1..k)
            .filter(|d| k.is_multiple_of(*d))
            .any(|d| residual(system, x, d).is_some_and(|r| r[0].hypot(r[1]) < DISTINCT_TOL));
        let known = out
            .iter()
            .any(|y| (y[0] - x[0]).hypot(y[1] - x[1]) < DISTINCT_TOL);
        if inside && !lower_period && !known && x[0].hypot(x[1]) > DISTINCT_TOL {
            out.push(x);
        }
    }
    out.sort_by(|a, b| a.partial_cmp(b).expect("finite points"));
    Ok(out
        .into_iter()
        .map(|point| PeriodicPoint { point, period: k })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::SystemConfig;

    fn sys(name: &str) -> DiscreteSystem {
        DiscreteSystem::builtin(name).unwrap()
    }

    fn half(dim: usize) -> DiscreteSystem {
        DiscreteSystem::linear_scaling(dim, 0.5)
    }

    #[test]
    fn verdict_examples() {
        let p = OracleParams::new(0.9);
        let q = sys("intro-quartic");
        assert_eq!(
            basin_verdict(&q, &[0.0], &p),
            OracleVerdict {
                status: VerdictStatus::Converged,
                steps_used: 0
            }
        );
        assert_eq!(
            basin_verdict(&q, &[0.5], &p).status,
            VerdictStatus::Converged
        );
        assert_eq!(basin_verdict(&q, &[1.5], &p).status, VerdictStatus::Escaped);
        let m = sys("moebius-e");
        assert_eq!(
            basin_verdict(&m, &[-5.0], &OracleParams::new(1.0)).status,
            VerdictStatus::Converged
        );
        assert_eq!(
            basin_verdict(&m, &[1.5], &OracleParams::new(1.0)).status,
            VerdictStatus::ExitedDomain
        );
    }

    #[test]
    fn undecided_at_repelling_fixed_point() {
        let q = sys("intro-quartic");
        let v = basin_verdict(&q, &[1.0], &OracleParams::new(0.9));
        assert_eq!(v.status, VerdictStatus::Undecided);
        assert_eq!(v.steps_used, 2000);
    }

    #[test]
    fn params_are_checked() {
        let g = Grid2D::square(1.0, 4).unwrap();
        let mut p = OracleParams::new(0.5);
        p.escape_radius = 0.1;
        assert!(matches!(
            oracle_mask(&half(2), &g, &p),
            Err(OracleError::InvalidParams(_))
        ));
    }

    #[test]
    fn linear_map_converges_everywhere() {
        let g = Grid2D::square(3.0, 30).unwrap();
        let m = oracle_mask(&half(2), &g, &OracleParams::new(0.1)).unwrap();
        assert_eq!(m.count(), g.len());
        assert_eq!(m.undecided, 0);
    }

    #[test]
    fn intervals_1d() {
        let sq = sys("square");
        let iv = basin_intervals_1d(&sq, [-2.0, 2.0], 4001, &OracleParams::new(0.5)).unwrap();
        assert_eq!(iv.len(), 1);
        assert!((iv[0].0 + 1.0).abs() < 1e-3 && (iv[0].1 - 1.0).abs() < 1e-3);

        let iv = basin_intervals_1d(&half(1), [-1.0, 1.0], 101, &OracleParams::new(0.1)).unwrap();
        assert_eq!(iv, vec![(-1.0, 1.0)]);

        assert!(matches!(
            basin_intervals_1d(&sys("ellipse"), [-1.0, 1.0], 10, &OracleParams::new(0.1)),
            Err(OracleError::Dimension { .. })
        ));
    }

    #[test]
    fn comparisons() {
        let g = Grid2D::square(1.0, 2).unwrap();
        let mk = |m: [bool; 4]| EstimateMask {
            grid: g.clone(),
            kind: MaskKind::Np,
            p: 0,
            radius_used: 1.0,
            threshold_used: None,
            membership: m.to_vec(),
            undecided: 0,
        };
        let a = mk([true, true, false, false]);
        let c = compare(&a, &a).unwrap();
        assert_eq!((c.subset_violations, c.jaccard), (0, 1.0));
        let empty = mk([false; 4]);
        let c = compare(&empty, &a).unwrap();
        assert_eq!((c.subset_violations, c.jaccard), (0, 0.0));
        let b = mk([false, true, true, false]);
        let c = compare(&a, &b).unwrap();
        assert_eq!(c.subset_violations, 1);
        assert!((c.jaccard - 1.0 / 3.0).abs() < 1e-15);

        let mut other = a.clone();
        other.grid = Grid2D::square(2.0, 2).unwrap();
        assert_eq!(compare(&a, &other), Err(OracleError::GridMismatch));
    }

    #[test]
    fn contracting_linear_map_has_no_cycles() {
        let flip = SystemConfig::from_toml_str(
            "name = \"flip\"\ndimension = 2\nexpressions = [\"x/2\", \"y/2\"]\n",
        )
        .unwrap()
        .build()
        .unwrap();
        assert!(periodic_points(&flip, 2, [[-1.0, 1.0], [-1.0, 1.0]], 5)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn vanderpol_four_cycles_lie_outside_the_basin() {
        let v = sys("vanderpol");
        let pts = periodic_points(&v, 4, [[-1.5, 1.5], [-1.5, 1.5]], 41).unwrap();
        // two 4-cycles: (±1/√2, ±1/√2)-type and (±cos π/8, ±sin π/8)-type
        assert_eq!(pts.len(), 8);
        for p in &pts {
            let y = v.iterate_n(&p.point, 4).unwrap();
            assert!((y[0] - p.point[0]).hypot(y[1] - p.point[1]) < 1e-9);
            // saddle cycles sit on the basin boundary; rounding decides the
            // long-run fate, so only a few periods are checked
            let params = OracleParams {
                max_iter: 20,
                ..OracleParams::new(0.365)
            };
            assert_eq!(
                basin_verdict(&v, &p.point, &params).status,
                VerdictStatus::Undecided
            );
        }
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!(pts
            .iter()
            .any(|p| (p.point[0] - r).abs() < 1e-9 && (p.point[1] - r).abs() < 1e-9));
    }
}

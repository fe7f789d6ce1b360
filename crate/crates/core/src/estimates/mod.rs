//! Inner estimates of the domain of attraction sampled on grids.
//!
//! Two families are provided for a ball radius `R` (or `R̃` in the convergent
//! case):
//!
//! * level sets of the truncated Lyapunov sum,
//!   `N_p = { x : V_p(x) < (p+1) R² }` with `V_p(x) = Σ_{k=0}^{p} ‖f^k(x)‖²`;
//! * preimages of the ball, `M_p = { x : ‖f^p(x)‖ < R }`.
//!
//! Membership is always decided at cell centres with strict inequalities.

mod contour;
pub mod io;

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::systems::{norm_sq, DiscreteSystem};

pub use contour::{extract_contours, Polyline, ScalarField};

/// Running sums of `V_p` above this are treated as divergent.
pub const V_ESCAPE: f64 = 1e12;

/// Largest `p` tried by [`find_covering_p`].
pub const COVERING_P_CAP: usize = 200;

#[derive(Debug, Error, PartialEq)]
pub enum EstimateError {
    #[error("invalid grid: {0}")]
    GridInvalid(String),
    #[error("seed cell {0} is not a member of the mask")]
    SeedNotMember(usize),
    #[error("rasterize needs a 1-D or 2-D system, got dimension {0}")]
    UnsupportedDimension(usize),
    #[error("radius must be positive, got {0}")]
    BadRadius(f64),
    #[error("no p <= {cap} covers the point")]
    NotCoveredWithinCap { cap: usize },
}

/// Regular grid over a rectangle; samples are cell centres, row-major with
/// `x` varying fastest and the first row at `y_lo`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub bounds: [[f64; 2]; 2],
    pub resolution: [usize; 2],
}

impl Grid2D {
    pub fn new(bounds: [[f64; 2]; 2], nx: usize, ny: usize) -> Result<Self, EstimateError> {
        let g = Self {
            bounds,
            resolution: [nx, ny],
        };
        g.validate()?;
        Ok(g)
    }

    /// Square grid `[-half, half]²` with `n × n` cells.
    pub fn square(half: f64, n: usize) -> Result<Self, EstimateError> {
        Self::new([[-half, half], [-half, half]], n, n)
    }

    pub fn validate(&self) -> Result<(), EstimateError> {
        for (axis, b) in self.bounds.iter().enumerate() {
            if !(b[0].is_finite() && b[1].is_finite() && b[0] < b[1]) {
                return Err(EstimateError::GridInvalid(format!(
                    "axis {axis} bounds [{}, {}] are not strictly ordered and finite",
                    b[0], b[1]
                )));
            }
        }
        if self.resolution.iter().any(|&n| n < 2) {
            return Err(EstimateError::GridInvalid(format!(
                "resolution {:?} must be at least 2 per axis",
                self.resolution
            )));
        }
        Ok(())
    }

    pub fn nx(&self) -> usize {
        self.resolution[0]
    }

    pub fn ny(&self) -> usize {
        self.resolution[1]
    }

    pub fn len(&self) -> usize {
        self.nx() * self.ny()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_size(&self) -> (f64, f64) {
        (
            (self.bounds[0][1] - self.bounds[0][0]) / self.nx() as f64,
            (self.bounds[1][1] - self.bounds[1][0]) / self.ny() as f64,
        )
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx() + i
    }

    pub fn ij(&self, index: usize) -> (usize, usize) {
        (index % self.nx(), index / self.nx())
    }

    pub fn center(&self, index: usize) -> [f64; 2] {
        let (i, j) = self.ij(index);
        let (dx, dy) = self.cell_size();
        [
            self.bounds[0][0] + (i as f64 + 0.5) * dx,
            self.bounds[1][0] + (j as f64 + 0.5) * dy,
        ]
    }

    /// Cell containing `p`, if inside the bounds.
    pub fn cell_containing(&self, p: [f64; 2]) -> Option<usize> {
        let (dx, dy) = self.cell_size();
        let fi = (p[0] - self.bounds[0][0]) / dx;
        let fj = (p[1] - self.bounds[1][0]) / dy;
        if fi < 0.0 || fj < 0.0 {
            return None;
        }
        let (i, j) = (fi as usize, fj as usize);
        (i < self.nx() && j < self.ny()).then(|| self.index(i, j))
    }

    /// State vector sampled at a cell: `(x, y)` in 2-D, `x` alone in 1-D.
    pub fn state(&self, index: usize, dimension: usize) -> Vec<f64> {
        let c = self.center(index);
        c[..dimension].to_vec()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MaskKind {
    Np,
    Mp,
    NpTilde,
    MpTilde,
    OracleBasin,
}

impl MaskKind {
    pub fn slug(&self) -> &'static str {
        match self {
            MaskKind::Np => "np",
            MaskKind::Mp => "mp",
            MaskKind::NpTilde => "nptilde",
            MaskKind::MpTilde => "mptilde",
            MaskKind::OracleBasin => "oracle",
        }
    }

    pub fn is_level_set(&self) -> bool {
        matches!(self, MaskKind::Np | MaskKind::NpTilde)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateMask {
    pub grid: Grid2D,
    pub kind: MaskKind,
    pub p: usize,
    pub radius_used: f64,
    /// `(p+1) R²` for level-set kinds.
    pub threshold_used: Option<f64>,
    pub membership: Vec<bool>,
    /// Oracle cells that reached neither verdict; zero for estimates.
    pub undecided: usize,
}

impl EstimateMask {
    pub fn count(&self) -> usize {
        self.membership.iter().filter(|&&m| m).count()
    }

    pub fn is_member(&self, index: usize) -> bool {
        self.membership[index]
    }
}

/// `Σ_{k=0}^{p} ‖f^k(x)‖²`; `+∞` if an iterate leaves the domain or the sum
/// passes [`V_ESCAPE`].
pub fn v_p(system: &DiscreteSystem, x: &[f64], p: usize) -> f64 {
    if !system.in_domain(x) {
        return f64::INFINITY;
    }
    let mut cur = x.to_vec();
    let mut next = vec![0.0; x.len()];
    let mut sum = norm_sq(&cur);
    for _ in 0..p {
        if sum > V_ESCAPE {
            return f64::INFINITY;
        }
        system.apply_into(&cur, &mut next);
        std::mem::swap(&mut cur, &mut next);
        if !system.in_domain(&cur) {
            return f64::INFINITY;
        }
        sum += norm_sq(&cur);
    }
    if sum > V_ESCAPE {
        f64::INFINITY
    } else {
        sum
    }
}

pub fn level_threshold(p: usize, radius: f64) -> f64 {
    (p as f64 + 1.0) * radius * radius
}

/// `V_p(x) < (p+1) R²`.
pub fn n_p_member(system: &DiscreteSystem, x: &[f64], p: usize, radius: f64) -> bool {
    v_p(system, x, p) < level_threshold(p, radius)
}

/// `f^p(x)` exists in the domain and `‖f^p(x)‖ < R`.
pub fn m_p_member(system: &DiscreteSystem, x: &[f64], p: usize, radius: f64) -> bool {
    system
        .iterate_n(x, p)
        .is_some_and(|y| norm_sq(&y).sqrt() < radius)
}

fn check_inputs(system: &DiscreteSystem, grid: &Grid2D, radius: f64) -> Result<(), EstimateError> {
    grid.validate()?;
    if !(radius > 0.0) {
        return Err(EstimateError::BadRadius(radius));
    }
    if system.dimension() > 2 {
        return Err(EstimateError::UnsupportedDimension(system.dimension()));
    }
    Ok(())
}

/// Evaluates a cell predicate over the grid in parallel; output order is the
/// grid order regardless of scheduling.
pub(crate) fn par_cells<T, F>(grid: &Grid2D, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..grid.len()).into_par_iter().map(f).collect()
}

/// Samples `N_p`/`Ñ_p` or `M_p`/`M̃_p` at every cell centre. 1-D systems use
/// the x-coordinate of each cell and ignore y.
pub fn rasterize(
    system: &DiscreteSystem,
    grid: &Grid2D,
    kind: MaskKind,
    p: usize,
    radius: f64,
) -> Result<EstimateMask, EstimateError> {
    check_inputs(system, grid, radius)?;
    let dim = system.dimension();
    let membership = match kind {
        MaskKind::Np | MaskKind::NpTilde => {
            par_cells(grid, |c| n_p_member(system, &grid.state(c, dim), p, radius))
        }
        MaskKind::Mp | MaskKind::MpTilde => {
            par_cells(grid, |c| m_p_member(system, &grid.state(c, dim), p, radius))
        }
        MaskKind::OracleBasin => {
            return Err(EstimateError::GridInvalid(
                "oracle masks are built by the oracle module".into(),
            ))
        }
    };
    Ok(EstimateMask {
        grid: grid.clone(),
        kind,
        p,
        radius_used: radius,
        threshold_used: kind.is_level_set().then(|| level_threshold(p, radius)),
        membership,
        undecided: 0,
    })
}

/// Member cells 4-connected to `seed`.
pub fn connected_component(
    mask: &EstimateMask,
    seed: usize,
) -> Result<EstimateMask, EstimateError> {
    if seed >= mask.membership.len() || !mask.membership[seed] {
        return Err(EstimateError::SeedNotMember(seed));
    }
    let grid = &mask.grid;
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut keep = vec![false; mask.membership.len()];
    let mut queue = VecDeque::from([seed]);
    keep[seed] = true;
    while let Some(c) = queue.pop_front() {
        let (i, j) = grid.ij(c);
        let neighbours = [
            (i > 0).then(|| c - 1),
            (i + 1 < nx).then(|| c + 1),
            (j > 0).then(|| c - nx),
            (j + 1 < ny).then(|| c + nx),
        ];
        for n in neighbours.into_iter().flatten() {
            if mask.membership[n] && !keep[n] {
                keep[n] = true;
                queue.push_back(n);
            }
        }
    }
    Ok(EstimateMask {
        membership: keep,
        ..mask.clone()
    })
}

/// Smallest `p ≥ p_min` with `x ∈ N_p`, searching up to [`COVERING_P_CAP`].
///
/// Failure only means the cap was reached, not that `x` lies outside the
/// domain of attraction.
pub fn find_covering_p(
    system: &DiscreteSystem,
    x: &[f64],
    radius: f64,
    p_min: usize,
) -> Result<usize, EstimateError> {
    (p_min..=COVERING_P_CAP)
        .find(|&p| n_p_member(system, x, p, radius))
        .ok_or(EstimateError::NotCoveredWithinCap {
            cap: COVERING_P_CAP,
        })
}

/// `V_p - (p+1) R²` at cell centres; negative inside `N_p`.
pub fn level_set_field(
    system: &DiscreteSystem,
    grid: &Grid2D,
    p: usize,
    radius: f64,
) -> ScalarField {
    let dim = system.dimension();
    let c = level_threshold(p, radius);
    ScalarField::new(
        grid.clone(),
        par_cells(grid, |i| v_p(system, &grid.state(i, dim), p) - c),
    )
}

/// `‖f^p‖ - R` at cell centres; negative inside `M_p`.
pub fn preimage_field(
    system: &DiscreteSystem,
    grid: &Grid2D,
    p: usize,
    radius: f64,
) -> ScalarField {
    let dim = system.dimension();
    ScalarField::new(
        grid.clone(),
        par_cells(grid, |i| {
            system
                .iterate_n(&grid.state(i, dim), p)
                .map_or(f64::INFINITY, |y| norm_sq(&y).sqrt() - radius)
        }),
    )
}

/// Indicator field of a mask: `-1` inside, `+1` outside.
pub fn mask_field(mask: &EstimateMask) -> ScalarField {
    ScalarField::new(
        mask.grid.clone(),
        mask.membership
            .iter()
            .map(|&m| if m { -1.0 } else { 1.0 })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::SystemConfig;

    fn sys(name: &str) -> DiscreteSystem {
        DiscreteSystem::builtin(name).unwrap()
    }

    fn half_1d() -> DiscreteSystem {
        SystemConfig::from_toml_str("name = \"h\"\ndimension = 1\nexpressions = [\"x/2\"]\n")
            .unwrap()
            .build()
            .unwrap()
    }

    #[test]
    fn v_p_examples() {
        assert_eq!(v_p(&sys("ellipse"), &[0.0, 0.0], 7), 0.0);
        assert_eq!(v_p(&half_1d(), &[1.0], 2), 1.3125);
        let want = 0.25 + 0.0625 + 0.00390625 + 0.0000152587890625;
        assert_eq!(v_p(&sys("square"), &[0.5], 3), want);
    }

    #[test]
    fn v_p_escapes_to_infinity() {
        assert_eq!(v_p(&sys("square"), &[10.0], 5), f64::INFINITY);
        assert_eq!(v_p(&sys("moebius-e"), &[1.5], 0), f64::INFINITY);
    }

    #[test]
    fn member_examples() {
        let e = sys("ellipse");
        let r = 0.707;
        for p in 0..5 {
            assert!(n_p_member(&e, &[0.0, 0.0], p, r));
            assert!(m_p_member(&e, &[0.0, 0.0], p, r));
        }
        assert!(n_p_member(&e, &[0.5, 0.0], 0, r));
        assert!(!n_p_member(&e, &[0.71, 0.0], 0, r));
        assert!(!m_p_member(&e, &[0.9, 0.0], 1, r));
        for x in [[0.3, 0.6], [0.7, 0.0], [0.71, 0.0]] {
            assert_eq!(m_p_member(&e, &x, 0, r), x[0].hypot(x[1]) < r);
        }
    }

    #[test]
    fn grid_geometry() {
        let g = Grid2D::new([[0.0, 4.0], [-1.0, 1.0]], 4, 2).unwrap();
        assert_eq!(g.center(0), [0.5, -0.5]);
        assert_eq!(g.center(5), [1.5, 0.5]);
        assert_eq!(g.cell_containing([1.2, 0.9]), Some(5));
        assert_eq!(g.cell_containing([4.2, 0.0]), None);
        assert!(Grid2D::new([[1.0, 0.0], [0.0, 1.0]], 4, 4).is_err());
        assert!(Grid2D::new([[0.0, 1.0], [0.0, 1.0]], 1, 4).is_err());
    }

    #[test]
    fn n0_on_ellipse_is_the_disc() {
        let e = sys("ellipse");
        let g = Grid2D::square(1.2, 101).unwrap();
        let r = 0.707;
        let n0 = rasterize(&e, &g, MaskKind::Np, 0, r).unwrap();
        let m0 = rasterize(&e, &g, MaskKind::Mp, 0, r).unwrap();
        for c in 0..g.len() {
            let p = g.center(c);
            assert_eq!(n0.membership[c], p[0].hypot(p[1]) < r);
        }
        assert_eq!(n0.membership, m0.membership);
        assert_eq!(n0.threshold_used, Some(r * r));
        assert_eq!(m0.threshold_used, None);
    }

    #[test]
    fn vanderpol_np_tilde_contains_origin() {
        let g = Grid2D::square(1.5, 61).unwrap();
        let m = rasterize(&sys("vanderpol"), &g, MaskKind::NpTilde, 2, 0.365).unwrap();
        let origin = g.cell_containing([0.0, 0.0]).unwrap();
        assert!(m.membership[origin]);
    }

    #[test]
    fn rasterize_errors() {
        let g = Grid2D {
            bounds: [[0.0, 0.0], [0.0, 1.0]],
            resolution: [4, 4],
        };
        assert!(matches!(
            rasterize(&sys("ellipse"), &g, MaskKind::Np, 0, 0.5),
            Err(EstimateError::GridInvalid(_))
        ));
    }

    fn mask_from(nx: usize, ny: usize, cells: &[bool]) -> EstimateMask {
        EstimateMask {
            grid: Grid2D::new([[0.0, nx as f64], [0.0, ny as f64]], nx, ny).unwrap(),
            kind: MaskKind::Np,
            p: 0,
            radius_used: 1.0,
            threshold_used: None,
            membership: cells.to_vec(),
            undecided: 0,
        }
    }

    #[test]
    fn components() {
        let full = mask_from(3, 3, &[true; 9]);
        assert_eq!(
            connected_component(&full, 4).unwrap().membership,
            full.membership
        );

        #[rustfmt::skip]
        let blobs = mask_from(4, 3, &[
            true,  true,  false, false,
            false, false, false, true,
            false, true,  false, true,
        ]);
        let a = connected_component(&blobs, 0).unwrap();
        assert_eq!(a.count(), 2);
        assert!(a.membership[1] && !a.membership[7] && !a.membership[9]);
        // diagonal contact does not connect
        #[rustfmt::skip]
        let diag = mask_from(2, 2, &[true, false, false, true]);
        assert_eq!(connected_component(&diag, 0).unwrap().count(), 1);
        assert_eq!(
            connected_component(&blobs, 2),
            Err(EstimateError::SeedNotMember(2))
        );
    }

    #[test]
    fn covering_p_for_ellipse_points() {
        let e = sys("ellipse");
        let r = 0.707;
        assert_eq!(find_covering_p(&e, &[0.1, 0.1], r, 0), Ok(0));
        let p = find_covering_p(&e, &[0.95, 0.0], r, 0).unwrap();
        assert!(p > 0 && n_p_member(&e, &[0.95, 0.0], p, r));
        // fixed point on the basin boundary is never covered
        assert!(find_covering_p(&e, &[1.0, 0.0], r, 0).is_err());
    }

    #[test]
    fn v_p_nondecreasing_in_p() {
        let s = sys("predprey");
        for x in [[0.4, -0.3], [1.2, 0.5], [-0.8, 0.9]] {
            let mut prev = 0.0;
            for p in 0..8 {
                let v = v_p(&s, &x, p);
                assert!(v >= prev);
                prev = v;
            }
        }
    }
}

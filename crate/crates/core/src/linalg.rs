//! Matrix analysis of the linear part `A` of a map at its fixed point.
//!
//! Norms are Euclidean operator norms (largest singular value). Sizes up to
//! two are handled in closed form; larger matrices go through `nalgebra`.

use std::fmt;

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

/// Powers of `A` examined before `p_tilde` gives up.
pub const P_TILDE_CAP: usize = 512;

/// Half-width of the band around 1 in which `‖A^p‖ < 1` is flagged as borderline.
pub const BORDERLINE_BAND: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not convergent: spectral radius {rho} >= 1")]
    NotConvergent { rho: f64 },
    #[error(
        "no power window with all norms below 1 found up to p = {cap} (spectral radius {rho})"
    )]
    CapExceeded { cap: usize, rho: f64 },
}

/// Dense square matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diagonal(entries: &[f64]) -> Self {
        let mut m = Self::zeros(entries.len());
        for (i, &d) in entries.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Panics unless `rows` is square.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "matrix must be square");
        Self {
            n,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data
            .chunks(self.n.max(1))
            .map(|r| r.to_vec())
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == 0.0)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|x| x * c).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn pow(&self, p: usize) -> Matrix {
        let mut result = Self::identity(self.n);
        let mut base = self.clone();
        let mut k = p;
        while k > 0 {
            if k & 1 == 1 {
                result = result.matmul(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.matmul(&base);
            }
        }
        result
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.data)
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

/// Largest singular value.
pub fn operator_norm(a: &Matrix) -> f64 {
    match a.dim() {
        0 => 0.0,
        1 => a[(0, 0)].abs(),
        2 => {
            // Largest eigenvalue of the symmetric matrix AᵀA.
            let (p, q, r, s) = (a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]);
            let m11 = p * p + r * r;
            let m22 = q * q + s * s;
            let m12 = p * q + r * s;
            let half_trace = 0.5 * (m11 + m22);
            let half_gap = 0.5 * (m11 - m22);
            let lambda = half_trace + half_gap.hypot(m12);
            lambda.max(0.0).sqrt()
        }
        _ => a
            .to_nalgebra()
            .singular_values()
            .iter()
            .fold(0.0_f64, |m, &s| m.max(s)),
    }
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(a: &Matrix) -> f64 {
    match a.dim() {
        0 => 0.0,
        1 => a[(0, 0)].abs(),
        2 => {
            let tr = a[(0, 0)] + a[(1, 1)];
            let det = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
            let disc = tr * tr - 4.0 * det;
            if disc >= 0.0 {
                let root = disc.sqrt();
                (0.5 * (tr + root)).abs().max((0.5 * (tr - root)).abs())
            } else {
                det.sqrt()
            }
        }
        _ => a
            .to_nalgebra()
            .complex_eigenvalues()
            .iter()
            .fold(0.0_f64, |m, z| m.max(z.norm())),
    }
}

/// Outcome of the search for the first power window with all norms below 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PTildeSearch {
    pub p_tilde: usize,
    /// `‖A^q‖` for `q = 1 ..= 2 p̃ - 1`.
    pub power_norms: Vec<f64>,
    /// Powers whose norm fell within [`BORDERLINE_BAND`] of 1.
    pub borderline_powers: Vec<usize>,
}

impl PTildeSearch {
    pub fn window(&self) -> Window {
        Window::new(self.p_tilde)
    }
}

/// Smallest `p̃ ≥ 1` with `‖A^q‖ < 1` for every `q ≥ p̃`.
///
/// A candidate `p` is accepted once every power in `{p, …, 2p-1}` has norm
/// below 1. Any `q ≥ p` is a sum of window members, so submultiplicativity
/// extends the bound to all larger powers. The first accepted candidate is the
/// smallest one with the universal property.
pub fn p_tilde_search(a: &Matrix) -> Result<PTildeSearch, LinalgError> {
    let rho = spectral_radius(a);
    if rho >= 1.0 - 1e-12 {
        return Err(LinalgError::NotConvergent { rho });
    }
    // norms[q - 1] = ‖A^q‖
    let mut norms: Vec<f64> = Vec::new();
    let mut power = Matrix::identity(a.dim());
    let mut ensure = |upto: usize, norms: &mut Vec<f64>| {
        while norms.len() < upto {
            power = power.matmul(a);
            norms.push(operator_norm(&power));
        }
    };
    for p in 1..=P_TILDE_CAP {
        ensure(2 * p - 1, &mut norms);
        if norms[p - 1..2 * p - 1].iter().all(|&nq| nq < 1.0) {
            let borderline_powers = norms
                .iter()
                .enumerate()
                .filter(|(_, &nq)| (nq - 1.0).abs() <= BORDERLINE_BAND)
                .map(|(i, _)| i + 1)
                .collect();
            return Ok(PTildeSearch {
                p_tilde: p,
                power_norms: norms,
                borderline_powers,
            });
        }
    }
    Err(LinalgError::CapExceeded {
        cap: P_TILDE_CAP,
        rho,
    })
}

pub fn p_tilde(a: &Matrix) -> Result<usize, LinalgError> {
    p_tilde_search(a).map(|s| s.p_tilde)
}

/// Iterate counts `{start, …, 2·start - 1}` over which the norm-decrease
/// condition is imposed. `start = 1` is the contraction case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Window {
    start: usize,
}

impl Window {
    /// Panics if `start == 0`.
    pub fn new(start: usize) -> Self {
        assert!(start >= 1, "window start must be positive");
        Self { start }
    }

    pub fn contraction() -> Self {
        Self::new(1)
    }

    pub fn start(&self) -> usize {
        self.start
    }

    /// Largest member, `2·start - 1`.
    pub fn end(&self) -> usize {
        2 * self.start - 1
    }

    pub fn contains(&self, p: usize) -> bool {
        p >= self.start && p <= self.end()
    }

    pub fn members(&self) -> Vec<usize> {
        (self.start..=self.end()).collect()
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.start == 1 {
            write!(f, "{{1}}")
        } else {
            write!(f, "{{{}..{}}}", self.start, self.end())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Classification {
    /// `‖A‖ < 1`.
    Contraction,
    /// `‖A‖ ≥ 1` but `ρ(A) < 1`.
    ConvergentOnly,
    /// `ρ(A) ≥ 1`.
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub operator_norm: f64,
    pub spectral_radius: f64,
    pub p_tilde: Option<usize>,
    pub classification: Classification,
    pub diagnostics: Vec<String>,
}

impl StabilityReport {
    pub fn window(&self) -> Option<Window> {
        self.p_tilde.map(Window::new)
    }
}

pub fn classify(a: &Matrix) -> StabilityReport {
    let norm = operator_norm(a);
    let rho = spectral_radius(a);
    let mut diagnostics = Vec::new();
    let (classification, p_tilde) = if rho >= 1.0 {
        (Classification::NotApplicable, None)
    } else if norm < 1.0 {
        (Classification::Contraction, Some(1))
    } else {
        match p_tilde_search(a) {
            Ok(search) => {
                for q in &search.borderline_powers {
                    diagnostics.push(format!("norm of A^{q} is within 1e-12 of 1"));
                }
                (Classification::ConvergentOnly, Some(search.p_tilde))
            }
            Err(e) => {
                diagnostics.push(e.to_string());
                (Classification::NotApplicable, None)
            }
        }
    };
    StabilityReport {
        operator_norm: norm,
        spectral_radius: rho,
        p_tilde,
        classification,
        diagnostics,
    }
}

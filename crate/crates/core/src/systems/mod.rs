//! Discrete dynamical systems `x_{k+1} = f(x_k)` with a fixed point at the origin.

mod builtins;
mod config;
pub mod expr;

use serde::Serialize;
use thiserror::Error;

use crate::linalg::Matrix;
use crate::scalar::Scalar;

pub use builtins::BUILTIN_NAMES;
pub use config::{ConfigError, SystemConfig};
use expr::Expr;

/// Step used for central finite differences at the origin.
pub const FD_STEP: f64 = 1e-6;

/// `‖f(0)‖∞` allowed for the origin to count as a fixed point.
pub const FIXED_POINT_TOL: f64 = 1e-12;

/// Largest entrywise gap between a supplied Jacobian and finite differences.
pub const JACOBIAN_TOL: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum SystemError {
    #[error("point {point:?} lies outside the domain of '{system}'")]
    DomainExit { system: String, point: Vec<f64> },
    #[error("dimension must be positive")]
    ZeroDimension,
    #[error("expected {expected} components, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("the origin is not strictly inside the domain box")]
    OriginOutsideDomain,
    #[error("f(0) = {value:?} is not the origin")]
    NotFixedPoint { value: Vec<f64> },
    #[error("supplied Jacobian differs from finite differences by {gap:e}")]
    JacobianMismatch { gap: f64 },
    #[error("expression {component} references variable x{variable} in a {dimension}-dimensional system")]
    UnknownVariable {
        component: usize,
        variable: usize,
        dimension: usize,
    },
    #[error("domain bounds for axis {axis} are not ordered: [{lo}, {hi}]")]
    BadBounds { axis: usize, lo: f64, hi: f64 },
}

/// Axis-aligned open box `Π (lo_i, hi_i)`; bounds may be infinite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DomainBox {
    bounds: Vec<(f64, f64)>,
}

impl DomainBox {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self, SystemError> {
        for (axis, &(lo, hi)) in bounds.iter().enumerate() {
            if lo.is_nan() || hi.is_nan() || lo >= hi {
                return Err(SystemError::BadBounds { axis, lo, hi });
            }
        }
        Ok(Self { bounds })
    }

    pub fn whole_space(dimension: usize) -> Self {
        Self {
            bounds: vec![(f64::NEG_INFINITY, f64::INFINITY); dimension],
        }
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    #[inline]
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(&self.bounds)
            .all(|(&v, &(lo, hi))| v > lo && v < hi)
    }

    /// Euclidean distance from the origin to the boundary (infinite for ℝⁿ).
    pub fn distance_from_origin(&self) -> f64 {
        self.bounds
            .iter()
            .map(|&(lo, hi)| (-lo).min(hi))
            .fold(f64::INFINITY, f64::min)
    }
}

/// How the map is computed.
#[derive(Debug, Clone, PartialEq)]
pub enum MapDef {
    /// `x/2 - x²/4 + x³/2 + x⁴/4`
    IntroQuartic,
    /// `x²`
    Square,
    /// `x / (e + (1 - e) x)`
    MoebiusE,
    /// `(x, y) · (1 + x² + 2y²) / 2`
    Ellipse,
    /// `(a x (1 - x) - x y, x y / b)`
    PredatorPrey { a: f64, b: f64 },
    /// `(x - y, x + (1 - a) y + a x² y)`
    VanDerPol { a: f64 },
    /// One expression per component.
    Expressions(Vec<Expr>),
}

impl MapDef {
    fn apply<S: Scalar>(&self, x: &[S], out: &mut [S]) {
        match self {
            MapDef::IntroQuartic => {
                let v = &x[0];
                let v2 = v.clone() * v.clone();
                let v3 = v2.clone() * v.clone();
                let v4 = v2.clone() * v2.clone();
                out[0] = v.clone() * v.lift(0.5) - v2 * v.lift(0.25)
                    + v3 * v.lift(0.5)
                    + v4 * v.lift(0.25);
            }
            MapDef::Square => out[0] = x[0].clone() * x[0].clone(),
            MapDef::MoebiusE => {
                let e = std::f64::consts::E;
                let v = &x[0];
                out[0] = v.clone() / (v.lift(e) + v.clone() * v.lift(1.0 - e));
            }
            MapDef::Ellipse => {
                let (u, v) = (&x[0], &x[1]);
                let s = (u.lift(1.0) + u.clone() * u.clone() + u.lift(2.0) * v.clone() * v.clone())
                    * u.lift(0.5);
                out[0] = u.clone() * s.clone();
                out[1] = v.clone() * s;
            }
            MapDef::PredatorPrey { a, b } => {
                let (u, v) = (&x[0], &x[1]);
                let uv = u.clone() * v.clone();
                out[0] = u.lift(*a) * u.clone() * (u.lift(1.0) - u.clone()) - uv.clone();
                out[1] = uv * u.lift(1.0 / b);
            }
            MapDef::VanDerPol { a } => {
                let (u, v) = (&x[0], &x[1]);
                out[0] = u.clone() - v.clone();
                out[1] = u.clone()
                    + u.lift(1.0 - a) * v.clone()
                    + u.lift(*a) * u.clone() * u.clone() * v.clone();
            }
            MapDef::Expressions(exprs) => {
                for (o, e) in out.iter_mut().zip(exprs) {
                    *o = e.eval(x);
                }
            }
        }
    }
}

/// A map `f: Ω → ℝⁿ` with `f(0) = 0`, on an open box `Ω` containing the origin.
///
/// Immutable after construction; safe to share between threads.
#[derive(Debug, Clone)]
pub struct DiscreteSystem {
    name: String,
    dimension: usize,
    map: MapDef,
    domain: DomainBox,
    jacobian: Option<Matrix>,
}

/// Forward orbit `x, f(x), …`; stops early if an iterate leaves the domain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Orbit {
    pub points: Vec<Vec<f64>>,
    /// Index of the first iterate outside the domain (not included in `points`).
    pub exited_domain_at: Option<usize>,
}

impl DiscreteSystem {
    /// Validates the fixed point, the domain and, if given, the Jacobian.
    pub fn new(
        name: impl Into<String>,
        dimension: usize,
        map: MapDef,
        domain: DomainBox,
        jacobian: Option<Matrix>,
    ) -> Result<Self, SystemError> {
        if dimension == 0 {
            return Err(SystemError::ZeroDimension);
        }
        if domain.bounds().len() != dimension {
            return Err(SystemError::DimensionMismatch {
                expected: dimension,
                got: domain.bounds().len(),
            });
        }
        if let MapDef::Expressions(exprs) = &map {
            if exprs.len() != dimension {
                return Err(SystemError::DimensionMismatch {
                    expected: dimension,
                    got: exprs.len(),
                });
            }
            for (component, e) in exprs.iter().enumerate() {
                if let Some(variable) = e.max_variable().filter(|&v| v >= dimension) {
                    return Err(SystemError::UnknownVariable {
                        component,
                        variable,
                        dimension,
                    });
                }
            }
        }
        let origin = vec![0.0; dimension];
        if !domain.contains(&origin) {
            return Err(SystemError::OriginOutsideDomain);
        }
        let system = Self {
            name: name.into(),
            dimension,
            map,
            domain,
            jacobian,
        };
        let f0 = system.apply(&origin);
        if f0.iter().any(|v| !(v.abs() <= FIXED_POINT_TOL)) {
            return Err(SystemError::NotFixedPoint { value: f0 });
        }
        if let Some(j) = &system.jacobian {
            if j.dim() != dimension {
                return Err(SystemError::DimensionMismatch {
                    expected: dimension,
                    got: j.dim(),
                });
            }
            let gap = j.max_abs_diff(&system.finite_difference_jacobian());
            if !(gap <= JACOBIAN_TOL) {
                return Err(SystemError::JacobianMismatch { gap });
            }
        }
        Ok(system)
    }

    /// Builds one of the named example systems.
    pub fn builtin(name: &str) -> Option<Self> {
        builtins::builtin(name)
    }

    /// `f(x) = factor · x` on ℝⁿ.
    pub fn linear_scaling(dimension: usize, factor: f64) -> Self {
        let exprs = (0..dimension)
            .map(|i| Expr::Mul(Box::new(Expr::Num(factor)), Box::new(Expr::Var(i))))
            .collect();
        let jac = Matrix::identity(dimension).scaled(factor);
        Self::new(
            format!("linear-{factor}"),
            dimension,
            MapDef::Expressions(exprs),
            DomainBox::whole_space(dimension),
            Some(jac),
        )
        .expect("linear map is always valid")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }

    pub fn map(&self) -> &MapDef {
        &self.map
    }

    /// Raw map application, no domain check.
    #[inline]
    pub fn apply_into<S: Scalar>(&self, x: &[S], out: &mut [S]) {
        self.map.apply(x, out);
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dimension];
        self.apply_into(x, &mut out);
        out
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>, SystemError> {
        if x.len() != self.dimension {
            return Err(SystemError::DimensionMismatch {
                expected: self.dimension,
                got: x.len(),
            });
        }
        if !self.domain.contains(x) {
            return Err(SystemError::DomainExit {
                system: self.name.clone(),
                point: x.to_vec(),
            });
        }
        Ok(self.apply(x))
    }

    /// In-domain check that also rejects non-finite states.
    #[inline]
    pub fn in_domain(&self, x: &[f64]) -> bool {
        x.iter().all(|v| v.is_finite()) && self.domain.contains(x)
    }

    pub fn iterate(&self, x: &[f64], k: usize) -> Orbit {
        let mut points = Vec::with_capacity(k + 1);
        if !self.in_domain(x) {
            return Orbit {
                points,
                exited_domain_at: Some(0),
            };
        }
        points.push(x.to_vec());
        for i in 1..=k {
            let next = self.apply(&points[i - 1]);
            if !self.in_domain(&next) {
                return Orbit {
                    points,
                    exited_domain_at: Some(i),
                };
            }
            points.push(next);
        }
        Orbit {
            points,
            exited_domain_at: None,
        }
    }

    /// `f^p(x)`, or `None` if some iterate `f^k(x)`, `k ≤ p`, leaves the domain.
    pub fn iterate_n(&self, x: &[f64], p: usize) -> Option<Vec<f64>> {
        let mut cur = x.to_vec();
        let mut next = vec![0.0; self.dimension];
        if !self.in_domain(&cur) {
            return None;
        }
        for _ in 0..p {
            self.apply_into(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
            if !self.in_domain(&cur) {
                return None;
            }
        }
        Some(cur)
    }

    pub fn supplied_jacobian(&self) -> Option<&Matrix> {
        self.jacobian.as_ref()
    }

    /// `∂f(0)`: the analytic Jacobian when supplied, else finite differences.
    pub fn jacobian_at_origin(&self) -> Matrix {
        self.jacobian
            .clone()
            .unwrap_or_else(|| self.finite_difference_jacobian())
    }

    pub fn finite_difference_jacobian(&self) -> Matrix {
        let n = self.dimension;
        let mut jac = Matrix::zeros(n);
        let mut plus = vec![0.0; n];
        let mut minus = vec![0.0; n];
        for j in 0..n {
            plus[j] = FD_STEP;
            minus[j] = -FD_STEP;
            let fp = self.apply(&plus);
            let fm = self.apply(&minus);
            for i in 0..n {
                jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * FD_STEP);
            }
            plus[j] = 0.0;
            minus[j] = 0.0;
        }
        jac
    }
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn norm_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sys(name: &str) -> DiscreteSystem {
        DiscreteSystem::builtin(name).unwrap()
    }

    #[test]
    fn evaluate_examples() {
        let e = sys("ellipse");
        assert_eq!(e.evaluate(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(e.evaluate(&[1.0, 0.0]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(
            sys("vanderpol").evaluate(&[1.0, 1.0]).unwrap(),
            vec![0.0, 2.0]
        );
    }

    #[test]
    fn evaluate_outside_domain() {
        let m = sys("moebius-e");
        assert!(matches!(
            m.evaluate(&[1.0]),
            Err(SystemError::DomainExit { .. })
        ));
        assert!(m.evaluate(&[0.999]).is_ok());
    }

    #[test]
    fn iterate_examples() {
        let o = sys("ellipse").iterate(&[0.0, 0.0], 5);
        assert_eq!(o.points, vec![vec![0.0, 0.0]; 6]);
        assert_eq!(o.exited_domain_at, None);

        let o = sys("square").iterate(&[0.5], 3);
        let flat: Vec<f64> = o.points.iter().map(|p| p[0]).collect();
        assert_eq!(flat, vec![0.5, 0.25, 0.0625, 0.00390625]);

        let e = std::f64::consts::E;
        let o = sys("moebius-e").iterate(&[0.5], 2);
        let want = 0.5 / (e * e + (1.0 - e * e) * 0.5);
        assert!((o.points[2][0] - want).abs() < 1e-15);
    }

    #[test]
    fn iterate_reports_domain_exit() {
        // f(-0.99) for the quartic... use moebius: 0.999 stays, but a state
        // pushed past 1 by a custom map exits.
        let cfg = SystemConfig::from_toml_str(
            r#"
            name = "double"
            dimension = 1
            expressions = ["2*x"]
            domain = [[-1.0, 1.0]]
            "#,
        )
        .unwrap();
        let s = cfg.build().unwrap();
        let o = s.iterate(&[0.3], 5);
        assert_eq!(o.points.len(), 2);
        assert_eq!(o.exited_domain_at, Some(2));
    }

    #[test]
    fn jacobian_examples() {
        assert_eq!(
            sys("ellipse").jacobian_at_origin(),
            Matrix::diagonal(&[0.5, 0.5])
        );
        assert_eq!(
            sys("predprey").jacobian_at_origin(),
            Matrix::from_rows(&[vec![0.5, 0.0], vec![0.0, 0.0]])
        );
        assert_eq!(
            sys("vanderpol").jacobian_at_origin(),
            Matrix::from_rows(&[vec![1.0, -1.0], vec![1.0, -1.0]])
        );
    }

    #[test]
    fn builtins_fix_origin_and_match_finite_differences() {
        for name in BUILTIN_NAMES {
            let s = sys(name);
            let f0 = s.evaluate(&vec![0.0; s.dimension()]).unwrap();
            assert!(f0.iter().all(|v| v.abs() <= 1e-12), "{name}");
            let gap = s
                .jacobian_at_origin()
                .max_abs_diff(&s.finite_difference_jacobian());
            assert!(gap <= 1e-6, "{name}: {gap}");
        }
    }

    #[test]
    fn iterate_prefix_property() {
        let s = sys("predprey");
        for x in [[0.3, -0.2], [0.9, 0.4], [-0.5, 0.1]] {
            let a = s.iterate(&x, 6);
            let b = s.iterate(&x, 7);
            if b.exited_domain_at.is_none() {
                assert_eq!(&b.points[..a.points.len()], &a.points[..]);
            }
        }
    }

    #[test]
    fn construction_rejects_bad_systems() {
        let shifted = DiscreteSystem::new(
            "shifted",
            1,
            MapDef::Expressions(vec![Expr::parse("x + 1").unwrap()]),
            DomainBox::whole_space(1),
            None,
        );
        assert!(matches!(shifted, Err(SystemError::NotFixedPoint { .. })));

        let off = DiscreteSystem::new(
            "off",
            1,
            MapDef::Square,
            DomainBox::new(vec![(0.0, 1.0)]).unwrap(),
            None,
        );
        assert_eq!(off.unwrap_err(), SystemError::OriginOutsideDomain);

        let wrong_jac = DiscreteSystem::new(
            "wrong",
            1,
            MapDef::Square,
            DomainBox::whole_space(1),
            Some(Matrix::diagonal(&[0.1])),
        );
        assert!(matches!(
            wrong_jac,
            Err(SystemError::JacobianMismatch { .. })
        ));
    }

    #[test]
    fn domain_distance() {
        assert_eq!(
            DomainBox::whole_space(2).distance_from_origin(),
            f64::INFINITY
        );
        let b = DomainBox::new(vec![(f64::NEG_INFINITY, 1.0), (-0.5, 3.0)]).unwrap();
        assert_eq!(b.distance_from_origin(), 0.5);
    }

    #[test]
    fn series_evaluation_matches_point_evaluation() {
        use crate::series1d::TruncatedSeries;
        let s = sys("moebius-e");
        let x = TruncatedSeries::variable(-0.3, 12);
        let mut out = [x.clone()];
        s.apply_into(&[x], &mut out);
        assert!((out[0].value() - s.apply(&[-0.3])[0]).abs() < 1e-15);
        // derivative check against central differences
        let h = 1e-6;
        let d = (s.apply(&[-0.3 + h])[0] - s.apply(&[-0.3 - h])[0]) / (2.0 * h);
        assert!((out[0].coefficient(1) - d).abs() < 1e-8);
    }
}

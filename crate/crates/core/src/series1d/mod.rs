//! Power-series construction of the Lyapunov function of a 1-D map.
//!
//! `V(x) = Σ_k f^k(x)²` is expanded at the origin, its radius of convergence
//! is estimated from the coefficients, and the expansion is carried to new
//! centres through `V(x) = Σ_{j<J} f^j(x)² + V(f^J(x))`. Each new centre adds
//! an interval on which `V` is analytic, which enlarges the known part of the
//! domain of attraction.

mod continuation;
mod series;

use serde::Serialize;
use thiserror::Error;

use crate::systems::DiscreteSystem;

pub use continuation::{
    continuation_drive, continue_at, probe_lyapunov, ContinuationStep, DriveOptions, DriveResult,
    EndpointStatus, KnownExpansion, ProbeOutcome,
};
pub use series::TruncatedSeries;

pub const DEFAULT_ORDER: usize = 200;
pub const DEFAULT_TAIL_TOL: f64 = 1e-14;
pub const DEFAULT_TAIL_FRACTION: f64 = 0.5;

/// Iterate count after which the Lyapunov sum is declared non-convergent.
pub const MAX_LYAPUNOV_TERMS: usize = 100_000;

/// Fewest nonzero tail coefficients for a log-linear fit; sparser tails use
/// the root test instead.
pub const MIN_FIT_POINTS: usize = 20;

#[derive(Debug, Error, PartialEq)]
pub enum SeriesError {
    #[error("composition needs a zero constant term in the inner series, found {0}")]
    ComposeBasepointNonzero(f64),
    #[error("map is not contractive at the origin: |f'(0)| = {0}")]
    NotContractive(f64),
    #[error("map does not fix the origin: f(0) = {0}")]
    NotFixingOrigin(f64),
    #[error("Lyapunov sum did not settle within {0} terms")]
    NoConvergence(usize),
    #[error("too few usable coefficients to estimate a radius ({0} nonzero)")]
    InsufficientTail(usize),
    #[error("no iterate of {target} lands inside the known expansion")]
    TargetOutsideKnownDomain { target: f64 },
    #[error("series coefficients blew up (max |a_m| = {0:e})")]
    NumericallyUnstable(f64),
    #[error("series continuation needs a 1-D system, got dimension {0}")]
    DimensionError(usize),
    #[error("could not bound the attraction ball: {0}")]
    Ball(String),
}

/// Taylor series of `f` at `center`, obtained by evaluating the map on a series.
pub fn map_series(
    system: &DiscreteSystem,
    center: f64,
    order: usize,
) -> Result<TruncatedSeries, SeriesError> {
    if system.dimension() != 1 {
        return Err(SeriesError::DimensionError(system.dimension()));
    }
    let x = [TruncatedSeries::variable(center, order)];
    let mut out = [TruncatedSeries::zero(center, order)];
    system.apply_into(&x, &mut out);
    let [s] = out;
    Ok(s)
}

/// `Σ_k (f^k)²` as a series at 0, where `f_series` is the expansion of the map
/// at 0. Terms are added until one changes no coefficient by more than
/// `tail_tol · (1 + |a_m|)`.
pub fn lyapunov_series_at_zero(
    f_series: &TruncatedSeries,
    tail_tol: f64,
) -> Result<TruncatedSeries, SeriesError> {
    let a0 = f_series.coefficient(0);
    if a0 != 0.0 {
        return Err(SeriesError::NotFixingOrigin(a0));
    }
    let a1 = f_series.coefficient(1);
    if a1.abs() >= 1.0 {
        return Err(SeriesError::NotContractive(a1.abs()));
    }
    let order = f_series.order();
    let mut g = TruncatedSeries::variable(0.0, order);
    let mut v = g.square();
    for _ in 0..MAX_LYAPUNOV_TERMS {
        g = f_series.compose(&g)?;
        let term = g.square();
        if !term.is_finite() {
            return Err(SeriesError::NumericallyUnstable(term.max_abs_coefficient()));
        }
        let settled = term
            .coefficients()
            .iter()
            .zip(v.coefficients())
            .all(|(t, a)| t.abs() < tail_tol * (1.0 + a.abs()));
        v = v + term;
        if settled {
            return Ok(v);
        }
    }
    Err(SeriesError::NoConvergence(MAX_LYAPUNOV_TERMS))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RadiusMethod {
    /// Least-squares line through `ln|a_m|` over the tail.
    LogLinearFit,
    /// `1 / max |a_m|^{1/m}` over the nonzero tail coefficients.
    RootTest,
    /// The tail is identically zero.
    Polynomial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadiusEstimate {
    pub radius: f64,
    /// RMS residual of the fit in `ln|a_m|` (log-linear), or the spread of
    /// `ln|a_m|^{1/m}` over the tail (root test).
    pub fit_residual: f64,
    pub method: RadiusMethod,
}

/// Cauchy–Hadamard estimate from the top `tail_fraction` of the coefficients.
pub fn radius_of_convergence(
    s: &TruncatedSeries,
    tail_fraction: f64,
) -> Result<RadiusEstimate, SeriesError> {
    if !s.is_finite() {
        return Err(SeriesError::NumericallyUnstable(s.max_abs_coefficient()));
    }
    let order = s.order();
    let nonzero_total = s.coefficients()[1..].iter().filter(|c| **c != 0.0).count();
    if order < 8 {
        return Err(SeriesError::InsufficientTail(nonzero_total));
    }
    let first = ((order as f64) * (1.0 - tail_fraction.clamp(0.05, 1.0))).floor() as usize;
    let tail: Vec<(f64, f64)> = (first.max(1)..=order)
        .filter_map(|m| {
            let a = s.coefficient(m).abs();
            (a > 0.0).then(|| (m as f64, a.ln()))
        })
        .collect();

    if tail.is_empty() {
        return Ok(RadiusEstimate {
            radius: f64::INFINITY,
            fit_residual: 0.0,
            method: RadiusMethod::Polynomial,
        });
    }

    if tail.len() >= MIN_FIT_POINTS {
        let n = tail.len() as f64;
        let mx = tail.iter().map(|p| p.0).sum::<f64>() / n;
        let my = tail.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = tail.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = tail.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let rss: f64 = tail
            .iter()
            .map(|p| (p.1 - intercept - slope * p.0).powi(2))
            .sum();
        return Ok(RadiusEstimate {
            radius: (-slope).exp(),
            fit_residual: (rss / n).sqrt(),
            method: RadiusMethod::LogLinearFit,
        });
    }

    let roots: Vec<f64> = tail.iter().map(|p| p.1 / p.0).collect();
    let max = roots.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = roots.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(RadiusEstimate {
        radius: (-max).exp(),
        fit_residual: max - min,
        method: RadiusMethod::RootTest,
    })
}

//! Radius of the largest origin-centred ball on which the iterates in a
//! window strictly decrease the norm.
//!
//! For window `{1}` this is the contraction-case ball `B(R)`; for
//! `{p̃, …, 2p̃-1}` it is the convergent-case ball `B(R̃)`. The condition is
//! pointwise and every point of a ball lies on a ray from the origin, so the
//! radius is computed as the minimum over sampled unit directions of the first
//! radius along the ray where the condition fails. Directions are sampled, so
//! the result may overestimate the true radius by a term that vanishes with
//! angular resolution.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{classify, Window};
use crate::systems::{norm, DiscreteSystem};

/// Radii below this are reported as [`RadiusError::NoBall`].
pub const MIN_RADIUS: f64 = 1e-8;

#[derive(Debug, Error, PartialEq)]
pub enum RadiusError {
    #[error("window {window} is not admissible: {reason}")]
    WindowInvalid { window: String, reason: String },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("condition fails below radius {radius:e} along direction {direction:?}")]
    NoBall { radius: f64, direction: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BallParams {
    /// Number of unit directions (ignored in 1-D, where there are two).
    pub directions: usize,
    pub r_max: f64,
    pub coarse_steps: usize,
    /// Relative width of the final bisection bracket.
    pub refine_tolerance: f64,
}

impl Default for BallParams {
    fn default() -> Self {
        Self {
            directions: 4096,
            r_max: 10.0,
            coarse_steps: 2000,
            refine_tolerance: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallRadiusResult {
    /// Positive, possibly `+∞`.
    pub radius: f64,
    pub window: Vec<usize>,
    pub directions_sampled: usize,
    pub refine_tolerance: f64,
    pub r_max: f64,
    /// Direction whose ray fails first.
    pub binding_direction: Option<Vec<f64>>,
    pub capped_by_domain: bool,
    /// No violation was found up to `r_max`, so nothing beyond it is verified.
    pub unverified_beyond_r_max: bool,
}

/// Whether `‖f^p(x)‖ < ‖x‖` for every `p` in the window (and all iterates
/// stay in the domain).
pub fn satisfies_window_condition(system: &DiscreteSystem, x: &[f64], window: Window) -> bool {
    let r = norm(x);
    let mut cur = x.to_vec();
    let mut next = vec![0.0; x.len()];
    for p in 1..=window.end() {
        system.apply_into(&cur, &mut next);
        std::mem::swap(&mut cur, &mut next);
        if !system.in_domain(&cur) {
            return false;
        }
        if window.contains(p) && !(norm(&cur) < r) {
            return false;
        }
    }
    true
}

/// Checks that the linearisation admits the window: `‖A^q‖ < 1` for every
/// `q` in it, which holds exactly when `start ≥ p̃(A)`.
pub fn check_window(system: &DiscreteSystem, window: Window) -> Result<(), RadiusError> {
    let report = classify(&system.jacobian_at_origin());
    let invalid = |reason: String| RadiusError::WindowInvalid {
        window: window.to_string(),
        reason,
    };
    match report.p_tilde {
        None => Err(invalid(format!(
            "spectral radius {} is not below 1",
            report.spectral_radius
        ))),
        Some(p) if window.start() < p => Err(invalid(if window.start() == 1 {
            format!("operator norm {} is not below 1", report.operator_norm)
        } else {
            format!("window must start at or after p_tilde = {p}")
        })),
        Some(_) => Ok(()),
    }
}

/// Unit directions used for the radial scans.
///
/// 1-D: `±1`. 2-D: equally spaced angles. 3-D: Fibonacci sphere. Higher
/// dimensions: Halton points pushed through Box–Muller and normalised.
pub fn sample_directions(dimension: usize, count: usize) -> Vec<Vec<f64>> {
    match dimension {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / count as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        3 => {
            let golden = PI * (3.0 - 5.0f64.sqrt());
            (0..count)
                .map(|k| {
                    let z = 1.0 - (2.0 * k as f64 + 1.0) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let t = golden * k as f64;
                    vec![r * t.cos(), r * t.sin(), z]
                })
                .collect()
        }
        n => {
            let primes = first_primes(n + n % 2);
            (1..=count)
                .map(|k| {
                    let mut v: Vec<f64> = primes
                        .chunks(2)
                        .flat_map(|pair| {
                            let u1 = radical_inverse(k, pair[0]).max(f64::MIN_POSITIVE);
                            let u2 = radical_inverse(k, pair[1]);
                            let rad = (-2.0 * u1.ln()).sqrt();
                            [rad * (2.0 * PI * u2).cos(), rad * (2.0 * PI * u2).sin()]
                        })
                        .take(n)
                        .collect();
                    let len = norm(&v);
                    v.iter_mut().for_each(|c| *c /= len);
                    v
                })
                .collect()
        }
    }
}

fn radical_inverse(mut k: usize, base: usize) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while k > 0 {
        out += (k % base) as f64 * inv;
        k /= base;
        inv /= base as f64;
    }
    out
}

fn first_primes(n: usize) -> Vec<usize> {
    let mut primes = Vec::with_capacity(n);
    let mut c = 2;
    while primes.len() < n {
        if primes.iter().all(|p| c % p != 0) {
            primes.push(c);
        }
        c += 1;
    }
    primes
}

/// First radius along `u` where the window condition fails, bracketed to the
/// relative tolerance; `None` if it holds on the whole scanned segment.
/// Returns the last radius at which the condition still held.
fn first_violation(
    system: &DiscreteSystem,
    u: &[f64],
    window: Window,
    scan_limit: f64,
    params: &BallParams,
) -> Option<f64> {
    let holds = |r: f64| {
        let x: Vec<f64> = u.iter().map(|c| c * r).collect();
        satisfies_window_condition(system, &x, window)
    };
    let step = params.r_max / params.coarse_steps as f64;
    let mut lo = 0.0;
    let mut hi = None;
    for k in 1..=params.coarse_steps {
        let r = step * k as f64;
        if r >= scan_limit {
            break;
        }
        if holds(r) {
            lo = r;
        } else {
            hi = Some(r);
            break;
        }
    }
    let mut hi = hi?;
    while hi - lo > params.refine_tolerance * hi && hi >= MIN_RADIUS {
        let mid = 0.5 * (lo + hi);
        if holds(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}

pub fn attraction_ball(
    system: &DiscreteSystem,
    window: Window,
    params: &BallParams,
) -> Result<BallRadiusResult, RadiusError> {
    if system.dimension() > 1 && params.directions < 64 {
        return Err(RadiusError::InvalidParams(format!(
            "need at least 64 directions, got {}",
            params.directions
        )));
    }
    if !(params.refine_tolerance > 0.0 && params.refine_tolerance <= 1e-3) {
        return Err(RadiusError::InvalidParams(format!(
            "refine_tolerance must lie in (0, 1e-3], got {}",
            params.refine_tolerance
        )));
    }
    if !(params.r_max > 0.0) || params.coarse_steps == 0 {
        return Err(RadiusError::InvalidParams(
            "r_max and coarse_steps must be positive".into(),
        ));
    }
    check_window(system, window)?;

    let directions = sample_directions(system.dimension(), params.directions);
    let cap = system.domain().distance_from_origin();

    // Ordered collect keeps the reduction independent of scheduling.
    let per_direction: Vec<Option<f64>> = directions
        .par_iter()
        .map(|u| first_violation(system, u, window, cap, params))
        .collect();

    let mut best: Option<(f64, usize)> = None;
    for (i, r) in per_direction.iter().enumerate() {
        if let Some(r) = *r {
            if best.is_none_or(|(b, _)| r < b) {
                best = Some((r, i));
            }
        }
    }

    let base = BallRadiusResult {
        radius: f64::INFINITY,
        window: window.members(),
        directions_sampled: directions.len(),
        refine_tolerance: params.refine_tolerance,
        r_max: params.r_max,
        binding_direction: None,
        capped_by_domain: false,
        unverified_beyond_r_max: false,
    };
    match best {
        Some((r, i)) if r < MIN_RADIUS => Err(RadiusError::NoBall {
            radius: r,
            direction: directions[i].clone(),
        }),
        Some((r, i)) if r < cap => Ok(BallRadiusResult {
            radius: r,
            binding_direction: Some(directions[i].clone()),
            ..base
        }),
        _ if cap.is_finite() => Ok(BallRadiusResult {
            radius: cap,
            capped_by_domain: true,
            unverified_beyond_r_max: cap > params.r_max,
            ..base
        }),
        _ => Ok(BallRadiusResult {
            unverified_beyond_r_max: true,
            ..base
        }),
    }
}

use serde::Serialize;

use super::{
    lyapunov_series_at_zero, map_series, radius_of_convergence, RadiusMethod, SeriesError,
    TruncatedSeries, DEFAULT_ORDER, DEFAULT_TAIL_FRACTION, DEFAULT_TAIL_TOL,
};
use crate::linalg::Window;
use crate::radius::{attraction_ball, BallParams};
use crate::systems::DiscreteSystem;

/// Fraction of the known radius kept clear when landing an iterate inside it.
pub const LANDING_MARGIN: f64 = 0.1;

/// Longest forward orbit tried when looking for a landing point.
pub const MAX_LANDING_STEPS: usize = 1000;

/// Partial sums of `V` above this count as `V = +∞`.
pub const DIVERGENCE_SUM: f64 = 1e8;

/// Orbits that have not entered the attraction ball by now count as divergent.
pub const PROBE_MAX_ITER: usize = 1_000_000;

const COEFFICIENT_LIMIT: f64 = 1e30;

/// A series for `V` together with the radius on which it is trusted.
#[derive(Debug, Clone, PartialEq)]
pub struct KnownExpansion {
    pub series: TruncatedSeries,
    pub radius: f64,
}

impl KnownExpansion {
    pub fn center(&self) -> f64 {
        self.series.center()
    }

    /// Whether `y` sits inside the expansion with the landing margin to spare.
    pub fn accepts(&self, y: f64) -> bool {
        (y - self.center()).abs() < (1.0 - LANDING_MARGIN) * self.radius
    }
}

fn landing_steps(system: &DiscreteSystem, known: &KnownExpansion, c_new: f64) -> Option<usize> {
    let mut x = [c_new];
    if !system.in_domain(&x) {
        return None;
    }
    for j in 1..=MAX_LANDING_STEPS {
        x = [system.apply(&x)[0]];
        if !system.in_domain(&x) {
            return None;
        }
        if known.accepts(x[0]) {
            return Some(j);
        }
    }
    None
}

/// Series of `V` at `c_new`, built from `V(x) = Σ_{j<J} f^j(x)² + V(f^J(x))`
/// with `J ≥ 1` the first count for which `f^J(c_new)` lands inside `known`.
/// Returns the series and `J`.
pub fn continue_at(
    known: &KnownExpansion,
    system: &DiscreteSystem,
    c_new: f64,
    order: usize,
) -> Result<(TruncatedSeries, usize), SeriesError> {
    if system.dimension() != 1 {
        return Err(SeriesError::DimensionError(system.dimension()));
    }
    let steps = landing_steps(system, known, c_new)
        .ok_or(SeriesError::TargetOutsideKnownDomain { target: c_new })?;

    let mut g = TruncatedSeries::variable(c_new, order);
    let mut sum = TruncatedSeries::zero(c_new, order);
    let mut next = [TruncatedSeries::zero(c_new, order)];
    for _ in 0..steps {
        sum = sum + g.square();
        system.apply_into(&[g], &mut next);
        g = next[0].clone();
    }
    let y = g.coefficient(0);
    let mut inner = g.coefficients().to_vec();
    inner[0] = 0.0;
    let inner = TruncatedSeries::new(c_new, inner);
    let shifted = known.series.truncated(order).shift_to(y);
    let result = sum + shifted.compose(&inner)?;

    let max = result.max_abs_coefficient();
    if !result.is_finite() || max > COEFFICIENT_LIMIT {
        return Err(SeriesError::NumericallyUnstable(max));
    }
    Ok((result, steps))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ProbeOutcome {
    /// The orbit entered the attraction ball; `value` approximates `V(x)`.
    Finite {
        value: f64,
        steps: usize,
    },
    /// Partial sums passed [`DIVERGENCE_SUM`].
    Diverges {
        partial_sum: f64,
        steps: usize,
    },
    ExitsDomain {
        steps: usize,
    },
    /// No entry into the ball within [`PROBE_MAX_ITER`] iterations.
    NoEntry {
        partial_sum: f64,
    },
}

impl ProbeOutcome {
    pub fn is_finite(&self) -> bool {
        matches!(self, ProbeOutcome::Finite { .. })
    }
}

/// Evaluates `V(x)` by forward partial sums. Entering `B(ball_radius)`
/// certifies convergence; the sum is then continued until its terms are
/// negligible.
pub fn probe_lyapunov(system: &DiscreteSystem, x: f64, ball_radius: f64) -> ProbeOutcome {
    let mut cur = [x];
    let mut sum = 0.0;
    let mut entered = None;
    for k in 0..PROBE_MAX_ITER {
        if k > 0 {
            cur = [system.apply(&cur)[0]];
        }
        if !system.in_domain(&cur) {
            return ProbeOutcome::ExitsDomain { steps: k };
        }
        let term = cur[0] * cur[0];
        sum += term;
        if sum > DIVERGENCE_SUM {
            return ProbeOutcome::Diverges {
                partial_sum: sum,
                steps: k,
            };
        }
        if entered.is_none() && cur[0].abs() < ball_radius {
            entered = Some(k);
        }
        if let Some(steps) = entered {
            if term <= 1e-17 * sum {
                return ProbeOutcome::Finite { value: sum, steps };
            }
        }
    }
    match entered {
        Some(steps) => ProbeOutcome::Finite { value: sum, steps },
        None => ProbeOutcome::NoEntry { partial_sum: sum },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EndpointStatus {
    /// Still a candidate for continuation.
    Open,
    /// `V` is unbounded at the endpoint.
    Diverges,
    /// The endpoint lies on the boundary of the state domain.
    DomainBoundary,
    /// The known domain is unbounded on this side.
    Unbounded,
    /// Continuation at the endpoint failed numerically.
    Failed,
    /// The step budget ran out while the endpoint was still open.
    MaxSteps,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuationStep {
    pub center: f64,
    pub radius_estimate: f64,
    pub fit_residual: f64,
    pub method: RadiusMethod,
    /// Forward iterations used to reach a known expansion (0 for the origin).
    pub landing_steps: usize,
    /// `(center - r, center + r)` clipped to the domain.
    pub interval: (f64, f64),
    /// Union of all intervals so far; always a single interval here because
    /// every new centre is an endpoint of the previous union.
    pub cumulative_domain: Vec<(f64, f64)>,
    #[serde(skip)]
    pub series: TruncatedSeries,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriveResult {
    pub steps: Vec<ContinuationStep>,
    pub left: EndpointStatus,
    pub right: EndpointStatus,
    pub ball_radius: f64,
}

impl DriveResult {
    pub fn cumulative_domain(&self) -> (f64, f64) {
        self.steps
            .last()
            .map(|s| s.cumulative_domain[0])
            .expect("at least one step")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriveOptions {
    pub order: usize,
    pub max_steps: usize,
    pub tail_tol: f64,
    pub tail_fraction: f64,
}

impl Default for DriveOptions {
    fn default() -> Self {
        Self {
            order: DEFAULT_ORDER,
            max_steps: 8,
            tail_tol: DEFAULT_TAIL_TOL,
            tail_fraction: DEFAULT_TAIL_FRACTION,
        }
    }
}

fn clip(system: &DiscreteSystem, lo: f64, hi: f64) -> (f64, f64) {
    let (a, b) = system.domain().bounds()[0];
    (lo.max(a), hi.min(b))
}

fn endpoint_status(system: &DiscreteSystem, x: f64, ball_radius: f64) -> EndpointStatus {
    if !x.is_finite() {
        return EndpointStatus::Unbounded;
    }
    let (a, b) = system.domain().bounds()[0];
    if x <= a || x >= b {
        return EndpointStatus::DomainBoundary;
    }
    if probe_lyapunov(system, x, ball_radius).is_finite() {
        EndpointStatus::Open
    } else {
        EndpointStatus::Diverges
    }
}

/// Grows the known part of the domain of attraction from the expansion at
/// the origin, continuing alternately at the left and right end of the
/// union while `V` stays finite there.
pub fn continuation_drive(
    system: &DiscreteSystem,
    opts: &DriveOptions,
) -> Result<DriveResult, SeriesError> {
    let f0 = map_series(system, 0.0, opts.order)?;
    let v0 = lyapunov_series_at_zero(&f0, opts.tail_tol)?;
    let est = radius_of_convergence(&v0, opts.tail_fraction)?;

    let ball = attraction_ball(system, Window::contraction(), &BallParams::default())
        .map_err(|e| SeriesError::Ball(e.to_string()))?;
    let ball_radius = ball.radius.min(ball.r_max);

    let interval = clip(system, -est.radius, est.radius);
    let mut hull = interval;
    let mut known = vec![KnownExpansion {
        series: v0.clone(),
        radius: est.radius,
    }];
    let mut steps = vec![ContinuationStep {
        center: 0.0,
        radius_estimate: est.radius,
        fit_residual: est.fit_residual,
        method: est.method,
        landing_steps: 0,
        interval,
        cumulative_domain: vec![hull],
        series: v0,
    }];

    let mut left = endpoint_status(system, hull.0, ball_radius);
    let mut right = endpoint_status(system, hull.1, ball_radius);
    let mut go_left = true;

    while steps.len() < opts.max_steps
        && (left == EndpointStatus::Open || right == EndpointStatus::Open)
    {
        let take_left = if go_left {
            left == EndpointStatus::Open
        } else {
            right != EndpointStatus::Open
        };
        go_left = !take_left;
        let c = if take_left { hull.0 } else { hull.1 };

        // the expansion reached in the fewest forward steps, earliest on ties
        let base = known
            .iter()
            .filter_map(|k| landing_steps(system, k, c).map(|j| (j, k)))
            .min_by_key(|(j, _)| *j)
            .map(|(_, k)| k.clone());
        let outcome = base
            .ok_or(SeriesError::TargetOutsideKnownDomain { target: c })
            .and_then(|k| continue_at(&k, system, c, opts.order))
            .and_then(|(s, j)| radius_of_convergence(&s, opts.tail_fraction).map(|e| (s, j, e)));
        let (series, j, est) = match outcome {
            Ok(v) => v,
            Err(_) => {
                if take_left {
                    left = EndpointStatus::Failed;
                } else {
                    right = EndpointStatus::Failed;
                }
                continue;
            }
        };

        let interval = clip(system, c - est.radius, c + est.radius);
        hull = (hull.0.min(interval.0), hull.1.max(interval.1));
        known.push(KnownExpansion {
            series: series.clone(),
            radius: est.radius,
        });
        steps.push(ContinuationStep {
            center: c,
            radius_estimate: est.radius,
            fit_residual: est.fit_residual,
            method: est.method,
            landing_steps: j,
            interval,
            cumulative_domain: vec![hull],
            series,
        });
        left = endpoint_status(system, hull.0, ball_radius);
        right = endpoint_status(system, hull.1, ball_radius);
    }

    let settle = |s: EndpointStatus| {
        if s == EndpointStatus::Open {
            EndpointStatus::MaxSteps
        } else {
            s
        }
    };
    Ok(DriveResult {
        steps,
        left: settle(left),
        right: settle(right),
        ball_radius,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::SystemConfig;

    fn sys(name: &str) -> DiscreteSystem {
        DiscreteSystem::builtin(name).unwrap()
    }

    fn half() -> DiscreteSystem {
        SystemConfig::from_toml_str("name = \"h\"\ndimension = 1\nexpressions = [\"x/2\"]\n")
            .unwrap()
            .build()
            .unwrap()
    }

    fn base(system: &DiscreteSystem) -> KnownExpansion {
        let v = lyapunov_series_at_zero(&map_series(system, 0.0, 200).unwrap(), 1e-14).unwrap();
        let radius = radius_of_convergence(&v, 0.5).unwrap().radius;
        KnownExpansion { series: v, radius }
    }

    /// Taylor coefficients of Σ_k f^k(x)² at x = -1 for the Möbius map,
    /// from f^k(-1 + h) = (-1 + h) / ((2E - 1)(1 - q h)), E = e^k,
    /// q = (E - 1)/(2E - 1).
    fn moebius_at_minus_one(order: usize) -> Vec<f64> {
        let mut v = vec![0.0; order + 1];
        for k in 0..400 {
            let e = (k as f64).exp();
            let d = 2.0 * e - 1.0;
            let q = (e - 1.0) / d;
            let mut c = vec![0.0; order + 1];
            c[0] = -1.0 / d;
            let mut qn = 1.0;
            for cn in c.iter_mut().skip(1) {
                *cn = qn * (1.0 - q) / d;
                qn *= q;
            }
            for m in 0..=order {
                v[m] += (0..=m).map(|i| c[i] * c[m - i]).sum::<f64>();
            }
            if 1.0 / (d * d) < 1e-20 {
                break;
            }
        }
        v
    }

    #[test]
    fn identity_continuation() {
        let s = sys("moebius-e");
        let k = base(&s);
        let (c, j) = continue_at(&k, &s, 0.0, 200).unwrap();
        assert_eq!(j, 1);
        for m in 0..=200 {
            let (a, b) = (c.coefficient(m), k.series.coefficient(m));
            assert!(
                (a - b).abs() < 1e-10 * (1.0 + b.abs()),
                "m = {m}: {a} vs {b}"
            );
        }
    }

    #[test]
    fn polynomial_continuation_is_exact() {
        let s = half();
        let k = KnownExpansion {
            series: lyapunov_series_at_zero(&map_series(&s, 0.0, 10).unwrap(), 1e-14).unwrap(),
            radius: f64::INFINITY,
        };
        let (c, _) = continue_at(&k, &s, 0.5, 10).unwrap();
        let want = [4.0 / 3.0 * 0.25, 4.0 / 3.0, 4.0 / 3.0];
        for (m, w) in want.iter().enumerate() {
            assert!((c.coefficient(m) - w).abs() < 1e-14);
        }
        assert!(c.coefficients()[3..].iter().all(|&a| a.abs() < 1e-14));
    }

    #[test]
    fn moebius_at_minus_one_matches_direct_expansion() {
        let s = sys("moebius-e");
        let (c, _) = continue_at(&base(&s), &s, -1.0, 200).unwrap();
        let want = moebius_at_minus_one(200);
        for (m, w) in want.iter().enumerate().take(41) {
            assert!(
                (c.coefficient(m) - w).abs() < 1e-8 * (1.0 + w.abs()),
                "m = {m}"
            );
        }
    }

    #[test]
    fn moebius_radius_at_minus_one_is_two() {
        let s = sys("moebius-e");
        let (c, _) = continue_at(&base(&s), &s, -1.0, 200).unwrap();
        let r = radius_of_convergence(&c, 0.5).unwrap().radius;
        let oracle =
            radius_of_convergence(&TruncatedSeries::new(-1.0, moebius_at_minus_one(200)), 0.5)
                .unwrap()
                .radius;
        assert!((oracle - 2.0).abs() < 0.1, "oracle {oracle}");
        assert!((r - 2.0).abs() < 0.1, "continued {r}");
    }

    #[test]
    fn overlapping_expansions_agree() {
        let s = sys("moebius-e");
        let k = base(&s);
        let (c, _) = continue_at(&k, &s, -0.6, 200).unwrap();
        // overlap of (-1, 1) and the new expansion, away from both rims
        for i in 0..100 {
            let x = -0.8 + 0.6 * i as f64 / 99.0;
            let (a, b) = (k.series.eval(x), c.eval(x));
            assert!(
                (a - b).abs() < 1e-6 * b.abs().max(1e-12),
                "x = {x}: {a} vs {b}"
            );
        }
    }

    #[test]
    fn target_outside_known_domain() {
        let s = sys("square");
        let k = base(&s);
        assert_eq!(
            continue_at(&k, &s, 1.0, 50).unwrap_err(),
            SeriesError::TargetOutsideKnownDomain { target: 1.0 }
        );
    }

    #[test]
    fn probe_outcomes() {
        let s = sys("square");
        assert!(probe_lyapunov(&s, 0.5, 1.0).is_finite());
        assert!(matches!(
            probe_lyapunov(&s, 1.0, 1.0),
            ProbeOutcome::NoEntry { .. }
        ));
        assert!(matches!(
            probe_lyapunov(&s, 1.5, 1.0),
            ProbeOutcome::Diverges { .. }
        ));
        assert!(matches!(
            probe_lyapunov(&sys("moebius-e"), 2.0, 1.0),
            ProbeOutcome::ExitsDomain { steps: 0 }
        ));
        // partial sums increase to V: x² + x⁴ + ... at 0.5
        match probe_lyapunov(&s, 0.5, 1.0) {
            ProbeOutcome::Finite { value, .. } => {
                let want: f64 = (1..8).map(|k| 0.5f64.powi(1 << k)).sum();
                assert!((value - want).abs() < 1e-15);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn drive_square_stops_after_one_step() {
        let r = continuation_drive(&sys("square"), &DriveOptions::default()).unwrap();
        assert_eq!(r.steps.len(), 1);
        let (lo, hi) = r.cumulative_domain();
        assert!((lo + 1.0).abs() < 0.05 && (hi - 1.0).abs() < 0.05);
        assert_eq!(
            (r.left, r.right),
            (EndpointStatus::Diverges, EndpointStatus::Diverges)
        );
    }

    #[test]
    fn drive_moebius_grows_leftward() {
        let opts = DriveOptions {
            max_steps: 3,
            ..DriveOptions::default()
        };
        let r = continuation_drive(&sys("moebius-e"), &opts).unwrap();
        assert_eq!(r.steps.len(), 3);
        let first = r.steps[0].interval;
        assert!((first.0 + 1.0).abs() < 0.05 && first.1 == 1.0);
        assert_eq!(r.steps[1].center, first.0);
        let (lo, hi) = r.cumulative_domain();
        assert!(lo <= -2.0 && hi == 1.0);
        assert_eq!(r.right, EndpointStatus::DomainBoundary);
        assert_eq!(r.left, EndpointStatus::MaxSteps);
    }

    #[test]
    fn drive_linear_map_covers_the_line() {
        let r = continuation_drive(&half(), &DriveOptions::default()).unwrap();
        assert_eq!(r.cumulative_domain(), (f64::NEG_INFINITY, f64::INFINITY));
        assert_eq!(
            (r.left, r.right),
            (EndpointStatus::Unbounded, EndpointStatus::Unbounded)
        );
    }
}

//! Linear classification of the fixed point followed by the matching
//! attraction ball.

use serde::Serialize;

use crate::linalg::{classify, Classification, Matrix, StabilityReport};
use crate::radius::{attraction_ball, BallParams, BallRadiusResult, RadiusError};
use crate::systems::DiscreteSystem;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub system: String,
    pub dimension: usize,
    pub jacobian: Vec<Vec<f64>>,
    pub stability: StabilityReport,
    /// Absent when the method does not apply.
    pub ball: Option<BallRadiusResult>,
}

impl AnalysisReport {
    pub fn is_applicable(&self) -> bool {
        self.stability.classification != Classification::NotApplicable
    }

    /// `R` in the contraction case, `R̃` in the convergent case.
    pub fn radius(&self) -> Option<f64> {
        self.ball.as_ref().map(|b| b.radius)
    }
}

pub fn analyze(
    system: &DiscreteSystem,
    params: &BallParams,
) -> Result<AnalysisReport, RadiusError> {
    let a: Matrix = system.jacobian_at_origin();
    let stability = classify(&a);
    let ball = match stability.window() {
        Some(w) if stability.classification != Classification::NotApplicable => {
            Some(attraction_ball(system, w, params)?)
        }
        _ => None,
    };
    Ok(AnalysisReport {
        system: system.name().to_string(),
        dimension: system.dimension(),
        jacobian: a.rows(),
        stability,
        ball,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ellipse_and_vanderpol() {
        let p = BallParams {
            directions: 256,
            ..BallParams::default()
        };
        let e = analyze(&DiscreteSystem::builtin("ellipse").unwrap(), &p).unwrap();
        assert_eq!(e.stability.classification, Classification::Contraction);
        assert_eq!(e.ball.as_ref().unwrap().window, vec![1]);
        let v = analyze(&DiscreteSystem::builtin("vanderpol").unwrap(), &p).unwrap();
        assert_eq!(v.stability.p_tilde, Some(2));
        assert_eq!(v.ball.as_ref().unwrap().window, vec![2, 3]);
    }

    #[test]
    fn expanding_map_is_not_applicable() {
        let r = analyze(
            &DiscreteSystem::linear_scaling(1, 1.1),
            &BallParams::default(),
        )
        .unwrap();
        assert!(!r.is_applicable());
        assert!(r.ball.is_none());
    }
}

use std::ops::{Add, Div, Mul, Neg, Sub};

use serde::Serialize;

use super::SeriesError;
use crate::scalar::Scalar;

/// A power series `Σ a_m (x - center)^m` truncated at order `M`.
///
/// All arithmetic is exact up to order `M`; nothing beyond `M` is ever read or
/// produced. Binary operations require both operands to have the same order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncatedSeries {
    center: f64,
    coefficients: Vec<f64>,
}

impl TruncatedSeries {
    /// Panics if `coefficients` is empty.
    pub fn new(center: f64, coefficients: Vec<f64>) -> Self {
        assert!(!coefficients.is_empty(), "a series needs at least a_0");
        Self {
            center,
            coefficients,
        }
    }

    pub fn zero(center: f64, order: usize) -> Self {
        Self::new(center, vec![0.0; order + 1])
    }

    pub fn constant(center: f64, order: usize, c: f64) -> Self {
        let mut s = Self::zero(center, order);
        s.coefficients[0] = c;
        s
    }

    /// The independent variable `x` expanded at `center`: `center + h`.
    pub fn variable(center: f64, order: usize) -> Self {
        let mut s = Self::constant(center, order, center);
        if order >= 1 {
            s.coefficients[1] = 1.0;
        }
        s
    }

    pub fn order(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn coefficient(&self, m: usize) -> f64 {
        self.coefficients.get(m).copied().unwrap_or(0.0)
    }

    pub fn with_center(mut self, center: f64) -> Self {
        self.center = center;
        self
    }

    pub fn truncated(&self, order: usize) -> Self {
        let mut c = self.coefficients.clone();
        c.resize(order + 1, 0.0);
        Self::new(self.center, c)
    }

    pub fn is_finite(&self) -> bool {
        self.coefficients.iter().all(|c| c.is_finite())
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.coefficients.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Evaluates the truncated polynomial at the point `x` (not at the offset).
    pub fn eval(&self, x: f64) -> f64 {
        let h = x - self.center;
        self.coefficients
            .iter()
            .rev()
            .fold(0.0, |acc, &a| acc * h + a)
    }

    pub fn scale(&self, k: f64) -> Self {
        self.map_coefficients(|c| c * k)
    }

    pub fn square(&self) -> Self {
        self.clone() * self.clone()
    }

    /// `self(t(h))` where `t` has zero constant term. The result is centered
    /// at `t`'s center.
    pub fn compose(&self, t: &TruncatedSeries) -> Result<Self, SeriesError> {
        self.check_order(t);
        if t.coefficients[0] != 0.0 {
            return Err(SeriesError::ComposeBasepointNonzero(t.coefficients[0]));
        }
        let order = t.order();
        let mut acc = TruncatedSeries::constant(t.center, order, self.coefficients[order]);
        for m in (0..order).rev() {
            acc = mul_nonzero_tail(&acc, t);
            acc.coefficients[0] += self.coefficients[m];
        }
        Ok(acc)
    }

    /// Re-expands the truncated polynomial at `new_center`.
    ///
    /// Only the retained coefficients take part, so high-order output
    /// coefficients lose accuracy as `|new_center - center|` approaches the
    /// radius of convergence.
    pub fn shift_to(&self, new_center: f64) -> Self {
        let d = new_center - self.center;
        let mut c = self.coefficients.clone();
        let m = c.len() - 1;
        if d != 0.0 {
            for i in 0..m {
                for j in (i..m).rev() {
                    c[j] += d * c[j + 1];
                }
            }
        }
        Self::new(new_center, c)
    }

    /// `1 / self`; all coefficients are NaN when `a_0 = 0`.
    pub fn reciprocal(&self) -> Self {
        let b = &self.coefficients;
        let n = b.len();
        let mut c = vec![0.0; n];
        c[0] = 1.0 / b[0];
        for m in 1..n {
            let s: f64 = (1..=m).map(|j| b[j] * c[m - j]).sum();
            c[m] = -s * c[0];
        }
        Self::new(self.center, c)
    }

    fn map_coefficients(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::new(
            self.center,
            self.coefficients.iter().map(|&c| f(c)).collect(),
        )
    }

    fn check_order(&self, other: &Self) {
        assert_eq!(
            self.order(),
            other.order(),
            "series operands must share the truncation order"
        );
    }
}

/// Cauchy product where `t` has `t_0 = 0`; skips the known-zero term.
fn mul_nonzero_tail(a: &TruncatedSeries, t: &TruncatedSeries) -> TruncatedSeries {
    let n = a.coefficients.len();
    let mut c = vec![0.0; n];
    for (i, &ai) in a.coefficients.iter().enumerate() {
        if ai == 0.0 {
            continue;
        }
        for j in 1..n - i {
            c[i + j] += ai * t.coefficients[j];
        }
    }
    TruncatedSeries::new(t.center, c)
}

impl Add for TruncatedSeries {
    type Output = Self;

    fn add(mut self, rhs: Self) -> Self {
        self.check_order(&rhs);
        for (a, b) in self.coefficients.iter_mut().zip(&rhs.coefficients) {
            *a += b;
        }
        self
    }
}

impl Sub for TruncatedSeries {
    type Output = Self;

    fn sub(mut self, rhs: Self) -> Self {
        self.check_order(&rhs);
        for (a, b) in self.coefficients.iter_mut().zip(&rhs.coefficients) {
            *a -= b;
        }
        self
    }
}

impl Mul for TruncatedSeries {
    type Output = Self;

    fn mul(self, rhs: Self) -> Self {
        self.check_order(&rhs);
        let n = self.coefficients.len();
        let mut c = vec![0.0; n];
        for (i, &a) in self.coefficients.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (j, &b) in rhs.coefficients[..n - i].iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        Self::new(self.center, c)
    }
}

impl Div for TruncatedSeries {
    type Output = Self;

    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Self) -> Self {
        self * rhs.reciprocal()
    }
}

impl Neg for TruncatedSeries {
    type Output = Self;

    fn neg(self) -> Self {
        self.map_coefficients(|c| -c)
    }
}

impl Scalar for TruncatedSeries {
    fn lift(&self, c: f64) -> Self {
        Self::constant(self.center, self.order(), c)
    }

    fn value(&self) -> f64 {
        self.coefficients[0]
    }

    fn exp(&self) -> Self {
        let s = &self.coefficients;
        let n = s.len();
        let mut e = vec![0.0; n];
        e[0] = s[0].exp();
        for m in 1..n {
            let acc: f64 = (1..=m).map(|j| j as f64 * s[j] * e[m - j]).sum();
            e[m] = acc / m as f64;
        }
        Self::new(self.center, e)
    }

    fn powi(&self, n: i32) -> Self {
        if n < 0 {
            return self.powi(-n).reciprocal();
        }
        let mut result = self.lift(1.0);
        let mut base = self.clone();
        let mut k = n as u32;
        while k > 0 {
            if k & 1 == 1 {
                result = result * base.clone();
            }
            k >>= 1;
            if k > 0 {
                base = base.square();
            }
        }
        result
    }

    fn powf(&self, alpha: f64) -> Self {
        if alpha.fract() == 0.0 && alpha.abs() <= i32::MAX as f64 {
            return self.powi(alpha as i32);
        }
        let a = &self.coefficients;
        let n = a.len();
        let mut p = vec![0.0; n];
        p[0] = a[0].powf(alpha);
        for m in 1..n {
            let acc: f64 = (1..=m)
                .map(|k| ((alpha + 1.0) * k as f64 - m as f64) * a[k] * p[m - k])
                .sum();
            p[m] = acc / (m as f64 * a[0]);
        }
        Self::new(self.center, p)
    }
}

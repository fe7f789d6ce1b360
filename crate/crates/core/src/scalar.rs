//! Numeric abstraction shared by plain evaluation and Taylor-mode evaluation.
//!
//! Every map in this crate is written once against [`Scalar`]. Evaluating it on
//! `f64` gives the map itself; evaluating it on a
//! [`TruncatedSeries`](crate::series1d::TruncatedSeries) gives the Taylor
//! expansion of the map around the series' center.

use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Scalar:
    Clone
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// A constant with the same shape as `self` (same order and center for series).
    fn lift(&self, c: f64) -> Self;

    /// Value at the expansion point.
    fn value(&self) -> f64;

    fn exp(&self) -> Self;

    fn powi(&self, n: i32) -> Self;

    fn powf(&self, e: f64) -> Self;
}

impl Scalar for f64 {
    #[inline]
    fn lift(&self, c: f64) -> Self {
        c
    }

    #[inline]
    fn value(&self) -> f64 {
        *self
    }

    #[inline]
    fn exp(&self) -> Self {
        f64::exp(*self)
    }

    #[inline]
    fn powi(&self, n: i32) -> Self {
        f64::powi(*self, n)
    }

    #[inline]
    fn powf(&self, e: f64) -> Self {
        f64::powf(*self, e)
    }
}

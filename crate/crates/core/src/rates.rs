//! Periodic arrival intensities written as finite Fourier series
//!
//! `λ(t) = λ0 + Σ_k a_k sin(kt) + b_k cos(kt)` with integer frequencies `k = 1..=K`.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::TAU;

use num_traits::Float;

use crate::error::{Error, Result};

/// Number of points on `[0, 2π]` used to validate nonnegativity.
pub const VALIDATION_POINTS: usize = 10_000;

/// Arrival rate `λ0 + Σ a_k sin(kt) + b_k cos(kt)`.
///
/// Construction checks that the rate is nonnegative on a dense grid over one
/// period, so every evaluation afterwards is a valid intensity.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierRate {
    base: f64,
    harmonics: Vec<(f64, f64)>,
}

impl FourierRate {
    /// Builds a rate from `λ0` and the `(a_k, b_k)` pairs for `k = 1, 2, ...`.
    pub fn new(base: f64, harmonics: Vec<(f64, f64)>) -> Result<Self> {
        if !base.is_finite() || harmonics.iter().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
            return Err(Error::InvalidArgument("rate coefficients must be finite".into()));
        }
        let rate = Self { base, harmonics };
        // The grid includes both endpoints of the period.
        for i in 0..=VALIDATION_POINTS {
            let t = TAU * i as f64 / VALIDATION_POINTS as f64;
            let value = rate.eval(t);
            if value < 0.0 {
                return Err(Error::NegativeRate { time: t, value });
            }
        }
        Ok(rate)
    }

    /// A time-homogeneous rate.
    pub fn constant(rate: f64) -> Result<Self> {
        Self::new(rate, Vec::new())
    }

    /// `base + amplitude·sin(t)`, the single-harmonic form used in most experiments.
    pub fn sinusoid(base: f64, amplitude: f64) -> Result<Self> {
        Self::new(base, alloc::vec![(amplitude, 0.0)])
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn harmonics(&self) -> &[(f64, f64)] {
        &self.harmonics
    }

    /// True when every harmonic coefficient is zero.
    pub fn is_constant(&self) -> bool {
        self.harmonics.iter().all(|&(a, b)| a == 0.0 && b == 0.0)
    }

    /// `λ(t)`.
    pub fn eval(&self, t: f64) -> f64 {
        let mut value = self.base;
        for (i, &(a, b)) in self.harmonics.iter().enumerate() {
            let (s, c) = ((i + 1) as f64 * t).sin_cos();
            value += a * s + b * c;
        }
        value
    }

    /// `∫_{t0}^{t1} λ(s) ds` from the closed-form antiderivative.
    pub fn integrate(&self, t0: f64, t1: f64) -> Result<f64> {
        if !(t0 >= 0.0 && t1 >= t0) {
            return Err(Error::InvalidArgument(format!(
                "integration interval [{t0}, {t1}] must satisfy 0 <= t0 <= t1"
            )));
        }
        let mut value = self.base * (t1 - t0);
        for (i, &(a, b)) in self.harmonics.iter().enumerate() {
            let k = (i + 1) as f64;
            let (s1, c1) = (k * t1).sin_cos();
            let (s0, c0) = (k * t0).sin_cos();
            value += -(a / k) * (c1 - c0) + (b / k) * (s1 - s0);
        }
        Ok(value)
    }

    /// Conservative `(lower, upper)` bracket for `λ` over all `t`, from the
    /// triangle inequality. Tight only when the harmonics can align.
    pub fn bounds(&self) -> (f64, f64) {
        let spread: f64 = self.harmonics.iter().map(|(a, b)| a.abs() + b.abs()).sum();
        (self.base - spread, self.base + spread)
    }

    /// The rate multiplied by `factor` (base and every coefficient).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) || !factor.is_finite() {
            return Err(Error::InvalidArgument(format!("scale factor {factor} must be positive")));
        }
        Ok(Self {
            base: self.base * factor,
            harmonics: self.harmonics.iter().map(|&(a, b)| (a * factor, b * factor)).collect(),
        })
    }

    /// `∫_0^t λ(s)·e^{-κ(t-s)} ds`, the mean of an infinite-server queue with
    /// service rate `κ` started empty.
    pub fn discounted_integral(&self, kappa: f64, t: f64) -> f64 {
        let decay = (-kappa * t).exp();
        let mut value = self.base / kappa * (1.0 - decay);
        for (i, &(a, b)) in self.harmonics.iter().enumerate() {
            let k = (i + 1) as f64;
            let (s, c) = (k * t).sin_cos();
            value += ((a * kappa + b * k) * s + (b * kappa - a * k) * (c - decay)) / (kappa * kappa + k * k);
        }
        value
    }
}

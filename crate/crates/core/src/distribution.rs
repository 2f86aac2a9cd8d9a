//! Probability mass vectors over (possibly shifted) integer lattices.

use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{Error, Result};

/// Masses on the support points `shift + k`, `k = 0..masses.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionVector {
    pub masses: Vec<f64>,
    /// Offset of the support; 0 for queue-length laws.
    pub shift: f64,
    /// Bound on the probability lost to truncation.
    pub trunc_mass_bound: f64,
}

impl DistributionVector {
    /// Normalizes `masses` to sum to one.
    pub fn new(masses: Vec<f64>, shift: f64, trunc_mass_bound: f64) -> Result<Self> {
        if masses.iter().any(|m| !(*m >= 0.0) || !m.is_finite()) {
            return Err(Error::InvalidArgument("masses must be finite and nonnegative".into()));
        }
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidArgument("masses must not all be zero".into()));
        }
        let masses = masses.into_iter().map(|m| m / total).collect();
        Ok(Self { masses, shift, trunc_mass_bound })
    }

    /// Unit mass at `state`.
    pub fn point_mass(state: usize) -> Self {
        let mut masses = alloc::vec![0.0; state + 1];
        masses[state] = 1.0;
        Self { masses, shift: 0.0, trunc_mass_bound: 0.0 }
    }

    /// Poisson(`rate`) masses shifted by `shift`, truncated once the
    /// remaining tail is below `tail`.
    pub fn poisson(rate: f64, shift: f64, tail: f64) -> Result<Self> {
        if !(rate >= 0.0) || !rate.is_finite() {
            return Err(Error::InvalidArgument("Poisson rate must be finite and nonnegative".into()));
        }
        if rate == 0.0 {
            return Ok(Self { masses: alloc::vec![1.0], shift, trunc_mass_bound: 0.0 });
        }
        // log-space start keeps large rates representable
        let mut log_p = -rate;
        let mut masses = alloc::vec![log_p.exp()];
        let mut k = 0usize;
        loop {
            k += 1;
            log_p += rate.ln() - (k as f64).ln();
            let p = log_p.exp();
            masses.push(p);
            let ratio = rate / (k + 1) as f64;
            if ratio < 1.0 {
                // geometric majorant of the remaining tail
                let remaining = p * ratio / (1.0 - ratio);
                if remaining < tail {
                    return Self::new(masses, shift, remaining);
                }
            }
        }
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    /// Location of the `k`-th mass.
    pub fn support_point(&self, k: usize) -> f64 {
        self.shift + k as f64
    }

    /// `Σ (k + shift)^n · mass_k`.
    pub fn raw_moment(&self, n: u32) -> f64 {
        self.masses.iter().enumerate().map(|(k, m)| m * self.support_point(k).powi(n as i32)).sum()
    }

    pub fn mean(&self) -> f64 {
        self.raw_moment(1)
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// `P(X ≤ x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.masses.iter().enumerate().take_while(|(k, _)| self.support_point(*k) <= x).map(|(_, m)| m).sum()
    }

    /// Moves every mass onto the two neighbouring integers, split in
    /// proportion to distance, so the mean is preserved. Identity when the
    /// shift is already integral.
    pub fn to_integer_lattice(&self) -> Self {
        let base = self.shift.floor();
        let frac = self.shift - base;
        if frac == 0.0 {
            return self.clone();
        }
        let mut masses = alloc::vec![0.0; self.masses.len() + 1];
        for (k, m) in self.masses.iter().enumerate() {
            masses[k] += m * (1.0 - frac);
            masses[k + 1] += m * frac;
        }
        Self { masses, shift: base, trunc_mass_bound: self.trunc_mass_bound }
    }

    /// Total-variation distance. Distributions on non-integer lattices are
    /// first moved to the integers with [`Self::to_integer_lattice`].
    pub fn total_variation(&self, other: &Self) -> f64 {
        let a = self.to_integer_lattice();
        let b = other.to_integer_lattice();
        let start = a.shift.min(b.shift);
        let end = (a.shift + a.len() as f64).max(b.shift + b.len() as f64);
        let span = (end - start) as usize;
        let at = |d: &Self, x: f64| -> f64 {
            let idx = x - d.shift;
            if idx < 0.0 {
                0.0
            } else {
                d.masses.get(idx as usize).copied().unwrap_or(0.0)
            }
        };
        0.5 * (0..span).map(|i| start + i as f64).map(|x| (at(&a, x) - at(&b, x)).abs()).sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poisson_moments() {
        let d = DistributionVector::poisson(10.0, 0.0, 1e-12).unwrap();
        assert!((d.total_mass() - 1.0).abs() < 1e-12);
        assert!((d.raw_moment(0) - 1.0).abs() < 1e-12);
        assert!((d.mean() - 10.0).abs() < 1e-10);
        assert!((d.raw_moment(2) - 110.0).abs() < 1e-8);
        assert!(d.trunc_mass_bound < 1e-12);
    }

    #[test]
    fn large_rate_poisson_is_representable() {
        let d = DistributionVector::poisson(900.0, 0.0, 1e-12).unwrap();
        assert!((d.mean() - 900.0).abs() < 1e-6);
    }

    #[test]
    fn shifted_poisson_mean() {
        let d = DistributionVector::poisson(10.0, 7.5, 1e-12).unwrap();
        assert!((d.mean() - 17.5).abs() < 1e-10);
        assert_eq!(d.support_point(0), 7.5);
        let lattice = d.to_integer_lattice();
        assert_eq!(lattice.shift, 7.0);
        assert!((lattice.mean() - 17.5).abs() < 1e-10);
    }

    #[test]
    fn total_variation_cases() {
        let a = DistributionVector::poisson(4.0, 0.0, 1e-14).unwrap();
        assert!(a.total_variation(&a) < 1e-15);
        let far = DistributionVector::point_mass(200);
        assert!((a.total_variation(&far) - 1.0).abs() < 1e-12);
        // integer shifts align instead of projecting
        let b = DistributionVector::poisson(4.0, 3.0, 1e-14).unwrap();
        let c = DistributionVector::new(
            core::iter::repeat_n(0.0, 3).chain(a.masses.iter().copied()).collect(),
            0.0,
            0.0,
        )
        .unwrap();
        assert!(b.total_variation(&c) < 1e-12);
    }

    #[test]
    fn cdf_steps() {
        let d = DistributionVector::new(alloc::vec![0.25, 0.25, 0.5], 0.5, 0.0).unwrap();
        assert_eq!(d.cdf(0.0), 0.0);
        assert_eq!(d.cdf(0.5), 0.25);
        assert_eq!(d.cdf(2.0), 0.5);
        assert_eq!(d.cdf(10.0), 1.0);
    }

    #[test]
    fn rejects_bad_masses() {
        assert!(DistributionVector::new(alloc::vec![-0.1, 1.1], 0.0, 0.0).is_err());
        assert!(DistributionVector::new(alloc::vec![0.0], 0.0, 0.0).is_err());
    }
}

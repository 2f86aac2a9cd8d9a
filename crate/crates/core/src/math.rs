//! Small numeric helpers shared by several modules.

use alloc::vec::Vec;

/// Binomial coefficients `C(n, 0..=n)` as floating point values.
pub(crate) fn binomial_row(n: usize) -> Vec<f64> {
    let mut row = alloc::vec![1.0; n + 1];
    for k in 1..n {
        row[k] = row[k - 1] * (n + 1 - k) as f64 / k as f64;
    }
    // round away the accumulated error; all entries are exact integers
    row.iter_mut().for_each(|c| *c = num_traits::Float::round(*c));
    row
}

/// Raw moments `m_0..=m_n` from cumulants `κ_1..=κ_n` (`kappa[0]` is ignored).
pub(crate) fn moments_from_cumulants(kappa: &[f64]) -> Vec<f64> {
    let n = kappa.len().saturating_sub(1);
    let mut m = alloc::vec![0.0; n + 1];
    m[0] = 1.0;
    for j in 1..=n {
        let row = binomial_row(j - 1);
        m[j] = (1..=j).map(|k| row[k - 1] * kappa[k] * m[j - k]).sum();
    }
    m
}

/// Cumulants `κ_0..=κ_n` from raw moments `m_0..=m_n` (`m[0]` must be 1).
pub(crate) fn cumulants_from_moments(m: &[f64]) -> Vec<f64> {
    let n = m.len().saturating_sub(1);
    let mut kappa = alloc::vec![0.0; n + 1];
    for j in 1..=n {
        let row = binomial_row(j - 1);
        let lower: f64 = (1..j).map(|k| row[k - 1] * kappa[k] * m[j - k]).sum();
        kappa[j] = m[j] - lower;
    }
    kappa
}

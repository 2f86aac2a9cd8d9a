//! Fluid (mean-field) approximations.
//!
//! Moving the expectation inside the nonlinear departure rate closes the
//! forward equations. For the mean this gives the fluid ODE
//! `q' = λ(t) − μ(q ∧ c) − θ(q − c)⁺`; the same closure applied to the
//! `m`-th power gives an autonomous system for the fluid moments.

use alloc::format;
use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{Error, Result};
use crate::math::binomial_row;
use crate::model::QueueModel;
use crate::ode::{self, Rk4Settings, SwitchFn};

/// What a [`MomentSeries`] column holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SeriesLabel {
    /// Raw moment `E[Q^j]`.
    Moment(u32),
    /// Diffusion variance.
    Variance,
}

impl core::fmt::Display for SeriesLabel {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Self::Moment(j) => write!(f, "{j}"),
            Self::Variance => f.write_str("var"),
        }
    }
}

/// Per-time values of one or more moment-like quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSeries {
    pub grid: Vec<f64>,
    pub labels: Vec<SeriesLabel>,
    /// `values[i][k]` is column `labels[k]` at `grid[i]`.
    pub values: Vec<Vec<f64>>,
    /// Step of the accepted RK4 solution.
    pub step: f64,
    /// Change observed when the step was last halved.
    pub error_estimate: f64,
}

impl MomentSeries {
    /// The time series of one column.
    pub fn column(&self, label: SeriesLabel) -> Option<Vec<f64>> {
        let k = self.labels.iter().position(|&l| l == label)?;
        Some(self.values.iter().map(|row| row[k]).collect())
    }

    /// Grid indices where `M_2 < M_1²` beyond rounding. The fluid closure is
    /// not known to preserve this, so it is reported rather than asserted.
    pub fn variance_violations(&self) -> Vec<usize> {
        let (Some(m1), Some(m2)) = (self.column(SeriesLabel::Moment(1)), self.column(SeriesLabel::Moment(2))) else {
            return Vec::new();
        };
        m1.iter()
            .zip(&m2)
            .enumerate()
            .filter(|(_, (a, b))| **b < *a * *a - 1e-9 * (*a * *a).max(1.0))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Right-hand side of the fluid mean ODE.
pub fn fluid_drift(model: &QueueModel, t: f64, q: f64) -> f64 {
    model.arrival().eval(t) - model.fluid_outflow(q)
}

/// Outflow `μ(q∧c) + θ(q−c)⁺` continued smoothly from one side of `q = c`.
fn outflow_on(model: &QueueModel, q: f64, below: bool) -> f64 {
    let (mu, theta) = (model.service_rate(), model.fluid_abandon_rate());
    if below {
        mu * q
    } else {
        let c = f64::from(model.servers());
        mu * c + theta * (q - c)
    }
}

/// Kink of the outflow at `q = c`, with `q` the first state component.
fn capacity_switch(model: &QueueModel) -> impl ode::Switches + '_ {
    let c = f64::from(model.servers());
    SwitchFn { count: 1, eval: move |_: f64, y: &[f64], s: &mut [f64]| s[0] = y[0] - c }
}

fn check_start(q0: f64) -> Result<()> {
    if !(q0 >= 0.0) || !q0.is_finite() {
        return Err(Error::InvalidArgument(format!("initial level {q0} must be finite and nonnegative")));
    }
    Ok(())
}

/// Fluid mean `q(t)` on `grid`, started from `q(0) = q0`.
pub fn fluid_mean(model: &QueueModel, q0: f64, grid: &[f64]) -> Result<MomentSeries> {
    fluid_mean_with(model, q0, grid, &Rk4Settings::default())
}

pub fn fluid_mean_with(model: &QueueModel, q0: f64, grid: &[f64], settings: &Rk4Settings) -> Result<MomentSeries> {
    check_start(q0)?;
    let sol = ode::solve_switched(
        |t, y, below: &[bool], dy| dy[0] = model.arrival().eval(t) - outflow_on(model, y[0], below[0]),
        capacity_switch(model),
        &[q0],
        grid,
        settings,
    )?;
    Ok(MomentSeries {
        grid: sol.grid,
        labels: alloc::vec![SeriesLabel::Moment(1)],
        values: sol.states,
        step: sol.step,
        error_estimate: sol.error_estimate,
    })
}

/// Fluid mean and diffusion variance, integrated jointly from variance 0.
///
/// `V' = λ + μ(q∧c) + θ(q−c)⁺ − 2V(μ·1{q<c} + θ·1{q≥c})`, with the
/// indicators evaluated at the current fluid mean.
pub fn fluid_variance(model: &QueueModel, q0: f64, grid: &[f64]) -> Result<MomentSeries> {
    fluid_variance_with(model, q0, grid, &Rk4Settings::default())
}

pub fn fluid_variance_with(model: &QueueModel, q0: f64, grid: &[f64], settings: &Rk4Settings) -> Result<MomentSeries> {
    check_start(q0)?;
    let (mu, theta) = (model.service_rate(), model.fluid_abandon_rate());
    let rhs = |t: f64, y: &[f64], below: &[bool], dy: &mut [f64]| {
        let (q, v) = (y[0], y[1]);
        let lambda = model.arrival().eval(t);
        let out = outflow_on(model, q, below[0]);
        let slope = if below[0] { mu } else { theta };
        dy[0] = lambda - out;
        dy[1] = lambda + out - 2.0 * v * slope;
    };
    let sol = ode::solve_switched(rhs, capacity_switch(model), &[q0, 0.0], grid, settings)?;
    Ok(MomentSeries {
        grid: sol.grid,
        labels: alloc::vec![SeriesLabel::Moment(1), SeriesLabel::Variance],
        values: sol.states,
        step: sol.step,
        error_estimate: sol.error_estimate,
    })
}

/// Closed fluid moment system for `M_1..=M_{m_max}`.
///
/// ```text
/// M_m' = λ(t) Σ_{j<m} C(m,j) M_j + θ Σ_{j<m} C(m,j)(−1)^{m−j} M_{j+1}
///        + (θ − μ) · min( Σ_{j<m} C(m,j)(−1)^{m−1−j} M_{j+1},
///                         c Σ_{j<m} C(m,j)(−1)^{m−1−j} M_j )
/// ```
///
/// The minimum compares the two complete linear combinations, and every
/// moment inside it is a fluid moment. `M_0 = 1` and `M_j(0) = q0^j`.
pub fn fluid_moments(model: &QueueModel, q0: f64, grid: &[f64], m_max: u32) -> Result<MomentSeries> {
    fluid_moments_with(model, q0, grid, m_max, &Rk4Settings::default())
}

pub fn fluid_moments_with(
    model: &QueueModel,
    q0: f64,
    grid: &[f64],
    m_max: u32,
    settings: &Rk4Settings,
) -> Result<MomentSeries> {
    check_start(q0)?;
    if m_max == 0 {
        return Err(Error::InvalidArgument("m_max must be at least 1".into()));
    }
    let order = m_max as usize;
    let c = f64::from(model.servers());
    let (mu, theta) = (model.service_rate(), model.fluid_abandon_rate());
    let rows: Vec<Vec<f64>> = (0..=order).map(binomial_row).collect();
    let sign = |e: usize| if e.is_multiple_of(2) { 1.0 } else { -1.0 };

    // (upper, c·capped) for order m, the two arguments of the minimum
    let min_arguments = |full: &mut [f64], y: &[f64], m: usize| {
        full[0] = 1.0;
        full[1..].copy_from_slice(y);
        let row = &rows[m];
        let (mut upper, mut capped) = (0.0, 0.0);
        for j in 0..m {
            upper += row[j] * sign(m - 1 - j) * full[j + 1];
            capped += row[j] * sign(m - 1 - j) * full[j];
        }
        (upper, c * capped)
    };
    let mut full = alloc::vec![0.0; order + 1];
    let rhs = |t: f64, y: &[f64], below: &[bool], dy: &mut [f64]| {
        let lambda = model.arrival().eval(t);
        for m in 1..=order {
            let (upper, capped) = min_arguments(&mut full, y, m);
            let row = &rows[m];
            let (mut birth, mut linear) = (0.0, 0.0);
            for j in 0..m {
                birth += row[j] * full[j];
                linear += row[j] * sign(m - j) * full[j + 1];
            }
            let smaller = if below[m - 1] { upper } else { capped };
            dy[m - 1] = lambda * birth + theta * linear + (theta - mu) * smaller;
        }
    };
    let mut switch_full = alloc::vec![0.0; order + 1];
    let switches = SwitchFn {
        count: order,
        eval: |_: f64, y: &[f64], s: &mut [f64]| {
            for m in 1..=order {
                let (upper, capped) = min_arguments(&mut switch_full, y, m);
                s[m - 1] = upper - capped;
            }
        },
    };
    let y0: Vec<f64> = (1..=order).map(|j| q0.powi(j as i32)).collect();
    let sol = ode::solve_switched(rhs, switches, &y0, grid, settings)?;
    Ok(MomentSeries {
        grid: sol.grid,
        labels: (1..=m_max).map(SeriesLabel::Moment).collect(),
        values: sol.states,
        step: sol.step,
        error_estimate: sol.error_estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genfun::touchard;
    use crate::rates::FourierRate;

    fn grid(end: f64, step: f64) -> Vec<f64> {
        let n = (end / step).round() as usize;
        (0..=n).map(|i| i as f64 * step).collect()
    }

    fn constant(lambda: f64, c: u32, mu: f64, theta: f64) -> QueueModel {
        QueueModel::erlang_a(FourierRate::constant(lambda).unwrap(), c, mu, theta).unwrap()
    }

    /// Fixed point of the mean ODE by bisection on the monotone outflow.
    fn fixed_point(model: &QueueModel) -> f64 {
        let lambda = model.arrival().base();
        let (mut lo, mut hi) = (0.0, 1e6);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if model.fluid_outflow(mid) < lambda {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn steady_state_above_capacity() {
        let m = constant(20.0, 15, 1.0, 2.0);
        let oracle = fixed_point(&m);
        assert!((oracle - 17.5).abs() < 1e-10);
        let s = fluid_mean(&m, 0.0, &[60.0]).unwrap();
        assert!((s.values[0][0] - oracle).abs() < 1e-10);
        assert!(fluid_drift(&m, 60.0, s.values[0][0]).abs() < 1e-8);
    }

    #[test]
    fn steady_state_below_capacity() {
        for theta in [0.5, 2.0, 7.0] {
            let m = constant(20.0, 25, 1.0, theta);
            let oracle = fixed_point(&m);
            assert!((oracle - 20.0).abs() < 1e-10);
            let s = fluid_mean(&m, 0.0, &[60.0]).unwrap();
            assert!((s.values[0][0] - 20.0).abs() < 1e-10);
        }
    }

    #[test]
    fn balanced_rates_match_infinite_server_mean() {
        let rate = FourierRate::sinusoid(10.0, 2.0).unwrap();
        let m = QueueModel::erlang_a(rate.clone(), 10, 1.0, 1.0).unwrap();
        let g = grid(20.0, 0.25);
        let s = fluid_mean(&m, 0.0, &g).unwrap();
        for (t, row) in g.iter().zip(&s.values) {
            assert!((row[0] - rate.discounted_integral(1.0, *t)).abs() < 1e-6);
        }
    }

    #[test]
    fn variance_examples() {
        // balanced: Poisson marginal, variance equals mean
        let m = QueueModel::erlang_a(FourierRate::sinusoid(10.0, 2.0).unwrap(), 10, 1.0, 1.0).unwrap();
        let s = fluid_variance(&m, 0.0, &grid(10.0, 0.5)).unwrap();
        for row in &s.values {
            assert!((row[0] - row[1]).abs() < 1e-8);
        }

        let idle = constant(0.0, 3, 1.0, 2.0);
        let s = fluid_variance(&idle, 0.0, &grid(5.0, 1.0)).unwrap();
        assert!(s.values.iter().all(|row| row == &[0.0, 0.0]));

        // algebraic fixed point: (λ + cμ + θ(q − c)) / (2θ)
        let m = constant(20.0, 15, 1.0, 2.0);
        let v_inf = (20.0 + 15.0 + 2.0 * (17.5 - 15.0)) / (2.0 * 2.0);
        assert_eq!(v_inf, 10.0);
        let s = fluid_variance(&m, 0.0, &[60.0]).unwrap();
        assert!((s.values[0][1] - v_inf).abs() < 1e-8);
    }

    #[test]
    fn first_moment_system_is_the_mean() {
        let m = QueueModel::erlang_a(FourierRate::sinusoid(10.0, 2.0).unwrap(), 10, 1.0, 0.5).unwrap();
        let g = grid(20.0, 0.5);
        let mean = fluid_mean(&m, 0.0, &g).unwrap();
        let one = fluid_moments(&m, 0.0, &g, 1).unwrap();
        let four = fluid_moments(&m, 0.0, &g, 4).unwrap();
        for i in 0..g.len() {
            assert!((one.values[i][0] - mean.values[i][0]).abs() < 1e-10);
            // the larger system may settle on a finer step
            assert!((four.values[i][0] - mean.values[i][0]).abs() < 1e-7 * mean.values[i][0].max(1.0));
        }
    }

    #[test]
    fn balanced_moments_are_touchard() {
        let rate = FourierRate::sinusoid(10.0, 2.0).unwrap();
        let m = QueueModel::erlang_a(rate.clone(), 10, 1.0, 1.0).unwrap();
        let g = grid(20.0, 0.5);
        let s = fluid_moments(&m, 0.0, &g, 4).unwrap();
        for (t, row) in g.iter().zip(&s.values) {
            let x = rate.discounted_integral(1.0, *t);
            for j in 1..=4u32 {
                let expected = if x > 0.0 { touchard(j, x) } else { 0.0 };
                assert!((row[j as usize - 1] - expected).abs() < 1e-6 * expected.max(1.0), "t={t} j={j}");
            }
        }
    }

    #[test]
    fn trajectories_do_not_cross() {
        let m = QueueModel::erlang_a(FourierRate::sinusoid(10.0, 2.0).unwrap(), 10, 1.0, 0.5).unwrap();
        let g = grid(20.0, 0.1);
        let low = fluid_mean(&m, 3.0, &g).unwrap();
        let high = fluid_mean(&m, 14.0, &g).unwrap();
        assert!(low.values.iter().zip(&high.values).all(|(a, b)| a[0] <= b[0]));
    }

    #[test]
    fn halving_the_step_is_stable() {
        let m = QueueModel::erlang_a(FourierRate::sinusoid(10.0, 2.0).unwrap(), 10, 1.0, 0.5).unwrap();
        let g = grid(20.0, 0.5);
        let base = fluid_moments(&m, 0.0, &g, 4).unwrap();
        let fine = fluid_moments_with(&m, 0.0, &g, 4, &Rk4Settings::with_step(base.step / 2.0)).unwrap();
        for (a, b) in base.values.iter().flatten().zip(fine.values.iter().flatten()) {
            assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0));
        }
    }

    #[test]
    fn closure_keeps_variance_nonnegative_on_figure_parameters() {
        for theta in [0.5, 2.0] {
            let m = QueueModel::erlang_a(FourierRate::sinusoid(10.0, 2.0).unwrap(), 10, 1.0, theta).unwrap();
            let s = fluid_moments(&m, 0.0, &grid(20.0, 0.1), 2).unwrap();
            assert!(s.variance_violations().is_empty(), "theta={theta}");
        }
    }

    #[test]
    fn invalid_inputs() {
        let m = constant(1.0, 1, 1.0, 1.0);
        assert!(fluid_mean(&m, -1.0, &[1.0]).is_err());
        assert!(fluid_moments(&m, 0.0, &[1.0], 0).is_err());
        assert!(fluid_mean(&m, 0.0, &[]).is_err());
    }
}

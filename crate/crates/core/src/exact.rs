//! Brute-force laws of the queue-length chain: the stationary birth–death
//! distribution and transient distributions from the forward equations.

use alloc::format;
use alloc::vec::Vec;

use num_traits::Float;

use crate::distribution::DistributionVector;
use crate::error::{Error, Result};
use crate::genfun::constant_arrival;
use crate::model::QueueModel;
use crate::ode::{Rk4Settings, Rk4Workspace};

/// Largest state space either solver will build.
pub const MAX_STATES: usize = 100_000;

/// Stationary law of a constant-rate model from
/// `π_{n+1} = π_n·λ/δ(n+1)`, truncated once the remaining tail is below
/// `tol` relative to the accumulated mass.
pub fn stationary_distribution(model: &QueueModel, tol: f64) -> Result<DistributionVector> {
    let lambda = constant_arrival(model)?;
    if !(lambda > 0.0) {
        return Ok(DistributionVector::point_mass(0));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {tol} must be positive")));
    }
    let c = f64::from(model.servers());
    if model.capacity().is_none() && model.abandon_rate() == 0.0 && lambda >= c * model.service_rate() {
        return Err(Error::Unstable(format!(
            "no abandonment and lambda = {lambda} >= c*mu = {}",
            c * model.service_rate()
        )));
    }
    let cap = model.capacity().map(|c| c as usize);
    let mut masses = alloc::vec![1.0];
    let mut total = 1.0;
    let mut tail_bound = 0.0;
    loop {
        let n = masses.len() - 1;
        if cap == Some(n) {
            break;
        }
        let ratio = lambda / model.departure_rate(n as u64 + 1);
        let next = masses[n] * ratio;
        masses.push(next);
        total += next;
        // departure rates never decrease, so later ratios are at most `ratio`
        let ratio_after = lambda / model.departure_rate(n as u64 + 2);
        if ratio_after < 1.0 {
            tail_bound = next * ratio_after / (1.0 - ratio_after) / total;
            if tail_bound < tol {
                break;
            }
        }
        if masses.len() >= MAX_STATES {
            return Err(Error::Numerical(format!("stationary truncation exceeded {MAX_STATES} states")));
        }
        if total > 1e250 {
            masses.iter_mut().for_each(|m| *m *= 1e-250);
            total *= 1e-250;
        }
    }
    DistributionVector::new(masses, 0.0, tail_bound)
}

/// Largest `|π_n λ − π_{n+1} δ(n+1)|` over adjacent states.
pub fn detailed_balance_residual(model: &QueueModel, d: &DistributionVector) -> Result<f64> {
    let lambda = constant_arrival(model)?;
    Ok(d.masses
        .windows(2)
        .enumerate()
        .map(|(n, w)| (w[0] * lambda - w[1] * model.departure_rate(n as u64 + 1)).abs())
        .fold(0.0, f64::max))
}

/// `Σ (k + shift)^n · mass_k`.
pub fn exact_moments(d: &DistributionVector, n: u32) -> f64 {
    d.raw_moment(n)
}

/// Forward-equation solution on a truncated state space.
#[derive(Debug, Clone, PartialEq)]
pub struct TransientSolution {
    pub grid: Vec<f64>,
    /// Law of `Q(t)` at each grid time.
    pub distributions: Vec<DistributionVector>,
    /// Highest state kept.
    pub truncation: usize,
    /// Largest `|Σ p_n − 1|` seen at an output time before renormalizing.
    pub mass_error: f64,
    /// Bound on the probability that would have left through the
    /// reflecting boundary by the horizon.
    pub boundary_flux: f64,
}

impl TransientSolution {
    pub fn means(&self) -> Vec<f64> {
        self.distributions.iter().map(DistributionVector::mean).collect()
    }
}

fn initial_truncation(model: &QueueModel, q0: usize) -> usize {
    let c = model.servers() as usize;
    if let Some(cap) = model.capacity() {
        return cap as usize;
    }
    let (_, upper) = model.arrival().bounds();
    let mu = model.service_rate();
    let extra = (10.0 * upper / mu.min(model.abandon_rate().max(mu))).ceil() as usize;
    (c + extra).max(q0 + extra).max(1)
}

/// Transient laws of `Q(t)` from `Q(0) = q0` by RK4 on
/// `ṗ_n = λ(t)p_{n−1} + δ(n+1)p_{n+1} − (λ(t) + δ(n))p_n`.
///
/// The chain is reflected at the truncation level `N` and `N` is doubled
/// until the flux through the boundary over the horizon is below `tol`.
pub fn transient_distribution(model: &QueueModel, q0: usize, grid: &[f64], tol: f64) -> Result<TransientSolution> {
    transient_distribution_with(model, q0, grid, tol, &Rk4Settings::default())
}

pub fn transient_distribution_with(
    model: &QueueModel,
    q0: usize,
    grid: &[f64],
    tol: f64,
    settings: &Rk4Settings,
) -> Result<TransientSolution> {
    settings.validate()?;
    if grid.is_empty() || grid.windows(2).any(|w| w[1] < w[0]) || !(grid[0] >= 0.0) {
        return Err(Error::InvalidArgument("grid must be nonempty, ascending and start at t >= 0".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {tol} must be positive")));
    }
    if let Some(cap) = model.capacity() {
        if q0 > cap as usize {
            return Err(Error::InvalidArgument(format!("initial state {q0} exceeds the loss-system capacity {cap}")));
        }
    }
    let mut n_max = initial_truncation(model, q0);
    loop {
        if n_max + 1 > MAX_STATES {
            return Err(Error::Numerical(format!("transient truncation exceeded {MAX_STATES} states")));
        }
        let solution = solve_truncated(model, q0, grid, n_max, settings.step)?;
        if solution.boundary_flux < tol || model.capacity().is_some() {
            return Ok(solution);
        }
        n_max *= 2;
    }
}

fn solve_truncated(model: &QueueModel, q0: usize, grid: &[f64], n_max: usize, step: f64) -> Result<TransientSolution> {
    let size = n_max + 1;
    let death: Vec<f64> = (0..=size).map(|n| model.departure_rate(n as u64)).collect();
    let (_, upper) = model.arrival().bounds();
    let bounded = model.capacity().is_some();
    // explicit RK4 is stable for h·(fastest rate) well below 2.78
    let h = step.min(0.5 / (upper + death[n_max]).max(1e-300));
    let arrival = model.arrival();
    let mut rhs = |t: f64, p: &[f64], dp: &mut [f64]| {
        let lambda = arrival.eval(t);
        for n in 0..size {
            let up = if n == n_max { 0.0 } else { lambda };
            let mut v = -(up + death[n]) * p[n];
            if n > 0 {
                v += lambda * p[n - 1];
            }
            if n < n_max {
                v += death[n + 1] * p[n + 1];
            }
            dp[n] = v;
        }
    };
    let mut p = alloc::vec![0.0; size];
    p[q0] = 1.0;
    let mut work = Rk4Workspace::new(size);
    let mut t = 0.0;
    let mut flux = 0.0;
    let mut mass_error: f64 = 0.0;
    let mut distributions = Vec::with_capacity(grid.len());
    for &target in grid {
        let span = target - t;
        if span > 0.0 {
            let steps = ((span / h) - 1e-9).ceil().max(1.0) as usize;
            let dt = span / steps as f64;
            for i in 0..steps {
                let s = t + i as f64 * dt;
                let before = arrival.eval(s) * p[n_max];
                work.step(&mut rhs, s, &mut p, dt);
                if !bounded {
                    flux += 0.5 * dt * (before + arrival.eval(s + dt) * p[n_max]);
                }
            }
            t = target;
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("forward equations diverged before t = {target}")));
        }
        let total: f64 = p.iter().sum();
        mass_error = mass_error.max((total - 1.0).abs());
        // round-off can leave tiny negative masses
        let masses: Vec<f64> = p.iter().map(|v| v.max(0.0)).collect();
        distributions.push(DistributionVector::new(masses, 0.0, flux)?);
    }
    Ok(TransientSolution { grid: grid.to_vec(), distributions, truncation: n_max, mass_error, boundary_flux: flux })
}

//! Ordering checks between the queue and its fluid approximation.
//!
//! Every check point states `lhs ≤ rhs`. Its margin is `rhs − lhs + hw`,
//! where `hw` is the confidence half-width (already scaled by `z`) of the
//! simulated side, and the point is violated when the margin is negative.
//! Equality claims use `hw − |lhs − rhs|`. Simulation-based checks fail
//! only on a run of at least [`CONSECUTIVE_VIOLATIONS`] violated points of
//! one series; comparisons without sampling noise fail on any violation.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{Error, Result};
use crate::exact::stationary_distribution;
use crate::fluid::{fluid_mean, fluid_moments};
use crate::genfun::{
    at_regime_boundary, check_shifted_regime, constant_arrival, fluid_cgf, load_regime, shifted_mminf_representation,
    stationary_fluid_moment, touchard, LoadRegime,
};
use crate::model::{QueueModel, RateRegime, Variant};
use crate::simulate::{ensemble_observe, ensemble_with, EnsembleConfig, Replicator};

/// Violated points in a row needed to fail a simulation-based check.
pub const CONSECUTIVE_VIOLATIONS: usize = 2;

/// Truncation tolerance for stationary oracles used by the checks.
pub const STATIONARY_TOL: f64 = 1e-15;

/// Which way the queue and the fluid approximation are expected to compare.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    /// `θ < μ`: fluid ≤ queue.
    FluidBelow,
    /// `θ > μ`: queue ≤ fluid.
    FluidAbove,
    /// `θ = μ`: equal.
    Equal,
}

impl Direction {
    pub fn of(model: &QueueModel) -> Self {
        match model.rate_regime() {
            RateRegime::AbandonBelowService => Self::FluidBelow,
            RateRegime::AbandonAboveService => Self::FluidAbove,
            RateRegime::Balanced => Self::Equal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Self::Pass => "PASS",
            Self::Fail => "FAIL",
        }
    }
}

/// One compared pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckPoint {
    /// Time; infinite for stationary comparisons.
    pub t: f64,
    /// Series name, e.g. `m=2` or `alpha=0.5`.
    pub label: String,
    pub lhs: f64,
    pub rhs: f64,
    pub halfwidth: f64,
    pub margin: f64,
    pub violated: bool,
}

#[derive(Debug, Clone, Copy)]
enum Relation {
    AtMost,
    Equal,
}

impl CheckPoint {
    fn new(t: f64, label: &str, lhs: f64, rhs: f64, halfwidth: f64, relation: Relation, slack: f64) -> Self {
        let margin = match relation {
            Relation::AtMost => rhs - lhs + halfwidth,
            Relation::Equal => halfwidth - (lhs - rhs).abs(),
        };
        let violated = !(margin >= -slack * lhs.abs().max(rhs.abs()).max(1.0));
        Self { t, label: label.to_string(), lhs, rhs, halfwidth, margin, violated }
    }
}

/// Outcome of one ordering claim.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderingReport {
    pub claim: String,
    pub regime: String,
    pub points: Vec<CheckPoint>,
    /// Violated points, isolated ones included.
    pub violations: usize,
    /// Violated points inside runs long enough to fail the check.
    pub gated_violations: usize,
    pub worst_margin: f64,
    pub z: f64,
    /// Run length that fails the check.
    pub min_run: usize,
    pub warnings: Vec<String>,
    pub verdict: Verdict,
}

impl OrderingReport {
    fn assemble(claim: &str, regime: &str, points: Vec<CheckPoint>, z: f64, min_run: usize, warnings: Vec<String>) -> Self {
        let violations = points.iter().filter(|p| p.violated).count();
        let worst_margin = points.iter().map(|p| p.margin).fold(f64::INFINITY, f64::min);
        let mut gated = 0;
        let mut labels: Vec<&str> = Vec::new();
        for p in &points {
            if !labels.contains(&p.label.as_str()) {
                labels.push(&p.label);
            }
        }
        for label in labels {
            let mut run = 0;
            for p in points.iter().filter(|p| p.label == label) {
                if p.violated {
                    run += 1;
                    if run == min_run {
                        gated += min_run;
                    } else if run > min_run {
                        gated += 1;
                    }
                } else {
                    run = 0;
                }
            }
        }
        let verdict = if gated == 0 { Verdict::Pass } else { Verdict::Fail };
        Self {
            claim: claim.into(),
            regime: regime.into(),
            points,
            violations,
            gated_violations: gated,
            worst_margin,
            z,
            min_run,
            warnings,
            verdict,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

impl core::fmt::Display for OrderingReport {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(
            f,
            "{} [{}]: {} ({} points, {} violated, {} in failing runs, worst margin {:.6e}, z = {})",
            self.claim,
            self.regime,
            self.verdict.label(),
            self.points.len(),
            self.violations,
            self.gated_violations,
            self.worst_margin,
            self.z
        )?;
        for w in &self.warnings {
            write!(f, "; warning: {w}")?;
        }
        Ok(())
    }
}

/// Rounding slack for points that carry sampling noise.
const NOISY_SLACK: f64 = 1e-12;

/// Orders `(fluid, simulated)` into `(lhs, rhs)` for `direction`.
fn ordered_point(t: f64, label: &str, fluid: f64, sim: f64, hw: f64, direction: Direction) -> CheckPoint {
    match direction {
        Direction::FluidBelow => CheckPoint::new(t, label, fluid, sim, hw, Relation::AtMost, NOISY_SLACK),
        Direction::FluidAbove => CheckPoint::new(t, label, sim, fluid, hw, Relation::AtMost, NOISY_SLACK),
        Direction::Equal => CheckPoint::new(t, label, sim, fluid, hw, Relation::Equal, NOISY_SLACK),
    }
}

fn stability_warning(model: &QueueModel) -> Option<String> {
    let (lower, upper) = model.arrival().bounds();
    let mean_rate = model.arrival().base();
    let capacity = f64::from(model.servers()) * model.service_rate();
    (model.variant() == Variant::ErlangC && mean_rate >= capacity).then(|| {
        format!("no abandonment and mean arrival rate {mean_rate} >= c*mu = {capacity} (rate range [{lower}, {upper}]): the queue is unstable")
    })
}

/// Simulated mean against the fluid mean on `grid`, starting both from `q0`.
pub fn check_mean_ordering<P: Replicator>(
    model: &QueueModel,
    q0: u64,
    grid: &[f64],
    cfg: &EnsembleConfig,
    replicator: &P,
) -> Result<OrderingReport> {
    let mut reports = check_moment_ordering(model, q0, grid, 1, cfg, replicator)?;
    let mut report = reports.remove(0);
    report.claim = "mean-ordering".into();
    Ok(report)
}

/// One report per order `1..=m_max`.
pub fn check_moment_ordering<P: Replicator>(
    model: &QueueModel,
    q0: u64,
    grid: &[f64],
    m_max: u32,
    cfg: &EnsembleConfig,
    replicator: &P,
) -> Result<Vec<OrderingReport>> {
    let fluid = fluid_moments(model, q0 as f64, grid, m_max)?;
    let sim = ensemble_with(model, q0, grid, m_max, &[], cfg, replicator)?;
    let direction = Direction::of(model);
    let mut warnings: Vec<String> = stability_warning(model).into_iter().collect();
    if model.variant() == Variant::ErlangB {
        warnings.push(format!("loss system compared with the theta = {} fluid", model.fluid_abandon_rate()));
    }
    Ok((1..=m_max)
        .map(|m| {
            let label = format!("m={m}");
            let points = grid
                .iter()
                .enumerate()
                .map(|(i, &t)| {
                    let est = sim.moments[i][(m - 1) as usize];
                    ordered_point(t, &label, fluid.values[i][(m - 1) as usize], est.mean, est.halfwidth, direction)
                })
                .collect();
            OrderingReport::assemble(
                &format!("moment-ordering-m{m}"),
                model.rate_regime().label(),
                points,
                cfg.z,
                CONSECUTIVE_VIOLATIONS,
                warnings.clone(),
            )
        })
        .collect())
}

/// Simulated MGF against the fluid MGF for each `α ≥ 0`, with the same
/// comparison repeated on the CGF (log) scale. Negative `α` are skipped:
/// the ordering argument does not cover them.
pub fn check_mgf_ordering<P: Replicator>(
    model: &QueueModel,
    q0: u64,
    grid: &[f64],
    alphas: &[f64],
    cfg: &EnsembleConfig,
    replicator: &P,
) -> Result<OrderingReport> {
    let mut warnings = Vec::new();
    let used: Vec<f64> = alphas.iter().copied().filter(|a| *a >= 0.0).collect();
    if used.len() < alphas.len() {
        warnings.push(format!("{} negative alpha values skipped", alphas.len() - used.len()));
    }
    let sim = ensemble_with(model, q0, grid, 0, &used, cfg, replicator)?;
    if sim.mgf_variance_warning {
        warnings.push(format!("alpha * max Q exceeds 30 (max Q = {}): MGF estimates are high-variance", sim.max_state));
    }
    let direction = Direction::of(model);
    let mut points = Vec::new();
    for (k, &alpha) in used.iter().enumerate() {
        let label = format!("alpha={alpha}");
        let log_label = format!("cgf alpha={alpha}");
        for (i, &t) in grid.iter().enumerate() {
            let (g, _) = fluid_cgf(model, q0 as f64, t, alpha)?;
            let est = sim.mgf[i][k];
            points.push(ordered_point(t, &label, g.exp(), est.mean, est.halfwidth, direction));
            // log scale: widen the simulated side by its interval end
            let log_sim = est.mean.ln();
            let log_hw = match direction {
                Direction::FluidBelow => (est.mean + est.halfwidth).ln() - log_sim,
                Direction::FluidAbove | Direction::Equal => {
                    let low = est.mean - est.halfwidth;
                    if low > 0.0 {
                        log_sim - low.ln()
                    } else {
                        f64::INFINITY
                    }
                }
            };
            points.push(ordered_point(t, &log_label, g, log_sim, log_hw, direction));
        }
    }
    Ok(OrderingReport::assemble(
        "mgf-ordering",
        model.rate_regime().label(),
        points,
        cfg.z,
        CONSECUTIVE_VIOLATIONS,
        warnings,
    ))
}

/// Exact stationary moments between the two Poisson-type fluid bounds.
///
/// `λ ≥ cμ`: `E[(Q_f − γ)^m]` and `E[Q_f^m]`; `λ < cμ`: Poisson(`λ/θ`) and
/// Poisson(`λ/μ`) moments. The order of the bounds follows `θ` vs `μ`.
/// Comparisons are exact except when `θ = μ`, where all three coincide
/// and agreement to 1e-9 relative is required.
pub fn check_stationary_sandwich(model: &QueueModel, m_max: u32) -> Result<OrderingReport> {
    let lambda = constant_arrival(model)?;
    let theta = model.fluid_abandon_rate();
    if !(theta > 0.0) {
        return Err(Error::InvalidArgument("the stationary sandwich needs a positive abandonment rate".into()));
    }
    if model.variant() == Variant::ErlangB {
        return Err(Error::InvalidArgument("the stationary sandwich is stated for abandonment models".into()));
    }
    let exact = stationary_distribution(model, STATIONARY_TOL)?;
    let regime = load_regime(model)?;
    let mut warnings = Vec::new();
    if at_regime_boundary(model)? {
        warnings.push("lambda = c*mu: regime undecidable, using the lambda >= c*mu bounds".into());
    }
    let direction = Direction::of(model);
    let mu = model.service_rate();
    let mut points = Vec::new();
    for m in 1..=m_max {
        let (theta_side, mu_side) = match regime {
            LoadRegime::Overloaded => (touchard(m, lambda / theta), stationary_fluid_moment(model, m)?),
            LoadRegime::Underloaded => (touchard(m, lambda / theta), touchard(m, lambda / mu)),
        };
        // overloaded: theta_side = E[(Q_f − γ)^m], mu_side = E[Q_f^m]
        let value = exact.raw_moment(m);
        let label = format!("m={m}");
        let (lower, upper) = match (regime, direction) {
            (LoadRegime::Overloaded, Direction::FluidAbove) | (LoadRegime::Underloaded, Direction::FluidAbove) => {
                (theta_side, mu_side)
            }
            _ => (mu_side, theta_side),
        };
        if direction == Direction::Equal {
            points.push(CheckPoint::new(f64::INFINITY, &label, lower, value, 0.0, Relation::Equal, 1e-9));
            points.push(CheckPoint::new(f64::INFINITY, &label, value, upper, 0.0, Relation::Equal, 1e-9));
        } else {
            points.push(CheckPoint::new(f64::INFINITY, &format!("{label} lower"), lower, value, 0.0, Relation::AtMost, 0.0));
            points.push(CheckPoint::new(f64::INFINITY, &format!("{label} upper"), value, upper, 0.0, Relation::AtMost, 0.0));
        }
    }
    let regime_label = format!("{}, {}", model.rate_regime().label(), regime.label());
    Ok(OrderingReport::assemble("stationary-sandwich", &regime_label, points, 0.0, 1, warnings))
}

/// Simulated moments between the unshifted and shifted infinite-server
/// moments of the representing system, when `inf λ > cμ` and `q0 > c`.
/// Both bounds are exact (computed from cumulants), so only the simulated
/// side carries a half-width.
pub fn check_nonstationary_sandwich<P: Replicator>(
    model: &QueueModel,
    q0: u64,
    grid: &[f64],
    m_max: u32,
    cfg: &EnsembleConfig,
    replicator: &P,
) -> Result<OrderingReport> {
    check_shifted_regime(model, q0 as f64)?;
    let repr = shifted_mminf_representation(model, q0 as f64)?;
    let sim = ensemble_with(model, q0, grid, m_max, &[], cfg, replicator)?;
    let direction = Direction::of(model);
    let mut points = Vec::new();
    for m in 1..=m_max {
        for (i, &t) in grid.iter().enumerate() {
            let unshifted = repr.raw_moments(t, m, false)[m as usize];
            let shifted = repr.raw_moments(t, m, true)[m as usize];
            let est = sim.moments[i][(m - 1) as usize];
            let (low_label, high_label) = (format!("m={m} lower"), format!("m={m} upper"));
            match direction {
                Direction::FluidAbove => {
                    points.push(CheckPoint::new(t, &low_label, unshifted, est.mean, est.halfwidth, Relation::AtMost, NOISY_SLACK));
                    points.push(CheckPoint::new(t, &high_label, est.mean, shifted, est.halfwidth, Relation::AtMost, NOISY_SLACK));
                }
                Direction::FluidBelow => {
                    points.push(CheckPoint::new(t, &low_label, shifted, est.mean, est.halfwidth, Relation::AtMost, NOISY_SLACK));
                    points.push(CheckPoint::new(t, &high_label, est.mean, unshifted, est.halfwidth, Relation::AtMost, NOISY_SLACK));
                }
                Direction::Equal => {
                    points.push(CheckPoint::new(t, &format!("m={m}"), est.mean, shifted, est.halfwidth, Relation::Equal, NOISY_SLACK));
                }
            }
        }
    }
    Ok(OrderingReport::assemble(
        "nonstationary-sandwich",
        model.rate_regime().label(),
        points,
        cfg.z,
        CONSECUTIVE_VIOLATIONS,
        Vec::new(),
    ))
}

/// Empirical `E[Q·e^{αQ}] ≥ E[Q]·E[e^{αQ}]` for each `α ≥ 0`. The
/// half-width combines the three estimates' half-widths conservatively.
pub fn check_fkg<P: Replicator>(
    model: &QueueModel,
    q0: u64,
    grid: &[f64],
    alphas: &[f64],
    cfg: &EnsembleConfig,
    replicator: &P,
) -> Result<OrderingReport> {
    if alphas.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
        return Err(Error::InvalidArgument("the FKG check needs finite alpha >= 0".into()));
    }
    let per_alpha = 2;
    let width = 1 + per_alpha * alphas.len();
    let obs = ensemble_observe(model, q0, grid, width, cfg, replicator, |rep, values| {
        for (i, &q) in rep.states.iter().enumerate() {
            let row = &mut values[i * width..(i + 1) * width];
            let x = q as f64;
            row[0] = x;
            for (k, &a) in alphas.iter().enumerate() {
                let e = (a * x).exp();
                row[1 + per_alpha * k] = e;
                row[2 + per_alpha * k] = x * e;
            }
        }
    })?;
    let mut points = Vec::new();
    for (k, &alpha) in alphas.iter().enumerate() {
        let label = format!("alpha={alpha}");
        for (i, &t) in grid.iter().enumerate() {
            let row = &obs.stats[i];
            let q = row[0].estimate(cfg.z);
            let e = row[1 + per_alpha * k].estimate(cfg.z);
            let qe = row[2 + per_alpha * k].estimate(cfg.z);
            let hw = qe.halfwidth + e.mean * q.halfwidth + q.mean * e.halfwidth;
            points.push(CheckPoint::new(t, &label, q.mean * e.mean, qe.mean, hw, Relation::AtMost, NOISY_SLACK));
        }
    }
    Ok(OrderingReport::assemble("fkg", model.rate_regime().label(), points, cfg.z, CONSECUTIVE_VIOLATIONS, Vec::new()))
}

/// The fluid mean at `grid`, used by reports that print both curves.
pub fn fluid_mean_curve(model: &QueueModel, q0: f64, grid: &[f64]) -> Result<Vec<f64>> {
    Ok(fluid_mean(model, q0, grid)?.values.into_iter().map(|row| row[0]).collect())
}

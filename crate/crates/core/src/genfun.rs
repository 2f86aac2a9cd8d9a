//! Generating functions of the fluid approximation.
//!
//! Everything is evaluated as a cumulant generating function (CGF) and
//! exponentiated on demand, which keeps values representable for `α` near 1
//! and means near 100.
//!
//! The closed forms covered here:
//!
//! * stationary fluid MGF, in the overloaded regime (`λ ≥ cμ`, a Poisson
//!   `λ/θ` law shifted by `γ = c(θ − μ)/θ`) and in the underloaded regime
//!   (`λ < cμe^{−α}`, a Poisson `λ/μ` law);
//! * the nonstationary infinite-server MGF for a Fourier arrival rate;
//! * the nonstationary fluid CGF when `inf λ > cμ` and `q(0) > c`, which is
//!   the CGF of an infinite-server queue with service rate `θ`, started at
//!   `q(0) − γ` and shifted by `γ`.
//!
//! Outside the closed-form regimes [`fluid_cgf_characteristics`] solves the
//! fluid CGF equation numerically along its characteristics.

use alloc::format;
use alloc::vec::Vec;

use num_traits::Float;

use crate::distribution::DistributionVector;
use crate::error::{Error, Result};
use crate::math::{binomial_row, cumulants_from_moments, moments_from_cumulants};
use crate::model::QueueModel;
use crate::ode::{SwitchFn, SwitchedStepper};
use crate::rates::FourierRate;

/// Tail mass left out of truncated fluid distributions.
pub const DISTRIBUTION_TAIL: f64 = 1e-12;

/// `P_n(x)`, the `n`-th raw moment of a Poisson(`x`) variable, from
/// `P_{n+1}(x) = x Σ_{k≤n} C(n,k) P_k(x)`.
pub fn touchard(n: u32, x: f64) -> f64 {
    let n = n as usize;
    let mut p = alloc::vec![1.0; n + 1];
    for m in 0..n {
        let row = binomial_row(m);
        p[m + 1] = x * (0..=m).map(|k| row[k] * p[k]).sum::<f64>();
    }
    p[n]
}

/// Which stationary fluid characterization applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LoadRegime {
    /// `λ ≥ cμ`: fluid mean at or above `c`; shifted Poisson(`λ/θ`) law.
    Overloaded,
    /// `λ < cμ`: fluid mean below `c`; Poisson(`λ/μ`) law.
    Underloaded,
}

impl LoadRegime {
    pub fn label(self) -> &'static str {
        match self {
            Self::Overloaded => "lambda>=c*mu",
            Self::Underloaded => "lambda<c*mu",
        }
    }
}

/// Arrival rate of a model that must be time-homogeneous.
pub fn constant_arrival(model: &QueueModel) -> Result<f64> {
    if !model.arrival().is_constant() {
        return Err(Error::InvalidArgument("stationary analysis needs a constant arrival rate".into()));
    }
    Ok(model.arrival().base())
}

/// Regime of a constant-rate model. Equality `λ = cμ` is overloaded.
pub fn load_regime(model: &QueueModel) -> Result<LoadRegime> {
    let lambda = constant_arrival(model)?;
    let capacity = f64::from(model.servers()) * model.service_rate();
    Ok(if lambda >= capacity { LoadRegime::Overloaded } else { LoadRegime::Underloaded })
}

/// Whether `λ` sits on (or within rounding of) the regime boundary `λ = cμ`.
pub fn at_regime_boundary(model: &QueueModel) -> Result<bool> {
    let lambda = constant_arrival(model)?;
    let capacity = f64::from(model.servers()) * model.service_rate();
    Ok((lambda - capacity).abs() <= 1e-12 * capacity)
}

/// A stationary fluid MGF value with the regime it came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryMgf {
    /// `log M_f(∞, α)`.
    pub cgf: f64,
    pub regime: LoadRegime,
    /// `λ = cμ`: the overloaded formula was used, but it is least accurate here.
    pub boundary_warning: bool,
    /// Underloaded formula evaluated at `α < 0`, where it is not established.
    pub negative_alpha: bool,
}

impl StationaryMgf {
    pub fn mgf(&self) -> f64 {
        self.cgf.exp()
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!("alpha {alpha} must be finite")));
    }
    Ok(())
}

/// Stationary fluid MGF `M_f(∞, α)` of a constant-rate model.
///
/// Overloaded: `exp((α(θ−μ)c + λ(e^α − 1))/θ)` for every `α`.
/// Underloaded: `exp(λ(e^α − 1)/μ)`, valid only while `λ < cμe^{−α}`;
/// other `α` give a regime error.
pub fn stationary_fluid_mgf(model: &QueueModel, alpha: f64) -> Result<StationaryMgf> {
    check_alpha(alpha)?;
    let lambda = constant_arrival(model)?;
    let c = f64::from(model.servers());
    let (mu, theta) = (model.service_rate(), model.fluid_abandon_rate());
    match load_regime(model)? {
        LoadRegime::Overloaded => {
            if theta <= 0.0 {
                return Err(Error::Unstable("no abandonment and lambda >= c*mu: the fluid level grows without bound".into()));
            }
            Ok(StationaryMgf {
                cgf: (alpha * (theta - mu) * c + lambda * alpha.exp_m1()) / theta,
                regime: LoadRegime::Overloaded,
                boundary_warning: at_regime_boundary(model)?,
                negative_alpha: false,
            })
        }
        LoadRegime::Underloaded => {
            if lambda >= c * mu * (-alpha).exp() {
                return Err(Error::Regime(format!(
                    "lambda < c*mu but lambda >= c*mu*exp(-alpha) at alpha = {alpha}; the fluid MGF has no closed form there"
                )));
            }
            Ok(StationaryMgf {
                cgf: lambda * alpha.exp_m1() / mu,
                regime: LoadRegime::Underloaded,
                boundary_warning: false,
                negative_alpha: alpha < 0.0,
            })
        }
    }
}

/// `E[Q_f(∞)^n]` for a constant-rate model.
///
/// Overloaded: `Σ_j C(n,j) γ^j P_{n−j}(λ/θ)`; underloaded: `P_n(λ/μ)`.
pub fn stationary_fluid_moment(model: &QueueModel, n: u32) -> Result<f64> {
    let lambda = constant_arrival(model)?;
    match load_regime(model)? {
        LoadRegime::Overloaded => {
            let theta = model.fluid_abandon_rate();
            if theta <= 0.0 {
                return Err(Error::Unstable("no abandonment and lambda >= c*mu".into()));
            }
            let gamma = model.shift()?;
            let row = binomial_row(n as usize);
            Ok((0..=n).map(|j| row[j as usize] * gamma.powi(j as i32) * touchard(n - j, lambda / theta)).sum())
        }
        LoadRegime::Underloaded => Ok(touchard(n, lambda / model.service_rate())),
    }
}

/// Stationary fluid law: Poisson(`λ/θ`) on `γ + {0, 1, ...}` when
/// overloaded, Poisson(`λ/μ`) on `{0, 1, ...}` when underloaded.
pub fn stationary_fluid_distribution(model: &QueueModel) -> Result<DistributionVector> {
    let lambda = constant_arrival(model)?;
    match load_regime(model)? {
        LoadRegime::Overloaded => {
            let theta = model.fluid_abandon_rate();
            if theta <= 0.0 {
                return Err(Error::Unstable("no abandonment and lambda >= c*mu".into()));
            }
            DistributionVector::poisson(lambda / theta, model.shift()?, DISTRIBUTION_TAIL)
        }
        LoadRegime::Underloaded => DistributionVector::poisson(lambda / model.service_rate(), 0.0, DISTRIBUTION_TAIL),
    }
}

/// CGF of an infinite-server queue with arrival rate `λ(t)`, service rate
/// `μ` and initial level `q0`:
/// `(e^α − 1)·∫_0^t λ(s)e^{−μ(t−s)}ds + q0·log(e^{−μt}(e^α − 1) + 1)`.
///
/// `q0` may be fractional, as needed by the shifted representation.
pub fn infinite_server_cgf(rate: &FourierRate, mu: f64, q0: f64, t: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(t >= 0.0) || !(mu > 0.0) {
        return Err(Error::InvalidArgument(format!("need t >= 0 and mu > 0 (t = {t}, mu = {mu})")));
    }
    let w = alpha.exp_m1();
    let base = (-mu * t).exp() * w + 1.0;
    if !(base > 0.0) {
        return Err(Error::Domain(format!("e^(-mu t)(e^alpha - 1) + 1 = {base} is not positive")));
    }
    let carried = if q0 == 0.0 { 0.0 } else { q0 * base.ln() };
    Ok(w * rate.discounted_integral(mu, t) + carried)
}

pub fn infinite_server_mgf(rate: &FourierRate, mu: f64, q0: f64, t: f64, alpha: f64) -> Result<f64> {
    infinite_server_cgf(rate, mu, q0, t, alpha).map(Float::exp)
}

/// Checks `inf λ > cμ` (via the conservative lower bound) and `q0 > c`.
pub fn check_shifted_regime(model: &QueueModel, q0: f64) -> Result<()> {
    let c = f64::from(model.servers());
    let (lower, _) = model.arrival().bounds();
    if !(lower > c * model.service_rate()) {
        return Err(Error::Regime(format!(
            "arrival lower bound {lower} does not exceed c*mu = {}",
            c * model.service_rate()
        )));
    }
    if !(q0 > c) {
        return Err(Error::Regime(format!("initial level {q0} does not exceed c = {c}")));
    }
    if model.fluid_abandon_rate() <= 0.0 {
        return Err(Error::Regime("the shifted representation needs a positive abandonment rate".into()));
    }
    Ok(())
}

/// An infinite-server queue with arrival rate `λ(t)`, service rate `θ`,
/// initial level `q0 − γ`, observed with an additive shift `γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedInfiniteServer {
    pub arrival: FourierRate,
    pub service_rate: f64,
    pub initial: f64,
    pub shift: f64,
}

impl ShiftedInfiniteServer {
    /// CGF of the shifted system, `log E[e^{α(X(t) + γ)}]`.
    pub fn cgf(&self, t: f64, alpha: f64) -> Result<f64> {
        Ok(infinite_server_cgf(&self.arrival, self.service_rate, self.initial, t, alpha)? + alpha * self.shift)
    }

    pub fn mgf(&self, t: f64, alpha: f64) -> Result<f64> {
        self.cgf(t, alpha).map(Float::exp)
    }

    /// Cumulants `κ_0..=κ_n` of the unshifted system `X(t)`: a Poisson part
    /// with mean `∫λ e^{−θ(t−s)}ds` plus `initial` copies of a
    /// Bernoulli(`e^{−θt}`) survivor indicator.
    pub fn cumulants(&self, t: f64, n: u32, shifted: bool) -> Vec<f64> {
        let n = n as usize;
        let survive = (-self.service_rate * t).exp();
        let mut bernoulli_moments = alloc::vec![survive; n + 1];
        bernoulli_moments[0] = 1.0;
        let bernoulli = cumulants_from_moments(&bernoulli_moments);
        let poisson = self.arrival.discounted_integral(self.service_rate, t);
        let mut kappa: Vec<f64> = bernoulli.iter().map(|k| poisson + self.initial * k).collect();
        kappa[0] = 0.0;
        if shifted && n >= 1 {
            kappa[1] += self.shift;
        }
        kappa
    }

    /// Raw moments of orders `0..=n`, with or without the shift.
    pub fn raw_moments(&self, t: f64, n: u32, shifted: bool) -> Vec<f64> {
        moments_from_cumulants(&self.cumulants(t, n, shifted))
    }
}

/// Parameters of the shifted infinite-server system whose law matches the
/// fluid approximation when `inf λ > cμ` and `q0 > c`.
pub fn shifted_mminf_representation(model: &QueueModel, q0: f64) -> Result<ShiftedInfiniteServer> {
    check_shifted_regime(model, q0)?;
    let gamma = model.shift()?;
    Ok(ShiftedInfiniteServer {
        arrival: model.arrival().clone(),
        service_rate: model.fluid_abandon_rate(),
        initial: q0 - gamma,
        shift: gamma,
    })
}

/// Closed-form nonstationary fluid CGF
/// `G_f(t, α) = (e^α − 1)Ψ_θ(t) + γα + log((e^α − 1)e^{−θt} + 1)(q0 − γ)`,
/// valid when `inf λ > cμ` and `q0 > c`.
pub fn nonstationary_fluid_cgf(model: &QueueModel, q0: f64, t: f64, alpha: f64) -> Result<f64> {
    check_shifted_regime(model, q0)?;
    let theta = model.fluid_abandon_rate();
    let gamma = model.shift()?;
    let w = alpha.exp_m1();
    let base = w * (-theta * t).exp() + 1.0;
    if !(base > 0.0) {
        return Err(Error::Domain(format!("(e^alpha - 1)e^(-theta t) + 1 = {base} is not positive")));
    }
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("time {t} must be nonnegative")));
    }
    check_alpha(alpha)?;
    Ok(w * model.arrival().discounted_integral(theta, t) + gamma * alpha + base.ln() * (q0 - gamma))
}

pub fn nonstationary_fluid_mgf(model: &QueueModel, q0: f64, t: f64, alpha: f64) -> Result<f64> {
    nonstationary_fluid_cgf(model, q0, t, alpha).map(Float::exp)
}

/// Settings for [`fluid_cgf_characteristics`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharacteristicSettings {
    /// RK4 step along each characteristic.
    pub step: f64,
    /// Accepted mismatch between the reached and requested `α`.
    pub alpha_tolerance: f64,
    pub max_iterations: u32,
}

impl Default for CharacteristicSettings {
    fn default() -> Self {
        Self { step: 1e-3, alpha_tolerance: 1e-13, max_iterations: 200 }
    }
}

/// End state of one characteristic: `(α, G, ∂G/∂α)` at the final time.
fn trace_characteristic(model: &QueueModel, q0: f64, t: f64, start_w: f64, step: f64) -> [f64; 3] {
    let c = f64::from(model.servers());
    let (mu, theta) = (model.service_rate(), model.fluid_abandon_rate());
    // Charpit system for G_t = λ(e^α − 1) + (e^{−α} − 1)·(θp − (θ−μ)min(p, c)), p = G_α
    let mut rhs = |s: f64, y: &[f64], below: &[bool], dy: &mut [f64]| {
        let (alpha, p) = (y[0], y[2]);
        let lambda = model.arrival().eval(s);
        let (slope, outflow) = if below[0] { (mu, mu * p) } else { (theta, mu * c + theta * (p - c)) };
        let up = alpha.exp_m1();
        let down = (-alpha).exp_m1();
        dy[0] = -slope * down;
        dy[1] = lambda * up + down * outflow - p * slope * down;
        dy[2] = lambda * alpha.exp() - (-alpha).exp() * outflow;
    };
    let r = start_w.ln_1p();
    let mut y = [r, r * q0, q0];
    if t > 0.0 {
        let n = ((t / step) - 1e-9).ceil().max(1.0) as usize;
        let h = t / n as f64;
        let kink = SwitchFn { count: 1, eval: |_: f64, y: &[f64], s: &mut [f64]| s[0] = y[2] - c };
        let mut work = SwitchedStepper::new(3, kink);
        for i in 0..n {
            work.step(&mut rhs, i as f64 * h, &mut y, h);
        }
    }
    y
}

/// Fluid CGF `G_f(t, α)` from the method of characteristics, for any
/// regime. Each characteristic starts at `t = 0` with `α = r`,
/// `G = r·q0`, `∂G/∂α = q0`; the starting `r` is found by root-finding so
/// that the characteristic reaches the requested `α` at time `t`.
///
/// Along `α ≡ 0` the slope `∂G/∂α` follows the fluid mean ODE.
pub fn fluid_cgf_characteristics(
    model: &QueueModel,
    q0: f64,
    t: f64,
    alpha: f64,
    settings: &CharacteristicSettings,
) -> Result<f64> {
    check_alpha(alpha)?;
    if !(t >= 0.0) || !(q0 >= 0.0) {
        return Err(Error::InvalidArgument(format!("need t >= 0 and q0 >= 0 (t = {t}, q0 = {q0})")));
    }
    if alpha == 0.0 {
        return Ok(0.0);
    }
    if t == 0.0 {
        return Ok(alpha * q0);
    }
    // With w = e^α − 1, every characteristic satisfies w(t) = w(0)·exp(∫κ)
    // with κ between min(μ, θ) and max(μ, θ), which brackets w(0).
    let (mu, theta) = (model.service_rate(), model.fluid_abandon_rate());
    let target_w = alpha.exp_m1();
    let (k_lo, k_hi) = (mu.min(theta), mu.max(theta));
    // widened so rounding cannot push a root that sits on an end outside
    let a = target_w * (-k_hi * t).exp() * (1.0 - 1e-6);
    let b = target_w * (-k_lo * t).exp() * (1.0 + 1e-6);
    let (mut lo, mut hi) = if a < b { (a, b) } else { (b, a) };
    let miss = |w0: f64| trace_characteristic(model, q0, t, w0, settings.step)[0] - alpha;
    let (mut f_lo, mut f_hi) = (miss(lo), miss(hi));
    if f_lo.abs() <= settings.alpha_tolerance {
        return Ok(trace_characteristic(model, q0, t, lo, settings.step)[1]);
    }
    if f_hi.abs() <= settings.alpha_tolerance {
        return Ok(trace_characteristic(model, q0, t, hi, settings.step)[1]);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::Numerical(format!(
            "characteristics do not bracket alpha = {alpha} at t = {t} (misses {f_lo:e}, {f_hi:e})"
        )));
    }
    // Illinois regula falsi
    let mut side = 0i8;
    for _ in 0..settings.max_iterations {
        let mid = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        let mid = if mid > lo && mid < hi { mid } else { 0.5 * (lo + hi) };
        let end = trace_characteristic(model, q0, t, mid, settings.step);
        let f_mid = end[0] - alpha;
        if f_mid.abs() <= settings.alpha_tolerance || (hi - lo) <= 4.0 * f64::EPSILON * hi.abs().max(lo.abs()) {
            return Ok(end[1]);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
            if side == -1 {
                f_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = mid;
            f_hi = f_mid;
            if side == 1 {
                f_lo *= 0.5;
            }
            side = 1;
        }
    }
    Err(Error::Numerical(format!("root finding for alpha = {alpha} at t = {t} did not converge")))
}

/// How a fluid CGF value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CgfMethod {
    ClosedForm,
    Characteristics,
}

/// Fluid CGF from the closed form when its preconditions hold and
/// `α ≥ 0`, and from the characteristics otherwise. For `α < 0` the tilted
/// mean `∂G/∂α` can fall below `c`, where the closed form stops solving the
/// fluid equation.
pub fn fluid_cgf(model: &QueueModel, q0: f64, t: f64, alpha: f64) -> Result<(f64, CgfMethod)> {
    if alpha >= 0.0 && check_shifted_regime(model, q0).is_ok() {
        return Ok((nonstationary_fluid_cgf(model, q0, t, alpha)?, CgfMethod::ClosedForm));
    }
    let value = fluid_cgf_characteristics(model, q0, t, alpha, &CharacteristicSettings::default())?;
    Ok((value, CgfMethod::Characteristics))
}

/// Whether a [`GenFunGrid`] holds MGF or CGF values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GenFunKind {
    Mgf,
    Cgf,
}

impl GenFunKind {
    pub fn label(self) -> &'static str {
        match self {
            Self::Mgf => "mgf",
            Self::Cgf => "cgf",
        }
    }
}

/// Generating-function values over a time × α grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GenFunGrid {
    pub times: Vec<f64>,
    pub alphas: Vec<f64>,
    /// `values[i][j]` at `(times[i], alphas[j])`.
    pub values: Vec<Vec<f64>>,
    pub kind: GenFunKind,
}

impl GenFunGrid {
    /// Evaluates a CGF function on the grid, exponentiating for MGF output.
    pub fn from_cgf<F>(times: &[f64], alphas: &[f64], kind: GenFunKind, mut cgf: F) -> Result<Self>
    where
        F: FnMut(f64, f64) -> Result<f64>,
    {
        let mut values = Vec::with_capacity(times.len());
        for &t in times {
            let mut row = Vec::with_capacity(alphas.len());
            for &alpha in alphas {
                let g = cgf(t, alpha)?;
                row.push(match kind {
                    GenFunKind::Cgf => g,
                    GenFunKind::Mgf => g.exp(),
                });
            }
            values.push(row);
        }
        Ok(Self { times: times.to_vec(), alphas: alphas.to_vec(), values, kind })
    }
}

/// Fluid MGF or CGF surface over `times × alphas`.
pub fn fluid_surface(model: &QueueModel, q0: f64, times: &[f64], alphas: &[f64], kind: GenFunKind) -> Result<GenFunGrid> {
    GenFunGrid::from_cgf(times, alphas, kind, |t, a| fluid_cgf(model, q0, t, a).map(|(g, _)| g))
}

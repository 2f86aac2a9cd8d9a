//! Erlang-A/B/C queue models and the Halfin–Whitt scaling transform.

use alloc::format;

use num_traits::Float;

use crate::error::{Error, Result};
use crate::rates::FourierRate;

/// Multiple of `μ` used as the abandonment rate when a fluid model of an
/// Erlang-B queue is needed. The loss system is the `θ → ∞` limit, which
/// has no finite fluid ODE; any `θ > μ` fluid bounds the loss system from
/// above, and this value keeps the explicit integrators stable at the
/// default step.
pub const ERLANG_B_FLUID_THETA_FACTOR: f64 = 50.0;

/// Which member of the Erlang family a model represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Multi-server queue with exponential abandonment (`θ > 0`).
    ErlangA,
    /// Loss system: arrivals finding all `c` servers busy are blocked.
    ErlangB,
    /// Delay system without abandonment (`θ = 0`).
    ErlangC,
}

/// How the abandonment rate compares with the service rate. This selects
/// the direction of every ordering result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RateRegime {
    /// `θ < μ`: the true queue dominates its fluid approximation.
    AbandonBelowService,
    /// `θ > μ`: the fluid approximation dominates the true queue.
    AbandonAboveService,
    /// `θ = μ`: the queue is an infinite-server queue and the two coincide.
    Balanced,
}

impl RateRegime {
    pub fn label(self) -> &'static str {
        match self {
            Self::AbandonBelowService => "theta<mu",
            Self::AbandonAboveService => "theta>mu",
            Self::Balanced => "theta=mu",
        }
    }
}

/// `M(t)/M/c+M` queue with arrival rate `λ(t)`, `c` servers, service rate
/// `μ` and abandonment rate `θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueModel {
    arrival: FourierRate,
    servers: u32,
    service_rate: f64,
    abandon_rate: f64,
    variant: Variant,
}

impl QueueModel {
    pub fn new(arrival: FourierRate, servers: u32, service_rate: f64, abandon_rate: f64, variant: Variant) -> Result<Self> {
        if servers == 0 {
            return Err(Error::InvalidArgument("at least one server is required".into()));
        }
        if !(service_rate > 0.0) || !service_rate.is_finite() {
            return Err(Error::InvalidArgument(format!("service rate {service_rate} must be positive")));
        }
        if !(abandon_rate >= 0.0) || !abandon_rate.is_finite() {
            return Err(Error::InvalidArgument(format!("abandonment rate {abandon_rate} must be nonnegative")));
        }
        match variant {
            Variant::ErlangA if abandon_rate == 0.0 => {
                return Err(Error::InvalidArgument("Erlang-A needs a positive abandonment rate".into()));
            }
            Variant::ErlangC if abandon_rate != 0.0 => {
                return Err(Error::InvalidArgument("Erlang-C has no abandonment (theta must be 0)".into()));
            }
            _ => {}
        }
        Ok(Self { arrival, servers, service_rate, abandon_rate, variant })
    }

    pub fn erlang_a(arrival: FourierRate, servers: u32, service_rate: f64, abandon_rate: f64) -> Result<Self> {
        Self::new(arrival, servers, service_rate, abandon_rate, Variant::ErlangA)
    }

    pub fn erlang_b(arrival: FourierRate, servers: u32, service_rate: f64) -> Result<Self> {
        Self::new(arrival, servers, service_rate, 0.0, Variant::ErlangB)
    }

    pub fn erlang_c(arrival: FourierRate, servers: u32, service_rate: f64) -> Result<Self> {
        Self::new(arrival, servers, service_rate, 0.0, Variant::ErlangC)
    }

    pub fn arrival(&self) -> &FourierRate {
        &self.arrival
    }

    pub fn servers(&self) -> u32 {
        self.servers
    }

    pub fn service_rate(&self) -> f64 {
        self.service_rate
    }

    /// The configured `θ`. Ignored by Erlang-B dynamics.
    pub fn abandon_rate(&self) -> f64 {
        self.abandon_rate
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// The same model with a different arrival rate.
    pub fn with_arrival(&self, arrival: FourierRate) -> Self {
        Self { arrival, ..self.clone() }
    }

    /// State cap of the loss system; `None` for unbounded variants.
    pub fn capacity(&self) -> Option<u32> {
        (self.variant == Variant::ErlangB).then_some(self.servers)
    }

    /// `θ` as seen by the fluid equations. Erlang-B uses a large surrogate,
    /// see [`ERLANG_B_FLUID_THETA_FACTOR`].
    pub fn fluid_abandon_rate(&self) -> f64 {
        match self.variant {
            Variant::ErlangB => ERLANG_B_FLUID_THETA_FACTOR * self.service_rate,
            _ => self.abandon_rate,
        }
    }

    pub fn rate_regime(&self) -> RateRegime {
        let theta = self.fluid_abandon_rate();
        if theta < self.service_rate {
            RateRegime::AbandonBelowService
        } else if theta > self.service_rate {
            RateRegime::AbandonAboveService
        } else {
            RateRegime::Balanced
        }
    }

    /// `δ(q) = μ·(q ∧ c) + θ·(q − c)⁺`, the total departure intensity in state `q`.
    pub fn departure_rate(&self, q: u64) -> f64 {
        let c = u64::from(self.servers);
        let busy = q.min(c) as f64;
        match self.variant {
            Variant::ErlangB => self.service_rate * busy,
            _ => self.service_rate * busy + self.abandon_rate * q.saturating_sub(c) as f64,
        }
    }

    /// The departure intensity evaluated at a real-valued fluid level.
    pub fn fluid_outflow(&self, x: f64) -> f64 {
        let c = f64::from(self.servers);
        self.service_rate * x.min(c) + self.fluid_abandon_rate() * (x - c).max(0.0)
    }

    /// Shift `γ = c(θ − μ)/θ` of the shifted Poisson representation.
    pub fn shift(&self) -> Result<f64> {
        let theta = self.fluid_abandon_rate();
        if theta <= 0.0 {
            return Err(Error::InvalidArgument("the shift needs a positive abandonment rate".into()));
        }
        Ok(f64::from(self.servers) * (theta - self.service_rate) / theta)
    }

    /// Halfin–Whitt scaling: arrival `η·λ(t)`, servers `⌈η·c⌉`, `μ` and `θ` unchanged.
    pub fn scale(&self, eta: f64) -> Result<Self> {
        let arrival = self.arrival.scaled(eta)?;
        let servers = scaled_servers(self.servers, eta)?;
        Ok(Self { arrival, servers, ..self.clone() })
    }
}

fn scaled_servers(servers: u32, eta: f64) -> Result<u32> {
    let raw = eta * f64::from(servers);
    // products that should be integral (0.1·30) may land a few ulps above
    let nearest = raw.round();
    let count = if (raw - nearest).abs() <= 1e-9 * nearest.max(1.0) { nearest } else { raw.ceil() };
    if count > f64::from(u32::MAX) {
        return Err(Error::InvalidArgument(format!("scaled server count {count} is too large")));
    }
    Ok((count as u32).max(1))
}

/// A base model together with its Halfin–Whitt factor `η`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledModel {
    base: QueueModel,
    eta: f64,
    scaled: QueueModel,
}

impl ScaledModel {
    pub fn new(base: QueueModel, eta: f64) -> Result<Self> {
        let scaled = base.scale(eta)?;
        Ok(Self { base, eta, scaled })
    }

    pub fn base(&self) -> &QueueModel {
        &self.base
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// The accelerated model `(η·λ, ⌈η·c⌉, μ, θ)`.
    pub fn model(&self) -> &QueueModel {
        &self.scaled
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fig1(theta: f64) -> QueueModel {
        QueueModel::erlang_a(FourierRate::sinusoid(10.0, 2.0).unwrap(), 10, 1.0, theta).unwrap()
    }

    #[test]
    fn departure_rate_examples() {
        let m = fig1(0.5);
        assert_eq!(m.departure_rate(5), 5.0);
        assert_eq!(m.departure_rate(15), 12.5);
        let c = QueueModel::erlang_c(FourierRate::sinusoid(10.0, 2.0).unwrap(), 10, 1.0).unwrap();
        assert_eq!(c.departure_rate(15), 10.0);
        let b = QueueModel::erlang_b(FourierRate::constant(3.0).unwrap(), 2, 1.5).unwrap();
        assert_eq!(b.departure_rate(2), 3.0);
    }

    #[test]
    fn scaling_examples() {
        let m = fig1(0.5);
        assert_eq!(m.scale(1.0).unwrap(), m);

        let big = m.scale(10.0).unwrap();
        assert_eq!(big.servers(), 100);
        assert_eq!(big.arrival(), &FourierRate::sinusoid(100.0, 20.0).unwrap());
        assert_eq!(big.service_rate(), 1.0);
        assert_eq!(big.abandon_rate(), 0.5);

        let half = m.scale(0.5).unwrap();
        assert_eq!(half.servers(), 5);
        assert_eq!(half.arrival().base(), 5.0);
        assert_eq!(half.arrival().harmonics(), &[(1.0, 0.0)]);

        // non-integral products round up
        assert_eq!(m.scale(0.25).unwrap().servers(), 3);
        assert!(matches!(m.scale(0.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(m.scale(-1.0), Err(Error::InvalidArgument(_))));

        let scaled = ScaledModel::new(m.clone(), 10.0).unwrap();
        assert_eq!(scaled.model(), &big);
        assert_eq!(scaled.eta(), 10.0);
    }

    #[test]
    fn validation() {
        let r = || FourierRate::constant(1.0).unwrap();
        assert!(QueueModel::erlang_a(r(), 0, 1.0, 1.0).is_err());
        assert!(QueueModel::erlang_a(r(), 1, 0.0, 1.0).is_err());
        assert!(QueueModel::erlang_a(r(), 1, 1.0, 0.0).is_err());
        assert!(QueueModel::erlang_a(r(), 1, 1.0, -1.0).is_err());
        assert!(QueueModel::new(r(), 1, 1.0, 0.5, Variant::ErlangC).is_err());
        assert!(QueueModel::new(r(), 1, 1.0, 0.5, Variant::ErlangB).is_ok());
    }

    #[test]
    fn regimes_and_shift() {
        assert_eq!(fig1(0.5).rate_regime(), RateRegime::AbandonBelowService);
        assert_eq!(fig1(2.0).rate_regime(), RateRegime::AbandonAboveService);
        assert_eq!(fig1(1.0).rate_regime(), RateRegime::Balanced);
        let r = FourierRate::constant(1.0).unwrap();
        assert_eq!(QueueModel::erlang_c(r.clone(), 3, 1.0).unwrap().rate_regime(), RateRegime::AbandonBelowService);
        assert_eq!(QueueModel::erlang_b(r, 3, 1.0).unwrap().rate_regime(), RateRegime::AbandonAboveService);

        let m = QueueModel::erlang_a(FourierRate::constant(20.0).unwrap(), 15, 1.0, 2.0).unwrap();
        assert_eq!(m.shift().unwrap(), 7.5);
    }

    proptest! {
        #[test]
        fn departure_rate_is_monotone(c in 1u32..50, mu in 0.01..5.0f64, theta in 0.0..5.0f64, q in 0u64..200) {
            let variant = if theta == 0.0 { Variant::ErlangC } else { Variant::ErlangA };
            let m = QueueModel::new(FourierRate::constant(1.0).unwrap(), c, mu, theta, variant).unwrap();
            prop_assert!(m.departure_rate(q + 1) >= m.departure_rate(q));
        }

        #[test]
        fn balanced_rates_are_linear(c in 1u32..50, mu in 0.01..5.0f64, q in 0u64..200) {
            let m = QueueModel::erlang_a(FourierRate::constant(1.0).unwrap(), c, mu, mu).unwrap();
            prop_assert!((m.departure_rate(q) - mu * q as f64).abs() <= 1e-12 * (mu * q as f64).max(1.0));
        }

        #[test]
        fn scaling_composes(a in 1u32..8, b in 1u32..8, c in 1u32..20) {
            let m = QueueModel::erlang_a(FourierRate::sinusoid(10.0, 2.0).unwrap(), c, 1.0, 0.5).unwrap();
            let twice = m.scale(a as f64).unwrap().scale(b as f64).unwrap();
            let once = m.scale((a * b) as f64).unwrap();
            prop_assert_eq!(twice.servers(), once.servers());
            prop_assert!((twice.arrival().base() - once.arrival().base()).abs() < 1e-9);
            prop_assert!((twice.arrival().harmonics()[0].0 - once.arrival().harmonics()[0].0).abs() < 1e-9);
        }
    }
}

//! JSON experiment configuration.
//!
//! ```json
//! {
//!   "kind": "simulate",
//!   "model": {
//!     "arrival": { "base": 10.0, "harmonics": [[2.0, 0.0]] },
//!     "c": 10, "mu": 1.0, "theta": 0.5, "variant": "A"
//!   },
//!   "q0": 0, "horizon": 20.0, "step": 0.5,
//!   "reps": 10000, "seed": 42, "orders": 4, "alphas": [0.1, 0.2]
//! }
//! ```
//!
//! `harmonics[k-1] = [a_k, b_k]` is the coefficient pair of
//! `a_k sin(kt) + b_k cos(kt)`. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use erlang_core::model::{QueueModel, Variant};
use erlang_core::FourierRate;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, LabResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateConfig {
    pub base: f64,
    #[serde(default)]
    pub harmonics: Vec<[f64; 2]>,
}

impl RateConfig {
    pub fn build(&self) -> LabResult<FourierRate> {
        let harmonics = self.harmonics.iter().map(|[a, b]| (*a, *b)).collect();
        FourierRate::new(self.base, harmonics).map_err(|e| LabError::Config(format!("arrival: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum VariantConfig {
    #[default]
    A,
    B,
    C,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub arrival: RateConfig,
    pub c: u32,
    pub mu: f64,
    /// Ignored by Erlang-B, must be 0 (or absent) for Erlang-C.
    #[serde(default)]
    pub theta: f64,
    #[serde(default)]
    pub variant: VariantConfig,
    /// Optional Halfin–Whitt factor applied after building the model.
    #[serde(default)]
    pub eta: Option<f64>,
}

impl ModelConfig {
    pub fn build(&self) -> LabResult<QueueModel> {
        let arrival = self.arrival.build()?;
        let model = match self.variant {
            VariantConfig::A => QueueModel::new(arrival, self.c, self.mu, self.theta, Variant::ErlangA),
            VariantConfig::B => QueueModel::new(arrival, self.c, self.mu, 0.0, Variant::ErlangB),
            VariantConfig::C => QueueModel::new(arrival, self.c, self.mu, self.theta, Variant::ErlangC),
        }
        .map_err(|e| LabError::Config(format!("model: {e}")))?;
        match self.eta {
            Some(eta) => model.scale(eta).map_err(|e| LabError::Config(format!("eta: {e}"))),
            None => Ok(model),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunKind {
    Simulate,
    Fluid,
    Genfun,
    Verify,
    Figure,
}

/// Checks run by the `verify` kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    Mean,
    Moments,
    Mgf,
    StationarySandwich,
    NonstationarySandwich,
    Fkg,
}

fn default_horizon() -> f64 {
    20.0
}
fn default_step() -> f64 {
    0.5
}
fn default_reps() -> u64 {
    10_000
}
fn default_seed() -> u64 {
    42
}
fn default_orders() -> u32 {
    4
}
fn default_alphas() -> Vec<f64> {
    vec![0.1, 0.25, 0.5]
}
fn default_checks() -> Vec<CheckKind> {
    vec![CheckKind::Mean, CheckKind::Moments]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub kind: Option<RunKind>,
    #[serde(default)]
    pub model: Option<ModelConfig>,
    #[serde(default)]
    pub q0: u64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    /// Spacing of the output time grid.
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_reps")]
    pub reps: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_orders")]
    pub orders: u32,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default)]
    pub figure: Option<String>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// `genfun`: emit the stationary fluid law instead of a CGF surface.
    #[serde(default)]
    pub stationary: bool,
    /// RK4 step for fluid integrations.
    #[serde(default)]
    pub h_step: Option<f64>,
    /// Step-halving tolerance for fluid integrations.
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default = "default_checks")]
    pub checks: Vec<CheckKind>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> LabResult<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| LabError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> LabResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    // negated comparisons also reject NaN
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> LabResult<()> {
        let bad = |msg: String| Err(LabError::Config(msg));
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return bad(format!("horizon {} must be positive", self.horizon));
        }
        if !(self.step > 0.0) || self.step > self.horizon {
            return bad(format!("step {} must be in (0, horizon]", self.step));
        }
        if self.reps < 2 {
            return bad(format!("reps {} must be at least 2", self.reps));
        }
        if self.orders == 0 {
            return bad("orders must be at least 1".into());
        }
        if self.alphas.iter().any(|a| !a.is_finite()) {
            return bad("alphas must be finite".into());
        }
        if let Some(h) = self.h_step {
            if !(h > 0.0) {
                return bad(format!("h_step {h} must be positive"));
            }
        }
        if let Some(tol) = self.tolerance {
            if !(tol > 0.0) {
                return bad(format!("tolerance {tol} must be positive"));
            }
        }
        if let Some(model) = &self.model {
            model.build()?;
        }
        Ok(())
    }

    pub fn build_model(&self) -> LabResult<QueueModel> {
        self.model.as_ref().ok_or_else(|| LabError::Config("`model` is required for this run kind".into()))?.build()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_missing_fields() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.reps, 10_000);
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.checks, [CheckKind::Mean, CheckKind::Moments]);
    }

    #[test]
    fn parses_a_full_model() {
        let cfg = ExperimentConfig::from_json(
            r#"{"kind":"fluid","model":{"arrival":{"base":10,"harmonics":[[2,0]]},"c":10,"mu":1,"theta":0.5}}"#,
        )
        .unwrap();
        let m = cfg.build_model().unwrap();
        assert_eq!(m.servers(), 10);
        assert_eq!(m.arrival().eval(std::f64::consts::FRAC_PI_2), 12.0);
        assert_eq!(cfg.kind, Some(RunKind::Fluid));
    }

    #[test]
    fn scaling_and_variants() {
        let cfg = ExperimentConfig::from_json(
            r#"{"model":{"arrival":{"base":10,"harmonics":[[2,0]]},"c":10,"mu":1,"theta":2,"eta":10}}"#,
        )
        .unwrap();
        let m = cfg.build_model().unwrap();
        assert_eq!(m.servers(), 100);
        assert_eq!(m.arrival().base(), 100.0);
        let b = ExperimentConfig::from_json(r#"{"model":{"arrival":{"base":3},"c":4,"mu":1,"variant":"B"}}"#).unwrap();
        assert_eq!(b.build_model().unwrap().variant(), Variant::ErlangB);
    }

    #[test]
    fn schema_violations_are_config_errors() {
        for text in [
            r#"{"unknown": 1}"#,
            r#"{"reps": -3}"#,
            r#"{"reps": 1}"#,
            r#"{"model":{"arrival":{"base":1,"harmonics":[[5,0]]},"c":1,"mu":1,"theta":1}}"#,
            r#"{"model":{"arrival":{"base":1},"c":0,"mu":1,"theta":1}}"#,
            r#"{"checks":["nope"]}"#,
            "not json",
        ] {
            assert!(matches!(ExperimentConfig::from_json(text), Err(LabError::Config(_))), "{text}");
        }
    }
}

//! Numerical laboratory for the nonstationary Erlang-A queue `M(t)/M/c+M`.
//!
//! The crate is `no_std` (it needs `alloc`) and contains the numerical core:
//!
//! * [`rates`]: Fourier-series arrival intensities `λ(t)`.
//! * [`model`]: Erlang-A/B/C models and Halfin–Whitt scaling.
//! * [`simulate`]: exact sample paths and replicated ensemble estimators.
//! * [`fluid`]: the fluid (mean-field) mean, diffusion variance and closed
//!   moment systems.
//! * [`genfun`]: closed-form fluid MGF/CGF evaluators, Touchard moments and
//!   the shifted Poisson / shifted `M/M/∞` representations.
//! * [`exact`]: birth–death stationary laws and forward-equation transients.
//! * [`verify`]: executable ordering checks between the true queue and its
//!   fluid approximation.
//!
//! IO, configuration files and parallel execution live in the companion
//! `erlang-lab` crate.
#![no_std]
// `num_traits::Float` supplies float math under no_std; when a dependency
// enables std the inherent methods shadow it and the import looks unused
#![allow(unused_imports)]
// `!(x > 0.0)` style guards are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod distribution;
pub mod error;
pub mod exact;
pub mod fluid;
pub mod genfun;
pub mod model;
pub mod ode;
pub mod rates;
pub mod simulate;
pub mod verify;

mod math;

pub use distribution::DistributionVector;
pub use error::{Error, Result};
pub use model::{QueueModel, ScaledModel, Variant};
pub use rates::FourierRate;

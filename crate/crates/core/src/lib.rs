//! Quantized Cramér-Rao bounds, uplink-rate bounds and CRB-rate trade-off
//! solvers for hybrid radar fusion (HRF) receivers with b-bit ADCs.
//!
//! The crate is organised bottom-up:
//!
//! * [`scenario`] describes the physical setup and derived link budgets.
//! * [`signal_model`] builds steering vectors, channels and the noiseless
//!   sampled signal together with its AoA derivatives.
//! * [`quantizer`] designs Lloyd-Max quantizers and models ADC dynamic range.
//! * [`fisher`] evaluates exact quantized FIMs, the Bussgang low-SNR bound and
//!   a Monte-Carlo empirical FIM.
//! * [`rate`] evaluates received covariances and uplink MI bounds.
//! * [`pareto`] solves the sensing-centric and communication-centric convex
//!   programs and sweeps the CRB-rate boundary.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod fisher;
pub mod linalg;
pub mod normal;
pub mod pareto;
pub mod quantizer;
pub mod rate;
pub mod scenario;
pub mod signal_model;

pub use error::{HrfError, Result};
pub use fisher::{crb, fim_exact, fim_lower_bound_aoa, CrbValue, FimKind, FimResult, Parameter};
pub use pareto::{boundary_sweep, extract_rank1, solve_p0, solve_p1, CovariancePair, ParetoPoint};
pub use quantizer::{design_lloyd_max, Quantizer};
pub use rate::{mi_lower_bound, mi_one_bit, signal_covariance, RateValue};
pub use scenario::{default_scenario, OfdmPlan, Scenario, TargetSpec, UserSpec};
pub use signal_model::{Precoders, Symbols};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;

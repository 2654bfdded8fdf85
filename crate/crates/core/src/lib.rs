//! Analysis, simulation and sizing of a single-switch, Zeta-derived high
//! step-up DC-DC converter with a coupled inductor and a two-capacitor
//! voltage multiplier.
//!
//! * [`analytics`] evaluates the closed-form continuous-conduction steady state.
//! * [`simulator`] integrates the switched circuit to periodic steady state and
//!   serves as the numerical reference for the closed forms.
//! * [`comparison`] holds the gain formulas of competing topologies.
//! * [`design`] sizes components for a set of requirements.
//! * [`export`] writes the CSV/JSON artifacts.
//!
//! Numeric code is generic over [`Scalar`] (`f32`, `f64`); the `f64` aliases
//! below are what the CLI uses.

// `!(x > 0)` is how NaN gets rejected alongside non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod comparison;
pub mod design;
pub mod export;
pub mod model;
pub mod scalar;
pub mod simulator;

pub use model::{
    validate_params, ConverterParams, Mode, RawParams, SimMetrics, StateVector, SteadyStateReport,
    ValidationError,
};
pub use scalar::Scalar;

pub type Params = ConverterParams<f64>;
pub type ParamsF32 = ConverterParams<f32>;
pub type State = StateVector<f64>;
pub type Report = SteadyStateReport<f64>;
pub type Metrics = SimMetrics<f64>;
pub type Config = simulator::SimConfig<f64>;
pub type DesignSpec = design::DesignSpec<f64>;
pub type DesignResult = design::DesignResult<f64>;

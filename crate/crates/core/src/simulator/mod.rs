//! Event-driven time-domain simulation of the five-mode conduction cycle.
//!
//! Switch and diodes are ideal; the coupled inductor is modelled as a
//! magnetizing inductance with series leakage (see [`circuit`]). Each mode is
//! an affine ODE integrated with fixed-step RK4. Diode commutations are
//! located by bisection, gate edges fall exactly on `D·T` and `T`.

pub mod circuit;
pub mod integrate;
pub mod metrics;

use serde::Serialize;
use thiserror::Error;

pub use circuit::{
    guards, mode_system, next_conduction, transition_events, AffineSystem, Branches, Circuit,
    Device, Guard, Target, Transition,
};
pub use integrate::{
    integrate_mode, integrate_period, is_cycle_step, rk4_step, Event, Sample, Trace,
};
pub use metrics::{compare_with_report, extract_metrics, CompareRow};

use crate::analytics::{cap_voltages, inductor_ripples};
use crate::model::{Conduction, ConverterParams, SimMetrics, StateVector, STATE_DIM};
use crate::scalar::Scalar;
use integrate::Stepper;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SimConfig<T> {
    pub steps_per_period: usize,
    pub max_periods: usize,
    /// Largest accepted relative change of the period-boundary state.
    pub convergence_tol: T,
    /// Event localization tolerance as a fraction of the period.
    pub event_tol: T,
    /// Start from the closed-form operating point instead of all-zero state.
    pub warm_start: bool,
}

impl<T: Scalar> Default for SimConfig<T> {
    fn default() -> Self {
        SimConfig {
            steps_per_period: 4000,
            max_periods: 20000,
            convergence_tol: T::lit(1e-6),
            event_tol: T::lit(1e-9),
            warm_start: false,
        }
    }
}

pub const MIN_STEPS_PER_PERIOD: usize = 200;

impl<T: Scalar> SimConfig<T> {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |what: &str| Err(SimError::Config(what.to_string()));
        if self.steps_per_period < MIN_STEPS_PER_PERIOD {
            return bad("steps_per_period must be at least 200");
        }
        if self.max_periods == 0 {
            return bad("max_periods must be positive");
        }
        if !(self.convergence_tol > T::zero()) {
            return bad("convergence_tol must be positive");
        }
        if !(self.event_tol > T::zero() && self.event_tol < T::one()) {
            return bad("event_tol must lie in (0,1)");
        }
        Ok(())
    }
}

/// Where and why the converter left the five-mode cycle.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DcmReport {
    pub period: usize,
    pub time: f64,
    /// Offending conduction pattern.
    pub mode: Conduction,
    pub guard: Guard,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("simulation needs a non-zero leakage inductance")]
    ZeroLeakage,
    #[error("numerical blow-up in period {period} at t = {time:e} s ({mode})")]
    Blowup {
        period: usize,
        time: f64,
        mode: Conduction,
    },
    #[error("chattering: {transitions} mode transitions in period {period}")]
    Chattering { period: usize, transitions: usize },
    #[error("left continuous conduction in period {}: {}", .0.period, .0.reason)]
    Dcm(DcmReport),
    #[error("no periodic steady state after {periods} periods (residual {residual:e})")]
    NotConverged { periods: usize, residual: f64 },
}

/// Result of a steady-state search.
#[derive(Clone, Debug)]
pub enum SteadyState<T> {
    Ccm {
        trace: Trace<T>,
        metrics: SimMetrics<T>,
        periods: usize,
        residual: T,
    },
    Dcm(DcmReport),
}

impl<T> SteadyState<T> {
    pub fn is_ccm(&self) -> bool {
        matches!(self, SteadyState::Ccm { .. })
    }
}

/// Closed-form estimate of the state at gate turn-on.
///
/// Capacitors sit at their volt-second-balance values. Average currents follow
/// from charge balance: `Lm` and the primary carry `I_o` on average and L1
/// carries `I_o (M + 1)`; both start the period at their minimum. The primary
/// current satisfies the M5 constraint so the period starts consistently.
pub fn analytic_initial_state<T: Scalar>(p: &ConverterParams<T>) -> StateVector<T> {
    let caps = cap_voltages(p);
    let ripples = inductor_ripples(p);
    let two = T::two();
    let i_o = p.output_current();
    let i1 = i_o * (p.ideal_gain() + T::one()) - ripples.di_l1 / two;
    let im = i_o - ripples.di_lm / two;
    let ik = (im - p.n * i1) / (p.n + T::one());
    StateVector {
        t: T::zero(),
        i_l1: i1,
        i_lk: ik,
        i_lm: im,
        v_c1: caps.v_c1,
        v_c2: caps.v_c2,
        v_c3: caps.v_c3,
        v_c4: caps.v_c4,
    }
}

/// Component-wise change between two period-boundary states. Each component
/// is scaled by its own magnitude, floored at 1% of the largest state of the
/// same kind (current or voltage).
pub fn period_residual<T: Scalar>(a: &StateVector<T>, b: &StateVector<T>) -> T {
    let xa = a.to_array();
    let xb = b.to_array();
    let kind_scale = |r: std::ops::Range<usize>| {
        r.map(|i| xb[i].abs())
            .fold(T::zero(), T::max)
            .max(T::min_positive_value())
    };
    let i_scale = kind_scale(0..3);
    let v_scale = kind_scale(3..STATE_DIM);
    let floor = T::lit(0.01);
    (0..STATE_DIM)
        .map(|i| {
            let s = if i < 3 { i_scale } else { v_scale };
            (xb[i] - xa[i]).abs() / xb[i].abs().max(floor * s)
        })
        .fold(T::zero(), T::max)
}

/// Repeats periods until the period-boundary state stops changing, then
/// records one more period and extracts its metrics.
///
/// The converter may pass through any conduction pattern while it settles.
/// A converged period in which the magnetizing current runs out of a
/// conduction path is reported as [`SteadyState::Dcm`], a result rather than
/// an error. Other departures from the ideal five-mode sequence, such as the
/// secondary diodes ceasing to conduct before turn-off when the leakage
/// resonance is faster than `D·T`, are kept in the trace
/// ([`Trace::follows_cycle`], [`Trace::cycle_violation`]).
pub fn run_to_steady_state<T: Scalar>(
    p: &ConverterParams<T>,
    cfg: &SimConfig<T>,
) -> Result<SteadyState<T>, SimError> {
    let mut stepper = Stepper::new(p, cfg)?;
    let mut x = if cfg.warm_start {
        analytic_initial_state(p)
    } else {
        StateVector::zero()
    };
    let mut quiet = 0;
    let mut residual = T::infinity();
    for k in 0..cfg.max_periods {
        let run = match stepper.run_period(k, &x, false) {
            Err(SimError::Dcm(r)) => return Ok(SteadyState::Dcm(r)),
            other => other?,
        };
        residual = period_residual(&x, &run.x_end);
        x = run.x_end;
        quiet = if residual < cfg.convergence_tol {
            quiet + 1
        } else {
            0
        };
        if quiet >= 2 {
            let last = match stepper.run_period(k + 1, &x, true) {
                Err(SimError::Dcm(r)) => return Ok(SteadyState::Dcm(r)),
                other => other?,
            };
            let trace = last.trace.expect("recorded");
            if let Some((mode, t)) = trace.magnetizing_gap() {
                let seq: Vec<String> = trace
                    .mode_sequence()
                    .iter()
                    .map(|c| c.to_string())
                    .collect();
                let guard = trace
                    .events
                    .iter()
                    .find(|e| e.to == mode && (e.t - t).abs() <= trace.period * T::lit(1e-9))
                    .map_or(Guard::CurrentZero(Device::D2), |e| e.guard);
                return Ok(SteadyState::Dcm(DcmReport {
                    period: k + 1,
                    time: t.as_f64(),
                    mode,
                    guard,
                    reason: format!(
                        "magnetizing current loses its path in {mode} (sequence {})",
                        seq.join(",")
                    ),
                }));
            }
            let metrics = extract_metrics(&trace, p);
            return Ok(SteadyState::Ccm {
                trace,
                metrics,
                periods: k + 2,
                residual,
            });
        }
    }
    Err(SimError::NotConverged {
        periods: cfg.max_periods,
        residual: residual.as_f64(),
    })
}

/// Runs exactly `periods` periods without a convergence test and returns the
/// last one. Intended for inspecting start-up behaviour.
pub fn simulate_periods<T: Scalar>(
    p: &ConverterParams<T>,
    cfg: &SimConfig<T>,
    periods: usize,
) -> Result<(Trace<T>, SimMetrics<T>), SimError> {
    let mut stepper = Stepper::new(p, cfg)?;
    let mut x = if cfg.warm_start {
        analytic_initial_state(p)
    } else {
        StateVector::zero()
    };
    let periods = periods.max(1);
    for k in 0..periods - 1 {
        x = stepper.run_period(k, &x, false)?.x_end;
    }
    let trace = stepper
        .run_period(periods - 1, &x, true)?
        .trace
        .expect("recorded");
    let metrics = extract_metrics(&trace, p);
    Ok((trace, metrics))
}

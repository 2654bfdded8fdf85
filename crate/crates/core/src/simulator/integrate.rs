//! Fixed-step RK4 integration of the mode sequence over PWM periods, with
//! bisection localization of diode commutation events.

use serde::Serialize;

use super::circuit::{guards, next_conduction, AffineSystem, Circuit, Device, Guard};
use super::{DcmReport, SimConfig, SimError};
use crate::model::{Conduction, ConverterParams, Mode, StateVector, STATE_DIM};
use crate::scalar::Scalar;

/// More transitions than this within one period is reported as chattering.
pub const MAX_TRANSITIONS_PER_PERIOD: usize = 50;

type State<T> = [T; STATE_DIM];

/// One classical fourth-order Runge–Kutta step of an affine system.
#[inline]
pub fn rk4_step<T: Scalar>(sys: &AffineSystem<T>, x: &State<T>, h: T) -> State<T> {
    let two = T::two();
    let half = h / two;
    let k1 = sys.apply(x);
    let k2 = sys.apply(&axpy(x, half, &k1));
    let k3 = sys.apply(&axpy(x, half, &k2));
    let k4 = sys.apply(&axpy(x, h, &k3));
    let sixth = h / T::lit(6.0);
    let mut out = *x;
    for i in 0..STATE_DIM {
        out[i] = x[i] + sixth * (k1[i] + two * (k2[i] + k3[i]) + k4[i]);
    }
    out
}

#[inline]
fn axpy<T: Scalar>(x: &State<T>, a: T, y: &State<T>) -> State<T> {
    let mut out = *x;
    for i in 0..STATE_DIM {
        out[i] = x[i] + a * y[i];
    }
    out
}

/// Integrates a single mode for `duration` in `steps` equal steps.
pub fn integrate_mode<T: Scalar>(
    sys: &AffineSystem<T>,
    x0: &State<T>,
    duration: T,
    steps: usize,
) -> State<T> {
    let h = duration / T::from_usize(steps).expect("step count");
    (0..steps).fold(*x0, |x, _| rk4_step(sys, &x, h))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Sample<T> {
    pub mode: Conduction,
    pub state: StateVector<T>,
}

/// A change of conduction pattern at an exact (localized) time. Chains of
/// zero-duration patterns taken at the same instant are merged; `guard` is
/// the one that started the chain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Event<T> {
    pub t: T,
    pub from: Conduction,
    pub to: Conduction,
    pub guard: Guard,
    /// True for the regular cycle steps and the M4→M1 skip.
    pub in_cycle: bool,
}

/// Regular step of the cycle. Gate turn-on while D1 still conducts skips M5
/// without leaving continuous conduction.
pub fn is_cycle_step(from: Conduction, to: Conduction) -> bool {
    match (from.mode(), to.mode()) {
        (Some(a), Some(b)) => b == a.next() || (a == Mode::M4 && b == Mode::M1),
        _ => false,
    }
}

/// Samples over one period. Every event contributes two samples at the same
/// instant: the last one of the old mode and the first one of the new mode.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Trace<T> {
    pub t0: T,
    pub period: T,
    pub samples: Vec<Sample<T>>,
    pub events: Vec<Event<T>>,
}

impl<T: Scalar> Trace<T> {
    /// Visited modes in order with the time spent in each. Zero-duration
    /// visits are kept; the wrap-around to the next period is not.
    pub fn mode_visits(&self) -> Vec<(Conduction, T)> {
        let Some(first) = self.samples.first() else {
            return Vec::new();
        };
        let end = self.t0 + self.period;
        let mut visits = Vec::new();
        let mut current = first.mode;
        let mut since = self.t0;
        for ev in &self.events {
            if ev.t >= end {
                break;
            }
            visits.push((current, ev.t - since));
            current = ev.to;
            since = ev.t;
        }
        visits.push((current, end - since));
        visits
    }

    /// Patterns with a non-zero stay, in order.
    pub fn mode_sequence(&self) -> Vec<Conduction> {
        self.mode_visits()
            .into_iter()
            .filter(|(_, d)| *d > T::zero())
            .map(|(m, _)| m)
            .collect()
    }

    /// Modes of the cycle that were never occupied for a measurable time.
    pub fn missing_modes(&self) -> Vec<Mode> {
        let seq = self.mode_sequence();
        Mode::ALL
            .into_iter()
            .filter(|m| !seq.contains(&m.conduction()))
            .collect()
    }

    /// First occupied pattern that breaks continuous conduction: one outside
    /// the five modes, or a mode entered out of cycle order.
    pub fn cycle_violation(&self) -> Option<(Conduction, T)> {
        let visits = self.mode_visits();
        let mut t = self.t0;
        let mut prev: Option<Mode> = None;
        for (c, d) in visits {
            if d > T::zero() {
                match c.mode() {
                    None => return Some((c, t)),
                    Some(m) => {
                        if prev.is_some_and(|p| m.index() <= p.index()) {
                            return Some((c, t));
                        }
                        prev = Some(m);
                    }
                }
            }
            t = t + d;
        }
        None
    }

    /// First occupied pattern in which the magnetizing current has lost its
    /// path: S and D1 both off and D2 not conducting. This is the
    /// discontinuity that ends continuous conduction.
    pub fn magnetizing_gap(&self) -> Option<(Conduction, T)> {
        let mut t = self.t0;
        for (c, d) in self.mode_visits() {
            if d > T::zero() && !c.s_on && !c.d1_on && !c.d2_on {
                return Some((c, t));
            }
            t = t + d;
        }
        None
    }

    /// True when every occupied pattern is one of the five modes and they
    /// follow the M1→…→M5 order (skips allowed).
    pub fn follows_cycle(&self) -> bool {
        self.cycle_violation().is_none()
    }

    /// Duration fraction of each mode; time spent outside the five modes is
    /// not counted.
    pub fn mode_fractions(&self) -> [T; 5] {
        let mut out = [T::zero(); 5];
        for (c, d) in self.mode_visits() {
            if let Some(m) = c.mode() {
                out[m.index()] = out[m.index()] + d / self.period;
            }
        }
        out
    }
}

/// State at the end of a period together with the mode the converter is in.
#[derive(Clone, Debug)]
pub struct PeriodRun<T> {
    pub x_end: StateVector<T>,
    pub mode_end: Conduction,
    pub trace: Option<Trace<T>>,
}

/// Integrates PWM periods for one parameter set.
pub(crate) struct Stepper<T> {
    circuit: Circuit<T>,
    systems: Vec<AffineSystem<T>>,
    guards: Vec<Vec<Guard>>,
    period: T,
    h: T,
    t_on: T,
    event_tol: T,
    // per-period bookkeeping
    mode: Conduction,
    period_index: usize,
    n_transitions: usize,
}

impl<T: Scalar> Stepper<T> {
    pub(crate) fn new(p: &ConverterParams<T>, cfg: &SimConfig<T>) -> Result<Self, SimError> {
        cfg.validate()?;
        let circuit = Circuit::new(p).ok_or(SimError::ZeroLeakage)?;
        Ok(Self::with_circuit(circuit, cfg))
    }

    pub(crate) fn with_circuit(circuit: Circuit<T>, cfg: &SimConfig<T>) -> Self {
        let p = *circuit.params();
        let period = p.fs.recip();
        let steps = T::from_usize(cfg.steps_per_period).expect("steps");
        Stepper {
            systems: (0..Conduction::COUNT)
                .map(|i| circuit.mode_system(Conduction::from_index(i)))
                .collect(),
            guards: (0..Conduction::COUNT)
                .map(|i| guards(Conduction::from_index(i)))
                .collect(),
            circuit,
            period,
            h: period / steps,
            t_on: p.duty * period,
            event_tol: cfg.event_tol * period,
            mode: Mode::M1.conduction(),
            period_index: 0,
            n_transitions: 0,
        }
    }

    /// Integrates one period starting at gate turn-on. The start mode is M1,
    /// corrected at once if the state says otherwise.
    pub(crate) fn run_period(
        &mut self,
        period_index: usize,
        x0: &StateVector<T>,
        record: bool,
    ) -> Result<PeriodRun<T>, SimError> {
        self.period_index = period_index;
        self.n_transitions = 0;
        self.mode = Mode::M1.conduction();
        let t0 = x0.t;
        let mut run = PeriodState {
            t0,
            x: x0.to_array(),
            trace: record.then(|| Trace {
                t0,
                period: self.period,
                ..Trace::default()
            }),
        };
        run.sample(self.mode, T::zero());
        self.settle(&mut run, T::zero())?;

        let t_on = self.t_on;
        self.segment(&mut run, T::zero(), t_on)?;
        self.fire_gate(&mut run, Guard::GateOff, t_on)?;
        self.segment(&mut run, t_on, self.period)?;
        self.fire_gate(&mut run, Guard::GateOn, self.period)?;

        Ok(PeriodRun {
            x_end: StateVector::from_array(t0 + self.period, run.x),
            mode_end: self.mode,
            trace: run.trace,
        })
    }

    fn segment(&mut self, run: &mut PeriodState<T>, from: T, to: T) -> Result<(), SimError> {
        let mut tau = from;
        while tau < to {
            let remaining = to - tau;
            let (step, last) = if remaining <= self.h {
                (remaining, true)
            } else {
                (self.h, false)
            };
            let sys = &self.systems[self.mode.index()];
            let x_new = rk4_step(sys, &run.x, step);
            if !x_new.iter().all(|v| v.is_finite()) {
                return Err(SimError::Blowup {
                    period: self.period_index,
                    time: (run.t0 + tau).as_f64(),
                    mode: self.mode,
                });
            }
            if self.fired(&x_new).is_some() {
                let dt = self.localize(&run.x, step);
                run.x = rk4_step(sys, &run.x, dt);
                tau = if last && dt == step { to } else { tau + dt };
                run.sample(self.mode, tau);
                // the guard that is negative at the localized point
                let g = self
                    .fired(&run.x)
                    .expect("localized point lies past the crossing");
                self.transition(run, g, tau)?;
            } else {
                run.x = x_new;
                tau = if last { to } else { tau + step };
                run.sample(self.mode, tau);
            }
        }
        Ok(())
    }

    /// Smallest sub-step (to `event_tol`) after which some state guard is negative.
    fn localize(&self, x: &State<T>, step: T) -> T {
        let sys = &self.systems[self.mode.index()];
        let (mut lo, mut hi) = (T::zero(), step);
        while hi - lo > self.event_tol {
            let mid = (lo + hi) / T::two();
            if self.fired(&rk4_step(sys, x, mid)).is_some() {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    /// First state guard of the current pattern that is negative at `x`,
    /// ignoring guards on the devices in `skip`.
    fn fired_except(&self, x: &State<T>, skip: &[Device]) -> Option<Guard> {
        let br = self.circuit.evaluate(self.mode, x);
        self.guards[self.mode.index()]
            .iter()
            .filter(|g| g.device().is_none_or(|d| !skip.contains(&d)))
            .find(|g| matches!(g.value(&br), Some(v) if v < T::zero()))
            .copied()
    }

    fn fired(&self, x: &State<T>) -> Option<Guard> {
        self.fired_except(x, &[])
    }

    /// Fires `g`, then takes zero-duration transitions until the pattern is
    /// consistent with the state, and records the whole chain as one event.
    ///
    /// A diode switched by a guard in the chain sits exactly at zero current
    /// or voltage, so its own guard is left to the next integration step.
    fn transition(&mut self, run: &mut PeriodState<T>, g: Guard, tau: T) -> Result<(), SimError> {
        let from = self.mode;
        let mut switched = Vec::new();
        let mut next = Some(g);
        while let Some(guard) = next {
            self.step_to(run, guard, tau)?;
            switched.extend(guard.device());
            next = self.fired_except(&run.x, &switched);
        }
        if self.mode != from {
            if let Some(trace) = run.trace.as_mut() {
                trace.events.push(Event {
                    t: run.t0 + tau,
                    from,
                    to: self.mode,
                    guard: g,
                    in_cycle: is_cycle_step(from, self.mode),
                });
            }
            run.sample(self.mode, tau);
        }
        Ok(())
    }

    /// Brings the start pattern in line with the state.
    fn settle(&mut self, run: &mut PeriodState<T>, tau: T) -> Result<(), SimError> {
        if let Some(g) = self.fired(&run.x) {
            self.transition(run, g, tau)?;
        }
        Ok(())
    }

    fn fire_gate(&mut self, run: &mut PeriodState<T>, gate: Guard, tau: T) -> Result<(), SimError> {
        if self.guards[self.mode.index()].contains(&gate) {
            self.transition(run, gate, tau)?;
        }
        Ok(())
    }

    fn step_to(&mut self, run: &mut PeriodState<T>, g: Guard, tau: T) -> Result<(), SimError> {
        let to = next_conduction(self.mode, g).map_err(|reason| {
            SimError::Dcm(DcmReport {
                period: self.period_index,
                time: (run.t0 + tau).as_f64(),
                mode: self.mode,
                guard: g,
                reason: reason.to_string(),
            })
        })?;
        self.n_transitions += 1;
        if self.n_transitions > MAX_TRANSITIONS_PER_PERIOD {
            return Err(SimError::Chattering {
                period: self.period_index,
                transitions: self.n_transitions,
            });
        }
        self.mode = to;
        Ok(())
    }
}

struct PeriodState<T> {
    t0: T,
    x: State<T>,
    trace: Option<Trace<T>>,
}

impl<T: Scalar> PeriodState<T> {
    fn sample(&mut self, mode: Conduction, tau: T) {
        if let Some(trace) = self.trace.as_mut() {
            trace.samples.push(Sample {
                mode,
                state: StateVector::from_array(self.t0 + tau, self.x),
            });
        }
    }
}

/// Integrates one PWM period from `x0` (taken to be at gate turn-on) and
/// returns the end state and the recorded trace.
pub fn integrate_period<T: Scalar>(
    p: &ConverterParams<T>,
    cfg: &SimConfig<T>,
    x0: &StateVector<T>,
) -> Result<(StateVector<T>, Trace<T>), SimError> {
    let mut stepper = Stepper::new(p, cfg)?;
    let run = stepper.run_period(0, x0, true)?;
    Ok((run.x_end, run.trace.expect("recorded")))
}

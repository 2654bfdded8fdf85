//! Per-mode equivalent circuits.
//!
//! Node and branch conventions (ground is the source negative):
//!
//! ```text
//!   S   : vin+ → A            L1 : A → gnd           C4 : B(+) – A(−)
//!   D1  : gnd → B             Lk : B → K             Lm : K → P (dot at K)
//!   C1  : P(+) – gnd          D2 : P → X             D3 : X → O
//!   Ns  : X (dot) – Q         C2 : Q(+) – A(−)       C3 : O(+) – Q(−)
//!   load: O → A
//! ```
//!
//! The coupled inductor is an ideal `1:n` transformer in parallel with `Lm`,
//! fed through the series leakage `Lk`. The secondary winding voltage is
//! `v_XQ = n·v_Lm` and the secondary current into the dot is
//! `(i_lm − i_lk)/n`.
//!
//! Device currents follow from the inductor currents and the conduction
//! pattern:
//!
//! | mode | i_S                 | i_D1                | i_D2          | i_D3          |
//! |------|---------------------|---------------------|---------------|---------------|
//! | M1   | i_l1 + i_lk − i_D2  | 0                   | (i_lm−i_lk)/n | 0             |
//! | M2   | i_l1 + i_lk         | 0                   | 0             | (i_lk−i_lm)/n |
//! | M3   | 0                   | i_l1 + i_lk         | 0             | (i_lk−i_lm)/n |
//! | M4   | 0                   | i_l1 + i_lk − i_D2  | (i_lm−i_lk)/n | 0             |
//! | M5   | 0                   | 0                   | (i_lm−i_lk)/n | 0             |
//!
//! Patterns outside the table are handled the same way. When S and D1 both
//! block, the switch node floats and its potential keeps the node current
//! `i_l1 + i_lk − i_D2` at zero. When neither secondary diode conducts, the
//! magnetizing voltage keeps `i_lk = i_lm`.

use serde::Serialize;

use crate::model::{Conduction, ConverterParams, Mode, RawParams, STATE_DIM};
use crate::scalar::Scalar;

/// Semiconductor devices, in the order used by all device-indexed arrays.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Device {
    S,
    D1,
    D2,
    D3,
}

impl Device {
    pub const ALL: [Device; 4] = [Device::S, Device::D1, Device::D2, Device::D3];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Every branch quantity of one mode at one state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Branches<T> {
    /// Switch node potential `V_A`.
    pub v_a: T,
    /// Branch voltages of L1, Lk and Lm.
    pub v_l: [T; 3],
    /// Charging currents of C1..C4.
    pub i_c: [T; 4],
    /// Forward currents of S, D1, D2, D3.
    pub i_dev: [T; 4],
    /// Blocking voltages of S, D1, D2, D3 (zero while conducting).
    pub v_block: [T; 4],
    pub i_o: T,
}

/// `dx/dt = A·x + b` over the seven continuous states.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffineSystem<T> {
    pub a: [[T; STATE_DIM]; STATE_DIM],
    pub b: [T; STATE_DIM],
}

impl<T: Scalar> AffineSystem<T> {
    #[inline]
    pub fn apply(&self, x: &[T; STATE_DIM]) -> [T; STATE_DIM] {
        let mut out = self.b;
        for (row, o) in self.a.iter().zip(out.iter_mut()) {
            let mut acc = *o;
            for (aij, xj) in row.iter().zip(x) {
                acc = acc + *aij * *xj;
            }
            *o = acc;
        }
        out
    }
}

/// Circuit constants for one parameter set.
#[derive(Clone, Copy, Debug)]
pub struct Circuit<T> {
    p: RawParams<T>,
}

impl<T: Scalar> Circuit<T> {
    /// Requires a finite leakage inductance: with `lk = 0` the primary current
    /// is no longer a state and the mode equations degenerate.
    pub fn new(p: &ConverterParams<T>) -> Option<Self> {
        if p.lk > T::zero() {
            Some(Self::from_raw(p.raw()))
        } else {
            None
        }
    }

    pub(crate) fn from_raw(p: RawParams<T>) -> Self {
        Circuit { p }
    }

    pub fn params(&self) -> &RawParams<T> {
        &self.p
    }

    /// Switch node potential `V_A` and magnetizing voltage for pattern `c`.
    ///
    /// Each is either pinned by a conducting device or solved from the
    /// constraint that holds while that side floats; the two conditions are
    /// linear in `(V_A, v_Lm)`.
    fn node_voltages(&self, c: Conduction, x: &[T; STATE_DIM]) -> (T, T) {
        let p = &self.p;
        let one = T::one();
        let zero = T::zero();
        let n = p.n;
        let [_, _, _, v1, v2, v3, v4] = *x;
        let (gk, gm) = (p.lk.recip(), p.lm.recip());
        // a·V_A + b·v_Lm = r
        let (a1, b1, r1) = if c.s_on {
            (one, zero, p.vin)
        } else if c.d1_on {
            (one, zero, -v4)
        } else {
            // d/dt (i_l1 + i_lk − i_D2) = 0
            let delta = if c.d2_on { n.recip() } else { zero };
            let g = (one + delta) * gk;
            (p.l1.recip() + g, -g - delta * gm, -g * (v4 - v1))
        };
        let (a2, b2, r2) = if c.d2_on {
            (n.recip(), one, (v1 - v2) / n)
        } else if c.d3_on {
            (zero, one, v3 / n)
        } else {
            // d/dt (i_lk − i_lm) = 0
            (gk, -(gk + gm), -gk * (v4 - v1))
        };
        if b1 == zero {
            let v_a = r1 / a1;
            return (v_a, (r2 - a2 * v_a) / b2);
        }
        let det = a1 * b2 - b1 * a2;
        ((r1 * b2 - b1 * r2) / det, (a1 * r2 - a2 * r1) / det)
    }

    /// All branch quantities of conduction pattern `c` at state `x`.
    pub fn evaluate(&self, c: impl Into<Conduction>, x: &[T; STATE_DIM]) -> Branches<T> {
        let c = c.into();
        let p = &self.p;
        let zero = T::zero();
        let n = p.n;
        let [i1, ik, im, v1, v2, v3, v4] = *x;
        let i_o = (v2 + v3) / p.rl;

        let (v_a, vm) = self.node_voltages(c, x);
        let v_b = v_a + v4;
        let v_lk = v_b - v1 - vm;

        let i_d2 = if c.d2_on { (im - ik) / n } else { zero };
        let i_d3 = if c.d3_on { (ik - im) / n } else { zero };
        let (i_sw, i_d1, i_c4) = if c.s_on {
            (i1 + ik - i_d2, zero, -ik)
        } else if c.d1_on {
            (zero, i1 + ik - i_d2, i1 - i_d2)
        } else {
            (zero, zero, -ik)
        };

        // potential of the secondary dot end
        let v_x = v_a + v2 + n * vm;
        let v_block = [
            if c.s_on { zero } else { p.vin - v_a },
            if c.d1_on { zero } else { v_b },
            if c.d2_on { zero } else { v_x - v1 },
            if c.d3_on { zero } else { v_a + v2 + v3 - v_x },
        ];

        Branches {
            v_a,
            v_l: [v_a, v_lk, vm],
            i_c: [ik - i_d2, i_d2 - i_o, i_d3 - i_o, i_c4],
            i_dev: [i_sw, i_d1, i_d2, i_d3],
            v_block,
            i_o,
        }
    }

    /// State derivative from the branch quantities.
    pub fn derivative(&self, c: impl Into<Conduction>, x: &[T; STATE_DIM]) -> [T; STATE_DIM] {
        let br = self.evaluate(c, x);
        let p = &self.p;
        [
            br.v_l[0] / p.l1,
            br.v_l[1] / p.lk,
            br.v_l[2] / p.lm,
            br.i_c[0] / p.c1,
            br.i_c[1] / p.c2,
            br.i_c[2] / p.c3,
            br.i_c[3] / p.c4,
        ]
    }

    /// Affine state equation of pattern `c`. Every branch quantity is affine
    /// in the state, so `b = f(0)` and column `j` of `A` is `f(e_j) − f(0)`.
    pub fn mode_system(&self, c: impl Into<Conduction>) -> AffineSystem<T> {
        let m = c.into();
        let zero = [T::zero(); STATE_DIM];
        let b = self.derivative(m, &zero);
        let mut a = [[T::zero(); STATE_DIM]; STATE_DIM];
        for j in 0..STATE_DIM {
            let mut e = zero;
            e[j] = T::one();
            let col = self.derivative(m, &e);
            for i in 0..STATE_DIM {
                a[i][j] = col[i] - b[i];
            }
        }
        AffineSystem { a, b }
    }
}

/// Affine state equation of mode `m` for parameter set `p`.
///
/// Returns `None` when `p.lk = 0` (see [`Circuit::new`]).
pub fn mode_system<T: Scalar>(m: Mode, p: &ConverterParams<T>) -> Option<AffineSystem<T>> {
    Circuit::new(p).map(|c| c.mode_system(m))
}

/// Condition that ends a mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Guard {
    /// PWM turn-off at `D·T`.
    GateOff,
    /// PWM turn-on at the period boundary.
    GateOn,
    /// Forward current of a conducting device falls through zero.
    CurrentZero(Device),
    /// Blocking voltage of an off device falls through zero.
    ForwardBias(Device),
}

impl Guard {
    /// Device a state guard watches; `None` for the gate edges.
    pub fn device(&self) -> Option<Device> {
        match *self {
            Guard::GateOff | Guard::GateOn => None,
            Guard::CurrentZero(d) | Guard::ForwardBias(d) => Some(d),
        }
    }

    /// Signed guard value, positive while the mode is consistent. `None` for
    /// the clock-driven guards.
    pub fn value<T: Scalar>(&self, br: &Branches<T>) -> Option<T> {
        match *self {
            Guard::GateOff | Guard::GateOn => None,
            Guard::CurrentZero(d) => Some(br.i_dev[d.index()]),
            Guard::ForwardBias(d) => Some(br.v_block[d.index()]),
        }
    }
}

/// Where a fired guard leads, as listed by [`transition_events`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Target {
    /// The next mode of the regular cycle.
    Cycle(Mode),
    /// One of the five modes, reached out of cycle order.
    OutOfCycle(Mode),
    /// A pattern outside the five-mode table. Allowed while the converter
    /// settles; a steady state that visits one is not continuous conduction.
    Outside(Conduction),
    /// No pattern of the ideal circuit fits.
    Rejected(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Transition {
    pub guard: Guard,
    pub target: Target,
}

/// Guards that can end pattern `c`. The gate edge is always present.
pub fn guards(c: Conduction) -> Vec<Guard> {
    use Device::*;
    let mut out = vec![if c.s_on {
        Guard::GateOff
    } else {
        Guard::GateOn
    }];
    if c.d1_on {
        out.push(Guard::CurrentZero(D1));
    } else if !c.s_on {
        out.push(Guard::ForwardBias(D1));
    }
    for (on, d) in [(c.d2_on, D2), (c.d3_on, D3)] {
        out.push(if on {
            Guard::CurrentZero(d)
        } else {
            Guard::ForwardBias(d)
        });
    }
    out
}

/// Pattern right after guard `g` fires in pattern `c`.
///
/// A device whose current reaches zero turns off; which secondary diode
/// takes over, if any, is left to the forward-bias guards of the new pattern.
/// At gate turn-off D1 is assumed to pick up the inductor current.
pub fn next_conduction(c: Conduction, g: Guard) -> Result<Conduction, &'static str> {
    let mut n = c;
    match g {
        Guard::GateOff => {
            n.s_on = false;
            n.d1_on = true;
        }
        Guard::GateOn => {
            n.s_on = true;
            n.d1_on = false;
        }
        Guard::CurrentZero(d) => match d {
            Device::S => n.s_on = false,
            Device::D1 => n.d1_on = false,
            Device::D2 => n.d2_on = false,
            Device::D3 => n.d3_on = false,
        },
        Guard::ForwardBias(d) => match d {
            Device::S => return Err("switch forward biased while gated off"),
            Device::D1 => n.d1_on = true,
            Device::D2 | Device::D3 if c.d2_on || c.d3_on => {
                return Err("D2 and D3 both forward biased")
            }
            Device::D2 => n.d2_on = true,
            Device::D3 => n.d3_on = true,
        },
    }
    Ok(n)
}

/// Guards of mode `m` with their targets, regular transition first.
///
/// When a secondary diode current reaches zero the listed target assumes
/// the other diode takes over if that is the regular cycle step; the
/// simulator decides from the winding voltage at the event.
pub fn transition_events(m: Mode) -> Vec<Transition> {
    let c = m.conduction();
    let mut out: Vec<Transition> = guards(c)
        .into_iter()
        .map(|guard| {
            let target = match next_conduction(c, guard) {
                Err(why) => Target::Rejected(why),
                Ok(mut r) => {
                    if let Guard::CurrentZero(Device::D2 | Device::D3) = guard {
                        let swapped = Conduction {
                            d2_on: c.d3_on,
                            d3_on: c.d2_on,
                            ..r
                        };
                        if swapped.mode() == Some(m.next()) {
                            r = swapped;
                        }
                    }
                    match r.mode() {
                        Some(to) if to == m.next() => Target::Cycle(to),
                        Some(to) => Target::OutOfCycle(to),
                        None => Target::Outside(r),
                    }
                }
            };
            Transition { guard, target }
        })
        .collect();
    out.sort_by_key(|t| !matches!(t.target, Target::Cycle(_)));
    out
}

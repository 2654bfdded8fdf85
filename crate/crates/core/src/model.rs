//! Parameter, state and result types shared by the analytics, the simulator
//! and the sizing procedure.
//!
//! Everything is stored in SI base units (V, A, H, F, Ω, Hz, s).

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Deref;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

/// Names of the parameter fields, in canonical order.
pub const PARAM_FIELDS: [&str; 12] = [
    "vin", "duty", "n", "l1", "lm", "lk", "c1", "c2", "c3", "c4", "rl", "fs",
];

/// Default load resistance. 240 Ω draws 1 A at the 240 V nominal output.
pub const DEFAULT_RL: f64 = 240.0;

/// Unvalidated electrical parameter set, as read from a file or built by hand.
///
/// `n` is the secondary-to-primary voltage ratio of the coupled inductor,
/// i.e. the secondary winding voltage is `n` times the magnetizing voltage.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawParams<T> {
    pub vin: T,
    pub duty: T,
    pub n: T,
    pub l1: T,
    pub lm: T,
    pub lk: T,
    pub c1: T,
    pub c2: T,
    pub c3: T,
    pub c4: T,
    pub rl: T,
    pub fs: T,
}

impl<T: Scalar> RawParams<T> {
    /// Component values of the reference 30 V → 240 V design point
    /// (D = 0.6, n = 2, 40 kHz) with the default 240 Ω load.
    pub fn reference() -> Self {
        RawParams {
            vin: T::lit(30.0),
            duty: T::lit(0.6),
            n: T::lit(2.0),
            l1: T::lit(47e-6),
            lm: T::lit(300e-6),
            lk: T::lit(1e-6),
            c1: T::lit(47e-6),
            c2: T::lit(3.3e-6),
            c3: T::lit(3.3e-6),
            c4: T::lit(47e-6),
            rl: T::lit(DEFAULT_RL),
            fs: T::lit(40e3),
        }
    }

    fn get(&self, field: &str) -> T {
        match field {
            "vin" => self.vin,
            "duty" => self.duty,
            "n" => self.n,
            "l1" => self.l1,
            "lm" => self.lm,
            "lk" => self.lk,
            "c1" => self.c1,
            "c2" => self.c2,
            "c3" => self.c3,
            "c4" => self.c4,
            "rl" => self.rl,
            "fs" => self.fs,
            _ => unreachable!("unknown parameter field {field}"),
        }
    }

    /// Checks every bound and returns all violations at once.
    pub fn validate(self) -> Result<ConverterParams<T>, ValidationError> {
        let mut violations = Vec::new();
        for field in PARAM_FIELDS {
            let value = self.get(field);
            let bound = bound_of(field);
            if !bound.admits(value) {
                violations.push(Violation::OutOfRange {
                    field: field.to_string(),
                    value: value.as_f64(),
                    bound,
                });
            }
        }
        if violations.is_empty() {
            Ok(ConverterParams(self))
        } else {
            Err(ValidationError { violations })
        }
    }
}

/// Admissible range of a parameter field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Bound {
    /// `(0, ∞)`
    Positive,
    /// `[0, ∞)`
    NonNegative,
    /// `(0, 1)`
    UnitOpen,
}

impl Bound {
    fn admits<T: Scalar>(self, v: T) -> bool {
        if !v.is_finite() {
            return false;
        }
        match self {
            Bound::Positive => v > T::zero(),
            Bound::NonNegative => v >= T::zero(),
            Bound::UnitOpen => v > T::zero() && v < T::one(),
        }
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Bound::Positive => "(0,inf)",
            Bound::NonNegative => "[0,inf)",
            Bound::UnitOpen => "(0,1)",
        })
    }
}

fn bound_of(field: &str) -> Bound {
    match field {
        "duty" => Bound::UnitOpen,
        "lk" => Bound::NonNegative,
        _ => Bound::Positive,
    }
}

/// One rejected input field.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Violation {
    Missing {
        field: String,
    },
    Unknown {
        field: String,
    },
    OutOfRange {
        field: String,
        value: f64,
        bound: Bound,
    },
}

impl Violation {
    pub fn field(&self) -> &str {
        match self {
            Violation::Missing { field }
            | Violation::Unknown { field }
            | Violation::OutOfRange { field, .. } => field,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Missing { field } => write!(f, "{field} missing"),
            Violation::Unknown { field } => write!(f, "{field} is not a parameter"),
            Violation::OutOfRange {
                field,
                value,
                bound,
            } => {
                write!(f, "{field} out of {bound} (got {value})")
            }
        }
    }
}

/// Every violation found while validating a parameter set.
#[derive(Clone, Debug, PartialEq, Error, Serialize)]
pub struct ValidationError {
    pub violations: Vec<Violation>,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msgs: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        f.write_str(&msgs.join("; "))
    }
}

/// Builds a validated parameter set from a field map.
///
/// Missing, unknown and out-of-range fields are all reported together.
pub fn validate_params<T: Scalar>(
    raw: &BTreeMap<String, T>,
) -> Result<ConverterParams<T>, ValidationError> {
    let mut violations = Vec::new();
    for key in raw.keys() {
        if !PARAM_FIELDS.contains(&key.as_str()) {
            violations.push(Violation::Unknown { field: key.clone() });
        }
    }
    let mut values = [T::zero(); 12];
    for (slot, field) in values.iter_mut().zip(PARAM_FIELDS) {
        match raw.get(field) {
            Some(v) => *slot = *v,
            None => violations.push(Violation::Missing {
                field: field.to_string(),
            }),
        }
    }
    let [vin, duty, n, l1, lm, lk, c1, c2, c3, c4, rl, fs] = values;
    let candidate = RawParams {
        vin,
        duty,
        n,
        l1,
        lm,
        lk,
        c1,
        c2,
        c3,
        c4,
        rl,
        fs,
    };
    if !violations.is_empty() {
        // still report range problems on the fields that were present
        if let Err(e) = candidate.validate() {
            violations.extend(
                e.violations
                    .into_iter()
                    .filter(|v| raw.contains_key(v.field())),
            );
        }
        return Err(ValidationError { violations });
    }
    candidate.validate()
}

/// A validated parameter set. Fields are read through `Deref` to [`RawParams`];
/// changes go through [`ConverterParams::modify`], which re-validates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ConverterParams<T>(RawParams<T>);

impl<T> Deref for ConverterParams<T> {
    type Target = RawParams<T>;

    fn deref(&self) -> &RawParams<T> {
        &self.0
    }
}

impl<T: Scalar> ConverterParams<T> {
    pub fn new(raw: RawParams<T>) -> Result<Self, ValidationError> {
        raw.validate()
    }

    pub fn reference() -> Self {
        RawParams::reference()
            .validate()
            .expect("reference parameters are valid")
    }

    pub fn raw(&self) -> RawParams<T> {
        self.0
    }

    /// Returns a copy with `edit` applied, validated again.
    pub fn modify(&self, edit: impl FnOnce(&mut RawParams<T>)) -> Result<Self, ValidationError> {
        let mut raw = self.0;
        edit(&mut raw);
        raw.validate()
    }

    /// Switching period `T = 1/fs`.
    pub fn period(&self) -> T {
        self.fs.recip()
    }

    /// Coupling coefficient `k = Lm / (Lm + Lk)`, in `(0, 1]`.
    pub fn coupling(&self) -> T {
        self.lm / (self.lm + self.lk)
    }

    /// Ideal voltage gain `(n + 2D) / (1 − D)`.
    pub fn ideal_gain(&self) -> T {
        (self.n + T::two() * self.duty) / (T::one() - self.duty)
    }

    /// Ideal output voltage.
    pub fn ideal_output_voltage(&self) -> T {
        self.ideal_gain() * self.vin
    }

    /// Load current at the ideal output voltage, `I_o = V_o / R_L`.
    pub fn output_current(&self) -> T {
        self.ideal_output_voltage() / self.rl
    }
}

/// The five conduction configurations of the continuous-conduction cycle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mode {
    M1,
    M2,
    M3,
    M4,
    M5,
}

/// On/off state of the switch and the three diodes.
///
/// Every pattern the ideal circuit can take is representable; the five
/// [`Mode`]s are the ones that make up continuous conduction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Conduction {
    pub s_on: bool,
    pub d1_on: bool,
    pub d2_on: bool,
    pub d3_on: bool,
}

impl Conduction {
    /// Number of distinct patterns, for pattern-indexed tables.
    pub const COUNT: usize = 16;

    /// Bit-packed index in `0..COUNT`.
    pub fn index(self) -> usize {
        (self.s_on as usize) << 3
            | (self.d1_on as usize) << 2
            | (self.d2_on as usize) << 1
            | self.d3_on as usize
    }

    pub fn from_index(i: usize) -> Conduction {
        Conduction {
            s_on: i & 8 != 0,
            d1_on: i & 4 != 0,
            d2_on: i & 2 != 0,
            d3_on: i & 1 != 0,
        }
    }

    /// The cycle mode with this pattern, if any.
    pub fn mode(self) -> Option<Mode> {
        Mode::ALL.into_iter().find(|m| m.conduction() == self)
    }

    /// Mode number for trace files, 0 for patterns outside the cycle.
    pub fn number(self) -> u8 {
        self.mode().map_or(0, Mode::number)
    }
}

impl From<Mode> for Conduction {
    fn from(m: Mode) -> Self {
        m.conduction()
    }
}

impl fmt::Display for Conduction {
    /// `M1`..`M5`, otherwise the conducting devices, e.g. `{S}` or `{D1,D3}`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(m) = self.mode() {
            return write!(f, "{m}");
        }
        let on: Vec<&str> = [
            (self.s_on, "S"),
            (self.d1_on, "D1"),
            (self.d2_on, "D2"),
            (self.d3_on, "D3"),
        ]
        .into_iter()
        .filter_map(|(on, name)| on.then_some(name))
        .collect();
        write!(f, "{{{}}}", on.join(","))
    }
}

impl Serialize for Conduction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl Mode {
    pub const ALL: [Mode; 5] = [Mode::M1, Mode::M2, Mode::M3, Mode::M4, Mode::M5];

    pub fn conduction(self) -> Conduction {
        let (s_on, d1_on, d2_on, d3_on) = match self {
            Mode::M1 => (true, false, true, false),
            Mode::M2 => (true, false, false, true),
            Mode::M3 => (false, true, false, true),
            Mode::M4 => (false, true, true, false),
            Mode::M5 => (false, false, true, false),
        };
        Conduction {
            s_on,
            d1_on,
            d2_on,
            d3_on,
        }
    }

    /// Successor in the cycle M1→M2→M3→M4→M5→M1.
    pub fn next(self) -> Mode {
        match self {
            Mode::M1 => Mode::M2,
            Mode::M2 => Mode::M3,
            Mode::M3 => Mode::M4,
            Mode::M4 => Mode::M5,
            Mode::M5 => Mode::M1,
        }
    }

    /// Zero-based position in the cycle.
    pub fn index(self) -> usize {
        self as usize
    }

    /// Number printed in trace files (1..=5).
    pub fn number(self) -> u8 {
        self.index() as u8 + 1
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "M{}", self.number())
    }
}

/// Number of continuous states (three inductor currents, four capacitor voltages).
pub const STATE_DIM: usize = 7;

/// Continuous state of the converter at time `t`.
///
/// `i_lk` is the primary winding current flowing through the leakage
/// inductance; `i_lm` is the magnetizing current. Capacitor voltages use the
/// polarity that makes them positive in normal operation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StateVector<T> {
    pub t: T,
    pub i_l1: T,
    pub i_lk: T,
    pub i_lm: T,
    pub v_c1: T,
    pub v_c2: T,
    pub v_c3: T,
    pub v_c4: T,
}

impl<T: Scalar> StateVector<T> {
    pub fn zero() -> Self {
        Self::from_array(T::zero(), [T::zero(); STATE_DIM])
    }

    pub fn from_array(t: T, x: [T; STATE_DIM]) -> Self {
        StateVector {
            t,
            i_l1: x[0],
            i_lk: x[1],
            i_lm: x[2],
            v_c1: x[3],
            v_c2: x[4],
            v_c3: x[5],
            v_c4: x[6],
        }
    }

    pub fn to_array(&self) -> [T; STATE_DIM] {
        [
            self.i_l1, self.i_lk, self.i_lm, self.v_c1, self.v_c2, self.v_c3, self.v_c4,
        ]
    }

    /// Output voltage across the C2–C3 stack.
    pub fn v_o(&self) -> T {
        self.v_c2 + self.v_c3
    }

    /// Load current `v_o / R_L`.
    pub fn i_o(&self, rl: T) -> T {
        self.v_o() / rl
    }

    /// Current drawn by the ideal transformer primary, divided by `n`.
    pub fn i_s(&self, n: T) -> T {
        (self.i_lk - self.i_lm) / n
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Every closed-form steady-state quantity for one parameter set.
///
/// Stresses are magnitudes; the devices block them in the reverse direction.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SteadyStateReport<T> {
    pub v_c1: T,
    pub v_c2: T,
    pub v_c3: T,
    pub v_c4: T,
    pub v_o: T,
    pub m: T,
    pub i_o: T,
    pub v_s_stress: T,
    pub v_d1_stress: T,
    pub v_d2_stress: T,
    pub v_d3_stress: T,
    pub stress_polarity: &'static str,
    pub i_lm_avg: T,
    pub di_l1: T,
    pub di_lm: T,
    pub i_d1_peak: T,
    pub i_d2_peak: T,
    pub i_d3_peak: T,
    pub i_s_peak: T,
    pub d34: T,
    pub lm_min: Option<T>,
    pub ccm: Option<bool>,
    pub v_ppc: Option<T>,
    pub c1_min: Option<T>,
    pub c2_min: Option<T>,
    pub c3_min: Option<T>,
    pub c4_min: Option<T>,
    /// Fields whose closed forms are estimates to be checked against simulation.
    pub estimates: Vec<&'static str>,
}

/// Quantities measured over one converged simulated period, named to line up
/// with [`SteadyStateReport`].
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SimMetrics<T> {
    pub v_c1: T,
    pub v_c2: T,
    pub v_c3: T,
    pub v_c4: T,
    pub v_o: T,
    pub i_o: T,
    pub gain: T,
    pub i_l1_avg: T,
    pub i_lk_avg: T,
    pub i_lm_avg: T,
    pub di_l1: T,
    pub di_lm: T,
    /// Peak-to-peak ripple of v_c1..v_c4.
    pub dv_c: [T; 4],
    pub i_s_peak: T,
    pub i_d1_peak: T,
    pub i_d2_peak: T,
    pub i_d3_peak: T,
    /// Averages of the D1, D2, D3 currents.
    pub i_d_avg: [T; 3],
    pub i_s_avg: T,
    /// Averages of the C1..C4 charging currents.
    pub i_c_avg: [T; 4],
    /// Peak absolute C1..C4 currents.
    pub i_c_peak: [T; 4],
    /// Averages of the L1, Lk and Lm branch voltages.
    pub v_l_avg: [T; 3],
    /// Largest blocking voltage seen by S, D1, D2, D3.
    pub v_block_max: [T; 4],
    /// Duration fractions of M1..M5.
    pub mode_fractions: [T; 5],
}

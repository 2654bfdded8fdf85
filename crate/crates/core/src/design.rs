//! Component sizing from requirements, and closed-loop checking of a sizing
//! by simulation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::{
    ccm_min_lm_at, min_capacitances, peak_currents_at, stress_magnitudes, DesignRipple,
    DeviceStresses, MinCapacitances, PeakCurrents,
};
use crate::model::{ConverterParams, RawParams};
use crate::scalar::Scalar;
use crate::simulator::{run_to_steady_state, SimConfig, SteadyState};

/// Largest duty accepted by default.
pub const D_MAX: f64 = 0.9;

/// Coupling used to derive the leakage inductance from the chosen `Lm`
/// (`Lk = Lm/300`, the ratio of the reference design).
pub const DEFAULT_COUPLING: f64 = 300.0 / 301.0;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum DesignError {
    #[error("invalid design spec: {0}")]
    Spec(String),
    #[error("duty {duty} violates {bound}")]
    Duty { duty: f64, bound: String },
    #[error("no feasible turns ratio among the candidates")]
    Infeasible(Vec<Rejected>),
}

/// A turns-ratio candidate that could not be sized.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Rejected {
    pub n: f64,
    pub reason: String,
}

/// Requirements for a design. Exactly one of `rl` and `p_o` sets the load.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    deny_unknown_fields,
    bound(deserialize = "T: Scalar + Deserialize<'de>")
)]
pub struct DesignSpec<T> {
    pub vin: T,
    pub v_o_target: T,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rl: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_o: Option<T>,
    pub fs: T,
    /// Allowed peak-to-peak capacitor ripple.
    pub v_ppc: T,
    /// L1 ripple as a fraction of the average input current.
    #[serde(default = "defaults::ripple_fraction")]
    pub ripple_fraction: T,
    #[serde(default = "defaults::n_candidates")]
    pub n_candidates: Vec<T>,
    #[serde(default = "defaults::d_max")]
    pub d_max: T,
    /// Factor applied to the CCM bound on `Lm`.
    #[serde(default = "defaults::two")]
    pub lm_margin: T,
    /// Factor applied to every capacitor minimum.
    #[serde(default = "defaults::two")]
    pub c_margin: T,
    /// `Lm/(Lm+Lk)` of the coupled inductor to build.
    #[serde(default = "defaults::coupling")]
    pub coupling: T,
}

mod defaults {
    use crate::scalar::Scalar;

    pub fn ripple_fraction<T: Scalar>() -> T {
        T::lit(0.4)
    }
    pub fn n_candidates<T: Scalar>() -> Vec<T> {
        vec![T::one(), T::two(), T::lit(3.0)]
    }
    pub fn d_max<T: Scalar>() -> T {
        T::lit(super::D_MAX)
    }
    pub fn two<T: Scalar>() -> T {
        T::two()
    }
    pub fn coupling<T: Scalar>() -> T {
        T::lit(super::DEFAULT_COUPLING)
    }
}

impl<T: Scalar> DesignSpec<T> {
    /// Spec with default policy values and a resistive load.
    pub fn new(vin: T, v_o_target: T, rl: T, fs: T, v_ppc: T) -> Self {
        DesignSpec {
            vin,
            v_o_target,
            rl: Some(rl),
            p_o: None,
            fs,
            v_ppc,
            ripple_fraction: defaults::ripple_fraction(),
            n_candidates: defaults::n_candidates(),
            d_max: defaults::d_max(),
            lm_margin: T::two(),
            c_margin: T::two(),
            coupling: defaults::coupling(),
        }
    }

    pub fn validate(&self) -> Result<(), DesignError> {
        let mut bad = Vec::new();
        let positive = |name: &str, v: T, bad: &mut Vec<String>| {
            if !(v > T::zero() && v.is_finite()) {
                bad.push(format!("{name} must be positive (got {v})"));
            }
        };
        positive("vin", self.vin, &mut bad);
        positive("v_o_target", self.v_o_target, &mut bad);
        positive("fs", self.fs, &mut bad);
        positive("v_ppc", self.v_ppc, &mut bad);
        positive("ripple_fraction", self.ripple_fraction, &mut bad);
        match (self.rl, self.p_o) {
            (Some(rl), None) => positive("rl", rl, &mut bad),
            (None, Some(p)) => positive("p_o", p, &mut bad),
            _ => bad.push("exactly one of rl and p_o must be given".into()),
        }
        if !(self.v_o_target > self.vin) {
            bad.push(format!(
                "v_o_target must exceed vin for a step-up design (got {} <= {})",
                self.v_o_target, self.vin
            ));
        }
        if self.n_candidates.is_empty() {
            bad.push("n_candidates is empty".into());
        }
        for &n in &self.n_candidates {
            positive("n candidate", n, &mut bad);
        }
        if !(self.d_max > T::zero() && self.d_max < T::one()) {
            bad.push(format!("d_max must lie in (0,1) (got {})", self.d_max));
        }
        for (name, m) in [("lm_margin", self.lm_margin), ("c_margin", self.c_margin)] {
            if !(m >= T::one() && m.is_finite()) {
                bad.push(format!("{name} must be at least 1 (got {m})"));
            }
        }
        if !(self.coupling > T::zero() && self.coupling <= T::one()) {
            bad.push(format!(
                "coupling must lie in (0,1] (got {})",
                self.coupling
            ));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(DesignError::Spec(bad.join("; ")))
        }
    }

    pub fn load_resistance(&self) -> T {
        match (self.rl, self.p_o) {
            (Some(rl), _) => rl,
            (None, Some(p)) => self.v_o_target * self.v_o_target / p,
            (None, None) => T::nan(),
        }
    }

    pub fn gain_target(&self) -> T {
        self.v_o_target / self.vin
    }
}

/// Duty that gives gain `m` at turns ratio `n`, capped at [`D_MAX`].
pub fn solve_duty<T: Scalar>(m: T, n: T) -> Result<T, DesignError> {
    solve_duty_capped(m, n, T::lit(D_MAX))
}

/// `D = (M − n)/(M + 2)`, accepted when it lies in `(0, d_max]`.
pub fn solve_duty_capped<T: Scalar>(m: T, n: T, d_max: T) -> Result<T, DesignError> {
    let d = (m - n) / (m + T::two());
    if !(d > T::zero()) {
        return Err(DesignError::Duty {
            duty: d.as_f64(),
            bound: "D > 0 (gain must exceed n)".into(),
        });
    }
    if d > d_max {
        return Err(DesignError::Duty {
            duty: d.as_f64(),
            bound: format!("D <= d_max = {d_max}"),
        });
    }
    Ok(d)
}

/// Component values and ratings for one turns ratio.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Sizing<T> {
    pub duty: T,
    pub i_o: T,
    pub i_in: T,
    pub lm_min: T,
    pub lm: T,
    pub lk: T,
    /// Chosen from the L1 ripple rule, not from a closed-form bound.
    pub l1: T,
    pub c_min: MinCapacitances<T>,
    pub c1: T,
    pub c2: T,
    pub c3: T,
    pub c4: T,
    pub stresses: DeviceStresses<T>,
    pub peaks: PeakCurrents<T>,
    /// `lm / lm_min`.
    pub ccm_margin: T,
    /// Complete parameter set of the sized converter.
    pub params: RawParams<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Candidate<T> {
    pub n: T,
    pub feasible: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sizing: Option<Sizing<T>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DesignResult<T> {
    pub spec: DesignSpec<T>,
    pub rl: T,
    pub candidates: Vec<Candidate<T>>,
}

impl<T: Scalar> DesignResult<T> {
    pub fn feasible(&self) -> impl Iterator<Item = (T, &Sizing<T>)> {
        self.candidates
            .iter()
            .filter_map(|c| c.sizing.as_ref().map(|s| (c.n, s)))
    }
}

fn size_one<T: Scalar>(spec: &DesignSpec<T>, rl: T, n: T) -> Result<Sizing<T>, DesignError> {
    let m = spec.gain_target();
    let duty = solve_duty_capped(m, n, spec.d_max)?;
    let i_o = spec.v_o_target / rl;
    let i_in = m * i_o;
    let l1 = duty * spec.vin / (spec.fs * spec.ripple_fraction * i_in);
    // Lm and Lk only enter the bound through the sized parameter set, so
    // a provisional set with unit inductances is enough to evaluate it.
    let mut raw = RawParams {
        vin: spec.vin,
        duty,
        n,
        l1,
        lm: T::one(),
        lk: T::zero(),
        c1: T::one(),
        c2: T::one(),
        c3: T::one(),
        c4: T::one(),
        rl,
        fs: spec.fs,
    };
    let invalid = |e: crate::model::ValidationError| DesignError::Spec(e.to_string());
    let provisional = ConverterParams::new(raw).map_err(invalid)?;
    let lm_min = ccm_min_lm_at(&provisional, i_o).map_err(|e| DesignError::Spec(e.to_string()))?;
    let lm = spec.lm_margin * lm_min;
    let lk = lm * (T::one() - spec.coupling) / spec.coupling;
    raw.lm = lm;
    raw.lk = lk;
    let ripple = DesignRipple::new(spec.v_ppc).map_err(|e| DesignError::Spec(e.to_string()))?;
    let c_min = min_capacitances(&ConverterParams::new(raw).map_err(invalid)?, &ripple);
    raw.c1 = spec.c_margin * c_min.c1_min;
    raw.c2 = spec.c_margin * c_min.c2_min;
    raw.c3 = spec.c_margin * c_min.c3_min;
    raw.c4 = spec.c_margin * c_min.c4_min;
    let p = ConverterParams::new(raw).map_err(invalid)?;
    Ok(Sizing {
        duty,
        i_o,
        i_in,
        lm_min,
        lm,
        lk,
        l1,
        c_min,
        c1: raw.c1,
        c2: raw.c2,
        c3: raw.c3,
        c4: raw.c4,
        stresses: stress_magnitudes(spec.vin, duty, n),
        peaks: peak_currents_at(&p, i_o),
        ccm_margin: lm / lm_min,
        params: raw,
    })
}

/// Sizes the converter for every turns-ratio candidate, in the order given.
///
/// Candidates that cannot reach the target gain within the duty cap are
/// reported with `feasible = false`. If none is feasible the
/// rejections are returned in [`DesignError::Infeasible`].
pub fn size_converter<T: Scalar>(spec: &DesignSpec<T>) -> Result<DesignResult<T>, DesignError> {
    spec.validate()?;
    let rl = spec.load_resistance();
    let candidates: Vec<Candidate<T>> = spec
        .n_candidates
        .iter()
        .map(|&n| match size_one(spec, rl, n) {
            Ok(s) => Candidate {
                n,
                feasible: true,
                reason: None,
                sizing: Some(s),
            },
            Err(e) => Candidate {
                n,
                feasible: false,
                reason: Some(e.to_string()),
                sizing: None,
            },
        })
        .collect();
    let result = DesignResult {
        spec: spec.clone(),
        rl,
        candidates,
    };
    if result.candidates.iter().any(|c| c.feasible) {
        Ok(result)
    } else {
        Err(DesignError::Infeasible(
            result
                .candidates
                .into_iter()
                .map(|c| Rejected {
                    n: c.n.as_f64(),
                    reason: c.reason.unwrap_or_default(),
                })
                .collect(),
        ))
    }
}

/// Simulated check of one sized parameter set.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verification {
    pub n: f64,
    /// `"CCM"`, `"DCM"` or `"error"`.
    pub regime: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gain: Option<f64>,
    /// Relative error of the simulated gain against the target.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gain_error: Option<f64>,
    /// Measured peak-to-peak ripple of C1..C4.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dv_c: Option<[f64; 4]>,
    pub v_ppc: f64,
    pub ccm: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

/// Simulates `p` to steady state and compares it with the requirements.
pub fn verify_params(
    n: f64,
    p: &ConverterParams<f64>,
    gain_target: f64,
    v_ppc: f64,
    cfg: &SimConfig<f64>,
) -> Verification {
    let base = Verification {
        n,
        regime: "error",
        gain: None,
        gain_error: None,
        dv_c: None,
        v_ppc,
        ccm: false,
        detail: None,
    };
    match run_to_steady_state(p, cfg) {
        Ok(SteadyState::Ccm { metrics, .. }) => Verification {
            regime: "CCM",
            gain: Some(metrics.gain),
            gain_error: Some((metrics.gain - gain_target).abs() / gain_target),
            dv_c: Some(metrics.dv_c),
            ccm: true,
            ..base
        },
        Ok(SteadyState::Dcm(report)) => Verification {
            regime: "DCM",
            detail: Some(report.reason),
            ..base
        },
        Err(e) => Verification {
            detail: Some(e.to_string()),
            ..base
        },
    }
}

/// Simulates every feasible candidate of `result` concurrently. The output
/// follows the candidate order; a failing candidate does not stop the others.
pub fn verify_design(result: &DesignResult<f64>, cfg: &SimConfig<f64>) -> Vec<Verification> {
    let target = result.spec.gain_target();
    let v_ppc = result.spec.v_ppc;
    std::thread::scope(|scope| {
        let handles: Vec<_> = result
            .feasible()
            .map(|(n, s)| {
                scope.spawn(move || match ConverterParams::new(s.params) {
                    Ok(p) => verify_params(n, &p, target, v_ppc, cfg),
                    Err(e) => Verification {
                        n,
                        regime: "error",
                        gain: None,
                        gain_error: None,
                        dv_c: None,
                        v_ppc,
                        ccm: false,
                        detail: Some(e.to_string()),
                    },
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("verification thread panicked"))
            .collect()
    })
}

//! Closed-form steady-state expressions for continuous conduction, plus the
//! minimum-component bounds used for design.
//!
//! All expressions assume ideal, ripple-free components and neglect the two
//! short leakage intervals (M1 and M3). Load current is always derived from
//! the ideal output voltage as `I_o = V_o / R_L`.
//!
//! A few of the expressions ([`avg_magnetizing_current`], [`peak_currents`],
//! [`clamp_interval_fraction`]) are coarse estimates; they are listed in
//! [`ESTIMATED_FIELDS`] and audited against the simulator rather than trusted.

use serde::Serialize;
use thiserror::Error;

use crate::model::{ConverterParams, SteadyStateReport};
use crate::scalar::{parallel, Scalar};

/// Report fields whose closed forms are estimates.
pub const ESTIMATED_FIELDS: [&str; 6] = [
    "i_lm_avg",
    "i_d1_peak",
    "i_d2_peak",
    "i_d3_peak",
    "i_s_peak",
    "d34",
];

#[derive(Clone, Debug, PartialEq, Error)]
pub enum AnalyticsError {
    #[error("{name} out of {bound} (got {value})")]
    Domain {
        name: &'static str,
        value: f64,
        bound: &'static str,
    },
    #[error("no finite CCM bound at zero load current")]
    NoLoad,
}

fn check_duty<T: Scalar>(duty: T) -> Result<(), AnalyticsError> {
    if duty > T::zero() && duty < T::one() {
        Ok(())
    } else {
        Err(AnalyticsError::Domain {
            name: "duty",
            value: duty.as_f64(),
            bound: "(0,1)",
        })
    }
}

/// Voltage gain `(n + 2D) / (1 − D)`.
pub fn gain<T: Scalar>(duty: T, n: T) -> Result<T, AnalyticsError> {
    check_duty(duty)?;
    if !(n > T::zero()) {
        return Err(AnalyticsError::Domain {
            name: "n",
            value: n.as_f64(),
            bound: "(0,inf)",
        });
    }
    Ok((n + T::two() * duty) / (T::one() - duty))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CapVoltages<T> {
    pub v_c1: T,
    pub v_c2: T,
    pub v_c3: T,
    pub v_c4: T,
    pub v_o: T,
}

/// Capacitor voltages from volt-second balance of L1 and Lm.
pub fn cap_voltages<T: Scalar>(p: &ConverterParams<T>) -> CapVoltages<T> {
    let off = T::one() - p.duty;
    let v_c4 = p.duty * p.vin / off;
    let v_c1 = v_c4;
    let v_c2 = (p.n + T::two()) * p.duty * p.vin / off;
    let v_c3 = p.n * p.vin;
    CapVoltages {
        v_c1,
        v_c2,
        v_c3,
        v_c4,
        v_o: v_c2 + v_c3,
    }
}

/// Blocking-voltage magnitudes of the switch and the three diodes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DeviceStresses<T> {
    pub v_s: T,
    pub v_d1: T,
    pub v_d2: T,
    pub v_d3: T,
}

/// All four devices are reverse biased in the chosen reference directions;
/// only magnitudes are returned.
pub const STRESS_POLARITY: &str = "reverse (negative in device reference direction)";

/// Stress magnitudes for explicit `(vin, D, n)`; `n = 0` is allowed here.
pub fn stress_magnitudes<T: Scalar>(vin: T, duty: T, n: T) -> DeviceStresses<T> {
    let base = vin / (T::one() - duty);
    DeviceStresses {
        v_s: base,
        v_d1: base,
        v_d2: (T::one() + n) * base,
        v_d3: n * base,
    }
}

pub fn device_stresses<T: Scalar>(p: &ConverterParams<T>) -> DeviceStresses<T> {
    stress_magnitudes(p.vin, p.duty, p.n)
}

/// `I_Lm = I_o (2D + n − 1) / D` for an explicit load current.
pub fn magnetizing_current_estimate<T: Scalar>(i_o: T, duty: T, n: T) -> T {
    i_o * (T::two() * duty + n - T::one()) / duty
}

/// Average magnetizing current estimate at the parameter set's load.
pub fn avg_magnetizing_current<T: Scalar>(p: &ConverterParams<T>) -> T {
    magnetizing_current_estimate(p.output_current(), p.duty, p.n)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InductorRipples<T> {
    pub di_l1: T,
    pub di_lm: T,
}

/// Peak-to-peak ripples from the on-interval slope `vin / L` over `D·T`.
pub fn inductor_ripples<T: Scalar>(p: &ConverterParams<T>) -> InductorRipples<T> {
    InductorRipples {
        di_l1: p.duty * p.vin / (p.l1 * p.fs),
        di_lm: p.duty * p.vin / (p.lm * p.fs),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PeakCurrents<T> {
    pub i_d1_peak: T,
    pub i_d2_peak: T,
    pub i_d3_peak: T,
    pub i_s_peak: T,
}

/// Peak device currents for an explicit load current.
///
/// D1 and the switch share one expression: the reflected load term plus both
/// inductor ripples.
pub fn peak_currents_at<T: Scalar>(p: &ConverterParams<T>, i_o: T) -> PeakCurrents<T> {
    let two = T::two();
    let d = p.duty;
    let n = p.n;
    let ripples = inductor_ripples(p);
    let i_d1 = two * n * i_o / d + ripples.di_lm + ripples.di_l1;
    PeakCurrents {
        i_d1_peak: i_d1,
        i_d2_peak: two * i_o * n / (d * (n + T::one())),
        i_d3_peak: two * i_o / d,
        i_s_peak: i_d1,
    }
}

pub fn peak_currents<T: Scalar>(p: &ConverterParams<T>) -> PeakCurrents<T> {
    peak_currents_at(p, p.output_current())
}

/// Combined duration fraction of the third and fourth intervals,
/// `2 / (2n/D + D R_L (1 − D) / (fs (Lm ∥ L1) (n + D)))`.
pub fn clamp_interval_fraction<T: Scalar>(p: &ConverterParams<T>) -> T {
    let d = p.duty;
    let lp = parallel(p.lm, p.l1);
    let denom = T::two() * p.n / d + d * p.rl * (T::one() - d) / (p.fs * lp * (p.n + d));
    T::two() / denom
}

/// Minimum magnetizing inductance for continuous conduction at load `i_o`:
/// `D² vin / (2 (2D + n − 1) I_o fs)`.
pub fn ccm_min_lm_at<T: Scalar>(p: &ConverterParams<T>, i_o: T) -> Result<T, AnalyticsError> {
    if !(i_o > T::zero()) {
        return Err(AnalyticsError::NoLoad);
    }
    let d = p.duty;
    let factor = T::two() * d + p.n - T::one();
    if !(factor > T::zero()) {
        return Err(AnalyticsError::Domain {
            name: "2D+n-1",
            value: factor.as_f64(),
            bound: "(0,inf)",
        });
    }
    Ok(d * d * p.vin / (T::two() * factor * i_o * p.fs))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CcmBound<T> {
    pub lm_min: T,
    pub ccm: bool,
}

pub fn ccm_min_lm<T: Scalar>(p: &ConverterParams<T>) -> Result<CcmBound<T>, AnalyticsError> {
    let lm_min = ccm_min_lm_at(p, p.output_current())?;
    Ok(CcmBound {
        lm_min,
        ccm: p.lm >= lm_min,
    })
}

/// Allowed peak-to-peak capacitor voltage ripple used for capacitor sizing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DesignRipple<T> {
    v_ppc: T,
}

impl<T: Scalar> DesignRipple<T> {
    pub fn new(v_ppc: T) -> Result<Self, AnalyticsError> {
        if v_ppc > T::zero() && v_ppc.is_finite() {
            Ok(DesignRipple { v_ppc })
        } else {
            Err(AnalyticsError::Domain {
                name: "v_ppc",
                value: v_ppc.as_f64(),
                bound: "(0,inf)",
            })
        }
    }

    pub fn v_ppc(&self) -> T {
        self.v_ppc
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MinCapacitances<T> {
    pub c1_min: T,
    pub c2_min: T,
    pub c3_min: T,
    pub c4_min: T,
}

/// Worst-case minimum capacitances for a peak-to-peak ripple of `v_ppc`.
pub fn min_capacitances<T: Scalar>(
    p: &ConverterParams<T>,
    r: &DesignRipple<T>,
) -> MinCapacitances<T> {
    let two = T::two();
    let one = T::one();
    let (d, n, fs, rl) = (p.duty, p.n, p.fs, p.rl);
    let v = r.v_ppc;
    let gain_num = n + two * d;
    let c1 = (one / (v * fs)) * (d * d / (p.lm * fs) + two * n * gain_num / (rl * (one - d)));
    let c2 = two * n * gain_num / (v * fs * rl * d * (one + n));
    let c3 = two * gain_num / (v * fs * rl * (one - d));
    MinCapacitances {
        c1_min: c1,
        c2_min: c2,
        c3_min: c3,
        c4_min: c1,
    }
}

/// Evaluates every closed form for `p`. Capacitor minima are included when a
/// design ripple is given. At zero load the CCM fields are left empty.
pub fn full_report<T: Scalar>(
    p: &ConverterParams<T>,
    r: Option<&DesignRipple<T>>,
) -> SteadyStateReport<T> {
    let caps = cap_voltages(p);
    let stresses = device_stresses(p);
    let ripples = inductor_ripples(p);
    let peaks = peak_currents(p);
    let ccm = ccm_min_lm(p).ok();
    let cmin = r.map(|r| min_capacitances(p, r));
    SteadyStateReport {
        v_c1: caps.v_c1,
        v_c2: caps.v_c2,
        v_c3: caps.v_c3,
        v_c4: caps.v_c4,
        v_o: caps.v_o,
        m: caps.v_o / p.vin,
        i_o: p.output_current(),
        v_s_stress: stresses.v_s,
        v_d1_stress: stresses.v_d1,
        v_d2_stress: stresses.v_d2,
        v_d3_stress: stresses.v_d3,
        stress_polarity: STRESS_POLARITY,
        i_lm_avg: avg_magnetizing_current(p),
        di_l1: ripples.di_l1,
        di_lm: ripples.di_lm,
        i_d1_peak: peaks.i_d1_peak,
        i_d2_peak: peaks.i_d2_peak,
        i_d3_peak: peaks.i_d3_peak,
        i_s_peak: peaks.i_s_peak,
        d34: clamp_interval_fraction(p),
        lm_min: ccm.map(|c| c.lm_min),
        ccm: ccm.map(|c| c.ccm),
        v_ppc: r.map(|r| r.v_ppc),
        c1_min: cmin.map(|c| c.c1_min),
        c2_min: cmin.map(|c| c.c2_min),
        c3_min: cmin.map(|c| c.c3_min),
        c4_min: cmin.map(|c| c.c4_min),
        estimates: ESTIMATED_FIELDS.to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn reference() -> ConverterParams<f64> {
        ConverterParams::reference()
    }

    #[test]
    fn gain_examples() {
        assert_eq!(gain(0.6, 2.0).unwrap(), 8.0);
        assert_relative_eq!(gain(0.5, 1.0).unwrap(), 4.0, max_relative = 1e-15);
        assert_relative_eq!(gain(1e-12, 3.0).unwrap(), 3.0, max_relative = 1e-9);
        assert!(gain(1.0, 2.0).is_err());
        assert!(gain(0.0, 2.0).is_err());
        assert!(gain(0.5, 0.0).is_err());
        assert!(gain(0.5, f64::NAN).is_err());
    }

    #[test]
    fn reference_operating_point() {
        let c = cap_voltages(&reference());
        assert_relative_eq!(c.v_c4, 45.0, max_relative = 1e-14);
        assert_relative_eq!(c.v_c1, 45.0, max_relative = 1e-14);
        assert_relative_eq!(c.v_c2, 180.0, max_relative = 1e-14);
        assert_relative_eq!(c.v_c3, 60.0, max_relative = 1e-14);
        assert_relative_eq!(c.v_o, 240.0, max_relative = 1e-14);
    }

    #[test]
    fn small_duty_limit() {
        let p = reference().modify(|r| r.duty = 1e-15).unwrap();
        let c = cap_voltages(&p);
        assert!(c.v_c1.abs() < 1e-12 && c.v_c2.abs() < 1e-12 && c.v_c4.abs() < 1e-12);
        assert_eq!(c.v_c3, 60.0);
    }

    #[test]
    fn reference_stresses() {
        let s = device_stresses(&reference());
        assert_relative_eq!(s.v_s, 75.0, max_relative = 1e-14);
        assert_relative_eq!(s.v_d1, 75.0, max_relative = 1e-14);
        assert_relative_eq!(s.v_d2, 225.0, max_relative = 1e-14);
        assert_relative_eq!(s.v_d3, 150.0, max_relative = 1e-14);
        assert_eq!(stress_magnitudes(30.0, 0.6, 0.0).v_d3, 0.0);
    }

    #[test]
    fn magnetizing_current_examples() {
        assert_relative_eq!(
            avg_magnetizing_current(&reference()),
            2.2 / 0.6,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            magnetizing_current_estimate(1.0, 0.5, 1.0),
            2.0,
            max_relative = 1e-15
        );
        assert_eq!(magnetizing_current_estimate(0.0, 0.6, 2.0), 0.0);
    }

    #[test]
    fn ripple_examples() {
        let p = reference();
        let r = inductor_ripples(&p);
        assert_relative_eq!(r.di_l1, 18.0 / (47e-6 * 40e3), max_relative = 1e-14);
        assert_relative_eq!(r.di_l1, 9.574468085106383, max_relative = 1e-12);
        assert_relative_eq!(r.di_lm, 1.5, max_relative = 1e-14);
        let fast = p.modify(|r| r.fs *= 2.0).unwrap();
        let r2 = inductor_ripples(&fast);
        assert_relative_eq!(r2.di_l1, r.di_l1 / 2.0, max_relative = 1e-14);
        assert_relative_eq!(r2.di_lm, r.di_lm / 2.0, max_relative = 1e-14);
    }

    #[test]
    fn peak_current_examples() {
        let p = reference();
        let k = peak_currents(&p);
        assert_relative_eq!(k.i_d3_peak, 2.0 / 0.6, max_relative = 1e-14);
        assert_relative_eq!(k.i_d2_peak, 4.0 / 1.8, max_relative = 1e-14);
        assert_relative_eq!(
            k.i_d1_peak,
            4.0 / 0.6 + 1.5 + 9.574468085106383,
            max_relative = 1e-12
        );
        assert_eq!(k.i_s_peak, k.i_d1_peak);
        let z = peak_currents_at(&p, 0.0);
        let r = inductor_ripples(&p);
        assert_eq!(z.i_d1_peak, r.di_l1 + r.di_lm);
        let q = p.modify(|r| r.n = 1.0).unwrap();
        let io = q.output_current();
        assert_relative_eq!(peak_currents(&q).i_d2_peak, io / 0.6, max_relative = 1e-14);
    }

    #[test]
    fn clamp_interval_examples() {
        let p = reference();
        // 2 / (2n/D + D·R·(1−D) / (fs·(Lm∥L1)·(n+D))), hand-evaluated
        let lp = 300e-6 * 47e-6 / 347e-6;
        assert_relative_eq!(lp, 40.634e-6, max_relative = 1e-4);
        let expected = 2.0 / (4.0 / 0.6 + 0.6 * 240.0 * 0.4 / (40e3 * lp * 2.6));
        assert_relative_eq!(clamp_interval_fraction(&p), expected, max_relative = 1e-13);
        assert_relative_eq!(clamp_interval_fraction(&p), 0.0985, max_relative = 2e-3);
        let scaled = p
            .modify(|r| {
                r.rl *= 3.0;
                r.fs *= 3.0;
            })
            .unwrap();
        assert_relative_eq!(
            clamp_interval_fraction(&scaled),
            clamp_interval_fraction(&p),
            max_relative = 1e-13
        );
        let big_n = p.modify(|r| r.n = 1e9).unwrap();
        assert!(clamp_interval_fraction(&big_n) < 1e-8);
    }

    #[test]
    fn ccm_bound_examples() {
        let p = reference();
        let b = ccm_min_lm(&p).unwrap();
        assert_relative_eq!(
            b.lm_min,
            0.36 * 30.0 / (2.0 * 2.2 * 1.0 * 40e3),
            max_relative = 1e-13
        );
        assert_relative_eq!(b.lm_min, 61.36e-6, max_relative = 1e-3);
        assert!(b.ccm);
        let fast = p.modify(|r| r.fs *= 2.0).unwrap();
        assert_relative_eq!(
            ccm_min_lm(&fast).unwrap().lm_min,
            b.lm_min / 2.0,
            max_relative = 1e-13
        );
        // halving I_o doubles the bound
        let light = p.modify(|r| r.rl *= 2.0).unwrap();
        assert_relative_eq!(
            ccm_min_lm(&light).unwrap().lm_min,
            b.lm_min * 2.0,
            max_relative = 1e-13
        );
        assert_eq!(ccm_min_lm_at(&p, 0.0), Err(AnalyticsError::NoLoad));
        let small = p.modify(|r| r.lm = 50e-6).unwrap();
        assert!(!ccm_min_lm(&small).unwrap().ccm);
    }

    #[test]
    fn capacitance_examples() {
        let p = reference();
        let r = DesignRipple::new(1.0).unwrap();
        let c = min_capacitances(&p, &r);
        let c1 = (1.0 / 40e3) * (0.36 / (300e-6 * 40e3) + 2.0 * 2.0 * 3.2 / (240.0 * 0.4));
        assert_relative_eq!(c.c1_min, c1, max_relative = 1e-13);
        assert_relative_eq!(c.c1_min, 4.083e-6, max_relative = 1e-3);
        assert_eq!(c.c4_min, c.c1_min);
        assert_relative_eq!(c.c2_min, 0.7407e-6, max_relative = 1e-3);
        assert_relative_eq!(c.c3_min, 1.6667e-6, max_relative = 1e-3);
        let c2x = min_capacitances(&p, &DesignRipple::new(2.0).unwrap());
        assert_relative_eq!(c2x.c1_min, c.c1_min / 2.0, max_relative = 1e-14);
        assert_relative_eq!(c2x.c2_min, c.c2_min / 2.0, max_relative = 1e-14);
        assert_relative_eq!(c2x.c3_min, c.c3_min / 2.0, max_relative = 1e-14);
        assert!(DesignRipple::new(0.0).is_err());
    }

    #[test]
    fn report_matches_individual_operations() {
        let p = reference();
        let r = DesignRipple::new(1.0).unwrap();
        let rep = full_report(&p, Some(&r));
        assert_eq!(rep.m, 8.0);
        assert_eq!(rep.v_o, 240.0);
        assert_eq!(rep.v_o, rep.v_c2 + rep.v_c3);
        assert_eq!(rep.ccm, Some(true));
        let caps = cap_voltages(&p);
        assert_eq!(rep.v_c1, caps.v_c1);
        assert_eq!(rep.v_c4, caps.v_c4);
        assert_eq!(rep.d34, clamp_interval_fraction(&p));
        assert_eq!(rep.lm_min, Some(ccm_min_lm(&p).unwrap().lm_min));
        assert_eq!(rep.c3_min, Some(min_capacitances(&p, &r).c3_min));
        assert_eq!(rep.i_lm_avg, avg_magnetizing_current(&p));
        assert_eq!(rep.i_d1_peak, peak_currents(&p).i_d1_peak);
        let bare = full_report(&p, None);
        assert!(bare.c1_min.is_none());
    }

    #[test]
    fn single_precision_agrees() {
        let p = ConverterParams::<f32>::reference();
        let c = cap_voltages(&p);
        assert!((c.v_o - 240.0).abs() < 1e-3);
        assert!((gain(0.6f32, 2.0).unwrap() - 8.0).abs() < 1e-5);
    }
}

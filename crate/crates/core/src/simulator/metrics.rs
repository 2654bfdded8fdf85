//! Period averages, ripples and peaks of a recorded period.

use serde::Serialize;

use super::circuit::{Branches, Circuit};
use super::integrate::Trace;
use crate::model::{ConverterParams, SimMetrics, SteadyStateReport};
use crate::scalar::Scalar;

/// Running min/max.
#[derive(Clone, Copy)]
struct Span<T> {
    lo: T,
    hi: T,
}

impl<T: Scalar> Span<T> {
    fn new() -> Self {
        Span {
            lo: T::infinity(),
            hi: T::neg_infinity(),
        }
    }

    fn push(&mut self, v: T) {
        self.lo = self.lo.min(v);
        self.hi = self.hi.max(v);
    }

    fn width(&self) -> T {
        self.hi - self.lo
    }
}

/// Quantities accumulated along the trace, in a fixed order.
const N_AVG: usize = 23;

fn observables<T: Scalar>(x: &[T; 7], br: &Branches<T>) -> [T; N_AVG] {
    [
        x[0],
        x[1],
        x[2],
        x[3],
        x[4],
        x[5],
        x[6],        // 0..7 states
        br.i_o,      // 7
        br.i_dev[0], // 8 switch
        br.i_dev[1],
        br.i_dev[2],
        br.i_dev[3], // 9..12 diodes
        br.i_c[0],
        br.i_c[1],
        br.i_c[2],
        br.i_c[3], // 12..16
        br.v_l[0],
        br.v_l[1],
        br.v_l[2], // 16..19
        br.v_block[0],
        br.v_block[1],
        br.v_block[2],
        br.v_block[3], // 19..23
    ]
}

/// Reduces a recorded period to [`SimMetrics`].
///
/// Averages use the trapezoidal rule between consecutive samples; event
/// samples come in pairs at the same instant, so integrands are evaluated
/// with the mode that was active on each subinterval. Device and capacitor
/// currents are reconstructed per mode from the states.
pub fn extract_metrics<T: Scalar>(trace: &Trace<T>, p: &ConverterParams<T>) -> SimMetrics<T> {
    let circuit = Circuit::from_raw(p.raw());
    let mut sums = [T::zero(); N_AVG];
    let mut spans = [Span::new(); N_AVG];
    let mut prev: Option<(T, [T; N_AVG])> = None;
    let half = T::lit(0.5);

    for s in &trace.samples {
        let x = s.state.to_array();
        let obs = observables(&x, &circuit.evaluate(s.mode, &x));
        for (span, v) in spans.iter_mut().zip(obs.iter()) {
            span.push(*v);
        }
        if let Some((t_prev, obs_prev)) = prev {
            let dt = s.state.t - t_prev;
            if dt > T::zero() {
                for k in 0..N_AVG {
                    sums[k] = sums[k] + half * dt * (obs[k] + obs_prev[k]);
                }
            }
        }
        prev = Some((s.state.t, obs));
    }

    let avg = |k: usize| sums[k] / trace.period;
    let abs_peak = |k: usize| spans[k].hi.abs().max(spans[k].lo.abs());
    let v_o = avg(4) + avg(5);
    SimMetrics {
        v_c1: avg(3),
        v_c2: avg(4),
        v_c3: avg(5),
        v_c4: avg(6),
        v_o,
        i_o: avg(7),
        gain: v_o / p.vin,
        i_l1_avg: avg(0),
        i_lk_avg: avg(1),
        i_lm_avg: avg(2),
        di_l1: spans[0].width(),
        di_lm: spans[2].width(),
        dv_c: [
            spans[3].width(),
            spans[4].width(),
            spans[5].width(),
            spans[6].width(),
        ],
        i_s_peak: spans[8].hi,
        i_d1_peak: spans[9].hi,
        i_d2_peak: spans[10].hi,
        i_d3_peak: spans[11].hi,
        i_d_avg: [avg(9), avg(10), avg(11)],
        i_s_avg: avg(8),
        i_c_avg: [avg(12), avg(13), avg(14), avg(15)],
        i_c_peak: [abs_peak(12), abs_peak(13), abs_peak(14), abs_peak(15)],
        v_l_avg: [avg(16), avg(17), avg(18)],
        v_block_max: [spans[19].hi, spans[20].hi, spans[21].hi, spans[22].hi],
        mode_fractions: trace.mode_fractions(),
    }
}

/// One line of the analytic-versus-measured table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompareRow {
    pub quantity: &'static str,
    pub analytic: f64,
    pub measured: f64,
    /// `|measured − analytic| / |analytic|`, or the absolute difference when
    /// the analytic value is zero.
    pub rel_error: f64,
    /// The closed form is an estimate rather than an identity.
    pub estimate: bool,
}

/// Lines up every closed-form quantity with its measured counterpart.
/// `d34` is measured as the combined M3 and M4 duration fraction.
pub fn compare_with_report<T: Scalar>(
    r: &SteadyStateReport<T>,
    m: &SimMetrics<T>,
) -> Vec<CompareRow> {
    let rows: [(&'static str, T, T); 21] = [
        ("v_c1", r.v_c1, m.v_c1),
        ("v_c2", r.v_c2, m.v_c2),
        ("v_c3", r.v_c3, m.v_c3),
        ("v_c4", r.v_c4, m.v_c4),
        ("v_o", r.v_o, m.v_o),
        ("m", r.m, m.gain),
        ("i_o", r.i_o, m.i_o),
        ("i_d2_avg", r.i_o, m.i_d_avg[1]),
        ("i_d3_avg", r.i_o, m.i_d_avg[2]),
        ("v_s_stress", r.v_s_stress, m.v_block_max[0]),
        ("v_d1_stress", r.v_d1_stress, m.v_block_max[1]),
        ("v_d2_stress", r.v_d2_stress, m.v_block_max[2]),
        ("v_d3_stress", r.v_d3_stress, m.v_block_max[3]),
        ("di_l1", r.di_l1, m.di_l1),
        ("di_lm", r.di_lm, m.di_lm),
        ("i_lm_avg", r.i_lm_avg, m.i_lm_avg),
        ("i_d1_peak", r.i_d1_peak, m.i_d1_peak),
        ("i_d2_peak", r.i_d2_peak, m.i_d2_peak),
        ("i_d3_peak", r.i_d3_peak, m.i_d3_peak),
        ("i_s_peak", r.i_s_peak, m.i_s_peak),
        ("d34", r.d34, m.mode_fractions[2] + m.mode_fractions[3]),
    ];
    rows.into_iter()
        .map(|(quantity, a, b)| {
            let (a, b) = (a.as_f64(), b.as_f64());
            let diff = (b - a).abs();
            CompareRow {
                quantity,
                analytic: a,
                measured: b,
                rel_error: if a == 0.0 { diff } else { diff / a.abs() },
                estimate: r.estimates.contains(&quantity),
            }
        })
        .collect()
}

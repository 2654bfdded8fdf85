use zeta_stepup::analytics::full_report;
use zeta_stepup::comparison::{duty_grid, sweep_gain, Topology};
use zeta_stepup::export::*;
use zeta_stepup::simulator::{
    compare_with_report, integrate_period, run_to_steady_state, SteadyState,
};
use zeta_stepup::{Config, Params, State};

fn gains_csv() -> String {
    let grid: Vec<f64> = duty_grid(0.05, 0.95, 0.05).unwrap();
    let rows = sweep_gain(&Topology::ALL, &grid, 2.0).unwrap();
    let mut buf = Vec::new();
    write_gains_csv(&mut buf, &rows).unwrap();
    String::from_utf8(buf).unwrap()
}

#[test]
fn gains_table_shape() {
    let text = gains_csv();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), GAINS_HEADER.join(","));
    let body: Vec<&str> = lines.collect();
    assert_eq!(body.len(), 19 * 7);
    assert!(body.contains(&"0.6,proposed,8"));
    assert!(body.contains(&"0.6,boost,2.5"));
    assert!(text.ends_with('\n') && !text.contains('\r'));
}

#[test]
fn gains_table_is_deterministic() {
    assert_eq!(gains_csv(), gains_csv());
}

#[test]
fn trace_rows_follow_the_header() {
    let p = Params::reference();
    let (_, trace) = integrate_period(&p, &Config::default(), &State::zero()).unwrap();
    let mut buf = Vec::new();
    write_trace_csv(&mut buf, &trace).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), TRACE_HEADER.join(","));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), trace.samples.len());
    for (r, s) in rows.iter().zip(&trace.samples) {
        assert_eq!(r.len(), TRACE_HEADER.len());
        assert_eq!(r[0], s.state.t);
        assert_eq!(r[1], s.mode.number() as f64);
        assert!(r[1] <= 5.0);
    }
    for w in rows.windows(2) {
        assert!(w[1][0] >= w[0][0]);
    }
}

#[test]
fn compare_table_columns() {
    let p = Params::reference();
    let SteadyState::Ccm { metrics, .. } = run_to_steady_state(&p, &Config::default()).unwrap()
    else {
        panic!("reference point should converge in CCM");
    };
    let rows = compare_with_report(&full_report(&p, None), &metrics);
    let mut buf = Vec::new();
    write_compare_csv(&mut buf, &rows).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "quantity,analytic,measured,rel_error"
    );
    let body: Vec<&str> = lines.collect();
    assert_eq!(body.len(), rows.len());
    let v_o = body.iter().find(|l| l.starts_with("v_o,")).unwrap();
    let cols: Vec<&str> = v_o.split(',').collect();
    assert_eq!(cols[1], "240");
    assert!(cols[3].parse::<f64>().unwrap() < 0.05);
}

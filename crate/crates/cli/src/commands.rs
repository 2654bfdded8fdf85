use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};
use zeta_stepup::analytics::{full_report, DesignRipple};
use zeta_stepup::comparison::{duty_grid, gain_of, sweep_gain as sweep, Topology};
use zeta_stepup::design::{size_converter, verify_design, DesignError};
use zeta_stepup::export::{write_compare_csv, write_gains_csv, write_trace_csv};
use zeta_stepup::simulator::{
    compare_with_report, run_to_steady_state, simulate_periods, SimError, SteadyState, Trace,
};
use zeta_stepup::{validate_params, Config, DesignSpec, Params};

use crate::error::{CliError, Result};
use crate::units::annotate;
use crate::{Format, Output, SimFlags};

const VERSION: &str = env!("CARGO_PKG_VERSION");

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(CliError::io(path))
}

fn load_params(path: &Path) -> Result<Params> {
    let text = read(path)?;
    let fields: BTreeMap<String, f64> = serde_json::from_str(&text)
        .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
    validate_params(&fields).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

fn sim_config(flags: &SimFlags) -> Result<Config> {
    let mut cfg = Config::default();
    if let Some(s) = flags.steps {
        cfg.steps_per_period = s;
    }
    if let Some(t) = flags.tol {
        cfg.convergence_tol = t;
    }
    cfg.warm_start = flags.warm;
    cfg.validate()
        .map_err(|e| CliError::Invalid(e.to_string()))?;
    Ok(cfg)
}

fn sim_failure(e: SimError) -> CliError {
    match e {
        SimError::Config(_) | SimError::ZeroLeakage => CliError::Invalid(e.to_string()),
        _ => CliError::Numerical(e.to_string()),
    }
}

/// Version and resolved parameters, the common head of every JSON document.
fn envelope(params: Value) -> Map<String, Value> {
    let mut doc = Map::new();
    doc.insert("version".into(), json!(VERSION));
    doc.insert("params".into(), params);
    doc
}

fn pretty(doc: &Value) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("JSON values serialize");
    s.push('\n');
    s
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(CliError::io(dir))
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(CliError::io(&path))?;
    Ok(path)
}

/// Writes to `<dir>/<name>` or, without a directory, to stdout.
fn emit(dir: Option<&Path>, name: &str, text: &str) -> Result<()> {
    match dir {
        Some(d) => {
            out_dir(d)?;
            write(d, name, text.as_bytes())?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> csv::Result<()>) -> Vec<u8> {
    let mut buf = Vec::new();
    f(&mut buf).expect("writing to memory");
    buf
}

fn csv_text(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).expect("writing to memory");
    for r in rows {
        w.write_record(r).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("UTF-8")
}

fn scalar_text(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Array(items) => items.iter().map(scalar_text).collect::<Vec<_>>().join(";"),
        other => other.to_string(),
    }
}

pub fn analyze(path: &Path, ripple: Option<f64>, output: &Output) -> Result<()> {
    let p = load_params(path)?;
    let ripple = ripple
        .map(|v| DesignRipple::new(v).map_err(|e| CliError::Invalid(e.to_string())))
        .transpose()?;
    let report = full_report(&p, ripple.as_ref());
    match output.format.unwrap_or(Format::Json) {
        Format::Json => {
            let mut doc = envelope(to_value(&p));
            doc.insert("report".into(), to_value(&report));
            emit(
                output.out.as_deref(),
                "report.json",
                &pretty(&Value::Object(doc)),
            )
        }
        Format::Csv => {
            let mut rows = vec![vec!["version".to_string(), VERSION.to_string()]];
            for section in [to_value(&p), to_value(&report)] {
                if let Value::Object(map) = section {
                    rows.extend(map.iter().map(|(k, v)| vec![k.clone(), scalar_text(v)]));
                }
            }
            emit(
                output.out.as_deref(),
                "report.csv",
                &csv_text(&["quantity", "value"], &rows),
            )
        }
    }
}

fn mode_names<T: zeta_stepup::Scalar>(trace: &Trace<T>) -> Vec<String> {
    trace
        .mode_sequence()
        .iter()
        .map(|c| c.to_string())
        .collect()
}

pub fn simulate(path: &Path, flags: &SimFlags, no_converge: bool, out: &Path) -> Result<()> {
    let p = load_params(path)?;
    let mut cfg = sim_config(flags)?;
    out_dir(out)?;
    let mut doc = envelope(to_value(&p));

    if no_converge {
        let periods = flags.periods.unwrap_or(1);
        let (trace, metrics) = simulate_periods(&p, &cfg, periods).map_err(sim_failure)?;
        let regime = if trace.magnetizing_gap().is_some() {
            "DCM"
        } else {
            "CCM"
        };
        doc.insert("config".into(), to_value(&cfg));
        doc.insert("converged".into(), json!(false));
        doc.insert("periods".into(), json!(periods));
        doc.insert("regime".into(), json!(regime));
        doc.insert("mode_sequence".into(), json!(mode_names(&trace)));
        doc.insert("metrics".into(), to_value(&metrics));
        write(out, "trace.csv", &csv_bytes(|b| write_trace_csv(b, &trace)))?;
        write(out, "metrics.json", pretty(&Value::Object(doc)).as_bytes())?;
        return Ok(());
    }

    if let Some(limit) = flags.periods {
        cfg.max_periods = limit;
    }
    cfg.validate()
        .map_err(|e| CliError::Invalid(e.to_string()))?;
    doc.insert("config".into(), to_value(&cfg));
    let dcm = match run_to_steady_state(&p, &cfg) {
        Ok(SteadyState::Ccm {
            trace,
            metrics,
            periods,
            residual,
        }) => {
            doc.insert("converged".into(), json!(true));
            doc.insert("periods".into(), json!(periods));
            doc.insert("residual".into(), json!(residual));
            doc.insert("regime".into(), json!("CCM"));
            doc.insert("mode_sequence".into(), json!(mode_names(&trace)));
            doc.insert("metrics".into(), to_value(&metrics));
            let rows = compare_with_report(&full_report(&p, None), &metrics);
            write(out, "trace.csv", &csv_bytes(|b| write_trace_csv(b, &trace)))?;
            write(
                out,
                "compare.csv",
                &csv_bytes(|b| write_compare_csv(b, &rows)),
            )?;
            None
        }
        Ok(SteadyState::Dcm(r)) | Err(SimError::Dcm(r)) => Some(r),
        Err(e) => return Err(sim_failure(e)),
    };
    if let Some(r) = dcm {
        // the closed forms do not describe this regime
        let stale = out.join("compare.csv");
        if stale.exists() {
            fs::remove_file(&stale).map_err(CliError::io(&stale))?;
        }
        doc.insert("converged".into(), json!(false));
        doc.insert("regime".into(), json!("DCM"));
        doc.insert("dcm".into(), to_value(&r));
    }
    write(out, "metrics.json", pretty(&Value::Object(doc)).as_bytes())?;
    Ok(())
}

fn parse_range(s: &str) -> Result<(f64, f64, f64)> {
    let bad = || CliError::Invalid(format!("duty range `{s}` is not start:stop:step"));
    let parts: Vec<f64> = s
        .split(':')
        .map(|v| v.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| bad())?;
    match parts[..] {
        [a, b, step] => Ok((a, b, step)),
        _ => Err(bad()),
    }
}

pub fn sweep_gain(n: f64, range: &str, names: &[String], out: &Path, format: Format) -> Result<()> {
    let (start, stop, step) = parse_range(range)?;
    let grid: Vec<f64> =
        duty_grid(start, stop, step).map_err(|e| CliError::Invalid(e.to_string()))?;
    let topologies: Vec<Topology> = if names.is_empty() {
        Topology::ALL.to_vec()
    } else {
        names
            .iter()
            .map(|s| {
                Topology::parse(s)
                    .ok_or_else(|| CliError::Invalid(format!("unknown topology `{s}`")))
            })
            .collect::<Result<_>>()?
    };
    let rows = sweep(&topologies, &grid, n).map_err(|e| CliError::Invalid(e.to_string()))?;
    let mut meta = Map::new();
    meta.insert("version".into(), json!(VERSION));
    meta.insert("n".into(), json!(n));
    meta.insert(
        "grid".into(),
        json!({"start": start, "stop": stop, "step": step, "points": grid.len()}),
    );
    meta.insert("topologies".into(), json!(topologies));
    out_dir(out)?;
    match format {
        Format::Csv => {
            write(out, "gains.csv", &csv_bytes(|b| write_gains_csv(b, &rows)))?;
            write(
                out,
                "gains.meta.json",
                pretty(&Value::Object(meta)).as_bytes(),
            )?;
        }
        Format::Json => {
            meta.insert("rows".into(), to_value(&rows));
            write(out, "gains.json", pretty(&Value::Object(meta)).as_bytes())?;
        }
    }
    Ok(())
}

pub fn design(path: &Path, verify: bool, flags: &SimFlags, out: Option<&Path>) -> Result<()> {
    let text = read(path)?;
    let spec: DesignSpec = serde_json::from_str(&text)
        .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
    let mut doc = Map::new();
    doc.insert("version".into(), json!(VERSION));
    match size_converter(&spec) {
        Ok(result) => {
            doc.insert("feasible".into(), json!(true));
            if let Value::Object(fields) = to_value(&result) {
                doc.extend(fields);
            }
            if verify {
                let mut cfg = sim_config(flags)?;
                if let Some(limit) = flags.periods {
                    cfg.max_periods = limit;
                }
                doc.insert(
                    "verification".into(),
                    to_value(&verify_design(&result, &cfg)),
                );
            }
        }
        Err(DesignError::Infeasible(rejected)) => {
            doc.insert("feasible".into(), json!(false));
            doc.insert("spec".into(), to_value(&spec));
            let candidates: Vec<Value> = rejected
                .iter()
                .map(|r| json!({"n": r.n, "feasible": false, "reason": r.reason}))
                .collect();
            doc.insert("candidates".into(), json!(candidates));
        }
        Err(e) => return Err(CliError::Invalid(e.to_string())),
    }
    let mut doc = Value::Object(doc);
    annotate(&mut doc);
    emit(out, "design.json", &pretty(&doc))
}

const TABLE_HEADER: [&str; 8] = [
    "topology",
    "gain_formula",
    "switches",
    "diodes",
    "capacitors",
    "inductors",
    "coupled_inductor",
    "gain",
];

pub fn compare(path: &Path, output: &Output) -> Result<()> {
    let p = load_params(path)?;
    let mut rows = Vec::new();
    for t in Topology::ALL {
        let g = gain_of(t, p.duty, p.n).map_err(|e| CliError::Invalid(e.to_string()))?;
        rows.push((t, t.counts(), g));
    }
    let dir = output.out.as_deref();
    let mut doc = envelope(to_value(&p));
    doc.insert("duty".into(), json!(p.duty));
    doc.insert("n".into(), json!(p.n));
    match output.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let count = |c: Option<u32>| c.map(|v| v.to_string()).unwrap_or_default();
            let table: Vec<Vec<String>> = rows
                .iter()
                .map(|(t, c, g)| {
                    vec![
                        t.id().to_string(),
                        t.formula().to_string(),
                        count(c.switches),
                        count(c.diodes),
                        count(c.capacitors),
                        count(c.inductors),
                        c.coupled_inductor.to_string(),
                        g.to_string(),
                    ]
                })
                .collect();
            emit(dir, "table1.csv", &csv_text(&TABLE_HEADER, &table))?;
            if dir.is_some() {
                emit(dir, "table1.meta.json", &pretty(&Value::Object(doc)))?;
            }
            Ok(())
        }
        Format::Json => {
            let table: Vec<Value> = rows
                .iter()
                .map(|(t, c, g)| {
                    json!({
                        "topology": t,
                        "gain_formula": t.formula(),
                        "counts": c,
                        "gain": g,
                    })
                })
                .collect();
            doc.insert("rows".into(), json!(table));
            emit(dir, "table1.json", &pretty(&Value::Object(doc)))
        }
    }
}

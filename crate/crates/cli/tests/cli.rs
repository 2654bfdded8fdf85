use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const PARAMS: &str = r#"{"vin":30,"duty":0.6,"n":2,"l1":47e-6,"lm":300e-6,"lk":1e-6,
"c1":47e-6,"c2":3.3e-6,"c3":3.3e-6,"c4":47e-6,"rl":240,"fs":40000}"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zeta-stepup"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn file(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn params_file(dir: &Path, edit: impl FnOnce(&str) -> String) -> String {
    file(dir, "params.json", &edit(PARAMS))
}

fn json_at(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn analyze_reports_the_gain() {
    let dir = TempDir::new().unwrap();
    let p = params_file(dir.path(), str::to_string);
    let o = run(&["analyze", &p]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("\"m\": 8.0"));
    let v = stdout_json(&o);
    assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(v["params"]["lm"], 300e-6);
    assert!(v["report"]["c1_min"].is_null());
}

#[test]
fn analyze_with_ripple_adds_minimum_capacitances() {
    let dir = TempDir::new().unwrap();
    let p = params_file(dir.path(), str::to_string);
    let v = stdout_json(&run(&["analyze", &p, "--ripple", "1.0"]));
    let c3 = v["report"]["c3_min"].as_f64().unwrap();
    assert!((c3 - 1.6667e-6).abs() < 1e-9);
    assert_eq!(v["report"]["v_ppc"], 1.0);
}

#[test]
fn analyze_csv_is_a_key_value_table() {
    let dir = TempDir::new().unwrap();
    let p = params_file(dir.path(), str::to_string);
    let o = run(&["analyze", &p, "--format", "csv"]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("quantity,value\nversion,"));
    assert!(text.lines().any(|l| l == "m,8.0"));
}

#[test]
fn validation_failures_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let p = params_file(dir.path(), |s| s.replace("\"duty\":0.6", "\"duty\":1.0"));
    let o = run(&["analyze", &p]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("duty"));

    let p = params_file(dir.path(), |s| s.replace("\"rl\":240,", "\"rload\":240,"));
    let err = String::from_utf8(run(&["analyze", &p]).stderr).unwrap();
    assert!(err.contains("rload") && err.contains("rl"), "{err}");
}

#[test]
fn missing_file_exits_with_one() {
    assert_eq!(code(&run(&["analyze", "/nonexistent/params.json"])), 1);
}

#[test]
fn simulate_writes_trace_metrics_and_comparison() {
    let dir = TempDir::new().unwrap();
    let p = params_file(dir.path(), str::to_string);
    let out = dir.path().join("sim");
    let o = run(&["simulate", &p, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let compare = fs::read_to_string(out.join("compare.csv")).unwrap();
    assert!(compare.starts_with("quantity,analytic,measured,rel_error\n"));
    let row: Vec<&str> = compare
        .lines()
        .find(|l| l.starts_with("v_o,"))
        .unwrap()
        .split(',')
        .collect();
    assert_eq!(row[1], "240");
    assert!((row[2].parse::<f64>().unwrap() - 240.0).abs() < 12.0);
    assert!(row[3].parse::<f64>().unwrap() < 0.05);

    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.starts_with("t,mode,i_l1,i_lk,i_lm,v_c1,v_c2,v_c3,v_c4,v_o\n"));

    let m = json_at(out.join("metrics.json"));
    assert_eq!(m["regime"], "CCM");
    assert_eq!(m["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(m["params"]["duty"], 0.6);
    assert_eq!(m["config"]["steps_per_period"], 4000);
}

#[test]
fn simulate_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let p = params_file(dir.path(), str::to_string);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        assert_eq!(
            code(&run(&[
                "simulate",
                &p,
                "--warm",
                "--out",
                out.to_str().unwrap()
            ])),
            0
        );
    }
    for name in ["trace.csv", "metrics.json", "compare.csv"] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn single_period_debug_run() {
    let dir = TempDir::new().unwrap();
    let p = params_file(dir.path(), str::to_string);
    let out = dir.path().join("one");
    let o = run(&[
        "simulate",
        &p,
        "--periods",
        "1",
        "--no-converge",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let rows = fs::read_to_string(out.join("trace.csv"))
        .unwrap()
        .lines()
        .count()
        - 1;
    assert!(rows >= 4000);
    assert!(!out.join("compare.csv").exists());
    assert_eq!(json_at(out.join("metrics.json"))["converged"], false);
}

#[test]
fn small_magnetizing_inductance_is_reported_as_dcm() {
    let dir = TempDir::new().unwrap();
    let p = params_file(dir.path(), |s| s.replace("\"lm\":300e-6", "\"lm\":6e-6"));
    let out = dir.path().join("dcm");
    let o = run(&["simulate", &p, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(json_at(out.join("metrics.json"))["regime"], "DCM");
    assert!(!out.join("compare.csv").exists());
}

#[test]
fn non_convergence_exits_with_three() {
    let dir = TempDir::new().unwrap();
    let p = params_file(dir.path(), str::to_string);
    let out = dir.path().join("nc");
    assert_eq!(
        code(&run(&[
            "simulate",
            &p,
            "--periods",
            "3",
            "--out",
            out.to_str().unwrap()
        ])),
        3
    );
}

#[test]
fn sweep_gain_defaults() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("sweep");
    assert_eq!(
        code(&run(&["sweep-gain", "--out", out.to_str().unwrap()])),
        0
    );
    let text = fs::read_to_string(out.join("gains.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "duty,topology,gain");
    assert_eq!(lines.len() - 1, 19 * 7);
    assert!(lines.contains(&"0.6,proposed,8"));
    assert!(lines.contains(&"0.6,boost,2.5"));
    let meta = json_at(out.join("gains.meta.json"));
    assert_eq!(meta["n"], 2.0);
    assert_eq!(meta["grid"]["points"], 19);

    let again = dir.path().join("again");
    run(&["sweep-gain", "--out", again.to_str().unwrap()]);
    assert_eq!(text, fs::read_to_string(again.join("gains.csv")).unwrap());
}

#[test]
fn sweep_gain_rejects_bad_ranges() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(
        code(&run(&[
            "sweep-gain",
            "--duty-range",
            "0.5:1.2:0.1",
            "--out",
            out
        ])),
        2
    );
    assert_eq!(
        code(&run(&[
            "sweep-gain",
            "--duty-range",
            "0.5-0.9",
            "--out",
            out
        ])),
        2
    );
    assert_eq!(
        code(&run(&["sweep-gain", "--topologies", "buck", "--out", out])),
        2
    );
}

#[test]
fn sweep_gain_json_carries_rows_and_metadata() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("j");
    let o = run(&[
        "sweep-gain",
        "--n",
        "3",
        "--topologies",
        "boost,proposed",
        "--format",
        "json",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let v = json_at(out.join("gains.json"));
    assert_eq!(v["n"], 3.0);
    assert_eq!(v["rows"].as_array().unwrap().len(), 19 * 2);
}

const DESIGN: &str =
    r#"{"vin":30,"v_o_target":240,"rl":240,"fs":40000,"v_ppc":1,"n_candidates":[2]}"#;

#[test]
fn design_finds_the_reference_duty() {
    let dir = TempDir::new().unwrap();
    let s = file(dir.path(), "spec.json", DESIGN);
    let o = run(&["design", &s]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    assert_eq!(v["feasible"], true);
    let sizing = &v["candidates"][0]["sizing"];
    assert!((sizing["duty"].as_f64().unwrap() - 0.6).abs() < 1e-12);
    assert_eq!(sizing["lm_unit"], "H");
    assert_eq!(v["spec"]["vin_unit"], "V");
}

#[test]
fn design_verification_meets_the_gain() {
    let dir = TempDir::new().unwrap();
    let s = file(dir.path(), "spec.json", DESIGN);
    let out = dir.path().join("d");
    let o = run(&["design", &s, "--verify", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let v = json_at(out.join("design.json"));
    let check = &v["verification"][0];
    assert_eq!(check["regime"], "CCM");
    assert!(check["gain_error"].as_f64().unwrap() < 0.05);
}

#[test]
fn step_down_design_exits_with_two() {
    let dir = TempDir::new().unwrap();
    let s = file(
        dir.path(),
        "spec.json",
        &DESIGN.replace("\"v_o_target\":240", "\"v_o_target\":20"),
    );
    assert_eq!(code(&run(&["design", &s])), 2);
}

#[test]
fn infeasible_design_is_a_result() {
    let dir = TempDir::new().unwrap();
    let s = file(
        dir.path(),
        "spec.json",
        r#"{"vin":100,"v_o_target":150,"rl":100,"fs":40000,"v_ppc":1,"n_candidates":[2,3]}"#,
    );
    let o = run(&["design", &s]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    assert_eq!(v["feasible"], false);
    let c = v["candidates"].as_array().unwrap();
    assert_eq!(c.len(), 2);
    assert!(c.iter().all(|c| c["feasible"] == false));
}

#[test]
fn compare_reproduces_the_table() {
    let dir = TempDir::new().unwrap();
    let p = params_file(dir.path(), str::to_string);
    let o = run(&["compare", &p]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<Vec<&str>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    assert_eq!(rows.len(), 7);
    let row = |id: &str| rows.iter().find(|r| r[0] == id).unwrap().clone();
    assert_eq!(row("proposed")[2..5], ["1", "3", "4"]);
    assert_eq!(row("boost")[7], "2.5");
    assert!((row("quadratic")[7].parse::<f64>().unwrap() - 6.25).abs() < 1e-12);

    let v = stdout_json(&run(&["compare", &p, "--format", "json"]));
    assert_eq!(v["rows"].as_array().unwrap().len(), 7);
    assert_eq!(v["params"]["n"], 2.0);
}

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ambit_cli::verify;
use ambit_cli::RunConfig;
use serde_json::{json, Map, Value};

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/tiny.toml")
}

fn ambit(args: &[&str]) -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ambit"));
    c.args(args);
    for (k, _) in std::env::vars() {
        if k.starts_with("AMBIT_") {
            c.env_remove(k);
        }
    }
    c
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Value types with keys, arrays reduced to their first element.
fn skeleton(v: &Value) -> Value {
    match v {
        Value::Null => json!("null"),
        Value::Bool(_) => json!("bool"),
        Value::Number(_) => json!("number"),
        Value::String(_) => json!("string"),
        Value::Array(a) => Value::Array(a.first().map(skeleton).into_iter().collect()),
        Value::Object(o) => Value::Object(o.iter().map(|(k, v)| (k.clone(), skeleton(v))).collect::<Map<_, _>>()),
    }
}

#[test]
fn report_schema_matches_golden_file() {
    let text = std::fs::read_to_string(fixture()).unwrap();
    let plan = RunConfig::from_toml(&text).unwrap().resolve(true).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let report = verify::run(&plan, dir.path(), false).unwrap();
    let written: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join(verify::REPORT)).unwrap()).unwrap();
    assert_eq!(skeleton(&written), skeleton(&report.document));
    let golden_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/report_schema.json");
    let actual = skeleton(&written);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&golden_path, serde_json::to_string_pretty(&actual).unwrap() + "\n").unwrap();
    }
    let golden: Value = serde_json::from_str(&std::fs::read_to_string(&golden_path).unwrap()).unwrap();
    assert_eq!(actual, golden, "report layout changed");
    for f in written["files"].as_array().unwrap() {
        assert!(dir.path().join(f.as_str().unwrap()).exists(), "{f}");
    }
}

#[test]
fn analytic_only_skips_simulation() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(ambit(&["verify", "--analytic-only", "--out"]).arg(dir.path()));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert!(report.get("simulation").is_none());
    assert_eq!(report["passed"], json!(true));
    assert!(stdout(&o).contains("checks passed"));
}

#[test]
fn invalid_configuration_lists_every_problem() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(
        &path,
        "schema = 1\n[basis]\nkind = \"nig\"\nalpha = 3.0\nbeta = 0.0\ndelta = 1.0\nnu = 0.0\n\
         [lattice]\ndt = 2.0\nrealizations = 1\n[estimate]\nmoment_orders = [2, 4]\n",
    )
    .unwrap();
    let o = run(ambit(&["verify", "--config"]).arg(&path));
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("order 4"), "{err}");
    assert!(err.contains("realizations"), "{err}");
    assert!(err.contains("dt"), "{err}");
    assert!(!dir.path().join("ambit-out").exists());
}

#[test]
fn stored_fields_give_the_same_estimates() {
    let dir = tempfile::tempdir().unwrap();
    let fields = dir.path().join("fields");
    let cfg = fixture();
    let cfg = cfg.to_str().unwrap();
    let o = run(ambit(&["--config", cfg, "simulate", "--out"]).arg(&fields));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let header: Value = serde_json::from_str(&std::fs::read_to_string(fields.join("fields.json")).unwrap()).unwrap();
    assert_eq!(header["nx"], json!(800));
    let size = std::fs::metadata(fields.join("field_00000.f64")).unwrap().len();
    assert_eq!(size, 800 * 60 * 8);
    let stored = run(ambit(&["--config", cfg, "estimate", "--input"]).arg(&fields));
    let direct = run(&mut ambit(&["--config", cfg, "estimate"]));
    assert!(stored.status.success() && direct.status.success());
    assert_eq!(stdout(&stored), stdout(&direct));
    assert!(stdout(&direct).starts_with("lag,estimate,stderr\n"));
    assert!(stdout(&direct).contains("l,n,Mn,stderr\n"));
}

#[test]
fn no_store_prints_summaries() {
    let o = run(&mut ambit(&["--config", fixture().to_str().unwrap(), "--no-store", "simulate"]));
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.starts_with("realization,mean,log_mean,log_var,min,max\n"));
    assert_eq!(out.lines().count(), 7);
}

#[test]
fn fit_recovers_an_exact_power_law() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("series.csv");
    let mut text = String::from("lag,estimate,stderr\n");
    for i in 0..10 {
        let x = 0.1 * 1.5f64.powi(i);
        text.push_str(&format!("{x},{},0.01\n", 3.0 * x.powf(-0.7)));
    }
    std::fs::write(&path, text).unwrap();
    let o = run(ambit(&["fit", "--input"]).arg(&path));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("slope,intercept,r2,lo,hi,npoints"));
    let row: Vec<f64> = lines.next().unwrap().split(',').map(|s| s.parse().unwrap()).collect();
    assert!((row[0] + 0.7).abs() < 1e-12);
    assert!((row[1] - 3f64.ln()).abs() < 1e-12);
    assert_eq!(row[5], 10.0);
}

#[test]
fn environment_overrides_configuration() {
    let o = run(ambit(&["exponents", "--max-order", "2"]).env("AMBIT_SCALING__TAU2", "0.3"));
    assert!(o.status.success());
    assert!(stdout(&o).contains("\n1,1,0.300000000000\n"), "{}", stdout(&o));
    let o = run(ambit(&["exponents"]).env("AMBIT_SCALING__T_SCAL", "0.3"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("ambiguous"));
    let o = run(ambit(&["--seed", "5", "--no-store", "simulate"]).env("AMBIT_CONFIG", fixture()));
    let p = run(ambit(&["--no-store", "simulate"]).env("AMBIT_CONFIG", fixture()).env("AMBIT_SEED", "5"));
    assert!(o.status.success());
    assert_eq!(o.stdout, p.stdout);
}

#[test]
fn volume_and_correlate_tables() {
    let o = run(&mut ambit(&["volume", "--dt", "0.1"]));
    assert_eq!(stdout(&o), "dx,dt,volume\n0,0.100000000000,0.4805170186066791\n");
    let o = run(&mut ambit(&["correlate", "--dx", "1,2", "--orders", "1,2"]));
    let out = stdout(&o);
    assert!(out.starts_with("dx,dt,analytic\n"));
    assert_eq!(out.lines().count(), 3);
    let o = run(&mut ambit(&["appendix", "--orders", "2", "--ratios", "10", "--samples", "1000"]));
    assert!(stdout(&o).starts_with("n,l,Fn,stderr,bound\n2,10.0000000000,"));
    assert!(stdout(&o).contains("n,l,error_bound\n"));
}

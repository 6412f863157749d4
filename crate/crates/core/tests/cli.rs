use std::fs;
use std::path::Path;

use hessloc::cli::{
    parse_config, parse_config_str, run_cli, RunSummary, EXIT_CONFIG, EXIT_IO, EXIT_OK,
};
use hessloc::sim::builtin_scenario;
use hessloc::Error;

fn run(args: &[&str]) -> i32 {
    run_cli(std::iter::once("hessloc").chain(args.iter().copied()))
}

fn minimal_config(hessian: &str) -> String {
    format!(
        r#"{{
  "m": 2,
  "field": {{
    "c1": 3.0,
    "hessian": {hessian},
    "extremum": {{ "axes": [ {{ "offset": 1.0, "terms": [] }}, {{ "offset": 2.0, "terms": [] }} ] }}
  }},
  "agent": {{ "axes": [
    {{ "offset": 0.0, "terms": [ {{ "amplitude": 1.0, "freq": 1.0, "phase": 0.0 }} ] }},
    {{ "offset": 0.0, "terms": [ {{ "amplitude": 1.0, "freq": 1.5, "phase": 0.5 }} ] }}
  ] }},
  "t_end": 5.0
}}"#
    )
}

#[test]
fn scenario_run_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d");
    let code = run(&[
        "--scenario", "scenario1", "--out", out.to_str().unwrap(), "--t-end", "20",
    ]);
    assert_eq!(code, EXIT_OK);

    let summary: RunSummary =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary.config.t_end, Some(20.0));
    assert_eq!(summary.samples, 20_001);

    let pe: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("pe.json")).unwrap()).unwrap();
    assert!(pe["alpha1"].as_f64().unwrap() > 0.0);
    assert_eq!(pe["window"].as_f64(), Some(10.0));

    let mut rdr = csv::Reader::from_path(out.join("trace.csv")).unwrap();
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header.first().map(String::as_str), Some("t"));
    assert_eq!(header.last().map(String::as_str), Some("residual"));
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), summary.samples);
    let last_t: f64 = rows.last().unwrap()[0].parse().unwrap();
    assert!((last_t - 20.0).abs() < 1e-9);
}

#[test]
fn all_scenarios_get_their_own_directory() {
    let dir = tempfile::tempdir().unwrap();
    let code = run(&[
        "--scenario", "all", "--out", dir.path().to_str().unwrap(), "--t-end", "11",
        "--record-every", "100",
    ]);
    assert_eq!(code, EXIT_OK);
    for name in hessloc::sim::BUILTIN_SCENARIOS {
        for f in ["trace.csv", "summary.json", "pe.json"] {
            assert!(dir.path().join(name).join(f).is_file(), "{name}/{f}");
        }
    }
}

#[test]
fn missing_config_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    assert_eq!(
        run(&["--config", missing.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]),
        EXIT_IO
    );
}

#[test]
fn non_dominant_hessian_is_rejected() {
    let text = minimal_config("[[1.0, 1.0], [1.0, 1.0]]");
    let err = parse_config_str(&text).unwrap_err();
    let msg = err.to_string();
    assert!(matches!(err, Error::Config { .. }));
    assert!(msg.contains("field.hessian"), "{msg}");
    assert!(msg.contains("dominance"), "{msg}");

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, &text).unwrap();
    let out = dir.path().join("out");
    assert_eq!(
        run(&["--config", path.to_str().unwrap(), "--out", out.to_str().unwrap()]),
        EXIT_CONFIG
    );
    assert!(!out.join("trace.csv").exists());
}

#[test]
fn omitted_fields_take_defaults() {
    let cfg = parse_config_str(&minimal_config("[[1.0, 0.5], [0.5, 2.0]]")).unwrap();
    assert_eq!(cfg.dt, 1e-3);
    assert_eq!(cfg.a, 0.5);
    assert_eq!(cfg.gamma, 1.0);
    assert_eq!(cfg.projection.delta, 0.05);
    assert_eq!(cfg.projection.eps_diag, 0.01);
    assert_eq!(cfg.seed, 0);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    fs::write(&path, minimal_config("[[1.0, 0.5], [0.5, 2.0]]")).unwrap();
    let out = dir.path().join("out");
    assert_eq!(
        run(&["--config", path.to_str().unwrap(), "--out", out.to_str().unwrap(), "--pe-window", "2"]),
        EXIT_OK
    );
    let echoed: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(echoed["config"]["dt"].as_f64(), Some(1e-3));
}

#[test]
fn unknown_keys_report_their_path() {
    let text = minimal_config("[[1.0, 0.0], [0.0, 1.0]]").replace("\"c1\"", "\"c2\": 1.0, \"c1\"");
    let msg = parse_config_str(&text).unwrap_err().to_string();
    assert!(msg.contains("field"), "{msg}");
    assert!(msg.contains("c2"), "{msg}");

    let text = minimal_config("[[1.0, 0.0], [0.0, 1.0]]").replace("\"t_end\"", "\"tend\": 1, \"t_end\"");
    assert!(parse_config_str(&text).unwrap_err().to_string().contains("tend"));
}

#[test]
fn wrong_dimensions_are_config_errors() {
    let text = minimal_config("[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]");
    let err = parse_config_str(&text).unwrap_err();
    assert_eq!(hessloc::cli::exit_code(&err), EXIT_CONFIG);
}

#[test]
fn builtin_round_trips_through_json() {
    for name in hessloc::sim::BUILTIN_SCENARIOS {
        let mut cfg = builtin_scenario(name).unwrap();
        cfg.resolve_defaults().unwrap();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        assert_eq!(parse_config_str(&text).unwrap(), cfg, "{name}");
    }
}

#[test]
fn config_file_matches_string_parse() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    let text = minimal_config("[[2.0, -1.0], [-1.0, 2.0]]");
    fs::write(&path, &text).unwrap();
    assert_eq!(parse_config(&path).unwrap(), parse_config_str(&text).unwrap());
}

fn parse_rows(path: &Path) -> Vec<Vec<f64>> {
    csv::Reader::from_path(path)
        .unwrap()
        .records()
        .map(|r| r.unwrap().iter().map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn trace_values_round_trip_exactly() {
    let mut cfg = builtin_scenario("scenario2").unwrap();
    cfg.t_end = Some(3.0);
    let trace = hessloc::sim::run_scenario(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    hessloc::cli::write_trace_csv(&trace, &path, true).unwrap();
    let rows = parse_rows(&path);
    assert_eq!(rows.len(), trace.len());
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row[0].to_bits(), trace.t[i].to_bits());
        assert_eq!(row[3].to_bits(), trace.f_true[i].to_bits());
        assert_eq!(row[4].to_bits(), trace.f_meas[i].to_bits());
        for (a, b) in row[6..11].iter().zip(trace.phi_at(i)) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(row.last().unwrap().to_bits(), trace.residual[i].to_bits());
    }
}

#[test]
fn cli_overrides_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (out, seed) in [(&a, "1"), (&b, "2")] {
        assert_eq!(
            run(&["--scenario", "scenario2", "--seed", seed, "--t-end", "12", "--out", out.to_str().unwrap()]),
            EXIT_OK
        );
    }
    assert_ne!(
        fs::read(a.join("trace.csv")).unwrap(),
        fs::read(b.join("trace.csv")).unwrap()
    );
}

#[test]
fn bad_arguments_exit_with_config_code() {
    assert_eq!(run(&["--scenario", "nope"]), EXIT_CONFIG);
    assert_eq!(run(&["--bogus"]), EXIT_CONFIG);
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        run(&["--scenario", "scenario1", "--t-end", "5", "--pe-window", "10", "--out", dir.path().to_str().unwrap()]),
        EXIT_CONFIG
    );
}

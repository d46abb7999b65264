use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use zipcast_core::codec::{BackendSpec, SYMBOL_BASE};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn zipcast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zipcast"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn periodic_fixture_forecast_writes_h_values() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("f.json");
    let res = zipcast(&[
        "forecast",
        "--config",
        s(&fixture("periodic.toml")),
        "--input",
        s(&fixture("periodic.csv")),
        "--output",
        s(&out),
    ]);
    assert!(res.status.success(), "{}", stderr(&res));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let values: Vec<f64> = serde_json::from_value(json["values"].clone()).unwrap();
    assert_eq!(values, vec![0.0, 1.0, 2.0, 3.0]);
    assert_eq!(json["per_step_distributions"].as_array().unwrap().len(), 4);
}

#[test]
fn horizon_over_cap_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let res = zipcast(&[
        "forecast",
        "--config",
        s(&fixture("periodic.toml")),
        "--input",
        s(&fixture("periodic.csv")),
        "--output",
        s(&dir.path().join("f.json")),
        "--horizon",
        "12",
        "--split",
        "1",
    ]);
    assert_eq!(res.status.code(), Some(3));
    let err = stderr(&res);
    assert_eq!(err.lines().count(), 1);
    assert!(err.starts_with("zipcast: error[cap]: "), "{err}");
}

#[test]
fn binary_example_reports_top_suffix_10() {
    let dir = tempfile::tempdir().unwrap();
    let res = zipcast(&[
        "forecast",
        "--config",
        s(&fixture("binary.toml")),
        "--input",
        s(&fixture("binary.csv")),
        "--output",
        s(&dir.path().join("f.json")),
        "--verbose",
    ]);
    assert!(res.status.success(), "{}", stderr(&res));
    let text = String::from_utf8(res.stdout).unwrap();
    assert!(text.contains("top suffix 10 "), "{text}");
}

#[test]
fn exit_codes_by_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("f.json");

    let missing_output = zipcast(&["forecast", "--input", s(&fixture("periodic.csv"))]);
    assert_eq!(missing_output.status.code(), Some(1));
    assert!(stderr(&missing_output).starts_with("zipcast: error[config]"));

    let unknown = zipcast(&["frobnicate"]);
    assert_eq!(unknown.status.code(), Some(1));
    assert!(stderr(&unknown).starts_with("zipcast: error[usage]"));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "value\n1\nx\n").unwrap();
    let data = zipcast(&["forecast", "--input", s(&bad), "--output", s(&out)]);
    assert_eq!(data.status.code(), Some(2));
    let err = stderr(&data);
    assert!(
        err.starts_with("zipcast: error[data]") && err.contains("line 3"),
        "{err}"
    );

    let bad_backend = zipcast(&[
        "forecast",
        "--input",
        s(&fixture("periodic.csv")),
        "--output",
        s(&out),
        "--backends",
        "gzip",
    ]);
    assert_eq!(bad_backend.status.code(), Some(1));
}

#[test]
fn codelen_table_shape() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec![
        "codelen".to_string(),
        "--backends".into(),
        "ppm,deflate".into(),
    ];
    for (i, body) in [
        "0001110001110001110",
        "0001110001110001100",
        "0001110001110001101",
        "0001110001110001111",
    ]
    .iter()
    .enumerate()
    {
        let p = dir.path().join(format!("c{i}.txt"));
        std::fs::write(&p, body).unwrap();
        args.push("--input".into());
        args.push(p.to_str().unwrap().into());
    }
    let res = Command::new(env!("CARGO_BIN_EXE_zipcast"))
        .args(&args)
        .output()
        .unwrap();
    assert!(res.status.success(), "{}", stderr(&res));
    let text = String::from_utf8(res.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5);
    for line in &lines[1..] {
        assert_eq!(line.split_whitespace().count(), 3, "{line}");
    }

    let empty = zipcast(&["codelen", "--backends", "ppm"]);
    assert_eq!(empty.status.code(), Some(1));
}

#[test]
fn codelen_suffix_rows_match_direct_calls() {
    let dir = tempfile::tempdir().unwrap();
    let history = b"00011100011100011";
    let input = dir.path().join("h.txt");
    let csv = dir.path().join("lengths.csv");
    std::fs::write(&input, history).unwrap();
    let res = zipcast(&[
        "codelen",
        "--input",
        s(&input),
        "--suffix-length",
        "2",
        "--backends",
        "ppm:4,deflate:9,repair",
        "--output",
        s(&csv),
    ]);
    assert!(res.status.success(), "{}", stderr(&res));
    let text = std::fs::read_to_string(&csv).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    let backends: Vec<_> = ["ppm:4", "deflate:9", "repair"]
        .iter()
        .map(|b| b.parse::<BackendSpec>().unwrap().build().unwrap())
        .collect();
    for (index, row) in rows.iter().enumerate() {
        let cells: Vec<&str> = row.split(',').collect();
        let suffix = [(index >> 1) as u8, (index & 1) as u8];
        assert_eq!(cells[0], format!("{}{}", suffix[0], suffix[1]));
        let mut bytes = history.to_vec();
        bytes.extend(suffix.iter().map(|d| SYMBOL_BASE + d));
        for (cell, backend) in cells[1..].iter().zip(&backends) {
            let direct = backend.code_length(&bytes).bits();
            assert_eq!(cell.parse::<f64>().unwrap(), direct);
        }
    }
}

fn run_backtest(dir: &Path, name: &str, jobs: &str) -> (String, String) {
    let out = dir.join(format!("{name}.json"));
    let res = zipcast(&[
        "backtest",
        "--config",
        s(&fixture("synthetic.toml")),
        "--output",
        s(&out),
        "--jobs",
        jobs,
    ]);
    assert!(res.status.success(), "{}", stderr(&res));
    (
        std::fs::read_to_string(&out).unwrap(),
        std::fs::read_to_string(out.with_extension("txt")).unwrap(),
    )
}

#[test]
fn backtest_then_compare_with_actuals_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let (json, table) = run_backtest(dir.path(), "report", "2");
    for method in ["mixture", "deflate:9", "ppm:4", "repair", "last-value"] {
        assert!(table.contains(method), "{table}");
    }
    let report: serde_json::Value = serde_json::from_str(&json).unwrap();
    let origins = report["origins"].as_array().unwrap();
    assert_eq!(origins.len(), 5);

    let baseline = dir.path().join("baseline.csv");
    let mut csv = String::from("origin,step,value\n");
    for (o, actual) in origins.iter().zip(report["actuals"].as_array().unwrap()) {
        for (j, v) in actual.as_array().unwrap().iter().enumerate() {
            csv.push_str(&format!("{},{},{}\n", o, j + 1, v));
        }
    }
    std::fs::write(&baseline, csv).unwrap();
    let cmp_out = dir.path().join("cmp.json");
    let res = zipcast(&[
        "compare",
        "--input",
        s(&dir.path().join("report.json")),
        "--baseline",
        s(&baseline),
        "--output",
        s(&cmp_out),
    ]);
    assert!(res.status.success(), "{}", stderr(&res));
    let cmp: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&cmp_out).unwrap()).unwrap();
    let base = &cmp["rows"][0];
    assert_eq!(base["name"], "baseline");
    for v in base["mae_by_horizon"].as_array().unwrap() {
        assert_eq!(v.as_f64().unwrap(), 0.0);
    }
}

#[test]
fn reports_identical_across_job_counts() {
    let dir = tempfile::tempdir().unwrap();
    let first = run_backtest(dir.path(), "a", "1");
    for (i, jobs) in ["1", "3", "8"].iter().enumerate() {
        let again = run_backtest(dir.path(), &format!("b{i}"), jobs);
        assert_eq!(first, again, "--jobs {jobs}");
    }
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn netprice(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netprice"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn records(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let header = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows = rdr
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn write_network(dir: &Path, name: &str, json: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, json).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn uniform_price_path_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("path.csv");
    let out = netprice(&[
        "price-path", "--mode", "uniform", "--gamma", "0.8", "--rounds", "13", "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = fs::read_to_string(&out_path).unwrap();
    assert!(text.starts_with("# generated unix="));
    let (header, rows) = records(&text);
    assert_eq!(header, ["round", "t_remaining", "price", "adoption_g1"]);
    assert_eq!(rows.len(), 13);
    let first: f64 = rows[0][2].parse().unwrap();
    let last: f64 = rows[12][2].parse().unwrap();
    assert!(last > first);
    // Only the output file is left behind.
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn reruns_are_byte_identical_without_timestamp() {
    let args = ["simulate", "--gamma", "0.5", "--rounds", "3", "--n", "2000", "--reps", "4", "--seed", "9", "--no-header"];
    let a = netprice(&args);
    let b = netprice(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert!(!stdout(&a).contains("# generated"));
}

#[test]
fn thread_count_does_not_change_results() {
    let args = ["simulate", "--gamma", "0.5", "--rounds", "3", "--n-list", "500,2000", "--reps", "6", "--no-header"];
    let one = Command::new(env!("CARGO_BIN_EXE_netprice"))
        .args(args)
        .env("NETPRICE_THREADS", "1")
        .output()
        .unwrap();
    let many = Command::new(env!("CARGO_BIN_EXE_netprice"))
        .args(args)
        .env("NETPRICE_THREADS", "4")
        .output()
        .unwrap();
    assert!(one.status.success());
    assert_eq!(one.stdout, many.stdout);
    let (header, rows) = records(&stdout(&one));
    assert_eq!(header[0], "n");
    assert_eq!(rows.len(), 2);
}

#[test]
fn twelve_significant_digits() {
    let out = netprice(&["price-path", "--mode", "uniform", "--gamma", "1", "--rounds", "2", "--no-header"]);
    let (_, rows) = records(&stdout(&out));
    assert_eq!(rows[0][2], "0.333333333333");
    assert_eq!(rows[1][2], "0.666666666667");
}

#[test]
fn failing_assumption_exits_two_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let net = write_network(dir.path(), "bad.json", r#"{"alpha": [1.0], "E": [[2.0]]}"#);
    let out = netprice(&["price-path", "--mode", "block", "--network", &net, "--rounds", "3"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("s_sum"), "{err}");
    assert!(out.stdout.is_empty());

    let check = netprice(&["check", "--network", &net]);
    assert_eq!(check.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&check.stderr).contains("\"passed\": false"));
}

#[test]
fn missing_parameters_exit_two() {
    assert_eq!(netprice(&["price-path", "--mode", "uniform", "--rounds", "3"]).status.code(), Some(2));
    assert_eq!(netprice(&["price-path", "--mode", "uniform", "--gamma", "0.5"]).status.code(), Some(2));
    assert_eq!(netprice(&["price-path", "--mode", "uniform", "--gamma", "1.5", "--rounds", "2"]).status.code(), Some(2));
    assert_eq!(netprice(&["sweep", "--gamma", "0.5", "--rounds", "0..3"]).status.code(), Some(2));
    assert_eq!(netprice(&["bogus"]).status.code(), Some(2));
}

#[test]
fn failed_run_leaves_no_partial_file() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("x.csv");
    let out = netprice(&["price-path", "--mode", "uniform", "--gamma", "3", "--rounds", "2", "--out", target.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!target.exists());
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn check_passes_and_reports_measures() {
    let dir = tempfile::tempdir().unwrap();
    let net = write_network(dir.path(), "n.json", r#"{"alpha": [0.5, 0.5], "E": [[1.0, 0.2], [0.2, 1.0]]}"#);
    let out = netprice(&["check", "--network", &net, "--dist", "uniform"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["passed"], true);
    let s = v["measures"]["s_sum"].as_f64().unwrap();
    assert!((s - 2.0 / 1.2).abs() < 1e-12);
}

#[test]
fn json_output_for_block_and_discrimination() {
    let dir = tempfile::tempdir().unwrap();
    let net = write_network(dir.path(), "n.json", r#"{"alpha": [0.5, 0.5], "E": [[1.0, 0.2], [0.2, 1.0]]}"#);
    let out = netprice(&["price-path", "--mode", "block", "--network", &net, "--rounds", "4", "--format", "json"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["path"].as_array().unwrap().len(), 4);

    let out = netprice(&["price-path", "--mode", "discriminate", "--network", &net, "--rounds", "2", "--no-header"]);
    assert!(out.status.success());
    let (header, rows) = records(&stdout(&out));
    assert_eq!(&header[..4], ["round", "t_remaining", "price_g1", "price_g2"]);
    let sum: f64 = rows[0][2].parse::<f64>().unwrap() + rows[1][2].parse::<f64>().unwrap();
    assert!((sum - 1.0).abs() < 1e-11);
}

#[test]
fn nonuniform_with_table_distribution() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("sq.csv");
    let mut text = String::from("v,F,f\n");
    for i in 0..=20 {
        let v = i as f64 / 20.0;
        text.push_str(&format!("{v},{},{}\n", v * v, 2.0 * v));
    }
    fs::write(&table, text).unwrap();
    let spec = format!("table:{}", table.display());
    let a = netprice(&["price-path", "--mode", "nonuniform", "--gamma", "0.5", "--rounds", "2", "--dist", &spec, "--no-header"]);
    let b = netprice(&["price-path", "--mode", "nonuniform", "--gamma", "0.5", "--rounds", "2", "--dist", "power:2", "--no-header"]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let (_, ra) = records(&stdout(&a));
    let (_, rb) = records(&stdout(&b));
    for (x, y) in ra.iter().zip(&rb) {
        let (x, y): (f64, f64) = (x[2].parse().unwrap(), y[2].parse().unwrap());
        assert!((x - y).abs() < 1e-9);
    }
}

#[test]
fn nocommit_and_allsales() {
    let out = netprice(&["price-path", "--mode", "nocommit", "--gamma", "0.5", "--no-header"]);
    assert!(out.status.success());
    let (header, rows) = records(&stdout(&out));
    assert_eq!(header, ["round", "t_remaining", "price", "threshold"]);
    assert_eq!(rows.len(), 2);

    let out = netprice(&["price-path", "--mode", "allsales", "--gamma", "0.5", "--rounds", "4", "--limit", "--format", "json"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["infinite_horizon_revenue"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert!((v["normalized_revenue"].as_f64().unwrap() - 0.25 * (1.0 - 0.0625) / 0.5).abs() < 1e-12);
}

#[test]
fn sweep_paths_and_revenue() {
    let out = netprice(&["sweep", "--gamma", "0.2,0.8", "--rounds", "1..=4", "--no-header"]);
    let (header, rows) = records(&stdout(&out));
    assert_eq!(header, ["gamma", "T", "revenue", "welfare", "first_price", "last_price", "slope"]);
    assert_eq!(rows.len(), 8);
    let out = netprice(&["sweep", "--gamma", "0.5", "--rounds", "3,5", "--paths", "--no-header"]);
    let (header, rows) = records(&stdout(&out));
    assert_eq!(header, ["gamma", "T", "round", "t_remaining", "price", "step"]);
    assert_eq!(rows.len(), 8);
    assert_eq!(rows[0][5], "");
}

#[test]
fn compare_networks_ordering() {
    let out = netprice(&["compare-networks", "--rounds", "2..4", "--no-header"]);
    assert!(out.status.success());
    let (_, rows) = records(&stdout(&out));
    assert_eq!(rows.len(), 9);
    for t in ["2", "3", "4"] {
        let rev = |fam: &str| -> f64 {
            rows.iter().find(|r| r[0] == fam && r[1] == t).unwrap()[2].parse().unwrap()
        };
        assert!(rev("star") > rev("chain") && rev("chain") > rev("ring"));
    }
}

#[test]
fn oracle_commands() {
    let out = netprice(&["oracle", "--kind", "uniform", "--gamma", "0.5", "--rounds", "3", "--no-header"]);
    assert!(out.status.success());
    let (header, rows) = records(&stdout(&out));
    assert_eq!(header, ["quantity", "closed_form", "oracle", "abs_diff"]);
    assert_eq!(rows.len(), 4);
    for r in &rows {
        assert!(r[3].parse::<f64>().unwrap() < 1e-5);
    }

    let out = netprice(&["oracle", "--kind", "example1", "--no-header"]);
    let (header, rows) = records(&stdout(&out));
    assert_eq!(header, ["field", "value"]);
    let rev = rows.iter().find(|r| r[0] == "expected_revenue").unwrap();
    assert_eq!(rev[1], "0.8544");

    let out = netprice(&["oracle", "--kind", "kkt", "--gamma", "0.5", "--rounds", "3", "--format", "json"]);
    assert!(out.status.success());
    let out = netprice(&["oracle", "--kind", "hessian", "--objective", "uniform", "--gamma", "0.5", "--rounds", "4", "--format", "json"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["passed"], true);
    let out = netprice(&["oracle", "--kind", "two-buyer", "--gamma", "0.6", "--grid", "201", "--format", "json"]);
    assert!(out.status.success());
}

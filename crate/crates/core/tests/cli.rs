use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn hetcache(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hetcache")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn example1(dir: &TempDir) -> PathBuf {
    write(dir, "ex1.json", r#"{"K":3,"N":3,"rates":[0.2,0.3,0.8],"memories":[0.1,0.2,0.6]}"#)
}

fn budget(dir: &TempDir, m: f64) -> PathBuf {
    write(dir, &format!("b{m}.json"), &format!(r#"{{"K":3,"N":3,"rates":[0.5,0.7,1.0],"budget":{m}}}"#))
}

fn csv_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines().skip(1).map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect()
}

#[test]
fn solve_prints_the_optimal_load() {
    let dir = TempDir::new().unwrap();
    let inst = example1(&dir);
    let o = hetcache(&["solve", s(&inst)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("load = 0.200000\n"), "{}", stdout(&o));

    let o = hetcache(&["solve", s(&inst), "--mode", "intra"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("load = 0.216667\n"), "{}", stdout(&o));
}

#[test]
fn solve_writes_scheme_and_lp() {
    let dir = TempDir::new().unwrap();
    let inst = example1(&dir);
    let scheme = dir.path().join("scheme.json");
    let lp = dir.path().join("model.lp");
    let o = hetcache(&["solve", s(&inst), "--out", s(&scheme), "--dump-lp", s(&lp)]);
    assert_eq!(o.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&scheme).unwrap()).unwrap();
    assert!((json["objective"].as_f64().unwrap() - 0.2).abs() < 1e-6);
    assert!(!std::fs::read_to_string(&lp).unwrap().is_empty());
}

#[test]
fn zero_budget_costs_the_sum_of_rates() {
    let dir = TempDir::new().unwrap();
    let o = hetcache(&["solve", s(&budget(&dir, 0.0))]);
    assert!(stdout(&o).starts_with("load = 2.200000\n"));
}

#[test]
fn sweep_endpoints_and_corners() {
    let dir = TempDir::new().unwrap();
    let inst = budget(&dir, 1.0);
    let o = hetcache(&["sweep", s(&inst), "--points", "2", "--no-corners"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("m_tot,lp_load,theorem1_load,cutset,m_1,m_2,m_3\n"));
    assert!(text.ends_with('\n') && !text.contains('\r'));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 2);
    assert!((rows[0][0] - 0.0).abs() < 1e-12 && (rows[0][1] - 2.2).abs() < 1e-6);
    assert!((rows[1][0] - 2.2).abs() < 1e-12 && rows[1][1].abs() < 1e-6);

    let o = hetcache(&["sweep", s(&inst), "--points", "2", "--jobs", "2"]);
    let rows = csv_rows(&stdout(&o));
    let corners = [(0.5, 1.2), (0.7, 0.9), (1.0, 0.6), (1.5, 0.8 / 3.0), (1.7, 0.5 / 3.0)];
    assert_eq!(rows.len(), 7);
    for (m, load) in corners {
        let row = rows.iter().find(|r| (r[0] - m).abs() < 1e-9).expect("corner present");
        assert!((row[1] - load).abs() < 1e-6 && (row[2] - load).abs() < 1e-9);
        assert!(row[3] <= row[1] + 1e-8);
    }
}

#[test]
fn sweep_json_and_file_output() {
    let dir = TempDir::new().unwrap();
    let inst = budget(&dir, 1.0);
    let out = dir.path().join("sweep.json");
    let o = hetcache(&["sweep", s(&inst), "--points", "3", "--format", "json", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0));
    let rows: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(rows.as_array().unwrap().len() >= 3);
    assert!(rows[0]["allocation"].as_array().unwrap().len() == 3);
}

#[test]
fn sweep_rejects_fixed_memories() {
    let dir = TempDir::new().unwrap();
    assert_eq!(hetcache(&["sweep", s(&example1(&dir))]).status.code(), Some(2));
}

#[test]
fn compare_orders_joint_below_baselines() {
    let dir = TempDir::new().unwrap();
    let inst = write(&dir, "c.json", r#"{"K":3,"N":3,"rates":[0.5,0.8,1.0],"memories":[0,0,0]}"#);
    let o = hetcache(&["compare-baselines", s(&inst), "--points", "6"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("m_tot,joint_o2,pca,oca,cutset_fixed\n"));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 6);
    for r in rows {
        assert!(r[1] <= r[2] + 1e-8 && r[1] <= r[3] + 1e-8, "{r:?}");
        assert!(r[4] <= r[1] + 1e-8);
    }
}

#[test]
fn compare_with_equal_rates_and_unit_ratio_reaches_closed_form() {
    let dir = TempDir::new().unwrap();
    let inst = write(&dir, "u.json", r#"{"K":3,"N":3,"rates":[1,1,1],"memories":[0,0,0]}"#);
    let o = hetcache(&["compare-baselines", s(&inst), "--ratio", "1", "--points", "4", "--format", "json"]);
    let rows: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    // single-layer closed form: corners (0,3), (1,1), (2,1/3), (3,0)
    for (row, want) in rows.as_array().unwrap().iter().zip([3.0, 1.0, 1.0 / 3.0, 0.0]) {
        assert!((row["joint_o2"].as_f64().unwrap() - want).abs() < 1e-6, "{row}");
    }
}

#[test]
fn bounds_prints_both_forms() {
    let dir = TempDir::new().unwrap();
    let o = hetcache(&["bounds", s(&budget(&dir, 0.2))]);
    let text = stdout(&o);
    assert!(text.contains("bound = 1.600000"), "{text}");
    assert!(text.contains("closed_form = 1.600000"));
    let o = hetcache(&["bounds", s(&example1(&dir)), "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["bound"].as_f64().unwrap() <= 0.2 + 1e-9);
    assert!(v["closed_form"].is_null());
}

#[test]
fn verify_passes_and_writes_report() {
    let dir = TempDir::new().unwrap();
    let report = dir.path().join("report.json");
    let o = hetcache(&["verify", s(&example1(&dir)), "--file-size", "1000", "--seed", "3", "--out", s(&report)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("PASS\n"));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["passed"], true);
    assert_eq!(v["users"].as_array().unwrap().len(), 3);
}

#[test]
fn verify_flags_a_tampered_scheme() {
    let dir = TempDir::new().unwrap();
    let inst = example1(&dir);
    let scheme = dir.path().join("scheme.json");
    assert_eq!(hetcache(&["solve", s(&inst), "--out", s(&scheme)]).status.code(), Some(0));
    let mut json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&scheme).unwrap()).unwrap();
    json["objective"] = serde_json::json!(0.1);
    std::fs::write(&scheme, json.to_string()).unwrap();
    let o = hetcache(&["verify", s(&inst), "--scheme", s(&scheme)]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stdout(&o).starts_with("FAIL\n"));
}

#[test]
fn invalid_input_exits_with_two() {
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "bad.json", r#"{"K":3,"N":3,"rates":[0.2,0.3,0.8],"memories":[0.3,0.2,0.6]}"#);
    assert_eq!(hetcache(&["solve", s(&bad)]).status.code(), Some(2));
    let garbled = write(&dir, "garbled.json", "{not json");
    assert_eq!(hetcache(&["solve", s(&garbled)]).status.code(), Some(2));
    assert_eq!(hetcache(&["solve", "/nonexistent/instance.json"]).status.code(), Some(2));
    assert_eq!(hetcache(&["solve"]).status.code(), Some(2));
    assert_eq!(hetcache(&["verify", s(&example1(&dir)), "--file-size", "0"]).status.code(), Some(2));
}

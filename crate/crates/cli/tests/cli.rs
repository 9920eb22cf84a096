use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use nbp_core::harness::{parse_estimate_json, parse_vp_report_csv, VP_CSV_COLUMNS};

const SHIFT: &str = r#"
[system]
kind = "shift"
alphabet_size = 2

[potential]
kind = "additive"
values = [0.0, 0.6931471805599453]

[measure]
kind = "bernoulli"
p = [0.5, 0.5]

[run]
epsilon = [0.1, 0.2, 0.3]
min_order = 8
samples = 16
n_max = 60
family_grid = 4
refine_rounds = 1
s = [1.1, 1.3]
"#;

fn nbp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nbp")).args(args).output().expect("binary runs")
}

fn setup(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn ok(o: &Output) {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn pressure_writes_estimate_and_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), SHIFT);
    let out = dir.path().join("out");
    let o = nbp(&["pressure", "--config", &cfg, "--eps", "0.25", "--bigN", "12", "--out", out.to_str().unwrap()]);
    ok(&o);
    let est = parse_estimate_json(&fs::read_to_string(out.join("estimate.json")).unwrap()).unwrap();
    assert_eq!(est.len(), 1);
    assert_eq!(est[0].min_order, 12);
    let expected = 3f64.ln() + 0.25 * 2f64.ln();
    assert!((est[0].critical_s - expected).abs() < 1e-8, "{}", est[0].critical_s);
    let table = fs::read_to_string(out.join("pressure.csv")).unwrap();
    assert!(table.starts_with("epsilon,N,D_max,critical_s,bracket_lo,bracket_hi\n"));
}

#[test]
fn json_format_skips_csv_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), SHIFT);
    let out = dir.path().join("out");
    ok(&nbp(&["katok", "--config", &cfg, "--format", "json", "--out", out.to_str().unwrap()]));
    assert!(out.join("katok.json").exists());
    assert!(!out.join("katok.csv").exists());
}

#[test]
fn vp_check_is_deterministic_and_has_the_published_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), SHIFT);
    let run = |name: &str| {
        let out = dir.path().join(name);
        ok(&nbp(&["vp-check", "--config", &cfg, "--seed", "7", "--out", out.to_str().unwrap()]));
        (
            fs::read(out.join("vp_report.csv")).unwrap(),
            fs::read(out.join("vp_report.json")).unwrap(),
        )
    };
    let a = run("a");
    assert_eq!(a, run("b"));
    let header = String::from_utf8(a.0.clone()).unwrap();
    assert_eq!(header.lines().next().unwrap(), VP_CSV_COLUMNS.join(","));
    let rows = parse_vp_report_csv(a.0.as_slice()).unwrap();
    assert_eq!(rows.len(), 3);
    for r in &rows {
        let (c, k, b) = (r.cover_s.unwrap(), r.katok_s.unwrap(), r.bk_mean.unwrap());
        assert_eq!(r.gap_ck, Some(c - k));
        assert_eq!(r.gap_cb, Some(c - b));
    }
}

#[test]
fn bk_writes_traces() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), SHIFT);
    let out = dir.path().join("out");
    ok(&nbp(&["bk", "--config", &cfg, "--eps", "0.1", "--out", out.to_str().unwrap()]));
    let traces = fs::read_to_string(out.join("bk_traces.csv")).unwrap();
    assert!(traces.starts_with("point,epsilon,n,quotient\n"));
    // 8 traces, every order from N = 8 to 60
    assert_eq!(traces.lines().count(), 1 + 8 * 53);
}

#[test]
fn weighted_and_frostman_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), SHIFT);
    let out = dir.path().join("out");
    let o = out.to_str().unwrap();
    ok(&nbp(&["weighted", "--config", &cfg, "--out", o]));
    let sandwich = fs::read_to_string(out.join("sandwich.csv")).unwrap();
    assert_eq!(sandwich.lines().count(), 1 + 3 * 2);
    ok(&nbp(&["frostman", "--config", &cfg, "--eps", "0.2", "--out", o]));
    let summary = fs::read_to_string(out.join("frostman.csv")).unwrap();
    let row = summary.lines().nth(1).unwrap();
    assert!(row.contains(",0,frostman_"), "{row}");
    let tree = fs::read_to_string(out.join("frostman_eps0.2_s1.1.csv")).unwrap();
    let t = nbp_core::frostman::read_tree_csv(tree.as_bytes(), 2).unwrap();
    t.check_conservation().unwrap();
}

#[test]
fn baselines_listing_and_unknown_family() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), SHIFT);
    let out = dir.path().join("out");
    let o = out.to_str().unwrap();
    let all = nbp(&["baselines", "--config", &cfg, "--out", o]);
    ok(&all);
    let text = String::from_utf8_lossy(&all.stdout);
    assert!(text.contains("shift-pressure") && !text.contains("circle-entropy"));
    let bad = nbp(&["baselines", "--config", &cfg, "--family", "nope", "--out", o]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("unknown baseline family"));
}

#[test]
fn bad_inputs_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = out.to_str().unwrap();
    let cfg = setup(dir.path(), "[system]\nkind = \"shift\"\nalphabet_size = 2\ncolour = 1\n");
    let r = nbp(&["pressure", "--config", &cfg, "--out", o]);
    assert!(!r.status.success());
    let cfg = setup(dir.path(), SHIFT.replace("s = [1.1, 1.3]", "").as_str());
    let r = nbp(&["weighted", "--config", &cfg, "--out", o]);
    assert!(String::from_utf8_lossy(&r.stderr).contains("run.s"));
    let cfg = setup(dir.path(), "[system]\nkind = \"shift\"\nalphabet_size = 2\n");
    let r = nbp(&["katok", "--config", &cfg, "--out", o]);
    assert!(String::from_utf8_lossy(&r.stderr).contains("[measure]"));
}

#[test]
fn distortion_verdict_for_an_additive_potential() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), SHIFT);
    let out = dir.path().join("out");
    let r = nbp(&["distortion", "--config", &cfg, "--out", out.to_str().unwrap()]);
    ok(&r);
    assert_eq!(String::from_utf8_lossy(&r.stdout).trim(), "tempered (exact)");
}

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_avery-sim"))
}

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(rel)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn assert_single_error(o: &Output, code: &str, exit: i32) {
    assert_eq!(o.status.code(), Some(exit), "stderr: {}", stderr(o));
    let err = stderr(o);
    let lines: Vec<&str> = err.lines().collect();
    assert_eq!(lines.len(), 1, "{err}");
    assert!(lines[0].starts_with(&format!("ERROR {code}: ")), "{err}");
}

#[test]
fn derive_threshold_prints_value() {
    let o = bin().args(["derive-threshold", "--size-mb", "2.92", "--pps", "0.5"]).output().unwrap();
    assert!(o.status.success());
    assert_eq!(String::from_utf8(o.stdout).unwrap(), "11.68\n");
}

#[test]
fn validate_lut_prints_tiers_and_rejects_bad_tables() {
    let o = bin().arg("validate-lut").arg(data("table1.lut.json")).output().unwrap();
    assert!(o.status.success());
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(out.contains("HighAccuracy") && out.contains("84.42") && out.contains("11.68"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.lut.json");
    let text = std::fs::read_to_string(data("table1.lut.json")).unwrap().replace("1.35", "3.50");
    std::fs::write(&bad, text).unwrap();
    let o = bin().arg("validate-lut").arg(&bad).output().unwrap();
    assert_single_error(&o, "E_LUT", 1);
}

#[test]
fn run_writes_outputs_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .arg("run")
        .arg(data("examples/static_high_accuracy.scenario.json"))
        .arg("--out")
        .arg(dir.path())
        .arg("--plot")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert_eq!(lines.next(), Some("policy,goal,avg_iou,avg_pps,total_energy_j,switches"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "StaticHighAccuracy");
    assert_eq!(row[2], "82.770000");
    let pps: f64 = row[3].parse().unwrap();
    assert!((pps - 0.642).abs() <= 0.01);
    let timeline = std::fs::read_to_string(dir.path().join("timeline.csv")).unwrap();
    assert!(timeline.starts_with("t_s,event,stream,tier,dataset,packet_id,size_mb,bandwidth_mbps,target_pps,energy_j\n"));
    for chart in ["bandwidth.svg", "tiers.svg", "accuracy.svg", "throughput.svg"] {
        let svg = std::fs::read_to_string(dir.path().join(chart)).unwrap();
        assert!(svg.starts_with("<svg") && !svg.contains("href"), "{chart}");
    }
}

#[test]
fn missing_lut_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(data("examples/static_balanced.scenario.json"))
        .unwrap()
        .replace("../table1.lut.json", "nowhere.lut.json");
    let scenario = dir.path().join("s.scenario.json");
    std::fs::write(&scenario, text).unwrap();
    let out = dir.path().join("out");
    let o = bin().arg("run").arg(&scenario).arg("--out").arg(&out).output().unwrap();
    assert_single_error(&o, "E_IO", 1);
    assert!(!out.exists(), "nothing written before inputs are validated");
}

#[test]
fn malformed_inputs_exit_one() {
    let o = bin().args(["sweep", "8..20", "--step", "0"]).output().unwrap();
    assert_single_error(&o, "E_ARGS", 1);
    let o = bin().args(["launch"]).output().unwrap();
    assert_single_error(&o, "E_ARGS", 1);

    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, "{ not json").unwrap();
    let o = bin().arg("run").arg(&broken).output().unwrap();
    assert_single_error(&o, "E_PARSE", 1);

    let short = dir.path().join("short.json");
    std::fs::write(
        &short,
        r#"{"duration_s": 100.0, "trace": {"segments": [{"duration_s": 50.0, "kind": "Constant", "level": 12.0}]}}"#,
    )
    .unwrap();
    let o = bin().arg("run").arg(&short).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert_single_error(&o, "E_SCENARIO", 1);
}

#[test]
fn help_and_version_exit_zero() {
    assert!(bin().arg("--help").output().unwrap().status.success());
    assert!(bin().arg("--version").output().unwrap().status.success());
}

#[test]
fn gen_trace_round_trips_through_a_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("trace.csv");
    let o = bin().arg("gen-trace").arg(data("ref_accuracy.scenario.json")).arg("--out").arg(&csv).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let scenario = dir.path().join("from_file.json");
    std::fs::write(
        &scenario,
        r#"{"duration_s": 1200.0, "trace": {"file": "trace.csv"}, "insight_schedule": [{"t_s": 0.0, "on": true}]}"#,
    )
    .unwrap();
    let a = dir.path().join("a");
    let o = bin().arg("run").arg(&scenario).arg("--out").arg(&a).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let b = dir.path().join("b");
    let o = bin().arg("run").arg(data("ref_accuracy.scenario.json")).arg("--out").arg(&b).output().unwrap();
    assert!(o.status.success());
    assert_eq!(
        std::fs::read(a.join("summary.csv")).unwrap(),
        std::fs::read(b.join("summary.csv")).unwrap()
    );
}

#[test]
fn every_bundled_example_runs() {
    let dir = tempfile::tempdir().unwrap();
    for entry in std::fs::read_dir(data("examples")).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let o = bin().arg("run").arg(&path).arg("--out").arg(dir.path()).output().unwrap();
            assert!(o.status.success(), "{}: {}", path.display(), stderr(&o));
        }
    }
}

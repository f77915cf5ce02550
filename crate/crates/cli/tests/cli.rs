use std::path::Path;
use std::process::{Command, Output};

use debak_cli::{read_csv, EXIT_CONFIG, EXIT_INVALID, EXIT_SINGULAR, HEADER};

fn debak(args: &[&str], out_dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_debak"))
        .args(args)
        .env("DEBAK_OUT_DIR", out_dir)
        .current_dir(out_dir)
        .output()
        .unwrap()
}

const SHORT_HOVER: [&str; 10] = [
    "--scenario",
    "hover",
    "--set",
    "offset_r1=0.1",
    "--set",
    "offset_r2=0.1",
    "--duration",
    "2",
    "--decimation",
    "5",
];

#[test]
fn simulate_writes_to_the_output_directory_by_default() {
    let dir = tempfile::tempdir().unwrap();
    let out = debak(&[&["simulate"][..], &SHORT_HOVER].concat(), dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let records = read_csv(&dir.path().join("hover.csv")).unwrap();
    // 2 s at dt = 1e-3, every 5th step plus the initial row.
    assert_eq!(records.len(), 401);
    assert_eq!(records.last().unwrap().t, 2.0);
    let text = std::fs::read_to_string(dir.path().join("hover.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), HEADER.join(","));
}

#[test]
fn validate_accepts_its_own_run_and_rejects_a_tampered_one() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("run.csv");
    let csv_s = csv.to_str().unwrap();
    let sim = debak(&[&["simulate", "--out", csv_s][..], &SHORT_HOVER].concat(), dir.path());
    assert!(sim.status.success());

    let ok = debak(&[&["validate", csv_s][..], &SHORT_HOVER].concat(), dir.path());
    let report = String::from_utf8_lossy(&ok.stdout);
    assert!(ok.status.success(), "{report}");
    assert!(report.lines().all(|l| l.starts_with("PASS") || l.starts_with("SKIP")), "{report}");

    // Nudge one thrust value in the middle of the log.
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut fields: Vec<String> = lines[100].split(',').map(String::from).collect();
    let f: f64 = fields[7].parse().unwrap();
    fields[7] = (f + 1e-4).to_string();
    lines[100] = fields.join(",");
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, lines.join("\n") + "\n").unwrap();
    let rejected = debak(&[&["validate", bad.to_str().unwrap()][..], &SHORT_HOVER].concat(), dir.path());
    assert_eq!(rejected.status.code(), Some(EXIT_INVALID.into()));
    assert!(String::from_utf8_lossy(&rejected.stdout).contains("FAIL"));
}

#[test]
fn config_file_is_read_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    std::fs::write(
        &conf,
        "# short hover\nscenario = hover\noffset_r1 = 0.1\noffset_r2 = 0.1\nduration = 1\ndecimation = 1000\n",
    )
    .unwrap();
    let out = debak(&["simulate", "--config", conf.to_str().unwrap(), "--duration", "2"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let records = read_csv(&dir.path().join("hover.csv")).unwrap();
    let times: Vec<f64> = records.iter().map(|r| r.t).collect();
    assert_eq!(times, [0.0, 1.0, 2.0]);
}

#[test]
fn config_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("bad.conf");
    std::fs::write(&conf, "scenario = hover\nk3 = -2\n").unwrap();
    let out = debak(&["simulate", "--config", conf.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(EXIT_CONFIG.into()));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2") && err.contains("k3"), "{err}");
    assert!(!dir.path().join("hover.csv").exists());
}

#[test]
fn aborted_run_keeps_its_partial_log() {
    let dir = tempfile::tempdir().unwrap();
    let out = debak(&["simulate", "--scenario", "hover", "--decimation", "1"], dir.path());
    assert_eq!(out.status.code(), Some(EXIT_SINGULAR.into()));
    let records = read_csv(&dir.path().join("hover.csv")).unwrap();
    assert!(!records.is_empty());
    assert!(records.iter().all(|r| r.comp.thrust > 0.0));
}

#[test]
fn unknown_scenario_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = debak(&["simulate", "--scenario", "lemniscate"], dir.path());
    assert_eq!(out.status.code(), Some(EXIT_CONFIG.into()));
}

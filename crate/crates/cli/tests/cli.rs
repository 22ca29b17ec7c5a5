use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_chanest"))
}

fn desk_conf() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.conf")
}

fn write_conf(dir: &tempfile::TempDir, text: &str) -> PathBuf {
    let p = dir.path().join("exp.conf");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn run_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let st = bin()
        .args(["run", "--config"])
        .arg(desk_conf())
        .args(["--snr", "-10,20", "--trials", "3", "--methods", "proposed,oracle", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(st.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[0].starts_with("method,sweep_name,sweep_value,"));
    assert!(lines[1].starts_with("proposed,snr_db,-10,3,"));
    assert!(lines[4].starts_with("oracle,snr_db,20,3,"));
}

#[test]
fn reruns_are_byte_identical() {
    let run = || {
        bin()
            .args(["run", "--config"])
            .arg(desk_conf())
            .args(["--snr", "0", "--trials", "4", "--seed", "9"])
            .output()
            .unwrap()
            .stdout
    };
    let a = run();
    assert!(!a.is_empty());
    assert_eq!(a, run());
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_conf(&dir, "system.n_rf = 5\n");
    let st = bin().args(["run", "--config"]).arg(&bad).status().unwrap();
    assert_eq!(st.code(), Some(1));
    let unknown = write_conf(&dir, "system.bogus = 1\n");
    let st = bin().args(["overhead", "--config"]).arg(&unknown).status().unwrap();
    assert_eq!(st.code(), Some(1));
    let st = bin()
        .args(["run", "--config"])
        .arg(desk_conf())
        .args(["--methods", "nope"])
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(1));
    let st = bin()
        .args(["run", "--config"])
        .arg(dir.path().join("missing.conf"))
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(1));
}

#[test]
fn failure_rate_threshold_exits_with_two() {
    // Off-grid at -10 dB with a single Stage-I frame: detection fails often.
    let dir = tempfile::tempdir().unwrap();
    let conf = write_conf(
        &dir,
        "channel.on_grid = false\nschedule.v0 = 1\nsweep.values = -30\nexperiment.methods = proposed\n",
    );
    let st = bin()
        .args(["run", "--config"])
        .arg(&conf)
        .args(["--trials", "6", "--max-fail-rate", "0"])
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(2), "{}", String::from_utf8_lossy(&st.stdout));
    let st = bin()
        .args(["run", "--config"])
        .arg(&conf)
        .args(["--trials", "6", "--max-fail-rate", "1"])
        .status()
        .unwrap();
    assert!(st.success());
}

#[test]
fn overhead_report() {
    let out = bin().args(["overhead", "--config"]).arg(desk_conf()).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("minimum hybrid"));
    assert!(text.contains("schedule"));
}

#[test]
fn selftest_passes() {
    let out = bin().arg("selftest").output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(out.status.success(), "{text}");
    assert!(!text.contains("FAIL"));
}

#[test]
fn diagnose_prints_record() {
    let out = bin()
        .args(["diagnose", "--config"])
        .arg(desk_conf())
        .args(["--trial", "2"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("typical_path = "));
    assert!(text.contains("user.2.xi_error = "));
}

#[test]
fn diagnose_writes_measurements() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("y.txt");
    let out = bin()
        .args(["diagnose", "--config"])
        .arg(desk_conf())
        .arg("--measurements")
        .arg(&path)
        .output()
        .unwrap();
    assert!(out.status.success());
    let m = chanest_core::protocol::MeasurementSet::parse(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(m.stage1.nrows(), 32);
    assert_eq!(m.stage3.len(), 1);
}

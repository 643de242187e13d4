use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ots-avoid"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn ots-avoid")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn presets() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/presets"))
}

#[test]
fn plan_offline_table2_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let o = run(&["plan-offline", "--robot", "5r", "--preset", "table2", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("final_delta_l = [0, 0]"));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("t,t_meas,x_p_r,y_p_r"));
    assert_eq!(lines.count(), 201);
}

#[test]
fn config_file_and_robot_flag_agree() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let cfg = presets().join("five_bar.toml");
    let traj = presets().join("table2.csv");
    let o1 = run(&["plan-offline", "--config", cfg.to_str().unwrap(), "--trajectory", traj.to_str().unwrap(), "--out", a.to_str().unwrap()]);
    let o2 = run(&["plan-offline", "--robot", "5r", "--preset", "table2", "--out", b.to_str().unwrap()]);
    assert_eq!(code(&o1), 0);
    assert_eq!(code(&o2), 0);
    let strip = |s: String| s.lines().filter(|l| !l.contains("t_l_ms")).collect::<Vec<_>>().join("\n");
    assert_eq!(strip(stdout(&o1)), strip(stdout(&o2)));
}

#[test]
fn online_with_disturbance_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o.csv");
    let o = run(&[
        "simulate-online", "--robot", "5r", "--preset", "table2", "--out", out.to_str().unwrap(),
        "--disturb", "1.0", "1.2", "0.001", "-0.001", "--seed", "3",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.exists());
}

#[test]
fn disturbance_with_wrong_arity_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o.csv");
    let o = run(&["simulate-online", "--robot", "5r", "--preset", "table2", "--out", out.to_str().unwrap(), "--disturb", "1", "2", "0.1"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn indices_prints_alpha_and_pairs() {
    let o = run(&["indices", "--robot", "3ups_rpu", "--pose", "0.038,0.640,1.14,3.64"]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    assert_eq!(s.lines().filter(|l| l.starts_with("omega_")).count(), 6);
    assert!(s.contains("alpha = "));
    assert!(s.contains("det_jd = "));
}

#[test]
fn indices_rejects_wrong_length_pose() {
    let o = run(&["indices", "--robot", "5r", "--pose", "0,0.09,1"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn scan_writes_one_row_per_sample() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let o = run(&["scan", "--robot", "5r", "--preset", "table2", "--step", "0.1", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 1 + 41);
}

#[test]
fn unknown_preset_and_missing_file_are_usage_errors() {
    let o = run(&["plan-offline", "--robot", "5r", "--preset", "nope", "--out", "/tmp/x.csv"]);
    assert_eq!(code(&o), 2);
    let o = run(&["plan-offline", "--config", "/nonexistent.toml", "--preset", "table2", "--out", "/tmp/x.csv"]);
    assert_eq!(code(&o), 2);
    let o = run(&["plan-offline", "--robot", "5r", "--out", "/tmp/x.csv"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn unknown_config_key_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "robot = \"5r\"\nbogus = 1\n").unwrap();
    let o = run(&["indices", "--config", cfg.to_str().unwrap(), "--pose", "0,0.09"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn start_below_threshold_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let traj = dir.path().join("t.csv");
    std::fs::write(&traj, "t,x_p,y_p\n0,-0.03,0.05\n1,0,0.09\n").unwrap();
    let out = dir.path().join("r.csv");
    let o = run(&["plan-offline", "--robot", "5r", "--trajectory", traj.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn spatial_convention_validates() {
    let o = run(&["validate-convention", "--robot", "3ups_rpu"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("frozen convention = rear_fan"));
}

#[test]
fn five_bar_working_mode_check_reports_failure() {
    let o = run(&["validate-convention", "--robot", "5r"]);
    assert_eq!(code(&o), 4);
    assert_eq!(stdout(&o).lines().filter(|l| l.ends_with("FAIL")).count(), 4);
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/scenarios")
}

fn cvf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cvf"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn scn(name: &str) -> String {
    scenarios().join(format!("{name}.scn")).display().to_string()
}

#[test]
fn check_params_reports_each_inequality() {
    let out = cvf(&["check-params", "--scenario", &scn("unicycle_run1")]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["ring_ratio_1", "ring_spacing_2", "blend_rate_3"] {
        assert!(text.contains(name), "{text}");
    }
}

#[test]
fn infeasible_scenario_fails_unless_allowed() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(scn("unicycle_run1")).unwrap().replace("r1_m = 4", "r1_m = 1");
    let path = dir.path().join("bad.scn");
    fs::write(&path, text).unwrap();
    let path = path.display().to_string();
    assert_eq!(cvf(&["check-params", "--scenario", &path]).status.code(), Some(1));
    let out_dir = dir.path().display().to_string();
    let args = ["sample-field", "--scenario", &path, "--out", &out_dir, "--grid", "-5:5:-5:5:5"];
    assert_eq!(cvf(&args).status.code(), Some(1));
    let mut allowed = args.to_vec();
    allowed.push("--allow-infeasible");
    assert_eq!(cvf(&allowed).status.code(), Some(0));
    assert!(dir.path().join("unicycle_run1_grid.txt").exists());
}

#[test]
fn malformed_input_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.scn");
    fs::write(&path, "name = broken\n[field]\nr1_m = (4\n").unwrap();
    let out = cvf(&["check-params", "--scenario", &path.display().to_string()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
    let missing = cvf(&["simulate", "--scenario", "/nonexistent.scn"]);
    assert_eq!(missing.status.code(), Some(2));
    assert_eq!(cvf(&["simulate", "--bogus"]).status.code(), Some(2));
}

#[test]
fn simulate_then_setpoints() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().display().to_string();
    let out = cvf(&["simulate", "--scenario", &scn("fixedwing_run5"), "--out", &out_dir]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = fs::read_to_string(dir.path().join("fixedwing_run5_report.txt")).unwrap();
    assert!(report.contains("converged = true"), "{report}");
    let traj = dir.path().join("fixedwing_run5_trajectory.csv");
    let traj = traj.display().to_string();
    let out = cvf(&["setpoints", "--scenario", &scn("fixedwing_run5"), "--trajectory", &traj, "--out", &out_dir]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("fixedwing_run5_setpoints.csv")).unwrap();
    assert!(csv.lines().count() > 1000);
    let no_uav = cvf(&["setpoints", "--scenario", &scn("unicycle_run1"), "--trajectory", &traj, "--out", &out_dir]);
    assert_eq!(no_uav.status.code(), Some(1));
}

#[test]
fn integral_curve_and_montecarlo_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().display().to_string();
    let out = cvf(&["integral-curve", "--scenario", &scn("unicycle_run4"), "--out", &out_dir]);
    assert_eq!(out.status.code(), Some(0));
    let curve = fs::read_to_string(dir.path().join("unicycle_run4_curve.csv")).unwrap();
    assert!(curve.starts_with("s,x,y,r_delta,kappa"));
    let args = [
        "montecarlo", "--scenario", &scn("montecarlo_unicycle"), "--trials", "4", "--seed", "7", "--out", &out_dir,
    ];
    assert_eq!(cvf(&args).status.code(), Some(0));
    let first = fs::read(dir.path().join("montecarlo_unicycle_metrics.txt")).unwrap();
    assert!(String::from_utf8_lossy(&first).contains("n_trials = 4"));
    assert!(dir.path().join("montecarlo_unicycle_metrics.csv").exists());
    assert_eq!(cvf(&args).status.code(), Some(0));
    assert_eq!(fs::read(dir.path().join("montecarlo_unicycle_metrics.txt")).unwrap(), first);
}

#[test]
fn directory_runs_every_scenario() {
    let dir = tempfile::tempdir().unwrap();
    for i in [1, 7] {
        fs::copy(scn(&format!("unicycle_run{i}")), dir.path().join(format!("unicycle_run{i}.scn"))).unwrap();
    }
    let out_dir = dir.path().join("out");
    fs::create_dir(&out_dir).unwrap();
    let out = cvf(&[
        "sample-field",
        "--scenario",
        &dir.path().display().to_string(),
        "--out",
        &out_dir.display().to_string(),
        "--grid",
        "-3:3:-3:3:4",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let mut names: Vec<_> = fs::read_dir(&out_dir).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names, ["unicycle_run1_grid.txt", "unicycle_run7_grid.txt"]);
}

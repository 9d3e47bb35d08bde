use super::*;
use crate::config::preset;

fn in_tmp(mut cfg: RunConfig, dir: &Path) -> RunConfig {
    cfg.output = dir.to_path_buf();
    cfg
}

fn small_single(dir: &Path) -> RunConfig {
    let mut cfg = in_tmp(preset("classical2d").unwrap(), dir);
    cfg.grid = GridSpec::square(8, 1.0).unwrap();
    cfg.solver.t_end = 0.2;
    cfg.solver.snapshot_interval = 0.05;
    cfg.audits.residuals = false;
    cfg
}

#[test]
fn zero_data_give_zero_outputs_and_pass() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_single(dir.path());
    cfg.init = crate::config::InitSpec::zero();
    let summary = run_study(&cfg).unwrap();
    assert!(summary.passed, "{:?}", summary.study_audits);
    let (_, traj) = load_run(dir.path()).unwrap();
    assert!(traj.snapshots.iter().all(|s| s.fields().iter().all(|(_, f)| f.max() == 0.0)));
    assert!(traj.monitors.iter().all(|m| m.mass_u == 0.0 && m.comb_mass == 0.0));
    for name in ["config.txt", "timeseries.csv", "audit.txt", "summary.json"] {
        assert!(dir.path().join(name).is_file(), "{name}");
    }
}

#[test]
fn trajectory_round_trips_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_single(dir.path());
    let initial = cfg.init.build(&cfg.grid).unwrap();
    let traj = solver::run(&initial, &cfg.params, &cfg.solver).unwrap();
    write_trajectory(dir.path(), &traj).unwrap();
    let back = read_trajectory(dir.path()).unwrap();
    assert_eq!(back.snapshots, traj.snapshots);
    assert_eq!(back.monitors, traj.monitors);
    assert_eq!(back.dt_history, traj.dt_history);
}

#[test]
fn reruns_write_identical_bytes() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_study(&small_single(a.path())).unwrap();
    run_study(&small_single(b.path())).unwrap();
    for name in ["timeseries.csv", "audit.txt", "snapshots/u_0004.txt"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn saved_run_reaudits_to_the_same_text() {
    let dir = tempfile::tempdir().unwrap();
    run_study(&small_single(dir.path())).unwrap();
    let (cfg, traj) = load_run(dir.path()).unwrap();
    let (report, res) = audit_saved(&cfg, &traj).unwrap();
    assert!(res.is_none());
    assert_eq!(audit_text(&traj, &cfg, &report), fs::read_to_string(dir.path().join("audit.txt")).unwrap());
}

#[test]
fn ode_compare_preset_passes() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = in_tmp(preset("ode_compare").unwrap(), dir.path());
    cfg.solver.t_end = 2.0;
    let summary = run_study(&cfg).unwrap();
    assert!(summary.passed, "{}", summary.study_audits);
    assert_eq!(summary.study_audits.entries[0].name, "ode_max_deviation");
    assert!(dir.path().join("ode.txt").is_file());
}

#[test]
fn eps_ladder_writes_members_and_table() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = in_tmp(preset("epsstudy").unwrap(), dir.path());
    cfg.grid = GridSpec::square(8, 1.0).unwrap();
    cfg.solver.t_end = 0.1;
    cfg.study = Study::EpsLadder(vec![0.5, 0.25]);
    let summary = run_study(&cfg).unwrap();
    assert_eq!(summary.runs.len(), 2);
    assert_eq!(summary.runs[1].eps, Some(0.25));
    assert!(dir.path().join("eps_0.5/timeseries.csv").is_file());
    assert!(dir.path().join("uniformity.txt").is_file());
}

#[test]
fn abort_bundle_keeps_the_tail() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_single(dir.path());
    let initial = cfg.init.build(&cfg.grid).unwrap();
    let traj = solver::run(&initial, &cfg.params, &cfg.solver).unwrap();
    let tail = traj.monitors[traj.monitors.len() - 3..].to_vec();
    let err = SolverError::DtUnderflow { t: 0.1, dt: 1e-14, limit: 1e-12, tail: tail.clone() };
    write_abort_bundle(dir.path(), &err).unwrap();
    assert!(fs::read_to_string(dir.path().join("abort.txt")).unwrap().contains("0.1"));
    assert_eq!(read_monitors(&dir.path().join("abort_tail.csv")).unwrap(), tail);
}

#[test]
fn missing_files_are_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(read_trajectory(dir.path()), Err(StudyError::Io { .. })));
    assert!(load_run(dir.path()).is_err());
}

#[test]
fn ladder_audit_flags_growth() {
    let lvl = |h: f64, e: f64| LadderLevel { label: String::new(), h, max_abs_u: e, max_abs_v: e, max_abs_defect: e };
    let good = ladder_audit(&LadderSummary::new(vec![lvl(0.1, 4e-4), lvl(0.05, 1e-4)]));
    assert!(good.passed());
    let bad = ladder_audit(&LadderSummary::new(vec![lvl(0.1, 1e-4), lvl(0.05, 2e-4)]));
    assert!(!bad.passed());
}

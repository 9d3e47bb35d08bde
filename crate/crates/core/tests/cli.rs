use std::path::Path;
use std::process::{Command, Output};

fn sim(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_alarm-taxis-sim"));
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn small_config(dir: &Path) -> std::path::PathBuf {
    let text = "\
grid.nx = 8
grid.lx = 1.0
solver.t_end = 0.2
solver.snapshot_interval = 0.005
solver.dt_max = 0.001
init.u = cosine(1, 0.5, 1, 1)
init.v = constant(0.5)
init.w = cosine(0.5, 0.2, 1, 0)
params.d1 = 0.1
params.d2 = 0.1
params.d3 = 0.1
params.xi = 0
params.chi = 1
params.lambda1 = 1
params.lambda2 = 1
params.lambda3 = 1
params.mu1 = 1
params.mu2 = 1
params.mu3 = 1
params.a1 = 1
params.a2 = 1
params.a3 = 1
params.b1 = 1
params.b2 = 1
params.b3 = 1
";
    let path = dir.join("run.cfg");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn run_then_audit_and_residuals() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out = tmp.path().join("out");
    let o = sim(&["run", cfg.to_str().unwrap(), "--output", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("all audits passed"));

    let again = tmp.path().join("again");
    let o = sim(&["audit", out.to_str().unwrap(), "--output", again.to_str().unwrap(), "--quiet"], &[]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    assert_eq!(
        std::fs::read(out.join("audit.txt")).unwrap(),
        std::fs::read(again.join("audit.txt")).unwrap()
    );

    let o = sim(&["residuals", out.to_str().unwrap()], &[]);
    assert!(matches!(o.status.code(), Some(0 | 1)));
    assert!(String::from_utf8_lossy(&o.stdout).contains("max"));
}

#[test]
fn bad_configs_exit_with_code_three() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let text = std::fs::read_to_string(&cfg).unwrap().replace("params.xi = 0", "params.xi = -1");
    std::fs::write(&cfg, text).unwrap();
    let o = sim(&["run", cfg.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("params.xi"));

    let o = sim(&["run", "no-such-preset"], &[]);
    assert_eq!(o.status.code(), Some(3));
    let o = sim(&["audit", tmp.path().join("missing").to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn thread_count_does_not_change_results() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let mut csv = Vec::new();
    for threads in ["1", "3"] {
        let out = tmp.path().join(format!("t{threads}"));
        let o = sim(&["run", cfg.to_str().unwrap(), "--output", out.to_str().unwrap(), "--quiet"], &[("ALARM_TAXIS_THREADS", threads)]);
        assert_eq!(o.status.code(), Some(0));
        csv.push(std::fs::read(out.join("timeseries.csv")).unwrap());
    }
    assert_eq!(csv[0], csv[1]);
    let o = sim(&["run", cfg.to_str().unwrap()], &[("ALARM_TAXIS_THREADS", "many")]);
    assert_eq!(o.status.code(), Some(3));
}

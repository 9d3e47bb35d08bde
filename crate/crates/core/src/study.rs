//! Study execution and the on-disk trajectory format.
//!
//! A run directory holds
//!
//! * `config.txt`: the canonical config of that run,
//! * `timeseries.csv`: one monitor record per accepted step,
//! * `snapshots/{u,v,w}_NNNN.txt`: saved states in the snapshot text format,
//! * `audit.txt`, optionally `residuals.txt`, and `summary.json`.
//!
//! Ladder studies write one such directory per member plus study-level
//! tables next to them. A solver abort leaves `abort.txt` and
//! `abort_tail.csv` (the last monitor records) in the run directory.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::config::{AuditToggles, ConfigError, RunConfig, Study};
use crate::diagnostics::{self, AuditEntry, AuditReport, MonitorRecord, UniformityTable};
use crate::grid::{Field, GridSpec};
use crate::model::{Params, StateTriple};
use crate::ode::{self, OdeError};
use crate::solver::{self, mms, MmsDescriptor, Mode, Regime, SolverConfig, SolverError, Trajectory};
use crate::weakform::{
    self, LadderLevel, LadderSummary, RenormFunction, ResidualReport, Tolerances, WeakFormError,
};

#[derive(Debug, Error)]
pub enum StudyError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("run {label}: {source}")]
    Solver {
        label: String,
        #[source]
        source: SolverError,
    },
    #[error(transparent)]
    WeakForm(#[from] WeakFormError),
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error("{path}: {msg}")]
    Io { path: PathBuf, msg: String },
}

impl StudyError {
    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        StudyError::Io { path: path.to_path_buf(), msg: e.to_string() }
    }
}

/// Minimal observed order demanded of the weak-residual ladder.
pub const RESIDUAL_ORDER: f64 = 0.9;
/// Relative slack when checking that residual maxima decrease along a ladder.
pub const MONOTONE_SLACK: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualSummary {
    pub max_abs_u: f64,
    pub max_abs_v: f64,
    pub max_abs_defect: f64,
    pub min_defect: f64,
    pub passed: bool,
}

impl From<&ResidualReport> for ResidualSummary {
    fn from(r: &ResidualReport) -> Self {
        Self {
            max_abs_u: r.max_abs_u,
            max_abs_v: r.max_abs_v,
            max_abs_defect: r.max_abs_defect,
            min_defect: r.min_defect,
            passed: r.passed(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub label: String,
    pub dir: PathBuf,
    pub regime: &'static str,
    pub eps: Option<f64>,
    pub nx: usize,
    pub ny: usize,
    pub steps: usize,
    pub snapshots: usize,
    pub t_final: f64,
    pub smoothing_steps: usize,
    pub audits: AuditReport,
    pub residuals: Option<ResidualSummary>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudySummary {
    pub study: &'static str,
    pub passed: bool,
    pub runs: Vec<RunSummary>,
    /// Audits spanning several runs (uniformity, ladders, ODE comparison).
    pub study_audits: AuditReport,
    pub notes: Vec<String>,
}

fn entry(name: &str, margin: f64, threshold: f64) -> AuditEntry {
    AuditEntry {
        name: name.to_string(),
        worst_margin: margin,
        time_of_worst: f64::NAN,
        threshold,
        passed: margin >= threshold,
    }
}

/// The audits enabled by `toggles` on one trajectory.
pub fn audit_run(traj: &Trajectory, p: &Params, regime: &Regime, toggles: &AuditToggles) -> AuditReport {
    let mut report = AuditReport::default();
    if toggles.bounds {
        report.extend(diagnostics::audit_l1_bound(traj, p));
        report.extend(diagnostics::audit_sup_bounds(traj, p, regime));
    }
    if toggles.mass {
        report.extend(diagnostics::audit_mass_inequality(traj, p));
    }
    report
}

/// Weak-form residuals over the standard family of `n` test functions.
pub fn residuals_for(traj: &Trajectory, p: &Params, regime: &Regime, n: usize) -> Result<ResidualReport, WeakFormError> {
    let t_end = traj.last().t;
    let family = weakform::make_test_family(traj.grid(), t_end, n);
    weakform::residual_report(traj, &family, &RenormFunction::family(), p, regime.carrier(), Tolerances::default())
}

/// Residual maxima as audit entries, margins in units of the tolerance.
fn residual_entries(r: &ResidualReport) -> AuditReport {
    let tol = Tolerances::default();
    AuditReport {
        entries: vec![
            entry("weak_u_residual", 1.0 - r.max_abs_u / tol.identity, 0.0),
            entry("weak_v_residual", 1.0 - r.max_abs_v / tol.identity, 0.0),
            entry("supersolution_defect", r.min_defect / tol.defect, -1.0),
        ],
    }
}

fn create_dir(dir: &Path) -> Result<(), StudyError> {
    fs::create_dir_all(dir).map_err(|e| StudyError::io(dir, e))
}

fn write_file(path: &Path, contents: &str) -> Result<(), StudyError> {
    fs::write(path, contents).map_err(|e| StudyError::io(path, e))
}

fn write_monitors(path: &Path, records: &[MonitorRecord]) -> Result<(), StudyError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| StudyError::io(path, e))?;
    w.write_record(MonitorRecord::COLUMNS).map_err(|e| StudyError::io(path, e))?;
    for m in records {
        let row: Vec<String> = m.as_row().iter().map(|x| x.map_or(String::new(), |v| v.to_string())).collect();
        w.write_record(&row).map_err(|e| StudyError::io(path, e))?;
    }
    w.flush().map_err(|e| StudyError::io(path, e))
}

fn read_monitors(path: &Path) -> Result<Vec<MonitorRecord>, StudyError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| StudyError::io(path, e))?;
    let header = r.headers().map_err(|e| StudyError::io(path, e))?.clone();
    if header.iter().ne(MonitorRecord::COLUMNS.iter().copied()) {
        return Err(StudyError::io(path, "unexpected column set"));
    }
    let mut out = Vec::new();
    for (n, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| StudyError::io(path, e))?;
        let row = rec
            .iter()
            .map(|s| if s.is_empty() { Ok(None) } else { s.parse::<f64>().map(Some) })
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| StudyError::io(path, format!("record {}: {e}", n + 1)))?;
        out.push(
            MonitorRecord::from_row(&row)
                .ok_or_else(|| StudyError::io(path, format!("record {} is incomplete", n + 1)))?,
        );
    }
    Ok(out)
}

/// Writes `timeseries.csv` and the snapshot files of `traj` into `dir`.
pub fn write_trajectory(dir: &Path, traj: &Trajectory) -> Result<(), StudyError> {
    create_dir(dir)?;
    write_monitors(&dir.join("timeseries.csv"), &traj.monitors)?;
    let snap_dir = dir.join("snapshots");
    create_dir(&snap_dir)?;
    for (k, s) in traj.snapshots.iter().enumerate() {
        for (name, f) in s.fields() {
            let path = snap_dir.join(format!("{name}_{k:04}.txt"));
            let file = fs::File::create(&path).map_err(|e| StudyError::io(&path, e))?;
            let mut out = BufWriter::new(file);
            f.write_snapshot(&mut out, s.t).map_err(|e| StudyError::io(&path, e))?;
            out.flush().map_err(|e| StudyError::io(&path, e))?;
        }
    }
    Ok(())
}

/// Inverse of [`write_trajectory`].
pub fn read_trajectory(dir: &Path) -> Result<Trajectory, StudyError> {
    let monitors = read_monitors(&dir.join("timeseries.csv"))?;
    if monitors.is_empty() {
        return Err(StudyError::io(&dir.join("timeseries.csv"), "no records"));
    }
    let snap_dir = dir.join("snapshots");
    let mut snapshots = Vec::new();
    for k in 0.. {
        let path = |s: &str| snap_dir.join(format!("{s}_{k:04}.txt"));
        if !path("u").is_file() {
            break;
        }
        let read = |s: &str| Field::read_snapshot_file(&path(s)).map_err(|e| StudyError::io(&path(s), e));
        let (u, t) = read("u")?;
        let (v, _) = read("v")?;
        let (w, _) = read("w")?;
        let state = StateTriple::new(u, v, w, t).map_err(|e| StudyError::io(&path("u"), e))?;
        snapshots.push(state);
    }
    if snapshots.is_empty() {
        return Err(StudyError::io(&snap_dir, "no snapshots"));
    }
    let dt_history = monitors[1..].iter().map(|m| m.dt).collect();
    Ok(Trajectory { snapshots, monitors, dt_history })
}

/// Config and trajectory of a run directory written by [`run_study`].
pub fn load_run(dir: &Path) -> Result<(RunConfig, Trajectory), StudyError> {
    let cfg = RunConfig::parse_file(&dir.join("config.txt"))?;
    Ok((cfg, read_trajectory(dir)?))
}

fn write_abort_bundle(dir: &Path, err: &SolverError) -> Result<(), StudyError> {
    create_dir(dir)?;
    write_file(&dir.join("abort.txt"), &format!("{err}\n"))?;
    if let SolverError::DtUnderflow { tail, .. } = err {
        write_monitors(&dir.join("abort_tail.csv"), tail)?;
    }
    Ok(())
}

/// Audits of a finished run as configured, with the residual report when
/// residuals are audited.
pub fn audit_saved(cfg: &RunConfig, traj: &Trajectory) -> Result<(AuditReport, Option<ResidualReport>), StudyError> {
    let mut audits = audit_run(traj, &cfg.params, &cfg.solver.regime, &cfg.audits);
    if !cfg.audits.residuals {
        return Ok((audits, None));
    }
    let report = residuals_for(traj, &cfg.params, &cfg.solver.regime, cfg.test_functions)?;
    audits.extend(residual_entries(&report));
    Ok((audits, Some(report)))
}

/// One member run: solve, write, audit. With `residuals` the residual report
/// is written even when the config does not audit it.
fn single_run(label: &str, dir: &Path, cfg: &RunConfig, residuals: bool) -> Result<(RunSummary, Trajectory), StudyError> {
    create_dir(dir)?;
    write_file(&dir.join("config.txt"), &cfg.render())?;
    let initial = cfg.init.build(&cfg.grid)?;
    let traj = match solver::run(&initial, &cfg.params, &cfg.solver) {
        Ok(t) => t,
        Err(source) => {
            write_abort_bundle(dir, &source)?;
            return Err(StudyError::Solver { label: label.to_string(), source });
        }
    };
    write_trajectory(dir, &traj)?;
    let (audits, mut report) = audit_saved(cfg, &traj)?;
    if report.is_none() && residuals {
        report = Some(residuals_for(&traj, &cfg.params, &cfg.solver.regime, cfg.test_functions)?);
    }
    if let Some(r) = &report {
        write_file(&dir.join("residuals.txt"), &r.render())?;
    }
    let res_summary = report.as_ref().map(ResidualSummary::from);
    write_file(&dir.join("audit.txt"), &audit_text(&traj, cfg, &audits))?;
    let summary = RunSummary {
        label: label.to_string(),
        dir: dir.to_path_buf(),
        regime: cfg.solver.regime.name(),
        eps: cfg.solver.regime.eps(),
        nx: cfg.grid.nx(),
        ny: cfg.grid.ny(),
        steps: traj.dt_history.len(),
        snapshots: traj.snapshots.len(),
        t_final: traj.last().t,
        smoothing_steps: cfg.init.smoothing_steps,
        passed: audits.passed(),
        audits,
        residuals: res_summary,
    };
    write_json(&dir.join("summary.json"), &summary)?;
    Ok((summary, traj))
}

/// Audit table preceded by the audited constants.
pub fn audit_text(traj: &Trajectory, cfg: &RunConfig, audits: &AuditReport) -> String {
    let b = diagnostics::bounds_for(traj, &cfg.params, &cfg.solver.regime);
    let opt = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{v:.6e}"));
    format!(
        "# regime {}  l1 bound {:.6e}  sup_u bound {:.6e}  sup_v bound {}  sup_w bound {}\n{}",
        cfg.solver.regime.name(),
        b.l1,
        b.sup_u,
        opt(b.sup_v),
        opt(b.sup_w),
        audits
    )
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), StudyError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| StudyError::io(path, e))?;
    write_file(path, &(text + "\n"))
}

fn collect<T>(results: Vec<Result<T, StudyError>>) -> Result<Vec<T>, StudyError> {
    results.into_iter().collect()
}

/// Grid of the ladder member with `nx` cells along x, keeping the aspect of
/// the base grid.
fn ladder_grid(base: &GridSpec, nx: usize) -> Result<GridSpec, StudyError> {
    let ny = if base.is_1d() { 1 } else { ((nx * base.ny()) as f64 / base.nx() as f64).round().max(1.0) as usize };
    GridSpec::new(nx, ny, base.lx(), base.ly())
        .map_err(|e| StudyError::Config(ConfigError::Value { key: "study.grids".into(), msg: e.to_string() }))
}

/// Executes the study of `cfg`, writing everything under `cfg.output`.
pub fn run_study(cfg: &RunConfig) -> Result<StudySummary, StudyError> {
    let root = cfg.output.clone();
    create_dir(&root)?;
    write_file(&root.join("config.txt"), &cfg.render())?;
    let mut notes = vec![
        format!("initial data pre-smoothed with {} diffusion steps", cfg.init.smoothing_steps),
        "finite-time blow-up is not detected; only step-size underflow aborts a run".to_string(),
    ];
    let mut study_audits = AuditReport::default();
    let runs = match &cfg.study {
        Study::Single => vec![single_run("single", &root, cfg, false)?.0],
        Study::OdeCompare => {
            let mut member = cfg.clone();
            let cap = cfg.solver.dt_max.map_or(1e-3, |d| d.min(1e-3));
            member.solver.dt_max = Some(cap);
            let (summary, traj) = single_run("ode_compare", &root, &member, false)?;
            let y0 = cfg.init.constants().expect("checked at parse time");
            let (table, dev) = ode_comparison(&traj, &cfg.params, y0)?;
            write_file(&root.join("ode.txt"), &table)?;
            study_audits.entries.push(entry("ode_max_deviation", 1.0 - dev / cfg.ode_tolerance, 0.0));
            notes.push(format!("max deviation from the ODE reference {dev:.3e} at dt <= {cap:e}"));
            vec![summary]
        }
        Study::EpsLadder(eps) => {
            let results: Vec<_> = eps
                .par_iter()
                .map(|&e| {
                    let mut member = cfg.clone();
                    member.study = Study::Single;
                    member.solver.regime = Regime::regularized(e).map_err(|err| {
                        ConfigError::Value { key: "study.eps".into(), msg: err.to_string() }
                    })?;
                    let label = format!("eps_{e}");
                    member.output = root.join(&label);
                    single_run(&label, &member.output, &member, false)
                })
                .collect();
            let members = collect(results)?;
            let pairs: Vec<(f64, &Trajectory)> = eps.iter().copied().zip(members.iter().map(|(_, t)| t)).collect();
            let table = UniformityTable::new(&pairs);
            write_file(&root.join("uniformity.txt"), &table.render())?;
            if cfg.audits.uniformity {
                study_audits.extend(table.audit());
            }
            members.into_iter().map(|(s, _)| s).collect()
        }
        Study::GridLadder(ns) => {
            let base_n = ns[0];
            let results: Vec<_> = ns
                .par_iter()
                .map(|&n| {
                    let scale = base_n as f64 / n as f64;
                    let mut member = cfg.clone();
                    member.study = Study::Single;
                    member.grid = ladder_grid(&cfg.grid, n)?;
                    member.solver.snapshot_interval = cfg.solver.snapshot_interval * scale;
                    member.solver.dt_max = cfg.solver.dt_max.map(|d| d * scale);
                    let label = format!("n{n}");
                    member.output = root.join(&label);
                    // members are judged by the decay of their residuals, not one by one
                    member.audits.residuals = false;
                    single_run(&label, &member.output, &member, true)
                })
                .collect();
            let members = collect(results)?;
            let levels = members
                .iter()
                .map(|(s, t)| {
                    let r = s.residuals.as_ref().expect("ladder members compute residuals");
                    LadderLevel {
                        label: s.label.clone(),
                        h: t.grid().h_min(),
                        max_abs_u: r.max_abs_u,
                        max_abs_v: r.max_abs_v,
                        max_abs_defect: r.max_abs_defect,
                    }
                })
                .collect();
            let ladder = LadderSummary::new(levels);
            write_file(&root.join("ladder.txt"), &ladder.render())?;
            if cfg.audits.residuals {
                study_audits.extend(ladder_audit(&ladder));
            }
            members.into_iter().map(|(s, _)| s).collect()
        }
        Study::Mms { mode, grids } => {
            let descriptor = match mode {
                Mode::DiffusionOnly => MmsDescriptor::diffusion_only(),
                Mode::Full => MmsDescriptor::full(),
            };
            let grids = grids.iter().map(|&n| ladder_grid(&cfg.grid, n)).collect::<Result<Vec<_>, _>>()?;
            let solver_cfg = SolverConfig { mms: Some(descriptor), ..cfg.solver.clone() };
            let report = mms::mms_run(&descriptor, &cfg.params, &solver_cfg, &grids, *mode)
                .map_err(|source| StudyError::Solver { label: "mms".into(), source })?;
            write_file(&root.join("convergence.txt"), &report.render())?;
            study_audits.entries.push(entry(
                "mms_observed_order",
                report.observed_order - report.expected_order,
                0.0,
            ));
            study_audits.entries.push(entry("mms_error_monotone", if report.monotone { 1.0 } else { -1.0 }, 0.0));
            Vec::new()
        }
    };
    let passed = study_audits.passed() && runs.iter().all(|r| r.passed);
    let summary = StudySummary { study: cfg.study.name(), passed, runs, study_audits, notes };
    write_json(&root.join("summary.json"), &summary)?;
    if !summary.study_audits.entries.is_empty() {
        write_file(&root.join("study_audit.txt"), &summary.study_audits.to_string())?;
    }
    Ok(summary)
}

/// Order and monotonicity entries of a residual ladder.
pub fn ladder_audit(ladder: &LadderSummary) -> AuditReport {
    let monotone = ladder.levels.windows(2).all(|w| {
        w[1].max_abs_u <= (1.0 + MONOTONE_SLACK) * w[0].max_abs_u
            && w[1].max_abs_v <= (1.0 + MONOTONE_SLACK) * w[0].max_abs_v
    });
    AuditReport {
        entries: vec![
            entry("residual_ladder_order", ladder.min_order() - RESIDUAL_ORDER, 0.0),
            entry("residual_ladder_monotone", if monotone { 1.0 } else { -1.0 }, 0.0),
        ],
    }
}

/// Deviation of a spatially constant run from the ODE reference at every
/// snapshot, as a text table and its maximum.
pub fn ode_comparison(traj: &Trajectory, p: &Params, y0: [f64; 3]) -> Result<(String, f64), StudyError> {
    let times = traj.snapshot_times();
    let reference = ode::solve_kinetics(p, y0, &times)?;
    let mut text = format!(
        "{:>12} {:>22} {:>22} {:>22} {:>12}\n",
        "t", "u_ode", "v_ode", "w_ode", "deviation"
    );
    let mut worst: f64 = 0.0;
    for (s, r) in traj.snapshots.iter().zip(&reference) {
        let mut dev: f64 = 0.0;
        for (c, (_, f)) in s.fields().iter().enumerate() {
            for x in f.values() {
                dev = dev.max((x - r[c]).abs());
            }
        }
        worst = worst.max(dev);
        text.push_str(&format!("{:>12.6} {:>22.15e} {:>22.15e} {:>22.15e} {:>12.4e}\n", s.t, r[0], r[1], r[2], dev));
    }
    text.push_str(&format!("max deviation {worst:.6e}\n"));
    Ok((text, worst))
}

#[cfg(test)]
mod tests;

//! Acceptance criteria. Each test prints one `PASS` or `FAIL` line per
//! criterion before asserting.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use alarm_taxis::config::preset;
use alarm_taxis::diagnostics::{self, AuditReport, UniformityTable};
use alarm_taxis::grid::{grad_sq_integral, integrate, laplacian, norms, taxis_divergence};
use alarm_taxis::model::{sigma_eps, sigma_eps_prime, sigma_prime_bound};
use alarm_taxis::solver::mms::mms_run;
use alarm_taxis::solver::{self, MmsDescriptor, Mode};
use alarm_taxis::study::{self, read_trajectory, write_trajectory};
use alarm_taxis::weakform::Tolerances;
use alarm_taxis::{CutoffSpec, Field, GridSpec, Params, Regime, SolverConfig, StateTriple, Trajectory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Writes straight to the stderr handle, which the test harness does not
/// capture, so the scorecard shows up in a plain `cargo test` run.
fn verdict(n: u32, name: &str, ok: bool, detail: &str) -> bool {
    let line = format!("{} criterion {n} ({name}): {detail}\n", if ok { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
    ok
}

fn sci(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo.ln()..hi.ln()).exp()
}

fn random_params(rng: &mut ChaCha8Rng) -> Params {
    let mut c = [0.0; 17];
    for x in &mut c {
        *x = log_uniform(rng, 0.1, 10.0);
    }
    Params {
        d1: c[0], d2: c[1], d3: c[2], xi: c[3], chi: c[4],
        lambda1: c[5], lambda2: c[6], lambda3: c[7],
        mu1: c[8], mu2: c[9], mu3: c[10],
        a1: c[11], a2: c[12], a3: c[13],
        b1: c[14], b2: c[15], b3: c[16],
    }
}

fn random_field(rng: &mut ChaCha8Rng, g: GridSpec, hi: f64) -> Field {
    let values = (0..g.len()).map(|_| rng.gen_range(0.0..hi)).collect();
    Field::new(g, values).unwrap()
}

fn files_identical(a: &Path, b: &Path) -> bool {
    let mut names: Vec<_> = std::fs::read_dir(a.join("snapshots")).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    let same = |rel: &Path| std::fs::read(a.join(rel)).unwrap() == std::fs::read(b.join(rel)).unwrap();
    same(Path::new("timeseries.csv")) && names.iter().all(|n| same(&Path::new("snapshots").join(n)))
}

struct Case {
    label: String,
    params: Params,
    traj: Trajectory,
}

/// Criterion 1: 50 random configurations.
fn random_runs() -> (Vec<Case>, Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_2024);
    let sizes = [8usize, 16, 32, 64];
    let mut cases = Vec::new();
    let mut failures = Vec::new();
    for k in 0..50 {
        let mut p = random_params(&mut rng);
        let regime = match k % 3 {
            0 => {
                p.xi = 0.0;
                Regime::Classical
            }
            1 => Regime::Full,
            _ => Regime::regularized(log_uniform(&mut rng, 0.05, 1.0)).unwrap(),
        };
        let (nx, ny) = (sizes[rng.gen_range(0..4)], sizes[rng.gen_range(0..4)]);
        let h = rng.gen_range(0.25..1.0);
        let g = GridSpec::new(nx, ny, nx as f64 * h, ny as f64 * h).unwrap();
        let s = StateTriple::new(
            random_field(&mut rng, g, 2.0),
            random_field(&mut rng, g, 2.0),
            random_field(&mut rng, g, 2.0),
            0.0,
        )
        .unwrap();
        let cfg = SolverConfig { snapshot_interval: 0.5, ..SolverConfig::new(5.0, regime) };
        let label = format!("random #{k} {} {nx}x{ny}", regime.name());
        let runs: Vec<_> = (0..2).map(|_| solver::run(&s, &p, &cfg)).collect();
        match (&runs[0], &runs[1]) {
            (Ok(a), Ok(b)) => {
                let nonneg = a.snapshots.iter().all(|s| s.check_nonnegative().is_ok());
                let (da, db) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
                write_trajectory(da.path(), a).unwrap();
                write_trajectory(db.path(), b).unwrap();
                if !nonneg {
                    failures.push(format!("{label}: negative snapshot"));
                }
                if !files_identical(da.path(), db.path()) {
                    failures.push(format!("{label}: reruns differ"));
                }
                if a.last().t != 5.0 {
                    failures.push(format!("{label}: stopped at t = {}", a.last().t));
                }
                cases.push(Case { label, params: p, traj: a.clone() });
            }
            (Err(e), _) | (_, Err(e)) => failures.push(format!("{label}: {e}")),
        }
    }
    (cases, failures)
}

/// Criterion 2: classical runs with sup u0 on both sides of lambda1 / mu1.
fn comparison_runs() -> (Vec<Case>, Vec<String>, usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(0xc0_4a_12);
    let (mut cases, mut failures) = (Vec::new(), Vec::new());
    let (mut above, mut below) = (0, 0);
    for k in 0..12 {
        let p = Params { xi: 0.0, ..random_params(&mut rng) };
        let n = [16usize, 32][k % 2];
        let g = GridSpec::square(n, n as f64 * 0.25).unwrap();
        let level = p.lambda1 / p.mu1 * if k % 2 == 0 { 1.8 } else { 0.4 };
        let l = g.lx();
        let u = Field::from_fn(g, |x, y| level * (0.75 + 0.25 * (PI * x / l).cos() * (PI * y / l).cos()));
        let v = random_field(&mut rng, g, 2.0);
        let w = random_field(&mut rng, g, 2.0);
        if u.max() > p.lambda1 / p.mu1 {
            above += 1;
        } else {
            below += 1;
        }
        let s = StateTriple::new(u, v, w, 0.0).unwrap();
        let cfg = SolverConfig { snapshot_interval: 0.5, ..SolverConfig::new(5.0, Regime::Classical) };
        let label = format!("classical #{k} {n}x{n}");
        match solver::run(&s, &p, &cfg) {
            Ok(traj) => {
                let report = diagnostics::audit_sup_bounds(&traj, &p, &Regime::Classical);
                if report.entries.len() != 2 {
                    failures.push(format!("{label}: expected u and v bounds"));
                }
                for e in report.failures() {
                    failures.push(format!("{label}: {} margin {:.3e}", e.name, e.worst_margin));
                }
                cases.push(Case { label, params: p, traj });
            }
            Err(e) => failures.push(format!("{label}: {e}")),
        }
    }
    (cases, failures, above, below)
}

#[test]
fn criteria_1_to_3_random_and_classical_runs() {
    let start = Instant::now();
    let (random, f1) = random_runs();
    let elapsed = start.elapsed().as_secs_f64();
    let ok1 = verdict(
        1,
        "positivity and determinism",
        f1.is_empty() && random.len() == 50 && elapsed < 600.0,
        &format!("{} of 50 runs clean, {:.1} s (budget 600 s) {:?}", 50 - f1.len(), elapsed, f1),
    );

    let (classical, f2, above, below) = comparison_runs();
    let ok2 = verdict(
        2,
        "comparison bounds",
        f2.is_empty() && classical.len() >= 10 && above > 0 && below > 0,
        &format!("{} classical runs, {above} with sup u0 above lambda1/mu1, {below} below {:?}", classical.len(), f2),
    );

    let mut f3 = Vec::new();
    let mut worst = f64::INFINITY;
    for c in random.iter().chain(&classical) {
        let e = &diagnostics::audit_l1_bound(&c.traj, &c.params).entries[0];
        worst = worst.min(e.worst_margin);
        if !e.passed {
            f3.push(format!("{}: margin {:.3e}", c.label, e.worst_margin));
        }
    }
    let unit = diagnostics::l1_bound(0.5, &Params::unit(), 1.0);
    let ok3 = verdict(
        3,
        "L1 bound",
        f3.is_empty() && unit == 3.0,
        &format!("{} runs, worst margin {worst:.3e}, unit constant {unit} {:?}", random.len() + classical.len(), f3),
    );
    assert!(ok1 && ok2 && ok3);
}

fn classical_mass_state(g: GridSpec) -> StateTriple {
    let l = g.lx();
    let u = Field::from_fn(g, |x, y| 1.0 + 0.5 * (PI * x / l).cos() * (PI * y / l).cos());
    let v = Field::from_fn(g, |x, y| 0.5 + 0.3 * (2.0 * PI * x / l).cos() * (PI * y / l).cos());
    let w = Field::from_fn(g, |x, y| 0.5 + 0.4 * (PI * x / l).cos() * (2.0 * PI * y / l).cos());
    StateTriple::new(u, v, w, 0.0).unwrap()
}

#[test]
fn criterion_4_mass_inequality() {
    let g = GridSpec::square(16, 4.0).unwrap();
    let p = Params { xi: 0.0, d1: 0.1, d2: 0.1, d3: 0.1, ..Params::unit() };
    let s = classical_mass_state(g);
    let mut maxima = Vec::new();
    let mut governed = true;
    for dt in [0.004, 0.002, 0.001] {
        let cfg = SolverConfig { dt_max: Some(dt), snapshot_interval: 0.5, ..SolverConfig::new(2.0, Regime::Classical) };
        let traj = solver::run(&s, &p, &cfg).unwrap();
        // the ladder refines dt only if the cap, not stability, sets the step
        let capped = traj.dt_history.iter().filter(|&&d| d == dt).count();
        governed &= capped as f64 >= 0.9 * 2.0 / dt && traj.dt_history.iter().all(|&d| d <= dt * (1.0 + 1e-9));
        maxima.push(diagnostics::mass_residuals(&traj).iter().map(|(_, r)| r.abs()).fold(0.0, f64::max));
    }
    let ratios: Vec<f64> = maxima.windows(2).map(|w| w[0] / w[1]).collect();
    let classical_ok = governed
        && maxima.iter().all(|&m| m <= 1e-4)
        && ratios.iter().all(|r| (3.0..=5.0).contains(r));

    let mut reg_worst = f64::INFINITY;
    let mut reg_ok = true;
    let mut fullreg = preset("fullreg").unwrap();
    fullreg.grid = GridSpec::square(16, 1.0).unwrap();
    let mut eps = preset("epsstudy").unwrap();
    eps.solver.regime = Regime::regularized(0.05).unwrap();
    for cfg in [fullreg, eps] {
        let traj = solver::run(&cfg.init.build(&cfg.grid).unwrap(), &cfg.params, &cfg.solver).unwrap();
        let e = &diagnostics::audit_mass_inequality(&traj, &cfg.params).entries[0];
        reg_worst = reg_worst.min(e.worst_margin);
        reg_ok &= e.passed;
    }
    let ok = verdict(
        4,
        "mass inequality",
        classical_ok && reg_ok,
        &format!(
            "classical max|r| {} ratios {ratios:.3?} (dt set by cap: {governed}); \
             regularized worst r/(1+int w0) {reg_worst:.3e} (floor -1e-6)",
            sci(&maxima)
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_5_kinetic_ode() {
    let cfg = preset("ode_compare").unwrap();
    let [u, v, w] = cfg.init.constants().unwrap();
    let g = cfg.grid;
    let s = StateTriple::constant(g, u, v, w).unwrap();
    let solver_cfg = SolverConfig { dt_max: Some(1e-3), ..cfg.solver.clone() };
    let traj = solver::run(&s, &Params::unit(), &solver_cfg).unwrap();
    let (_, dev) = study::ode_comparison(&traj, &Params::unit(), [u, v, w]).unwrap();
    let max_dt = traj.dt_history.iter().copied().fold(0.0, f64::max);
    let ok = cfg.params == Params::unit() && traj.last().t == 10.0 && max_dt <= 1e-3 * (1.0 + 1e-9) && dev <= 1e-4;
    assert!(verdict(5, "kinetic ODE", ok, &format!("max deviation {dev:.3e} (tol 1e-4), max dt {max_dt:.1e}, t_end 10")));
}

#[test]
fn criterion_6_manufactured_solutions() {
    let start = Instant::now();
    let grids: Vec<GridSpec> = [16, 32, 64].iter().map(|&n| GridSpec::square(n, 1.0).unwrap()).collect();
    let mut lines = Vec::new();
    let mut ok = true;
    for (name, mode, desc, need) in [
        ("mms_diffusion", Mode::DiffusionOnly, MmsDescriptor::diffusion_only(), 1.9),
        ("mms_full", Mode::Full, MmsDescriptor::full(), 0.9),
    ] {
        let cfg = preset(name).unwrap();
        let solver_cfg = SolverConfig { mms: Some(desc), ..cfg.solver.clone() };
        let report = mms_run(&desc, &cfg.params, &solver_cfg, &grids, mode).unwrap();
        ok &= report.monotone && report.observed_order >= need;
        let errs: Vec<f64> = report.levels.iter().map(|l| l.l2_error).collect();
        lines.push(format!("{name} order {:.3} (>= {need}) errors {}", report.observed_order, sci(&errs)));
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < 300.0;
    assert!(verdict(6, "MMS convergence", ok, &format!("{}; {secs:.1} s (budget 300 s)", lines.join("; "))));
}

#[test]
fn criterion_7_eps_uniformity() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = preset("epsstudy").unwrap();
    cfg.output = dir.path().to_path_buf();
    let summary = study::run_study(&cfg).unwrap();
    let mut members = Vec::new();
    let mut bound_ok = true;
    let mut margins = Vec::new();
    for run in &summary.runs {
        let traj = read_trajectory(&run.dir).unwrap();
        let eps = run.eps.unwrap();
        let regime = Regime::regularized(eps).unwrap();
        let report = diagnostics::audit_sup_bounds(&traj, &cfg.params, &regime);
        let e = report.entries.iter().find(|e| e.name == "sup_v_comparison").unwrap();
        bound_ok &= e.passed;
        margins.push(e.worst_margin);
        members.push((eps, traj));
    }
    let pairs: Vec<(f64, &Trajectory)> = members.iter().map(|(e, t)| (*e, t)).collect();
    let table = UniformityTable::new(&pairs);
    // cumulative grad v, grad (uv), and the log-gradient of w
    let spreads = &table.spread[..3];
    let ok = members.len() == 3 && bound_ok && spreads.iter().all(|&s| s <= 2.0);
    assert!(verdict(
        7,
        "eps uniformity",
        ok,
        &format!("spreads {spreads:.3?} (max 2), sup_v bound margins {}", sci(&margins)),
    ));
}

#[test]
fn criterion_8_weak_form_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = preset("gridstudy").unwrap();
    cfg.output = dir.path().to_path_buf();
    let summary = study::run_study(&cfg).unwrap();
    let ladder: AuditReport = summary.study_audits.clone();
    let order = ladder.entries.iter().find(|e| e.name == "residual_ladder_order").unwrap();
    let monotone = ladder.entries.iter().find(|e| e.name == "residual_ladder_monotone").unwrap();
    let ladder_ok = order.passed && monotone.passed;
    let min_order = order.worst_margin + study::RESIDUAL_ORDER;

    // regularized runs with the cutoff active (sup v0, sup w0 above 1 / eps)
    let g = GridSpec::square(32, 1.0).unwrap();
    let p = Params { d1: 0.1, d2: 0.1, d3: 0.1, ..Params::unit() };
    let s = StateTriple::new(
        Field::from_fn(g, |x, y| 1.0 + 0.5 * (PI * x).cos() * (PI * y).cos()),
        Field::from_fn(g, |x, y| 0.8 + 0.5 * (2.0 * PI * x).cos() * (PI * y).cos()),
        Field::from_fn(g, |x, y| 0.8 + 0.5 * (PI * x).cos() * (2.0 * PI * y).cos()),
        0.0,
    )
    .unwrap();
    let mut defects = Vec::new();
    for eps in [1.0, 0.8] {
        let regime = Regime::regularized(eps).unwrap();
        let cfg = SolverConfig { snapshot_interval: 1.0 / 320.0, cfl_safety: 0.3, ..SolverConfig::new(1.0, regime) };
        let traj = solver::run(&s, &p, &cfg).unwrap();
        defects.push(study::residuals_for(&traj, &p, &regime, 27).unwrap().min_defect);
    }
    let floor = -Tolerances::default().defect;
    let reg_ok = defects.iter().all(|&d| d >= floor);
    assert!(verdict(
        8,
        "weak-form residuals",
        ladder_ok && reg_ok,
        &format!(
            "classical ladder min order {min_order:.3} (>= 0.9), monotone {}; regularized min defect {} (floor {floor:e})",
            monotone.passed,
            sci(&defects)
        ),
    ));
}

#[test]
fn criterion_9_operator_suite() {
    let start = Instant::now();
    let mut fails: Vec<&str> = Vec::new();
    let mut check = |ok: bool, what: &'static str| {
        if !ok {
            fails.push(what);
        }
    };
    let line3 = GridSpec::line(3, 3.0).unwrap();
    let f = |vals: &[f64]| Field::new(line3, vals.to_vec()).unwrap();

    check(laplacian(&f(&[0.0, 1.0, 2.0])).unwrap().values() == [1.0, 0.0, -1.0], "laplacian hand example");
    check(laplacian(&Field::constant(line3, 4.2)).unwrap().values().iter().all(|&x| x == 0.0), "laplacian of constant");
    check(
        taxis_divergence(&f(&[1.0, 2.0, 3.0]), &f(&[0.0, 1.0, 0.0])).unwrap().values() == [1.0, -4.0, 3.0],
        "upwind hand example",
    );
    check(
        taxis_divergence(&f(&[1.0, 2.0, 3.0]), &Field::constant(line3, 2.0)).unwrap().values().iter().all(|&x| x == 0.0),
        "upwind with constant potential",
    );
    check(integrate(&Field::constant(GridSpec::square(4, 1.0).unwrap(), 1.0)) == 1.0, "integrate constant 1");
    check(integrate(&Field::constant(GridSpec::new(4, 2, 2.0, 1.0).unwrap(), 2.0)) == 4.0, "integrate constant 2");
    // two-cell examples, padded with a third cell that does not contribute
    let n = norms(&f(&[3.0, -4.0, 0.0]));
    check((n.l1, n.l2, n.linf) == (7.0, 5.0, 4.0), "norms hand example");
    let ramp = f(&[0.0, 1.0, 1.0]);
    check(grad_sq_integral(&ramp, None).unwrap() == 1.0, "gradient integral hand example");
    check(grad_sq_integral(&ramp, Some(&Field::constant(line3, 1.0))).unwrap() == 1.0, "unit weight");

    // divergence theorem and integration by parts on random data
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for (nx, ny) in [(3, 1), (5, 7), (16, 16), (33, 9)] {
        let g = GridSpec::new(nx, ny, nx as f64, ny as f64).unwrap();
        let tol = 10.0 * f64::EPSILON * g.len() as f64;
        let (a, b) = (random_field(&mut rng, g, 1.0), random_field(&mut rng, g, 1.0));
        check(integrate(&taxis_divergence(&a, &b).unwrap()).abs() <= tol, "divergence theorem");
        let lhs = integrate(&a.product(&laplacian(&b).unwrap()));
        let rhs = integrate(&b.product(&laplacian(&a).unwrap()));
        check((lhs - rhs).abs() <= tol, "integration by parts");
    }

    // cutoff identities and derivative bound
    let c = CutoffSpec::new(0.5).unwrap();
    check(sigma_eps(1.0, &c).unwrap() == 1.0, "cutoff first branch");
    check(sigma_eps(5.0, &c).unwrap() == 0.0, "cutoff third branch");
    check((0.0..=3.0).contains(&sigma_eps(3.0, &c).unwrap()), "cutoff middle branch");
    check(sigma_eps(-1.0, &c).is_err(), "cutoff rejects negative input");
    for eps in [1.0, 0.5, 0.1, 0.02] {
        let c = CutoffSpec::new(eps).unwrap();
        check(c.sigma_prime_bound() == sigma_prime_bound(), "bound constant");
        for k in 0..100 {
            let s = (k as f64 + 0.5) * 0.03 / eps;
            let d = sigma_eps_prime(s, &c).unwrap();
            let fd = (sigma_eps(s + 1e-5, &c).unwrap() - sigma_eps((s - 1e-5).max(0.0), &c).unwrap())
                / (s + 1e-5 - (s - 1e-5).max(0.0));
            check((fd - d).abs() <= 1e-6, "cutoff derivative vs central difference");
            check(d.abs() <= c.sigma_prime_bound(), "cutoff derivative bound");
            if s <= 1.0 / eps {
                check(d == 1.0 && sigma_eps(s, &c).unwrap() == s, "identity branch");
            } else if s >= 2.0 / eps {
                check(d == 0.0 && sigma_eps(s, &c).unwrap() == 0.0, "zero branch");
            }
        }
    }

    // kinetics hand examples
    let u = Params::unit();
    check(Params { lambda1: 2.0, ..u }.f(1.0, 0.0, 0.0) == 1.0, "f example");
    check(u.g(1.0, 1.0, 0.0) == 1.0, "g example");
    check(u.h(1.0, 1.0, 1.0) == 2.0, "h example");
    check([u.f(0.0, 0.0, 1.0), u.g(0.0, 0.0, 1.0), u.h(0.0, 0.0, 1.0)] == [0.0; 3], "kinetic equilibrium");

    let secs = start.elapsed().as_secs_f64();
    let ok = fails.is_empty() && secs < 10.0;
    assert!(verdict(9, "operator unit suite", ok, &format!("{:.3} s (budget 10 s), failures {fails:?}", secs)));
}

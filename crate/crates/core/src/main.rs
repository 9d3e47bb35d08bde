use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use alarm_taxis::config::{self, ConfigError};
use alarm_taxis::study::{self, StudyError};

/// Simulate and audit the three-species alarm-taxis system.
#[derive(Debug, Parser)]
#[command(name = "alarm-taxis-sim", version)]
struct Cli {
    /// Output directory (overrides `output.dir` for `run`; receives the
    /// report for `audit` and `residuals`).
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Print nothing but errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a study from a config file or a bundled preset name.
    Run { config: String },
    /// Re-audit a saved run directory.
    Audit { dir: PathBuf },
    /// Evaluate the weak-form residuals of a saved run directory.
    Residuals { dir: PathBuf },
}

const EXIT_AUDIT_FAILED: u8 = 1;
const EXIT_SOLVER: u8 = 2;
const EXIT_CONFIG: u8 = 3;

fn exit_code(e: &StudyError) -> u8 {
    match e {
        StudyError::Solver { .. } => EXIT_SOLVER,
        _ => EXIT_CONFIG,
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("ALARM_TAXIS_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| format!("ALARM_TAXIS_THREADS must be a nonnegative integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n.max(1))
        .build_global()
        .map_err(|e| e.to_string())
}

fn write_report(dir: &Option<PathBuf>, name: &str, text: &str) -> Result<(), StudyError> {
    if let Some(d) = dir {
        std::fs::create_dir_all(d).map_err(|e| StudyError::Io { path: d.clone(), msg: e.to_string() })?;
        let path = d.join(name);
        std::fs::write(&path, text).map_err(|e| StudyError::Io { path, msg: e.to_string() })?;
    }
    Ok(())
}

fn run(spec: &str, cli: &Cli) -> Result<bool, StudyError> {
    let mut cfg = config::load(spec)?;
    if let Some(out) = &cli.output {
        cfg.output = out.clone();
    }
    let summary = study::run_study(&cfg)?;
    if !cli.quiet {
        println!("study {} -> {}", summary.study, cfg.output.display());
        for r in &summary.runs {
            println!(
                "  {:<14} {:<12} {}x{}  steps {:<7} {}",
                r.label,
                r.regime,
                r.nx,
                r.ny,
                r.steps,
                if r.passed { "PASS" } else { "FAIL" }
            );
            for e in r.audits.failures() {
                println!("    failed {}: worst margin {:.3e} at t = {:.4}", e.name, e.worst_margin, e.time_of_worst);
            }
        }
        if !summary.study_audits.entries.is_empty() {
            print!("{}", summary.study_audits);
        }
        println!("{}", if summary.passed { "all audits passed" } else { "AUDIT FAILURE" });
    }
    Ok(summary.passed)
}

fn audit(dir: &Path, cli: &Cli) -> Result<bool, StudyError> {
    let (cfg, traj) = study::load_run(dir)?;
    let (report, _) = study::audit_saved(&cfg, &traj)?;
    let text = study::audit_text(&traj, &cfg, &report);
    write_report(&cli.output, "audit.txt", &text)?;
    if !cli.quiet {
        print!("{text}");
    }
    Ok(report.passed())
}

fn residuals(dir: &Path, cli: &Cli) -> Result<bool, StudyError> {
    let (cfg, traj) = study::load_run(dir)?;
    let report = study::residuals_for(&traj, &cfg.params, &cfg.solver.regime, cfg.test_functions)?;
    let text = report.render();
    write_report(&cli.output, "residuals.txt", &text)?;
    if !cli.quiet {
        print!("{text}");
    }
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(EXIT_CONFIG);
    }
    let result = match &cli.command {
        Command::Run { config } => run(config, &cli),
        Command::Audit { dir } => audit(dir, &cli),
        Command::Residuals { dir } => residuals(dir, &cli),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_AUDIT_FAILED),
        Err(e) => {
            eprintln!("error: {e}");
            if let StudyError::Config(ConfigError::Missing(_)) = e {
                eprintln!("(see the bundled presets for a complete example)");
            }
            ExitCode::from(exit_code(&e))
        }
    }
}

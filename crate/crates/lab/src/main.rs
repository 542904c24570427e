use std::path::{Path, PathBuf};
use std::process::ExitCode;

use activated_euler_lab::certify::run_props;
use activated_euler_lab::diagnostics::{
    gronwall_experiment, parse_ladder, refinement_study, RefinementReport, StabilityReport,
};
use activated_euler_lab::io::{create_dir, write_json, write_run, IoError, ScenarioConfig};
use activated_euler_lab::presets::random_band;
use activated_euler_lab::solver::{integrate, SolverError};
use activated_euler_lab::verify::{format_checks, verify_run};
use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use rayon::prelude::*;

/// Relative slack of the stability bound accepted by `gronwall`.
const GRONWALL_SLACK: f64 = 1e-3;

#[derive(Parser)]
#[command(name = "activated-euler", version, about = "Galerkin solver and verification lab for activated Euler fluids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a scenario and write its run directory.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay the bound checks on a run directory.
    Verify {
        /// Run directory (alternatively `--out`).
        dir: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Randomised certification of the constitutive laws.
    Props {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
    },
    /// Two-trajectory stability experiment.
    Gronwall {
        #[arg(long)]
        config: PathBuf,
        /// Relative L2 size of the perturbation.
        #[arg(long, default_value_t = 1e-6)]
        scale: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Refinement ladder over (n, eps).
    Refine {
        #[arg(long)]
        config: PathBuf,
        /// "n1:eps1,n2:eps2,..."
        #[arg(long)]
        ladder: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a scenario for several values of one parameter.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Dotted config key, e.g. `solver.eps` or `initial.amplitude`.
        #[arg(long)]
        param: String,
        /// Comma-separated JSON values.
        #[arg(long)]
        values: String,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Error tagged with its exit status.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn config_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 1, error: e.into() }
}

fn solver_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 2, error: e.into() }
}

fn classify(e: SolverError) -> Failure {
    match e {
        SolverError::Config(_)
        | SolverError::InitialData { .. }
        | SolverError::Truncation { .. }
        | SolverError::Spectral(_) => config_err(e),
        _ => solver_err(e),
    }
}

fn load(path: &Path) -> Result<ScenarioConfig, Failure> {
    let scenario = ScenarioConfig::load(path).map_err(config_err)?;
    scenario.solver_config().map_err(config_err)?;
    Ok(scenario)
}

fn cmd_run(config: &Path, out: Option<PathBuf>) -> Result<u8, Failure> {
    let scenario = load(config)?;
    let dir = out
        .or_else(|| scenario.output.dir.clone())
        .ok_or_else(|| config_err(anyhow!("no output directory: pass --out or set output.dir")))?;
    let (code, message) = run_scenario(&scenario, &dir)?;
    println!("{message}");
    Ok(code)
}

/// Runs one scenario into `dir`; returns the exit status and a summary line.
fn run_scenario(scenario: &ScenarioConfig, dir: &Path) -> Result<(u8, String), Failure> {
    let cfg = scenario.solver_config().map_err(config_err)?;
    let v0 = scenario.initial_velocity().map_err(config_err)?;
    let traj = integrate(&v0, &cfg).map_err(classify)?;
    write_run(dir, scenario, &traj).map_err(solver_err)?;
    let dv_max = traj.records.iter().fold(0.0f64, |m, r| m.max(r.dv_max));
    match &traj.failure {
        None => Ok((
            0,
            format!(
                "{}: completed t = {} with {} modes, {} steps, max |Dv| = {dv_max:.6}",
                dir.display(),
                traj.final_time(),
                traj.basis.len(),
                traj.stats.accepted
            ),
        )),
        Some(e) => Ok((2, format!("{}: stopped at t = {}: {e}", dir.display(), traj.final_time()))),
    }
}

fn cmd_verify(dir: PathBuf) -> Result<u8, Failure> {
    let checks = verify_run(&dir).map_err(config_err)?;
    print!("{}", format_checks(&checks));
    if checks.iter().all(|c| c.passed) {
        println!("all checks passed");
        Ok(0)
    } else {
        println!("verification failed");
        Ok(3)
    }
}

fn cmd_props(seed: u64, samples: usize) -> Result<u8, Failure> {
    if samples == 0 {
        eprintln!("warning: zero samples, the certification is vacuous");
    }
    let report = run_props(seed, samples).map_err(solver_err)?;
    println!("{report}");
    Ok(if report.passed() { 0 } else { 3 })
}

fn write_stability(dir: &Path, report: &StabilityReport) -> Result<(), IoError> {
    create_dir(dir)?;
    write_json(&dir.join("gronwall.json"), report)?;
    let path = dir.join("gronwall.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|source| IoError::Csv { path: path.clone(), source })?;
    w.write_record(["time", "y", "bound", "margin"]).map_err(|source| IoError::Csv { path: path.clone(), source })?;
    for i in 0..report.times.len() {
        let row = [report.times[i], report.y[i], report.bound[i], report.margin[i]].map(|x| format!("{x:?}"));
        w.write_record(&row).map_err(|source| IoError::Csv { path: path.clone(), source })?;
    }
    w.flush().map_err(|source| IoError::File { path, source })
}

fn cmd_gronwall(config: &Path, scale: f64, seed: u64, out: Option<PathBuf>) -> Result<u8, Failure> {
    if !(scale >= 0.0 && scale.is_finite()) {
        return Err(config_err(anyhow!("--scale = {scale} must be a nonnegative number")));
    }
    let scenario = load(config)?;
    let cfg = scenario.solver_config().map_err(config_err)?;
    let v0 = scenario.initial_velocity().map_err(config_err)?;
    let [lo, hi] = scenario.initial.band.unwrap_or([1.0, 4.0]);
    let mut delta = random_band(&cfg.grid, lo, hi, seed.wrapping_add(0x5eed), 1.0).map_err(config_err)?;
    let norm = delta.l2_norm();
    delta.scale(if norm > 0.0 { scale * v0.l2_norm() / norm } else { 0.0 });
    let report = gronwall_experiment(&v0, &delta, &cfg).map_err(classify)?;
    if let Some(dir) = out {
        write_stability(&dir, &report).map_err(solver_err)?;
    }
    let holds = report.holds_with(GRONWALL_SLACK);
    println!(
        "y(0) = {:.6e}, nodes = {}, max y/bound = {:.9}, min margin = {:.6e}: {}",
        report.y[0],
        report.times.len(),
        report.worst_ratio(),
        report.margin.iter().copied().fold(f64::INFINITY, f64::min),
        if holds { "PASS" } else { "FAIL" }
    );
    Ok(if holds { 0 } else { 3 })
}

fn write_refinement(dir: &Path, report: &RefinementReport) -> Result<(), IoError> {
    create_dir(dir)?;
    write_json(&dir.join("refine.json"), report)?;
    let path = dir.join("refine.csv");
    let csv_err = |source| IoError::Csv { path: path.clone(), source };
    let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
    w.write_record(["level", "n", "eps", "completed", "final_time", "max_Dv", "stress_L2a_Q", "distance_to_next"])
        .map_err(csv_err)?;
    for (i, l) in report.levels.iter().enumerate() {
        let dist = report.distances.get(i).copied().flatten().map_or(String::new(), |d| format!("{d:?}"));
        w.write_record([
            i.to_string(),
            l.level.n.to_string(),
            format!("{:?}", l.level.eps),
            l.failure.is_none().to_string(),
            format!("{:?}", l.final_time),
            format!("{:?}", l.max_dv),
            format!("{:?}", l.stress_l2a_space_time),
            dist,
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|source| IoError::File { path: path.clone(), source })
}

fn cmd_refine(config: &Path, ladder: &str, out: Option<PathBuf>) -> Result<u8, Failure> {
    let scenario = load(config)?;
    let cfg = scenario.solver_config().map_err(config_err)?;
    let ladder = parse_ladder(ladder).map_err(config_err)?;
    for level in &ladder {
        activated_euler_lab::diagnostics::level_config(&cfg, *level)
            .and_then(|c| c.validate().map(|_| c))
            .map_err(config_err)?;
    }
    let v0 = scenario.initial_velocity().map_err(config_err)?;
    let report = refinement_study(&v0, &cfg, &ladder).map_err(config_err)?;
    if let Some(dir) = out {
        write_refinement(&dir, &report).map_err(solver_err)?;
    }
    for (i, l) in report.levels.iter().enumerate() {
        let dist = report.distances.get(i).copied().flatten().map_or("-".to_string(), |d| format!("{d:.6e}"));
        println!(
            "level {i}: n = {:<6} eps = {:<10e} {} L2(Q) distance to next = {dist}",
            l.level.n,
            l.level.eps,
            l.failure.as_deref().map_or("completed".to_string(), |f| format!("FAILED ({f})")),
        );
    }
    println!("distances strictly decreasing: {}", report.decreasing);
    Ok(if report.levels.iter().any(|l| l.failure.is_some()) { 2 } else { 0 })
}

/// Sets a dotted key of a JSON document.
fn set_path(doc: &mut serde_json::Value, key: &str, value: serde_json::Value) -> anyhow::Result<()> {
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for part in &parts[..parts.len() - 1] {
        node = node.get_mut(*part).with_context(|| format!("config has no section `{part}`"))?;
    }
    let obj = node.as_object_mut().with_context(|| format!("`{key}` does not name a config field"))?;
    obj.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn cmd_sweep(config: &Path, param: &str, values: &str, out: &Path) -> Result<u8, Failure> {
    let base = load(config)?;
    let base_doc = serde_json::to_value(&base).map_err(config_err)?;
    let mut scenarios = Vec::new();
    for raw in values.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let value: serde_json::Value =
            serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
        let mut doc = base_doc.clone();
        set_path(&mut doc, param, value).map_err(config_err)?;
        let scenario: ScenarioConfig =
            serde_json::from_value(doc).with_context(|| format!("{param} = {raw}")).map_err(config_err)?;
        scenario.solver_config().with_context(|| format!("{param} = {raw}")).map_err(config_err)?;
        scenarios.push((out.join(format!("{param}={raw}")), scenario));
    }
    let results: Vec<Result<(u8, String), Failure>> =
        scenarios.par_iter().map(|(dir, s)| run_scenario(s, dir)).collect();
    let mut code = 0;
    for r in results {
        match r {
            Ok((c, line)) => {
                println!("{line}");
                code = code.max(c);
            }
            Err(f) => {
                println!("error: {:#}", f.error);
                code = code.max(f.code);
            }
        }
    }
    Ok(code)
}

fn configure_threads() -> Result<(), Failure> {
    if let Ok(raw) = std::env::var("ACTIVATED_EULER_THREADS") {
        let n: usize = raw
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| config_err(anyhow!("ACTIVATED_EULER_THREADS = `{raw}` is not a positive integer")))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(config_err)?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<u8, Failure> {
    configure_threads()?;
    match cli.command {
        Command::Run { config, out } => cmd_run(&config, out),
        Command::Verify { dir, out } => {
            let dir = dir.or(out).ok_or_else(|| config_err(anyhow!("verify needs a run directory")))?;
            cmd_verify(dir)
        }
        Command::Props { seed, samples } => cmd_props(seed, samples),
        Command::Gronwall { config, scale, seed, out } => cmd_gronwall(&config, scale, seed, out),
        Command::Refine { config, ladder, out } => cmd_refine(&config, &ladder, out),
        Command::Sweep { config, param, values, out } => cmd_sweep(&config, &param, &values, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

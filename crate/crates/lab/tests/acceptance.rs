//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use activated_euler_core::ConstitutiveLaw;
use activated_euler_lab::certify::{
    certified_laws, gradient_estimate_inequality, gradient_weight_inequality, jacobian, law_agreement, monotonicity,
    INEQUALITY_SLACK, JACOBIAN_TOL,
};
use activated_euler_lab::diagnostics::{
    energy_budget, gronwall_experiment, refinement_study, stress_norm_trace, Level,
};
use activated_euler_lab::fft::Transform;
use activated_euler_lab::grid::Grid;
use activated_euler_lab::io::ScenarioConfig;
use activated_euler_lab::presets::random_band;
use activated_euler_lab::solver::{integrate, SolverConfig, SolverError, Trajectory};
use activated_euler_lab::spectral::{physical_fields, Mollifier, Norm};
use anyhow::{ensure, Result};

const SEED: u64 = 20_240_601;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict { passed, detail: detail.into() }
}

fn scenario(text: &str) -> Result<(SolverConfig, activated_euler_lab::spectral::SpectralVelocity)> {
    let s = ScenarioConfig::parse(text)?;
    Ok((s.solver_config()?, s.initial_velocity()?))
}

fn max_dv(traj: &Trajectory) -> f64 {
    traj.records.iter().map(|r| r.dv_max).fold(0.0, f64::max)
}

fn criterion_1() -> Result<Verdict> {
    let mut lines = Vec::new();
    let mut ok = true;
    for (name, law, bound) in certified_laws() {
        let r = monotonicity(&law, name, bound, 1_000_000, SEED)?;
        ok &= r.violations == 0;
        lines.push(format!("{name}: {} violations, min rel gap {:.3e}", r.violations, r.min_relative_gap));
    }
    Ok(verdict(ok, lines.join("; ")))
}

fn criterion_2() -> Result<Verdict> {
    let mut worst: f64 = 0.0;
    for (name, law, bound) in certified_laws() {
        let cap = law.regularization_cap().unwrap_or(if law.cap().is_finite() { law.cap() - 0.1 } else { bound });
        worst = worst.max(jacobian(&law, name, cap, 10_000, SEED)?.max_relative_error);
    }
    Ok(verdict(worst < JACOBIAN_TOL, format!("max relative error {worst:.3e}")))
}

fn criterion_3() -> Result<Verdict> {
    let laws = certified_laws();
    let (sharp, reg) = (laws[0].1, laws[1].1);
    let cap_n = reg.regularization_cap().expect("regularized");
    let n = 100_000;
    let results = [
        gradient_weight_inequality(&sharp, "sharp", sharp.cap(), n, SEED)?,
        gradient_weight_inequality(&reg, "regularized", cap_n, n, SEED)?,
        gradient_estimate_inequality(&sharp, "sharp", sharp.cap(), n, SEED)?,
        gradient_estimate_inequality(&reg, "regularized", 2.0 * reg.cap(), n, SEED)?,
    ];
    let worst = results.iter().map(|r| r.max_ratio).fold(0.0, f64::max);
    Ok(verdict(worst <= 1.0 + INEQUALITY_SLACK, format!("max lhs/rhs {worst:.12}")))
}

fn criterion_4() -> Result<Verdict> {
    let laws = certified_laws();
    let r = law_agreement(&laws[0].1, &laws[1].1, 100_000, SEED)?;
    Ok(verdict(r.mismatches == 0, format!("{} mismatches", r.mismatches)))
}

fn criterion_5(traj: &Trajectory) -> Result<Verdict> {
    ensure!(traj.completed(), "activated run failed: {:?}", traj.failure);
    let budget = energy_budget(&traj.records)?;
    let e0 = budget.initial_energy();
    let dissipated = budget.cumulative_dissipation_s.last().copied().unwrap_or(0.0);
    Ok(verdict(
        budget.max_abs_residual <= 1e-6 * e0 && dissipated > 0.0,
        format!("residual {:.3e} E0, int dissipation_S {dissipated:.4e}", budget.max_abs_residual / e0),
    ))
}

fn criterion_6(traj: &Trajectory) -> Result<Verdict> {
    ensure!(traj.completed(), "sub-activation run failed: {:?}", traj.failure);
    let e0 = traj.records[0].kinetic_energy;
    let drift = traj.records.iter().map(|r| (r.kinetic_energy - e0).abs()).fold(0.0, f64::max) / e0;
    let inert = traj.records.iter().all(|r| r.dissipation_s == 0.0);
    Ok(verdict(
        inert && drift < 1e-7 && traj.records.last().unwrap().time == 1.0,
        format!("dissipation_S identically zero: {inert}, drift {drift:.3e} E0"),
    ))
}

fn criterion_7() -> Result<Verdict> {
    let (tg_cfg, tg) = scenario(include_str!("../../../configs/gronwall_tg.json"))?;
    let mut act_cfg = tg_cfg.clone();
    act_cfg.grid = Grid::new(2, 2.0 * PI, 64)?;
    act_cfg.eps = 1e-3;
    act_cfg.n = act_cfg.capacity();
    let act = random_band(&act_cfg.grid, 1.0, 3.0, 3, 0.99)?;
    let mut details = Vec::new();
    let mut ok = true;
    for (name, cfg, v0) in [("taylor-green", &tg_cfg, &tg), ("activated N=64", &act_cfg, &act)] {
        assert_eq!(cfg.t_end, 0.5);
        let mut delta = random_band(&cfg.grid, 1.0, 3.0, 3 + 0x5eed, 1.0)?;
        delta.scale(1e-6 * v0.l2_norm() / delta.l2_norm());
        let report = gronwall_experiment(v0, &delta, cfg)?;
        ok &= report.holds_with(1e-3) && report.y[0] > 0.0;
        details.push(format!("{name}: max y/bound {:.6}", report.worst_ratio()));
    }
    Ok(verdict(ok, details.join("; ")))
}

fn criterion_8(traj: &Trajectory, law: &ConstitutiveLaw) -> Result<Verdict> {
    let v0_sq = 2.0 * traj.records[0].kinetic_energy;
    let trace = stress_norm_trace(&traj.records, 0.0, law.integrability_exponent())?;
    let bound = v0_sq / law.m();
    Ok(verdict(
        trace.l1_integral <= bound * (1.0 + 1e-4),
        format!("int ||S||_1 = {:.4e} <= {:.4e}", trace.l1_integral, bound),
    ))
}

fn criterion_9(runs: &[(&str, f64)]) -> Result<Verdict> {
    let sharp = ConstitutiveLaw::sharp(1.0, 4.0, 0.25)?;
    let (mut cfg, _) = scenario(include_str!("../../../configs/activated_2d.json"))?;
    cfg.law = sharp;
    cfg.grid = Grid::new(2, 2.0 * PI, 32)?;
    cfg.n = cfg.capacity();
    let v0 = random_band(&cfg.grid, 1.0, 3.0, 3, 0.99)?;
    let viscous = integrate(&v0, &cfg)?;
    cfg.eps = 0.0;
    cfg.n = cfg.capacity();
    let inviscid = integrate(&v0, &cfg)?;
    let aborted = matches!(inviscid.failure, Some(SolverError::InviscidActivation { .. }));

    let mut all: Vec<(&str, f64)> = runs.to_vec();
    all.push(("sharp eps=1e-3", max_dv(&viscous)));
    all.push(("sharp eps=0", max_dv(&inviscid)));
    let worst = all.iter().map(|r| r.1).fold(0.0, f64::max);
    let ok = worst < 4.0 && aborted;
    let sharp_outcome = match &viscous.failure {
        None => "completed".to_string(),
        Some(e) => format!("stopped: {e}"),
    };
    Ok(verdict(
        ok,
        format!(
            "max ||Dv||_inf {worst:.6} over {} runs, sharp eps=1e-3 {sharp_outcome}, eps=0 aborted: {aborted}",
            all.len()
        ),
    ))
}

fn criterion_10(cfg: &SolverConfig, v0: &activated_euler_lab::spectral::SpectralVelocity) -> Result<(Verdict, f64)> {
    let ladder = [Level { n: 64, eps: 1e-2 }, Level { n: 128, eps: 5e-3 }, Level { n: 256, eps: 2.5e-3 }];
    let report = refinement_study(v0, cfg, &ladder)?;
    let dv = report.levels.iter().map(|l| l.max_dv).fold(0.0, f64::max);
    let distances: Vec<String> =
        report.distances.iter().map(|d| d.map_or("failed".into(), |d| format!("{d:.5e}"))).collect();
    Ok((verdict(report.decreasing, format!("distances [{}]", distances.join(", "))), dv))
}

fn criterion_11() -> Result<Verdict> {
    let grid = Grid::new(2, 2.0 * PI, 64)?;
    let mut t = Transform::new(&grid);
    let widths = [0.05, 0.1, 0.2, 0.4, 0.8];
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for i in 0..100u64 {
        let v = random_band(&grid, 1.0, 12.0, SEED + i, 1.0)?;
        let moll = Mollifier::new(&mut t, widths[i as usize % widths.len()])?;
        let (_, dv) = physical_fields(&mut t, &v);
        let (_, dv_eps) = physical_fields(&mut t, &moll.apply(&v));
        for p in [Norm::L(2.0), Norm::L(4.0), Norm::Inf] {
            let ratio = dv_eps.norm(p) / dv.norm(p);
            worst = worst.max(ratio);
            if ratio > 1.0 {
                violations += 1;
            }
        }
    }
    Ok(verdict(violations == 0, format!("{violations} violations, max ratio {worst:.12}")))
}

fn report(id: usize, name: &str, started: Instant, outcome: Result<Verdict>) -> bool {
    let secs = started.elapsed().as_secs_f64();
    let (passed, detail) = match outcome {
        Ok(v) => (v.passed, v.detail),
        Err(e) => (false, format!("error: {e:#}")),
    };
    println!("[{id:>2}] {} {name}: {detail} ({secs:.1} s)", if passed { "PASS" } else { "FAIL" });
    passed
}

fn main() -> ExitCode {
    let mut passed = true;

    let s = Instant::now();
    passed &= report(1, "monotonicity", s, criterion_1());
    let s = Instant::now();
    passed &= report(2, "jacobian vs finite differences", s, criterion_2());
    let s = Instant::now();
    passed &= report(3, "gradient inequalities", s, criterion_3());
    let s = Instant::now();
    passed &= report(4, "sharp/regularized agreement", s, criterion_4());

    let s = Instant::now();
    let activated = scenario(include_str!("../../../configs/activated_2d.json"))
        .and_then(|(cfg, v0)| Ok((integrate(&v0, &cfg)?, cfg, v0)));
    let mut dv_runs: Vec<(&str, f64)> = Vec::new();
    match &activated {
        Ok((traj, cfg, _)) => {
            dv_runs.push(("activated N=128", max_dv(traj)));
            passed &= report(5, "energy identity", s, criterion_5(traj));
            let s = Instant::now();
            passed &= report(8, "stress bound", s, criterion_8(traj, &cfg.law));
        }
        Err(e) => {
            passed &= report(5, "energy identity", s, Err(anyhow::anyhow!("{e:#}")));
            passed &= report(8, "stress bound", s, Err(anyhow::anyhow!("{e:#}")));
        }
    }

    let s = Instant::now();
    let sub = scenario(include_str!("../../../configs/taylor_green_sub.json"))
        .and_then(|(cfg, v0)| Ok(integrate(&v0, &cfg)?));
    match &sub {
        Ok(traj) => {
            dv_runs.push(("taylor-green", max_dv(traj)));
            passed &= report(6, "sub-activation inertness", s, criterion_6(traj));
        }
        Err(e) => passed &= report(6, "sub-activation inertness", s, Err(anyhow::anyhow!("{e:#}"))),
    }

    let s = Instant::now();
    passed &= report(7, "gronwall stability", s, criterion_7());

    let s = Instant::now();
    match &activated {
        Ok((_, cfg, v0)) => match criterion_10(cfg, v0) {
            Ok((v, dv)) => {
                dv_runs.push(("refinement ladder", dv));
                passed &= report(10, "refinement ordering", s, Ok(v));
            }
            Err(e) => passed &= report(10, "refinement ordering", s, Err(e)),
        },
        Err(e) => passed &= report(10, "refinement ordering", s, Err(anyhow::anyhow!("{e:#}"))),
    }

    let s = Instant::now();
    passed &= report(9, "admissibility", s, criterion_9(&dv_runs));
    let s = Instant::now();
    passed &= report(11, "mollifier contraction", s, criterion_11());

    if passed {
        println!("all acceptance criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance FAILED");
        ExitCode::FAILURE
    }
}

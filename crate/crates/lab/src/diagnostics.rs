//! Energy budgets, a-priori bound replays, activation measures, the
//! two-trajectory stability experiment and refinement ladders.
//!
//! Everything except the two experiments works on diagnostics records
//! alone, so the checks can be replayed from a persisted CSV file.

use std::sync::Arc;

use activated_euler_core::{ConstitutiveLaw, LawKind};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::basis::Basis;
use crate::solver::{integrate, integrate_with, replay, transfer, Snapshot, SolverConfig, SolverError, Trajectory};
use crate::spectral::SpectralVelocity;

#[derive(Debug, Error, PartialEq)]
pub enum DiagnosticsError {
    #[error("the trajectory has no records")]
    Empty,
    #[error("record times are not strictly increasing at index {0}")]
    Times(usize),
    #[error("invalid refinement ladder: {0}")]
    Ladder(String),
}

/// One time sample of the tracked integrals.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct DiagnosticsRecord {
    pub time: f64,
    /// `1/2 ||v||_2^2`
    pub kinetic_energy: f64,
    /// `(S_n(D v), D v)`
    pub dissipation_s: f64,
    /// `eps ((1 + |D v|^2) D v, D v)`
    pub dissipation_eps: f64,
    /// `||D v||_inf`
    pub dv_max: f64,
    /// `||S_n||_1`
    pub stress_l1: f64,
    /// `||S_n||_{2(1-a)}`
    pub stress_l2a: f64,
    /// Volume fraction of `{|D v| >= M - 1/n}`.
    pub activation_fraction: f64,
    /// `int (|D v| - (M - 1/n))_+ / ((|D v| - (M - 1/n))_+ + omega)` per width.
    pub soft_activation: Vec<f64>,
    pub cumulative_dissipation_s: f64,
    pub cumulative_dissipation_eps: f64,
}

/// Trapezoid rule on `(t_i, f_i)`.
pub fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times.windows(2).zip(values.windows(2)).map(|(t, f)| 0.5 * (t[1] - t[0]) * (f[0] + f[1])).sum()
}

/// Fills in the cumulative dissipation columns (trapezoid rule on the
/// recorded nodes).
pub fn accumulate(records: &mut [DiagnosticsRecord]) {
    let mut s = 0.0;
    let mut e = 0.0;
    for i in 0..records.len() {
        if i > 0 {
            let dt = records[i].time - records[i - 1].time;
            s += 0.5 * dt * (records[i - 1].dissipation_s + records[i].dissipation_s);
            e += 0.5 * dt * (records[i - 1].dissipation_eps + records[i].dissipation_eps);
        }
        records[i].cumulative_dissipation_s = s;
        records[i].cumulative_dissipation_eps = e;
    }
}

fn check_times(records: &[DiagnosticsRecord]) -> Result<(), DiagnosticsError> {
    if records.is_empty() {
        return Err(DiagnosticsError::Empty);
    }
    for i in 1..records.len() {
        if !(records[i].time > records[i - 1].time) {
            return Err(DiagnosticsError::Times(i));
        }
    }
    Ok(())
}

/// `1/2 ||v(t)||^2 + int_0^t (dissipations) - 1/2 ||v(0)||^2` on the nodes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnergyBudget {
    pub times: Vec<f64>,
    pub kinetic: Vec<f64>,
    pub cumulative_dissipation_s: Vec<f64>,
    pub cumulative_dissipation_eps: Vec<f64>,
    pub residual: Vec<f64>,
    pub max_abs_residual: f64,
    pub time_of_max: f64,
}

impl EnergyBudget {
    pub fn initial_energy(&self) -> f64 {
        self.kinetic[0]
    }
}

pub fn energy_budget(records: &[DiagnosticsRecord]) -> Result<EnergyBudget, DiagnosticsError> {
    check_times(records)?;
    let mut recs = records.to_vec();
    accumulate(&mut recs);
    let e0 = recs[0].kinetic_energy;
    let residual: Vec<f64> = recs
        .iter()
        .map(|r| r.kinetic_energy + r.cumulative_dissipation_s + r.cumulative_dissipation_eps - e0)
        .collect();
    let (imax, max_abs) =
        residual.iter().enumerate().fold(
            (0, 0.0f64),
            |(bi, bv), (i, r)| {
                if r.abs() > bv {
                    (i, r.abs())
                } else {
                    (bi, bv)
                }
            },
        );
    Ok(EnergyBudget {
        times: recs.iter().map(|r| r.time).collect(),
        kinetic: recs.iter().map(|r| r.kinetic_energy).collect(),
        cumulative_dissipation_s: recs.iter().map(|r| r.cumulative_dissipation_s).collect(),
        cumulative_dissipation_eps: recs.iter().map(|r| r.cumulative_dissipation_eps).collect(),
        residual,
        max_abs_residual: max_abs,
        time_of_max: recs[imax].time,
    })
}

/// Constants the bound replays need besides the records.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundContext {
    pub rtol: f64,
    pub law: ConstitutiveLaw,
    /// `L^d`
    pub volume: f64,
}

/// Measured value against its bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundCheck {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub passed: bool,
}

impl BoundCheck {
    fn le(name: &str, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, bound, passed: value <= bound }
    }

    fn lt(name: &str, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, bound, passed: value < bound }
    }

    pub fn slack(&self) -> f64 {
        self.bound - self.value
    }
}

/// Space-time measure of `{|D v| >= M - 1/n}` allowed by the L^1 stress
/// estimate: `||v(0)||_2^2 (M^a - (M - 1/n)^a)^(1/a) / ((M - m - 1/n)(M - 1/n))`.
pub fn hard_measure_bound(law: &ConstitutiveLaw, v0_norm_sq: f64) -> Option<f64> {
    let LawKind::RegularizedEuler { n } = law.kind() else {
        return None;
    };
    let p = law.params();
    let cap_n = p.cap - 1.0 / n as f64;
    let c = p.cap.powf(p.a) - cap_n.powf(p.a);
    Some(v0_norm_sq * c.powf(1.0 / p.a) / ((p.cap - p.m - 1.0 / n as f64) * cap_n))
}

/// Replays the energy identity and the a-priori bounds on a record series.
/// Bounds carry the relative slack `100 rtol`.
pub fn check_bounds(records: &[DiagnosticsRecord], ctx: &BoundContext) -> Result<Vec<BoundCheck>, DiagnosticsError> {
    let budget = energy_budget(records)?;
    let slack = 1.0 + 100.0 * ctx.rtol;
    let e0 = budget.initial_energy();
    let v0_sq = 2.0 * e0;
    let times = &budget.times;
    let last = times.len() - 1;
    let mut out = vec![BoundCheck::le("energy identity residual", budget.max_abs_residual, 100.0 * ctx.rtol * e0)];
    let sup_sq = budget.kinetic.iter().fold(0.0f64, |m, &e| m.max(2.0 * e));
    out.push(BoundCheck::le("sup ||v(t)||^2 <= ||v(0)||^2", sup_sq, v0_sq * slack));
    let total = budget.cumulative_dissipation_s[last] + budget.cumulative_dissipation_eps[last];
    out.push(BoundCheck::le("int dissipation <= 1/2 ||v(0)||^2", total, e0 * slack));
    let l1: Vec<f64> = records.iter().map(|r| r.stress_l1).collect();
    let l1_int = trapezoid(times, &l1);
    out.push(BoundCheck::le("int ||S||_1 <= ||v(0)||^2 / m", l1_int, v0_sq / ctx.law.m() * slack));
    if let Some(bound) = hard_measure_bound(&ctx.law, v0_sq) {
        let frac: Vec<f64> = records.iter().map(|r| r.activation_fraction).collect();
        let measure = ctx.volume * trapezoid(times, &frac);
        out.push(BoundCheck::le("|{|Dv| >= M - 1/n}| space-time measure", measure, bound));
    }
    let dv_max = records.iter().fold(0.0f64, |m, r| m.max(r.dv_max));
    out.push(BoundCheck::lt("max ||D v||_inf < M", dv_max, ctx.law.cap()));
    let min_value = records.iter().fold(f64::INFINITY, |m, r| {
        m.min(r.kinetic_energy).min(r.dissipation_s).min(r.dissipation_eps).min(r.stress_l1)
    });
    out.push(BoundCheck::le("energy and dissipations nonnegative (negated minimum)", 0.0 - min_value, 0.0));
    let frac_ok = records.iter().all(|r| (0.0..=1.0).contains(&r.activation_fraction));
    out.push(BoundCheck {
        name: "activation fraction in [0, 1]".into(),
        value: if frac_ok { 0.0 } else { 1.0 },
        bound: 0.0,
        passed: frac_ok,
    });
    Ok(out)
}

/// Hard and soft activation measures over time.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ActivationSeries {
    pub times: Vec<f64>,
    pub hard_fraction: Vec<f64>,
    /// `soft[k][i]`: width `k` at node `i`.
    pub soft: Vec<Vec<f64>>,
    /// `L^d int_0^T hard_fraction dt`
    pub space_time_hard: f64,
}

pub fn activation_measures(records: &[DiagnosticsRecord], volume: f64) -> Result<ActivationSeries, DiagnosticsError> {
    check_times(records)?;
    let times: Vec<f64> = records.iter().map(|r| r.time).collect();
    let hard_fraction: Vec<f64> = records.iter().map(|r| r.activation_fraction).collect();
    let widths = records[0].soft_activation.len();
    let soft = (0..widths)
        .map(|k| records.iter().map(|r| r.soft_activation.get(k).copied().unwrap_or(0.0)).collect())
        .collect();
    let space_time_hard = volume * trapezoid(&times, &hard_fraction);
    Ok(ActivationSeries { times, hard_fraction, soft, space_time_hard })
}

/// `h^d sum_x (s(x) - level)_+ / ((s(x) - level)_+ + omega)` for pointwise
/// strain magnitudes `s`.
pub fn soft_measure(strain: &[f64], level: f64, omega: f64, cell_volume: f64) -> f64 {
    strain
        .iter()
        .map(|&s| {
            let x = (s - level).max(0.0);
            x / (x + omega)
        })
        .sum::<f64>()
        * cell_volume
}

/// Spatial stress norms over time and their integrals over `[delta, T]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StressTrace {
    pub times: Vec<f64>,
    pub l1: Vec<f64>,
    pub l2a: Vec<f64>,
    pub delta: f64,
    /// `int_delta^T ||S||_1 dt`
    pub l1_integral: f64,
    /// `(int_delta^T ||S||_p^p dt)^(1/p)` with `p = 2(1 - a)`.
    pub l2a_space_time: f64,
}

fn integral_from(times: &[f64], values: &[f64], delta: f64) -> f64 {
    let mut total = 0.0;
    for i in 1..times.len() {
        let (t0, t1) = (times[i - 1], times[i]);
        if t1 <= delta {
            continue;
        }
        let (mut a, mut fa) = (t0, values[i - 1]);
        if t0 < delta {
            let w = (delta - t0) / (t1 - t0);
            fa = values[i - 1] + w * (values[i] - values[i - 1]);
            a = delta;
        }
        total += 0.5 * (t1 - a) * (fa + values[i]);
    }
    total
}

pub fn stress_norm_trace(records: &[DiagnosticsRecord], delta: f64, p: f64) -> Result<StressTrace, DiagnosticsError> {
    check_times(records)?;
    let times: Vec<f64> = records.iter().map(|r| r.time).collect();
    let l1: Vec<f64> = records.iter().map(|r| r.stress_l1).collect();
    let l2a: Vec<f64> = records.iter().map(|r| r.stress_l2a).collect();
    let powered: Vec<f64> = l2a.iter().map(|x| x.powf(p)).collect();
    Ok(StressTrace {
        l1_integral: integral_from(&times, &l1, delta),
        l2a_space_time: integral_from(&times, &powered, delta).powf(1.0 / p),
        times,
        l1,
        l2a,
        delta,
    })
}

/// `y(t) = ||v1(t) - v2(t)||_2^2` against `e^{2Mt} y(0)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityReport {
    pub times: Vec<f64>,
    pub y: Vec<f64>,
    pub bound: Vec<f64>,
    pub margin: Vec<f64>,
    /// Solver tolerance, for the default slack `100 rtol`.
    pub rtol: f64,
}

impl StabilityReport {
    /// `y(t) <= bound(t) (1 + rel)` at every node.
    pub fn holds_with(&self, rel: f64) -> bool {
        self.y.iter().zip(&self.bound).all(|(y, b)| *y <= b * (1.0 + rel))
    }

    pub fn holds(&self) -> bool {
        self.holds_with(100.0 * self.rtol)
    }

    /// `max_t y(t)/bound(t)`; 0 when `y(0) = 0`.
    pub fn worst_ratio(&self) -> f64 {
        self.y
            .iter()
            .zip(&self.bound)
            .map(|(y, b)| {
                if *b > 0.0 {
                    y / b
                } else if *y > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max)
    }
}

/// Runs `v0` adaptively, then `v0 + perturbation` through the same nodes,
/// and compares the squared distance with the stability bound.
pub fn gronwall_experiment(
    v0: &SpectralVelocity,
    perturbation: &SpectralVelocity,
    cfg: &SolverConfig,
) -> Result<StabilityReport, SolverError> {
    let mut first: Vec<(f64, f64, Vec<f64>)> = Vec::new();
    let traj = integrate_with(v0, cfg, |s| first.push((s.time, s.dt, s.c.clone())))?;
    if let Some(e) = traj.failure {
        return Err(e);
    }
    let nodes: Vec<(f64, f64)> = first.iter().map(|(t, dt, _)| (*t, *dt)).collect();
    let times: Vec<f64> = nodes.iter().map(|n| n.0).collect();
    let v1 = v0.add_scaled(1.0, perturbation)?;
    let mut y = Vec::with_capacity(times.len());
    let mut node = 0;
    replay(&v1, cfg, &nodes, |s| {
        let c1 = &first[node].2;
        y.push(c1.iter().zip(&s.c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>());
        node += 1;
    })?;
    let cap = cfg.law.cap();
    let bound: Vec<f64> = times.iter().map(|t| (2.0 * cap * t).exp() * y[0]).collect();
    let margin = bound.iter().zip(&y).map(|(b, y)| b - y).collect();
    Ok(StabilityReport { times, y, bound, margin, rtol: cfg.rtol })
}

/// One rung of a refinement ladder.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Level {
    pub n: usize,
    pub eps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelOutcome {
    pub level: Level,
    pub failure: Option<String>,
    pub final_time: f64,
    pub max_dv: f64,
    /// `||S||_{L^{2(1-a)}(Q)}`
    pub stress_l2a_space_time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RefinementReport {
    pub levels: Vec<LevelOutcome>,
    /// `L^2(Q)` distance between levels `i` and `i + 1`; `None` when either failed.
    pub distances: Vec<Option<f64>>,
    /// Whether consecutive distances decrease strictly.
    pub decreasing: bool,
}

/// Parses `"n1:eps1,n2:eps2,..."`.
pub fn parse_ladder(spec: &str) -> Result<Vec<Level>, DiagnosticsError> {
    spec.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|item| {
            let (n, eps) = item
                .split_once(':')
                .ok_or_else(|| DiagnosticsError::Ladder(format!("`{item}` is not of the form n:eps")))?;
            let n = n.trim().parse().map_err(|_| DiagnosticsError::Ladder(format!("bad mode count `{n}`")))?;
            let eps = eps.trim().parse().map_err(|_| DiagnosticsError::Ladder(format!("bad eps `{eps}`")))?;
            Ok(Level { n, eps })
        })
        .collect()
}

/// Configuration of one ladder rung: the Galerkin size and, for the
/// regularised law, the regularisation index both become `n`.
pub fn level_config(base: &SolverConfig, level: Level) -> Result<SolverConfig, SolverError> {
    let mut cfg = base.clone();
    cfg.n = level.n;
    cfg.eps = level.eps;
    if let LawKind::RegularizedEuler { .. } = base.law.kind() {
        let n = u32::try_from(level.n).map_err(|_| SolverError::Config(format!("n = {} too large", level.n)))?;
        cfg.law = ConstitutiveLaw::new(LawKind::RegularizedEuler { n }, *base.law.params())?;
    }
    Ok(cfg)
}

fn interpolate(snaps: &[Snapshot], t: f64) -> Vec<f64> {
    let i = snaps.partition_point(|s| s.time < t);
    if i == 0 {
        return snaps[0].c.clone();
    }
    if i == snaps.len() {
        return snaps[i - 1].c.clone();
    }
    let (a, b) = (&snaps[i - 1], &snaps[i]);
    if b.time == t {
        return b.c.clone();
    }
    let w = (t - a.time) / (b.time - a.time);
    a.c.iter().zip(&b.c).map(|(x, y)| x + w * (y - x)).collect()
}

/// `L^2(Q)` distance of two trajectories on the union of their snapshot
/// times, with coefficients expressed on `common` and linear interpolation
/// in time.
pub fn trajectory_distance(a: &Trajectory, b: &Trajectory, common: &Arc<Basis>) -> Result<f64, SolverError> {
    let lift = |traj: &Trajectory| -> Result<Vec<Snapshot>, SolverError> {
        traj.snapshots
            .iter()
            .map(|s| {
                let v = SpectralVelocity::new(traj.basis.clone(), s.c.clone())?;
                Ok(Snapshot { time: s.time, c: transfer(&v, common.clone())?.coefficients().to_vec() })
            })
            .collect()
    };
    let sa = lift(a)?;
    let sb = lift(b)?;
    let t_end = a.final_time().min(b.final_time());
    let mut times: Vec<f64> = sa.iter().chain(&sb).map(|s| s.time).filter(|&t| t <= t_end).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let sq: Vec<f64> = times
        .iter()
        .map(|&t| {
            let ca = interpolate(&sa, t);
            let cb = interpolate(&sb, t);
            ca.iter().zip(&cb).map(|(x, y)| (x - y) * (x - y)).sum()
        })
        .collect();
    Ok(trapezoid(&times, &sq).sqrt())
}

/// Runs every rung (concurrently) from the same initial velocity and
/// measures consecutive `L^2(Q)` distances. Failed rungs are reported and
/// skipped.
pub fn refinement_study(
    v0: &SpectralVelocity,
    base: &SolverConfig,
    ladder: &[Level],
) -> Result<RefinementReport, DiagnosticsError> {
    if ladder.is_empty() {
        return Err(DiagnosticsError::Ladder("no levels".into()));
    }
    for w in ladder.windows(2) {
        if w[1].n < w[0].n || w[1].eps > w[0].eps {
            return Err(DiagnosticsError::Ladder("n must be nondecreasing and eps nonincreasing".into()));
        }
    }
    let runs: Vec<Result<Trajectory, SolverError>> = ladder
        .par_iter()
        .map(|&level| {
            let cfg = level_config(base, level)?;
            integrate(v0, &cfg)
        })
        .collect();
    let p = base.law.integrability_exponent();
    let levels = ladder
        .iter()
        .zip(&runs)
        .map(|(&level, run)| match run {
            Ok(traj) => LevelOutcome {
                level,
                failure: traj.failure.as_ref().map(|e| e.to_string()),
                final_time: traj.final_time(),
                max_dv: traj.records.iter().fold(0.0, |m, r| m.max(r.dv_max)),
                stress_l2a_space_time: stress_norm_trace(&traj.records, 0.0, p).map_or(f64::NAN, |s| s.l2a_space_time),
            },
            Err(e) => LevelOutcome {
                level,
                failure: Some(e.to_string()),
                final_time: 0.0,
                max_dv: f64::NAN,
                stress_l2a_space_time: f64::NAN,
            },
        })
        .collect::<Vec<_>>();
    let mut distances = Vec::new();
    for i in 0..ladder.len().saturating_sub(1) {
        let d = match (&runs[i], &runs[i + 1]) {
            (Ok(a), Ok(b)) if a.completed() && b.completed() => {
                let common = if a.basis.len() >= b.basis.len() { &a.basis } else { &b.basis };
                trajectory_distance(a, b, common).ok()
            }
            _ => None,
        };
        distances.push(d);
    }
    let decreasing =
        distances.iter().all(Option::is_some) && distances.windows(2).all(|w| w[1].unwrap() < w[0].unwrap());
    Ok(RefinementReport { levels, distances, decreasing })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(t: f64, e: f64, ds: f64) -> DiagnosticsRecord {
        DiagnosticsRecord { time: t, kinetic_energy: e, dissipation_s: ds, ..Default::default() }
    }

    #[test]
    fn budget_of_exact_exponential_decay() {
        // E' = -D with E = e^{-t}, D = e^{-t}
        let recs: Vec<_> = (0..=1000)
            .map(|i| {
                let t = i as f64 / 1000.0;
                rec(t, (-t).exp(), (-t).exp())
            })
            .collect();
        let b = energy_budget(&recs).unwrap();
        assert!(b.max_abs_residual < 1e-7);
    }

    #[test]
    fn empty_and_unordered_records_are_rejected() {
        assert_eq!(energy_budget(&[]), Err(DiagnosticsError::Empty));
        let recs = vec![rec(0.0, 1.0, 0.0), rec(0.0, 1.0, 0.0)];
        assert_eq!(energy_budget(&recs), Err(DiagnosticsError::Times(1)));
    }

    #[test]
    fn integral_from_delta_interpolates() {
        let t = [0.0, 1.0, 2.0];
        let f = [0.0, 1.0, 2.0];
        assert!((integral_from(&t, &f, 0.0) - 2.0).abs() < 1e-15);
        assert!((integral_from(&t, &f, 0.5) - 1.875).abs() < 1e-15);
        assert_eq!(integral_from(&t, &f, 2.0), 0.0);
    }

    #[test]
    fn ladder_parsing() {
        assert_eq!(
            parse_ladder("64:1e-2, 128:5e-3").unwrap(),
            vec![Level { n: 64, eps: 1e-2 }, Level { n: 128, eps: 5e-3 }]
        );
        assert!(parse_ladder("64").is_err());
        assert!(parse_ladder("x:1").is_err());
    }
}

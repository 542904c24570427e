//! Time integration of the regularised Galerkin system.
//!
//! For `v = sum_r c_r omega_r` the coefficients evolve by
//!
//! ```text
//! dc_r/dt = (F, D omega_r),   F = v (x) v - S_n(D v) - eps (1 + |D v|^2) D v,
//! ```
//!
//! the weak form with the convective term in divergence form. `v` and `D v`
//! are synthesised on the grid, `F` is formed pointwise and the pairings are
//! read off its transform. Because `c . g(c) = (F, D v)` holds exactly in
//! discrete form and the band keeps the cubic convective pairing alias-free,
//! the convective contribution to the energy balance cancels to rounding.

use std::collections::HashMap;
use std::sync::Arc;

use activated_euler_core::ode::{Dopri5, OdeSystem, StepControl, Tolerances};
use activated_euler_core::{stress_magnitude, ConstitutiveLaw, LawError, SymTensor};
use rustfft::num_complex::Complex64;
use thiserror::Error;

use crate::basis::{Basis, Parity};
use crate::diagnostics::DiagnosticsRecord;
use crate::fft::Transform;
use crate::grid::Grid;
use crate::spectral::{mollify, strain_max, SpectralError, SpectralVelocity};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Law(#[from] LawError),
    #[error("initial data rejected: ||D v0||_inf = {dv_max} is not below the activation threshold m = {m}")]
    InitialData { dv_max: f64, m: f64 },
    #[error("n = {n} is too small for the initial data: ||D P^n v0eps||_inf = {dv_max} is not below m = {m}")]
    Truncation { n: usize, dv_max: f64, m: f64 },
    #[error("step size fell below {dt_min:e} at t = {time}: ||D v||_inf = {dv_max}, activation fraction = {activation_fraction}")]
    Stiffness { time: f64, dt_min: f64, dv_max: f64, activation_fraction: f64 },
    #[error("non-finite {term} at t = {time}")]
    NonFinite { term: &'static str, time: f64 },
    #[error("inviscid reference run activated at t = {time}: ||D v||_inf = {dv_max} reached m = {m}")]
    InviscidActivation { time: f64, dv_max: f64, m: f64 },
    #[error("replay step to t = {time} failed: {reason}")]
    Replay { time: f64, reason: String },
}

/// Everything that defines one run.
#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub law: ConstitutiveLaw,
    /// Weight of `eps div((1 + |D v|^2) D v)`; also the mollifier width.
    pub eps: f64,
    /// Number of Galerkin modes.
    pub n: usize,
    pub grid: Grid,
    pub t_end: f64,
    pub dt_init: f64,
    pub rtol: f64,
    pub atol: f64,
    /// Trial states with `||D v||_inf >= M - 1/n - safety_margin (M - m)`
    /// are rejected (regularised law only).
    pub safety_margin: f64,
    /// Spacing of snapshot times; `None` keeps only the end points.
    pub snapshot_every: Option<f64>,
    /// Widths of the soft activation measures.
    pub omegas: Vec<f64>,
}

pub const DEFAULT_OMEGAS: [f64; 3] = [1e-1, 1e-2, 1e-3];

impl SolverConfig {
    /// Largest `|k_i|` of the basis: the 1/2 rule when the quartic
    /// regularising term is present, the 2/3 rule otherwise.
    pub fn band(&self) -> usize {
        let degree = if self.eps > 0.0 { 3 } else { 2 };
        self.grid.dealiased_band(degree)
    }

    /// Number of modes in the full band.
    pub fn capacity(&self) -> usize {
        Basis::capacity(&self.grid, self.band())
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |msg: String| Err(SolverError::Config(msg));
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return bad(format!("eps = {} must be nonnegative", self.eps));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end = {} must be positive", self.t_end));
        }
        if !(self.dt_init > 0.0) {
            return bad(format!("dt_init = {} must be positive", self.dt_init));
        }
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return bad(format!("rtol = {} and atol = {} must be positive", self.rtol, self.atol));
        }
        if !(0.0..1.0).contains(&self.safety_margin) {
            return bad(format!("safety_margin = {} must lie in [0, 1)", self.safety_margin));
        }
        if let Some(every) = self.snapshot_every {
            if !(every > 0.0) {
                return bad(format!("snapshot_every = {every} must be positive"));
            }
        }
        if self.omegas.iter().any(|w| !(*w > 0.0)) {
            return bad("soft activation widths must be positive".into());
        }
        if self.n == 0 || self.n > self.capacity() {
            return bad(format!(
                "n = {} must lie in 1..={} (modes with |k_i| <= {} on N = {})",
                self.n,
                self.capacity(),
                self.band(),
                self.grid.size()
            ));
        }
        if self.eps > 0.0 && self.eps >= self.grid.length() / 4.0 {
            return bad(format!("eps = {} must be below L/4 for the mollifier", self.eps));
        }
        Ok(())
    }

    /// The Galerkin basis of the run.
    pub fn basis(&self) -> Result<Basis, SolverError> {
        Ok(Basis::new(&self.grid, self.band(), self.n)?)
    }

    /// Level `M - 1/n` (regularised law) or `M` (sharp laws) above which a
    /// point counts as activated into the steep region.
    pub fn activation_level(&self) -> Option<f64> {
        self.law.regularization_cap().or(self.law.domain_bound())
    }

    /// Rejection threshold of the stiffness guard.
    pub fn guard_threshold(&self) -> Option<f64> {
        let cap_n = self.law.regularization_cap()?;
        Some(cap_n - self.safety_margin * (self.law.cap() - self.law.m()))
    }
}

/// Spatial integrals gathered while evaluating the right-hand side.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Pointwise {
    /// `(S_n(D v), D v)`
    pub dissipation_s: f64,
    /// `eps ((1 + |D v|^2) D v, D v)`
    pub dissipation_eps: f64,
    pub dv_max: f64,
    pub stress_l1: f64,
    /// `||S_n||_{2(1-a)}`
    pub stress_l2a: f64,
    pub activation_fraction: f64,
    pub soft_activation: Vec<f64>,
}

#[derive(Debug)]
pub enum RhsError {
    Law(LawError),
    NonFinite(&'static str),
}

/// `dc/dt = g(c)` on a fixed basis and grid.
pub struct GalerkinSystem {
    law: ConstitutiveLaw,
    eps: f64,
    basis: Arc<Basis>,
    transform: Transform,
    level: Option<f64>,
    omegas: Vec<f64>,
    v_hat: Vec<Vec<Complex64>>,
    d_hat: Vec<Vec<Complex64>>,
    v: Vec<Vec<f64>>,
    d: Vec<Vec<f64>>,
    flux: Vec<Vec<f64>>,
    flux_hat: Vec<Vec<Complex64>>,
    last: Pointwise,
}

impl GalerkinSystem {
    pub fn new(cfg: &SolverConfig, basis: Arc<Basis>) -> Self {
        let grid = *basis.grid();
        let transform = Transform::new(&grid);
        let d = grid.d();
        let sym = grid.dim().sym_len();
        Self {
            law: cfg.law,
            eps: cfg.eps,
            level: cfg.activation_level(),
            omegas: cfg.omegas.clone(),
            v_hat: vec![transform.spectrum(); d],
            d_hat: vec![transform.spectrum(); sym],
            v: vec![transform.field(); d],
            d: vec![transform.field(); sym],
            flux: vec![transform.field(); sym],
            flux_hat: vec![transform.spectrum(); sym],
            last: Pointwise::default(),
            basis,
            transform,
        }
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    /// Integrals of the most recent evaluation.
    pub fn last(&self) -> &Pointwise {
        &self.last
    }

    fn synthesize(&mut self, c: &[f64]) {
        let grid = *self.basis.grid();
        let dim = grid.dim();
        self.basis.to_spectrum(c, &mut self.v_hat);
        for s in &mut self.d_hat {
            s.fill(Complex64::default());
        }
        for w in self.basis.waves() {
            for s in 0..dim.sym_len() {
                let (i, j) = dim.pair(s);
                let z = Complex64::new(0.0, 0.5)
                    * (self.v_hat[i][w.slot] * w.kappa[j] + self.v_hat[j][w.slot] * w.kappa[i]);
                self.d_hat[s][w.slot] = z;
                if let Some(m) = w.mirror {
                    self.d_hat[s][m] = z.conj();
                }
            }
        }
        for (spec, field) in self.v_hat.iter().zip(self.v.iter_mut()) {
            self.transform.inverse(spec, field);
        }
        for (spec, field) in self.d_hat.iter().zip(self.d.iter_mut()) {
            self.transform.inverse(spec, field);
        }
    }

    fn pointwise(&mut self) -> Result<(), RhsError> {
        let grid = *self.basis.grid();
        let dim = grid.dim();
        let dd = grid.d();
        let sym = dim.sym_len();
        let flat = self.law.flat_threshold();
        let p = self.law.integrability_exponent();
        let level = self.level;
        let mut acc = Pointwise { soft_activation: vec![0.0; self.omegas.len()], ..Default::default() };
        let mut l2a_sum = 0.0;
        let mut activated = 0usize;
        let mut t = SymTensor::zero(dim);
        for idx in 0..grid.points() {
            for (s, x) in t.slots_mut().iter_mut().enumerate() {
                *x = self.d[s][idx];
            }
            let s2 = t.norm_sq();
            let s = s2.sqrt();
            if !s.is_finite() {
                return Err(RhsError::NonFinite("strain rate"));
            }
            let f = match flat {
                Some(thr) if s <= thr => 0.0,
                _ => stress_magnitude(s, &self.law).map_err(RhsError::Law)?,
            };
            if !f.is_finite() {
                return Err(RhsError::NonFinite("stress"));
            }
            let ratio = if s > 0.0 { f / s } else { 0.0 };
            let visc = self.eps * (1.0 + s2);
            for slot in 0..sym {
                let (i, j) = dim.pair(slot);
                let vv = self.v[i][idx] * self.v[j][idx];
                self.flux[slot][idx] = vv - (ratio + visc) * t.slots()[slot];
            }
            if f > 0.0 {
                acc.dissipation_s += f * s;
                acc.stress_l1 += f;
                l2a_sum += f.powf(p);
            }
            acc.dissipation_eps += visc * s2;
            acc.dv_max = acc.dv_max.max(s);
            if let Some(level) = level {
                if s >= level {
                    activated += 1;
                }
                let excess = s - level;
                if excess > 0.0 {
                    for (m, w) in acc.soft_activation.iter_mut().zip(&self.omegas) {
                        *m += excess / (excess + w);
                    }
                }
            }
        }
        for i in 0..dd {
            if self.v[i].iter().any(|x| !x.is_finite()) {
                return Err(RhsError::NonFinite("velocity"));
            }
        }
        let h = grid.cell_volume();
        acc.dissipation_s *= h;
        acc.dissipation_eps *= h;
        acc.stress_l1 *= h;
        acc.stress_l2a = (h * l2a_sum).powf(1.0 / p);
        acc.activation_fraction = activated as f64 / grid.points() as f64;
        for m in &mut acc.soft_activation {
            *m *= h;
        }
        self.last = acc;
        Ok(())
    }

    fn project(&mut self, g: &mut [f64]) {
        let grid = *self.basis.grid();
        let dim = grid.dim();
        let d = grid.d();
        for (field, spec) in self.flux.iter().zip(self.flux_hat.iter_mut()) {
            self.transform.forward(field, spec);
        }
        let scale = self.basis.amplitude() * grid.volume();
        let mut cached_wave = usize::MAX;
        let mut fk = [Complex64::default(); 3];
        for (mode, gr) in self.basis.modes().iter().zip(g.iter_mut()) {
            let w = &self.basis.waves()[mode.wave];
            if mode.wave != cached_wave {
                // (F_hat kappa)_i
                fk = [Complex64::default(); 3];
                for (i, fi) in fk.iter_mut().enumerate().take(d) {
                    for j in 0..d {
                        *fi += self.flux_hat[dim.slot(i, j)][w.slot] * w.kappa[j];
                    }
                }
                cached_wave = mode.wave;
            }
            let e = &w.polarizations[mode.polarization];
            let mut z = Complex64::default();
            for i in 0..d {
                z += fk[i] * e[i];
            }
            *gr = match mode.parity {
                Parity::Cos => scale * z.im,
                Parity::Sin => scale * z.re,
            };
        }
    }

    /// Evaluates `g(c)` and records the spatial integrals.
    pub fn evaluate(&mut self, c: &[f64], g: &mut [f64]) -> Result<(), RhsError> {
        self.synthesize(c);
        self.pointwise()?;
        self.project(g);
        if g.iter().any(|x| !x.is_finite()) {
            return Err(RhsError::NonFinite("right-hand side"));
        }
        Ok(())
    }
}

impl OdeSystem for GalerkinSystem {
    type Error = RhsError;

    fn dim(&self) -> usize {
        self.basis.len()
    }

    fn rhs(&mut self, _t: f64, y: &[f64], dydt: &mut [f64]) -> Result<(), RhsError> {
        self.evaluate(y, dydt)
    }
}

/// Coefficients, time and the spatial integrals at that state.
#[derive(Clone, Debug)]
pub struct SolverState {
    pub time: f64,
    /// Size of the step that produced this state; 0 initially.
    pub dt: f64,
    pub c: Vec<f64>,
    pub pointwise: Pointwise,
}

impl SolverState {
    pub fn kinetic_energy(&self) -> f64 {
        0.5 * self.c.iter().map(|x| x * x).sum::<f64>()
    }

    pub fn record(&self) -> DiagnosticsRecord {
        let p = &self.pointwise;
        DiagnosticsRecord {
            time: self.time,
            kinetic_energy: self.kinetic_energy(),
            dissipation_s: p.dissipation_s,
            dissipation_eps: p.dissipation_eps,
            dv_max: p.dv_max,
            stress_l1: p.stress_l1,
            stress_l2a: p.stress_l2a,
            activation_fraction: p.activation_fraction,
            soft_activation: p.soft_activation.clone(),
            cumulative_dissipation_s: 0.0,
            cumulative_dissipation_eps: 0.0,
        }
    }
}

/// Measured margins of the initial-data preparation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct InitialReport {
    /// `||D v0||_inf`
    pub dv0_max: f64,
    /// `||D v0eps||_inf` after mollification.
    pub dv0_eps_max: f64,
    /// `||D P^n v0eps||_inf`
    pub dvn_max: f64,
    /// Modes of `v0` dropped by the truncation, measured as `||v0eps - P^n v0eps||_2`.
    pub truncation_loss: f64,
}

/// Re-expresses `v` on another basis of the same grid, matching modes by
/// wavevector, polarization and parity; modes missing from `v` are zero and
/// modes missing from `basis` are dropped.
pub fn transfer(v: &SpectralVelocity, basis: Arc<Basis>) -> Result<SpectralVelocity, SpectralError> {
    let src = v.basis();
    if src.grid() != basis.grid() {
        return Err(SpectralError::Shape { expected: basis.grid().points(), found: src.grid().points() });
    }
    let key = |b: &Basis, r: usize| {
        let m = b.modes()[r];
        (b.waves()[m.wave].k, m.polarization, m.parity == Parity::Sin)
    };
    let index: HashMap<_, usize> = (0..src.len()).map(|r| (key(src, r), r)).collect();
    let c = (0..basis.len()).map(|r| index.get(&key(&basis, r)).map_or(0.0, |&q| v.coefficients()[q])).collect();
    SpectralVelocity::new(basis, c)
}

/// `c(0) = P^n(v0eps)` together with the checks that the strain of the
/// datum stays below `m` through mollification and truncation.
pub fn prepare_initial(
    v0: &SpectralVelocity,
    cfg: &SolverConfig,
    basis: Arc<Basis>,
) -> Result<(SpectralVelocity, InitialReport), SolverError> {
    let grid = *v0.grid();
    let mut t = Transform::new(&grid);
    let m = cfg.law.m();
    let dv0_max = strain_max(&mut t, v0);
    if dv0_max >= m {
        return Err(SolverError::InitialData { dv_max: dv0_max, m });
    }
    let v0_eps = mollify(&mut t, v0, cfg.eps)?;
    let dv0_eps_max = strain_max(&mut t, &v0_eps);
    if dv0_eps_max >= m {
        return Err(SolverError::InitialData { dv_max: dv0_eps_max, m });
    }
    let truncated = transfer(&v0_eps, basis)?;
    let dvn_max = strain_max(&mut t, &truncated);
    if dvn_max >= m {
        return Err(SolverError::Truncation { n: truncated.basis().len(), dv_max: dvn_max, m });
    }
    let loss2 = (v0_eps.l2_norm().powi(2) - truncated.l2_norm().powi(2)).max(0.0);
    Ok((truncated, InitialReport { dv0_max, dv0_eps_max, dvn_max, truncation_loss: loss2.sqrt() }))
}

/// Outcome of one successful call to [`Integrator::step`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepReport {
    pub dt: f64,
    /// Scaled embedded error estimate of the accepted step.
    pub error: f64,
    pub dt_next: f64,
    pub rejected: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunStats {
    pub accepted: usize,
    pub rejected_error: usize,
    pub rejected_domain: usize,
    pub rejected_guard: usize,
    pub evaluations: u64,
}

/// Adaptive Dormand-Prince stepping with the domain and stiffness guards.
pub struct Integrator {
    cfg: SolverConfig,
    system: GalerkinSystem,
    stepper: Dopri5,
    dt: f64,
    dt_min: f64,
    guard: Option<f64>,
    pub stats: RunStats,
}

impl Integrator {
    pub fn new(cfg: &SolverConfig, basis: Arc<Basis>) -> Self {
        let n = basis.len();
        let tol = Tolerances { rtol: cfg.rtol, atol: cfg.atol };
        Self {
            system: GalerkinSystem::new(cfg, basis),
            stepper: Dopri5::new(n, tol, StepControl::default()),
            dt: cfg.dt_init,
            dt_min: 1e-12 * cfg.t_end,
            guard: cfg.guard_threshold(),
            stats: RunStats::default(),
            cfg: cfg.clone(),
        }
    }

    pub fn system(&self) -> &GalerkinSystem {
        &self.system
    }

    fn rhs_error(e: RhsError, time: f64) -> SolverError {
        match e {
            RhsError::Law(law) => SolverError::Law(law),
            RhsError::NonFinite(term) => SolverError::NonFinite { term, time },
        }
    }

    /// State at time `time` with coefficients `c`, with its spatial integrals.
    pub fn state(&mut self, time: f64, c: Vec<f64>) -> Result<SolverState, SolverError> {
        let mut g = vec![0.0; c.len()];
        self.system.evaluate(&c, &mut g).map_err(|e| Self::rhs_error(e, time))?;
        self.stats.evaluations += 1;
        self.stepper.reset();
        Ok(SolverState { time, dt: 0.0, c, pointwise: self.system.last().clone() })
    }

    /// Advances `state` by one accepted step, never past `t_limit`.
    pub fn step(&mut self, state: &mut SolverState, t_limit: f64) -> Result<StepReport, SolverError> {
        let mut rejected = 0;
        loop {
            if self.dt < self.dt_min {
                return Err(SolverError::Stiffness {
                    time: state.time,
                    dt_min: self.dt_min,
                    dv_max: state.pointwise.dv_max,
                    activation_fraction: state.pointwise.activation_fraction,
                });
            }
            let remaining = t_limit - state.time;
            let (dt, lands) = if self.dt * 1.05 >= remaining { (remaining, true) } else { (self.dt, false) };
            let before = self.stepper.evaluations();
            let attempt = self.stepper.attempt(&mut self.system, state.time, &state.c, dt);
            self.stats.evaluations += self.stepper.evaluations() - before;
            let trial = match attempt {
                Ok(trial) => trial,
                // the current state is admissible and finite, so a stage
                // leaving the domain or overflowing means the step is too long
                Err(RhsError::Law(LawError::DomainViolation { .. }) | RhsError::NonFinite(_)) => {
                    self.stats.rejected_domain += 1;
                    rejected += 1;
                    self.dt = 0.5 * dt;
                    continue;
                }
                Err(e) => return Err(Self::rhs_error(e, state.time)),
            };
            if !trial.acceptable() || !trial.error.is_finite() {
                self.stats.rejected_error += 1;
                rejected += 1;
                self.dt = if trial.error.is_finite() { trial.dt_next } else { 0.2 * dt };
                continue;
            }
            let pw = self.system.last();
            if let Some(threshold) = self.guard {
                if pw.dv_max >= threshold {
                    self.stats.rejected_guard += 1;
                    rejected += 1;
                    self.dt = 0.5 * dt;
                    continue;
                }
            }
            state.pointwise = pw.clone();
            self.stepper.accept(&trial, &mut state.c);
            state.time = if lands { t_limit } else { state.time + dt };
            state.dt = dt;
            self.stats.accepted += 1;
            self.dt = if lands { trial.dt_next.max(self.dt) } else { trial.dt_next };
            if self.cfg.eps == 0.0
                && self.cfg.law.flat_threshold().is_some()
                && state.pointwise.dv_max >= self.cfg.law.m()
            {
                return Err(SolverError::InviscidActivation {
                    time: state.time,
                    dv_max: state.pointwise.dv_max,
                    m: self.cfg.law.m(),
                });
            }
            return Ok(StepReport { dt, error: trial.error, dt_next: self.dt, rejected });
        }
    }

    /// One step of size `dt` ending at `t_next`, without error control;
    /// used to replay the nodes of another run.
    pub fn step_exact(&mut self, state: &mut SolverState, t_next: f64, dt: f64) -> Result<f64, SolverError> {
        let before = self.stepper.evaluations();
        let trial = self
            .stepper
            .attempt(&mut self.system, state.time, &state.c, dt)
            .map_err(|e| SolverError::Replay { time: t_next, reason: Self::rhs_error(e, state.time).to_string() })?;
        self.stats.evaluations += self.stepper.evaluations() - before;
        state.pointwise = self.system.last().clone();
        self.stepper.accept(&trial, &mut state.c);
        state.time = t_next;
        state.dt = dt;
        self.stats.accepted += 1;
        Ok(trial.error)
    }
}

/// Stored coefficient vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub c: Vec<f64>,
}

/// Result of [`integrate`]: one diagnostics record per accepted step
/// (plus `t = 0`), snapshots at the requested times, and the failure that
/// stopped the run early, if any.
#[derive(Debug)]
pub struct Trajectory {
    pub config: SolverConfig,
    pub basis: Arc<Basis>,
    pub initial: InitialReport,
    pub records: Vec<DiagnosticsRecord>,
    pub snapshots: Vec<Snapshot>,
    pub stats: RunStats,
    pub failure: Option<SolverError>,
}

impl Trajectory {
    pub fn completed(&self) -> bool {
        self.failure.is_none()
    }

    pub fn final_time(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.time)
    }
}

/// Snapshot times in `(0, t_end]`.
pub fn snapshot_times(cfg: &SolverConfig) -> Vec<f64> {
    let mut times = Vec::new();
    if let Some(every) = cfg.snapshot_every {
        let mut k = 1;
        loop {
            let t = k as f64 * every;
            if t >= cfg.t_end * (1.0 - 1e-12) {
                break;
            }
            times.push(t);
            k += 1;
        }
    }
    times.push(cfg.t_end);
    times
}

/// Runs [`integrate`] and calls `observe` on every accepted state,
/// including the initial one.
pub fn integrate_with<F: FnMut(&SolverState)>(
    v0: &SpectralVelocity,
    cfg: &SolverConfig,
    mut observe: F,
) -> Result<Trajectory, SolverError> {
    cfg.validate()?;
    if v0.grid() != &cfg.grid {
        return Err(SolverError::Config("initial velocity lives on a different grid".into()));
    }
    let basis = Arc::new(cfg.basis()?);
    let (start, initial) = prepare_initial(v0, cfg, basis.clone())?;
    let mut integrator = Integrator::new(cfg, basis.clone());
    let mut traj = Trajectory {
        config: cfg.clone(),
        basis,
        initial,
        records: Vec::new(),
        snapshots: Vec::new(),
        stats: RunStats::default(),
        failure: None,
    };
    let mut state = match integrator.state(0.0, start.coefficients().to_vec()) {
        Ok(s) => s,
        Err(e) => {
            traj.failure = Some(e);
            return Ok(traj);
        }
    };
    observe(&state);
    traj.records.push(state.record());
    traj.snapshots.push(Snapshot { time: 0.0, c: state.c.clone() });
    'run: for target in snapshot_times(cfg) {
        while state.time < target {
            match integrator.step(&mut state, target) {
                Ok(_) => {
                    observe(&state);
                    traj.records.push(state.record());
                }
                Err(e) => {
                    if matches!(e, SolverError::InviscidActivation { .. }) {
                        traj.records.push(state.record());
                    }
                    traj.failure = Some(e);
                    break 'run;
                }
            }
        }
        traj.snapshots.push(Snapshot { time: state.time, c: state.c.clone() });
    }
    crate::diagnostics::accumulate(&mut traj.records);
    traj.stats = integrator.stats;
    Ok(traj)
}

/// Integrates `v0` over `[0, t_end]`.
pub fn integrate(v0: &SpectralVelocity, cfg: &SolverConfig) -> Result<Trajectory, SolverError> {
    integrate_with(v0, cfg, |_| {})
}

/// Integrates `v0` through the nodes `(time, dt)` of another run (the
/// first node is the initial state), with no step-size control, calling
/// `observe` at each node.
pub fn replay<F: FnMut(&SolverState)>(
    v0: &SpectralVelocity,
    cfg: &SolverConfig,
    nodes: &[(f64, f64)],
    mut observe: F,
) -> Result<InitialReport, SolverError> {
    cfg.validate()?;
    let basis = Arc::new(cfg.basis()?);
    let (start, initial) = prepare_initial(v0, cfg, basis.clone())?;
    let mut integrator = Integrator::new(cfg, basis);
    let mut state = integrator.state(0.0, start.coefficients().to_vec())?;
    observe(&state);
    for &(t, dt) in nodes.iter().skip(1) {
        integrator.step_exact(&mut state, t, dt)?;
        observe(&state);
    }
    Ok(initial)
}

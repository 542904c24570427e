//! Embedded Dormand-Prince 5(4) integrator.
//!
//! The stepper is driven one trial at a time so that callers can impose
//! their own acceptance rules on top of the error test (domain guards,
//! landing on output times, replaying a fixed set of nodes):
//!
//! ```text
//! let trial = stepper.attempt(&mut system, t, &y, dt)?;
//! if trial.acceptable() && my_checks(stepper.proposal()) {
//!     stepper.accept(&trial, &mut y);
//! }
//! ```
//!
//! The last stage of an accepted step is reused as the first stage of the
//! next one (FSAL). Step-size proposals follow the PI controller of Hairer
//! and Wanner with `beta = 0.04`.

use alloc::vec;
use alloc::vec::Vec;

/// A first-order system `y' = F(t, y)`.
pub trait OdeSystem {
    type Error;

    fn dim(&self) -> usize;

    fn rhs(&mut self, t: f64, y: &[f64], dydt: &mut [f64]) -> Result<(), Self::Error>;
}

/// Tolerances of the mixed error test
/// `sqrt(mean((err_i / (atol + rtol max(|y_i|, |y_new_i|)))^2)) <= 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

/// Parameters of the step-size controller.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepControl {
    pub safety: f64,
    pub beta: f64,
    pub fac_min: f64,
    pub fac_max: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        Self { safety: 0.9, beta: 0.04, fac_min: 0.2, fac_max: 10.0 }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];

// fifth-order weights minus fourth-order weights
const E: [f64; 7] =
    [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];

/// Outcome of one trial step from `t` to `t + dt`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Trial {
    pub t: f64,
    pub dt: f64,
    /// Scaled error norm; the step passes the error test when it is `<= 1`.
    pub error: f64,
    /// Proposed size of the next step (after acceptance) or of the retry
    /// (after rejection).
    pub dt_next: f64,
}

impl Trial {
    pub fn acceptable(&self) -> bool {
        self.error <= 1.0
    }
}

/// Dormand-Prince 5(4) stepper with reusable stage storage.
#[derive(Clone, Debug)]
pub struct Dopri5 {
    tol: Tolerances,
    control: StepControl,
    k: [Vec<f64>; 7],
    stage: Vec<f64>,
    y_new: Vec<f64>,
    fsal_valid: bool,
    fac_old: f64,
    evaluations: u64,
}

impl Dopri5 {
    pub fn new(dim: usize, tol: Tolerances, control: StepControl) -> Self {
        Self {
            tol,
            control,
            k: core::array::from_fn(|_| vec![0.0; dim]),
            stage: vec![0.0; dim],
            y_new: vec![0.0; dim],
            fsal_valid: false,
            fac_old: 1e-4,
            evaluations: 0,
        }
    }

    pub fn tolerances(&self) -> Tolerances {
        self.tol
    }

    /// Number of right-hand-side evaluations so far.
    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    /// Forgets the cached first stage, e.g. after `y` was modified externally.
    pub fn reset(&mut self) {
        self.fsal_valid = false;
        self.fac_old = 1e-4;
    }

    /// `y' (t)` at the start of the pending step; valid after a successful
    /// `attempt`.
    pub fn initial_slope(&self) -> &[f64] {
        &self.k[0]
    }

    /// Candidate `y(t + dt)` of the last trial.
    pub fn proposal(&self) -> &[f64] {
        &self.y_new
    }

    /// Computes a trial step. A right-hand-side failure is returned as is;
    /// the cached first stage stays valid so the caller may retry with a
    /// smaller `dt`.
    pub fn attempt<S: OdeSystem>(&mut self, sys: &mut S, t: f64, y: &[f64], dt: f64) -> Result<Trial, S::Error> {
        let n = y.len();
        debug_assert_eq!(n, self.stage.len());
        if !self.fsal_valid {
            sys.rhs(t, y, &mut self.k[0])?;
            self.evaluations += 1;
            self.fsal_valid = true;
        }
        for s in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, a) in A[s][..s].iter().enumerate() {
                    acc += a * self.k[j][i];
                }
                self.stage[i] = y[i] + dt * acc;
            }
            if s == 6 {
                // stage 7 is evaluated at the fifth-order solution itself
                self.y_new.copy_from_slice(&self.stage);
            }
            let (_, rest) = self.k.split_at_mut(s);
            sys.rhs(t + C[s] * dt, &self.stage, &mut rest[0])?;
            self.evaluations += 1;
        }

        let mut sum = 0.0;
        for i in 0..n {
            let mut err = 0.0;
            for (j, e) in E.iter().enumerate() {
                err += e * self.k[j][i];
            }
            err *= dt;
            let scale = self.tol.atol + self.tol.rtol * y[i].abs().max(self.y_new[i].abs());
            let r = err / scale;
            sum += r * r;
        }
        let error = if n == 0 { 0.0 } else { libm::sqrt(sum / n as f64) };

        let ctl = &self.control;
        let expo = 0.2 - ctl.beta * 0.75;
        let fac11 = libm::pow(error.max(1e-300), expo);
        let dt_next = if error <= 1.0 {
            let fac = fac11 / libm::pow(self.fac_old, ctl.beta);
            let fac = (fac / ctl.safety).clamp(1.0 / ctl.fac_max, 1.0 / ctl.fac_min);
            dt / fac
        } else {
            dt / (fac11 / ctl.safety).min(1.0 / ctl.fac_min)
        };
        Ok(Trial { t, dt, error, dt_next })
    }

    /// Commits the last trial: `y <- y_new` and the last stage becomes the
    /// next first stage.
    pub fn accept(&mut self, trial: &Trial, y: &mut [f64]) {
        y.copy_from_slice(&self.y_new);
        self.k.swap(0, 6);
        self.fsal_valid = true;
        self.fac_old = trial.error.max(1e-4);
    }
}

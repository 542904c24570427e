//! Randomised certification of the constitutive laws.
//!
//! Samples are drawn in chunks, each from its own ChaCha8 stream of the
//! given seed, so results do not depend on how chunks are scheduled.

use std::fmt;

use activated_euler_core::{
    alpha_beta, blowup_gap, gradient_estimate_constant, quadratic_form, stress, stress_jacobian_apply,
    stress_magnitude, ConstitutiveLaw, Dim, LawError, SymTensor,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

const CHUNK: usize = 4096;

/// Runs `f` on chunks of `samples`, each with its own random stream, and
/// folds the results in chunk order.
fn chunked<T, F, G>(seed: u64, stream: u64, samples: usize, init: T, f: F, fold: G) -> T
where
    T: Send + Clone,
    F: Fn(&mut ChaCha8Rng, usize) -> T + Sync,
    G: Fn(T, T) -> T,
{
    let chunks = samples.div_ceil(CHUNK);
    let parts: Vec<T> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream((stream << 32) | c as u64);
            let count = CHUNK.min(samples - c * CHUNK);
            f(&mut rng, count)
        })
        .collect();
    parts.into_iter().fold(init, fold)
}

fn random_dim(rng: &mut ChaCha8Rng) -> Dim {
    if rng.random::<bool>() {
        Dim::Two
    } else {
        Dim::Three
    }
}

/// Uniformly oriented unit tensor (Gaussian slots, normalised).
pub fn random_unit(rng: &mut ChaCha8Rng, dim: Dim) -> SymTensor {
    loop {
        let slots: Vec<f64> = (0..dim.sym_len())
            .map(|s| {
                let z: f64 = rng.sample(StandardNormal);
                z / dim.slot_weight(s).sqrt()
            })
            .collect();
        let t = SymTensor::from_slots(dim, &slots);
        let n = t.norm();
        if n > 1e-3 {
            return t.scale(1.0 / n);
        }
    }
}

/// A radius in `[lo, hi)`: uniform half the time, otherwise clustered
/// geometrically near `lo`, `hi` or one of the `marks`.
fn radius(rng: &mut ChaCha8Rng, lo: f64, hi: f64, marks: &[f64]) -> f64 {
    let u: f64 = rng.random();
    let width = hi - lo;
    let offset = width * 10f64.powf(-rng.random_range(1.0..12.0));
    let s = if u < 0.5 {
        lo + width * rng.random::<f64>()
    } else if u < 0.65 {
        lo + offset
    } else if u < 0.8 {
        hi - offset
    } else if marks.is_empty() {
        lo + width * rng.random::<f64>()
    } else {
        let mark = marks[rng.random_range(0..marks.len())];
        if rng.random::<bool>() {
            mark + offset
        } else {
            mark - offset
        }
    };
    s.clamp(lo, hi.next_down())
}

/// The laws certified by the suite and the radius range of each.
pub fn certified_laws() -> Vec<(&'static str, ConstitutiveLaw, f64)> {
    let sharp = ConstitutiveLaw::sharp(1.0, 4.0, 0.25).expect("valid");
    let reg = ConstitutiveLaw::regularized(1.0, 4.0, 0.25, 10).expect("valid");
    let two = ConstitutiveLaw::two_activation(0.5, 1.0, 4.0, 0.25, 0.1).expect("valid");
    let ans = ConstitutiveLaw::activated_navier_stokes(1.0, 0.1, 0.5, 3.0).expect("valid");
    vec![
        ("sharp", sharp, 4.0),
        ("regularized", reg, 8.0),
        ("two_activation", two, 4.0),
        ("activated_navier_stokes", ans, 8.0),
    ]
}

fn marks(law: &ConstitutiveLaw) -> Vec<f64> {
    let mut out = vec![law.m(), 0.5 * (law.m() + law.cap())];
    if let Some(c) = law.regularization_cap() {
        out.push(c);
    }
    if law.params().m_lower > 0.0 {
        out.push(law.params().m_lower);
    }
    out.retain(|x| x.is_finite());
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonotonicityResult {
    pub law: String,
    pub samples: usize,
    /// `min (S1 - S2).(D1 - D2) / (|S1 - S2| |D1 - D2|)`
    pub min_relative_gap: f64,
    /// Smallest unnormalised gap.
    pub min_gap: f64,
    pub violations: usize,
}

/// Pairs with `|D_i| < bound`; half of them are close pairs.
pub fn monotonicity(
    law: &ConstitutiveLaw,
    name: &str,
    bound: f64,
    samples: usize,
    seed: u64,
) -> Result<MonotonicityResult, LawError> {
    let mk = marks(law);
    let res = chunked(
        seed,
        1,
        samples,
        Ok((f64::INFINITY, f64::INFINITY, 0usize)),
        |rng, count| -> Result<(f64, f64, usize), LawError> {
            let (mut min_rel, mut min_gap, mut bad) = (f64::INFINITY, f64::INFINITY, 0);
            for _ in 0..count {
                let dim = random_dim(rng);
                let d1 = random_unit(rng, dim).scale(radius(rng, 0.0, bound, &mk));
                let d2 = if rng.random::<bool>() {
                    random_unit(rng, dim).scale(radius(rng, 0.0, bound, &mk))
                } else {
                    let step = bound * 10f64.powf(-rng.random_range(1.0..8.0));
                    let cand = d1.add_scaled(step, &random_unit(rng, dim));
                    if cand.norm() < bound {
                        cand
                    } else {
                        d1.scale(0.5)
                    }
                };
                let s1 = stress(&d1, law)?;
                let s2 = stress(&d2, law)?;
                let ds = s1.add_scaled(-1.0, &s2);
                let dd = d1.add_scaled(-1.0, &d2);
                let gap = ds.dot(&dd);
                let scale = ds.norm() * dd.norm();
                if gap < -1e-10 * scale {
                    bad += 1;
                }
                if scale > 0.0 {
                    min_rel = min_rel.min(gap / scale);
                }
                min_gap = min_gap.min(gap);
            }
            Ok((min_rel, min_gap, bad))
        },
        |a, b| match (a, b) {
            (Ok(a), Ok(b)) => Ok((a.0.min(b.0), a.1.min(b.1), a.2 + b.2)),
            (Err(e), _) | (_, Err(e)) => Err(e),
        },
    )?;
    Ok(MonotonicityResult {
        law: name.into(),
        samples,
        min_relative_gap: if samples == 0 { 0.0 } else { res.0 },
        min_gap: if samples == 0 { 0.0 } else { res.1 },
        violations: res.2,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JacobianResult {
    pub law: String,
    pub samples: usize,
    pub max_relative_error: f64,
}

/// Fourth-order central difference of `h -> S(D + h E)` at 0.
pub fn finite_difference(d: &SymTensor, e: &SymTensor, h: f64, law: &ConstitutiveLaw) -> Result<SymTensor, LawError> {
    let at = |t: f64| stress(&d.add_scaled(t, e), law);
    let (p1, m1, p2, m2) = (at(h)?, at(-h)?, at(2.0 * h)?, at(-2.0 * h)?);
    Ok(p1.add_scaled(-1.0, &m1).scale(8.0).add_scaled(-1.0, &p2).add_scaled(1.0, &m2).scale(1.0 / (12.0 * h)))
}

/// Directional derivative against finite differences for
/// `m + 1e-3 < |D| < cap - 1e-3`.
pub fn jacobian(
    law: &ConstitutiveLaw,
    name: &str,
    cap: f64,
    samples: usize,
    seed: u64,
) -> Result<JacobianResult, LawError> {
    let lo = law.m() + 1e-3;
    let hi = cap - 1e-3;
    let h = 2.5e-4;
    let mk: Vec<f64> = marks(law).into_iter().filter(|x| *x > lo && *x < hi).collect();
    let res = chunked(
        seed,
        2,
        samples,
        Ok(0.0f64),
        |rng, count| -> Result<f64, LawError> {
            let mut worst = 0.0f64;
            for _ in 0..count {
                let dim = random_dim(rng);
                let d = random_unit(rng, dim).scale(radius(rng, lo, hi, &mk));
                let e = random_unit(rng, dim);
                let exact = stress_jacobian_apply(&d, &e, law)?;
                let fd = finite_difference(&d, &e, h, law)?;
                let err = fd.add_scaled(-1.0, &exact).norm() / exact.norm();
                worst = worst.max(err);
            }
            Ok(worst)
        },
        |a, b| Ok(a?.max(b?)),
    )?;
    Ok(JacobianResult { law: name.into(), samples, max_relative_error: res })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InequalityResult {
    pub name: String,
    pub samples: usize,
    /// `max lhs / rhs`; must not exceed `1 + 1e-9`.
    pub max_ratio: f64,
}

/// `(M^a - |D|^a)^(1 + 1/a) |dS(D)[E]|^2 <= max(alpha, beta) Q(D, E)` on
/// `m < |D| < upper` for a law with `sigma = 1`.
pub fn gradient_weight_inequality(
    law: &ConstitutiveLaw,
    name: &str,
    upper: f64,
    samples: usize,
    seed: u64,
) -> Result<InequalityResult, LawError> {
    let p = *law.params();
    let res = chunked(
        seed,
        3,
        samples,
        Ok(0.0f64),
        |rng, count| -> Result<f64, LawError> {
            let mut worst = 0.0f64;
            for _ in 0..count {
                let dim = random_dim(rng);
                let s = radius(rng, p.m, upper, &[0.5 * (p.m + p.cap)]);
                if s <= p.m {
                    continue;
                }
                let d = random_unit(rng, dim).scale(s);
                let e = random_unit(rng, dim);
                let s = d.norm();
                if !(s > p.m && s < upper) {
                    continue;
                }
                let (_, weight) = blowup_gap(s, law);
                let lhs = weight * stress_jacobian_apply(&d, &e, law)?.norm_sq();
                let (alpha, beta) = alpha_beta(s, law)?;
                let rhs = alpha.max(beta) * quadratic_form(&d, &e, law)?;
                worst = worst.max(lhs / rhs);
            }
            Ok(worst)
        },
        |a, b| Ok(a?.max(b?)),
    )?;
    Ok(InequalityResult { name: format!("{name} gradient weight"), samples, max_ratio: res })
}

/// `|dS_n(D)[E]|^2 / (1 + |S_n(D)|)^(1+a) <= C Q_n(D, E)` on
/// `(m + M)/2 <= |D| < upper` with the assembled constant `C`.
pub fn gradient_estimate_inequality(
    law: &ConstitutiveLaw,
    name: &str,
    upper: f64,
    samples: usize,
    seed: u64,
) -> Result<InequalityResult, LawError> {
    let p = *law.params();
    let c = gradient_estimate_constant(law)?;
    let lo = 0.5 * (p.m + p.cap);
    let mk: Vec<f64> = law.regularization_cap().into_iter().collect();
    let res = chunked(
        seed,
        4,
        samples,
        Ok(0.0f64),
        |rng, count| -> Result<f64, LawError> {
            let mut worst = 0.0f64;
            for _ in 0..count {
                let dim = random_dim(rng);
                let d = random_unit(rng, dim).scale(radius(rng, lo, upper, &mk));
                let e = random_unit(rng, dim);
                let s = d.norm();
                if !(s >= lo && s < upper) {
                    continue;
                }
                let f = stress_magnitude(s, law)?;
                let lhs = stress_jacobian_apply(&d, &e, law)?.norm_sq() / (1.0 + f).powf(1.0 + p.a);
                let rhs = c * quadratic_form(&d, &e, law)?;
                worst = worst.max(lhs / rhs);
            }
            Ok(worst)
        },
        |a, b| Ok(a?.max(b?)),
    )?;
    Ok(InequalityResult { name: format!("{name} gradient estimate (C = {c:.6e})"), samples, max_ratio: res })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AgreementResult {
    pub samples: usize,
    pub mismatches: usize,
}

/// Sharp and regularised stresses are bitwise equal on `|D| <= M - 1/n`.
pub fn law_agreement(
    sharp: &ConstitutiveLaw,
    regularized: &ConstitutiveLaw,
    samples: usize,
    seed: u64,
) -> Result<AgreementResult, LawError> {
    let cap_n =
        regularized.regularization_cap().ok_or(LawError::Unsupported("law agreement needs the regularised law"))?;
    let mk = marks(sharp);
    let mismatches = chunked(
        seed,
        5,
        samples,
        Ok(0usize),
        |rng, count| -> Result<usize, LawError> {
            let mut bad = 0;
            for i in 0..count {
                let dim = random_dim(rng);
                let u = random_unit(rng, dim);
                let d = if i % 64 == 0 { u.scale(cap_n / u.norm()) } else { u.scale(radius(rng, 0.0, cap_n, &mk)) };
                if d.norm() > cap_n {
                    continue;
                }
                if stress(&d, sharp)? != stress(&d, regularized)? {
                    bad += 1;
                }
            }
            Ok(bad)
        },
        |a, b| Ok(a? + b?),
    )?;
    Ok(AgreementResult { samples, mismatches })
}

/// The full suite run by the `props` command.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PropsReport {
    pub seed: u64,
    pub samples: usize,
    pub monotonicity: Vec<MonotonicityResult>,
    pub jacobian: Vec<JacobianResult>,
    pub inequalities: Vec<InequalityResult>,
    pub agreement: AgreementResult,
}

/// Tolerances of the suite.
pub const MONOTONICITY_TOL: f64 = 1e-10;
pub const JACOBIAN_TOL: f64 = 1e-6;
pub const INEQUALITY_SLACK: f64 = 1e-9;

impl PropsReport {
    pub fn monotonicity_passed(&self) -> bool {
        self.monotonicity.iter().all(|m| m.violations == 0)
    }

    pub fn jacobian_passed(&self) -> bool {
        self.jacobian.iter().all(|j| j.max_relative_error < JACOBIAN_TOL)
    }

    pub fn inequalities_passed(&self) -> bool {
        self.inequalities.iter().all(|i| i.max_ratio <= 1.0 + INEQUALITY_SLACK)
    }

    pub fn agreement_passed(&self) -> bool {
        self.agreement.mismatches == 0
    }

    pub fn passed(&self) -> bool {
        self.monotonicity_passed() && self.jacobian_passed() && self.inequalities_passed() && self.agreement_passed()
    }
}

pub fn run_props(seed: u64, samples: usize) -> Result<PropsReport, LawError> {
    let laws = certified_laws();
    let mut monotonicity = Vec::new();
    let mut jacobian = Vec::new();
    for (name, law, bound) in &laws {
        monotonicity.push(self::monotonicity(law, name, *bound, samples, seed)?);
        // the regularised law's M - 1/n doubles as the upper end for the others
        let cap = law.regularization_cap().unwrap_or(if law.cap().is_finite() { law.cap() - 0.1 } else { *bound });
        jacobian.push(self::jacobian(law, name, cap, samples, seed)?);
    }
    let sharp = laws[0].1;
    let reg = laws[1].1;
    let cap_n = reg.regularization_cap().expect("regularised");
    let inequalities = vec![
        gradient_weight_inequality(&sharp, "sharp", sharp.cap(), samples, seed)?,
        gradient_weight_inequality(&reg, "regularized", cap_n, samples, seed)?,
        gradient_estimate_inequality(&sharp, "sharp", sharp.cap(), samples, seed)?,
        gradient_estimate_inequality(&reg, "regularized", 2.0 * reg.cap(), samples, seed)?,
    ];
    let agreement = law_agreement(&sharp, &reg, samples, seed)?;
    Ok(PropsReport { seed, samples, monotonicity, jacobian, inequalities, agreement })
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

impl fmt::Display for PropsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "constitutive certification: seed {} samples {}", self.seed, self.samples)?;
        for m in &self.monotonicity {
            writeln!(
                f,
                "  monotonicity {:<24} min gap {:.6e}  min relative gap {:.6e}  violations {}  {}",
                m.law,
                m.min_gap,
                m.min_relative_gap,
                m.violations,
                verdict(m.violations == 0)
            )?;
        }
        for j in &self.jacobian {
            writeln!(
                f,
                "  jacobian     {:<24} max FD error {:.6e}  {}",
                j.law,
                j.max_relative_error,
                verdict(j.max_relative_error < JACOBIAN_TOL)
            )?;
        }
        for i in &self.inequalities {
            writeln!(
                f,
                "  inequality   {:<52} max lhs/rhs {:.12}  {}",
                i.name,
                i.max_ratio,
                verdict(i.max_ratio <= 1.0 + INEQUALITY_SLACK)
            )?;
        }
        writeln!(
            f,
            "  agreement    sharp vs regularized     mismatches {}  {}",
            self.agreement.mismatches,
            verdict(self.agreement_passed())
        )?;
        write!(f, "overall {}", verdict(self.passed()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_is_deterministic_and_passes() {
        let a = run_props(3, 2000).unwrap();
        let b = run_props(3, 2000).unwrap();
        assert_eq!(a.to_string(), b.to_string());
        assert!(a.passed(), "{a}");
    }

    #[test]
    fn zero_samples_is_vacuous() {
        let r = run_props(1, 0).unwrap();
        assert!(r.passed());
    }
}

//! The constitutive family and its parameters.
//!
//! All laws are radial: `S(D) = f(|D|) D/|D|` with a nondecreasing magnitude
//! function `f`. The kinds differ only in `f`:
//!
//! | kind | `f(s)` |
//! |------|--------|
//! | sharp activated Euler | `sigma (s - m)_+ / (M^a - s^a)^(1/a)` on `s < M` |
//! | regularised (index `n`) | same with `s` replaced by `min(s, M - 1/n)` in the denominator |
//! | two activations | `2 nu (s - m_lower)_+` plus the sharp term |
//! | activated Navier-Stokes | `2 nu s + 2 nu_tilde (s - m)_+ s^(r-2)` |

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LawError {
    #[error("activation threshold m = {m} and cap M = {cap} violate 0 < m < M - 2 < inf")]
    ActivationOrdering { m: f64, cap: f64 },
    #[error("exponent a = {0} must lie in (0, 1/2)")]
    Exponent(f64),
    #[error("parameter {name} = {value} must be positive")]
    NonPositive { name: &'static str, value: f64 },
    #[error("lower activation m_lower = {m_lower} must satisfy 0 < m_lower < m = {m}")]
    LowerActivation { m_lower: f64, m: f64 },
    #[error("regularisation index n = {n} leaves M - 1/n = {cap_n} not above m = {m}")]
    RegularizationIndex { n: u32, cap_n: f64, m: f64 },
    #[error("growth exponent r = {0} must exceed 2")]
    GrowthExponent(f64),
    #[error("|D| = {norm} is outside the admissible ball |D| < M = {cap}")]
    DomainViolation { norm: f64, cap: f64 },
    #[error("argument {0} must be nonnegative")]
    NegativeArgument(f64),
    #[error("|D| = {norm} lies on the flat branch |D| <= {threshold}, where the stress is not differentiable")]
    FlatBranch { norm: f64, threshold: f64 },
    #[error("argument {s} outside the open interval ({lo}, {hi})")]
    OutOfInterval { s: f64, lo: f64, hi: f64 },
    #[error("operation not supported for this law: {0}")]
    Unsupported(&'static str),
}

/// Which member of the constitutive family is used.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LawKind {
    SharpEuler,
    RegularizedEuler { n: u32 },
    TwoActivation,
    ActivatedNavierStokes { r: f64 },
}

/// Raw parameters. Fields a kind does not use are ignored.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LawParams {
    /// Activation threshold `m` (strain-rate units).
    pub m: f64,
    /// Blow-up threshold `M`.
    pub cap: f64,
    /// Exponent `a`.
    pub a: f64,
    /// Stress scale.
    pub sigma: f64,
    /// Viscosity of the two-activation and activated Navier-Stokes laws.
    pub nu: f64,
    /// Lower activation `m_lower` of the two-activation law.
    pub m_lower: f64,
    /// Secondary viscosity of the activated Navier-Stokes law.
    pub nu_tilde: f64,
}

impl Default for LawParams {
    fn default() -> Self {
        Self { m: 1.0, cap: 4.0, a: 0.25, sigma: 1.0, nu: 0.0, m_lower: 0.0, nu_tilde: 0.0 }
    }
}

/// A validated constitutive law.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstitutiveLaw {
    kind: LawKind,
    p: LawParams,
}

fn positive(name: &'static str, value: f64) -> Result<(), LawError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(LawError::NonPositive { name, value })
    }
}

impl ConstitutiveLaw {
    pub fn new(kind: LawKind, p: LawParams) -> Result<Self, LawError> {
        match kind {
            LawKind::SharpEuler | LawKind::RegularizedEuler { .. } | LawKind::TwoActivation => {
                if !(p.m > 0.0 && p.m < p.cap - 2.0 && p.cap.is_finite()) {
                    return Err(LawError::ActivationOrdering { m: p.m, cap: p.cap });
                }
                if !(p.a > 0.0 && p.a < 0.5) {
                    return Err(LawError::Exponent(p.a));
                }
                positive("sigma", p.sigma)?;
            }
            LawKind::ActivatedNavierStokes { .. } => positive("m", p.m)?,
        }
        match kind {
            LawKind::RegularizedEuler { n } => {
                let cap_n = p.cap - 1.0 / n as f64;
                if n == 0 || cap_n <= p.m {
                    return Err(LawError::RegularizationIndex { n, cap_n, m: p.m });
                }
            }
            LawKind::TwoActivation => {
                positive("nu", p.nu)?;
                if !(p.m_lower > 0.0 && p.m_lower < p.m) {
                    return Err(LawError::LowerActivation { m_lower: p.m_lower, m: p.m });
                }
            }
            LawKind::ActivatedNavierStokes { r } => {
                positive("nu", p.nu)?;
                if !(p.nu_tilde >= 0.0 && p.nu_tilde.is_finite()) {
                    return Err(LawError::NonPositive { name: "nu_tilde", value: p.nu_tilde });
                }
                if !(r > 2.0 && r.is_finite()) {
                    return Err(LawError::GrowthExponent(r));
                }
            }
            LawKind::SharpEuler => {}
        }
        Ok(Self { kind, p })
    }

    pub fn sharp(m: f64, cap: f64, a: f64) -> Result<Self, LawError> {
        Self::new(LawKind::SharpEuler, LawParams { m, cap, a, ..Default::default() })
    }

    pub fn regularized(m: f64, cap: f64, a: f64, n: u32) -> Result<Self, LawError> {
        Self::new(LawKind::RegularizedEuler { n }, LawParams { m, cap, a, ..Default::default() })
    }

    pub fn two_activation(m_lower: f64, m: f64, cap: f64, a: f64, nu: f64) -> Result<Self, LawError> {
        Self::new(LawKind::TwoActivation, LawParams { m, cap, a, nu, m_lower, ..Default::default() })
    }

    pub fn activated_navier_stokes(m: f64, nu: f64, nu_tilde: f64, r: f64) -> Result<Self, LawError> {
        Self::new(LawKind::ActivatedNavierStokes { r }, LawParams { m, nu, nu_tilde, ..Default::default() })
    }

    /// The sharp law with `m = 0`, which is invertible (the limiting-strain
    /// response). This is the only way to build a law with `m = 0`.
    pub fn limiting_strain(cap: f64, a: f64, sigma: f64) -> Result<Self, LawError> {
        positive("M", cap)?;
        positive("sigma", sigma)?;
        if !(a > 0.0 && a < 0.5) {
            return Err(LawError::Exponent(a));
        }
        Ok(Self { kind: LawKind::SharpEuler, p: LawParams { m: 0.0, cap, a, sigma, ..Default::default() } })
    }

    /// Same law with a different stress scale.
    pub fn with_sigma(mut self, sigma: f64) -> Result<Self, LawError> {
        positive("sigma", sigma)?;
        self.p.sigma = sigma;
        Ok(self)
    }

    #[inline]
    pub fn kind(&self) -> LawKind {
        self.kind
    }

    #[inline]
    pub fn params(&self) -> &LawParams {
        &self.p
    }

    #[inline]
    pub fn m(&self) -> f64 {
        self.p.m
    }

    #[inline]
    pub fn cap(&self) -> f64 {
        self.p.cap
    }

    #[inline]
    pub fn a(&self) -> f64 {
        self.p.a
    }

    #[inline]
    pub fn sigma(&self) -> f64 {
        self.p.sigma
    }

    /// Largest `|D|` below which the stress vanishes identically, if any.
    pub fn flat_threshold(&self) -> Option<f64> {
        match self.kind {
            LawKind::SharpEuler | LawKind::RegularizedEuler { .. } => Some(self.p.m),
            LawKind::TwoActivation => Some(self.p.m_lower),
            LawKind::ActivatedNavierStokes { .. } => None,
        }
    }

    /// `M` for the laws whose stress blows up there (sharp and
    /// two-activation); `None` for laws defined on all tensors.
    pub fn domain_bound(&self) -> Option<f64> {
        match self.kind {
            LawKind::SharpEuler | LawKind::TwoActivation => Some(self.p.cap),
            _ => None,
        }
    }

    /// `M - 1/n` for the regularised law.
    pub fn regularization_cap(&self) -> Option<f64> {
        match self.kind {
            LawKind::RegularizedEuler { n } => Some(self.p.cap - 1.0 / n as f64),
            _ => None,
        }
    }

    /// Exponent `2(1 - a)` of the improved stress integrability, or 2 for
    /// laws without an `a`.
    pub fn integrability_exponent(&self) -> f64 {
        match self.kind {
            LawKind::ActivatedNavierStokes { .. } => 2.0,
            _ => 2.0 * (1.0 - self.p.a),
        }
    }
}

/// Derived constants of the regularised law.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LawConstants {
    /// `c_{n,M,a} = M^a - (M - 1/n)^a`.
    pub c_n_m_a: f64,
    /// `|S_n|` at `|D| = (m + M)/2`.
    pub s_star: f64,
}

impl LawConstants {
    pub fn new(law: &ConstitutiveLaw) -> Result<Self, LawError> {
        let LawKind::RegularizedEuler { n } = law.kind else {
            return Err(LawError::Unsupported("law constants need the regularised law"));
        };
        let p = law.params();
        let c_n_m_a = libm::pow(p.cap, p.a) - libm::pow(p.cap - 1.0 / n as f64, p.a);
        Ok(Self { c_n_m_a, s_star: crate::response::s_star(law)? })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_constraint_is_enforced() {
        assert!(ConstitutiveLaw::sharp(1.0, 4.0, 0.25).is_ok());
        assert!(matches!(ConstitutiveLaw::sharp(2.0, 4.0, 0.25), Err(LawError::ActivationOrdering { .. })));
        assert!(matches!(ConstitutiveLaw::sharp(0.0, 4.0, 0.25), Err(LawError::ActivationOrdering { .. })));
        assert!(matches!(ConstitutiveLaw::sharp(1.0, f64::INFINITY, 0.25), Err(LawError::ActivationOrdering { .. })));
    }

    #[test]
    fn exponent_range_is_enforced() {
        assert_eq!(ConstitutiveLaw::sharp(1.0, 4.0, 0.5), Err(LawError::Exponent(0.5)));
        assert_eq!(ConstitutiveLaw::sharp(1.0, 4.0, 0.0), Err(LawError::Exponent(0.0)));
    }

    #[test]
    fn kind_specific_constraints() {
        assert!(ConstitutiveLaw::regularized(1.0, 4.0, 0.25, 0).is_err());
        assert!(ConstitutiveLaw::regularized(1.0, 4.0, 0.25, 1).is_ok());
        assert!(matches!(
            ConstitutiveLaw::two_activation(1.5, 1.0, 4.0, 0.25, 0.1),
            Err(LawError::LowerActivation { .. })
        ));
        assert!(ConstitutiveLaw::two_activation(0.5, 1.0, 4.0, 0.25, 0.1).is_ok());
        assert!(matches!(
            ConstitutiveLaw::activated_navier_stokes(1.0, 0.1, 0.1, 2.0),
            Err(LawError::GrowthExponent(_))
        ));
        assert!(ConstitutiveLaw::activated_navier_stokes(1.0, 0.1, 0.1, 3.0).is_ok());
    }

    #[test]
    fn law_constants_are_positive() {
        let law = ConstitutiveLaw::regularized(1.0, 4.0, 0.25, 10).unwrap();
        let c = LawConstants::new(&law).unwrap();
        assert!(c.c_n_m_a > 0.0 && c.s_star > 0.0);
        assert!(LawConstants::new(&ConstitutiveLaw::sharp(1.0, 4.0, 0.25).unwrap()).is_err());
    }
}

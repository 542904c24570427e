//! Pointwise response of the constitutive family.
//!
//! Every law is radial, `S(D) = f(|D|) D/|D|`, so its directional derivative
//! splits into a tangential and a normal part:
//!
//! ```text
//! dS(D)[E] = T(|D|) E + N(|D|) (D . E) D,     T = f(s)/s,  N = (f'(s) - f(s)/s)/s^2
//! ```
//!
//! and the associated quadratic form is `Q(D, E) = T |E|^2 + N (D . E)^2`.
//! The coefficients below are the closed forms for each kind; for the
//! activated Euler laws they are
//!
//! ```text
//! T = sigma (s - m) / ((M^a - s^a)^(1/a) s)
//! N = sigma ((s - m) s^a + m (M^a - s^a)) / ((M^a - s^a)^(1/a + 1) s^3)
//! ```
//!
//! on the uncapped branch and `T = sigma (s - m)/(c^(1/a) s)`,
//! `N = sigma m/(c^(1/a) s^3)` with `c = M^a - (M - 1/n)^a` on the capped one.

use libm::pow;

use crate::law::{ConstitutiveLaw, LawError, LawKind};
use crate::quadrature;
use crate::tensor::SymTensor;

/// `(M^a - s^a)^(1/a)`, the denominator of the sharp law.
#[inline]
fn blowup_denominator(s: f64, cap: f64, a: f64) -> f64 {
    pow(pow(cap, a) - pow(s, a), 1.0 / a)
}

/// `M^a - s^a` and `(M^a - s^a)^(1 + 1/a)`, rounded exactly as inside the
/// response functions. Near `M` the difference loses most of its digits,
/// so checks that weigh the response by it must use the same rounding.
pub fn blowup_gap(s: f64, law: &ConstitutiveLaw) -> (f64, f64) {
    let p = law.params();
    let g = pow(p.cap, p.a) - pow(s, p.a);
    (g, pow(g, 1.0 / p.a) * g)
}

fn check_domain(s: f64, law: &ConstitutiveLaw) -> Result<(), LawError> {
    if s.is_nan() {
        return Err(LawError::NegativeArgument(s));
    }
    match law.domain_bound() {
        Some(cap) if s >= cap => Err(LawError::DomainViolation { norm: s, cap }),
        _ => Ok(()),
    }
}

/// Magnitude function `f(s) = |S(D)|` at `|D| = s`.
pub fn stress_magnitude(s: f64, law: &ConstitutiveLaw) -> Result<f64, LawError> {
    if !(s >= 0.0) {
        return Err(LawError::NegativeArgument(s));
    }
    check_domain(s, law)?;
    let p = law.params();
    let sharp = |s: f64| {
        if s <= p.m {
            0.0
        } else {
            p.sigma * (s - p.m) / blowup_denominator(s, p.cap, p.a)
        }
    };
    Ok(match law.kind() {
        LawKind::SharpEuler => sharp(s),
        LawKind::RegularizedEuler { n } => {
            if s <= p.m {
                0.0
            } else {
                let t = s.min(p.cap - 1.0 / n as f64);
                p.sigma * (s - p.m) / blowup_denominator(t, p.cap, p.a)
            }
        }
        LawKind::TwoActivation => {
            if s <= p.m_lower {
                0.0
            } else {
                2.0 * p.nu * (s - p.m_lower) + sharp(s)
            }
        }
        LawKind::ActivatedNavierStokes { r } => {
            let mut f = 2.0 * p.nu * s;
            if s > p.m {
                f += 2.0 * p.nu_tilde * (s - p.m) * pow(s, r - 2.0);
            }
            f
        }
    })
}

/// Tangential and normal coefficients `(T, N)` of the directional
/// derivative at `|D| = s` (see the module docs). Callers must have
/// excluded the flat branch and checked the domain.
fn radial_coefficients(s: f64, law: &ConstitutiveLaw) -> (f64, f64) {
    let p = law.params();
    let sharp = |s: f64| {
        let g = pow(p.cap, p.a) - pow(s, p.a);
        let g_pow = pow(g, 1.0 / p.a);
        let t = p.sigma * (s - p.m) / (g_pow * s);
        let n = p.sigma * ((s - p.m) * pow(s, p.a) + p.m * g) / (g_pow * g * s * s * s);
        (t, n)
    };
    match law.kind() {
        LawKind::SharpEuler => sharp(s),
        LawKind::RegularizedEuler { n } => {
            let cap_n = p.cap - 1.0 / n as f64;
            if s < cap_n {
                sharp(s)
            } else {
                let c = pow(p.cap, p.a) - pow(cap_n, p.a);
                let scale = p.sigma / pow(c, 1.0 / p.a);
                (scale * (s - p.m) / s, scale * p.m / (s * s * s))
            }
        }
        LawKind::TwoActivation => {
            let mut t = 2.0 * p.nu * (s - p.m_lower) / s;
            let mut n = 2.0 * p.nu * p.m_lower / (s * s * s);
            if s > p.m {
                let (ts, ns) = sharp(s);
                t += ts;
                n += ns;
            }
            (t, n)
        }
        LawKind::ActivatedNavierStokes { r } => {
            if s <= p.m {
                (2.0 * p.nu, 0.0)
            } else {
                let t = 2.0 * p.nu + 2.0 * p.nu_tilde * (s - p.m) * pow(s, r - 3.0);
                let n = 2.0 * p.nu_tilde * pow(s, r - 3.0) * ((r - 2.0) * s - (r - 3.0) * p.m) / (s * s);
                (t, n)
            }
        }
    }
}

fn differentiable_at(s: f64, law: &ConstitutiveLaw) -> Result<(), LawError> {
    check_domain(s, law)?;
    match law.flat_threshold() {
        Some(threshold) if s <= threshold => Err(LawError::FlatBranch { norm: s, threshold }),
        _ => Ok(()),
    }
}

/// `f'(s)` off the flat branch.
pub fn stress_magnitude_derivative(s: f64, law: &ConstitutiveLaw) -> Result<f64, LawError> {
    differentiable_at(s, law)?;
    if s == 0.0 {
        // only reachable for the activated Navier-Stokes law
        return Ok(radial_coefficients(s, law).0);
    }
    let (t, n) = radial_coefficients(s, law);
    Ok(t + n * s * s)
}

/// `S(D) = f(|D|) D/|D|`, with `D/|D|` read as zero at `D = 0`.
pub fn stress(d: &SymTensor, law: &ConstitutiveLaw) -> Result<SymTensor, LawError> {
    let s = d.norm();
    let f = stress_magnitude(s, law)?;
    if s == 0.0 || f == 0.0 {
        return Ok(SymTensor::zero(d.dim()));
    }
    Ok(d.scale(f / s))
}

/// Directional derivative `dS(D)[dD]`. Undefined on the flat branch, where
/// an error is returned so the caller can treat that region explicitly.
pub fn stress_jacobian_apply(d: &SymTensor, dd: &SymTensor, law: &ConstitutiveLaw) -> Result<SymTensor, LawError> {
    let s = d.norm();
    differentiable_at(s, law)?;
    if s == 0.0 {
        return Ok(dd.scale(radial_coefficients(s, law).0));
    }
    let (t, n) = radial_coefficients(s, law);
    Ok(dd.scale(t).add_scaled(n * d.dot(dd), d))
}

/// `Q(D, dD) = dS(D)[dD] . dD`, which is nonnegative. Zero on the flat
/// branch by convention.
pub fn quadratic_form(d: &SymTensor, dd: &SymTensor, law: &ConstitutiveLaw) -> Result<f64, LawError> {
    let s = d.norm();
    check_domain(s, law)?;
    if let Some(threshold) = law.flat_threshold() {
        if s <= threshold {
            return Ok(0.0);
        }
    }
    let (t, n) = radial_coefficients(s, law);
    let proj = d.dot(dd);
    Ok(t * dd.norm_sq() + n * proj * proj)
}

/// The weights `alpha(s)`, `beta(s)` of the gradient bound
/// `(M^a - s^a)^(1 + 1/a) |dS|^2 <= max(alpha, beta) Q`.
pub fn alpha_beta(s: f64, law: &ConstitutiveLaw) -> Result<(f64, f64), LawError> {
    match law.kind() {
        LawKind::SharpEuler | LawKind::RegularizedEuler { .. } => {}
        _ => return Err(LawError::Unsupported("alpha/beta are defined for the activated Euler laws")),
    }
    let p = law.params();
    if !(s > p.m && s < p.cap) {
        return Err(LawError::OutOfInterval { s, lo: p.m, hi: p.cap });
    }
    let g = pow(p.cap, p.a) - pow(s, p.a);
    let alpha = (s - p.m) * g / s;
    let beta = (2.0 * (s - p.m) * g + (s - p.m) * pow(s, p.a) + p.m * g) / s;
    Ok((alpha, beta))
}

/// `(S(D1) - S(D2)) . (D1 - D2)`; nonnegative for every law of the family.
pub fn monotonicity_gap(d1: &SymTensor, d2: &SymTensor, law: &ConstitutiveLaw) -> Result<f64, LawError> {
    let s1 = stress(d1, law)?;
    let s2 = stress(d2, law)?;
    Ok((s1 - s2).dot(&(*d1 - *d2)))
}

/// Inverse of the sharp law with `m = 0`:
/// `D = M S / (sigma^a + |S|^a)^(1/a)`.
pub fn inverse_stress(s: &SymTensor, law: &ConstitutiveLaw) -> Result<SymTensor, LawError> {
    if law.kind() != LawKind::SharpEuler || law.m() != 0.0 {
        return Err(LawError::Unsupported("the response is invertible only for the sharp law with m = 0"));
    }
    let p = law.params();
    let norm = s.norm();
    if norm == 0.0 {
        return Ok(SymTensor::zero(s.dim()));
    }
    let denom = pow(pow(p.sigma, p.a) + pow(norm, p.a), 1.0 / p.a);
    Ok(s.scale(p.cap / denom))
}

/// `|S((m + M)/2)|`, the level separating the moderate and the steep parts
/// of the response.
pub fn s_star(law: &ConstitutiveLaw) -> Result<f64, LawError> {
    match law.kind() {
        LawKind::SharpEuler | LawKind::RegularizedEuler { .. } => {}
        _ => return Err(LawError::Unsupported("s_star is defined for the activated Euler laws")),
    }
    let p = law.params();
    let mid = 0.5 * (p.m + p.cap);
    Ok(p.sigma * 0.5 * (p.cap - p.m) / blowup_denominator(mid, p.cap, p.a))
}

const POTENTIAL_ABS_TOL: f64 = 1e-12;
const POTENTIAL_REL_TOL: f64 = 1e-14;

/// Potential `F_n(s) = int_0^s f_n` of the regularised law.
///
/// The uncapped part is integrated adaptively; past `M - 1/n` the integrand
/// is linear and the remainder is added in closed form.
pub fn potential(s: f64, law: &ConstitutiveLaw) -> Result<f64, LawError> {
    let LawKind::RegularizedEuler { n } = law.kind() else {
        return Err(LawError::Unsupported("the potential is provided for the regularised law only"));
    };
    if !(s >= 0.0) {
        return Err(LawError::NegativeArgument(s));
    }
    let p = *law.params();
    if s <= p.m {
        return Ok(0.0);
    }
    let cap_n = p.cap - 1.0 / n as f64;
    let upper = s.min(cap_n);
    let integrand = |t: f64| p.sigma * (t - p.m) / blowup_denominator(t, p.cap, p.a);
    let est = quadrature::integrate(integrand, p.m, upper, POTENTIAL_ABS_TOL, POTENTIAL_REL_TOL);
    let mut value = est.value;
    if s > cap_n {
        let c = pow(p.cap, p.a) - pow(cap_n, p.a);
        let a = s - p.m;
        let b = cap_n - p.m;
        value += p.sigma * (a - b) * (a + b) / (2.0 * pow(c, 1.0 / p.a));
    }
    Ok(value)
}

/// A constant `C` with
/// `|dS_n(D)[E]|^2 / (1 + |S_n(D)|)^(1+a) <= C Q_n(D, E)` for all
/// `|D| >= (m + M)/2`.
///
/// Two branch constants are combined. On `(m+M)/2 <= |D| < M - 1/n` the bound
/// `(M^a - |D|^a)^(1+1/a) |dS|^2 <= beta Q` (note `beta >= alpha`) together
/// with `1 + |S|^a >= ((M-m)/2)^a / (M^a - |D|^a)` and the power-mean
/// inequality `(1 + x^a)^(1/a) <= 2^((1-a)/a) (1 + x)` gives
///
/// ```text
/// C_1 = 2^((1-a)(1+a)/a) sup beta / ((M - m)/2)^(1+a),
/// ```
///
/// with `sup beta` bounded termwise on `[(m+M)/2, M]`. On `|D| >= M - 1/n`
/// the capped law gives `C_2 = 8 c / (M - m)^(1+a)`. A stress scale `sigma`
/// enters as `sigma / min(1, sigma)^(1+a)`.
pub fn gradient_estimate_constant(law: &ConstitutiveLaw) -> Result<f64, LawError> {
    let p = law.params();
    let (m, cap, a) = (p.m, p.cap, p.a);
    let mid = 0.5 * (m + cap);
    let g_mid = pow(cap, a) - pow(mid, a);
    let beta_sup = (2.0 * (cap - m) * g_mid + (cap - m) * pow(cap, a) + m * g_mid) / mid;
    let half_gap = 0.5 * (cap - m);
    let c1 = pow(2.0, (1.0 - a) * (1.0 + a) / a) * beta_sup / pow(half_gap, 1.0 + a);
    let base = match law.kind() {
        LawKind::SharpEuler => c1,
        LawKind::RegularizedEuler { n } => {
            let c = pow(cap, a) - pow(cap - 1.0 / n as f64, a);
            let c2 = 8.0 * c / pow(cap - m, 1.0 + a);
            c1.max(c2)
        }
        _ => return Err(LawError::Unsupported("the gradient estimate is stated for the activated Euler laws")),
    };
    let sigma = p.sigma;
    Ok(base * sigma / pow(sigma.min(1.0), 1.0 + a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::law::LawConstants;
    use crate::tensor::Dim;

    fn law() -> ConstitutiveLaw {
        ConstitutiveLaw::sharp(1.0, 4.0, 0.25).unwrap()
    }

    fn unit(dim: Dim) -> SymTensor {
        let raw = match dim {
            Dim::Two => SymTensor::from_slots(dim, &[0.3, -0.7, 0.4]),
            Dim::Three => SymTensor::from_slots(dim, &[0.3, -0.7, 0.1, 0.4, -0.2, 0.5]),
        };
        raw.scale(1.0 / raw.norm())
    }

    // 1.5 / (4^(1/4) - 2.5^(1/4))^4, evaluated with 40-digit arithmetic.
    const S_STAR_REFERENCE: f64 = 2482.716_601_843_393_4;

    #[test]
    fn below_and_at_activation_the_stress_vanishes() {
        for dim in [Dim::Two, Dim::Three] {
            let e = unit(dim);
            assert_eq!(stress(&e.scale(0.5), &law()).unwrap(), SymTensor::zero(dim));
            assert_eq!(stress(&e.scale(1.0), &law()).unwrap(), SymTensor::zero(dim));
            assert_eq!(stress(&SymTensor::zero(dim), &law()).unwrap(), SymTensor::zero(dim));
        }
    }

    #[test]
    fn midpoint_stress_matches_high_precision_value() {
        let e = unit(Dim::Three);
        let s = stress(&e.scale(2.5), &law()).unwrap();
        assert!((s.norm() - S_STAR_REFERENCE).abs() < 1e-12 * S_STAR_REFERENCE);
        // direction is exactly E
        let dir = s.scale(1.0 / s.norm());
        assert!((dir - e).norm() < 1e-14);
        assert!((s_star(&law()).unwrap() - S_STAR_REFERENCE).abs() < 1e-12 * S_STAR_REFERENCE);
    }

    #[test]
    fn sharp_law_rejects_the_cap() {
        let e = unit(Dim::Two);
        assert!(matches!(stress(&e.scale(4.0), &law()), Err(LawError::DomainViolation { .. })));
        assert!(matches!(stress_magnitude(-1e-3, &law()), Err(LawError::NegativeArgument(_))));
    }

    #[test]
    fn capped_magnitude_uses_the_frozen_denominator() {
        let reg = ConstitutiveLaw::regularized(1.0, 4.0, 0.25, 10).unwrap();
        let expected = (3.95 - 1.0) / (4f64.powf(0.25) - 3.9f64.powf(0.25)).powi(4);
        let got = stress_magnitude(3.95, &reg).unwrap();
        assert!((got - expected).abs() < 1e-12 * expected);
        // 40-digit value of the same expression
        assert!((got - 465_363_562.326_722_74).abs() < 1e-8 * got);
        assert_eq!(stress_magnitude(1.0, &reg).unwrap(), 0.0);
        for s in [1.2, 2.0, 3.0, 3.85, 3.9] {
            assert_eq!(stress_magnitude(s, &reg).unwrap(), stress_magnitude(s, &law()).unwrap());
        }
    }

    #[test]
    fn jacobian_special_directions() {
        let d = unit(Dim::Three).scale(2.0);
        // a direction orthogonal to D
        let raw = SymTensor::from_slots(Dim::Three, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let orth = raw.add_scaled(-raw.dot(&d) / d.norm_sq(), &d);
        assert!(orth.dot(&d).abs() < 1e-15);
        let j = stress_jacobian_apply(&d, &orth, &law()).unwrap();
        let f = stress_magnitude(2.0, &law()).unwrap();
        assert!((j - orth.scale(f / 2.0)).norm() < 1e-12 * j.norm());
        // dD = D gives a result collinear with D
        let j = stress_jacobian_apply(&d, &d, &law()).unwrap();
        let cos = j.dot(&d) / (j.norm() * d.norm());
        assert!((cos - 1.0).abs() < 1e-14);
        // flat branch is rejected
        assert!(matches!(stress_jacobian_apply(&d.scale(0.4), &d, &law()), Err(LawError::FlatBranch { .. })));
    }

    #[test]
    fn quadratic_form_edge_cases() {
        let d = unit(Dim::Two).scale(2.0);
        assert_eq!(quadratic_form(&d, &SymTensor::zero(Dim::Two), &law()).unwrap(), 0.0);
        assert_eq!(quadratic_form(&d.scale(0.25), &d, &law()).unwrap(), 0.0);
        let raw = SymTensor::from_slots(Dim::Two, &[0.0, 0.0, 1.0]);
        let orth = raw.add_scaled(-raw.dot(&d) / d.norm_sq(), &d);
        let q = quadratic_form(&d, &orth, &law()).unwrap();
        let s: f64 = 2.0;
        let expected = (s - 1.0) * orth.norm_sq() / ((4f64.powf(0.25) - s.powf(0.25)).powi(4) * s);
        assert!((q - expected).abs() < 1e-13 * expected);
    }

    #[test]
    fn alpha_beta_limits_and_value() {
        let (a, _) = alpha_beta(1.0 + 1e-9, &law()).unwrap();
        assert!(a < 1e-8);
        let (a, _) = alpha_beta(4.0 - 1e-9, &law()).unwrap();
        assert!(a < 1e-8);
        let (a, b) = alpha_beta(2.5, &law()).unwrap();
        let expected = 1.5 * (4f64.powf(0.25) - 2.5f64.powf(0.25)) / 2.5;
        assert!((a - expected).abs() < 1e-15);
        assert!((a - 0.094_068_079_614_095_78).abs() < 1e-15);
        assert!(b > a);
        assert!(alpha_beta(1.0, &law()).is_err());
        assert!(alpha_beta(4.0, &law()).is_err());
    }

    #[test]
    fn inverse_stress_round_trip_and_bounds() {
        let lim = ConstitutiveLaw::limiting_strain(4.0, 0.25, 1.0).unwrap();
        let zero = SymTensor::zero(Dim::Three);
        assert_eq!(inverse_stress(&zero, &lim).unwrap(), zero);
        let e = unit(Dim::Three);
        assert!(inverse_stress(&e.scale(1e9), &lim).unwrap().norm() < 4.0);
        for mag in [1e-3, 0.5, 3.0, 100.0, 1e3] {
            let s = e.scale(mag);
            let back = stress(&inverse_stress(&s, &lim).unwrap(), &lim).unwrap();
            assert!((back - s).norm() < 1e-10 * mag, "mag {mag}");
        }
        assert!(matches!(inverse_stress(&e, &law()), Err(LawError::Unsupported(_))));
    }

    #[test]
    fn s_star_is_the_midpoint_magnitude() {
        for n in [3, 10, 1000] {
            let reg = ConstitutiveLaw::regularized(1.0, 4.0, 0.25, n).unwrap();
            let c = LawConstants::new(&reg).unwrap();
            assert_eq!(c.s_star, stress_magnitude(2.5, &reg).unwrap());
        }
    }

    #[test]
    fn potential_basic_properties() {
        let reg = ConstitutiveLaw::regularized(1.0, 4.0, 0.25, 10).unwrap();
        assert_eq!(potential(0.9, &reg).unwrap(), 0.0);
        let f25 = potential(2.5, &reg).unwrap();
        let f3 = potential(3.0, &reg).unwrap();
        assert!(f3 >= f25);
        // 40-digit quadrature reference values
        assert!((f25 - 657.803_668_303_438_5).abs() < 1e-10 * f25);
        assert!((f3 - 4_884.847_339_960_122).abs() < 1e-10 * f3);
        let f395 = potential(3.95, &reg).unwrap();
        assert!((f395 - 37_788_806.633_969_55).abs() < 1e-9 * f395);
        assert!(potential(1.0, &law()).is_err());
    }

    #[test]
    fn two_activation_and_navier_stokes_branches() {
        let two = ConstitutiveLaw::two_activation(0.5, 1.0, 4.0, 0.25, 0.1).unwrap();
        assert_eq!(stress_magnitude(0.4, &two).unwrap(), 0.0);
        assert!((stress_magnitude(0.8, &two).unwrap() - 2.0 * 0.1 * 0.3).abs() < 1e-15);
        let expected = 2.0 * 0.1 * 2.0 + stress_magnitude(2.5, &law()).unwrap();
        assert!((stress_magnitude(2.5, &two).unwrap() - expected).abs() < 1e-12 * expected);

        let ans = ConstitutiveLaw::activated_navier_stokes(1.0, 0.1, 0.2, 3.0).unwrap();
        let d = unit(Dim::Two).scale(0.5);
        assert!((stress(&d, &ans).unwrap() - d.scale(0.2)).norm() < 1e-15);
        let d = unit(Dim::Two).scale(2.0);
        let expected = d.scale(0.2).add_scaled(2.0 * 0.2 * 1.0, &d);
        assert!((stress(&d, &ans).unwrap() - expected).norm() < 1e-14);
        // no flat branch: the derivative exists at the origin
        let z = SymTensor::zero(Dim::Two);
        assert_eq!(stress_jacobian_apply(&z, &d, &ans).unwrap(), d.scale(0.2));
    }
}

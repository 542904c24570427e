//! Pointwise core of the activated Euler laboratory.
//!
//! Everything here is a pure function of its arguments and builds without
//! `std` (only `alloc` is needed, for the integrator's stage buffers):
//!
//! * [`tensor`]: symmetric `d x d` tensors (`d = 2, 3`) with the Frobenius
//!   inner product.
//! * [`law`]: the constitutive family (sharp activated Euler, its capped
//!   regularisation, the two-activation law and the activated Navier-Stokes
//!   law) together with parameter validation.
//! * [`response`]: stress evaluation, directional derivatives, quadratic
//!   forms, potentials, monotonicity gaps and the constants of the gradient
//!   estimates.
//! * [`quadrature`]: adaptive Gauss-Kronrod integration.
//! * [`ode`]: the Dormand-Prince 5(4) pair with PI step-size control.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod law;
pub mod ode;
pub mod quadrature;
pub mod response;
pub mod tensor;

pub use law::{ConstitutiveLaw, LawConstants, LawError, LawKind, LawParams};
pub use response::{
    alpha_beta, blowup_gap, gradient_estimate_constant, inverse_stress, monotonicity_gap, potential, quadratic_form,
    s_star, stress, stress_jacobian_apply, stress_magnitude, stress_magnitude_derivative,
};
pub use tensor::{Dim, SymTensor};

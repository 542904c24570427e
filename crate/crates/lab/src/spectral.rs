//! Spectral representation of divergence-free velocities and the field
//! operations built on it.

use std::sync::Arc;

use activated_euler_core::SymTensor;
use rustfft::num_complex::Complex64;
use thiserror::Error;

use crate::basis::Basis;
use crate::fft::Transform;
use crate::grid::Grid;

#[derive(Debug, Error, PartialEq)]
pub enum SpectralError {
    #[error("dimension {0} is not supported (expected 2 or 3)")]
    Dimension(usize),
    #[error("box length L = {0} must be positive and finite")]
    BoxLength(f64),
    #[error("grid size N = {0} must be even and at least 4")]
    GridSize(usize),
    #[error("band K = {band} reaches the Nyquist frequency of an N = {size} grid")]
    Band { band: usize, size: usize },
    #[error("{requested} modes requested but only {capacity} fit in the band |k_i| <= {band}")]
    Capacity { requested: usize, capacity: usize, band: usize },
    #[error("expected {expected} values, found {found}")]
    Shape { expected: usize, found: usize },
    #[error("mollifier width {eps} must lie in (0, L/4 = {limit})")]
    KernelWidth { eps: f64, limit: f64 },
    #[error("dealiased products are implemented for 2 or 3 factors, got {0}")]
    Degree(usize),
}

/// Divergence-free, zero-mean velocity `sum_r c_r omega_r`.
#[derive(Clone, Debug)]
pub struct SpectralVelocity {
    basis: Arc<Basis>,
    c: Vec<f64>,
}

impl SpectralVelocity {
    pub fn new(basis: Arc<Basis>, c: Vec<f64>) -> Result<Self, SpectralError> {
        if c.len() != basis.len() {
            return Err(SpectralError::Shape { expected: basis.len(), found: c.len() });
        }
        Ok(Self { basis, c })
    }

    pub fn zeros(basis: Arc<Basis>) -> Self {
        let c = vec![0.0; basis.len()];
        Self { basis, c }
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn grid(&self) -> &Grid {
        self.basis.grid()
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.c
    }

    pub fn coefficients_mut(&mut self) -> &mut [f64] {
        &mut self.c
    }

    /// `||v||_2`; equal to the Euclidean norm of `c` by orthonormality.
    pub fn l2_norm(&self) -> f64 {
        self.c.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn kinetic_energy(&self) -> f64 {
        0.5 * self.c.iter().map(|x| x * x).sum::<f64>()
    }

    /// `P^n v`: zeroes every coefficient past the first `n`.
    pub fn galerkin_truncate(&self, n: usize) -> Self {
        let mut out = self.clone();
        for x in out.c.iter_mut().skip(n) {
            *x = 0.0;
        }
        out
    }

    /// Coefficients on the first `n` modes, as a velocity of the prefix basis.
    pub fn restrict(&self, basis: Arc<Basis>) -> Result<Self, SpectralError> {
        if basis.len() > self.c.len() || basis.modes() != &self.basis.modes()[..basis.len()] {
            return Err(SpectralError::Shape { expected: self.c.len(), found: basis.len() });
        }
        let c = self.c[..basis.len()].to_vec();
        Ok(Self { basis, c })
    }

    /// Velocity spectra, one half spectrum per component.
    pub fn spectrum(&self) -> Vec<Vec<Complex64>> {
        let g = self.grid();
        let mut out = vec![vec![Complex64::default(); g.spectral_len()]; g.d()];
        self.basis.to_spectrum(&self.c, &mut out);
        out
    }

    /// `v + s w` for velocities on the same basis.
    pub fn add_scaled(&self, s: f64, w: &Self) -> Result<Self, SpectralError> {
        if w.c.len() != self.c.len() {
            return Err(SpectralError::Shape { expected: self.c.len(), found: w.c.len() });
        }
        let mut out = self.clone();
        for (x, y) in out.c.iter_mut().zip(&w.c) {
            *x += s * y;
        }
        Ok(out)
    }

    pub fn scale(&mut self, s: f64) {
        for x in &mut self.c {
            *x *= s;
        }
    }
}

/// Physical vector field, one array per component.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub grid: Grid,
    pub components: Vec<Vec<f64>>,
}

impl VectorField {
    pub fn magnitude(&self, idx: usize) -> f64 {
        self.components.iter().map(|c| c[idx] * c[idx]).sum::<f64>().sqrt()
    }

    pub fn norm(&self, p: Norm) -> f64 {
        lp_norm(&self.grid, (0..self.grid.points()).map(|i| self.magnitude(i)), p)
    }

    /// `1/2 ||v||_2^2` by grid quadrature.
    pub fn kinetic_energy(&self) -> f64 {
        0.5 * self.norm(Norm::L(2.0)).powi(2)
    }
}

/// Physical symmetric tensor field, one array per stored entry
/// (see [`Dim::slot`]).
#[derive(Clone, Debug, PartialEq)]
pub struct TensorField {
    pub grid: Grid,
    pub slots: Vec<Vec<f64>>,
}

impl TensorField {
    pub fn at(&self, idx: usize) -> SymTensor {
        let dim = self.grid.dim();
        let mut t = SymTensor::zero(dim);
        for (s, x) in t.slots_mut().iter_mut().enumerate() {
            *x = self.slots[s][idx];
        }
        t
    }

    pub fn norm(&self, p: Norm) -> f64 {
        lp_norm(&self.grid, (0..self.grid.points()).map(|i| self.at(i).norm()), p)
    }

    /// `max_x |D(x)|`.
    pub fn max_norm(&self) -> f64 {
        self.norm(Norm::Inf)
    }
}

/// Exponent of a discrete Lebesgue norm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Norm {
    L(f64),
    Inf,
}

/// `(h^d sum_x |f(x)|^p)^(1/p)`, or `max_x |f(x)|`.
pub fn lp_norm<I: IntoIterator<Item = f64>>(grid: &Grid, values: I, p: Norm) -> f64 {
    match p {
        Norm::Inf => values.into_iter().fold(0.0, |m, x| m.max(x.abs())),
        Norm::L(p) => {
            let sum: f64 = values.into_iter().map(|x| x.abs().powf(p)).sum();
            (grid.cell_volume() * sum).powf(1.0 / p)
        }
    }
}

/// Removes the gradient part of a vector field given by its component
/// spectra: `v_hat <- (I - k k^T/|k|^2) v_hat`, with the mean set to zero.
pub fn leray_project(grid: &Grid, fields: &mut [Vec<Complex64>]) {
    let d = grid.d();
    assert_eq!(fields.len(), d);
    for idx in 0..grid.spectral_len() {
        let k = grid.spectral_wavevector(idx);
        let k2: i64 = k.iter().map(|x| x * x).sum();
        if k2 == 0 {
            for f in fields.iter_mut() {
                f[idx] = Complex64::default();
            }
            continue;
        }
        let mut dot = Complex64::default();
        for i in 0..d {
            dot += fields[i][idx] * k[i] as f64;
        }
        let dot = dot / k2 as f64;
        for i in 0..d {
            fields[i][idx] -= dot * k[i] as f64;
        }
    }
}

/// Physical velocity from its component spectra.
pub fn velocity_field(t: &mut Transform, v_hat: &[Vec<Complex64>]) -> VectorField {
    let grid = *t.grid();
    let components = v_hat
        .iter()
        .map(|s| {
            let mut f = t.field();
            t.inverse(s, &mut f);
            f
        })
        .collect();
    VectorField { grid, components }
}

/// `D v = (grad v + grad v^T)/2` by spectral differentiation. The Nyquist
/// frequency, where the derivative of a real field is ambiguous, is dropped.
pub fn sym_gradient(t: &mut Transform, v_hat: &[Vec<Complex64>]) -> TensorField {
    let grid = *t.grid();
    let dim = grid.dim();
    let d = grid.d();
    let k0 = grid.fundamental();
    let nyquist = (grid.size() / 2) as i64;
    let mut slots = Vec::with_capacity(dim.sym_len());
    let mut spec = t.spectrum();
    for s in 0..dim.sym_len() {
        let (i, j) = dim.pair(s);
        for (idx, z) in spec.iter_mut().enumerate() {
            let k = grid.spectral_wavevector(idx);
            if k[..d].iter().any(|x| x.abs() == nyquist) {
                *z = Complex64::default();
                continue;
            }
            let ki = k0 * k[i] as f64;
            let kj = k0 * k[j] as f64;
            let grad = v_hat[i][idx] * kj + v_hat[j][idx] * ki;
            *z = Complex64::new(0.0, 0.5) * grad;
        }
        let mut f = t.field();
        t.inverse(&spec, &mut f);
        slots.push(f);
    }
    TensorField { grid, slots }
}

/// Velocity and symmetric gradient of a spectral velocity on its grid.
pub fn physical_fields(t: &mut Transform, v: &SpectralVelocity) -> (VectorField, TensorField) {
    let spec = v.spectrum();
    (velocity_field(t, &spec), sym_gradient(t, &spec))
}

/// `||D v||_inf` on the grid.
pub fn strain_max(t: &mut Transform, v: &SpectralVelocity) -> f64 {
    sym_gradient(t, &v.spectrum()).max_norm()
}

/// Projects a physical vector field onto the span of `basis`.
pub fn project(t: &mut Transform, basis: Arc<Basis>, field: &VectorField) -> Result<SpectralVelocity, SpectralError> {
    let grid = *basis.grid();
    if field.components.len() != grid.d() {
        return Err(SpectralError::Shape { expected: grid.d(), found: field.components.len() });
    }
    let mut spec = Vec::with_capacity(grid.d());
    for comp in &field.components {
        if comp.len() != grid.points() {
            return Err(SpectralError::Shape { expected: grid.points(), found: comp.len() });
        }
        let mut s = t.spectrum();
        t.forward(comp, &mut s);
        spec.push(s);
    }
    let mut c = vec![0.0; basis.len()];
    basis.from_spectrum(&spec, &mut c);
    SpectralVelocity::new(basis, c)
}

/// Pointwise product of two or three band-limited fields, returned as a
/// spectrum truncated to `|k_i| <= (N - 1)/(degree + 1)`: the 2/3 rule for
/// quadratic and the 1/2 rule for cubic products. When every factor lives
/// in that band the retained coefficients are alias-free.
pub fn product_dealiased(t: &mut Transform, factors: &[&[f64]]) -> Result<Vec<Complex64>, SpectralError> {
    let grid = *t.grid();
    let degree = factors.len();
    if !(2..=3).contains(&degree) {
        return Err(SpectralError::Degree(degree));
    }
    for f in factors {
        if f.len() != grid.points() {
            return Err(SpectralError::Shape { expected: grid.points(), found: f.len() });
        }
    }
    let mut prod = t.field();
    for (idx, p) in prod.iter_mut().enumerate() {
        *p = factors.iter().map(|f| f[idx]).product();
    }
    let mut spec = t.spectrum();
    t.forward(&prod, &mut spec);
    let band = grid.dealiased_band(degree) as i64;
    let d = grid.d();
    for (idx, z) in spec.iter_mut().enumerate() {
        let k = grid.spectral_wavevector(idx);
        if k[..d].iter().any(|x| x.abs() > band) {
            *z = Complex64::default();
        }
    }
    Ok(spec)
}

/// Convolution with the bump `omega_eps(x) ~ exp(-1/(1 - |x/eps|^2))`,
/// sampled on the grid with periodic distances and renormalised to unit
/// discrete mass. It acts on coefficients as the real multiplier
/// `L^d K_hat(k)`.
#[derive(Clone, Debug)]
pub struct Mollifier {
    eps: f64,
    multiplier: Vec<f64>,
}

impl Mollifier {
    pub fn new(t: &mut Transform, eps: f64) -> Result<Self, SpectralError> {
        let grid = *t.grid();
        let limit = grid.length() / 4.0;
        if !(eps > 0.0 && eps < limit) {
            return Err(SpectralError::KernelWidth { eps, limit });
        }
        let l = grid.length();
        let mut kernel = t.field();
        for (idx, w) in kernel.iter_mut().enumerate() {
            let x = grid.point(idx);
            let r2: f64 = x[..grid.d()]
                .iter()
                .map(|&xi| {
                    let y = if xi > 0.5 * l { xi - l } else { xi };
                    y * y
                })
                .sum::<f64>()
                / (eps * eps);
            *w = if r2 < 1.0 { (-1.0 / (1.0 - r2)).exp() } else { 0.0 };
        }
        let mass: f64 = grid.cell_volume() * kernel.iter().sum::<f64>();
        for w in &mut kernel {
            *w /= mass;
        }
        let mut spec = t.spectrum();
        t.forward(&kernel, &mut spec);
        let vol = grid.volume();
        let multiplier = spec.iter().map(|z| vol * z.re).collect();
        Ok(Self { eps, multiplier })
    }

    pub fn width(&self) -> f64 {
        self.eps
    }

    /// Multiplier at a half-spectrum slot.
    pub fn multiplier(&self, slot: usize) -> f64 {
        self.multiplier[slot]
    }

    pub fn apply(&self, v: &SpectralVelocity) -> SpectralVelocity {
        let mut out = v.clone();
        let basis = v.basis().clone();
        for (mode, c) in basis.modes().iter().zip(out.coefficients_mut()) {
            *c *= self.multiplier[basis.waves()[mode.wave].slot];
        }
        out
    }
}

/// `v_eps = omega_eps * v`; `eps = 0` leaves `v` unchanged.
pub fn mollify(t: &mut Transform, v: &SpectralVelocity, eps: f64) -> Result<SpectralVelocity, SpectralError> {
    if eps == 0.0 {
        return Ok(v.clone());
    }
    Ok(Mollifier::new(t, eps)?.apply(v))
}

//! Divergence-free real Fourier basis ordered by Stokes eigenvalue.
//!
//! Each mode is `omega(x) = A e cos(kappa . x)` or `A e sin(kappa . x)` with
//! `A = sqrt(2 / L^d)`, `kappa = 2 pi k / L` and a unit polarization `e`
//! orthogonal to `k`. Only one of `k`, `-k` is used: the canonical one,
//! whose last nonzero component is positive. Modes are ordered by
//! `(|k|^2, k, polarization, cos before sin)`, so a basis with fewer modes
//! is always a prefix of a larger one.

use std::cmp::Ordering;

use rustfft::num_complex::Complex64;

use crate::grid::Grid;
use crate::spectral::SpectralError;

/// One canonical wavevector and its polarizations.
#[derive(Clone, Debug, PartialEq)]
pub struct Wave {
    pub k: [i64; 3],
    pub kappa: [f64; 3],
    /// Slot of `k` in a half spectrum.
    pub slot: usize,
    /// Slot of `-k`, present when it is also stored (last component zero).
    pub mirror: Option<usize>,
    pub polarizations: [[f64; 3]; 2],
    /// `|kappa|^2`, the Stokes eigenvalue.
    pub eigenvalue: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Cos,
    Sin,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Mode {
    pub wave: usize,
    pub polarization: usize,
    pub parity: Parity,
}

/// The first `n` modes with `max_i |k_i| <= band` on a grid.
#[derive(Clone, Debug)]
pub struct Basis {
    grid: Grid,
    band: usize,
    waves: Vec<Wave>,
    modes: Vec<Mode>,
}

fn is_canonical(k: [i64; 3], d: usize) -> bool {
    match k[..d].iter().rev().find(|&&x| x != 0) {
        Some(&x) => x > 0,
        None => false,
    }
}

fn polarizations(k: [i64; 3], d: usize) -> [[f64; 3]; 2] {
    let norm = (k.iter().map(|&x| (x * x) as f64).sum::<f64>()).sqrt();
    let khat: [f64; 3] = core::array::from_fn(|i| k[i] as f64 / norm);
    let mut axes: Vec<usize> = (0..d).collect();
    axes.sort_by_key(|&i| (k[i].abs(), i));
    let mut out = [[0.0; 3]; 2];
    let mut found: Vec<[f64; 3]> = vec![khat];
    for (slot, &axis) in axes.iter().take(d - 1).enumerate() {
        let mut e = [0.0; 3];
        e[axis] = 1.0;
        for q in &found {
            let dot: f64 = (0..3).map(|i| e[i] * q[i]).sum();
            for i in 0..3 {
                e[i] -= dot * q[i];
            }
        }
        let len = e.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in e.iter_mut() {
            *x /= len;
        }
        found.push(e);
        out[slot] = e;
    }
    out
}

fn lex(a: &[i64; 3], b: &[i64; 3]) -> Ordering {
    let na: i64 = a.iter().map(|x| x * x).sum();
    let nb: i64 = b.iter().map(|x| x * x).sum();
    na.cmp(&nb).then_with(|| a.cmp(b))
}

impl Basis {
    /// Canonical wavevectors with `max_i |k_i| <= band`, in basis order.
    fn wavevectors(grid: &Grid, band: usize) -> Vec<[i64; 3]> {
        let d = grid.d();
        let b = band as i64;
        let mut ks = Vec::new();
        let range = |axis: usize| if axis < d { -b..=b } else { 0..=0 };
        for k0 in range(0) {
            for k1 in range(1) {
                for k2 in range(2) {
                    let k = [k0, k1, k2];
                    if is_canonical(k, d) {
                        ks.push(k);
                    }
                }
            }
        }
        ks.sort_by(lex);
        ks
    }

    /// Number of modes with `max_i |k_i| <= band`.
    pub fn capacity(grid: &Grid, band: usize) -> usize {
        Self::wavevectors(grid, band).len() * 2 * (grid.d() - 1)
    }

    /// The first `n` modes. `band` must leave the Nyquist frequency unused.
    pub fn new(grid: &Grid, band: usize, n: usize) -> Result<Self, SpectralError> {
        if 2 * band >= grid.size() {
            return Err(SpectralError::Band { band, size: grid.size() });
        }
        let d = grid.d();
        let per_wave = 2 * (d - 1);
        let ks = Self::wavevectors(grid, band);
        let capacity = ks.len() * per_wave;
        if n > capacity {
            return Err(SpectralError::Capacity { requested: n, capacity, band });
        }
        let k0 = grid.fundamental();
        let mut waves = Vec::new();
        let mut modes = Vec::with_capacity(n);
        'outer: for k in ks {
            let wave = waves.len();
            let kappa: [f64; 3] = core::array::from_fn(|i| k0 * k[i] as f64);
            let neg = [-k[0], -k[1], -k[2]];
            waves.push(Wave {
                k,
                kappa,
                slot: grid.spectral_index(k).expect("canonical wavevectors are stored"),
                mirror: grid.spectral_index(neg),
                polarizations: polarizations(k, d),
                eigenvalue: k0 * k0 * k.iter().map(|x| (x * x) as f64).sum::<f64>(),
            });
            for polarization in 0..d - 1 {
                for parity in [Parity::Cos, Parity::Sin] {
                    if modes.len() == n {
                        break 'outer;
                    }
                    modes.push(Mode { wave, polarization, parity });
                }
            }
        }
        if let Some(last) = modes.last() {
            waves.truncate(last.wave + 1);
        } else {
            waves.clear();
        }
        Ok(Self { grid: *grid, band, waves, modes })
    }

    /// All modes with `max_i |k_i| <= band`.
    pub fn full(grid: &Grid, band: usize) -> Result<Self, SpectralError> {
        Self::new(grid, band, Self::capacity(grid, band))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn band(&self) -> usize {
        self.band
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn waves(&self) -> &[Wave] {
        &self.waves
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn eigenvalue(&self, r: usize) -> f64 {
        self.waves[self.modes[r].wave].eigenvalue
    }

    /// The first `n` modes of this basis.
    pub fn prefix(&self, n: usize) -> Result<Self, SpectralError> {
        if n > self.len() {
            return Err(SpectralError::Capacity { requested: n, capacity: self.len(), band: self.band });
        }
        let mut out = self.clone();
        out.modes.truncate(n);
        let waves = out.modes.last().map_or(0, |m| m.wave + 1);
        out.waves.truncate(waves);
        Ok(out)
    }

    /// Normalisation `A = sqrt(2 / L^d)` of every mode.
    pub fn amplitude(&self) -> f64 {
        (2.0 / self.grid.volume()).sqrt()
    }

    /// Writes the velocity spectra `v_hat_i` (one half spectrum per
    /// component) of `sum_r c_r omega_r`. Slots outside the basis are zeroed.
    pub fn to_spectrum(&self, c: &[f64], out: &mut [Vec<Complex64>]) {
        assert_eq!(c.len(), self.len());
        let d = self.grid.d();
        for comp in out.iter_mut() {
            comp.fill(Complex64::default());
        }
        let half_amp = 0.5 * self.amplitude();
        for (mode, &cr) in self.modes.iter().zip(c) {
            let w = &self.waves[mode.wave];
            let e = &w.polarizations[mode.polarization];
            // cos -> (A/2) e c, sin -> -(A/2) e i s
            let z = match mode.parity {
                Parity::Cos => Complex64::new(half_amp * cr, 0.0),
                Parity::Sin => Complex64::new(0.0, -half_amp * cr),
            };
            for i in 0..d {
                out[i][w.slot] += z * e[i];
            }
        }
        for w in &self.waves {
            if let Some(m) = w.mirror {
                for comp in out.iter_mut().take(d) {
                    comp[m] = comp[w.slot].conj();
                }
            }
        }
    }

    /// `L^2` projection of a vector field, given by its component spectra,
    /// onto the span of the basis: `c_r = (v, omega_r)`.
    pub fn from_spectrum(&self, v_hat: &[Vec<Complex64>], c: &mut [f64]) {
        assert_eq!(c.len(), self.len());
        let d = self.grid.d();
        let scale = self.amplitude() * self.grid.volume();
        for (mode, cr) in self.modes.iter().zip(c.iter_mut()) {
            let w = &self.waves[mode.wave];
            let e = &w.polarizations[mode.polarization];
            let mut z = Complex64::default();
            for i in 0..d {
                z += v_hat[i][w.slot] * e[i];
            }
            *cr = match mode.parity {
                Parity::Cos => scale * z.re,
                Parity::Sin => -scale * z.im,
            };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_shell_in_2d() {
        let grid = Grid::new(2, 2.0 * std::f64::consts::PI, 16).unwrap();
        let b = Basis::new(&grid, 5, 4).unwrap();
        // canonical |k| = 1 vectors: (0, 1) and (1, 0)
        assert_eq!(b.waves().len(), 2);
        for r in 0..4 {
            assert!((b.eigenvalue(r) - 1.0).abs() < 1e-15);
        }
        assert_eq!(b.waves()[0].k, [0, 1, 0]);
        assert_eq!(b.waves()[1].k, [1, 0, 0]);
        assert_eq!(b.waves()[0].polarizations[0], [1.0, 0.0, 0.0]);
        assert_eq!(b.waves()[1].polarizations[0], [0.0, 1.0, 0.0]);
    }

    #[test]
    fn capacity_and_prefix() {
        let grid = Grid::new(2, 1.0, 128).unwrap();
        assert_eq!(Basis::capacity(&grid, 31), (63 * 63 - 1) / 2 * 2);
        let grid3 = Grid::new(3, 1.0, 16).unwrap();
        assert_eq!(Basis::capacity(&grid3, 3), (7 * 7 * 7 - 1) / 2 * 4);
        let full = Basis::full(&grid3, 3).unwrap();
        let small = Basis::new(&grid3, 3, 37).unwrap();
        assert_eq!(full.prefix(37).unwrap().modes(), small.modes());
        assert!(Basis::new(&grid3, 3, full.len() + 1).is_err());
        assert!(Basis::new(&grid3, 8, 1).is_err());
    }

    #[test]
    fn polarizations_are_orthonormal_and_transverse() {
        let grid = Grid::new(3, 1.0, 16).unwrap();
        let b = Basis::full(&grid, 3).unwrap();
        for w in b.waves() {
            let [e1, e2] = w.polarizations;
            let dot = |a: &[f64; 3], b: &[f64; 3]| (0..3).map(|i| a[i] * b[i]).sum::<f64>();
            let k = [w.k[0] as f64, w.k[1] as f64, w.k[2] as f64];
            assert!(dot(&e1, &k).abs() < 1e-14 && dot(&e2, &k).abs() < 1e-14);
            assert!(dot(&e1, &e2).abs() < 1e-15);
            assert!((dot(&e1, &e1) - 1.0).abs() < 1e-15 && (dot(&e2, &e2) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn eigenvalues_are_nondecreasing() {
        let grid = Grid::new(2, 3.0, 32).unwrap();
        let b = Basis::full(&grid, 10).unwrap();
        for r in 1..b.len() {
            assert!(b.eigenvalue(r) >= b.eigenvalue(r - 1));
        }
    }
}

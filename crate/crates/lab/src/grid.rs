//! Uniform grids on the periodic cell `(0, L)^d`.

use crate::spectral::SpectralError;
use activated_euler_core::Dim;

/// `N^d` points with spacing `h = L/N` on `(0, L)^d`.
///
/// Physical arrays are stored row-major with the last axis fastest.
/// Spectral arrays hold the half spectrum of a real field: the last axis
/// keeps wavenumbers `0..=N/2`, the other axes all `N` in FFT order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    dim: Dim,
    l: f64,
    n: usize,
}

impl Grid {
    pub fn new(d: usize, l: f64, n: usize) -> Result<Self, SpectralError> {
        let dim = Dim::from_usize(d).ok_or(SpectralError::Dimension(d))?;
        if !(l > 0.0 && l.is_finite()) {
            return Err(SpectralError::BoxLength(l));
        }
        if n < 4 || n % 2 != 0 {
            return Err(SpectralError::GridSize(n));
        }
        Ok(Self { dim, l, n })
    }

    #[inline]
    pub fn dim(&self) -> Dim {
        self.dim
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.dim.get()
    }

    /// Side length `L`.
    #[inline]
    pub fn length(&self) -> f64 {
        self.l
    }

    /// Points per axis `N`.
    #[inline]
    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        self.l / self.n as f64
    }

    /// `h^d`, the quadrature weight of one grid point.
    #[inline]
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.d() as i32)
    }

    /// `L^d`.
    #[inline]
    pub fn volume(&self) -> f64 {
        self.l.powi(self.d() as i32)
    }

    /// Number of physical points `N^d`.
    #[inline]
    pub fn points(&self) -> usize {
        self.n.pow(self.d() as u32)
    }

    /// Length of the last spectral axis, `N/2 + 1`.
    #[inline]
    pub fn half(&self) -> usize {
        self.n / 2 + 1
    }

    /// Number of stored spectral coefficients.
    #[inline]
    pub fn spectral_len(&self) -> usize {
        self.n.pow(self.d() as u32 - 1) * self.half()
    }

    /// `2 pi / L`, the wavenumber of the fundamental mode.
    #[inline]
    pub fn fundamental(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.l
    }

    /// Largest `K` such that products of `degree` fields with `|k_i| <= K`
    /// and one more band-limited factor are resolved without aliasing on
    /// this grid: `(degree + 1) K < N`.
    pub fn dealiased_band(&self, degree: usize) -> usize {
        (self.n - 1) / (degree + 1)
    }

    /// Signed wavenumber stored at FFT index `j` of a full axis.
    #[inline]
    pub fn wavenumber(&self, j: usize) -> i64 {
        if j <= self.n / 2 {
            j as i64
        } else {
            j as i64 - self.n as i64
        }
    }

    /// Position of the coefficient of `e^{i kappa . x}` in a half spectrum;
    /// `None` if `k` is not stored (negative last component or out of range).
    pub fn spectral_index(&self, k: [i64; 3]) -> Option<usize> {
        let d = self.d();
        let n = self.n as i64;
        let last = k[d - 1];
        if last < 0 || last > n / 2 {
            return None;
        }
        let mut idx = 0usize;
        for &ki in &k[..d - 1] {
            if ki.abs() > n / 2 {
                return None;
            }
            idx = idx * self.n + ki.rem_euclid(n) as usize;
        }
        Some(idx * self.half() + last as usize)
    }

    /// Integer wavevector of spectral slot `idx`.
    pub fn spectral_wavevector(&self, idx: usize) -> [i64; 3] {
        let d = self.d();
        let mut k = [0i64; 3];
        k[d - 1] = (idx % self.half()) as i64;
        let mut rest = idx / self.half();
        for axis in (0..d - 1).rev() {
            k[axis] = self.wavenumber(rest % self.n);
            rest /= self.n;
        }
        k
    }

    /// Coordinates of physical point `idx`.
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let d = self.d();
        let h = self.spacing();
        let mut x = [0.0; 3];
        let mut rest = idx;
        for axis in (0..d).rev() {
            x[axis] = (rest % self.n) as f64 * h;
            rest /= self.n;
        }
        x
    }
}

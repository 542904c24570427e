//! Initial velocities.
//!
//! Every preset returns a velocity on the full 2/3-rule basis of the grid
//! and is rescaled so that `||D v0||_inf` on the grid equals `amplitude m`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::basis::Basis;
use crate::fft::Transform;
use crate::grid::Grid;
use crate::spectral::{project, strain_max, SpectralError, SpectralVelocity, VectorField};

/// The largest basis presets are expressed on.
pub fn preset_basis(grid: &Grid) -> Result<Arc<Basis>, SpectralError> {
    Ok(Arc::new(Basis::full(grid, grid.dealiased_band(2))?))
}

/// Scales `v` so that `||D v||_inf = target` on the grid. A zero field is
/// returned unchanged.
pub fn rescale_strain(v: &mut SpectralVelocity, target: f64) {
    let mut t = Transform::new(v.grid());
    let current = strain_max(&mut t, v);
    if current > 0.0 {
        v.scale(target / current);
    }
}

/// Taylor-Green vortex on the fundamental wavenumber `k0 = 2 pi / L`:
/// `(sin x cos y, -cos x sin y)` in 2D and
/// `(sin x cos y cos z, -cos x sin y cos z, 0)` in 3D, with `x -> k0 x`.
pub fn taylor_green_field(grid: &Grid) -> VectorField {
    let k0 = grid.fundamental();
    let d = grid.d();
    let mut components = vec![vec![0.0; grid.points()]; d];
    for idx in 0..grid.points() {
        let x = grid.point(idx);
        let (sx, cx) = (k0 * x[0]).sin_cos();
        let (sy, cy) = (k0 * x[1]).sin_cos();
        let cz = if d == 3 { (k0 * x[2]).cos() } else { 1.0 };
        components[0][idx] = sx * cy * cz;
        components[1][idx] = -cx * sy * cz;
    }
    VectorField { grid: *grid, components }
}

/// Taylor-Green vortex with `||D v0||_inf = strain`.
pub fn taylor_green(grid: &Grid, strain: f64) -> Result<SpectralVelocity, SpectralError> {
    let mut t = Transform::new(grid);
    let mut v = project(&mut t, preset_basis(grid)?, &taylor_green_field(grid))?;
    rescale_strain(&mut v, strain);
    Ok(v)
}

/// Gaussian coefficients with standard deviation `1/|k|^2` on the modes with
/// `k_min <= |k| <= k_max`, reproducible from `seed`, rescaled to
/// `||D v0||_inf = strain`.
pub fn random_band(
    grid: &Grid,
    k_min: f64,
    k_max: f64,
    seed: u64,
    strain: f64,
) -> Result<SpectralVelocity, SpectralError> {
    let basis = preset_basis(grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = basis
        .modes()
        .iter()
        .map(|mode| {
            let k = basis.waves()[mode.wave].k;
            let k2 = k.iter().map(|x| (x * x) as f64).sum::<f64>();
            let z: f64 = rng.sample(StandardNormal);
            let kk = k2.sqrt();
            if kk >= k_min && kk <= k_max {
                z / k2
            } else {
                0.0
            }
        })
        .collect();
    let mut v = SpectralVelocity::new(basis, c)?;
    rescale_strain(&mut v, strain);
    Ok(v)
}

/// Projects a stored physical field onto the preset basis and rescales it.
/// `strain = None` keeps the stored amplitude.
pub fn from_field(field: &VectorField, strain: Option<f64>) -> Result<SpectralVelocity, SpectralError> {
    let mut t = Transform::new(&field.grid);
    let mut v = project(&mut t, preset_basis(&field.grid)?, field)?;
    if let Some(s) = strain {
        rescale_strain(&mut v, s);
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn taylor_green_is_one_wave_shell_with_requested_strain() {
        let grid = Grid::new(2, 2.0 * std::f64::consts::PI, 16).unwrap();
        let v = taylor_green(&grid, 0.5).unwrap();
        let mut t = Transform::new(&grid);
        assert!((strain_max(&mut t, &v) - 0.5).abs() < 1e-14);
        // |D v|_max = sqrt(2) A k0, |v|_2^2 = A^2 L^2 / 2
        let amp = 0.5 / std::f64::consts::SQRT_2;
        let e = 0.25 * amp * amp * grid.volume();
        assert!((v.kinetic_energy() - e).abs() < 1e-13 * e);
    }

    #[test]
    fn random_band_is_reproducible() {
        let grid = Grid::new(2, 1.0, 16).unwrap();
        let a = random_band(&grid, 1.0, 3.0, 7, 0.9).unwrap();
        let b = random_band(&grid, 1.0, 3.0, 7, 0.9).unwrap();
        let c = random_band(&grid, 1.0, 3.0, 8, 0.9).unwrap();
        assert_eq!(a.coefficients(), b.coefficients());
        assert_ne!(a.coefficients(), c.coefficients());
        let mut t = Transform::new(&grid);
        assert!((strain_max(&mut t, &a) - 0.9).abs() < 1e-14);
    }
}

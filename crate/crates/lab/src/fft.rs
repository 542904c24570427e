//! Multidimensional real-to-complex transforms on a [`Grid`].
//!
//! The forward transform is normalised,
//! `f_hat(k) = N^{-d} sum_x f(x) e^{-i kappa . x}`, so that a field is the
//! plain sum `f(x) = sum_k f_hat(k) e^{i kappa . x}` of its coefficients.

use std::sync::Arc;

use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::Grid;

/// Transform plans and scratch space for one grid. Plans are cheap to
/// share but the scratch is not, so each worker owns its own `Transform`.
pub struct Transform {
    grid: Grid,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    forward: Arc<dyn Fft<f64>>,
    backward: Arc<dyn Fft<f64>>,
    real_line: Vec<f64>,
    complex_line: Vec<Complex64>,
    real_scratch: Vec<Complex64>,
    column: Vec<Complex64>,
    column_scratch: Vec<Complex64>,
    work: Vec<Complex64>,
}

impl Transform {
    pub fn new(grid: &Grid) -> Self {
        let n = grid.size();
        let mut real = RealFftPlanner::<f64>::new();
        let r2c = real.plan_fft_forward(n);
        let c2r = real.plan_fft_inverse(n);
        let mut planner = FftPlanner::<f64>::new();
        let forward = planner.plan_fft_forward(n);
        let backward = planner.plan_fft_inverse(n);
        let scratch_len = r2c.get_scratch_len().max(c2r.get_scratch_len());
        let column_scratch = forward.get_inplace_scratch_len().max(backward.get_inplace_scratch_len());
        Self {
            grid: *grid,
            real_line: vec![0.0; n],
            complex_line: vec![Complex64::default(); grid.half()],
            real_scratch: vec![Complex64::default(); scratch_len],
            column: vec![Complex64::default(); n],
            column_scratch: vec![Complex64::default(); column_scratch],
            work: vec![Complex64::default(); grid.spectral_len()],
            r2c,
            c2r,
            forward,
            backward,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// A zeroed spectral array.
    pub fn spectrum(&self) -> Vec<Complex64> {
        vec![Complex64::default(); self.grid.spectral_len()]
    }

    /// A zeroed physical array.
    pub fn field(&self) -> Vec<f64> {
        vec![0.0; self.grid.points()]
    }

    /// Normalised forward transform of a real field.
    pub fn forward(&mut self, input: &[f64], output: &mut [Complex64]) {
        let g = self.grid;
        let n = g.size();
        let half = g.half();
        assert_eq!(input.len(), g.points());
        assert_eq!(output.len(), g.spectral_len());
        let scale = 1.0 / g.points() as f64;
        for (line, out) in input.chunks_exact(n).zip(output.chunks_exact_mut(half)) {
            self.real_line.copy_from_slice(line);
            self.r2c
                .process_with_scratch(&mut self.real_line, out, &mut self.real_scratch)
                .expect("buffer lengths match the plan");
            for z in out.iter_mut() {
                *z *= scale;
            }
        }
        self.full_axes(output, true);
    }

    /// Inverse transform: evaluates `sum_k f_hat(k) e^{i kappa . x}` on the
    /// grid. The input is taken to be Hermitian; imaginary parts that a real
    /// field cannot carry (zero and Nyquist frequencies of the last axis)
    /// are dropped.
    pub fn inverse(&mut self, input: &[Complex64], output: &mut [f64]) {
        let g = self.grid;
        let n = g.size();
        let half = g.half();
        assert_eq!(input.len(), g.spectral_len());
        assert_eq!(output.len(), g.points());
        let mut work = std::mem::take(&mut self.work);
        work.copy_from_slice(input);
        self.full_axes(&mut work, false);
        for (spec, out) in work.chunks_exact(half).zip(output.chunks_exact_mut(n)) {
            self.complex_line.copy_from_slice(spec);
            self.complex_line[0].im = 0.0;
            self.complex_line[half - 1].im = 0.0;
            self.c2r
                .process_with_scratch(&mut self.complex_line, out, &mut self.real_scratch)
                .expect("buffer lengths match the plan");
        }
        self.work = work;
    }

    /// Complex transforms along every axis except the last.
    fn full_axes(&mut self, data: &mut [Complex64], forward: bool) {
        let g = self.grid;
        let n = g.size();
        let half = g.half();
        let plan = if forward { &self.forward } else { &self.backward };
        match g.d() {
            2 => {
                for j in 0..half {
                    for i in 0..n {
                        self.column[i] = data[i * half + j];
                    }
                    plan.process_with_scratch(&mut self.column, &mut self.column_scratch);
                    for i in 0..n {
                        data[i * half + j] = self.column[i];
                    }
                }
            }
            3 => {
                let plane = n * half;
                // axis 1: stride `half` inside each plane
                for i0 in 0..n {
                    for j in 0..half {
                        let base = i0 * plane + j;
                        for i in 0..n {
                            self.column[i] = data[base + i * half];
                        }
                        plan.process_with_scratch(&mut self.column, &mut self.column_scratch);
                        for i in 0..n {
                            data[base + i * half] = self.column[i];
                        }
                    }
                }
                // axis 0: stride `plane`
                for off in 0..plane {
                    for i in 0..n {
                        self.column[i] = data[off + i * plane];
                    }
                    plan.process_with_scratch(&mut self.column, &mut self.column_scratch);
                    for i in 0..n {
                        data[off + i * plane] = self.column[i];
                    }
                }
            }
            _ => unreachable!("grids are two- or three-dimensional"),
        }
    }
}

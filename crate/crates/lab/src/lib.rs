//! Pseudo-spectral Galerkin solver and verification tools for activated
//! Euler fluids in a periodic box.

pub mod basis;
pub mod certify;
pub mod diagnostics;
pub mod fft;
pub mod grid;
pub mod io;
pub mod presets;
pub mod solver;
pub mod spectral;
pub mod verify;

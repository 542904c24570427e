//! Symmetric tensors in two and three dimensions.

use core::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

/// Spatial dimension of a tensor or of a periodic box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Dim {
    Two,
    Three,
}

impl Dim {
    pub fn from_usize(d: usize) -> Option<Self> {
        match d {
            2 => Some(Dim::Two),
            3 => Some(Dim::Three),
            _ => None,
        }
    }

    #[inline]
    pub fn get(self) -> usize {
        match self {
            Dim::Two => 2,
            Dim::Three => 3,
        }
    }

    /// Number of independent entries of a symmetric tensor, `d(d+1)/2`.
    #[inline]
    pub fn sym_len(self) -> usize {
        match self {
            Dim::Two => 3,
            Dim::Three => 6,
        }
    }

    /// Storage slot of the `(i, j)` entry. Diagonal entries come first,
    /// followed by the strict upper triangle in row-major order:
    /// `[xx, yy, xy]` in 2D and `[xx, yy, zz, xy, xz, yz]` in 3D.
    #[inline]
    pub fn slot(self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        if i == j {
            return i;
        }
        match (self, i, j) {
            (Dim::Two, 0, 1) => 2,
            (Dim::Three, 0, 1) => 3,
            (Dim::Three, 0, 2) => 4,
            (Dim::Three, 1, 2) => 5,
            _ => panic!("index ({i}, {j}) out of range for {self:?}"),
        }
    }

    /// Row/column pair stored in `slot`.
    #[inline]
    pub fn pair(self, slot: usize) -> (usize, usize) {
        match (self, slot) {
            (_, 0) => (0, 0),
            (_, 1) => (1, 1),
            (Dim::Two, 2) => (0, 1),
            (Dim::Three, 2) => (2, 2),
            (Dim::Three, 3) => (0, 1),
            (Dim::Three, 4) => (0, 2),
            (Dim::Three, 5) => (1, 2),
            _ => panic!("slot {slot} out of range for {self:?}"),
        }
    }

    /// Weight of `slot` in the Frobenius inner product: 1 on the diagonal,
    /// 2 off it (each off-diagonal entry appears twice in the full matrix).
    #[inline]
    pub fn slot_weight(self, slot: usize) -> f64 {
        if slot < self.get() {
            1.0
        } else {
            2.0
        }
    }
}

/// A symmetric `d x d` tensor. Only the upper triangle is stored, so
/// `D = D^T` holds by construction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymTensor {
    dim: Dim,
    e: [f64; 6],
}

impl SymTensor {
    pub fn zero(dim: Dim) -> Self {
        Self { dim, e: [0.0; 6] }
    }

    pub fn identity(dim: Dim) -> Self {
        let mut t = Self::zero(dim);
        for i in 0..dim.get() {
            t.e[i] = 1.0;
        }
        t
    }

    /// Builds a tensor from its stored entries (see [`Dim::slot`] for the
    /// ordering). Panics if `entries.len() != d(d+1)/2`.
    pub fn from_slots(dim: Dim, entries: &[f64]) -> Self {
        assert_eq!(entries.len(), dim.sym_len(), "wrong number of entries");
        let mut t = Self::zero(dim);
        t.e[..entries.len()].copy_from_slice(entries);
        t
    }

    /// Symmetric part `(A + A^T)/2` of a full matrix given row by row.
    pub fn sym_part(dim: Dim, a: &[[f64; 3]; 3]) -> Self {
        let mut t = Self::zero(dim);
        for s in 0..dim.sym_len() {
            let (i, j) = dim.pair(s);
            t.e[s] = 0.5 * (a[i][j] + a[j][i]);
        }
        t
    }

    #[inline]
    pub fn dim(&self) -> Dim {
        self.dim
    }

    #[inline]
    pub fn slots(&self) -> &[f64] {
        &self.e[..self.dim.sym_len()]
    }

    #[inline]
    pub fn slots_mut(&mut self) -> &mut [f64] {
        let n = self.dim.sym_len();
        &mut self.e[..n]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.e[self.dim.slot(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let s = self.dim.slot(i, j);
        self.e[s] = value;
    }

    /// Full matrix (row-major, padded with zeros to 3x3 in 2D).
    pub fn to_full(&self) -> [[f64; 3]; 3] {
        let mut a = [[0.0; 3]; 3];
        let d = self.dim.get();
        for (i, row) in a.iter_mut().enumerate().take(d) {
            for (j, x) in row.iter_mut().enumerate().take(d) {
                *x = self.get(i, j);
            }
        }
        a
    }

    /// Frobenius inner product `A . B = sum_ij A_ij B_ij`.
    #[inline]
    pub fn dot(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        let d = self.dim.get();
        let mut diag = 0.0;
        let mut off = 0.0;
        for s in 0..d {
            diag += self.e[s] * other.e[s];
        }
        for s in d..self.dim.sym_len() {
            off += self.e[s] * other.e[s];
        }
        diag + 2.0 * off
    }

    #[inline]
    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    /// Frobenius norm `|D| = (sum_ij D_ij^2)^(1/2)`.
    #[inline]
    pub fn norm(&self) -> f64 {
        libm::sqrt(self.norm_sq())
    }

    pub fn trace(&self) -> f64 {
        self.e[..self.dim.get()].iter().sum()
    }

    #[inline]
    pub fn scale(&self, c: f64) -> Self {
        let mut t = *self;
        for x in t.slots_mut() {
            *x *= c;
        }
        t
    }

    /// `self + c * other`.
    #[inline]
    pub fn add_scaled(&self, c: f64, other: &Self) -> Self {
        debug_assert_eq!(self.dim, other.dim);
        let mut t = *self;
        for s in 0..self.dim.sym_len() {
            t.e[s] += c * other.e[s];
        }
        t
    }

    /// `R D R^T` for a matrix `R` given row by row (upper-left `d x d`
    /// block is used).
    pub fn conjugate(&self, r: &[[f64; 3]; 3]) -> Self {
        let d = self.dim.get();
        let a = self.to_full();
        let mut ra = [[0.0; 3]; 3];
        for i in 0..d {
            for j in 0..d {
                ra[i][j] = (0..d).map(|k| r[i][k] * a[k][j]).sum();
            }
        }
        let mut out = [[0.0; 3]; 3];
        for i in 0..d {
            for j in 0..d {
                out[i][j] = (0..d).map(|k| ra[i][k] * r[j][k]).sum();
            }
        }
        Self::sym_part(self.dim, &out)
    }

    pub fn is_finite(&self) -> bool {
        self.slots().iter().all(|x| x.is_finite())
    }
}

impl Add for SymTensor {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        self.add_scaled(1.0, &rhs)
    }
}

impl Sub for SymTensor {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self.add_scaled(-1.0, &rhs)
    }
}

impl AddAssign for SymTensor {
    fn add_assign(&mut self, rhs: Self) {
        *self = self.add_scaled(1.0, &rhs);
    }
}

impl SubAssign for SymTensor {
    fn sub_assign(&mut self, rhs: Self) {
        *self = self.add_scaled(-1.0, &rhs);
    }
}

impl Mul<f64> for SymTensor {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        self.scale(rhs)
    }
}

impl Mul<SymTensor> for f64 {
    type Output = SymTensor;
    fn mul(self, rhs: SymTensor) -> SymTensor {
        rhs.scale(self)
    }
}

impl Neg for SymTensor {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-1.0)
    }
}

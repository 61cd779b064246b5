//! Dense complex matrices sized for the 12-level composite space and its
//! 144-dimensional Liouville space.
//!
//! Vectorization stacks columns: `vec(rho)[j * n + i] = rho[(i, j)]`. With that
//! convention `vec(A rho) = (I ⊗ A) vec(rho)` and `vec(rho B) = (Bᵀ ⊗ I) vec(rho)`.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Asymmetry above which [`herm_eig`] refuses its input.
pub const HERMITIAN_REJECT: f64 = 1e-6;
/// Eigenvalues in `(-NEGATIVE_REJECT, 0)` are clamped to zero by [`psd_sqrt`].
pub const NEGATIVE_REJECT: f64 = 1e-6;
/// Eigenvalues above `-CLAMP_FLOOR` are treated as round-off.
pub const CLAMP_FLOOR: f64 = 1e-10;

/// Row-major dense complex matrix.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix { rows, cols, data: vec![C64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    /// Builds a matrix from row-major entries.
    ///
    /// *Panics* if `data.len() != rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Self {
        assert_eq!(data.len(), rows * cols, "entry count does not match shape");
        CMatrix { rows, cols, data }
    }

    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Self {
        Self::from_vec(rows, cols, data.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        CMatrix { rows, cols, data }
    }

    pub fn diag(values: &[C64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn diag_real(values: &[f64]) -> Self {
        let v: Vec<C64> = values.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::diag(&v)
    }

    /// Column vector from entries.
    pub fn column(entries: &[C64]) -> Self {
        Self::from_vec(entries.len(), 1, entries.to_vec())
    }

    /// `|u⟩⟨v|` for column vectors given as slices.
    pub fn outer(u: &[C64], v: &[C64]) -> Self {
        Self::from_fn(u.len(), v.len(), |i, j| u[i] * v[j].conj())
    }

    /// `|i⟩⟨j|` in an `n`-dimensional space.
    pub fn unit(n: usize, i: usize, j: usize) -> Self {
        let mut m = Self::zeros(n, n);
        m[(i, j)] = C64::new(1.0, 0.0);
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        CMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        CMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&z| z * s).collect() }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn matmul(&self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, rhs.rows, "inner dimensions differ");
        let mut out = CMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                let dst = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (d, &b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        out
    }

    /// `self · v` for a plain slice vector.
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| self.data[i * self.cols..(i + 1) * self.cols].iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `AB − BA`.
    pub fn commutator(&self, rhs: &CMatrix) -> CMatrix {
        &self.matmul(rhs) - &rhs.matmul(self)
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `max |self − other|` entrywise.
    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// `max |M − M†|` entrywise.
    pub fn hermiticity_error(&self) -> f64 {
        assert!(self.is_square());
        let n = self.rows;
        let mut err: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                err = err.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        err
    }

    /// `(M + M†)/2`.
    pub fn hermitian_part(&self) -> CMatrix {
        assert!(self.is_square());
        Self::from_fn(self.rows, self.cols, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:+.4e}{:+.4e}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

macro_rules! elementwise {
    ($tr:ident, $method:ident, $op:tt) => {
        impl $tr<&CMatrix> for &CMatrix {
            type Output = CMatrix;
            fn $method(self, rhs: &CMatrix) -> CMatrix {
                assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch");
                CMatrix {
                    rows: self.rows,
                    cols: self.cols,
                    data: self.data.iter().zip(&rhs.data).map(|(a, b)| a $op b).collect(),
                }
            }
        }
        impl $tr<CMatrix> for CMatrix {
            type Output = CMatrix;
            fn $method(self, rhs: CMatrix) -> CMatrix {
                (&self).$method(&rhs)
            }
        }
    };
}

elementwise!(Add, add, +);
elementwise!(Sub, sub, -);

impl Mul<&CMatrix> for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.matmul(rhs)
    }
}

impl Mul<CMatrix> for CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: CMatrix) -> CMatrix {
        self.matmul(&rhs)
    }
}

impl Neg for &CMatrix {
    type Output = CMatrix;
    fn neg(self) -> CMatrix {
        self.scale_real(-1.0)
    }
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (rb, cb) = (b.rows, b.cols);
    let mut out = CMatrix::zeros(a.rows * rb, a.cols * cb);
    for i in 0..a.rows {
        for j in 0..a.cols {
            let aij = a[(i, j)];
            if aij.re == 0.0 && aij.im == 0.0 {
                continue;
            }
            for k in 0..rb {
                for l in 0..cb {
                    out[(i * rb + k, j * cb + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Eigenvalues in descending order with matching orthonormal eigenvector columns.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl EigenDecomposition {
    /// `V diag(f(λ)) V†`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.values.len();
        let v = &self.vectors;
        let w: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        CMatrix::from_fn(n, n, |i, j| (0..n).map(|k| v[(i, k)] * w[k] * v[(j, k)].conj()).sum())
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.reconstruct_with(|l| l)
    }
}

/// Hermitian eigendecomposition by cyclic complex Jacobi rotations.
pub fn herm_eig(m: &CMatrix) -> Result<EigenDecomposition> {
    if !m.is_square() {
        return Err(Error::ShapeMismatch { expected: (m.rows, m.rows), found: (m.rows, m.cols) });
    }
    let asym = m.hermiticity_error();
    if asym > HERMITIAN_REJECT * m.max_abs().max(1.0) {
        return Err(Error::NonHermitianInput { asymmetry: asym });
    }
    let n = m.rows;
    let mut a = m.hermitian_part();
    let mut v = CMatrix::identity(n);
    let scale = a.max_abs();
    if scale == 0.0 {
        return Ok(EigenDecomposition { values: vec![0.0; n], vectors: v });
    }

    for _sweep in 0..64 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].norm_sqr())
            .sum();
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let g = apq.norm();
                if g <= 1e-300 || g <= 1e-18 * scale {
                    continue;
                }
                let phase = apq / g;
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let theta = (aqq - app) / (2.0 * g);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // J = [[c, s e^{iφ}], [-s e^{-iφ}, c]] on the (p, q) plane.
                let jpq = phase * s;
                let jqp = -phase.conj() * s;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * c + akq * jqp;
                    a[(k, q)] = akp * jpq + akq * c;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = apk * c + aqk * jqp.conj();
                    a[(q, k)] = apk * jpq.conj() + aqk * c;
                }
                a[(p, q)] = C64::new(0.0, 0.0);
                a[(q, p)] = C64::new(0.0, 0.0);
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * c + vkq * jqp;
                    v[(k, q)] = vkp * jpq + vkq * c;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].re.total_cmp(&a[(i, i)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors = CMatrix::from_fn(n, n, |i, k| v[(i, order[k])]);
    Ok(EigenDecomposition { values, vectors })
}

/// Principal square root of a Hermitian positive-semidefinite matrix.
///
/// Eigenvalues in `(-1e-6, 0)` are clamped to zero; anything lower is rejected.
pub fn psd_sqrt(m: &CMatrix) -> Result<CMatrix> {
    let eig = herm_eig(m)?;
    let min = eig.values.last().copied().unwrap_or(0.0);
    if min < -NEGATIVE_REJECT {
        return Err(Error::NegativeSpectrum { eigenvalue: min });
    }
    Ok(eig.reconstruct_with(|l| l.max(0.0).sqrt()))
}

/// Column-stacked vectorization.
pub fn vec(m: &CMatrix) -> Vec<C64> {
    let mut out = Vec::with_capacity(m.rows * m.cols);
    for j in 0..m.cols {
        for i in 0..m.rows {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Inverse of [`vec`] for an `n × n` operator.
pub fn unvec(v: &[C64], n: usize) -> CMatrix {
    assert_eq!(v.len(), n * n, "vector length is not n²");
    CMatrix::from_fn(n, n, |i, j| v[j * n + i])
}

/// Superoperator `ρ ↦ Aρ` acting on column-stacked vectors.
pub fn superop_left(a: &CMatrix) -> CMatrix {
    assert!(a.is_square());
    kron(&CMatrix::identity(a.rows), a)
}

/// Superoperator `ρ ↦ ρA` acting on column-stacked vectors.
pub fn superop_right(a: &CMatrix) -> CMatrix {
    assert!(a.is_square());
    kron(&a.transpose(), &CMatrix::identity(a.rows))
}

/// Superoperator `ρ ↦ AρB`.
pub fn superop_sandwich(a: &CMatrix, b: &CMatrix) -> CMatrix {
    kron(&b.transpose(), a)
}

//! Dense complex matrices.
//!
//! [`CMatrix`] is an immutable value type over `nalgebra::DMatrix<Complex64>`.
//! Every operation returns fresh data, so matrices can be shared freely
//! between threads.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `sigma_min <= SINGULAR_RATIO * sigma_max` declares a matrix singular.
pub const SINGULAR_RATIO: f64 = 1e-12;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CMatrixJson", into = "CMatrixJson")]
pub struct CMatrix(DMatrix<Complex64>);

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CMatrixJson {
    rows: usize,
    cols: usize,
    data: Vec<[f64; 2]>,
}

impl TryFrom<CMatrixJson> for CMatrix {
    type Error = Error;

    fn try_from(j: CMatrixJson) -> Result<Self> {
        let data = j.data.iter().map(|&[re, im]| Complex64::new(re, im)).collect();
        CMatrix::new(j.rows, j.cols, data)
    }
}

impl From<CMatrix> for CMatrixJson {
    fn from(m: CMatrix) -> Self {
        let mut data = Vec::with_capacity(m.rows() * m.cols());
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                let z = m.0[(i, j)];
                data.push([z.re, z.im]);
            }
        }
        CMatrixJson { rows: m.rows(), cols: m.cols(), data }
    }
}

/// Result of [`CMatrix::inv`]: the inverse plus a 2-norm condition number.
#[derive(Debug, Clone)]
pub struct Inverse {
    pub matrix: CMatrix,
    pub cond: f64,
}

impl CMatrix {
    /// Builds a matrix from row-major entries, rejecting NaN/Inf.
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows.checked_mul(cols) != Some(data.len()) {
            return Err(Error::ShapeMismatch(format!("{} entries for a {rows}x{cols} matrix", data.len())));
        }
        if let Some(k) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite { row: k / cols.max(1), col: k % cols.max(1) });
        }
        Ok(CMatrix(DMatrix::from_row_slice(rows, cols, &data)))
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> Complex64) -> Self {
        CMatrix(DMatrix::from_fn(rows, cols, f))
    }

    /// Real row-major literal, mostly for tests and examples.
    pub fn from_real(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        Self::from_fn(r, c, |i, j| Complex64::new(rows[i][j], 0.0))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        CMatrix(DMatrix::identity(n, n))
    }

    pub fn scalar(z: Complex64) -> Self {
        CMatrix(DMatrix::from_element(1, 1, z))
    }

    pub fn diag(entries: &[Complex64]) -> Self {
        let n = entries.len();
        Self::from_fn(n, n, |i, j| if i == j { entries[i] } else { ZERO })
    }

    pub fn from_dmatrix(m: DMatrix<Complex64>) -> Self {
        CMatrix(m)
    }

    pub fn as_dmatrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn into_dmatrix(self) -> DMatrix<Complex64> {
        self.0
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.0[(i, j)]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Singular values in descending order.
    pub fn singular_values(&self) -> Vec<f64> {
        if self.rows() == 0 || self.cols() == 0 {
            return Vec::new();
        }
        let mut s: Vec<f64> = self.0.clone().svd(false, false).singular_values.iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }

    /// Operator (spectral) norm, the largest singular value.
    pub fn op_norm(&self) -> f64 {
        self.singular_values().first().copied().unwrap_or(0.0)
    }

    /// Ratio sigma_min / sigma_max; 0 for the zero matrix.
    pub fn inverse_condition(&self) -> f64 {
        let s = self.singular_values();
        match (s.first(), s.last()) {
            (Some(&hi), Some(&lo)) if hi > 0.0 => lo / hi,
            _ => 0.0,
        }
    }

    pub fn inv(&self) -> Result<Inverse> {
        if !self.is_square() {
            return Err(Error::ShapeMismatch(format!("inverse of a {}x{} matrix", self.rows(), self.cols())));
        }
        if self.rows() == 0 {
            return Ok(Inverse { matrix: self.clone(), cond: 1.0 });
        }
        let ratio = self.inverse_condition();
        if ratio <= SINGULAR_RATIO {
            return Err(Error::SingularMatrix { ratio });
        }
        let matrix = self.0.clone().lu().try_inverse().ok_or(Error::SingularMatrix { ratio })?;
        Ok(Inverse { matrix: CMatrix(matrix), cond: 1.0 / ratio })
    }

    /// Solves `self * X = rhs` for square `self`.
    pub fn solve(&self, rhs: &CMatrix) -> Result<CMatrix> {
        Ok(&self.inv()?.matrix * rhs)
    }

    pub fn adjoint(&self) -> CMatrix {
        CMatrix(self.0.adjoint())
    }

    pub fn transpose(&self) -> CMatrix {
        CMatrix(self.0.transpose())
    }

    pub fn scale(&self, z: Complex64) -> CMatrix {
        CMatrix(&self.0 * z)
    }

    pub fn scale_re(&self, r: f64) -> CMatrix {
        self.scale(Complex64::new(r, 0.0))
    }

    /// Entrywise complex conjugate (not an nc operation; used as a counterexample).
    pub fn conj(&self) -> CMatrix {
        CMatrix(self.0.map(|z| z.conj()))
    }

    pub fn trace(&self) -> Complex64 {
        self.0.trace()
    }

    /// Block-diagonal `self ⊕ other`.
    pub fn direct_sum(&self, other: &CMatrix) -> CMatrix {
        let (r1, c1) = self.shape();
        let (r2, c2) = other.shape();
        let mut out = DMatrix::zeros(r1 + r2, c1 + c2);
        out.view_mut((0, 0), (r1, c1)).copy_from(&self.0);
        out.view_mut((r1, c1), (r2, c2)).copy_from(&other.0);
        CMatrix(out)
    }

    pub fn direct_sum_all<'a>(items: impl IntoIterator<Item = &'a CMatrix>) -> CMatrix {
        items.into_iter().fold(CMatrix::zeros(0, 0), |acc, m| acc.direct_sum(m))
    }

    /// Kronecker product `self ⊗ other`; `self` indexes the outer blocks.
    pub fn kron(&self, other: &CMatrix) -> CMatrix {
        CMatrix(self.0.kronecker(&other.0))
    }

    /// `I_n ⊗ m`, the block diagonal with `n` copies of `m`.
    pub fn kron_left_identity(n: usize, m: &CMatrix) -> CMatrix {
        let (r, c) = m.shape();
        let mut out = DMatrix::zeros(n * r, n * c);
        for k in 0..n {
            out.view_mut((k * r, k * c), (r, c)).copy_from(&m.0);
        }
        CMatrix(out)
    }

    /// `m ⊗ I_n`.
    pub fn kron_right_identity(m: &CMatrix, n: usize) -> CMatrix {
        m.kron(&CMatrix::identity(n))
    }

    pub fn submatrix(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> CMatrix {
        CMatrix(self.0.view((r0, c0), (nr, nc)).into_owned())
    }

    pub fn columns(&self, c0: usize, nc: usize) -> CMatrix {
        self.submatrix(0, c0, self.rows(), nc)
    }

    pub fn row_range(&self, r0: usize, nr: usize) -> CMatrix {
        self.submatrix(r0, 0, nr, self.cols())
    }

    /// Assembles a matrix from a rectangular grid of blocks.
    pub fn from_blocks(blocks: &[Vec<CMatrix>]) -> Result<CMatrix> {
        if blocks.is_empty() {
            return Ok(CMatrix::zeros(0, 0));
        }
        let ncols = blocks[0].len();
        let heights: Vec<usize> = blocks.iter().map(|row| row.first().map_or(0, |b| b.rows())).collect();
        let widths: Vec<usize> = blocks[0].iter().map(|b| b.cols()).collect();
        for (bi, row) in blocks.iter().enumerate() {
            if row.len() != ncols {
                return Err(Error::ShapeMismatch("ragged block grid".into()));
            }
            for (bj, b) in row.iter().enumerate() {
                if b.rows() != heights[bi] || b.cols() != widths[bj] {
                    return Err(Error::ShapeMismatch(format!("block ({bi},{bj}) has shape {:?}", b.shape())));
                }
            }
        }
        let mut out = DMatrix::zeros(heights.iter().sum(), widths.iter().sum());
        let mut r0 = 0;
        for (bi, row) in blocks.iter().enumerate() {
            let mut c0 = 0;
            for (bj, b) in row.iter().enumerate() {
                out.view_mut((r0, c0), (heights[bi], widths[bj])).copy_from(&b.0);
                c0 += widths[bj];
            }
            r0 += heights[bi];
        }
        Ok(CMatrix(out))
    }

    pub fn vstack(parts: &[&CMatrix]) -> Result<CMatrix> {
        let grid: Vec<Vec<CMatrix>> = parts.iter().map(|m| vec![(*m).clone()]).collect();
        CMatrix::from_blocks(&grid)
    }

    pub fn hstack(parts: &[&CMatrix]) -> Result<CMatrix> {
        CMatrix::from_blocks(&[parts.iter().map(|m| (*m).clone()).collect()])
    }

    /// `‖m*m − I‖`: zero exactly when the columns are orthonormal.
    pub fn isometry_defect(&self) -> f64 {
        let g = &self.adjoint() * self;
        (&g - &CMatrix::identity(self.cols())).op_norm()
    }

    /// Extends a matrix with orthonormal columns to `target_cols` orthonormal
    /// columns. New columns come from Gram-Schmidt on the standard basis,
    /// taken in index order.
    pub fn complete_to_isometry(partial: &CMatrix, target_cols: usize) -> Result<CMatrix> {
        let n = partial.rows();
        if target_cols > n {
            return Err(Error::DimensionTooSmall { rows: n, cols: target_cols });
        }
        if partial.cols() > target_cols {
            return Err(Error::ShapeMismatch(format!(
                "partial map already has {} columns, target is {target_cols}",
                partial.cols()
            )));
        }
        if partial.cols() > 0 && partial.isometry_defect() > 1e-8 {
            return Err(Error::ShapeMismatch("partial map is not isometric".into()));
        }
        let mut basis: Vec<nalgebra::DVector<Complex64>> =
            (0..partial.cols()).map(|j| partial.0.column(j).into_owned()).collect();
        for i in 0..n {
            if basis.len() == target_cols {
                break;
            }
            let mut v = nalgebra::DVector::zeros(n);
            v[i] = ONE;
            // two passes keep the result orthogonal to working precision
            for _ in 0..2 {
                for b in &basis {
                    let c = b.dotc(&v);
                    v -= b * c;
                }
            }
            let norm = v.norm();
            if norm > 1e-6 {
                basis.push(v / Complex64::new(norm, 0.0));
            }
        }
        if basis.len() < target_cols {
            return Err(Error::Internal("standard basis failed to span the complement".into()));
        }
        Ok(CMatrix(DMatrix::from_columns(&basis)))
    }

    /// Closest matrix with orthonormal columns (polar factor). Requires full column rank.
    pub fn orthonormalize(&self) -> CMatrix {
        if self.cols() == 0 || self.rows() == 0 {
            return self.clone();
        }
        let svd = self.0.clone().svd(true, true);
        let u = svd.u.expect("requested U");
        let v_t = svd.v_t.expect("requested V^T");
        CMatrix(u * v_t)
    }

    /// Thin SVD `self = U diag(s) V*` with `s` descending; `U` is
    /// `rows×k`, `V` is `cols×k`, `k = min(rows, cols)`.
    pub fn thin_svd(&self) -> (CMatrix, Vec<f64>, CMatrix) {
        let k = self.rows().min(self.cols());
        if k == 0 {
            return (CMatrix::zeros(self.rows(), 0), Vec::new(), CMatrix::zeros(self.cols(), 0));
        }
        let svd = self.0.clone().svd(true, true);
        let u = svd.u.expect("requested U");
        let v = svd.v_t.expect("requested V^T").adjoint();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let u_sorted = DMatrix::from_columns(&order.iter().map(|&i| u.column(i)).collect::<Vec<_>>());
        let v_sorted = DMatrix::from_columns(&order.iter().map(|&i| v.column(i)).collect::<Vec<_>>());
        let s = order.iter().map(|&i| svd.singular_values[i]).collect();
        (CMatrix(u_sorted), s, CMatrix(v_sorted))
    }

    /// Smallest eigenvalue of the Hermitian part `(m + m*)/2`.
    pub fn hermitian_min_eigenvalue(&self) -> f64 {
        if self.rows() == 0 {
            return f64::INFINITY;
        }
        let h = (&self.0 + self.0.adjoint()) * Complex64::new(0.5, 0.0);
        h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Eigenvalues via a complex Schur form.
    pub fn eigenvalues(&self) -> Result<Vec<Complex64>> {
        if !self.is_square() {
            return Err(Error::ShapeMismatch("eigenvalues of a non-square matrix".into()));
        }
        if self.rows() == 0 {
            return Ok(Vec::new());
        }
        let schur = Schur::try_new(self.0.clone(), 1e-14, 10_000)
            .ok_or_else(|| Error::RootFindingFailure("Schur iteration did not converge".into()))?;
        let (_, t) = schur.unpack();
        Ok((0..t.nrows()).map(|i| t[(i, i)]).collect())
    }

    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        assert_eq!(self.shape(), other.shape(), "max_abs_diff shape mismatch");
        self.0.iter().zip(other.0.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    /// Right-multiplies by the permutation that reorders a `C^p ⊗ C^q`
    /// index `(a, b)` (row-major `a*q + b`) into `(b, a)`.
    pub fn commutation(p: usize, q: usize) -> CMatrix {
        let n = p * q;
        let mut out = DMatrix::zeros(n, n);
        for a in 0..p {
            for b in 0..q {
                out[(b * p + a, a * q + b)] = ONE;
            }
        }
        CMatrix(out)
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CMatrix {}x{} [", self.rows(), self.cols())?;
        for i in 0..self.rows() {
            if i > 0 {
                write!(f, "; ")?;
            }
            for j in 0..self.cols() {
                if j > 0 {
                    write!(f, ", ")?;
                }
                let z = self.0[(i, j)];
                write!(f, "{:.6}{:+.6}i", z.re, z.im)?;
            }
        }
        write!(f, "]")
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl $trait<&CMatrix> for &CMatrix {
            type Output = CMatrix;
            fn $method(self, rhs: &CMatrix) -> CMatrix {
                CMatrix(&self.0 $op &rhs.0)
            }
        }
        impl $trait<CMatrix> for CMatrix {
            type Output = CMatrix;
            fn $method(self, rhs: CMatrix) -> CMatrix {
                CMatrix(self.0 $op rhs.0)
            }
        }
    };
}

binop!(Add, add, +);
binop!(Sub, sub, -);
binop!(Mul, mul, *);

impl Neg for &CMatrix {
    type Output = CMatrix;
    fn neg(self) -> CMatrix {
        CMatrix(-&self.0)
    }
}

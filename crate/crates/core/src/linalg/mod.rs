//! Dense matrix and vector kernels.
//!
//! Storage is row-major: `data[i * cols + j]` holds entry `(i, j)`. Vectors
//! are plain `Vec<f64>` / `&[f64]`.

mod norms;
mod qr;

pub use norms::{
    abs_pow, dual_exponent, dual_norm, lp_norm, mat_entrywise_p_norm, row_mass, scaled_masses, vec_p_norm,
};
pub use qr::{numeric_rank, qr_thin, QrFactors, DEFAULT_RANK_TOL};

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// A real vector.
pub type DenseVector = Vec<f64>;

/// Dense real matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Builds a matrix from row-major data, rejecting non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "expected {} entries for {rows}x{cols}, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            let c = cols.max(1);
            return Err(Error::NonFinite {
                row: k / c,
                col: k % c,
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch(format!(
                "row {i} has {} entries, expected {cols}",
                rows[i].len()
            )));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    /// An `n x 1` matrix holding `v`.
    pub fn column(v: &[f64]) -> Result<Self> {
        Self::new(v.len(), 1, v.to_vec())
    }

    /// Builds a matrix from column vectors of equal length.
    pub fn from_columns(cols: &[Vec<f64>]) -> Result<Self> {
        let rows = cols.first().map_or(0, Vec::len);
        if cols.iter().any(|c| c.len() != rows) {
            return Err(Error::DimensionMismatch("ragged columns".into()));
        }
        let mut m = Self::zeros(rows, cols.len());
        for (j, c) in cols.iter().enumerate() {
            for (i, &v) in c.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        if let Some(k) = m.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: k / cols.len(),
                col: k % cols.len(),
            });
        }
        Ok(m)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> DenseVector {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_col(&mut self, j: usize, v: &[f64]) {
        for (i, &x) in v.iter().enumerate() {
            self[(i, j)] = x;
        }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// Largest absolute entry (0 for an empty matrix).
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a = self.row(i);
            let o = out.row_mut(i);
            for (k, &aik) in a.iter().enumerate() {
                if aik == 0.0 {
                    continue;
                }
                for (oj, &bkj) in o.iter_mut().zip(other.row(k)) {
                    *oj += aik * bkj;
                }
            }
        }
        Ok(out)
    }

    /// `self * x`.
    pub fn mul_vec(&self, x: &[f64]) -> Result<DenseVector> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} against {} columns",
                x.len(),
                self.cols
            )));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `self^T * y`.
    pub fn tr_mul_vec(&self, y: &[f64]) -> Result<DenseVector> {
        if y.len() != self.rows {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} against {} rows",
                y.len(),
                self.rows
            )));
        }
        let mut out = vec![0.0; self.cols];
        for (i, &yi) in y.iter().enumerate() {
            if yi == 0.0 {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a * yi;
            }
        }
        Ok(out)
    }

    /// `self * x - b`.
    pub fn residual(&self, x: &[f64], b: &[f64]) -> Result<DenseVector> {
        if b.len() != self.rows {
            return Err(Error::DimensionMismatch(format!(
                "rhs of length {} against {} rows",
                b.len(),
                self.rows
            )));
        }
        let mut r = self.mul_vec(x)?;
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri -= bi;
        }
        Ok(r)
    }

    pub fn scale(&self, c: f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.shape() != other.shape() {
            return Err(Error::DimensionMismatch("shape mismatch in subtraction".into()));
        }
        Ok(DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    /// Multiplies row `i` by `s[i]`.
    pub fn scale_rows(&self, s: &[f64]) -> Result<DenseMatrix> {
        if s.len() != self.rows {
            return Err(Error::DimensionMismatch("row scale length".into()));
        }
        let mut out = self.clone();
        for (i, &si) in s.iter().enumerate() {
            out.row_mut(i).iter_mut().for_each(|v| *v *= si);
        }
        Ok(out)
    }

    /// Extracts the listed rows, each multiplied by the matching scale.
    pub fn select_rows_scaled(&self, idx: &[usize], scales: &[f64]) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(idx.len(), self.cols);
        for (k, (&i, &s)) in idx.iter().zip(scales).enumerate() {
            for (o, &a) in out.row_mut(k).iter_mut().zip(self.row(i)) {
                *o = a * s;
            }
        }
        out
    }

    /// `[self other]`.
    pub fn hstack(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != other.rows {
            return Err(Error::DimensionMismatch("hstack row counts differ".into()));
        }
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            data.extend_from_slice(self.row(i));
            data.extend_from_slice(other.row(i));
        }
        Ok(DenseMatrix {
            rows: self.rows,
            cols,
            data,
        })
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Solves `R x = y` for upper-triangular square `R`.
pub fn solve_upper(r: &DenseMatrix, y: &[f64]) -> Result<DenseVector> {
    let n = r.rows();
    if r.cols() < n || y.len() != n {
        return Err(Error::DimensionMismatch("triangular solve".into()));
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for j in i + 1..n {
            s -= r[(i, j)] * x[j];
        }
        let d = r[(i, i)];
        if d == 0.0 {
            return Err(Error::Singular(format!("zero pivot at {i}")));
        }
        x[i] = s / d;
    }
    Ok(x)
}

/// Inverse of a square upper-triangular matrix.
pub fn invert_upper(r: &DenseMatrix) -> Result<DenseMatrix> {
    let n = r.rows();
    if r.cols() != n {
        return Err(Error::DimensionMismatch("inverse of non-square matrix".into()));
    }
    let mut inv = DenseMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[j] = 1.0;
        let c = solve_upper(r, &e)?;
        inv.set_col(j, &c);
    }
    Ok(inv)
}

/// Upper-triangular `G` with `G^T G = F` for symmetric positive definite `F`.
pub fn cholesky_upper(f: &DenseMatrix) -> Result<DenseMatrix> {
    let n = f.rows();
    if f.cols() != n {
        return Err(Error::DimensionMismatch("cholesky of non-square matrix".into()));
    }
    let mut g = DenseMatrix::zeros(n, n);
    for i in 0..n {
        let mut d = f[(i, i)];
        for k in 0..i {
            d -= g[(k, i)] * g[(k, i)];
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(Error::Singular("matrix is not positive definite".into()));
        }
        let gii = d.sqrt();
        g[(i, i)] = gii;
        for j in i + 1..n {
            let mut s = f[(i, j)];
            for k in 0..i {
                s -= g[(k, i)] * g[(k, j)];
            }
            g[(i, j)] = s / gii;
        }
    }
    Ok(g)
}

/// Inverse of a small square matrix by Gauss-Jordan elimination with
/// partial pivoting.
pub fn invert(a: &DenseMatrix) -> Result<DenseMatrix> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::DimensionMismatch("inverse of non-square matrix".into()));
    }
    let mut m = a.clone();
    let mut inv = DenseMatrix::identity(n);
    let scale = a.max_abs();
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| m[(i, c)].abs().total_cmp(&m[(j, c)].abs()))
            .unwrap_or(c);
        if m[(p, c)].abs() <= f64::EPSILON * scale * n as f64 {
            return Err(Error::Singular(format!("pivot {c} vanishes")));
        }
        if p != c {
            for j in 0..n {
                m.data.swap(p * n + j, c * n + j);
                inv.data.swap(p * n + j, c * n + j);
            }
        }
        let d = m[(c, c)];
        for j in 0..n {
            m[(c, j)] /= d;
            inv[(c, j)] /= d;
        }
        for i in 0..n {
            if i == c {
                continue;
            }
            let f = m[(i, c)];
            if f == 0.0 {
                continue;
            }
            for j in 0..n {
                m[(i, j)] -= f * m[(c, j)];
                inv[(i, j)] -= f * inv[(c, j)];
            }
        }
    }
    Ok(inv)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm with scaling against overflow.
pub fn norm2(v: &[f64]) -> f64 {
    let m = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if m == 0.0 {
        return 0.0;
    }
    m * v.iter().map(|x| (x / m) * (x / m)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rejects_non_finite_entries() {
        let err = DenseMatrix::new(1, 2, vec![1.0, f64::NAN]).unwrap_err();
        assert_eq!(err, Error::NonFinite { row: 0, col: 1 });
    }

    #[test]
    fn from_rows_rejects_ragged() {
        assert!(DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
    }

    #[test]
    fn matmul_and_transpose_agree() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        let ata = a.transpose().matmul(&a).unwrap();
        assert_eq!(ata.as_slice(), &[35.0, 44.0, 44.0, 56.0]);
        assert_eq!(a.tr_mul_vec(&[1.0, 1.0, 1.0]).unwrap(), vec![9.0, 12.0]);
    }

    #[test]
    fn cholesky_reconstructs() {
        let f = DenseMatrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 3.0]]).unwrap();
        let g = cholesky_upper(&f).unwrap();
        let back = g.transpose().matmul(&g).unwrap();
        for (a, b) in back.as_slice().iter().zip(f.as_slice()) {
            assert_relative_eq!(a, b, epsilon = 1e-14);
        }
        assert_eq!(g[(1, 0)], 0.0);
    }

    #[test]
    fn gauss_jordan_inverse() {
        let a = DenseMatrix::from_rows(&[vec![0.0, 2.0], vec![1.0, 1.0]]).unwrap();
        let inv = invert(&a).unwrap();
        let id = a.matmul(&inv).unwrap();
        assert_relative_eq!(id[(0, 0)], 1.0, epsilon = 1e-15);
        assert_relative_eq!(id[(0, 1)], 0.0, epsilon = 1e-15);
        assert!(invert(&DenseMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn norm2_survives_huge_entries() {
        assert_relative_eq!(norm2(&[3e300, 4e300]), 5e300, max_relative = 1e-15);
    }
}

//! Householder QR with column pivoting.

use super::{DenseMatrix, DenseVector};
use crate::error::{Error, Result};

/// Relative pivot threshold below which a diagonal entry of `R` counts as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Thin factorization `A P = Q R` truncated to the numeric rank `d`.
#[derive(Debug, Clone)]
pub struct QrFactors {
    /// `n x d`, orthonormal columns.
    pub q: DenseMatrix,
    /// `d x m`, upper trapezoidal in pivoted column order, positive diagonal.
    pub r: DenseMatrix,
    /// `perm[j]` is the original column sitting at pivoted position `j`.
    pub perm: Vec<usize>,
    pub rank: usize,
}

impl QrFactors {
    /// `R P^T`, so that `A = Q * r_unpivoted()`.
    pub fn r_unpivoted(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.r.rows(), self.r.cols());
        for i in 0..self.r.rows() {
            for (j, &pj) in self.perm.iter().enumerate() {
                out[(i, pj)] = self.r[(i, j)];
            }
        }
        out
    }

    /// Basic least-squares solution of `min ||A x - b||_2`: non-pivot
    /// columns get coefficient zero.
    pub fn solve_least_squares(&self, b: &[f64]) -> Result<DenseVector> {
        let d = self.rank;
        let qtb = self.q.tr_mul_vec(b)?;
        let mut y = vec![0.0; d];
        for i in (0..d).rev() {
            let mut s = qtb[i];
            for j in i + 1..d {
                s -= self.r[(i, j)] * y[j];
            }
            y[i] = s / self.r[(i, i)];
        }
        let mut x = vec![0.0; self.perm.len()];
        for (j, yj) in y.into_iter().enumerate() {
            x[self.perm[j]] = yj;
        }
        Ok(x)
    }
}

/// Thin QR of `a` with column pivoting.
///
/// The rank `d` counts diagonal entries with `|R_ii| > rank_tol * |R_00|`;
/// `Q` keeps only its first `d` columns.
pub fn qr_thin(a: &DenseMatrix, rank_tol: f64) -> Result<QrFactors> {
    let (n, m) = a.shape();
    if n == 0 || m == 0 {
        return Err(Error::DimensionMismatch(format!("cannot factor a {n}x{m} matrix")));
    }
    if !(rank_tol > 0.0) {
        return Err(Error::InvalidConfig(format!("rank_tol must be positive, got {rank_tol}")));
    }
    if !a.is_all_finite() {
        return Err(Error::Degenerate("matrix has non-finite entries".into()));
    }
    // Column-major working copy.
    let mut cols: Vec<Vec<f64>> = (0..m).map(|j| a.col(j)).collect();
    let mut perm: Vec<usize> = (0..m).collect();
    let steps = n.min(m);
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(steps);
    let mut diag = Vec::with_capacity(steps);

    for k in 0..steps {
        let (best, _) = (k..m)
            .map(|j| (j, super::norm2(&cols[j][k..])))
            .fold((k, -1.0), |acc, (j, nrm)| if nrm > acc.1 { (j, nrm) } else { acc });
        if best != k {
            cols.swap(k, best);
            perm.swap(k, best);
        }
        let x = &cols[k][k..];
        let norm = super::norm2(x);
        if norm == 0.0 {
            reflectors.push(vec![0.0; n - k]);
            diag.push(0.0);
            continue;
        }
        let alpha = if x[0] >= 0.0 { -norm } else { norm };
        let mut v = x.to_vec();
        v[0] -= alpha;
        let vn = super::norm2(&v);
        if vn > 0.0 {
            v.iter_mut().for_each(|t| *t /= vn);
        }
        for col in cols.iter_mut().skip(k + 1) {
            let tail = &mut col[k..];
            let s = 2.0 * super::dot(&v, tail);
            for (t, vi) in tail.iter_mut().zip(&v) {
                *t -= s * vi;
            }
        }
        cols[k][k] = alpha;
        for t in cols[k][k + 1..].iter_mut() {
            *t = 0.0;
        }
        reflectors.push(v);
        diag.push(alpha);
    }

    let lead = diag.first().map_or(0.0, |v: &f64| v.abs());
    if lead == 0.0 {
        return Err(Error::ZeroRank);
    }
    let rank = diag
        .iter()
        .take_while(|v| v.abs() > rank_tol * lead)
        .count();

    let mut r = DenseMatrix::zeros(rank, m);
    for i in 0..rank {
        for (j, col) in cols.iter().enumerate().skip(i) {
            r[(i, j)] = col[i];
        }
    }

    let mut q = DenseMatrix::zeros(n, rank);
    let mut e = vec![0.0; n];
    for j in 0..rank {
        e.iter_mut().for_each(|t| *t = 0.0);
        e[j] = 1.0;
        for k in (0..rank).rev() {
            let v = &reflectors[k];
            let tail = &mut e[k..];
            let s = 2.0 * super::dot(v, tail);
            for (t, vi) in tail.iter_mut().zip(v) {
                *t -= s * vi;
            }
        }
        q.set_col(j, &e);
    }

    // Positive diagonal convention.
    for i in 0..rank {
        if r[(i, i)] < 0.0 {
            r.row_mut(i).iter_mut().for_each(|t| *t = -*t);
            for row in 0..n {
                q[(row, i)] = -q[(row, i)];
            }
        }
    }

    Ok(QrFactors { q, r, perm, rank })
}

/// Numeric rank via [`qr_thin`]; an all-zero matrix has rank 0.
pub fn numeric_rank(a: &DenseMatrix, rank_tol: f64) -> Result<usize> {
    match qr_thin(a, rank_tol) {
        Ok(f) => Ok(f.rank),
        Err(Error::ZeroRank) => Ok(0),
        Err(e) => Err(e),
    }
}

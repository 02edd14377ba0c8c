//! Vector and entrywise matrix p-norms.
//!
//! Every norm divides by the largest magnitude before raising to the power
//! `p`, so `p` around 10 on entries near 1e30 stays finite.

use super::DenseMatrix;
use crate::error::{Error, Result};

fn check_exponent(p: f64) -> Result<()> {
    if p.is_finite() && p >= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidExponent(p))
    }
}

/// `(sum |v_i|^p)^(1/p)` for `p` in `[1, inf)`.
pub fn vec_p_norm(v: &[f64], p: f64) -> Result<f64> {
    check_exponent(p)?;
    Ok(p_norm(v.iter().copied(), p))
}

/// Entrywise p-norm of a matrix: the p-norm of its flattened entries.
pub fn mat_entrywise_p_norm(m: &DenseMatrix, p: f64) -> Result<f64> {
    vec_p_norm(m.as_slice(), p)
}

/// Hölder conjugate `q` with `1/p + 1/q = 1`; `p = 1` maps to `+inf`.
pub fn dual_exponent(p: f64) -> Result<f64> {
    check_exponent(p)?;
    if p == 1.0 {
        Ok(f64::INFINITY)
    } else {
        Ok(p / (p - 1.0))
    }
}

/// Norm for a dual exponent `q` in `(1, inf]`; `inf` dispatches to the max norm.
pub fn dual_norm(v: &[f64], q: f64) -> f64 {
    if q.is_infinite() {
        v.iter().fold(0.0, |m, x| m.max(x.abs()))
    } else {
        p_norm(v.iter().copied(), q)
    }
}

/// `|x|^p` with fast paths for the exponents that dominate in practice.
#[inline]
pub fn abs_pow(x: f64, p: f64) -> f64 {
    let a = x.abs();
    if p == 1.0 {
        a
    } else if p == 2.0 {
        a * a
    } else if p == 1.5 {
        a * a.sqrt()
    } else if p == 0.5 {
        a.sqrt()
    } else if p.fract() == 0.0 && p <= 32.0 {
        a.powi(p as i32)
    } else {
        a.powf(p)
    }
}

/// `p`-norm for any real `p >= 1` without validation.
pub fn lp_norm(v: &[f64], p: f64) -> f64 {
    p_norm(v.iter().copied(), p)
}

pub(crate) fn p_norm<I>(values: I, p: f64) -> f64
where
    I: Iterator<Item = f64> + Clone,
{
    if p == 1.0 {
        return values.map(f64::abs).sum();
    }
    let m = values.clone().fold(0.0f64, |m, x| m.max(x.abs()));
    if m == 0.0 {
        return 0.0;
    }
    if p == 2.0 {
        let s: f64 = values.map(|x| (x / m) * (x / m)).sum();
        return m * s.sqrt();
    }
    let s: f64 = values.map(|x| abs_pow(x / m, p)).sum();
    m * s.powf(1.0 / p)
}

/// `sum_j |row_j|^p` for one row, without scaling.
pub fn row_mass(row: &[f64], p: f64) -> f64 {
    if p == 1.0 {
        row.iter().map(|x| x.abs()).sum()
    } else if p == 2.0 {
        row.iter().map(|x| x * x).sum()
    } else {
        row.iter().map(|&x| abs_pow(x, p)).sum()
    }
}

/// Per-row p-th power masses of `m`, all divided by `max|m_ij|^p`.
///
/// Ratios between entries are exactly those of the unscaled masses, which is
/// all the sampling formulas need.
pub fn scaled_masses(m: &DenseMatrix, p: f64) -> Vec<f64> {
    let big = m.max_abs();
    if big == 0.0 {
        return vec![0.0; m.rows()];
    }
    let inv = 1.0 / big;
    let mut buf = vec![0.0; m.cols()];
    (0..m.rows())
        .map(|i| {
            for (b, &x) in buf.iter_mut().zip(m.row(i)) {
                *b = x * inv;
            }
            row_mass(&buf, p)
        })
        .collect()
}

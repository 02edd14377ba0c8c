//! Well-conditioned bases for `span(A)` under the `p`-norm.
//!
//! `A = Q R` is factored first. The unit ball `C = {z : ||Q z||_p <= 1}` is
//! then rounded by an ellipsoid `E = {z : ||G z||_2 <= 1}` and the basis is
//! `U = Q G^-1`, with `A = U tau` for `tau = G R`.
//!
//! Rounding runs a symmetric parallel-cut ellipsoid iteration. The current
//! ellipsoid always contains `C`: each cut is the slab `|g^T w| <= 1` cut out
//! by a subgradient `g` of `||Q .||_p`, and every point of `C` satisfies it.
//! So `||z'||_2 <= ||U z'||_p` holds for all `z'` at every step. The iteration
//! looks for directions where `||U z'||_p` exceeds `sqrt(d) (1 + tol)` by
//! multi-start subgradient ascent over the sphere and cuts there; each such
//! cut shrinks the ellipsoid volume by a fixed factor, and the volume can
//! never drop below that of `C`.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{
    abs_pow, cholesky_upper, dual_exponent, dual_norm, invert, invert_upper, mat_entrywise_p_norm, norm2,
    qr_thin, DenseMatrix, DenseVector, DEFAULT_RANK_TOL,
};
use crate::linalg::vec_p_norm;
use crate::rng::{derive_indexed, rng_from, unit_direction};

/// Default rounding tolerance.
pub const DEFAULT_TOL: f64 = 0.05;

const SEARCH_SEED: u64 = 0x5eed_0fc0_ffee;

/// Outcome of ellipsoidal rounding.
#[derive(Debug, Clone)]
pub struct RoundingResult {
    /// Upper-triangular `d x d` map with `G^T G` describing the ellipsoid.
    pub g: DenseMatrix,
    /// Largest `||Q G^-1 z'||_p / ||z'||_2` found.
    pub kappa: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// `ceil(10 d^2 ln(d + 1) ln(1 / tol))`.
pub fn default_max_iters(d: usize, tol: f64) -> usize {
    let d = d as f64;
    (10.0 * d * d * (d + 1.0).ln() * (1.0 / tol).ln()).ceil() as usize
}

fn check_exponent(p: f64) -> Result<()> {
    if p.is_finite() && p >= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidExponent(p))
    }
}

/// Direction of the gradient of `||y||_p` at `y`, i.e. `sign(y) |y|^(p-1)`
/// computed on `y / max|y|`, together with `||y / max|y| ||_p^(p-1)`.
fn dual_direction(y: &[f64], p: f64) -> (Vec<f64>, f64) {
    let m = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if m == 0.0 {
        return (vec![0.0; y.len()], 0.0);
    }
    if p == 1.0 {
        // Kinks get subgradient 0.
        let phi = y
            .iter()
            .map(|&v| if v > 0.0 { 1.0 } else if v < 0.0 { -1.0 } else { 0.0 })
            .collect();
        return (phi, 1.0);
    }
    let scaled: Vec<f64> = y.iter().map(|v| v / m).collect();
    let phi = scaled
        .iter()
        .map(|&v| v.signum() * abs_pow(v, p - 1.0))
        .collect();
    let nrm = crate::linalg::lp_norm(&scaled, p);
    (phi, nrm.powf(p - 1.0))
}

/// Subgradient of `z -> ||U z||_p` given `y = U z`, normalised so `g^T z = ||U z||_p`.
fn subgradient_at(u: &DenseMatrix, y: &[f64], p: f64) -> Vec<f64> {
    let (phi, denom) = dual_direction(y, p);
    if denom == 0.0 {
        return vec![0.0; u.cols()];
    }
    let mut g = u.tr_mul_vec(&phi).expect("dimensions agree");
    g.iter_mut().for_each(|v| *v /= denom);
    g
}

fn norm_subgradient(u: &DenseMatrix, z: &[f64], p: f64) -> Vec<f64> {
    subgradient_at(u, &u.mul_vec(z).expect("dimensions agree"), p)
}

fn image_norm(u: &DenseMatrix, z: &[f64], p: f64) -> f64 {
    crate::linalg::lp_norm(&u.mul_vec(z).expect("dimensions agree"), p)
}

/// Fixed-point ascent of `||U z||_p` over the unit sphere. Each step moves
/// to the normalised subgradient, which never decreases the objective.
fn ascend(u: &DenseMatrix, p: f64, start: &[f64], max_steps: usize) -> (Vec<f64>, f64) {
    let n0 = norm2(start);
    let mut z: Vec<f64> = start.iter().map(|v| v / n0).collect();
    let mut y = u.mul_vec(&z).expect("dimensions agree");
    let mut h = crate::linalg::lp_norm(&y, p);
    for _ in 0..max_steps {
        let g = subgradient_at(u, &y, p);
        let gn = norm2(&g);
        if gn == 0.0 {
            break;
        }
        let cand: Vec<f64> = g.iter().map(|v| v / gn).collect();
        let yc = u.mul_vec(&cand).expect("dimensions agree");
        let hc = crate::linalg::lp_norm(&yc, p);
        let stalled = hc <= h * (1.0 + 1e-10);
        if hc > h {
            z = cand;
            y = yc;
            h = hc;
        }
        if stalled {
            break;
        }
    }
    (z, h)
}

fn coordinate(d: usize, j: usize) -> Vec<f64> {
    let mut e = vec![0.0; d];
    e[j] = 1.0;
    e
}

/// Starting directions for an exhaustive search over the sphere in `R^d`.
fn thorough_starts(d: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let mut starts: Vec<Vec<f64>> = (0..d).map(|j| coordinate(d, j)).collect();
    for i in 0..d {
        for j in i + 1..d {
            let mut a = vec![0.0; d];
            a[i] = 1.0;
            a[j] = 1.0;
            starts.push(a.clone());
            a[j] = -1.0;
            starts.push(a);
        }
    }
    if d == 2 {
        starts.extend((0..90).map(|k| {
            let t = std::f64::consts::PI * k as f64 / 90.0;
            vec![t.cos(), t.sin()]
        }));
    }
    starts.extend((0..16 * d).map(|_| unit_direction(rng, d)));
    starts
}

fn best_of(u: &DenseMatrix, p: f64, starts: &[Vec<f64>], steps: usize) -> (Vec<f64>, f64) {
    starts
        .par_iter()
        .map(|s| ascend(u, p, s, steps))
        .reduce_with(|a, b| if b.1 > a.1 { b } else { a })
        .expect("at least one start")
}

/// Largest `||U z||_p` over the unit sphere found by multi-start ascent,
/// never below the largest column norm.
pub fn max_image_norm(u: &DenseMatrix, p: f64) -> f64 {
    let d = u.cols();
    let mut rng = rng_from(SEARCH_SEED);
    let starts = thorough_starts(d, &mut rng);
    let (_, h) = best_of(u, p, &starts, 200);
    let cols = (0..d)
        .map(|j| image_norm(u, &coordinate(d, j), p))
        .fold(0.0, f64::max);
    h.max(cols)
}

/// Rounds the unit ball of `z -> ||Q z||_p` by an ellipsoid.
///
/// `Q` must have orthonormal columns. For `p = 2` the ball is already round
/// and `G = I`. For `d = 1` the ball is an interval and `G = [||Q||_p]`.
/// Otherwise iterates parallel cuts until no direction with
/// `||Q G^-1 z'||_p > sqrt(d) (1 + tol) ||z'||_2` is found, or until
/// `max_iters` cuts; in the latter case `converged` is false and `kappa` is
/// the largest ratio found for the final ellipsoid.
pub fn lowner_john_round(
    q: &DenseMatrix,
    p: f64,
    tol: f64,
    max_iters: usize,
) -> Result<RoundingResult> {
    check_exponent(p)?;
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidConfig(format!("rounding tol must lie in (0, 1), got {tol}")));
    }
    let (n, d) = q.shape();
    if d == 0 || n == 0 {
        return Err(Error::Rounding("basis has no columns".into()));
    }
    if p == 2.0 {
        return Ok(RoundingResult {
            g: DenseMatrix::identity(d),
            kappa: 1.0,
            iterations: 0,
            converged: true,
        });
    }
    if d == 1 {
        let len = vec_p_norm(&q.col(0), p)?;
        return Ok(RoundingResult {
            g: DenseMatrix::new(1, 1, vec![len])?,
            kappa: 1.0,
            iterations: 0,
            converged: true,
        });
    }

    // For p <= 2, ||Q z||_p >= ||z||_2, so C sits in the unit ball; for p > 2,
    // ||Q z||_p >= n^(1/p - 1/2) ||z||_2.
    let radius = if p <= 2.0 {
        1.0
    } else {
        (n as f64).powf(0.5 - 1.0 / p)
    };
    let df = d as f64;
    let target = df.sqrt() * (1.0 + tol);
    let mut m = DenseMatrix::identity(d).scale(radius);
    let mut u = q.scale(radius);
    let mut rng = rng_from(SEARCH_SEED);
    let mut warm = coordinate(d, 0);
    let mut iterations = 0;
    let mut converged = false;

    let ellipsoid = |m: &DenseMatrix| -> Result<(DenseMatrix, DenseMatrix)> {
        // E = {M z' : ||z'|| <= 1} = {z : z^T (M M^T)^-1 z <= 1}.
        let minv = invert(m)?;
        let g = cholesky_upper(&minv.transpose().matmul(&minv)?)?;
        let u_final = q.matmul(&invert_upper(&g)?)?;
        Ok((g, u_final))
    };

    let (g, kappa) = loop {
        // Cheap probes first: columns, the previous violator, two random starts.
        let mut quick: Vec<Vec<f64>> = (0..d).map(|j| coordinate(d, j)).collect();
        quick.push(warm.clone());
        quick.push(unit_direction(&mut rng, d));
        quick.push(unit_direction(&mut rng, d));
        let (mut z, mut h) = best_of(&u, p, &quick, 30);
        if h <= target {
            // The exhaustive search runs on the basis that will be returned,
            // so the reported kappa is measured where it is used.
            let (g, u_final) = ellipsoid(&m)?;
            let starts = thorough_starts(d, &mut rng);
            let (zt, ht) = best_of(&u_final, p, &starts, 200);
            let cols = (0..d)
                .map(|j| image_norm(&u_final, &coordinate(d, j), p))
                .fold(0.0, f64::max);
            if ht <= target || iterations >= max_iters {
                converged = ht <= target;
                break (g, ht.max(h).max(cols).max(1.0));
            }
            m = invert_upper(&g)?;
            u = u_final;
            z = zt;
            h = ht;
        }
        if iterations >= max_iters {
            let (g, u_final) = ellipsoid(&m)?;
            let cols = (0..d)
                .map(|j| image_norm(&u_final, &coordinate(d, j), p))
                .fold(0.0, f64::max);
            break (g, h.max(cols).max(1.0));
        }

        let g = norm_subgradient(&u, &z, p);
        let gn = norm2(&g);
        let a = 1.0 / gn;
        let ghat: Vec<f64> = g.iter().map(|v| v / gn).collect();
        let axis = df.sqrt() * a;
        let other = (df * (1.0 - a * a) / (df - 1.0)).sqrt();
        let mut t = DenseMatrix::identity(d).scale(other);
        for i in 0..d {
            for j in 0..d {
                t[(i, j)] += (axis - other) * ghat[i] * ghat[j];
            }
        }
        u = u.matmul(&t)?;
        m = m.matmul(&t)?;
        // The violator expressed in the new coordinates.
        let inv_axis = 1.0 / axis;
        let inv_other = 1.0 / other;
        let zg = crate::linalg::dot(&z, &ghat);
        warm = z
            .iter()
            .zip(&ghat)
            .map(|(zi, gi)| inv_other * zi + (inv_axis - inv_other) * zg * gi)
            .collect();
        iterations += 1;
    };

    Ok(RoundingResult {
        g,
        kappa,
        iterations,
        converged,
    })
}

/// A basis `U` of `span(A)` with certified conditioning constants.
#[derive(Debug, Clone)]
pub struct WellConditionedBasis {
    /// `n x d`, `U = Q G^-1`.
    pub u: DenseMatrix,
    /// `d x d` upper triangular.
    pub g: DenseMatrix,
    /// `d x m`, `tau = G R`, so that `A = U tau`.
    pub tau: DenseMatrix,
    pub q: DenseMatrix,
    /// `d x m` in the original column order.
    pub r: DenseMatrix,
    pub p: f64,
    pub tol: f64,
    pub alpha_cert: f64,
    pub beta_cert: f64,
    pub kappa_cert: f64,
    pub rounding_iterations: usize,
    pub converged: bool,
    pub warnings: Vec<String>,
}

impl WellConditionedBasis {
    pub fn rank(&self) -> usize {
        self.u.cols()
    }
}

/// QR followed by ellipsoidal rounding, with `alpha_cert = kappa d^(1/p)` and
/// `beta_cert = 1 + tol` for `p <= 2`, `(1 + tol) d^(1/q - 1/2)` for `p > 2`.
/// For `p = 2` the orthonormal `Q` is returned with `alpha = sqrt(d)`, `beta = 1`.
pub fn well_conditioned_basis(a: &DenseMatrix, p: f64, tol: f64) -> Result<WellConditionedBasis> {
    check_exponent(p)?;
    let qr = qr_thin(a, DEFAULT_RANK_TOL)?;
    let d = qr.rank;
    let r = qr.r_unpivoted();
    let mut warnings = Vec::new();
    let rounding = lowner_john_round(&qr.q, p, tol, default_max_iters(d, tol))?;
    let ginv = invert_upper(&rounding.g)?;
    let u = qr.q.matmul(&ginv)?;
    let tau = rounding.g.matmul(&r)?;
    let df = d as f64;

    let mut kappa = rounding.kappa;
    if !rounding.converged {
        // Fall back to bounds that hold for every direction.
        let col_bound = (0..d)
            .map(|j| vec_p_norm(&u.col(j), p).map(|v| v * v))
            .sum::<Result<f64>>()?
            .sqrt();
        let row_bound = crate::linalg::lp_norm(
            &(0..u.rows()).map(|i| norm2(u.row(i))).collect::<Vec<_>>(),
            p,
        );
        kappa = kappa.max(col_bound.min(row_bound));
        warnings.push(format!(
            "ellipsoidal rounding stopped after {} cuts without reaching sqrt(d)(1+tol); \
             certificates use kappa = {kappa:.6}",
            rounding.iterations
        ));
    }

    let (alpha_cert, beta_cert, kappa_cert) = if p == 2.0 {
        (df.sqrt(), 1.0, 1.0)
    } else {
        let q = dual_exponent(p)?;
        let beta = if p <= 2.0 {
            1.0 + tol
        } else {
            (1.0 + tol) * df.powf(1.0 / q - 0.5)
        };
        (kappa * df.powf(1.0 / p), beta, kappa)
    };

    Ok(WellConditionedBasis {
        u,
        g: rounding.g,
        tau,
        q: qr.q,
        r,
        p,
        tol,
        alpha_cert,
        beta_cert,
        kappa_cert,
        rounding_iterations: rounding.iterations,
        converged: rounding.converged,
        warnings,
    })
}

fn ratio_q_over_p(u: &DenseMatrix, z: &[f64], p: f64, q: f64) -> f64 {
    let den = image_norm(u, z, p);
    if den == 0.0 {
        return f64::INFINITY;
    }
    dual_norm(z, q) / den
}

/// Gradient of `log ||z||_q - log ||U z||_p`.
fn log_ratio_gradient(u: &DenseMatrix, z: &[f64], p: f64, q: f64) -> Vec<f64> {
    let d = z.len();
    let mut num = vec![0.0; d];
    if q.is_infinite() {
        let k = (0..d)
            .max_by(|&i, &j| z[i].abs().total_cmp(&z[j].abs()))
            .unwrap_or(0);
        if z[k] != 0.0 {
            num[k] = 1.0 / z[k];
        }
    } else {
        let (phi, denom) = dual_direction(z, q);
        let m = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let nq = m * denom.powf(1.0 / (q - 1.0));
        for (o, f) in num.iter_mut().zip(phi) {
            *o = f / (denom * nq);
        }
    }
    let h = image_norm(u, z, p);
    let g = norm_subgradient(u, z, p);
    num.iter().zip(g).map(|(a, b)| a - b / h).collect()
}

fn refine_ratio(u: &DenseMatrix, p: f64, q: f64, start: Vec<f64>) -> f64 {
    let mut z = start;
    let mut best = ratio_q_over_p(u, &z, p, q);
    let mut step = 0.1;
    for _ in 0..60 {
        let g = log_ratio_gradient(u, &z, p, q);
        let gn = norm2(&g);
        if gn == 0.0 || !gn.is_finite() {
            break;
        }
        let cand: Vec<f64> = z.iter().zip(&g).map(|(a, b)| a + step * b / gn).collect();
        let cn = norm2(&cand);
        let cand: Vec<f64> = cand.into_iter().map(|v| v / cn).collect();
        let r = ratio_q_over_p(u, &cand, p, q);
        if r > best {
            best = r;
            z = cand;
            step *= 1.5;
        } else {
            step *= 0.5;
            if step < 1e-10 {
                break;
            }
        }
    }
    best
}

/// Measured conditioning of a basis: `alpha_measured = |||U|||_p` exactly,
/// and a lower bound on the smallest valid `beta`, the largest
/// `||z||_q / ||U z||_p` over coordinate, random, and ascent-refined probes.
pub fn certify_basis(w: &WellConditionedBasis, n_probes: usize, seed: u64) -> Result<(f64, f64)> {
    let p = w.p;
    let q = dual_exponent(p)?;
    let d = w.rank();
    let alpha = mat_entrywise_p_norm(&w.u, p)?;
    let mut starts: Vec<Vec<f64>> = (0..d).map(|j| coordinate(d, j)).collect();
    starts.extend((0..n_probes.max(1)).map(|k| {
        let mut rng = rng_from(derive_indexed(seed, "certify-probe", k as u64));
        unit_direction(&mut rng, d)
    }));
    let beta = starts
        .into_par_iter()
        .map(|s| refine_ratio(&w.u, p, q, s))
        .reduce(|| 0.0, f64::max);
    Ok((alpha, beta))
}

/// Largest `||nu||_2` over `z_samples` random `z` scaled to `||A z||_p = 1`,
/// where `z = tau^-1 nu`. Requires `A` to have full column rank.
pub fn spanner_coefficients(
    w: &WellConditionedBasis,
    a: &DenseMatrix,
    z_samples: usize,
    seed: u64,
) -> Result<f64> {
    let (d, m) = w.tau.shape();
    if d != m {
        return Err(Error::Singular(format!(
            "tau is {d}x{m}; coefficients need a square, invertible tau"
        )));
    }
    if a.cols() != m {
        return Err(Error::DimensionMismatch("basis was not built from this matrix".into()));
    }
    let mut rng = rng_from(derive_indexed(seed, "spanner", 0));
    let mut worst = 0.0f64;
    for _ in 0..z_samples {
        let z = unit_direction(&mut rng, m);
        let az = vec_p_norm(&a.mul_vec(&z)?, w.p)?;
        if az == 0.0 {
            return Err(Error::Singular("A z = 0 for a nonzero z".into()));
        }
        let z: DenseVector = z.into_iter().map(|v| v / az).collect();
        let nu = w.tau.mul_vec(&z)?;
        worst = worst.max(norm2(&nu));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::gaussian_matrix;
    use approx::assert_relative_eq;

    fn orthonormal(n: usize, d: usize, seed: u64) -> DenseMatrix {
        qr_thin(&gaussian_matrix(n, d, seed), DEFAULT_RANK_TOL).unwrap().q
    }

    #[test]
    fn p2_rounding_is_identity() {
        let q = orthonormal(40, 3, 1);
        let r = lowner_john_round(&q, 2.0, 0.05, 100).unwrap();
        assert_eq!(r.g, DenseMatrix::identity(3));
        assert_eq!(r.kappa, 1.0);
        assert!(r.converged);
    }

    #[test]
    fn one_dimensional_rounding_is_exact() {
        let q = orthonormal(25, 1, 2);
        for p in [1.0, 1.5, 3.0] {
            let r = lowner_john_round(&q, p, 0.05, 10).unwrap();
            assert_eq!(r.kappa, 1.0);
            assert_relative_eq!(r.g[(0, 0)], vec_p_norm(&q.col(0), p).unwrap());
        }
    }

    #[test]
    fn rounding_rejects_bad_inputs() {
        let q = orthonormal(10, 2, 3);
        assert!(matches!(lowner_john_round(&q, 0.5, 0.05, 10), Err(Error::InvalidExponent(_))));
        assert!(lowner_john_round(&q, 1.0, 1.5, 10).is_err());
        let empty = DenseMatrix::zeros(10, 0);
        assert!(matches!(lowner_john_round(&empty, 1.0, 0.05, 10), Err(Error::Rounding(_))));
    }

    #[test]
    fn exhausted_budget_reports_not_converged() {
        let q = orthonormal(300, 3, 4);
        let r = lowner_john_round(&q, 1.0, 0.05, 0).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 0);
        // The unit ball of ||Q z||_1 is far smaller than the starting ball.
        assert!(r.kappa > 3f64.sqrt() * 1.05);
        let w = well_conditioned_basis(&gaussian_matrix(300, 3, 4), 1.0, 0.05).unwrap();
        assert!(w.converged);
        assert!(w.warnings.is_empty());
    }

    #[test]
    fn p2_basis_is_q() {
        let a = gaussian_matrix(60, 4, 5);
        let w = well_conditioned_basis(&a, 2.0, 0.05).unwrap();
        let q = qr_thin(&a, DEFAULT_RANK_TOL).unwrap().q;
        assert_eq!(w.u, q);
        assert_eq!(w.alpha_cert, 2.0);
        assert_eq!(w.beta_cert, 1.0);
        assert_eq!(w.kappa_cert, 1.0);
        let (alpha, beta) = certify_basis(&w, 50, 1).unwrap();
        assert_relative_eq!(alpha, 2.0, max_relative = 1e-12);
        assert!(beta <= 1.0 + 1e-10);
    }

    #[test]
    fn single_column_basis_is_normalised_column() {
        let a = gaussian_matrix(30, 1, 6);
        for p in [1.0, 1.5, 2.0, 4.0] {
            let w = well_conditioned_basis(&a, p, 0.05).unwrap();
            let len = vec_p_norm(&a.col(0), p).unwrap();
            for i in 0..30 {
                assert_relative_eq!(w.u[(i, 0)], a[(i, 0)] / len, max_relative = 1e-12);
            }
            assert!(w.alpha_cert <= 1.0 + w.tol);
            assert_relative_eq!(w.beta_cert, if p == 2.0 { 1.0 } else { 1.05 });
            let (_, beta) = certify_basis(&w, 10, 2).unwrap();
            assert_relative_eq!(beta, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn basis_reconstructs_a() {
        for (k, p) in [1.0, 1.5, 3.0].into_iter().enumerate() {
            let a = gaussian_matrix(80, 3, 10 + k as u64);
            let w = well_conditioned_basis(&a, p, 0.05).unwrap();
            let back = w.u.matmul(&w.tau).unwrap();
            assert!(back.sub(&a).unwrap().max_abs() <= 1e-8 * a.max_abs());
        }
    }

    #[test]
    fn rank_deficient_input_uses_numeric_rank() {
        let mut a = gaussian_matrix(50, 3, 7);
        let c: Vec<f64> = a.col(0).iter().map(|v| 3.0 * v).collect();
        a.set_col(2, &c);
        let w = well_conditioned_basis(&a, 1.5, 0.05).unwrap();
        assert_eq!(w.rank(), 2);
        assert_eq!(w.tau.shape(), (2, 3));
        assert!(spanner_coefficients(&w, &a, 10, 1).is_err());
        assert!(matches!(
            well_conditioned_basis(&DenseMatrix::zeros(5, 2), 1.0, 0.05),
            Err(Error::ZeroRank)
        ));
    }

    #[test]
    fn spanner_bound_in_one_dimension() {
        let a = gaussian_matrix(20, 1, 8);
        let w = well_conditioned_basis(&a, 1.0, 0.05).unwrap();
        let worst = spanner_coefficients(&w, &a, 200, 3).unwrap();
        assert!(worst <= 1.0 + w.tol);
    }

    #[test]
    fn spanner_bound_orthonormal_case() {
        let a = gaussian_matrix(40, 3, 9);
        let w = well_conditioned_basis(&a, 2.0, 0.05).unwrap();
        let worst = spanner_coefficients(&w, &a, 2000, 4).unwrap();
        assert!(worst <= 3f64.sqrt());
    }
}

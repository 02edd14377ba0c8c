//! `lp` regression solvers for full and sampled problems.
//!
//! Away from `p = 2` the solver minimises the smoothed objective
//! `F_mu(x) = sum_i (rho_i^2 + mu^2)^(p/2)`, `rho = A x - b`, while `mu`
//! shrinks geometrically. Each `mu` stage takes damped Newton steps, each one
//! a weighted least-squares solve, so the method is a form of IRLS.
//!
//! Work happens on a normalised copy of the problem: `A` is divided by
//! `max |A_ij|` and `b` by `||b||_p / sqrt(n)`. The smoothing parameters in
//! [`SolverOptions`] are in the units of the normalised residual.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{abs_pow, lp_norm, norm2, qr_thin, DenseMatrix, DenseVector, DEFAULT_RANK_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Newton steps allowed per smoothing stage.
    pub max_iters: usize,
    pub grad_tol: f64,
    /// First smoothing level, relative to `||b||_p / sqrt(n)`.
    pub smoothing_mu0: f64,
    pub smoothing_shrink: f64,
    /// Last smoothing level, relative to `||b||_p / sqrt(n)`.
    pub mu_min: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iters: 500,
            grad_tol: 1e-8,
            smoothing_mu0: 0.1,
            smoothing_shrink: 0.1,
            mu_min: 1e-8,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.grad_tol, self.smoothing_mu0, self.smoothing_shrink, self.mu_min];
        if self.max_iters == 0 || positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidConfig("solver options must all be positive".into()));
        }
        if self.smoothing_shrink >= 1.0 {
            return Err(Error::InvalidConfig("smoothing_shrink must be below 1".into()));
        }
        if self.mu_min > self.smoothing_mu0 {
            return Err(Error::InvalidConfig("mu_min exceeds smoothing_mu0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub x: DenseVector,
    /// `||A x - b||_p`.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Norm of the smoothed gradient at `mu_min`, on the normalised problem,
    /// taken before the `p = 1` vertex polish.
    pub kkt_residual: f64,
    /// Best true objective seen at the end of each smoothing stage.
    pub stage_objectives: Vec<f64>,
}

fn check_problem(a: &DenseMatrix, b: &[f64], p: f64) -> Result<()> {
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::InvalidExponent(p));
    }
    if a.rows() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "A has {} rows but b has {} entries",
            a.rows(),
            b.len()
        )));
    }
    if a.rows() == 0 || a.cols() == 0 {
        return Err(Error::DimensionMismatch(format!("cannot solve with a {}x{} matrix", a.rows(), a.cols())));
    }
    if let Some(i) = b.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { row: i, col: 0 });
    }
    if a.max_abs() == 0.0 {
        return Err(Error::ZeroRank);
    }
    Ok(())
}

fn smoothed_value(rho: &[f64], p: f64, mu: f64) -> f64 {
    let m2 = mu * mu;
    if p == 2.0 {
        return rho.iter().map(|r| r * r + m2).sum();
    }
    rho.iter().map(|r| (r * r + m2).powf(p / 2.0)).sum()
}

/// Per-row derivative of `(rho^2 + mu^2)^(p/2)` with respect to `rho`.
fn row_derivatives(rho: &[f64], p: f64, mu: f64) -> Vec<f64> {
    let m2 = mu * mu;
    rho.iter()
        .map(|&r| p * (r * r + m2).powf(p / 2.0 - 1.0) * r)
        .collect()
}

fn smoothed_gradient(a: &DenseMatrix, rho: &[f64], p: f64, mu: f64) -> DenseVector {
    a.tr_mul_vec(&row_derivatives(rho, p, mu)).expect("dimensions agree")
}

/// `argmin_d sum_i w_i (a_i^T d - t_i)^2` by QR on the `sqrt(w)`-scaled rows.
fn weighted_least_squares(a: &DenseMatrix, w: &[f64], t: &[f64]) -> Result<DenseVector> {
    let wmax = w.iter().fold(0.0f64, |m, v| m.max(*v));
    if !(wmax > 0.0 && wmax.is_finite()) {
        return Ok(vec![0.0; a.cols()]);
    }
    let s: Vec<f64> = w.iter().map(|v| (v / wmax).sqrt()).collect();
    let sa = a.scale_rows(&s)?;
    let st: Vec<f64> = t.iter().zip(&s).map(|(x, y)| x * y).collect();
    match qr_thin(&sa, DEFAULT_RANK_TOL) {
        Ok(f) => f.solve_least_squares(&st),
        Err(Error::ZeroRank) => Ok(vec![0.0; a.cols()]),
        Err(e) => Err(e),
    }
}

/// Damped Newton direction for `F_mu`, as a weighted least-squares problem.
fn newton_direction(a: &DenseMatrix, rho: &[f64], p: f64, mu: f64) -> Result<DenseVector> {
    let m2 = mu * mu;
    let mut w = Vec::with_capacity(rho.len());
    let mut t = Vec::with_capacity(rho.len());
    for &r in rho {
        let s = r * r + m2;
        w.push(p * s.powf(p / 2.0 - 2.0) * ((p - 1.0) * r * r + m2));
        t.push(-r * s / ((p - 1.0) * r * r + m2));
    }
    weighted_least_squares(a, &w, &t)
}

/// Classic IRLS direction: weights `(rho^2 + mu^2)^(p/2 - 1)`, target `-rho`.
fn irls_direction(a: &DenseMatrix, rho: &[f64], p: f64, mu: f64) -> Result<DenseVector> {
    let m2 = mu * mu;
    let w: Vec<f64> = rho.iter().map(|&r| (r * r + m2).powf(p / 2.0 - 1.0)).collect();
    let t: Vec<f64> = rho.iter().map(|r| -r).collect();
    weighted_least_squares(a, &w, &t)
}

/// `F_mu(rho + delta) - F_mu(rho)` summed row by row without cancellation,
/// so decreases far below the resolution of `F_mu` itself stay visible.
fn smoothed_change(rho: &[f64], delta: &[f64], p: f64, mu: f64) -> f64 {
    let m2 = mu * mu;
    let h = p / 2.0;
    rho.iter()
        .zip(delta)
        .map(|(&r, &dr)| {
            let s = r * r + m2;
            let ds = dr * (2.0 * r + dr);
            if s == 0.0 {
                return abs_pow(dr, p);
            }
            if h == 1.0 {
                ds
            } else {
                s.powf(h) * (h * (ds / s).ln_1p()).exp_m1()
            }
        })
        .sum()
}

fn axpy(x: &[f64], t: f64, d: &[f64]) -> DenseVector {
    x.iter().zip(d).map(|(a, b)| a + t * b).collect()
}

struct Normalised {
    a: DenseMatrix,
    b: DenseVector,
    /// `x = x_scale * x'`.
    x_scale: f64,
    kkt_scale: f64,
}

fn normalise(a: &DenseMatrix, b: &[f64], p: f64) -> Normalised {
    let alpha = a.max_abs();
    let beta = lp_norm(b, p) / (b.len() as f64).sqrt();
    let an = a.scale(1.0 / alpha);
    let bn: DenseVector = b.iter().map(|v| v / beta).collect();
    let kkt_scale = norm2(&an.tr_mul_vec(&bn).expect("dimensions agree")).max(1.0);
    Normalised {
        a: an,
        b: bn,
        x_scale: beta / alpha,
        kkt_scale,
    }
}

fn finish(a: &DenseMatrix, b: &[f64], p: f64, x: DenseVector, iterations: usize, converged: bool, kkt: f64, stages: Vec<f64>) -> SolveResult {
    let objective = lp_norm(&a.residual(&x, b).expect("dimensions agree"), p);
    SolveResult {
        x,
        objective,
        iterations,
        converged,
        kkt_residual: kkt,
        stage_objectives: stages,
    }
}

fn zero_rhs(a: &DenseMatrix) -> SolveResult {
    SolveResult {
        x: vec![0.0; a.cols()],
        objective: 0.0,
        iterations: 0,
        converged: true,
        kkt_residual: 0.0,
        stage_objectives: Vec::new(),
    }
}

/// Minimises `||A x - b||_p`, starting from the least-squares solution.
///
/// `p = 2` is solved directly by QR. Otherwise runs smoothing continuation
/// from `smoothing_mu0` down to `mu_min`; the result is converged when the
/// smoothed gradient at `mu_min` is at most `grad_tol * max(1, ||A^T b||_2)`
/// on the normalised problem.
pub fn solve_lp_regression(a: &DenseMatrix, b: &[f64], p: f64, opts: &SolverOptions) -> Result<SolveResult> {
    solve_impl(a, b, p, None, opts)
}

/// As [`solve_lp_regression`], starting the first smoothing stage at `x0`.
pub fn solve_lp_regression_from(a: &DenseMatrix, b: &[f64], p: f64, x0: &[f64], opts: &SolverOptions) -> Result<SolveResult> {
    if x0.len() != a.cols() {
        return Err(Error::DimensionMismatch("x0 length differs from A columns".into()));
    }
    solve_impl(a, b, p, Some(x0), opts)
}

fn solve_impl(a: &DenseMatrix, b: &[f64], p: f64, x0: Option<&[f64]>, opts: &SolverOptions) -> Result<SolveResult> {
    check_problem(a, b, p)?;
    opts.validate()?;
    if b.iter().all(|&v| v == 0.0) {
        return Ok(zero_rhs(a));
    }
    let nz = normalise(a, b, p);
    let qr = qr_thin(&nz.a, DEFAULT_RANK_TOL)?;
    let ls = qr.solve_least_squares(&nz.b)?;

    if p == 2.0 {
        let rho = nz.a.residual(&ls, &nz.b)?;
        let kkt = norm2(&smoothed_gradient(&nz.a, &rho, 2.0, 0.0));
        let x = ls.iter().map(|v| v * nz.x_scale).collect();
        let obj = lp_norm(&rho, 2.0);
        return Ok(finish(a, b, p, x, 1, true, kkt, vec![obj]));
    }

    let mut x: DenseVector = match x0 {
        Some(x0) => x0.iter().map(|v| v / nz.x_scale).collect(),
        None => ls,
    };
    let tol = opts.grad_tol * nz.kkt_scale;
    let mut rho = nz.a.residual(&x, &nz.b)?;
    let mut best_x = x.clone();
    let mut best_obj = lp_norm(&rho, p);
    let mut stages = Vec::new();
    let mut iterations = 0;
    let mut mu = opts.smoothing_mu0;
    loop {
        let last = mu <= opts.mu_min;
        for _ in 0..opts.max_iters {
            let g = smoothed_gradient(&nz.a, &rho, p, mu);
            if norm2(&g) <= tol {
                break;
            }
            let mut stepped = false;
            for dir in [newton_direction(&nz.a, &rho, p, mu)?, irls_direction(&nz.a, &rho, p, mu)?] {
                let adir = nz.a.mul_vec(&dir)?;
                let mut t = 1.0;
                for _ in 0..=40 {
                    let delta: Vec<f64> = adir.iter().map(|v| t * v).collect();
                    if smoothed_change(&rho, &delta, p, mu) < 0.0 {
                        x = axpy(&x, t, &dir);
                        rho = nz.a.residual(&x, &nz.b)?;
                        stepped = true;
                        break;
                    }
                    t *= 0.5;
                }
                if stepped {
                    break;
                }
            }
            iterations += 1;
            let obj = lp_norm(&rho, p);
            if obj < best_obj {
                best_obj = obj;
                best_x.clone_from(&x);
            }
            if !stepped {
                break;
            }
        }
        stages.push(best_obj);
        if last {
            break;
        }
        mu = (mu * opts.smoothing_shrink).max(opts.mu_min);
    }

    // Smoothing shifts the objective by at most n^(1/p) mu_min, so the final
    // iterate wins unless an earlier one beats it by more than that.
    let final_obj = lp_norm(&rho, p);
    let slack = (nz.b.len() as f64).powf(1.0 / p) * opts.mu_min;
    let chosen = if final_obj <= best_obj + slack { x } else { best_x };
    let rc = nz.a.residual(&chosen, &nz.b)?;
    let kkt = norm2(&smoothed_gradient(&nz.a, &rc, p, opts.mu_min));
    let converged = kkt <= tol;
    let chosen = if p == 1.0 { polish_vertex(&nz.a, &nz.b, chosen)? } else { chosen };
    let x = chosen.iter().map(|v| v * nz.x_scale).collect();
    Ok(finish(a, b, p, x, iterations, converged, kkt, stages))
}

/// For `p = 1` some optimum interpolates `m` rows. Interpolates the rows with
/// the smallest residuals and keeps the result when the objective drops.
fn polish_vertex(a: &DenseMatrix, b: &[f64], mut x: DenseVector) -> Result<DenseVector> {
    let m = a.cols();
    if a.rows() < m {
        return Ok(x);
    }
    let mut obj = lp_norm(&a.residual(&x, b)?, 1.0);
    for _ in 0..3 {
        let rho = a.residual(&x, b)?;
        let mut order: Vec<usize> = (0..rho.len()).collect();
        order.sort_by(|&i, &j| rho[i].abs().total_cmp(&rho[j].abs()));
        order.truncate(m);
        let sub = a.select_rows_scaled(&order, &vec![1.0; m]);
        let rhs: Vec<f64> = order.iter().map(|&i| b[i]).collect();
        let cand = match qr_thin(&sub, DEFAULT_RANK_TOL) {
            Ok(f) => f.solve_least_squares(&rhs)?,
            Err(Error::ZeroRank) => return Ok(x),
            Err(e) => return Err(e),
        };
        let c_obj = lp_norm(&a.residual(&cand, b)?, 1.0);
        if c_obj < obj {
            x = cand;
            obj = c_obj;
        } else {
            break;
        }
    }
    Ok(x)
}

fn check_weights(w: &[f64], n: usize) -> Result<()> {
    if w.len() != n {
        return Err(Error::DimensionMismatch(format!("{} weights for {n} rows", w.len())));
    }
    if let Some(v) = w.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::InvalidWeights(format!("weights must be finite and nonnegative, got {v}")));
    }
    if w.iter().all(|&v| v == 0.0) {
        return Err(Error::InvalidWeights("all weights are zero".into()));
    }
    Ok(())
}

/// `w_i^(1/p)` for each weight.
pub fn weight_row_scales(w: &[f64], p: f64) -> Vec<f64> {
    w.iter().map(|v| v.powf(1.0 / p)).collect()
}

/// Minimises `(sum_i w_i |(A x - b)_i|^p)^(1/p)` by scaling row `i` of `A`
/// and `b` by `w_i^(1/p)`.
pub fn solve_weighted(a: &DenseMatrix, b: &[f64], p: f64, w: &[f64], opts: &SolverOptions) -> Result<SolveResult> {
    check_problem(a, b, p)?;
    check_weights(w, a.rows())?;
    let s = weight_row_scales(w, p);
    let sb: DenseVector = b.iter().zip(&s).map(|(x, y)| x * y).collect();
    solve_lp_regression(&a.scale_rows(&s)?, &sb, p, opts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiSolveResult {
    /// `m x k`, column `j` solves against column `j` of `B`.
    pub x: DenseMatrix,
    /// `|||A X - B|||_p`.
    pub objective: f64,
    pub columns: Vec<SolveResult>,
}

/// Minimises `|||A X - B|||_p` one column at a time.
pub fn solve_multi_rhs(a: &DenseMatrix, b: &DenseMatrix, p: f64, opts: &SolverOptions) -> Result<MultiSolveResult> {
    if b.cols() == 0 {
        return Err(Error::DimensionMismatch("B has no columns".into()));
    }
    let columns = (0..b.cols())
        .into_par_iter()
        .map(|j| solve_lp_regression(a, &b.col(j), p, opts))
        .collect::<Result<Vec<_>>>()?;
    let x = DenseMatrix::from_columns(&columns.iter().map(|c| c.x.clone()).collect::<Vec<_>>())?;
    let objective = lp_norm(&columns.iter().map(|c| c.objective).collect::<Vec<_>>(), p);
    Ok(MultiSolveResult { x, objective, columns })
}

/// Euclidean projection onto the nonnegative orthant.
pub fn project_nonnegative(x: &[f64]) -> DenseVector {
    x.iter().map(|v| v.max(0.0)).collect()
}

/// Euclidean projection onto the box `[lo, hi]^m`.
pub fn box_projection(lo: f64, hi: f64) -> impl Fn(&[f64]) -> DenseVector {
    move |x| x.iter().map(|v| v.clamp(lo, hi)).collect()
}

fn check_idempotent(project: &dyn Fn(&[f64]) -> DenseVector, x: &[f64]) -> Result<DenseVector> {
    let once = project(x);
    if once.len() != x.len() || once.iter().any(|v| !v.is_finite()) {
        return Err(Error::Projection("projection changed the dimension or produced non-finite values".into()));
    }
    let twice = project(&once);
    let diff: Vec<f64> = once.iter().zip(&twice).map(|(a, b)| a - b).collect();
    if norm2(&diff) > 1e-10 * (1.0 + norm2(&once)) {
        return Err(Error::Projection("projection is not idempotent".into()));
    }
    Ok(once)
}

const WINDOW: usize = 50;

/// Minimises `||A x - b||_p` over a convex set given by its projection.
///
/// Projected gradient steps on the smoothed objective, with step halving
/// until the objective decreases, over the same smoothing schedule as the
/// unconstrained solver. Returns the best feasible point seen. Converged
/// means the best objective moved by less than `grad_tol` relative over
/// the last 50 steps of the final stage.
pub fn solve_constrained(
    a: &DenseMatrix,
    b: &[f64],
    p: f64,
    project: &dyn Fn(&[f64]) -> DenseVector,
    opts: &SolverOptions,
) -> Result<SolveResult> {
    check_problem(a, b, p)?;
    opts.validate()?;
    let bn = lp_norm(b, p);
    let beta = if bn > 0.0 { bn / (b.len() as f64).sqrt() } else { 1.0 };
    let alpha = a.max_abs();
    let an = a.scale(1.0 / alpha);
    let bn: DenseVector = b.iter().map(|v| v / beta).collect();
    let x_scale = beta / alpha;
    let proj = |xn: &[f64]| -> Result<DenseVector> {
        let xs: DenseVector = xn.iter().map(|v| v * x_scale).collect();
        let px = check_idempotent(project, &xs)?;
        Ok(px.into_iter().map(|v| v / x_scale).collect())
    };

    let start = match solve_lp_regression(a, b, p, opts) {
        Ok(r) => r.x,
        Err(Error::ZeroRank) => vec![0.0; a.cols()],
        Err(e) => return Err(e),
    };
    let mut x = proj(&start.iter().map(|v| v / x_scale).collect::<Vec<_>>())?;
    let mut rho = an.residual(&x, &bn)?;
    let mut best_x = x.clone();
    let mut best_obj = lp_norm(&rho, p);
    let mut stages = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut mu = if p == 2.0 { opts.mu_min } else { opts.smoothing_mu0 };
    let budget = 20 * opts.max_iters;
    loop {
        let last = mu <= opts.mu_min;
        let mut t = 1.0;
        let mut history = vec![best_obj];
        for _ in 0..budget {
            let g = smoothed_gradient(&an, &rho, p, mu);
            let mut moved = false;
            let mut tt = 2.0 * t;
            for _ in 0..=40 {
                let cand = proj(&axpy(&x, -tt, &g))?;
                let step: Vec<f64> = cand.iter().zip(&x).map(|(a, b)| a - b).collect();
                let delta = an.mul_vec(&step)?;
                if smoothed_change(&rho, &delta, p, mu) < 0.0 {
                    x = cand;
                    rho = an.residual(&x, &bn)?;
                    moved = true;
                    break;
                }
                tt *= 0.5;
            }
            t = tt;
            iterations += 1;
            let obj = lp_norm(&rho, p);
            if obj < best_obj {
                best_obj = obj;
                best_x.clone_from(&x);
            }
            history.push(best_obj);
            let stable = history.len() > WINDOW
                && history[history.len() - 1 - WINDOW] - best_obj <= opts.grad_tol * best_obj.max(1e-300);
            if !moved || stable {
                if last {
                    converged = stable || !moved;
                }
                break;
            }
        }
        stages.push(best_obj);
        if last {
            break;
        }
        mu = (mu * opts.smoothing_shrink).max(opts.mu_min);
    }
    let x: DenseVector = best_x.iter().map(|v| v * x_scale).collect();
    let rc = an.residual(&best_x, &bn)?;
    let kkt = norm2(&smoothed_gradient(&an, &rc, p, opts.mu_min));
    Ok(finish(a, b, p, x, iterations, converged, kkt, stages))
}

/// Largest coordinate error of the analytic gradient of
/// `sum_i ((A x - b)_i^2 + mu^2)^(p/2)` against central differences with
/// step `h`, relative to the largest gradient entry.
pub fn objective_gradient_check(a: &DenseMatrix, b: &[f64], p: f64, x: &[f64], h: f64, mu: f64) -> Result<f64> {
    check_problem(a, b, p)?;
    if x.len() != a.cols() {
        return Err(Error::DimensionMismatch("x length differs from A columns".into()));
    }
    let rho = a.residual(x, b)?;
    let g = smoothed_gradient(a, &rho, p, mu);
    let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut worst = 0.0f64;
    for j in 0..x.len() {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[j] += h;
        xm[j] -= h;
        let fp = smoothed_value(&a.residual(&xp, b)?, p, mu);
        let fm = smoothed_value(&a.residual(&xm, b)?, p, mu);
        let fd = (fp - fm) / (2.0 * h);
        worst = worst.max((fd - g[j]).abs() / scale);
    }
    Ok(worst)
}

/// `sum_i |(A x - b)_i|^p`, the p-th power of the objective.
pub fn objective_pow(a: &DenseMatrix, b: &[f64], x: &[f64], p: f64) -> Result<f64> {
    Ok(a.residual(x, b)?.iter().map(|&r| abs_pow(r, p)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_matrix, gaussian_vec, rng_from};
    use approx::assert_relative_eq;

    fn ones_col(n: usize) -> DenseMatrix {
        DenseMatrix::new(n, 1, vec![1.0; n]).unwrap()
    }

    #[test]
    fn symmetric_two_row_examples() {
        let a = ones_col(2);
        let r = solve_lp_regression(&a, &[0.0, 2.0], 2.0, &SolverOptions::default()).unwrap();
        assert_relative_eq!(r.x[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(r.objective, 2f64.sqrt(), epsilon = 1e-14);
        let r = solve_lp_regression(&a, &[0.0, 2.0], 4.0, &SolverOptions::default()).unwrap();
        assert_relative_eq!(r.x[0], 1.0, epsilon = 1e-8);
        assert_relative_eq!(r.objective, 2f64.powf(0.25), max_relative = 1e-12);
        assert!(r.converged);
    }

    #[test]
    fn median_for_p1() {
        let a = ones_col(3);
        let r = solve_lp_regression(&a, &[0.0, 0.0, 10.0], 1.0, &SolverOptions::default()).unwrap();
        assert_relative_eq!(r.objective, 10.0, max_relative = 1e-6);
        assert!(r.x[0].abs() < 1e-5);
    }

    #[test]
    fn zero_rhs_returns_zero() {
        let a = gaussian_matrix(10, 3, 1);
        let r = solve_lp_regression(&a, &[0.0; 10], 1.5, &SolverOptions::default()).unwrap();
        assert_eq!(r.x, vec![0.0; 3]);
        assert_eq!(r.objective, 0.0);
    }

    #[test]
    fn input_errors() {
        let a = gaussian_matrix(4, 2, 2);
        let o = SolverOptions::default();
        assert!(matches!(solve_lp_regression(&a, &[1.0; 3], 1.0, &o), Err(Error::DimensionMismatch(_))));
        assert!(matches!(solve_lp_regression(&a, &[1.0; 4], 0.5, &o), Err(Error::InvalidExponent(_))));
        assert!(matches!(
            solve_lp_regression(&a, &[1.0, f64::NAN, 0.0, 0.0], 1.0, &o),
            Err(Error::NonFinite { row: 1, col: 0 })
        ));
        assert!(matches!(
            solve_lp_regression(&DenseMatrix::zeros(4, 2), &[1.0; 4], 1.0, &o),
            Err(Error::ZeroRank)
        ));
        let bad = SolverOptions { smoothing_shrink: 1.0, ..o };
        assert!(solve_lp_regression(&a, &[1.0; 4], 1.0, &bad).is_err());
    }

    #[test]
    fn consistent_system_is_recovered() {
        let a = gaussian_matrix(30, 3, 3);
        let xs = vec![1.0, -2.0, 0.5];
        let b = a.mul_vec(&xs).unwrap();
        for p in [1.0, 1.5, 3.0] {
            let r = solve_lp_regression(&a, &b, p, &SolverOptions::default()).unwrap();
            for (u, v) in r.x.iter().zip(&xs) {
                assert!((u - v).abs() < 1e-6, "p={p}");
            }
        }
    }

    #[test]
    fn stage_objectives_never_increase() {
        let a = gaussian_matrix(200, 4, 4);
        let mut rng = rng_from(5);
        let b = gaussian_vec(&mut rng, 200);
        for p in [1.0, 1.5, 3.0, 4.0] {
            let r = solve_lp_regression(&a, &b, p, &SolverOptions::default()).unwrap();
            for w in r.stage_objectives.windows(2) {
                assert!(w[1] <= w[0] + 1e-12);
            }
            assert!(r.converged, "p={p} kkt={}", r.kkt_residual);
        }
    }

    #[test]
    fn weighted_two_rows_match_closed_form() {
        // min 4 (x - 0)^2 + (x - 5)^2 -> x = 1.
        let a = ones_col(2);
        let r = solve_weighted(&a, &[0.0, 5.0], 2.0, &[4.0, 1.0], &SolverOptions::default()).unwrap();
        assert_relative_eq!(r.x[0], 1.0, max_relative = 1e-10);
        let unit = solve_weighted(&a, &[0.0, 5.0], 1.5, &[1.0, 1.0], &SolverOptions::default()).unwrap();
        let plain = solve_lp_regression(&a, &[0.0, 5.0], 1.5, &SolverOptions::default()).unwrap();
        assert_eq!(unit, plain);
        assert!(matches!(
            solve_weighted(&a, &[0.0, 5.0], 2.0, &[0.0, 0.0], &SolverOptions::default()),
            Err(Error::InvalidWeights(_))
        ));
    }

    #[test]
    fn nonnegativity_binds_in_one_dimension() {
        let a = ones_col(3);
        let r = solve_constrained(&a, &[-1.0, -2.0, -3.0], 1.5, &project_nonnegative, &SolverOptions::default())
            .unwrap();
        assert_eq!(r.x, vec![0.0]);
    }

    #[test]
    fn broken_projection_is_reported() {
        let a = ones_col(3);
        let bad = |x: &[f64]| -> DenseVector { x.iter().map(|v| v * 0.5).collect() };
        assert!(matches!(
            solve_constrained(&a, &[1.0, 2.0, 3.0], 2.0, &bad, &SolverOptions::default()),
            Err(Error::Projection(_))
        ));
    }

    #[test]
    fn quadratic_gradient_is_exact() {
        let a = gaussian_matrix(20, 3, 6);
        let mut rng = rng_from(7);
        let b = gaussian_vec(&mut rng, 20);
        let x = gaussian_vec(&mut rng, 3);
        assert!(objective_gradient_check(&a, &b, 2.0, &x, 1e-5, 0.0).unwrap() <= 1e-7);
    }
}

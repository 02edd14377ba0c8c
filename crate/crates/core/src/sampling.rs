//! Row sampling probabilities and reproducible Bernoulli sampling plans.
//!
//! A plan keeps row `i` with probability `p_i`, independently across rows, and
//! rescales kept rows by `p_i^(-1/p)` so that `E ||S y||_p^p = ||y||_p^p`.
//! Draws come from a counter-based generator keyed by `(seed, i)`.

use serde::{Deserialize, Serialize};

use crate::conditioning::WellConditionedBasis;
use crate::error::{Error, Result};
use crate::linalg::{abs_pow, lp_norm, scaled_masses, DenseMatrix, DenseVector};
use crate::rng::{gaussian_vec, rng_from, CounterUniform};

/// Exponent, rank and accuracy parameters that fix the sample-size formulas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub p: f64,
    pub d: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub r1_scale: f64,
    pub r2_scale: f64,
}

impl SamplerConfig {
    /// Unit scales and `delta = 0.5`.
    pub fn new(p: f64, d: usize, epsilon: f64) -> Self {
        Self {
            p,
            d,
            epsilon,
            delta: 0.5,
            r1_scale: 1.0,
            r2_scale: 1.0,
        }
    }

    pub fn with_scales(mut self, r1_scale: f64, r2_scale: f64) -> Self {
        self.r1_scale = r1_scale;
        self.r2_scale = r2_scale;
        self
    }

    /// `max(p/2 + 1, p)`.
    pub fn k(&self) -> f64 {
        (self.p / 2.0 + 1.0).max(self.p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p.is_finite() && self.p >= 1.0) {
            return Err(Error::InvalidExponent(self.p));
        }
        if self.d == 0 {
            return Err(Error::InvalidConfig("rank d must be at least 1".into()));
        }
        check_epsilon(self.epsilon)?;
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidConfig(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        for (name, v) in [("r1_scale", self.r1_scale), ("r2_scale", self.r2_scale)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

fn check_epsilon(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 / 7.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("epsilon must lie in (0, 1/7), got {eps}")))
    }
}

/// `r1_scale * 64 * 36^p * d^k * (d ln 288 + ln 200)`.
pub fn r1_default(cfg: &SamplerConfig) -> f64 {
    let d = cfg.d as f64;
    cfg.r1_scale * 64.0 * 36f64.powf(cfg.p) * d.powf(cfg.k()) * (d * 288f64.ln() + 200f64.ln())
}

/// `r2_scale * 36^p * d^k * (d ln(36/eps) + ln 200) / eps^2`.
pub fn r2_default(cfg: &SamplerConfig) -> Result<f64> {
    check_epsilon(cfg.epsilon)?;
    let d = cfg.d as f64;
    let e = cfg.epsilon;
    Ok(cfg.r2_scale * 36f64.powf(cfg.p) * d.powf(cfg.k()) * (d * (36.0 / e).ln() + 200f64.ln())
        / (e * e))
}

fn check_rate(r: f64) -> Result<()> {
    if r.is_nan() || r <= 0.0 {
        return Err(Error::InvalidConfig(format!("sampling rate must be positive, got {r}")));
    }
    Ok(())
}

/// Each row's share of the total p-th power mass of `m`. An all-zero matrix
/// gives all zeros.
pub fn mass_fractions(m: &DenseMatrix, p: f64) -> Vec<f64> {
    let masses = scaled_masses(m, p);
    let total: f64 = masses.iter().sum();
    if total == 0.0 {
        return masses;
    }
    masses.into_iter().map(|v| v / total).collect()
}

fn clamp_rate(fractions: &[f64], r: f64) -> Vec<f64> {
    fractions.iter().map(|&f| (r * f).min(1.0)).collect()
}

/// `p_i = min(1, r1 ||U_i||_p^p / |||U|||_p^p)`.
pub fn stage1_probabilities(u: &WellConditionedBasis, r1: f64) -> Result<Vec<f64>> {
    check_rate(r1)?;
    let f = mass_fractions(&u.u, u.p);
    if f.iter().all(|&v| v == 0.0) {
        return Err(Error::Degenerate("basis has zero p-norm".into()));
    }
    Ok(clamp_rate(&f, r1))
}

/// `q_i = min(1, max(p_i, r2 |rho_i|^p / ||rho||_p^p))`.
pub fn stage2_probabilities(p1: &[f64], residual: &[f64], p: f64, r2: f64) -> Result<Vec<f64>> {
    stage2_probabilities_rows(p1, &DenseMatrix::column(residual)?, p, r2)
}

/// Stage-2 probabilities for a residual matrix, using row p-norms:
/// `q_i = min(1, max(p_i, r2 ||rho_i||_p^p / |||rho|||_p^p))`.
pub fn stage2_probabilities_rows(p1: &[f64], residual: &DenseMatrix, p: f64, r2: f64) -> Result<Vec<f64>> {
    check_rate(r2)?;
    if p1.len() != residual.rows() {
        return Err(Error::DimensionMismatch(format!(
            "{} stage-1 probabilities against {} residual rows",
            p1.len(),
            residual.rows()
        )));
    }
    let f = mass_fractions(residual, p);
    if f.iter().all(|&v| v == 0.0) {
        return Err(Error::Degenerate("stage-2 probabilities need a nonzero residual".into()));
    }
    Ok(p1
        .iter()
        .zip(&f)
        .map(|(&pi, &fi)| pi.max(r2 * fi).min(1.0))
        .collect())
}

/// `p_i = min(1, r max(||U_i||_p^p / |||U|||_p^p, |rho_i|^p / Z^p))`, with the
/// residual term taken as zero when `Z = 0`.
pub fn oracle_probabilities(u: &WellConditionedBasis, rho_opt: &[f64], z: f64, r: f64) -> Result<Vec<f64>> {
    check_rate(r)?;
    if rho_opt.len() != u.u.rows() {
        return Err(Error::DimensionMismatch("residual length differs from basis rows".into()));
    }
    if !(z >= 0.0) {
        return Err(Error::InvalidConfig(format!("Z must be nonnegative, got {z}")));
    }
    let lev = mass_fractions(&u.u, u.p);
    Ok(lev
        .iter()
        .zip(rho_opt)
        .map(|(&l, &rho)| {
            let s = if z == 0.0 { 0.0 } else { abs_pow(rho / z, u.p) };
            (r * l.max(s)).min(1.0)
        })
        .collect())
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

/// `p_i = min(1, r1 w_i ||U_i||_p^p / |||U|||_{p,w}^p)`.
pub fn weighted_stage1_probabilities(u: &WellConditionedBasis, w: &[f64], r1: f64) -> Result<Vec<f64>> {
    check_rate(r1)?;
    check_weights(w, u.u.rows())?;
    let masses: Vec<f64> = scaled_masses(&u.u, u.p)
        .into_iter()
        .zip(w)
        .map(|(m, &wi)| wi * m)
        .collect();
    let total: f64 = masses.iter().sum();
    if total == 0.0 {
        return Err(Error::Degenerate("weighted basis has zero p-norm".into()));
    }
    Ok(masses.iter().map(|&m| (r1 * (m / total)).min(1.0)).collect())
}

/// Rate `r` with `sum_i min(1, r f_i) = target`, found by bisection. When the
/// target meets or exceeds the number of positive fractions, returns the
/// smallest rate that keeps every such row.
pub fn rate_for_expected_count(fractions: &[f64], target: f64) -> Result<f64> {
    let positive: Vec<f64> = fractions.iter().copied().filter(|&f| f > 0.0).collect();
    if positive.is_empty() || !(target > 0.0) {
        return Err(Error::InvalidConfig("no positive fractions or nonpositive target".into()));
    }
    let full = 1.0 / positive.iter().fold(f64::INFINITY, |m, &f| m.min(f));
    if target >= positive.len() as f64 {
        return Ok(full);
    }
    let count = |r: f64| -> f64 { positive.iter().map(|&f| (r * f).min(1.0)).sum() };
    let (mut lo, mut hi) = (0.0, full);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if count(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// A realized diagonal sampling operator, stored as the kept rows and
/// their scales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub probs: Vec<f64>,
    pub realized_indices: Vec<usize>,
    pub scales: Vec<f64>,
    pub seed: u64,
    pub expected_count: f64,
    pub actual_count: usize,
}

impl SamplingPlan {
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Independent Bernoulli draws: row `i` is kept when `u(seed, i) < probs[i]`
/// and then carries scale `probs[i]^(-1/p)`.
pub fn realize_sample(probs: &[f64], p: f64, seed: u64) -> Result<SamplingPlan> {
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::InvalidExponent(p));
    }
    if let Some((i, v)) = probs.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidConfig(format!("probability {v} at row {i} is outside [0, 1]")));
    }
    let mut draws = CounterUniform::new(seed);
    let mut realized_indices = Vec::new();
    let mut scales = Vec::new();
    for (i, &pi) in probs.iter().enumerate() {
        if pi > 0.0 && draws.at(i) < pi {
            realized_indices.push(i);
            scales.push(if pi == 1.0 { 1.0 } else { pi.powf(-1.0 / p) });
        }
    }
    Ok(SamplingPlan {
        probs: probs.to_vec(),
        actual_count: realized_indices.len(),
        realized_indices,
        scales,
        seed,
        expected_count: probs.iter().sum(),
    })
}

/// `S M` as the kept rows of `M`, each multiplied by its scale.
pub fn apply_plan_rows(plan: &SamplingPlan, m: &DenseMatrix) -> Result<DenseMatrix> {
    if plan.len() != m.rows() {
        return Err(Error::DimensionMismatch(format!(
            "plan covers {} rows, matrix has {}",
            plan.len(),
            m.rows()
        )));
    }
    Ok(m.select_rows_scaled(&plan.realized_indices, &plan.scales))
}

/// `(S M, S v)`.
pub fn apply_plan(plan: &SamplingPlan, m: &DenseMatrix, v: &[f64]) -> Result<(DenseMatrix, DenseVector)> {
    if v.len() != m.rows() {
        return Err(Error::DimensionMismatch("vector length differs from matrix rows".into()));
    }
    let sm = apply_plan_rows(plan, m)?;
    let sv = plan
        .realized_indices
        .iter()
        .zip(&plan.scales)
        .map(|(&i, &s)| v[i] * s)
        .collect();
    Ok((sm, sv))
}

/// Largest `| ||S A x||_p - ||A x||_p | / ||A x||_p` over `x_samples`
/// Gaussian directions.
pub fn measure_distortion(a: &DenseMatrix, plan: &SamplingPlan, p: f64, x_samples: usize, seed: u64) -> Result<f64> {
    let sa = apply_plan_rows(plan, a)?;
    if a.max_abs() == 0.0 {
        return Err(Error::Degenerate("A x = 0 for every x".into()));
    }
    let mut rng = rng_from(seed);
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < x_samples {
        let x = gaussian_vec(&mut rng, a.cols());
        let full = lp_norm(&a.mul_vec(&x)?, p);
        if full == 0.0 {
            continue;
        }
        let sampled = lp_norm(&sa.mul_vec(&x)?, p);
        worst = worst.max((sampled - full).abs() / full);
        done += 1;
    }
    Ok(worst)
}

//! The two-stage sampling algorithm, its single-stage variants, and the Monte
//! Carlo statistics used to check the approximation guarantees.
//!
//! Stage 1 samples rows by the p-th powers of the row norms of a
//! well-conditioned basis and solves the sample; its solution is a
//! constant-factor approximation. Stage 2 adds rows in proportion to the
//! stage-1 residual and solves a fresh, independent sample; its solution is
//! a `(1 + eps)`-approximation, and the stage-2 rows form the coreset.
//!
//! Every variant works on the same internal shape: a right-hand side matrix
//! `B` with `k >= 1` columns and, when weights are present, rows scaled by
//! `w_i^(1/p)`. A vector problem is the case `k = 1` and an unweighted
//! problem is the case without scaling, so the reductions between variants
//! hold exactly.

use std::collections::BTreeMap;
use std::sync::OnceLock;
use std::time::Instant;

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditioning::{well_conditioned_basis, WellConditionedBasis, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::linalg::{lp_norm, numeric_rank, DenseMatrix, DenseVector, DEFAULT_RANK_TOL};
use crate::rng::{derive_indexed, derive_seed, gaussian_matrix, gaussian_vec, rng_from};
use crate::sampling::{
    apply_plan_rows, oracle_probabilities, r1_default, r2_default, realize_sample, stage1_probabilities,
    stage2_probabilities_rows, SamplerConfig, SamplingPlan,
};
use crate::solver::{solve_multi_rhs, weight_row_scales, SolverOptions};

/// Resamples allowed after a rank-deficient sample, per stage.
pub const MAX_RESAMPLES: usize = 5;

/// Residuals at or below this fraction of `max(1, |||B|||_p)` count as zero.
pub const ZERO_RESIDUAL_TOL: f64 = 1e-12;

/// Exact baselines are skipped by default above this many entries of `A`.
pub const DEFAULT_EXACT_LIMIT: usize = 10_000_000;

/// An `lp` regression problem `min ||A x - b||_p`, or its generalized form
/// `min |||A X - B|||_p`, optionally under a weighted norm.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionInstance {
    a: DenseMatrix,
    b: DenseMatrix,
    p: f64,
    weights: Option<Vec<f64>>,
    d: usize,
    vector: bool,
}

impl RegressionInstance {
    pub fn new(a: DenseMatrix, b: DenseVector, p: f64) -> Result<Self> {
        let b = DenseMatrix::column(&b)?;
        let mut inst = Self::generalized(a, b, p)?;
        inst.vector = true;
        Ok(inst)
    }

    /// Multi-column right-hand side.
    pub fn generalized(a: DenseMatrix, b: DenseMatrix, p: f64) -> Result<Self> {
        if !(p.is_finite() && p >= 1.0) {
            return Err(Error::InvalidExponent(p));
        }
        if a.rows() != b.rows() {
            return Err(Error::DimensionMismatch(format!(
                "A has {} rows but the right-hand side has {}",
                a.rows(),
                b.rows()
            )));
        }
        if b.cols() == 0 {
            return Err(Error::DimensionMismatch("right-hand side has no columns".into()));
        }
        let d = numeric_rank(&a, DEFAULT_RANK_TOL)?;
        if d == 0 {
            return Err(Error::ZeroRank);
        }
        Ok(Self {
            a,
            b,
            p,
            weights: None,
            d,
            vector: false,
        })
    }

    pub fn with_weights(mut self, w: Vec<f64>) -> Result<Self> {
        if w.len() != self.n() {
            return Err(Error::DimensionMismatch(format!("{} weights for {} rows", w.len(), self.n())));
        }
        if let Some(v) = w.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidWeights(format!("weights must be finite and nonnegative, got {v}")));
        }
        if w.iter().all(|&v| v == 0.0) {
            return Err(Error::InvalidWeights("all weights are zero".into()));
        }
        self.weights = Some(w);
        Ok(self)
    }

    pub fn a(&self) -> &DenseMatrix {
        &self.a
    }

    /// Right-hand side as an `n x k` matrix.
    pub fn b(&self) -> &DenseMatrix {
        &self.b
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn m(&self) -> usize {
        self.a.cols()
    }

    /// Numeric rank of `A`.
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn rhs_cols(&self) -> usize {
        self.b.cols()
    }

    /// True when built from a right-hand side vector.
    pub fn is_vector(&self) -> bool {
        self.vector
    }

    /// `(W^(1/p) A, W^(1/p) B)`, or clones without weights.
    fn working(&self) -> Result<(DenseMatrix, DenseMatrix)> {
        match &self.weights {
            None => Ok((self.a.clone(), self.b.clone())),
            Some(w) => {
                let s = weight_row_scales(w, self.p);
                Ok((self.a.scale_rows(&s)?, self.b.scale_rows(&s)?))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExactBaseline {
    /// Only when `n * m` is within the configured limit.
    Auto,
    Always,
    Never,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub epsilon: f64,
    pub delta: f64,
    pub r1_scale: f64,
    pub r2_scale: f64,
    pub rounding_tol: f64,
    /// 1 stops after the constant-factor stage.
    pub stages: u8,
    pub exact: ExactBaseline,
    pub exact_limit: usize,
    pub solver: SolverOptions,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            delta: 0.5,
            r1_scale: 1.0,
            r2_scale: 1.0,
            rounding_tol: DEFAULT_TOL,
            stages: 2,
            exact: ExactBaseline::Auto,
            exact_limit: DEFAULT_EXACT_LIMIT,
            solver: SolverOptions::default(),
        }
    }
}

impl PipelineConfig {
    pub fn with_scales(mut self, r1_scale: f64, r2_scale: f64) -> Self {
        self.r1_scale = r1_scale;
        self.r2_scale = r2_scale;
        self
    }

    pub fn sampler(&self, p: f64, d: usize) -> SamplerConfig {
        SamplerConfig {
            p,
            d,
            epsilon: self.epsilon,
            delta: self.delta,
            r1_scale: self.r1_scale,
            r2_scale: self.r2_scale,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages != 1 && self.stages != 2 {
            return Err(Error::InvalidConfig(format!("stages must be 1 or 2, got {}", self.stages)));
        }
        self.sampler(1.0, 1).validate()?;
        self.solver.validate()
    }

    fn wants_exact(&self, inst: &RegressionInstance) -> bool {
        match self.exact {
            ExactBaseline::Always => true,
            ExactBaseline::Never => false,
            ExactBaseline::Auto => inst.n().saturating_mul(inst.m()) <= self.exact_limit,
        }
    }
}

/// One realized and solved sample.
#[derive(Debug, Clone, PartialEq)]
pub struct StageOutcome {
    pub stage: u8,
    /// `None` when stage 2 passed the stage-1 solution through.
    pub plan: Option<SamplingPlan>,
    /// `m x k`.
    pub x_hat: DenseMatrix,
    /// `A x_hat - B` on the full (weighted) data.
    pub residual: DenseMatrix,
    pub sampled_objective: f64,
    pub full_objective: f64,
    pub attempts: usize,
    pub exact_passthrough: bool,
}

impl StageOutcome {
    /// First column of `x_hat`.
    pub fn x_vec(&self) -> DenseVector {
        self.x_hat.col(0)
    }
}

fn sample_and_solve(
    a: &DenseMatrix,
    b: &DenseMatrix,
    probs: &[f64],
    p: f64,
    d: usize,
    stage: u8,
    seed: u64,
    opts: &SolverOptions,
) -> Result<StageOutcome> {
    let mut reason = String::new();
    for attempt in 0..=MAX_RESAMPLES {
        let plan = realize_sample(probs, p, derive_indexed(seed, "attempt", attempt as u64))?;
        let sa = apply_plan_rows(&plan, a)?;
        let rank = if sa.rows() == 0 { 0 } else { numeric_rank(&sa, DEFAULT_RANK_TOL)? };
        if rank < d {
            reason = format!("sample of {} rows has rank {rank} < {d}", sa.rows());
            continue;
        }
        let sb = apply_plan_rows(&plan, b)?;
        let sol = solve_multi_rhs(&sa, &sb, p, opts)?;
        let residual = a.matmul(&sol.x)?.sub(b)?;
        let full_objective = lp_norm(residual.as_slice(), p);
        return Ok(StageOutcome {
            stage,
            plan: Some(plan),
            x_hat: sol.x,
            residual,
            sampled_objective: sol.objective,
            full_objective,
            attempts: attempt + 1,
            exact_passthrough: false,
        });
    }
    Err(Error::StageFailure {
        stage,
        attempts: MAX_RESAMPLES + 1,
        reason,
    })
}

/// Exact solution of the full (weighted) problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactSolution {
    pub x: DenseMatrix,
    pub z: f64,
}

/// Both stages of one seeded run.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoStageRun {
    pub seed: u64,
    pub stage1: StageOutcome,
    pub stage2: Option<StageOutcome>,
    pub timings_ms: BTreeMap<String, f64>,
}

impl TwoStageRun {
    pub fn final_stage(&self) -> &StageOutcome {
        self.stage2.as_ref().unwrap_or(&self.stage1)
    }
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// The conditioned, per-instance part of the two-stage algorithm. Build once
/// and run many seeds; the basis and exact baseline are shared.
pub struct TwoStageSolver<'a> {
    inst: &'a RegressionInstance,
    cfg: PipelineConfig,
    a: DenseMatrix,
    b: DenseMatrix,
    basis: WellConditionedBasis,
    sampler: SamplerConfig,
    p1: Vec<f64>,
    r1: f64,
    r2: f64,
    conditioning_ms: f64,
    exact: OnceLock<std::result::Result<ExactSolution, Error>>,
}

impl<'a> TwoStageSolver<'a> {
    pub fn new(inst: &'a RegressionInstance, cfg: &PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        let (a, b) = inst.working()?;
        let t = Instant::now();
        let basis = well_conditioned_basis(&a, inst.p, cfg.rounding_tol)?;
        let conditioning_ms = ms_since(t);
        let sampler = cfg.sampler(inst.p, basis.rank());
        sampler.validate()?;
        let r1 = r1_default(&sampler);
        let r2 = r2_default(&sampler)?;
        let p1 = stage1_probabilities(&basis, r1)?;
        Ok(Self {
            inst,
            cfg: *cfg,
            a,
            b,
            basis,
            sampler,
            p1,
            r1,
            r2,
            conditioning_ms,
            exact: OnceLock::new(),
        })
    }

    pub fn basis(&self) -> &WellConditionedBasis {
        &self.basis
    }

    pub fn sampler(&self) -> &SamplerConfig {
        &self.sampler
    }

    pub fn stage1_probabilities(&self) -> &[f64] {
        &self.p1
    }

    pub fn rates(&self) -> (f64, f64) {
        (self.r1, self.r2)
    }

    /// Rank of the (weighted) design matrix.
    pub fn d(&self) -> usize {
        self.basis.rank()
    }

    /// `|||B|||_p` on the (weighted) data.
    pub fn rhs_norm(&self) -> f64 {
        lp_norm(self.b.as_slice(), self.inst.p)
    }

    /// Solves the full (weighted) problem once and caches it.
    pub fn exact(&self) -> Result<&ExactSolution> {
        self.exact
            .get_or_init(|| {
                let sol = solve_multi_rhs(&self.a, &self.b, self.inst.p, &self.cfg.solver)?;
                Ok(ExactSolution {
                    x: sol.x,
                    z: sol.objective,
                })
            })
            .as_ref()
            .map_err(Clone::clone)
    }

    pub fn stage_one(&self, seed: u64) -> Result<StageOutcome> {
        sample_and_solve(
            &self.a,
            &self.b,
            &self.p1,
            self.inst.p,
            self.d(),
            1,
            derive_seed(seed, "stage1"),
            &self.cfg.solver,
        )
    }

    pub fn stage_two(&self, stage1: &StageOutcome, seed: u64) -> Result<StageOutcome> {
        let p = self.inst.p;
        let norm = lp_norm(stage1.residual.as_slice(), p);
        if norm <= ZERO_RESIDUAL_TOL * self.rhs_norm().max(1.0) {
            return Ok(StageOutcome {
                stage: 2,
                plan: None,
                attempts: 0,
                exact_passthrough: true,
                ..stage1.clone()
            });
        }
        let q = stage2_probabilities_rows(&self.p1, &stage1.residual, p, self.r2)?;
        sample_and_solve(&self.a, &self.b, &q, p, self.d(), 2, derive_seed(seed, "stage2"), &self.cfg.solver)
    }

    pub fn run(&self, seed: u64) -> Result<TwoStageRun> {
        let mut timings = BTreeMap::new();
        let t = Instant::now();
        let stage1 = self.stage_one(seed)?;
        timings.insert("stage1".to_string(), ms_since(t));
        let stage2 = if self.cfg.stages == 2 {
            let t = Instant::now();
            let s2 = self.stage_two(&stage1, seed)?;
            timings.insert("stage2".to_string(), ms_since(t));
            Some(s2)
        } else {
            None
        };
        Ok(TwoStageRun {
            seed,
            stage1,
            stage2,
            timings_ms: timings,
        })
    }

    /// Runs one seed and packages it as a report; failures become failed
    /// reports rather than errors.
    pub fn report(&self, seed: u64, variant: Variant) -> SolveReport {
        let mut report = SolveReport::skeleton(self.inst, &self.cfg, seed, variant);
        report.d = self.d();
        report.conditioning = Some(ConditioningSummary::from(&self.basis));
        report.config.r1 = Some(self.r1);
        report.config.r2 = Some(self.r2);
        report.timings_ms.insert("conditioning".into(), self.conditioning_ms);
        match self.run(seed) {
            Ok(run) => {
                report.timings_ms.extend(run.timings_ms.clone());
                report.stage1 = Some(StageSummary::from_outcome(&run.stage1, run.stage2.is_none()));
                report.stage2 = run.stage2.as_ref().map(|s| StageSummary::from_outcome(s, true));
                report.finish_ok(run.final_stage());
                self.attach_exact(&mut report);
            }
            Err(e) => report.fail(&e),
        }
        report
    }

    fn attach_exact(&self, report: &mut SolveReport) {
        if !self.cfg.wants_exact(self.inst) {
            return;
        }
        let t = Instant::now();
        match self.exact() {
            Ok(ex) => {
                report.timings_ms.insert("exact".into(), ms_since(t));
                report.set_exact(ex.z);
            }
            Err(e) => report.fail(&e),
        }
    }
}

/// Which algorithm produced a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    TwoStage,
    Oracle,
    Augmented,
    Generalized,
    Weighted,
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::TwoStage => "two-stage",
            Variant::Oracle => "oracle",
            Variant::Augmented => "augmented",
            Variant::Generalized => "generalized",
            Variant::Weighted => "weighted",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub expected_count: f64,
    pub actual_count: usize,
    pub objective_full: f64,
    pub objective_sampled: f64,
    pub attempts: usize,
    pub exact_passthrough: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coreset_indices: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scales: Option<Vec<f64>>,
}

impl StageSummary {
    fn from_outcome(s: &StageOutcome, coreset: bool) -> Self {
        let (expected, actual, idx, scales) = match &s.plan {
            Some(plan) => (
                plan.expected_count,
                plan.actual_count,
                plan.realized_indices.clone(),
                plan.scales.clone(),
            ),
            None => (0.0, 0, Vec::new(), Vec::new()),
        };
        Self {
            expected_count: expected,
            actual_count: actual,
            objective_full: s.full_objective,
            objective_sampled: s.sampled_objective,
            attempts: s.attempts,
            exact_passthrough: s.exact_passthrough,
            coreset_indices: coreset.then_some(idx),
            scales: coreset.then_some(scales),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditioningSummary {
    pub alpha_cert: f64,
    pub beta_cert: f64,
    pub kappa: f64,
    pub rounding_iterations: usize,
    pub converged: bool,
    pub warnings: Vec<String>,
}

impl From<&WellConditionedBasis> for ConditioningSummary {
    fn from(w: &WellConditionedBasis) -> Self {
        Self {
            alpha_cert: w.alpha_cert,
            beta_cert: w.beta_cert,
            kappa: w.kappa_cert,
            rounding_iterations: w.rounding_iterations,
            converged: w.converged,
            warnings: w.warnings.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub variant: Variant,
    pub stages: u8,
    pub delta: f64,
    pub r1_scale: f64,
    pub r2_scale: f64,
    pub rounding_tol: f64,
    pub exact: ExactBaseline,
    pub weighted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r2: Option<f64>,
    /// Single-stage sampling rate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    pub solver: SolverOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub k: usize,
    pub p: f64,
    pub epsilon: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conditioning: Option<ConditioningSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage1: Option<StageSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage2: Option<StageSummary>,
    /// Final solution, column-major `m x k`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_hat: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    #[serde(rename = "Z_exact", default, skip_serializing_if = "Option::is_none")]
    pub z_exact: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub approx_ratio: Option<f64>,
    pub timings_ms: BTreeMap<String, f64>,
    pub config: ConfigEcho,
}

impl SolveReport {
    fn skeleton(inst: &RegressionInstance, cfg: &PipelineConfig, seed: u64, variant: Variant) -> Self {
        Self {
            status: "ok".into(),
            error: None,
            n: inst.n(),
            m: inst.m(),
            d: inst.d(),
            k: inst.rhs_cols(),
            p: inst.p(),
            epsilon: cfg.epsilon,
            seed,
            conditioning: None,
            stage1: None,
            stage2: None,
            x_hat: None,
            objective: None,
            z_exact: None,
            approx_ratio: None,
            timings_ms: BTreeMap::new(),
            config: ConfigEcho {
                variant,
                stages: cfg.stages,
                delta: cfg.delta,
                r1_scale: cfg.r1_scale,
                r2_scale: cfg.r2_scale,
                rounding_tol: cfg.rounding_tol,
                exact: cfg.exact,
                weighted: inst.weights().is_some(),
                r1: None,
                r2: None,
                r: None,
                solver: cfg.solver,
            },
        }
    }

    fn finish_ok(&mut self, last: &StageOutcome) {
        let x = &last.x_hat;
        self.x_hat = Some((0..x.cols()).flat_map(|j| x.col(j)).collect());
        self.objective = Some(last.full_objective);
    }

    fn set_exact(&mut self, z: f64) {
        self.z_exact = Some(z);
        if let Some(obj) = self.objective {
            if z > 0.0 {
                self.approx_ratio = Some(obj / z);
            }
        }
    }

    fn fail(&mut self, e: &Error) {
        self.status = "failed".into();
        self.error = Some(e.to_string());
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    /// A copy with wall-clock timings removed, for comparisons.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        r.timings_ms.clear();
        r
    }
}

fn failed_report(inst: &RegressionInstance, cfg: &PipelineConfig, seed: u64, variant: Variant, e: &Error) -> SolveReport {
    let mut r = SolveReport::skeleton(inst, cfg, seed, variant);
    r.fail(e);
    r
}

/// Stage 1 alone on a freshly conditioned instance.
pub fn stage_one(inst: &RegressionInstance, cfg: &PipelineConfig, seed: u64) -> Result<StageOutcome> {
    TwoStageSolver::new(inst, cfg)?.stage_one(seed)
}

/// Stage 2 given a stage-1 outcome on the same instance.
pub fn stage_two(inst: &RegressionInstance, stage1: &StageOutcome, cfg: &PipelineConfig, seed: u64) -> Result<StageOutcome> {
    TwoStageSolver::new(inst, cfg)?.stage_two(stage1, seed)
}

/// Both stages; `compute_exact` forces or suppresses the exact baseline.
pub fn two_stage_solve(inst: &RegressionInstance, cfg: &PipelineConfig, seed: u64, compute_exact: bool) -> SolveReport {
    let cfg = PipelineConfig {
        exact: if compute_exact { ExactBaseline::Always } else { ExactBaseline::Never },
        ..*cfg
    };
    run_variant(inst, &cfg, seed, Variant::TwoStage)
}

/// Two stages under `variant`, turning construction errors into failed reports.
pub fn run_variant(inst: &RegressionInstance, cfg: &PipelineConfig, seed: u64, variant: Variant) -> SolveReport {
    match TwoStageSolver::new(inst, cfg) {
        Ok(s) => s.report(seed, variant),
        Err(e) => failed_report(inst, cfg, seed, variant, &e),
    }
}

/// Two stages on a multi-column right-hand side; stage 2 uses the row
/// p-norms of the residual matrix.
pub fn generalized_two_stage(inst: &RegressionInstance, cfg: &PipelineConfig, seed: u64) -> SolveReport {
    run_variant(inst, cfg, seed, Variant::Generalized)
}

/// Two stages under the weighted norm `(sum w_i |y_i|^p)^(1/p)`.
pub fn weighted_two_stage(inst: &RegressionInstance, cfg: &PipelineConfig, seed: u64) -> SolveReport {
    if inst.weights().is_none() {
        let e = Error::InvalidWeights("instance has no weights".into());
        return failed_report(inst, cfg, seed, Variant::Weighted, &e);
    }
    run_variant(inst, cfg, seed, Variant::Weighted)
}

fn single_stage_report(
    inst: &RegressionInstance,
    cfg: &PipelineConfig,
    seed: u64,
    variant: Variant,
    build: impl FnOnce(&DenseMatrix, &DenseMatrix) -> Result<(WellConditionedBasis, Vec<f64>, f64)>,
) -> SolveReport {
    let mut report = SolveReport::skeleton(inst, cfg, seed, variant);
    let result = (|| -> Result<()> {
        cfg.validate()?;
        let (a, b) = inst.working()?;
        let d = numeric_rank(&a, DEFAULT_RANK_TOL)?;
        report.d = d;
        let t = Instant::now();
        let (basis, probs, r) = build(&a, &b)?;
        report.timings_ms.insert("conditioning".into(), ms_since(t));
        report.conditioning = Some(ConditioningSummary::from(&basis));
        report.config.r = Some(r);
        let t = Instant::now();
        let out = sample_and_solve(&a, &b, &probs, inst.p, d, 1, derive_seed(seed, variant.name()), &cfg.solver)?;
        report.timings_ms.insert("stage1".into(), ms_since(t));
        report.stage1 = Some(StageSummary::from_outcome(&out, true));
        report.finish_ok(&out);
        if cfg.wants_exact(inst) {
            let t = Instant::now();
            let ex = solve_multi_rhs(&a, &b, inst.p, &cfg.solver)?;
            report.timings_ms.insert("exact".into(), ms_since(t));
            report.set_exact(ex.objective);
        }
        Ok(())
    })();
    if let Err(e) = result {
        report.fail(&e);
    }
    report
}

fn default_rate(cfg: &PipelineConfig, p: f64, d: usize) -> Result<f64> {
    let s = cfg.sampler(p, d);
    s.validate()?;
    r2_default(&s)
}

/// One sample with probabilities built from both the basis rows and the
/// residual of a reference solution `x_ref`. `r` defaults to the stage-2
/// rate.
pub fn single_stage_oracle_solve(
    inst: &RegressionInstance,
    x_ref: &DenseMatrix,
    cfg: &PipelineConfig,
    r: Option<f64>,
    seed: u64,
) -> SolveReport {
    single_stage_report(inst, cfg, seed, Variant::Oracle, |a, b| {
        if x_ref.shape() != (inst.m(), inst.rhs_cols()) {
            return Err(Error::DimensionMismatch("x_ref does not match the instance".into()));
        }
        if b.cols() != 1 {
            return Err(Error::DimensionMismatch("oracle sampling needs a single right-hand side".into()));
        }
        let basis = well_conditioned_basis(a, inst.p, cfg.rounding_tol)?;
        let r = match r {
            Some(r) => r,
            None => default_rate(cfg, inst.p, basis.rank())?,
        };
        let rho = a.matmul(x_ref)?.sub(b)?.col(0);
        let z = lp_norm(&rho, inst.p);
        let probs = oracle_probabilities(&basis, &rho, z, r)?;
        Ok((basis, probs, r))
    })
}

/// One sample by the row norms of a well-conditioned basis for `[A B]`.
/// `r` defaults to the stage-2 rate.
pub fn single_stage_augmented_solve(inst: &RegressionInstance, cfg: &PipelineConfig, r: Option<f64>, seed: u64) -> SolveReport {
    single_stage_report(inst, cfg, seed, Variant::Augmented, |a, b| {
        let basis = well_conditioned_basis(&a.hstack(b)?, inst.p, cfg.rounding_tol)?;
        let r = match r {
            Some(r) => r,
            None => default_rate(cfg, inst.p, basis.rank())?,
        };
        let probs = stage1_probabilities(&basis, r)?;
        Ok((basis, probs, r))
    })
}

/// Empirical frequencies of the intermediate events behind the two-stage
/// guarantee, over many seeds of one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaStatistics {
    pub n_seeds: usize,
    pub failures: usize,
    pub p: f64,
    pub epsilon: f64,
    pub z_exact: f64,
    /// `|||S (A X_opt - B)|||_p <= 3 Z`.
    pub freq_a: f64,
    /// Stage-1 objective `<= 8 Z`.
    pub freq_b: f64,
    /// `|||T (A X_opt - B)|||_p <= (1 + eps) Z`.
    pub freq_c: f64,
    /// `|||A (X_final - X_stage1)|||_p <= 12 Z`.
    pub freq_d: f64,
    /// Final objective `<= (1 + 7 eps) Z`.
    pub freq_e: f64,
    /// `1 - 1/3^p`.
    pub target_a: f64,
    pub median_ratio: f64,
    pub median_stage1_ratio: f64,
    pub expected_stage1_count: f64,
    pub mean_stage1_count: f64,
    pub mean_stage2_expected: f64,
    pub mean_stage2_count: f64,
    /// Final ratio per seed; failed seeds are omitted.
    pub ratios: Vec<f64>,
}

/// Median of the finite values, NaN when there are none.
pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

struct SeedEvents {
    flags: [bool; 5],
    ratio: f64,
    stage1_ratio: f64,
    stage1_count: usize,
    stage2_expected: f64,
    stage2_count: usize,
}

impl TwoStageSolver<'_> {
    /// Lemma statistics over seeds `derive_indexed(base_seed, "lemma", k)`.
    pub fn lemma_statistics(&self, n_seeds: usize, base_seed: u64) -> Result<LemmaStatistics> {
        let p = self.inst.p;
        let eps = self.cfg.epsilon;
        let ex = self.exact()?;
        let z = ex.z;
        let rho_opt = self.a.matmul(&ex.x)?.sub(&self.b)?;
        // Absolute slack for comparisons against Z near zero.
        let slack = 1e-12 * self.rhs_norm().max(1.0);
        let le = |v: f64, bound: f64| v <= bound * (1.0 + 1e-9) + slack;
        let sampled_norm = |plan: &SamplingPlan| -> Result<f64> {
            Ok(lp_norm(apply_plan_rows(plan, &rho_opt)?.as_slice(), p))
        };

        let events: Vec<Option<SeedEvents>> = (0..n_seeds)
            .into_par_iter()
            .map(|k| -> Result<Option<SeedEvents>> {
                let run = match self.run(derive_indexed(base_seed, "lemma", k as u64)) {
                    Ok(run) => run,
                    Err(Error::StageFailure { .. }) => return Ok(None),
                    Err(e) => return Err(e),
                };
                let s1 = &run.stage1;
                let fin = run.final_stage();
                let plan1 = s1.plan.as_ref().expect("stage 1 always samples");
                let a_ok = le(sampled_norm(plan1)?, 3.0 * z);
                let b_ok = le(s1.full_objective, 8.0 * z);
                let (c_ok, s2_expected, s2_count) = match run.stage2.as_ref().and_then(|s| s.plan.as_ref()) {
                    Some(plan2) => (le(sampled_norm(plan2)?, (1.0 + eps) * z), plan2.expected_count, plan2.actual_count),
                    None => (true, 0.0, 0),
                };
                let diff = self.a.matmul(&fin.x_hat.sub(&s1.x_hat)?)?;
                let d_ok = le(lp_norm(diff.as_slice(), p), 12.0 * z);
                let e_ok = le(fin.full_objective, (1.0 + 7.0 * eps) * z);
                let ratio = |v: f64| if z > 0.0 { v / z } else if v <= slack { 1.0 } else { f64::INFINITY };
                Ok(Some(SeedEvents {
                    flags: [a_ok, b_ok, c_ok, d_ok, e_ok],
                    ratio: ratio(fin.full_objective),
                    stage1_ratio: ratio(s1.full_objective),
                    stage1_count: plan1.actual_count,
                    stage2_expected: s2_expected,
                    stage2_count: s2_count,
                }))
            })
            .collect::<Result<Vec<_>>>()?;

        let ok: Vec<&SeedEvents> = events.iter().flatten().collect();
        let total = n_seeds.max(1) as f64;
        let freq = |j: usize| ok.iter().filter(|e| e.flags[j]).count() as f64 / total;
        let mean = |f: &dyn Fn(&SeedEvents) -> f64| {
            if ok.is_empty() {
                f64::NAN
            } else {
                ok.iter().map(|e| f(e)).sum::<f64>() / ok.len() as f64
            }
        };
        let ratios: Vec<f64> = ok.iter().map(|e| e.ratio).collect();
        let stage1_ratios: Vec<f64> = ok.iter().map(|e| e.stage1_ratio).collect();
        Ok(LemmaStatistics {
            n_seeds,
            failures: n_seeds - ok.len(),
            p,
            epsilon: eps,
            z_exact: z,
            freq_a: freq(0),
            freq_b: freq(1),
            freq_c: freq(2),
            freq_d: freq(3),
            freq_e: freq(4),
            target_a: 1.0 - 3f64.powf(-p),
            median_ratio: median(&ratios),
            median_stage1_ratio: median(&stage1_ratios),
            expected_stage1_count: self.p1.iter().sum(),
            mean_stage1_count: mean(&|e| e.stage1_count as f64),
            mean_stage2_expected: mean(&|e| e.stage2_expected),
            mean_stage2_count: mean(&|e| e.stage2_count as f64),
            ratios,
        })
    }
}

/// Lemma statistics for `n_seeds` seeds derived from `base_seed`.
pub fn lemma_statistics(inst: &RegressionInstance, cfg: &PipelineConfig, n_seeds: usize, base_seed: u64) -> Result<LemmaStatistics> {
    TwoStageSolver::new(inst, cfg)?.lemma_statistics(n_seeds, base_seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseModel {
    /// Unit Gaussian noise on every row, plus the gross corruptions.
    Gaussian,
    /// Gross corruptions only; the other rows are fit exactly by `x*`.
    SparseGross,
}

/// A planted instance from the reference family.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceInstance {
    pub instance: RegressionInstance,
    pub x_star: DenseVector,
    /// Sorted indices of the corrupted rows.
    pub corrupted: Vec<usize>,
    pub noise: NoiseModel,
    pub rho: f64,
    pub seed: u64,
}

/// `A` is `n x d` standard Gaussian and `x* = (1, ..., 1)`. Exactly
/// `floor(rho n)` rows, chosen uniformly, get `+-10 ||A x*||_inf` added to
/// `b = A x*`, and the Gaussian model also adds unit noise to every row.
pub fn reference_instance(n: usize, d: usize, p: f64, rho: f64, noise: NoiseModel, seed: u64) -> Result<ReferenceInstance> {
    if d == 0 || n <= d {
        return Err(Error::InvalidConfig(format!("need n > d >= 1, got n = {n}, d = {d}")));
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidConfig(format!("corruption fraction must lie in [0, 1], got {rho}")));
    }
    let a = gaussian_matrix(n, d, derive_seed(seed, "design"));
    let x_star = vec![1.0; d];
    let mut b = a.mul_vec(&x_star)?;
    let spike = 10.0 * b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if noise == NoiseModel::Gaussian {
        let e = gaussian_vec(&mut rng_from(derive_seed(seed, "noise")), n);
        b.iter_mut().zip(e).for_each(|(bi, ei)| *bi += ei);
    }
    let count = (rho * n as f64).floor() as usize;
    let mut rng = rng_from(derive_seed(seed, "corruption"));
    let mut corrupted = sample(&mut rng, n, count).into_vec();
    corrupted.sort_unstable();
    for &i in &corrupted {
        b[i] += if rng.random::<bool>() { spike } else { -spike };
    }
    Ok(ReferenceInstance {
        instance: RegressionInstance::new(a, b, p)?,
        x_star,
        corrupted,
        noise,
        rho,
        seed,
    })
}

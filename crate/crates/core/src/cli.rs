//! The `lpc` command line: `solve`, `gen`, `certify` and `bench`.
//!
//! Exit codes: 0 on success, 1 on usage or input errors, 2 when a solve
//! fails (the failed report is still written).

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::conditioning::{certify_basis, well_conditioned_basis, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::io::{generate_instance, load_matrix, load_vector, to_json, write_json, write_text_file};
use crate::linalg::DenseMatrix;
use crate::pipeline::{
    median, reference_instance, run_variant, single_stage_augmented_solve, single_stage_oracle_solve, ExactBaseline,
    LemmaStatistics, NoiseModel, PipelineConfig, RegressionInstance, SolveReport, TwoStageSolver, Variant,
};
use crate::rng::derive_indexed;
use crate::solver::solve_multi_rhs;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILED: i32 = 2;

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "LPC_THREADS";

#[derive(Debug, Parser)]
#[command(name = "lpc", version, about = "Coresets and two-stage sampling for lp regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve an instance and write a JSON report.
    Solve(SolveArgs),
    /// Generate a reference-family instance.
    Gen(GenArgs),
    /// Print the certificates of a well-conditioned basis.
    Certify(CertifyArgs),
    /// Lemma statistics and ratio sweeps on the reference family.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    TwoStage,
    Oracle,
    Augmented,
    Generalized,
    Weighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoiseArg {
    Gaussian,
    SparseGross,
}

impl From<NoiseArg> for NoiseModel {
    fn from(n: NoiseArg) -> Self {
        match n {
            NoiseArg::Gaussian => NoiseModel::Gaussian,
            NoiseArg::SparseGross => NoiseModel::SparseGross,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Reference,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Design matrix A (CSV or MatrixMarket).
    #[arg(long)]
    pub input: PathBuf,
    /// Right-hand side b, or a matrix B for the generalized problem.
    #[arg(long)]
    pub rhs: PathBuf,
    #[arg(long)]
    pub p: f64,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.0)]
    pub r1_scale: f64,
    #[arg(long, default_value_t = 1.0)]
    pub r2_scale: f64,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub stages: u8,
    #[arg(long, value_enum, default_value_t = VariantArg::TwoStage)]
    pub variant: VariantArg,
    /// Single-stage sampling rate for the oracle and augmented variants.
    #[arg(long)]
    pub r: Option<f64>,
    /// Reference solution for the oracle variant; the exact solution if absent.
    #[arg(long)]
    pub x_ref: Option<PathBuf>,
    /// Row weights for the weighted variant.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Always compute the exact baseline.
    #[arg(long, conflicts_with = "no_exact")]
    pub exact: bool,
    /// Never compute the exact baseline.
    #[arg(long)]
    pub no_exact: bool,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    pub format: FormatArg,
    /// Report path; stdout if absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub d: usize,
    #[arg(long)]
    pub p: f64,
    #[arg(long, default_value_t = 0.1)]
    pub rho: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = NoiseArg::Gaussian)]
    pub noise: NoiseArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub p: f64,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    /// Random probes for the measured lower bound on beta.
    #[arg(long, default_value_t = 200)]
    pub probes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum, default_value_t = FamilyArg::Reference)]
    pub family: FamilyArg,
    #[arg(long, default_value_t = 100)]
    pub seeds: usize,
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    pub p: Vec<f64>,
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long, default_value_t = 4)]
    pub d: usize,
    #[arg(long, default_value_t = 0.1)]
    pub rho: f64,
    #[arg(long, value_enum, default_value_t = NoiseArg::Gaussian)]
    pub noise: NoiseArg,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub r1_scale: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub r2_scale: f64,
    /// Stage-2 scales for the ratio sweep.
    #[arg(long, value_delimiter = ',', default_value = "0.00001,0.0001,0.001")]
    pub sweep: Vec<f64>,
    /// Seeds per sweep point.
    #[arg(long, default_value_t = 20)]
    pub sweep_seeds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

fn usage(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}

fn check_epsilon(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 / 7.0 {
        Ok(())
    } else {
        Err(usage(format!("--epsilon must lie in (0, 1/7), got {eps}")))
    }
}

fn check_p(p: f64) -> Result<()> {
    if p.is_finite() && p >= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidExponent(p))
    }
}

fn check_exists(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::Io(format!("{}: no such file", path.display())))
    }
}

/// Thread count from `LPC_THREADS`, or 0 for the machine default.
pub fn thread_cap() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0)
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run_cli<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(thread_cap()).build() {
        Ok(pool) => pool,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_USAGE;
        }
    };
    let mut buf: Vec<u8> = Vec::new();
    let result = pool.install(|| {
        let sink: &mut dyn Write = &mut buf;
        match cli.command {
            Command::Solve(a) => solve(&a, sink),
            Command::Gen(a) => gen(&a, sink),
            Command::Certify(a) => certify(&a, sink),
            Command::Bench(a) => bench(&a, sink),
        }
    });
    if let Err(e) = out.write_all(&buf) {
        let _ = writeln!(err, "error: {e}");
        return EXIT_USAGE;
    }
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}

fn emit<T: Serialize>(value: &T, path: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    match path {
        Some(path) => write_json(value, path),
        None => out.write_all(to_json(value)?.as_bytes()).map_err(Error::from),
    }
}

fn load_instance(a: &SolveArgs) -> Result<RegressionInstance> {
    check_exists(&a.input)?;
    check_exists(&a.rhs)?;
    let design = load_matrix(&a.input, None)?;
    let rhs = load_matrix(&a.rhs, None)?;
    let rhs = if rhs.rows() == 1 && design.rows() != 1 { rhs.transpose() } else { rhs };
    let inst = if rhs.cols() == 1 && a.variant != VariantArg::Generalized {
        RegressionInstance::new(design, rhs.into_vec(), a.p)?
    } else {
        RegressionInstance::generalized(design, rhs, a.p)?
    };
    match &a.weights {
        Some(path) => {
            check_exists(path)?;
            inst.with_weights(load_vector(path)?)
        }
        None if a.variant == VariantArg::Weighted => Err(usage("--variant weighted needs --weights")),
        None => Ok(inst),
    }
}

fn solve(a: &SolveArgs, out: &mut dyn Write) -> Result<i32> {
    check_p(a.p)?;
    check_epsilon(a.epsilon)?;
    if let Some(r) = a.r {
        if r.is_nan() || r <= 0.0 {
            return Err(usage(format!("--r must be positive, got {r}")));
        }
    }
    let inst = load_instance(a)?;
    let cfg = PipelineConfig {
        epsilon: a.epsilon,
        stages: a.stages,
        exact: if a.exact {
            ExactBaseline::Always
        } else if a.no_exact {
            ExactBaseline::Never
        } else {
            ExactBaseline::Auto
        },
        ..PipelineConfig::default().with_scales(a.r1_scale, a.r2_scale)
    };
    let report = match a.variant {
        VariantArg::TwoStage | VariantArg::Generalized | VariantArg::Weighted => {
            let variant = match a.variant {
                VariantArg::TwoStage if inst.rhs_cols() > 1 => Variant::Generalized,
                VariantArg::TwoStage => Variant::TwoStage,
                VariantArg::Generalized => Variant::Generalized,
                _ => Variant::Weighted,
            };
            run_variant(&inst, &cfg, a.seed, variant)
        }
        VariantArg::Oracle => {
            let x_ref = match &a.x_ref {
                Some(path) => {
                    check_exists(path)?;
                    DenseMatrix::column(&load_vector(path)?)?
                }
                None => exact_reference(&inst, &cfg)?,
            };
            single_stage_oracle_solve(&inst, &x_ref, &cfg, a.r, a.seed)
        }
        VariantArg::Augmented => single_stage_augmented_solve(&inst, &cfg, a.r, a.seed),
    };
    emit(&report, a.output.as_deref(), out)?;
    Ok(if report.is_ok() { EXIT_OK } else { EXIT_FAILED })
}

fn exact_reference(inst: &RegressionInstance, cfg: &PipelineConfig) -> Result<DenseMatrix> {
    let (a, b) = match inst.weights() {
        None => (inst.a().clone(), inst.b().clone()),
        Some(w) => {
            let s = crate::solver::weight_row_scales(w, inst.p());
            (inst.a().scale_rows(&s)?, inst.b().scale_rows(&s)?)
        }
    };
    Ok(solve_multi_rhs(&a, &b, inst.p(), &cfg.solver)?.x)
}

fn gen(a: &GenArgs, out: &mut dyn Write) -> Result<i32> {
    check_p(a.p)?;
    let r = generate_instance(&a.out, a.n, a.d, a.p, a.noise.into(), a.rho, a.seed)?;
    writeln!(
        out,
        "wrote {} x {} instance with {} corrupted rows to {}",
        a.n,
        a.d,
        r.corrupted.len(),
        a.out.display()
    )?;
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct CertifyReport {
    n: usize,
    m: usize,
    d: usize,
    p: f64,
    alpha_cert: f64,
    beta_cert: f64,
    kappa: f64,
    alpha_measured: f64,
    beta_measured_lower: f64,
    rounding_iterations: usize,
    converged: bool,
    warnings: Vec<String>,
}

fn certify(a: &CertifyArgs, out: &mut dyn Write) -> Result<i32> {
    check_p(a.p)?;
    check_exists(&a.input)?;
    let m = load_matrix(&a.input, None)?;
    let w = well_conditioned_basis(&m, a.p, a.tol)?;
    let (alpha, beta) = certify_basis(&w, a.probes, a.seed)?;
    let report = CertifyReport {
        n: m.rows(),
        m: m.cols(),
        d: w.rank(),
        p: a.p,
        alpha_cert: w.alpha_cert,
        beta_cert: w.beta_cert,
        kappa: w.kappa_cert,
        alpha_measured: alpha,
        beta_measured_lower: beta,
        rounding_iterations: w.rounding_iterations,
        converged: w.converged,
        warnings: w.warnings.clone(),
    };
    emit(&report, a.output.as_deref(), out)?;
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct SweepPoint {
    r2_scale: f64,
    seeds: usize,
    failures: usize,
    median_ratio: f64,
    max_ratio: f64,
    mean_stage2_count: f64,
}

#[derive(Debug, Serialize)]
struct BenchEntry {
    p: f64,
    lemma: LemmaStatistics,
    sweep: Vec<SweepPoint>,
}

#[derive(Debug, Serialize)]
struct BenchSummary {
    family: String,
    n: usize,
    d: usize,
    rho: f64,
    noise: NoiseModel,
    epsilon: f64,
    r1_scale: f64,
    r2_scale: f64,
    seeds: usize,
    seed: u64,
    results: Vec<BenchEntry>,
}

fn sweep_point(inst: &RegressionInstance, cfg: &PipelineConfig, seeds: usize, base: u64) -> Result<SweepPoint> {
    let solver = TwoStageSolver::new(inst, cfg)?;
    let z = solver.exact()?.z;
    let runs: Vec<_> = (0..seeds)
        .into_par_iter()
        .map(|k| solver.run(derive_indexed(base, "sweep", k as u64)).ok())
        .collect();
    let ok: Vec<_> = runs.iter().flatten().collect();
    let ratios: Vec<f64> = ok.iter().map(|r| r.final_stage().full_objective / z).collect();
    let counts: f64 = ok
        .iter()
        .map(|r| r.stage2.as_ref().and_then(|s| s.plan.as_ref()).map_or(0, |p| p.actual_count) as f64)
        .sum();
    Ok(SweepPoint {
        r2_scale: cfg.r2_scale,
        seeds,
        failures: seeds - ok.len(),
        median_ratio: median(&ratios),
        max_ratio: ratios.iter().copied().fold(f64::NAN, f64::max),
        mean_stage2_count: if ok.is_empty() { f64::NAN } else { counts / ok.len() as f64 },
    })
}

fn bench(a: &BenchArgs, out: &mut dyn Write) -> Result<i32> {
    check_epsilon(a.epsilon)?;
    for &p in &a.p {
        check_p(p)?;
    }
    let runs_dir = a.out.join("runs");
    std::fs::create_dir_all(&runs_dir)?;
    let cfg = PipelineConfig {
        epsilon: a.epsilon,
        exact: ExactBaseline::Always,
        ..PipelineConfig::default().with_scales(a.r1_scale, a.r2_scale)
    };
    let mut results = Vec::new();
    let mut csv = String::from("p,r2_scale,seeds,failures,median_ratio,max_ratio,mean_stage2_count\n");
    for &p in &a.p {
        let r = reference_instance(a.n, a.d, p, a.rho, a.noise.into(), a.seed)?;
        let inst = &r.instance;
        let solver = TwoStageSolver::new(inst, &cfg)?;
        let lemma = solver.lemma_statistics(a.seeds, a.seed)?;
        let reports: Vec<SolveReport> = (0..a.seeds)
            .into_par_iter()
            .map(|k| solver.report(derive_indexed(a.seed, "lemma", k as u64), Variant::TwoStage))
            .collect();
        for (k, rep) in reports.iter().enumerate() {
            write_json(rep, &runs_dir.join(format!("p{p}_seed{k}.json")))?;
        }
        let mut sweep = Vec::new();
        for &s in &a.sweep {
            let c = PipelineConfig { r2_scale: s, ..cfg };
            let pt = sweep_point(inst, &c, a.sweep_seeds, a.seed)?;
            csv.push_str(&format!(
                "{p},{s},{},{},{:.16e},{:.16e},{:.16e}\n",
                pt.seeds, pt.failures, pt.median_ratio, pt.max_ratio, pt.mean_stage2_count
            ));
            sweep.push(pt);
        }
        writeln!(
            out,
            "p={p}: freq(a)={:.2} freq(b)={:.2} freq(c)={:.2} freq(d)={:.2} freq(e)={:.2} median ratio {:.6}",
            lemma.freq_a, lemma.freq_b, lemma.freq_c, lemma.freq_d, lemma.freq_e, lemma.median_ratio
        )?;
        results.push(BenchEntry { p, lemma, sweep });
    }
    let summary = BenchSummary {
        family: "reference".into(),
        n: a.n,
        d: a.d,
        rho: a.rho,
        noise: a.noise.into(),
        epsilon: a.epsilon,
        r1_scale: a.r1_scale,
        r2_scale: a.r2_scale,
        seeds: a.seeds,
        seed: a.seed,
        results,
    };
    write_json(&summary, &a.out.join("bench.json"))?;
    write_text_file(&a.out.join("sweep.csv"), &csv)?;
    Ok(EXIT_OK)
}

//! Replicated experiments: support recovery, error curves, the BCD versus DC
//! convergence comparison, the diamond-graph study and the initialization
//! study.
//!
//! Regularization parameters are chosen per replicate by K-fold
//! cross-validation on prediction error over warm-started λ paths (largest λ
//! first). The same rule applies to every method of a plan. Replicates run in
//! parallel on the current rayon pool; results are collected in plan order so
//! outputs do not depend on scheduling.

mod convergence;
mod ggm;
pub mod plan;
pub mod report;

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::baselines::{solve_dc_trimmed, solve_prox_gradient, PenaltySpec, MCP_GAMMA, SCAD_A};
use crate::bcd::{solve_bcd, BcdConfig, SolverStatus};
use crate::datagen::{gen_linear_m1, gen_linear_m2, DesignKind, LinearDesign, SyntheticDataset};
use crate::error::{Result, TrimError};
use crate::losses::{LeastSquaresLoss, SmoothLoss};
use crate::penalty;
use crate::problem::TrimmedProblem;
use crate::rng::{replicate_seed, splitmix64, Stream};

pub use convergence::{
    run_convergence_comparison, run_initialization_study, ConvergenceReport, ConvergenceSummary, InitRun,
    InitStudyReport, InitSummary, TraceRow,
};
pub use ggm::{ggm_initial_estimate, ggm_trim_pairs, run_ggm_diamond};
pub use plan::{
    log10_grid, ConvergencePlan, Dim, ExperimentPlan, GgmPlan, HPolicy, InitPlan, Method, NGrid, SolverSettings,
    SuccessMode,
};
pub use report::{aggregate, error_slopes, AggRow, RawRow, SlopeFit};

/// Magnitude below which an estimate counts as zero.
pub const ZERO_TOL: f64 = 1e-6;

/// Success test with the default zero tolerance.
pub fn support_recovered(theta_hat: &[f64], support: &[usize], mode: SuccessMode) -> bool {
    support_recovered_with_tol(theta_hat, support, mode, ZERO_TOL)
}

/// `ExactZero`: the entries with `|θ̂_j| > tol` are exactly the support.
/// `TopK`: the `k` largest magnitudes sit on the support and all of them
/// strictly exceed every off-support magnitude.
pub fn support_recovered_with_tol(theta_hat: &[f64], support: &[usize], mode: SuccessMode, tol: f64) -> bool {
    let mut s = support.to_vec();
    s.sort_unstable();
    s.dedup();
    match mode {
        SuccessMode::ExactZero => {
            let nz: Vec<usize> = (0..theta_hat.len()).filter(|&j| theta_hat[j].abs() > tol).collect();
            nz == s
        }
        SuccessMode::TopK => {
            let mut top = penalty::top_h_indices(theta_hat, s.len().min(theta_hat.len()));
            top.sort_unstable();
            if top != s {
                return false;
            }
            let min_in = s.iter().map(|&j| theta_hat[j].abs()).fold(f64::INFINITY, f64::min);
            let max_out = (0..theta_hat.len())
                .filter(|j| s.binary_search(j).is_err())
                .map(|j| theta_hat[j].abs())
                .fold(f64::NEG_INFINITY, f64::max);
            min_in > max_out
        }
    }
}

/// Outcome of one solver run inside an experiment.
#[derive(Debug, Clone)]
pub(crate) struct Fit {
    pub lambda: f64,
    pub theta: Vec<f64>,
    pub iters: usize,
    pub final_t: f64,
    pub objective: f64,
    pub status: &'static str,
}

impl Fit {
    pub fn failed(&self) -> bool {
        self.status == "failed"
    }
}

fn status_name(s: SolverStatus) -> &'static str {
    match s {
        SolverStatus::Stationary => "stationary",
        SolverStatus::MaxIters => "max_iters",
        SolverStatus::ObjectivePlateau => "plateau",
    }
}

fn penalty_spec(method: Method, lambda: f64, h: usize) -> PenaltySpec {
    match method {
        Method::Lasso => PenaltySpec::l1(lambda),
        Method::Scad => PenaltySpec::scad(lambda, SCAD_A),
        Method::Mcp => PenaltySpec::mcp(lambda, MCP_GAMMA),
        Method::Dc => PenaltySpec::trimmed_dc(lambda, h),
        Method::Trimmed => unreachable!("trimmed runs through block descent"),
    }
}

/// Runs one method at one λ. Numerical failures come back as a failed fit
/// that keeps `init`; input errors propagate.
pub(crate) fn solve_one<L: SmoothLoss>(
    loss: &L,
    method: Method,
    lambda: f64,
    h: usize,
    init: &[f64],
    config: &BcdConfig,
) -> Result<Fit> {
    let run = match method {
        Method::Trimmed => {
            let problem = TrimmedProblem::new(loss, lambda, h)?;
            solve_bcd(&problem, init, config).map(|s| (s.theta, s.trace))
        }
        Method::Dc => solve_dc_trimmed(loss, h, lambda, init, config),
        m => solve_prox_gradient(loss, &penalty_spec(m, lambda, h), init, config),
    };
    match run {
        Ok((theta, trace)) => Ok(Fit {
            lambda,
            theta,
            iters: trace.iterations(),
            final_t: trace.last().t,
            objective: trace.final_reduced_objective(),
            status: status_name(trace.status),
        }),
        Err(e) if e.is_numerical() => Ok(Fit {
            lambda,
            theta: init.to_vec(),
            iters: 0,
            final_t: f64::NAN,
            objective: f64::NAN,
            status: "failed",
        }),
        Err(e) => Err(e),
    }
}

/// Warm-started path over `lambdas` (given in the order to visit them).
pub(crate) fn fit_path<L: SmoothLoss>(
    loss: &L,
    method: Method,
    h: usize,
    lambdas: &[f64],
    init: &[f64],
    config: &BcdConfig,
) -> Result<Vec<Fit>> {
    let mut start = init.to_vec();
    let mut out = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let fit = solve_one(loss, method, lambda, h, &start, config)?;
        if !fit.failed() {
            start.clone_from(&fit.theta);
        }
        out.push(fit);
    }
    Ok(out)
}

/// Fold index of every sample: a seeded permutation dealt round-robin.
pub(crate) fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    Stream::new(splitmix64(seed ^ 0xc0ff_ee00_cafe_f00d)).shuffle(&mut order);
    let mut fold = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold[i] = pos % folds;
    }
    fold
}

/// Mean validation error of each λ (descending order) and the index of the
/// minimizer, ties going to the larger λ.
pub(crate) fn cross_validate(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    method: Method,
    h: usize,
    lambdas: &[f64],
    folds: usize,
    seed: u64,
    config: &BcdConfig,
) -> Result<(usize, Vec<f64>)> {
    let n = x.nrows();
    let assign = fold_assignment(n, folds, seed);
    let mut err = vec![0.0; lambdas.len()];
    for f in 0..folds {
        let train: Vec<usize> = (0..n).filter(|&i| assign[i] != f).collect();
        let test: Vec<usize> = (0..n).filter(|&i| assign[i] == f).collect();
        let loss = LeastSquaresLoss::new(x.select_rows(&train), y.select_rows(&train))?;
        let xt = x.select_rows(&test);
        let yt = y.select_rows(&test);
        let path = fit_path(&loss, method, h, lambdas, &vec![0.0; x.ncols()], config)?;
        for (e, fit) in err.iter_mut().zip(&path) {
            if fit.failed() {
                *e = f64::INFINITY;
                continue;
            }
            let r = &xt * DVector::from_column_slice(&fit.theta) - &yt;
            *e += r.norm_squared() / test.len() as f64 / folds as f64;
        }
    }
    let mut best = 0;
    for (i, e) in err.iter().enumerate() {
        if *e < err[best] {
            best = i;
        }
    }
    Ok((best, err))
}

/// CV-selected fit on the full data.
pub(crate) fn cv_fit(
    ds: &SyntheticDataset,
    method: Method,
    h: usize,
    lambdas: &[f64],
    folds: usize,
    config: &BcdConfig,
) -> Result<Fit> {
    let y = ds.y.as_ref().ok_or_else(|| TrimError::domain("dataset has no response"))?;
    let (best, _) = cross_validate(&ds.x, y, method, h, lambdas, folds, ds.seed, config)?;
    let loss = LeastSquaresLoss::new(ds.x.clone(), y.clone())?;
    let mut path = fit_path(&loss, method, h, &lambdas[..=best], &vec![0.0; ds.p()], config)?;
    Ok(path.pop().expect("path is non-empty"))
}

pub(crate) fn errors(theta: &[f64], truth: &[f64]) -> (f64, f64) {
    let d: Vec<f64> = theta.iter().zip(truth).map(|(a, b)| a - b).collect();
    let l2 = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    let linf = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    (l2, linf)
}

fn mode_name(m: SuccessMode) -> &'static str {
    match m {
        SuccessMode::ExactZero => "exact_zero",
        SuccessMode::TopK => "top_k",
    }
}

/// Output of the regression experiments.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub experiment_id: String,
    pub raw: Vec<RawRow>,
    pub cells: Vec<AggRow>,
    /// Error slopes (error-curve experiment only).
    pub slopes: Vec<SlopeFit>,
}

impl ExperimentReport {
    pub fn cell(&self, method: &str, n: usize, h: usize) -> Option<&AggRow> {
        self.cells.iter().find(|c| c.method == method && c.n == n && c.h == h)
    }
}

/// Dataset for replicate `r` of the `(dim, n)` cell. The seed depends only on
/// `(base_seed, dim index, n index, r)`, so all methods and trim counts of a
/// replicate see the same data.
pub fn regression_dataset(plan: &ExperimentPlan, dim_idx: usize, n_idx: usize, n: usize, r: usize) -> Result<SyntheticDataset> {
    let d = plan.dims[dim_idx];
    let cell_seed = replicate_seed(plan.base_seed, (dim_idx * 1000 + n_idx) as u64);
    let seed = replicate_seed(cell_seed, r as u64);
    let design = LinearDesign {
        n,
        p: d.p,
        k: d.k,
        correlation: plan.correlation(),
        beta_sd: plan.beta_sd,
        noise_sd: plan.noise_sd,
    };
    match plan.design {
        DesignKind::M2 => gen_linear_m2(&design, seed),
        DesignKind::M1 => gen_linear_m1(&design, seed),
        DesignKind::DiamondGgm => Err(TrimError::domain("regression plans need design M2 or M1")),
    }
}

fn run_regression(plan: &ExperimentPlan, experiment_id: &str) -> Result<ExperimentReport> {
    plan.validate()?;
    let lambdas = plan::lambdas_descending(&plan.log10_lambdas);
    let label = plan.design_label();

    struct Task {
        dim_idx: usize,
        n_idx: usize,
        n: usize,
        r: usize,
        hs: Vec<usize>,
    }
    let mut tasks = Vec::new();
    for (dim_idx, d) in plan.dims.iter().enumerate() {
        let hs = plan.h_policy.resolve(d.p, d.k)?;
        for (n_idx, n) in plan.n_grid.resolve(d.p, d.k)?.into_iter().enumerate() {
            for r in 0..plan.replicates {
                tasks.push(Task { dim_idx, n_idx, n, r, hs: hs.clone() });
            }
        }
    }

    let per_task: Vec<Result<Vec<RawRow>>> = tasks
        .par_iter()
        .map(|t| {
            let ds = regression_dataset(plan, t.dim_idx, t.n_idx, t.n, t.r)?;
            let config = plan.solver.config(ds.seed);
            let mut rows = Vec::new();
            for &method in &plan.methods {
                let hs: Vec<usize> = if method.uses_trim() { t.hs.clone() } else { vec![0] };
                for h in hs {
                    let start = Instant::now();
                    let fit = cv_fit(&ds, method, h, &lambdas, plan.cv_folds, &config)?;
                    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
                    let (l2, linf) = if fit.failed() { (f64::NAN, f64::NAN) } else { errors(&fit.theta, &ds.theta_star) };
                    let ok = !fit.failed();
                    let topk = ok && support_recovered_with_tol(&fit.theta, &ds.support, SuccessMode::TopK, plan.zero_tol);
                    let exact = ok && support_recovered_with_tol(&fit.theta, &ds.support, SuccessMode::ExactZero, plan.zero_tol);
                    rows.push(RawRow {
                        experiment_id: experiment_id.to_string(),
                        method: method.name().to_string(),
                        design: label.clone(),
                        p: ds.p(),
                        k: ds.support.len(),
                        n: t.n,
                        h,
                        lambda: fit.lambda,
                        replicate: t.r,
                        seed: ds.seed,
                        success_topk: topk as u8,
                        success_exact: exact as u8,
                        l2_err: l2,
                        linf_err: linf,
                        iters: fit.iters,
                        final_t: fit.final_t,
                        runtime_ms,
                        status: fit.status.to_string(),
                        primary: mode_name(method.primary_mode()).to_string(),
                    });
                }
            }
            Ok(rows)
        })
        .collect();

    let mut raw = Vec::new();
    for rows in per_task {
        raw.extend(rows?);
    }
    // cell-major ordering: method, h, dims, n, replicate
    let mut order: Vec<usize> = (0..raw.len()).collect();
    let method_rank = |m: &str| plan.methods.iter().position(|x| x.name() == m).unwrap_or(usize::MAX);
    let dim_rank = |p: usize, k: usize| plan.dims.iter().position(|d| d.p == p && d.k == k).unwrap_or(usize::MAX);
    order.sort_by_key(|&i| {
        let r = &raw[i];
        (method_rank(&r.method), r.h, dim_rank(r.p, r.k), r.n, r.replicate)
    });
    let raw: Vec<RawRow> = order.into_iter().map(|i| raw[i].clone()).collect();
    let cells = aggregate(&raw);
    Ok(ExperimentReport { experiment_id: experiment_id.to_string(), raw, cells, slopes: Vec::new() })
}

/// Support-recovery probabilities per `(method, p, k, n, h)` cell.
pub fn run_support_recovery(plan: &ExperimentPlan) -> Result<ExperimentReport> {
    run_regression(plan, "support-recovery")
}

/// ℓ2/ℓ∞ errors per cell plus the slope of `log(mean ℓ2)` against `log n`
/// on the largest-n half of each series.
pub fn run_error_curves(plan: &ExperimentPlan) -> Result<ExperimentReport> {
    let mut report = run_regression(plan, "error-curves")?;
    report.slopes = error_slopes(&report.cells);
    Ok(report)
}

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::plan::{lambdas_descending, ConvergencePlan, InitPlan, Method, SuccessMode};
use super::report::mean_sd;
use super::{cross_validate, errors, solve_one, support_recovered};
use crate::baselines::solve_dc_trimmed;
use crate::bcd::{descent_certificate, solve_bcd, SolverTrace};
use crate::datagen::{gen_linear_m1, gen_linear_m2, DesignKind, LinearDesign};
use crate::error::{Result, TrimError};
use crate::losses::LeastSquaresLoss;
use crate::problem::TrimmedProblem;
use crate::rng::{replicate_seed, Stream};

/// One row of a convergence trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub method: String,
    pub lambda: f64,
    pub iter: usize,
    /// Objective the method descends (joint `F(θ, w)` for block descent).
    pub objective: f64,
    #[serde(rename = "G_k")]
    pub g_k: f64,
    #[serde(rename = "T")]
    pub t: f64,
}

fn trace_rows(trace: &SolverTrace) -> Vec<TraceRow> {
    trace
        .records
        .iter()
        .map(|r| TraceRow {
            method: trace.method.clone(),
            lambda: trace.lambda,
            iter: r.iter,
            objective: r.objective,
            g_k: r.g_k,
            t: r.t,
        })
        .collect()
}

/// Largest single-step increase of the traced objective (0 when monotone).
fn max_increase(trace: &SolverTrace) -> f64 {
    trace
        .records
        .windows(2)
        .map(|w| w[1].objective - w[0].objective)
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSummary {
    pub lambda: f64,
    /// Final `L(θ) + λ R(θ; h)` of block descent.
    pub bcd_final: f64,
    pub dc_final: f64,
    pub bcd_iters: usize,
    pub dc_iters: usize,
    pub bcd_max_increase: f64,
    pub dc_max_increase: f64,
    pub bcd_certified: bool,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    /// Trace rows of both methods, one entry per λ in plan order.
    pub traces: Vec<(f64, Vec<TraceRow>)>,
    pub summary: Vec<ConvergenceSummary>,
    pub bcd_traces: Vec<SolverTrace>,
    pub dc_traces: Vec<SolverTrace>,
}

/// Block descent and the DC scheme from `θ = 0` on one M2 instance, at each λ.
pub fn run_convergence_comparison(plan: &ConvergencePlan) -> Result<ConvergenceReport> {
    plan.validate()?;
    let seed = replicate_seed(plan.seed, 0);
    let mut design = LinearDesign::new(plan.n, plan.p, plan.k, plan.correlation);
    design.beta_sd = plan.beta_sd;
    let ds = gen_linear_m2(&design, seed)?;
    let loss = LeastSquaresLoss::new(ds.x.clone(), ds.y.clone().expect("regression data"))?;
    let config = plan.solver.config(seed);
    let init = vec![0.0; plan.p];

    let runs: Vec<Result<(SolverTrace, SolverTrace)>> = plan
        .lambdas
        .par_iter()
        .map(|&lambda| {
            let problem = TrimmedProblem::new(&loss, lambda, plan.h)?;
            let bcd = solve_bcd(&problem, &init, &config)?;
            let (_, dc) = solve_dc_trimmed(&loss, plan.h, lambda, &init, &config)?;
            Ok((bcd.trace, dc))
        })
        .collect();

    let mut report = ConvergenceReport { traces: Vec::new(), summary: Vec::new(), bcd_traces: Vec::new(), dc_traces: Vec::new() };
    for (run, &lambda) in runs.into_iter().zip(&plan.lambdas) {
        let (bcd, dc) = run?;
        let mut rows = trace_rows(&bcd);
        rows.extend(trace_rows(&dc));
        report.traces.push((lambda, rows));
        report.summary.push(ConvergenceSummary {
            lambda,
            bcd_final: bcd.final_reduced_objective(),
            dc_final: dc.final_objective(),
            bcd_iters: bcd.iterations(),
            dc_iters: dc.iterations(),
            bcd_max_increase: max_increase(&bcd),
            dc_max_increase: max_increase(&dc),
            bcd_certified: descent_certificate(&bcd),
        });
        report.bcd_traces.push(bcd);
        report.dc_traces.push(dc);
    }
    Ok(report)
}

/// One method from one random start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitRun {
    pub method: String,
    pub init: usize,
    pub seed: u64,
    pub lambda: f64,
    pub objective: f64,
    pub l2_err: f64,
    pub linf_err: f64,
    #[serde(rename = "final_T")]
    pub final_t: f64,
    pub iters: usize,
    pub status: String,
    pub success_topk: u8,
}

/// Dispersion of one quantity across starts. `relative_spread` is
/// `(max − min) / |mean|`, our own summary of how close the end points are.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitSummary {
    pub method: String,
    pub quantity: String,
    pub runs: usize,
    pub failures: usize,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
    pub relative_spread: f64,
}

#[derive(Debug, Clone)]
pub struct InitStudyReport {
    pub design: String,
    pub lambda: f64,
    pub lambda_from_cv: bool,
    pub runs: Vec<InitRun>,
    pub summary: Vec<InitSummary>,
}

/// Solves one instance from `num_inits` random starts (entries iid
/// `N(0, init_sd²)`, the same starts for every method).
pub fn run_initialization_study(plan: &InitPlan) -> Result<InitStudyReport> {
    plan.validate()?;
    let seed = replicate_seed(plan.seed, 0);
    let mut design = LinearDesign::new(plan.n, plan.p, plan.k, plan.correlation());
    design.beta_sd = plan.beta_sd;
    let ds = match plan.design {
        DesignKind::M2 => gen_linear_m2(&design, seed)?,
        DesignKind::M1 => gen_linear_m1(&design, seed)?,
        DesignKind::DiamondGgm => return Err(TrimError::domain("initialization study needs design M2 or M1")),
    };
    let y = ds.y.clone().expect("regression data");
    let config = plan.solver.config(seed);
    let (lambda, from_cv) = match plan.lambda {
        Some(l) => (l, false),
        None => {
            let lambdas = lambdas_descending(&plan.log10_lambdas);
            let (best, _) = cross_validate(&ds.x, &y, Method::Trimmed, plan.k, &lambdas, plan.cv_folds, seed, &config)?;
            (lambdas[best], true)
        }
    };
    let loss = LeastSquaresLoss::new(ds.x.clone(), y)?;

    let per_init: Vec<Result<Vec<InitRun>>> = (0..plan.num_inits)
        .into_par_iter()
        .map(|i| {
            let init_seed = replicate_seed(plan.seed, i as u64 + 1);
            let mut s = Stream::new(init_seed);
            let init: Vec<f64> = (0..plan.p).map(|_| plan.init_sd * s.normal()).collect();
            plan.methods
                .iter()
                .map(|&m| {
                    let fit = solve_one(&loss, m, lambda, plan.k, &init, &config)?;
                    let (l2, linf) = if fit.failed() { (f64::NAN, f64::NAN) } else { errors(&fit.theta, &ds.theta_star) };
                    Ok(InitRun {
                        method: m.name().to_string(),
                        init: i,
                        seed: init_seed,
                        lambda,
                        objective: fit.objective,
                        l2_err: l2,
                        linf_err: linf,
                        final_t: fit.final_t,
                        iters: fit.iters,
                        status: fit.status.to_string(),
                        success_topk: (!fit.failed() && support_recovered(&fit.theta, &ds.support, SuccessMode::TopK)) as u8,
                    })
                })
                .collect()
        })
        .collect();
    let mut runs = Vec::new();
    for r in per_init {
        runs.extend(r?);
    }
    runs.sort_by_key(|r| (plan.methods.iter().position(|m| m.name() == r.method), r.init));

    let mut summary = Vec::new();
    for m in &plan.methods {
        let mine: Vec<&InitRun> = runs.iter().filter(|r| r.method == m.name()).collect();
        let ok: Vec<&&InitRun> = mine.iter().filter(|r| r.status != "failed").collect();
        let quantities: [(&str, fn(&InitRun) -> f64); 3] =
            [("objective", |r| r.objective), ("l2_err", |r| r.l2_err), ("final_T", |r| r.final_t)];
        for (name, f) in quantities {
            let v: Vec<f64> = ok.iter().map(|r| f(r)).collect();
            let (mean, sd) = mean_sd(&v);
            let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            summary.push(InitSummary {
                method: m.name().to_string(),
                quantity: name.to_string(),
                runs: mine.len(),
                failures: mine.len() - ok.len(),
                mean,
                sd,
                min,
                max,
                relative_spread: (max - min) / mean.abs(),
            });
        }
    }
    Ok(InitStudyReport {
        design: format!("{}({})", plan.design, plan.correlation()),
        lambda,
        lambda_from_cv: from_cv,
        runs,
        summary,
    })
}

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use trimreg::baselines::{solve_dc_trimmed, solve_prox_gradient, PenaltySpec, MCP_GAMMA, SCAD_A};
use trimreg::datagen::{
    gen_diamond_ggm, gen_linear_m1, gen_linear_m2, incoherence_diagnostics, incoherence_from_gram,
    read_design_csv, write_matrix_csv, DesignKind, LinearDesign, SyntheticDataset, M1_CORRELATION,
    M2_CORRELATION,
};
use trimreg::experiments::report::write_csv;
use trimreg::experiments::{
    ggm_initial_estimate, run_convergence_comparison, run_error_curves, run_ggm_diamond,
    run_initialization_study, run_support_recovery, ConvergencePlan, Dim, ExperimentPlan, ExperimentReport,
    GgmPlan, HPolicy, InitPlan, Method, NGrid, TraceRow,
};
use trimreg::losses::unpack_symmetric;
use trimreg::{
    solve_bcd, BcdConfig, GaussianGraphicalLoss, LeastSquaresLoss, SmoothLoss, SolverTrace, StepSize,
    TrimmedProblem, WeightUpdate,
};

use crate::cli::{
    Cli, Command, ConvergenceArgs, DesignArg, DiagCommand, ErrorArgs, ExpCommand, GenArgs, GgmArgs,
    GlobalOpts, IncoherenceArgs, InitArgs, LossKind, MethodArg, Preset, SolveArgs, SupportArgs, WUpdateArg,
};
use crate::error::CliError;
use crate::manifest::{load_config, now, RunManifest};

pub fn run(cli: Cli) -> Result<(), CliError> {
    if cli.global.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.global.jobs)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot start {} worker threads: {e}", cli.global.jobs)))?;
    }
    let g = &cli.global;
    match &cli.command {
        Command::Solve(a) => solve(g, a),
        Command::Gen(a) => gen(g, a),
        Command::Exp(ExpCommand::SupportRecovery(a)) => support_recovery(g, a),
        Command::Exp(ExpCommand::ErrorCurves(a)) => error_curves(g, a),
        Command::Exp(ExpCommand::Convergence(a)) => convergence(g, a),
        Command::Exp(ExpCommand::GgmDiamond(a)) => ggm_diamond(g, a),
        Command::Exp(ExpCommand::InitStudy(a)) => init_study(g, a),
        Command::Diag(DiagCommand::Incoherence(a)) => incoherence(g, a),
    }
}

/// Files of one run, collected for the manifest.
struct Outputs {
    dir: PathBuf,
    files: Vec<PathBuf>,
    started_at: String,
}

impl Outputs {
    fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new(), started_at: now() })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.files.push(p.clone());
        p
    }

    fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<(), CliError> {
        let p = self.path(name);
        write_csv(&p, rows)?;
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let p = self.path(name);
        let text = serde_json::to_string_pretty(value).expect("values serialize");
        std::fs::write(&p, text + "\n").map_err(|e| CliError::io(&p, e))
    }

    fn finish<T: Serialize>(self, command: &str, config: &T, base_seed: u64) -> Result<(), CliError> {
        let manifest_path = self.dir.join("manifest.json");
        let manifest = RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            resolved_config: serde_json::to_value(config).expect("configs serialize"),
            base_seed,
            started_at: self.started_at,
            finished_at: now(),
            outputs: self.files.clone(),
        };
        manifest.write(&manifest_path)?;
        for f in &self.files {
            emit(&format!("wrote {}", f.display()));
        }
        emit(&format!("wrote {}", manifest_path.display()));
        Ok(())
    }
}

/// Prints a line to stdout; a closed pipe is not an error.
fn emit(line: &str) {
    let _ = writeln!(std::io::stdout(), "{line}");
}

fn no_config(g: &GlobalOpts, command: &str) -> Result<(), CliError> {
    match &g.config {
        Some(_) => Err(CliError::Usage(format!("--config is not used by `{command}`"))),
        None => Ok(()),
    }
}

fn design_kind(d: DesignArg) -> DesignKind {
    match d {
        DesignArg::M2 => DesignKind::M2,
        DesignArg::M1 => DesignKind::M1,
        DesignArg::Diamond => DesignKind::DiamondGgm,
    }
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

#[derive(Debug, Serialize)]
struct SolveConfig<'a> {
    data: &'a Path,
    loss: &'static str,
    method: &'static str,
    lambda: f64,
    h: usize,
    tau: f64,
    w_update: WeightUpdate,
    max_iters: usize,
    tol_stationarity: f64,
    tol_objective: f64,
    seed: u64,
}

fn solve_with<L: SmoothLoss>(
    loss: &L,
    a: &SolveArgs,
    init: &[f64],
    config: &BcdConfig,
) -> trimreg::Result<(Vec<f64>, SolverTrace)> {
    match a.method {
        MethodArg::Trimmed => {
            let problem = TrimmedProblem::new(loss, a.lambda, a.h)?;
            let sol = solve_bcd(&problem, init, config)?;
            Ok((sol.theta, sol.trace))
        }
        MethodArg::Lasso => solve_prox_gradient(loss, &PenaltySpec::l1(a.lambda), init, config),
        MethodArg::Scad => solve_prox_gradient(loss, &PenaltySpec::scad(a.lambda, SCAD_A), init, config),
        MethodArg::Mcp => solve_prox_gradient(loss, &PenaltySpec::mcp(a.lambda, MCP_GAMMA), init, config),
        MethodArg::Dc => solve_dc_trimmed(loss, a.h, a.lambda, init, config),
    }
}

fn solve(g: &GlobalOpts, a: &SolveArgs) -> Result<(), CliError> {
    no_config(g, "solve")?;
    if !(a.lambda >= 0.0 && a.lambda.is_finite()) {
        return Err(CliError::Usage(format!("--lambda must be a non-negative number, got {}", a.lambda)));
    }
    if a.h > 0 && !matches!(a.method, MethodArg::Trimmed | MethodArg::Dc) {
        return Err(CliError::Usage("--h applies to the trimmed and dc methods only".into()));
    }
    let (x, y) = read_design_csv(&a.data)?;
    let w_update = match a.w_update {
        WUpdateArg::GradientStep => WeightUpdate::GradientStep,
        WUpdateArg::ExactMinimize => WeightUpdate::ExactMinimize,
    };
    let seed = g.seed.unwrap_or(0);
    let config = BcdConfig {
        eta: StepSize::Auto,
        tau: a.tau,
        max_iters: a.max_iters,
        tol_stationarity: a.tol_stationarity,
        tol_objective: a.tol_objective,
        w_update,
        seed,
    };
    let p = x.ncols();
    let (theta, trace) = match a.loss {
        LossKind::Ls => {
            let y = y.ok_or_else(|| CliError::Usage(format!("{} has no `y` column", a.data.display())))?;
            let loss = LeastSquaresLoss::new(x, y)?;
            solve_with(&loss, a, &vec![0.0; p], &config)?
        }
        LossKind::Ggm => {
            if y.is_some() {
                return Err(CliError::Usage(format!(
                    "{} has a `y` column; the graphical loss takes samples only",
                    a.data.display()
                )));
            }
            let s = x.tr_mul(&x) / x.nrows() as f64;
            let s_hat = (&s + s.transpose()) * 0.5;
            let init = ggm_initial_estimate(&s_hat);
            let loss = GaussianGraphicalLoss::new(s_hat)?;
            solve_with(&loss, a, &init, &config)?
        }
    };

    let last = trace.last();
    eprintln!(
        "method {} lambda {} status {:?} iterations {} objective {} T {:e}",
        trace.method,
        a.lambda,
        trace.status,
        trace.iterations(),
        last.reduced_objective,
        last.t
    );
    #[derive(Serialize)]
    struct EstimateRow {
        index: usize,
        estimate: f64,
    }
    let mut out = Outputs::create(&g.out_dir)?;
    let rows: Vec<EstimateRow> = theta.iter().enumerate().map(|(index, &estimate)| EstimateRow { index, estimate }).collect();
    out.csv("estimate.csv", &rows)?;
    if a.loss == LossKind::Ggm {
        let path = out.path("precision.csv");
        write_matrix_csv(&path, &unpack_symmetric(&theta, p))?;
    }
    if g.trace {
        out.csv("trace.csv", &trace_rows(&trace))?;
    }
    let resolved = SolveConfig {
        data: &a.data,
        loss: match a.loss {
            LossKind::Ls => "ls",
            LossKind::Ggm => "ggm",
        },
        method: match a.method {
            MethodArg::Trimmed => "trimmed",
            MethodArg::Lasso => "lasso",
            MethodArg::Scad => "scad",
            MethodArg::Mcp => "mcp",
            MethodArg::Dc => "dc",
        },
        lambda: a.lambda,
        h: a.h,
        tau: config.resolved_tau(a.lambda),
        w_update,
        max_iters: a.max_iters,
        tol_stationarity: a.tol_stationarity,
        tol_objective: a.tol_objective,
        seed,
    };
    let mut text = String::from("index,estimate\n");
    for (j, v) in theta.iter().enumerate() {
        text.push_str(&format!("{j},{v:?}\n"));
    }
    emit(text.trim_end());
    out.finish("solve", &resolved, seed)
}

fn gen(g: &GlobalOpts, a: &GenArgs) -> Result<(), CliError> {
    no_config(g, "gen")?;
    let seed = g.seed.unwrap_or(0);
    let kind = design_kind(a.design);
    let correlation = a.correlation.unwrap_or(match kind {
        DesignKind::M1 => M1_CORRELATION,
        _ => M2_CORRELATION,
    });
    let ds = generate(kind, a.n, a.p, a.k, correlation, a.rho, a.beta_sd, a.noise_sd, seed)?;
    let mut out = Outputs::create(&g.out_dir)?;
    let data = out.path("data.csv");
    let truth = out.path("truth.csv");
    ds.write_csv(&data, &truth)?;
    let resolved = match kind {
        DesignKind::DiamondGgm => json!({ "design": kind, "n": a.n, "rho": a.rho, "seed": seed }),
        _ => json!({
            "design": kind, "n": a.n, "p": a.p, "k": a.k, "correlation": correlation,
            "beta_sd": a.beta_sd, "noise_sd": a.noise_sd, "seed": seed,
        }),
    };
    out.finish("gen", &resolved, seed)
}

#[allow(clippy::too_many_arguments)]
fn generate(
    kind: DesignKind,
    n: usize,
    p: usize,
    k: usize,
    correlation: f64,
    rho: f64,
    beta_sd: f64,
    noise_sd: f64,
    seed: u64,
) -> Result<SyntheticDataset, CliError> {
    let design = LinearDesign { n, p, k, correlation, beta_sd, noise_sd };
    Ok(match kind {
        DesignKind::M2 => gen_linear_m2(&design, seed)?,
        DesignKind::M1 => gen_linear_m1(&design, seed)?,
        DesignKind::DiamondGgm => gen_diamond_ggm(n, rho, seed)?,
    })
}

fn write_report(out: &mut Outputs, report: &ExperimentReport, slopes: bool) -> Result<(), CliError> {
    out.csv("raw.csv", &report.raw)?;
    out.csv("aggregate.csv", &report.cells)?;
    if slopes {
        out.csv("slopes.csv", &report.slopes)?;
    }
    Ok(())
}

fn parse_methods(names: &[String]) -> Result<Vec<Method>, CliError> {
    names.iter().map(|s| Method::parse(s.trim()).map_err(CliError::from)).collect()
}

fn support_recovery(g: &GlobalOpts, a: &SupportArgs) -> Result<(), CliError> {
    const COMMAND: &str = "exp support-recovery";
    let mut plan = match (&g.config, a.preset) {
        (Some(_), Some(_)) => return Err(CliError::Usage("use either --config or --preset, not both".into())),
        (Some(path), None) => load_config::<ExperimentPlan>(path, COMMAND)?,
        (None, Some(Preset::SmallRegime)) => ExperimentPlan::small_regime(),
        (None, None) => ExperimentPlan::default(),
    };
    if a.large {
        let big = Dim { p: 512, k: 32 };
        if !plan.dims.contains(&big) {
            plan.dims.push(big);
        }
    }
    if let Some(d) = a.design {
        plan.design = design_kind(d);
        plan.correlation = None;
    }
    if a.correlation.is_some() {
        plan.correlation = a.correlation;
    }
    if let Some(r) = a.replicates {
        plan.replicates = r;
    }
    if let Some(m) = &a.methods {
        plan.methods = parse_methods(m)?;
    }
    if let Some(s) = g.seed {
        plan.base_seed = s;
    }
    let plan = plan.resolved();
    plan.validate()?;
    let mut out = Outputs::create(&g.out_dir)?;
    let report = run_support_recovery(&plan)?;
    write_report(&mut out, &report, false)?;
    out.json("config.json", &plan)?;
    out.finish(COMMAND, &plan, plan.base_seed)
}

fn error_curves(g: &GlobalOpts, a: &ErrorArgs) -> Result<(), CliError> {
    const COMMAND: &str = "exp error-curves";
    let mut plan = match &g.config {
        Some(path) => load_config::<ExperimentPlan>(path, COMMAND)?,
        None => ExperimentPlan::error_curves(),
    };
    if let Some(r) = a.replicates {
        plan.replicates = r;
    }
    if let Some(ns) = &a.n_grid {
        plan.n_grid = NGrid::Explicit(ns.clone());
    }
    if let Some(hs) = &a.h_sweep {
        plan.h_policy = HPolicy::Sweep(hs.clone());
    }
    if let Some(s) = g.seed {
        plan.base_seed = s;
    }
    let plan = plan.resolved();
    plan.validate()?;
    let mut out = Outputs::create(&g.out_dir)?;
    let report = run_error_curves(&plan)?;
    write_report(&mut out, &report, true)?;
    out.json("config.json", &plan)?;
    out.finish(COMMAND, &plan, plan.base_seed)
}

fn convergence(g: &GlobalOpts, a: &ConvergenceArgs) -> Result<(), CliError> {
    const COMMAND: &str = "exp convergence";
    let mut plan = match &g.config {
        Some(path) => load_config::<ConvergencePlan>(path, COMMAND)?,
        None => ConvergencePlan::default(),
    };
    if let Some(l) = &a.lambdas {
        plan.lambdas = l.clone();
    }
    if let Some(s) = g.seed {
        plan.seed = s;
    }
    plan.validate()?;
    let mut out = Outputs::create(&g.out_dir)?;
    let report = run_convergence_comparison(&plan)?;
    for (lambda, rows) in &report.traces {
        out.csv(&format!("trace_lambda_{lambda}.csv"), rows)?;
    }
    out.csv("summary.csv", &report.summary)?;
    for s in &report.summary {
        emit(&format!(
            "lambda {}: BCD {} ({} iterations), DC {} ({} iterations)",
            s.lambda, s.bcd_final, s.bcd_iters, s.dc_final, s.dc_iters
        ));
    }
    out.json("config.json", &plan)?;
    out.finish(COMMAND, &plan, plan.seed)
}

fn ggm_diamond(g: &GlobalOpts, a: &GgmArgs) -> Result<(), CliError> {
    const COMMAND: &str = "exp ggm-diamond";
    let mut plan = match &g.config {
        Some(path) => load_config::<GgmPlan>(path, COMMAND)?,
        None => GgmPlan::default(),
    };
    if let Some(r) = a.replicates {
        plan.replicates = r;
    }
    if let Some(r) = &a.rhos {
        plan.rhos = r.clone();
    }
    if let Some(s) = g.seed {
        plan.base_seed = s;
    }
    plan.validate()?;
    let mut out = Outputs::create(&g.out_dir)?;
    let report = run_ggm_diamond(&plan)?;
    write_report(&mut out, &report, false)?;
    out.json("config.json", &plan)?;
    out.finish(COMMAND, &plan, plan.base_seed)
}

fn init_study(g: &GlobalOpts, a: &InitArgs) -> Result<(), CliError> {
    const COMMAND: &str = "exp init-study";
    let mut plan = match &g.config {
        Some(path) => load_config::<InitPlan>(path, COMMAND)?,
        None => InitPlan::default(),
    };
    if let Some(n) = a.num_inits {
        plan.num_inits = n;
    }
    if a.lambda.is_some() {
        plan.lambda = a.lambda;
    }
    if let Some(s) = g.seed {
        plan.seed = s;
    }
    let plan = plan.resolved();
    plan.validate()?;
    let mut out = Outputs::create(&g.out_dir)?;
    let report = run_initialization_study(&plan)?;
    emit(&format!(
        "lambda {} ({})",
        report.lambda,
        if report.lambda_from_cv { "cross-validated" } else { "fixed" }
    ));
    out.csv("init_runs.csv", &report.runs)?;
    out.csv("init_summary.csv", &report.summary)?;
    out.json("config.json", &plan)?;
    out.finish(COMMAND, &plan, plan.seed)
}

fn read_support(path: &Path) -> Result<Vec<usize>, CliError> {
    #[derive(serde::Deserialize)]
    struct TruthRow {
        index: usize,
        #[allow(dead_code)]
        theta_star: f64,
        in_support: u8,
    }
    let rows: Vec<TruthRow> = trimreg::experiments::report::read_csv(path)?;
    Ok(rows.into_iter().filter(|r| r.in_support == 1).map(|r| r.index).collect())
}

fn incoherence(g: &GlobalOpts, a: &IncoherenceArgs) -> Result<(), CliError> {
    no_config(g, "diag incoherence")?;
    let seed = g.seed.unwrap_or(0);
    let (report, resolved) = match (&a.data, &a.truth) {
        (Some(data), Some(truth)) => {
            let (x, _) = read_design_csv(data)?;
            let support = read_support(truth)?;
            let report = incoherence_diagnostics(&x, &support, a.h, a.samples, seed)?;
            let resolved = json!({
                "source": "sample", "data": data, "truth": truth, "h": a.h, "samples": a.samples, "seed": seed,
            });
            (report, resolved)
        }
        (Some(_), None) => return Err(CliError::Usage("--data needs --truth".into())),
        (None, _) => {
            let kind = design_kind(a.design);
            if kind == DesignKind::DiamondGgm {
                return Err(CliError::Usage("incoherence diagnostics need design m1 or m2".into()));
            }
            let correlation = a.correlation.unwrap_or(match kind {
                DesignKind::M1 => M1_CORRELATION,
                _ => M2_CORRELATION,
            });
            // one sample is enough: only the support and covariance are used
            let ds = generate(kind, 1, a.p, a.k, correlation, 0.0, trimreg::datagen::BETA_SD, 1.0, seed)?;
            let report = incoherence_from_gram(&ds.covariance, &ds.support, a.h, a.samples, seed)?;
            let resolved = json!({
                "source": "population", "design": kind, "p": a.p, "k": a.k, "correlation": correlation,
                "h": a.h, "samples": a.samples, "seed": seed,
            });
            (report, resolved)
        }
    };
    emit(&serde_json::to_string_pretty(&report).expect("report serializes"));
    let mut out = Outputs::create(&g.out_dir)?;
    out.json("incoherence.json", &report)?;
    out.finish("diag incoherence", &resolved, seed)
}

//! Experiment plans. Every plan deserializes from JSON with all fields
//! optional (missing fields take the defaults below) and unknown keys
//! rejected.

use serde::{Deserialize, Serialize};

use crate::bcd::{BcdConfig, StepSize, WeightUpdate};
use crate::datagen::{DesignKind, BETA_SD, M1_CORRELATION, M2_CORRELATION};
use crate::error::{Result, TrimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Trimmed ℓ1 by block coordinate descent.
    Trimmed,
    Lasso,
    Scad,
    Mcp,
    /// Trimmed ℓ1 by the proximal DC scheme.
    Dc,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Trimmed, Method::Lasso, Method::Scad, Method::Mcp, Method::Dc];

    pub fn name(self) -> &'static str {
        match self {
            Method::Trimmed => "trimmed",
            Method::Lasso => "lasso",
            Method::Scad => "scad",
            Method::Mcp => "mcp",
            Method::Dc => "dc",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let valid: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
                TrimError::domain(format!("unknown method {s:?}; valid: {}", valid.join(", ")))
            })
    }

    /// Whether the method uses the trim count.
    pub fn uses_trim(self) -> bool {
        matches!(self, Method::Trimmed | Method::Dc)
    }

    /// Mode used for the headline success probability. The convex ℓ1 path is
    /// judged on its exact zero pattern; the others on the magnitude ordering.
    pub fn primary_mode(self) -> SuccessMode {
        match self {
            Method::Lasso => SuccessMode::ExactZero,
            _ => SuccessMode::TopK,
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuccessMode {
    ExactZero,
    TopK,
}

/// How the trim count is chosen for each `(p, k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HPolicy {
    Fixed(usize),
    EqualK,
    /// `h = ⌈f·p⌉`
    FractionOfP(f64),
    Sweep(Vec<usize>),
}

impl HPolicy {
    pub fn resolve(&self, p: usize, k: usize) -> Result<Vec<usize>> {
        let hs = match self {
            HPolicy::Fixed(h) => vec![*h],
            HPolicy::EqualK => vec![k],
            HPolicy::FractionOfP(f) => {
                if !(0.0..=1.0).contains(f) {
                    return Err(TrimError::domain(format!("h fraction must lie in [0, 1], got {f}")));
                }
                vec![(f * p as f64).ceil() as usize]
            }
            HPolicy::Sweep(v) => v.clone(),
        };
        if hs.is_empty() {
            return Err(TrimError::domain("h sweep is empty"));
        }
        if let Some(h) = hs.iter().find(|&&h| h > p) {
            return Err(TrimError::domain(format!("h = {h} exceeds p = {p}")));
        }
        Ok(hs)
    }
}

/// Sample sizes for each `(p, k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NGrid {
    Explicit(Vec<usize>),
    /// `n = ⌈c·k·ln p⌉` for each factor `c`.
    Scaled(Vec<f64>),
}

impl NGrid {
    pub fn resolve(&self, p: usize, k: usize) -> Result<Vec<usize>> {
        let ns: Vec<usize> = match self {
            NGrid::Explicit(v) => v.clone(),
            NGrid::Scaled(c) => c
                .iter()
                .map(|c| (c * k.max(1) as f64 * (p as f64).ln()).ceil() as usize)
                .collect(),
        };
        if ns.is_empty() || ns.contains(&0) {
            return Err(TrimError::domain("sample-size grid must be non-empty and positive"));
        }
        Ok(ns)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dim {
    pub p: usize,
    pub k: usize,
}

/// Solver settings shared by all methods of a plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    pub max_iters: usize,
    pub tol_stationarity: f64,
    pub tol_objective: f64,
    /// Weight step; `null` means `1/λ`.
    pub tau: Option<f64>,
    pub w_update: WeightUpdate,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let c = BcdConfig::default();
        Self {
            max_iters: c.max_iters,
            tol_stationarity: c.tol_stationarity,
            tol_objective: c.tol_objective,
            tau: c.tau,
            w_update: c.w_update,
        }
    }
}

impl SolverSettings {
    pub fn config(&self, seed: u64) -> BcdConfig {
        BcdConfig {
            eta: StepSize::Auto,
            tau: self.tau,
            max_iters: self.max_iters,
            tol_stationarity: self.tol_stationarity,
            tol_objective: self.tol_objective,
            w_update: self.w_update,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        self.config(0).validate()
    }
}

/// `lo, lo + step, …, hi`, rounded to 1e−9 so decimal grids print cleanly.
pub fn log10_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    (0..count)
        .map(|i| ((lo + i as f64 * step) * 1e9).round() / 1e9)
        .collect()
}

/// λ values in descending order, as used for warm-started paths.
pub fn lambdas_descending(log10: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = log10.iter().map(|e| 10f64.powf(*e)).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v.dedup();
    v
}

fn check_lambda_grid(log10: &[f64]) -> Result<()> {
    if log10.is_empty() {
        return Err(TrimError::domain("lambda grid is empty"));
    }
    if log10.iter().any(|v| !v.is_finite()) {
        return Err(TrimError::domain("lambda grid must be finite"));
    }
    Ok(())
}

/// Plan for the support-recovery and error-curve experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentPlan {
    pub design: DesignKind,
    /// Covariance parameter; `null` picks the design's default
    /// (0.7 for M2, 0.3 for M1).
    pub correlation: Option<f64>,
    pub dims: Vec<Dim>,
    pub n_grid: NGrid,
    pub h_policy: HPolicy,
    pub log10_lambdas: Vec<f64>,
    pub methods: Vec<Method>,
    pub replicates: usize,
    pub base_seed: u64,
    pub cv_folds: usize,
    pub beta_sd: f64,
    pub noise_sd: f64,
    /// Magnitude below which an estimate counts as zero.
    pub zero_tol: f64,
    pub solver: SolverSettings,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        Self {
            design: DesignKind::M2,
            correlation: None,
            dims: vec![Dim { p: 64, k: 4 }, Dim { p: 128, k: 8 }, Dim { p: 256, k: 16 }],
            n_grid: NGrid::Scaled(vec![5.0, 10.0, 20.0, 30.0, 40.0]),
            h_policy: HPolicy::EqualK,
            log10_lambdas: log10_grid(-3.0, 1.0, 0.2),
            methods: vec![Method::Trimmed, Method::Lasso, Method::Scad, Method::Mcp],
            replicates: 50,
            base_seed: 0,
            cv_folds: 5,
            beta_sd: BETA_SD,
            noise_sd: 1.0,
            zero_tol: 1e-6,
            solver: SolverSettings::default(),
        }
    }
}

impl ExperimentPlan {
    /// Defaults for the error-curve experiment: `(p, k) = (128, 8)`,
    /// `n ∈ {400, 800, 1600, 3200, 6400}`, trimmed with `h ∈ {0, k}` and
    /// `log10 λ ∈ {−2.0, −1.8, …, 1.0}`. Smaller λ are never selected at
    /// these sample sizes and cost the most iterations.
    pub fn error_curves() -> Self {
        Self {
            dims: vec![Dim { p: 128, k: 8 }],
            n_grid: NGrid::Explicit(vec![400, 800, 1600, 3200, 6400]),
            log10_lambdas: log10_grid(-2.0, 1.0, 0.2),
            h_policy: HPolicy::Sweep(vec![0, 8]),
            methods: vec![Method::Trimmed],
            ..Self::default()
        }
    }

    /// Small-λ regime: `log10 λ ∈ {−3.0, …, −1.0}`, `β* ~ N(0, 0.8²)`,
    /// `h = ⌈0.05 p⌉`, trimmed against lasso.
    pub fn small_regime() -> Self {
        Self {
            log10_lambdas: log10_grid(-3.0, -1.0, 0.2),
            beta_sd: 0.8,
            h_policy: HPolicy::FractionOfP(0.05),
            methods: vec![Method::Trimmed, Method::Lasso],
            ..Self::default()
        }
    }

    /// Fills in design-dependent defaults.
    pub fn resolved(mut self) -> Self {
        if self.correlation.is_none() {
            self.correlation = Some(match self.design {
                DesignKind::M1 => M1_CORRELATION,
                _ => M2_CORRELATION,
            });
        }
        self
    }

    pub fn correlation(&self) -> f64 {
        self.correlation.unwrap_or(match self.design {
            DesignKind::M1 => M1_CORRELATION,
            _ => M2_CORRELATION,
        })
    }

    /// Design label used in output rows, e.g. `M2(0.7)`.
    pub fn design_label(&self) -> String {
        format!("{}({})", self.design, self.correlation())
    }

    pub fn validate(&self) -> Result<()> {
        if self.design == DesignKind::DiamondGgm {
            return Err(TrimError::domain("regression plans need design M2 or M1"));
        }
        if self.replicates == 0 {
            return Err(TrimError::domain("replicates must be at least 1"));
        }
        if self.dims.is_empty() {
            return Err(TrimError::domain("dimension grid is empty"));
        }
        if self.methods.is_empty() {
            return Err(TrimError::domain("method list is empty"));
        }
        if self.cv_folds < 2 {
            return Err(TrimError::domain("cv_folds must be at least 2"));
        }
        if !(self.zero_tol >= 0.0) {
            return Err(TrimError::domain("zero_tol must be non-negative"));
        }
        check_lambda_grid(&self.log10_lambdas)?;
        for d in &self.dims {
            if d.k > d.p || d.p == 0 {
                return Err(TrimError::domain(format!("invalid dimensions p = {}, k = {}", d.p, d.k)));
            }
            self.h_policy.resolve(d.p, d.k)?;
            for n in self.n_grid.resolve(d.p, d.k)? {
                if n < self.cv_folds {
                    return Err(TrimError::domain(format!("n = {n} is smaller than the fold count")));
                }
            }
        }
        self.solver.validate()
    }
}

/// Plan for the BCD-versus-DC convergence comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergencePlan {
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub h: usize,
    /// M2 correlation of the design (0 gives an isotropic design).
    pub correlation: f64,
    pub lambdas: Vec<f64>,
    pub seed: u64,
    pub beta_sd: f64,
    pub solver: SolverSettings,
}

impl Default for ConvergencePlan {
    fn default() -> Self {
        Self {
            n: 100,
            p: 500,
            k: 10,
            h: 25,
            correlation: 0.0,
            lambdas: vec![0.5, 5.0, 20.0],
            seed: 0,
            beta_sd: BETA_SD,
            solver: SolverSettings::default(),
        }
    }
}

impl ConvergencePlan {
    pub fn validate(&self) -> Result<()> {
        if self.k > self.p || self.h > self.p || self.n == 0 {
            return Err(TrimError::domain("invalid instance dimensions"));
        }
        if self.lambdas.is_empty() || self.lambdas.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(TrimError::domain("lambdas must be a non-empty list of positive values"));
        }
        self.solver.validate()
    }
}

/// Plan for the diamond-graph study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GgmPlan {
    pub rhos: Vec<f64>,
    pub n: usize,
    /// Values of `(p² − h)/p²`.
    pub h_fractions: Vec<f64>,
    pub log10_lambdas: Vec<f64>,
    pub methods: Vec<Method>,
    pub replicates: usize,
    pub base_seed: u64,
    pub zero_tol: f64,
    pub solver: SolverSettings,
}

impl Default for GgmPlan {
    fn default() -> Self {
        Self {
            rhos: vec![0.1, 0.3],
            n: 100,
            h_fractions: vec![0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0],
            log10_lambdas: log10_grid(-3.0, 1.0, 0.1),
            methods: vec![Method::Trimmed, Method::Lasso, Method::Scad, Method::Mcp],
            replicates: 50,
            base_seed: 0,
            zero_tol: 1e-6,
            solver: SolverSettings::default(),
        }
    }
}

impl GgmPlan {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 || self.n == 0 {
            return Err(TrimError::domain("replicates and n must be at least 1"));
        }
        if self.rhos.is_empty() || self.methods.is_empty() {
            return Err(TrimError::domain("rho and method lists must be non-empty"));
        }
        if self.methods.contains(&Method::Trimmed) && self.h_fractions.is_empty() {
            return Err(TrimError::domain("h fraction grid is empty"));
        }
        if let Some(f) = self.h_fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
            return Err(TrimError::domain(format!("h fraction must lie in [0, 1], got {f}")));
        }
        check_lambda_grid(&self.log10_lambdas)?;
        self.solver.validate()
    }
}

/// Plan for the initialization-robustness study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitPlan {
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub design: DesignKind,
    pub correlation: Option<f64>,
    pub num_inits: usize,
    /// Standard deviation of the random starting points.
    pub init_sd: f64,
    /// Fixed λ; `null` selects it by cross-validation of the trimmed method.
    pub lambda: Option<f64>,
    pub log10_lambdas: Vec<f64>,
    pub cv_folds: usize,
    pub methods: Vec<Method>,
    pub seed: u64,
    pub beta_sd: f64,
    pub solver: SolverSettings,
}

impl Default for InitPlan {
    fn default() -> Self {
        Self {
            n: 160,
            p: 256,
            k: 16,
            design: DesignKind::M2,
            correlation: None,
            num_inits: 50,
            init_sd: 1.0,
            lambda: None,
            log10_lambdas: log10_grid(-3.0, 1.0, 0.2),
            cv_folds: 5,
            methods: vec![Method::Trimmed, Method::Lasso, Method::Scad, Method::Mcp],
            seed: 0,
            beta_sd: BETA_SD,
            solver: SolverSettings::default(),
        }
    }
}

impl InitPlan {
    pub fn correlation(&self) -> f64 {
        self.correlation.unwrap_or(match self.design {
            DesignKind::M1 => M1_CORRELATION,
            _ => M2_CORRELATION,
        })
    }

    pub fn resolved(mut self) -> Self {
        self.correlation = Some(self.correlation());
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.design == DesignKind::DiamondGgm {
            return Err(TrimError::domain("initialization study needs design M2 or M1"));
        }
        if self.k > self.p || self.num_inits == 0 || self.n < self.cv_folds || self.cv_folds < 2 {
            return Err(TrimError::domain("invalid initialization-study dimensions"));
        }
        if let Some(l) = self.lambda {
            if !(l > 0.0 && l.is_finite()) {
                return Err(TrimError::domain("lambda must be positive"));
            }
        } else {
            check_lambda_grid(&self.log10_lambdas)?;
        }
        if self.methods.is_empty() {
            return Err(TrimError::domain("method list is empty"));
        }
        self.solver.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_lambda_grid() {
        let g = log10_grid(-3.0, 1.0, 0.2);
        assert_eq!(g.len(), 21);
        assert_eq!(g[0], -3.0);
        assert_eq!(g[1], -2.8);
        assert_eq!(g[20], 1.0);
        assert_eq!(log10_grid(-3.0, 1.0, 0.1).len(), 41);
    }

    #[test]
    fn scaled_grid_reaches_forty_k_log_p() {
        let ns = NGrid::Scaled(vec![5.0, 40.0]).resolve(64, 4).unwrap();
        assert_eq!(ns, vec![84, 666]);
    }

    #[test]
    fn h_policies() {
        assert_eq!(HPolicy::EqualK.resolve(64, 4).unwrap(), vec![4]);
        assert_eq!(HPolicy::FractionOfP(0.05).resolve(64, 4).unwrap(), vec![4]);
        assert_eq!(HPolicy::FractionOfP(0.05).resolve(128, 8).unwrap(), vec![7]);
        assert!(HPolicy::Fixed(65).resolve(64, 4).is_err());
    }

    #[test]
    fn plans_round_trip_and_reject_unknown_keys() {
        let plan = ExperimentPlan::default().resolved();
        let json = serde_json::to_string(&plan).unwrap();
        assert!(json.contains("\"equal_k\""));
        let back: ExperimentPlan = serde_json::from_str(&json).unwrap();
        assert_eq!(back, plan);
        let partial: ExperimentPlan = serde_json::from_str(r#"{"replicates": 3}"#).unwrap();
        assert_eq!(partial.replicates, 3);
        assert_eq!(partial.cv_folds, 5);
        let err = serde_json::from_str::<ExperimentPlan>(r#"{"replicate": 3}"#).unwrap_err();
        assert!(err.to_string().contains("replicates"));
        assert!(ExperimentPlan::default().validate().is_ok());
        assert!(ExperimentPlan { replicates: 0, ..Default::default() }.validate().is_err());
        assert!(ExperimentPlan { log10_lambdas: vec![], ..Default::default() }.validate().is_err());
    }

    #[test]
    fn method_names_resolve() {
        for m in Method::ALL {
            assert_eq!(Method::parse(m.name()).unwrap(), m);
        }
        let err = Method::parse("ridge").unwrap_err().to_string();
        assert!(err.contains("trimmed") && err.contains("mcp"));
    }

    #[test]
    fn design_label_shows_default_correlation() {
        let p = ExperimentPlan { design: DesignKind::M1, ..Default::default() };
        assert_eq!(p.design_label(), "M1(0.3)");
        assert_eq!(ExperimentPlan::default().design_label(), "M2(0.7)");
    }
}

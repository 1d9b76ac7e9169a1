//! Comparison solvers: proximal gradient for ℓ1, SCAD and MCP, and a
//! proximal difference-of-convex scheme for the trimmed penalty.
//!
//! All of them use the same step policy as the block solver (`1/L_f`, or
//! backtracking for the graphical loss) and record the same trace rows.

use serde::Serialize;

use crate::bcd::{diverged, proximal_step, BcdConfig, IterRecord, SolverStatus, SolverTrace, PLATEAU_WINDOW};
use crate::error::{Result, TrimError};
use crate::losses::{PenaltyLayout, SmoothLoss};
use crate::penalty::{self, soft_threshold};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PenaltyKind {
    L1,
    Scad,
    Mcp,
    TrimmedDc,
}

/// A separable penalty (or the trimmed penalty in DC form) with its
/// parameters. `extra` is SCAD's `a`, MCP's `γ` or the trim count `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PenaltySpec {
    pub kind: PenaltyKind,
    pub lambda: f64,
    pub extra: f64,
}

/// SCAD shape used throughout the experiments.
pub const SCAD_A: f64 = 3.0;
/// MCP shape used throughout the experiments.
pub const MCP_GAMMA: f64 = 2.5;

impl PenaltySpec {
    pub fn l1(lambda: f64) -> Self {
        Self { kind: PenaltyKind::L1, lambda, extra: 0.0 }
    }

    pub fn scad(lambda: f64, a: f64) -> Self {
        Self { kind: PenaltyKind::Scad, lambda, extra: a }
    }

    pub fn mcp(lambda: f64, gamma: f64) -> Self {
        Self { kind: PenaltyKind::Mcp, lambda, extra: gamma }
    }

    pub fn trimmed_dc(lambda: f64, h: usize) -> Self {
        Self { kind: PenaltyKind::TrimmedDc, lambda, extra: h as f64 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(TrimError::domain(format!("lambda must be non-negative, got {}", self.lambda)));
        }
        match self.kind {
            PenaltyKind::Scad if !(self.extra > 2.0) => {
                Err(TrimError::domain(format!("SCAD needs a > 2, got {}", self.extra)))
            }
            PenaltyKind::Mcp if !(self.extra > 1.0) => {
                Err(TrimError::domain(format!("MCP needs gamma > 1, got {}", self.extra)))
            }
            PenaltyKind::TrimmedDc if !(self.extra >= 0.0 && self.extra.fract() == 0.0) => {
                Err(TrimError::domain(format!("trim count must be a non-negative integer, got {}", self.extra)))
            }
            _ => Ok(()),
        }
    }

    /// Penalty of a single magnitude. For the DC form this is the convex ℓ1 part.
    pub fn scalar_value(&self, x: f64) -> f64 {
        let lam = self.lambda;
        let t = x.abs();
        match self.kind {
            PenaltyKind::L1 | PenaltyKind::TrimmedDc => lam * t,
            PenaltyKind::Scad => {
                let a = self.extra;
                if t <= lam {
                    lam * t
                } else if t <= a * lam {
                    (2.0 * a * lam * t - t * t - lam * lam) / (2.0 * (a - 1.0))
                } else {
                    lam * lam * (a + 1.0) / 2.0
                }
            }
            PenaltyKind::Mcp => {
                let g = self.extra;
                if t <= g * lam {
                    lam * t - t * t / (2.0 * g)
                } else {
                    g * lam * lam / 2.0
                }
            }
        }
    }

    /// Derivative of the penalty at magnitude `t > 0`; at 0 the
    /// subdifferential is `[-λ, λ]` for every kind.
    fn slope(&self, t: f64) -> f64 {
        let lam = self.lambda;
        match self.kind {
            PenaltyKind::L1 | PenaltyKind::TrimmedDc => lam,
            PenaltyKind::Scad => {
                let a = self.extra;
                if t <= lam {
                    lam
                } else {
                    ((a * lam - t) / (a - 1.0)).max(0.0)
                }
            }
            PenaltyKind::Mcp => (lam - t / self.extra).max(0.0),
        }
    }

    fn label(&self) -> &'static str {
        match self.kind {
            PenaltyKind::L1 => "L1",
            PenaltyKind::Scad => "SCAD",
            PenaltyKind::Mcp => "MCP",
            PenaltyKind::TrimmedDc => "DC-prox",
        }
    }
}

/// Exact proximal map of `t · penalty` at `z`.
///
/// SCAD and MCP are piecewise quadratic in `|x|`, so the global minimizer is
/// among each piece's stationary point (clamped to the piece) and the piece
/// endpoints. When the prox objective is convex that is the usual closed form
/// (three-piece SCAD, firm thresholding for MCP); otherwise the candidates are
/// compared directly, which reduces to a hard-threshold comparison.
pub fn prox_scalar(spec: &PenaltySpec, z: f64, t: f64) -> Result<f64> {
    spec.validate()?;
    if !(t > 0.0) {
        return Err(TrimError::domain(format!("prox step must be positive, got {t}")));
    }
    Ok(prox_scalar_unchecked(spec, z, t))
}

fn prox_scalar_unchecked(spec: &PenaltySpec, z: f64, t: f64) -> f64 {
    let lam = spec.lambda;
    let az = z.abs();
    let x = match spec.kind {
        PenaltyKind::L1 | PenaltyKind::TrimmedDc => return soft_threshold(z, t * lam),
        PenaltyKind::Scad => {
            let a = spec.extra;
            if t < a - 1.0 {
                // convex prox objective: three-piece closed form
                if az <= lam * (1.0 + t) {
                    (az - t * lam).max(0.0)
                } else if az <= a * lam {
                    ((a - 1.0) * az - t * a * lam) / (a - 1.0 - t)
                } else {
                    az
                }
            } else {
                let cands = [0.0, (az - t * lam).clamp(0.0, lam), lam, a * lam, az.max(a * lam)];
                best_candidate(spec, az, t, &cands)
            }
        }
        PenaltyKind::Mcp => {
            let g = spec.extra;
            if t < g {
                // firm thresholding
                if az <= t * lam {
                    0.0
                } else if az <= g * lam {
                    (az - t * lam) / (1.0 - t / g)
                } else {
                    az
                }
            } else {
                let cands = [0.0, g * lam, az.max(g * lam)];
                best_candidate(spec, az, t, &cands)
            }
        }
    };
    x.copysign(z)
}

fn best_candidate(spec: &PenaltySpec, az: f64, t: f64, cands: &[f64]) -> f64 {
    let obj = |x: f64| 0.5 * (x - az) * (x - az) + t * spec.scalar_value(x);
    let mut best = cands[0];
    let mut best_val = obj(best);
    for &c in &cands[1..] {
        let v = obj(c);
        // prefer the smaller magnitude on exact ties
        if v < best_val || (v == best_val && c < best) {
            best = c;
            best_val = v;
        }
    }
    best
}

/// `Σ_i s_i pen(θ_{j_i})` over the penalized coordinates.
fn separable_penalty(spec: &PenaltySpec, layout: &PenaltyLayout, theta: &[f64]) -> f64 {
    layout
        .coords
        .iter()
        .zip(&layout.scale)
        .map(|(&j, &s)| s * spec.scalar_value(theta[j]))
        .sum()
}

/// Squared norm of the minimum-norm element of `∇L + ∂P` for a separable
/// penalty, where `shift` is subtracted from the penalized gradient entries
/// (the DC linearization term; zero otherwise).
fn separable_stationarity(
    spec: &PenaltySpec,
    layout: &PenaltyLayout,
    grad: &[f64],
    theta: &[f64],
    shift: Option<&[f64]>,
) -> f64 {
    let mut u = grad.to_vec();
    for (i, (&j, &s)) in layout.coords.iter().zip(&layout.scale).enumerate() {
        let g = grad[j] - shift.map_or(0.0, |sh| sh[i]);
        u[j] = if theta[j] != 0.0 {
            g + s * spec.slope(theta[j].abs()) * theta[j].signum()
        } else {
            soft_threshold(g, s * spec.lambda)
        };
    }
    u.iter().map(|x| x * x).sum()
}

/// Proximal gradient for `L(θ) + P(θ)` with a separable `P` (ℓ1, SCAD, MCP).
pub fn solve_prox_gradient<L: SmoothLoss>(
    loss: &L,
    spec: &PenaltySpec,
    init: &[f64],
    config: &BcdConfig,
) -> Result<(Vec<f64>, SolverTrace)> {
    spec.validate()?;
    if spec.kind == PenaltyKind::TrimmedDc {
        let h = spec.extra as usize;
        return solve_dc_trimmed(loss, h, spec.lambda, init, config);
    }
    run_composite(loss, spec, init, config, None)
}

/// Proximal DC scheme for `L(θ) + λ R(θ; h)` with `R = ‖·‖₁ − (top-h sum)`:
/// each step linearizes the top-h sum at the current iterate with a sign
/// selector `s` and takes one proximal-gradient step on
/// `L(θ) + λ‖θ‖₁ − λ⟨s, θ⟩`. The trace records the true trimmed objective.
pub fn solve_dc_trimmed<L: SmoothLoss>(
    loss: &L,
    h: usize,
    lambda: f64,
    init: &[f64],
    config: &BcdConfig,
) -> Result<(Vec<f64>, SolverTrace)> {
    let layout = loss.penalty_layout();
    if h > layout.len() {
        return Err(TrimError::domain(format!("trim count h = {h} out of range 0..={}", layout.len())));
    }
    let spec = PenaltySpec::trimmed_dc(lambda, h);
    spec.validate()?;
    run_composite(loss, &spec, init, config, Some(h))
}

fn run_composite<L: SmoothLoss>(
    loss: &L,
    spec: &PenaltySpec,
    init: &[f64],
    config: &BcdConfig,
    dc_trim: Option<usize>,
) -> Result<(Vec<f64>, SolverTrace)> {
    config.validate()?;
    if init.len() != loss.dim() {
        return Err(TrimError::domain("initial parameter has the wrong length"));
    }
    if init.iter().any(|v| !v.is_finite()) {
        return Err(TrimError::domain("initial parameter must be finite"));
    }
    let layout = loss.penalty_layout();
    let lambda = spec.lambda;

    // DC: λ s_i scale_i on the penalized coordinates
    let dc_shift = |theta: &[f64]| -> Option<Vec<f64>> {
        dc_trim.map(|h| {
            let vals = layout.gather(theta);
            let s = penalty::top_h_sign_selector(&vals, h).expect("valid trim count");
            s.iter().zip(&layout.scale).map(|(si, sc)| lambda * si * sc).collect()
        })
    };
    let objective = |loss_val: f64, theta: &[f64]| -> f64 {
        match dc_trim {
            Some(h) => {
                let r = layout.magnitudes(theta);
                loss_val + lambda * penalty::trimmed_l1(&r, h).expect("valid trim count")
            }
            None => loss_val + separable_penalty(spec, &layout, theta),
        }
    };

    let mut trace = SolverTrace::new(spec.label(), lambda, 0.0, config.seed);
    let mut theta = init.to_vec();
    let (mut loss_val, mut grad) = loss.value_grad(&theta)?;
    let mut f = objective(loss_val, &theta);
    let mut shift = dc_shift(&theta);
    trace.records.push(IterRecord {
        iter: 0,
        objective: f,
        reduced_objective: f,
        g_k: 0.0,
        t: separable_stationarity(spec, &layout, &grad, &theta, shift.as_deref()),
        step: 0.0,
        w_change: 0.0,
    });
    if !f.is_finite() {
        return Err(diverged(0, "non-finite initial objective", trace));
    }

    let mut plateau = 0usize;
    for k in 1..=config.max_iters {
        let mut lin_grad = grad.clone();
        if let Some(sh) = &shift {
            for (i, &j) in layout.coords.iter().enumerate() {
                lin_grad[j] -= sh[i];
            }
        }
        let prox = |z: &[f64], t: f64| -> Vec<f64> {
            let mut out = z.to_vec();
            for (&j, &s) in layout.coords.iter().zip(&layout.scale) {
                out[j] = prox_scalar_unchecked(spec, z[j], t * s);
            }
            out
        };
        let step = proximal_step(loss, &theta, loss_val, &grad, &lin_grad, config.eta, prox);
        let (theta_new, new_loss, new_grad, eta) = match step {
            Ok(s) => s,
            Err(reason) => return Err(diverged(k, &reason, trace)),
        };
        let f_new = objective(new_loss, &theta_new);
        if !f_new.is_finite() {
            return Err(diverged(k, "non-finite objective", trace));
        }
        let dtheta: f64 = theta_new.iter().zip(&theta).map(|(a, b)| (a - b).powi(2)).sum();
        let new_shift = dc_shift(&theta_new);
        let t = separable_stationarity(spec, &layout, &new_grad, &theta_new, new_shift.as_deref());
        trace.records.push(IterRecord {
            iter: k,
            objective: f_new,
            reduced_objective: f_new,
            g_k: 0.5 / eta * dtheta,
            t,
            step: eta,
            w_change: 0.0,
        });
        let change = (f - f_new).abs();
        theta = theta_new;
        loss_val = new_loss;
        grad = new_grad;
        shift = new_shift;
        f = f_new;
        if t <= config.tol_stationarity {
            trace.status = SolverStatus::Stationary;
            break;
        }
        if change <= config.tol_objective * f_new.abs().max(1.0) {
            plateau += 1;
            if plateau >= PLATEAU_WINDOW {
                trace.status = SolverStatus::ObjectivePlateau;
                break;
            }
        } else {
            plateau = 0;
        }
    }
    Ok((theta, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::LeastSquaresLoss;
    use crate::rng::Stream;
    use nalgebra::{DMatrix, DVector};
    use trimreg_oracles as oracle;

    #[test]
    fn prox_examples() {
        assert_eq!(prox_scalar(&PenaltySpec::l1(1.0), 2.0, 0.5).unwrap(), 1.5);
        for spec in [
            PenaltySpec::l1(0.7),
            PenaltySpec::scad(0.7, 3.0),
            PenaltySpec::mcp(0.7, 2.5),
            PenaltySpec::trimmed_dc(0.7, 1),
        ] {
            assert_eq!(prox_scalar(&spec, 0.0, 0.9).unwrap(), 0.0);
        }
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(prox_scalar(&PenaltySpec::scad(1.0, 2.0), 1.0, 1.0).is_err());
        assert!(prox_scalar(&PenaltySpec::mcp(1.0, 1.0), 1.0, 1.0).is_err());
        assert!(prox_scalar(&PenaltySpec::l1(-1.0), 1.0, 1.0).is_err());
        assert!(prox_scalar(&PenaltySpec::l1(1.0), 1.0, 0.0).is_err());
    }

    #[test]
    fn scad_and_mcp_match_grid_oracle() {
        let lam = 0.8;
        for zi in -20..=20 {
            let z = zi as f64 * 0.37;
            for &t in &[0.1, 0.5, 1.0, 1.7, 2.4, 4.0] {
                let scad = PenaltySpec::scad(lam, 3.0);
                let got = prox_scalar(&scad, z, t).unwrap();
                let want = oracle::scalar_prox_grid(|x| oracle::scad_value(x, lam, 3.0), z, t);
                let obj = |x: f64| 0.5 * (x - z).powi(2) + t * oracle::scad_value(x, lam, 3.0);
                assert!(
                    (got - want).abs() < 1e-5 || (obj(got) - obj(want)).abs() < 1e-10,
                    "SCAD z={z} t={t}: {got} vs {want}"
                );
                assert!(obj(got) <= obj(want) + 1e-10);

                let mcp = PenaltySpec::mcp(lam, 2.5);
                let got = prox_scalar(&mcp, z, t).unwrap();
                let want = oracle::scalar_prox_grid(|x| oracle::mcp_value(x, lam, 2.5), z, t);
                let obj = |x: f64| 0.5 * (x - z).powi(2) + t * oracle::mcp_value(x, lam, 2.5);
                assert!(
                    (got - want).abs() < 1e-5 || (obj(got) - obj(want)).abs() < 1e-10,
                    "MCP z={z} t={t}: {got} vs {want}"
                );
                assert!(obj(got) <= obj(want) + 1e-10);
            }
        }
    }

    fn small_instance(seed: u64, n: usize, p: usize) -> LeastSquaresLoss {
        let mut s = Stream::new(seed);
        let x = DMatrix::from_fn(n, p, |_, _| s.normal());
        let y = DVector::from_fn(n, |_, _| 2.0 * s.normal());
        LeastSquaresLoss::new(x, y).unwrap()
    }

    #[test]
    fn huge_lambda_gives_zero() {
        let loss = small_instance(1, 20, 5);
        let (theta, _) = solve_prox_gradient(&loss, &PenaltySpec::l1(1e6), &[1.0; 5], &BcdConfig::default()).unwrap();
        assert!(theta.iter().all(|&t| t == 0.0));
    }

    #[test]
    fn lasso_matches_coordinate_descent() {
        let loss = small_instance(2, 5, 3);
        let lam = 0.3;
        let cfg = BcdConfig { tol_stationarity: 1e-20, tol_objective: 1e-16, max_iters: 200_000, ..Default::default() };
        let (theta, trace) = solve_prox_gradient(&loss, &PenaltySpec::l1(lam), &[0.0; 3], &cfg).unwrap();
        let want = oracle::weighted_lasso_cd(loss.x(), loss.y(), lam, &[1.0; 3], 1e-15);
        for (a, b) in theta.iter().zip(&want) {
            assert!((a - b).abs() < 1e-6, "{theta:?} vs {want:?}");
        }
        assert!(trace.is_monotone(1e-12));
    }

    #[test]
    fn scad_on_orthogonal_design_is_coordinatewise() {
        // X = sqrt(n/2) I  makes the loss (1/2)||θ - z||² + const with z = (2/n) Xᵀy
        let n = 4;
        let scale = (n as f64 / 2.0).sqrt();
        let x = DMatrix::identity(n, n) * scale;
        let y = DVector::from_vec(vec![3.0, -0.4, 1.2, 0.05]);
        let loss = LeastSquaresLoss::new(x.clone(), y.clone()).unwrap();
        let z = x.tr_mul(&y) * (2.0 / n as f64);
        let spec = PenaltySpec::scad(0.5, 3.0);
        let cfg = BcdConfig { eta: crate::bcd::StepSize::Fixed(1.0), ..Default::default() };
        let (theta, _) = solve_prox_gradient(&loss, &spec, &[0.0; 4], &cfg).unwrap();
        for j in 0..n {
            let want = prox_scalar(&spec, z[j], 1.0).unwrap();
            assert!((theta[j] - want).abs() < 1e-10, "coord {j}");
        }
    }

    #[test]
    fn nonconvex_baselines_descend() {
        let loss = small_instance(3, 30, 10);
        for spec in [PenaltySpec::scad(0.4, 3.0), PenaltySpec::mcp(0.4, 2.5)] {
            let (_, trace) = solve_prox_gradient(&loss, &spec, &[0.0; 10], &BcdConfig::default()).unwrap();
            assert!(trace.is_monotone(1e-10), "{:?}", spec.kind);
        }
    }

    #[test]
    fn dc_with_no_trim_equals_lasso() {
        let loss = small_instance(4, 25, 8);
        let cfg = BcdConfig { max_iters: 300, ..Default::default() };
        let (a, ta) = solve_dc_trimmed(&loss, 0, 0.3, &[0.0; 8], &cfg).unwrap();
        let (b, tb) = solve_prox_gradient(&loss, &PenaltySpec::l1(0.3), &[0.0; 8], &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta.records.len(), tb.records.len());
        for (ra, rb) in ta.records.iter().zip(&tb.records) {
            assert!((ra.objective - rb.objective).abs() <= 1e-12 * rb.objective.abs());
            assert_eq!(ra.step, rb.step);
        }
    }

    #[test]
    fn dc_full_trim_reaches_least_squares() {
        // start near the least-squares fit so no coordinate changes sign
        let loss = small_instance(5, 30, 4);
        let ols = oracle::weighted_lasso_cd(loss.x(), loss.y(), 0.0, &[0.0; 4], 1e-14);
        let init: Vec<f64> = ols.iter().map(|v| 1.2 * v).collect();
        let (theta, trace) = solve_dc_trimmed(&loss, 4, 2.0, &init, &BcdConfig::default()).unwrap();
        let (_, g) = loss.value_grad(&theta).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-3), "{g:?}");
        assert!(trace.is_monotone(1e-8));
    }

    #[test]
    fn dc_objective_identity() {
        let mut s = Stream::new(8);
        for _ in 0..50 {
            let p = 2 + s.below(8);
            let h = s.below(p + 1);
            let theta: Vec<f64> = (0..p).map(|_| s.normal()).collect();
            let sel = penalty::top_h_sign_selector(&theta, h).unwrap();
            let l1: f64 = theta.iter().map(|t| t.abs()).sum();
            let lin: f64 = sel.iter().zip(&theta).map(|(a, b)| a * b).sum();
            let r = penalty::trimmed_l1(&theta, h).unwrap();
            assert!((l1 - lin - r).abs() < 1e-12);
        }
    }

    #[test]
    fn dc_descends_on_trimmed_objective() {
        let loss = small_instance(6, 40, 12);
        let (_, trace) = solve_dc_trimmed(&loss, 3, 0.5, &[0.0; 12], &BcdConfig::default()).unwrap();
        assert!(trace.is_monotone(1e-8));
        assert_eq!(trace.method, "DC-prox");
    }

    #[test]
    fn baselines_are_deterministic() {
        let loss = small_instance(7, 30, 6);
        let spec = PenaltySpec::mcp(0.3, 2.5);
        let a = solve_prox_gradient(&loss, &spec, &[0.0; 6], &BcdConfig::default()).unwrap();
        let b = solve_prox_gradient(&loss, &spec, &[0.0; 6], &BcdConfig::default()).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }
}

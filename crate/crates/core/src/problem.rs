use crate::error::{Result, TrimError};
use crate::losses::{PenaltyLayout, SmoothLoss};
use crate::penalty::{self, WeightVector};

/// A smooth loss plus `λ` times the trimmed ℓ1 penalty on the loss's
/// penalized coordinates, with `h` of them exempt.
#[derive(Debug, Clone)]
pub struct TrimmedProblem<L> {
    loss: L,
    lambda: f64,
    h: usize,
    layout: PenaltyLayout,
}

impl<L: SmoothLoss> TrimmedProblem<L> {
    /// `lambda = 0` is allowed and switches the penalty off.
    pub fn new(loss: L, lambda: f64, h: usize) -> Result<Self> {
        let layout = loss.penalty_layout();
        if h > layout.len() {
            return Err(TrimError::domain(format!(
                "trim count h = {h} out of range 0..={}",
                layout.len()
            )));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(TrimError::domain(format!("lambda must be non-negative, got {lambda}")));
        }
        Ok(Self { loss, lambda, h, layout })
    }

    pub fn loss(&self) -> &L {
        &self.loss
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn layout(&self) -> &PenaltyLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.loss.dim()
    }

    /// Number of penalized coordinates (the length of the weight vector).
    pub fn penalty_dim(&self) -> usize {
        self.layout.len()
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self>
    where
        L: Clone,
    {
        Self::new(self.loss.clone(), lambda, self.h)
    }

    pub fn with_h(&self, h: usize) -> Result<Self>
    where
        L: Clone,
    {
        Self::new(self.loss.clone(), self.lambda, h)
    }

    /// `r(θ)` on the penalized coordinates.
    pub fn magnitudes(&self, theta: &[f64]) -> Vec<f64> {
        self.layout.magnitudes(theta)
    }

    /// `λ R(θ; h)`, the reduced penalty.
    pub fn penalty(&self, theta: &[f64]) -> f64 {
        let r = self.magnitudes(theta);
        // h <= layout length is checked on construction
        self.lambda * penalty::trimmed_l1(&r, self.h).expect("valid trim count")
    }

    /// `L(θ) + λ R(θ; h)`.
    pub fn objective(&self, theta: &[f64]) -> Result<f64> {
        Ok(self.loss.value(theta)? + self.penalty(theta))
    }

    /// `L(θ) + λ ⟨w, r(θ)⟩`, the joint objective over `(θ, w)`.
    pub fn joint_objective(&self, theta: &[f64], w: &[f64]) -> Result<f64> {
        Ok(self.loss.value(theta)? + self.joint_penalty(theta, w))
    }

    pub(crate) fn joint_penalty(&self, theta: &[f64], w: &[f64]) -> f64 {
        let r = self.magnitudes(theta);
        self.lambda * r.iter().zip(w).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Binary weights trimming the `h` largest penalized magnitudes of `theta`.
    pub fn optimal_weights(&self, theta: &[f64]) -> WeightVector {
        penalty::optimal_weights(&self.magnitudes(theta), self.h).expect("valid trim count")
    }

    /// Weighted soft thresholding of `z` with step `t`: penalized coordinate
    /// `j` is shrunk by `t λ w_i s_i`, the rest pass through.
    pub fn prox(&self, z: &[f64], w: &[f64], t: f64) -> Vec<f64> {
        let mut out = z.to_vec();
        for (i, (&j, &s)) in self.layout.coords.iter().zip(&self.layout.scale).enumerate() {
            out[j] = penalty::soft_threshold(z[j], t * self.lambda * w[i] * s);
        }
        out
    }

    /// Minimum-norm element of `∂_θ F(θ, w)` given the loss gradient.
    pub fn theta_subgradient(&self, grad: &[f64], theta: &[f64], w: &[f64]) -> Vec<f64> {
        let mut u = grad.to_vec();
        let th = self.layout.gather(theta);
        let g = self.layout.gather(grad);
        let scaled_w: Vec<f64> = w.iter().zip(&self.layout.scale).map(|(a, b)| a * b).collect();
        let sub = penalty::min_norm_theta_subgradient(&g, &th, &scaled_w, self.lambda);
        for (&j, v) in self.layout.coords.iter().zip(sub) {
            u[j] = v;
        }
        u
    }
}

//! Smooth loss backends.
//!
//! Both losses work on a flat parameter vector. For the graphical model the
//! vector is the packed upper triangle of the symmetric precision matrix (see
//! [`GaussianGraphicalLoss`]), which keeps iterates symmetric by construction.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Result, TrimError};
use crate::rng::Stream;

/// Safety factor applied on top of the power-iteration estimate of `λ_max`.
pub const LIPSCHITZ_INFLATION: f64 = 1.01;

/// Which coordinates carry a penalty, and with what multiplicity.
///
/// The trimming weights live on the penalized coordinates only; coordinate
/// `coords[i]` contributes `scale[i] * |θ_j|` to `r(θ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyLayout {
    pub coords: Vec<usize>,
    pub scale: Vec<f64>,
}

impl PenaltyLayout {
    /// Every coordinate penalized once.
    pub fn full(p: usize) -> Self {
        Self {
            coords: (0..p).collect(),
            scale: vec![1.0; p],
        }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// `r(θ)`: scaled magnitudes of the penalized coordinates.
    pub fn magnitudes(&self, theta: &[f64]) -> Vec<f64> {
        self.coords
            .iter()
            .zip(&self.scale)
            .map(|(&j, &s)| s * theta[j].abs())
            .collect()
    }

    /// Values of the penalized coordinates, in layout order.
    pub fn gather(&self, theta: &[f64]) -> Vec<f64> {
        self.coords.iter().map(|&j| theta[j]).collect()
    }
}

/// A smooth convex loss with value, gradient and curvature information.
pub trait SmoothLoss: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, theta: &[f64]) -> Result<f64>;

    fn value_grad(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)>;

    /// Global gradient Lipschitz constant, when the loss has one.
    fn lipschitz(&self) -> Option<f64>;

    /// Curvature estimate at `theta`; used to seed the step-size search for
    /// losses without a global constant.
    fn local_lipschitz(&self, theta: &[f64]) -> Result<f64> {
        let _ = theta;
        self.lipschitz()
            .ok_or_else(|| TrimError::domain("loss has no Lipschitz estimate"))
    }

    fn penalty_layout(&self) -> PenaltyLayout {
        PenaltyLayout::full(self.dim())
    }
}

impl<T: SmoothLoss + ?Sized> SmoothLoss for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn value(&self, theta: &[f64]) -> Result<f64> {
        (**self).value(theta)
    }

    fn value_grad(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        (**self).value_grad(theta)
    }

    fn lipschitz(&self) -> Option<f64> {
        (**self).lipschitz()
    }

    fn local_lipschitz(&self, theta: &[f64]) -> Result<f64> {
        (**self).local_lipschitz(theta)
    }

    fn penalty_layout(&self) -> PenaltyLayout {
        (**self).penalty_layout()
    }
}

/// Largest eigenvalue of a symmetric PSD operator by power iteration, stopped
/// when the Rayleigh quotient changes by less than `rel_tol` (relative).
pub fn power_iteration(
    dim: usize,
    apply: impl Fn(&DVector<f64>) -> DVector<f64>,
    rel_tol: f64,
    max_iters: usize,
) -> f64 {
    let mut s = Stream::new(0x5eed_1f0e);
    let mut v = DVector::from_fn(dim, |_, _| 1.0 + 0.1 * s.normal());
    v /= v.norm();
    let mut rq = 0.0;
    for _ in 0..max_iters {
        let av = apply(&v);
        let new_rq = v.dot(&av);
        let norm = av.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = av / norm;
        if (new_rq - rq).abs() <= rel_tol * new_rq.abs() {
            return new_rq;
        }
        rq = new_rq;
    }
    rq
}

/// `(1/n) ‖Xθ − y‖²`.
#[derive(Debug, Clone)]
pub struct LeastSquaresLoss {
    x: DMatrix<f64>,
    y: DVector<f64>,
    gram: Option<GramCache>,
    lipschitz: f64,
}

#[derive(Debug, Clone)]
struct GramCache {
    /// XᵀX / n
    xtx: DMatrix<f64>,
    /// Xᵀy / n
    xty: DVector<f64>,
    /// yᵀy / n
    yty: f64,
}

impl LeastSquaresLoss {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let (n, p) = x.shape();
        if n == 0 || p == 0 {
            return Err(TrimError::domain("design matrix must be non-empty"));
        }
        if y.len() != n {
            return Err(TrimError::domain(format!(
                "response length {} does not match {n} rows",
                y.len()
            )));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(TrimError::domain("design and response must be finite"));
        }
        let nf = n as f64;
        // a Gram product costs p² against 2np for the direct one
        let gram = (2 * n > p).then(|| GramCache {
            xtx: x.tr_mul(&x) / nf,
            xty: x.tr_mul(&y) / nf,
            yty: y.norm_squared() / nf,
        });
        let lipschitz = {
            let lam = match &gram {
                Some(g) => power_iteration(p, |v| &g.xtx * v, 1e-6, 100_000) * nf,
                None => power_iteration(p, |v| x.tr_mul(&(&x * v)), 1e-6, 100_000),
            };
            2.0 / nf * lam * LIPSCHITZ_INFLATION
        };
        Ok(Self { x, y, gram, lipschitz })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    fn check_dim(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.x.ncols() {
            return Err(TrimError::domain(format!(
                "parameter length {} does not match {} columns",
                theta.len(),
                self.x.ncols()
            )));
        }
        Ok(())
    }

    /// Value and gradient `(2/n) Xᵀ(Xθ − y)`.
    pub fn value_grad_vec(&self, theta: &[f64]) -> Result<(f64, DVector<f64>)> {
        self.check_dim(theta)?;
        let th = DVector::from_column_slice(theta);
        match &self.gram {
            Some(g) => {
                let gt = &g.xtx * &th;
                let value = th.dot(&gt) - 2.0 * g.xty.dot(&th) + g.yty;
                Ok((value.max(0.0), (gt - &g.xty) * 2.0))
            }
            None => {
                let n = self.n() as f64;
                let r = &self.x * th - &self.y;
                let grad = self.x.tr_mul(&r) * (2.0 / n);
                Ok((r.norm_squared() / n, grad))
            }
        }
    }
}

impl SmoothLoss for LeastSquaresLoss {
    fn dim(&self) -> usize {
        self.x.ncols()
    }

    fn value(&self, theta: &[f64]) -> Result<f64> {
        self.check_dim(theta)?;
        let th = DVector::from_column_slice(theta);
        match &self.gram {
            Some(g) => Ok((th.dot(&(&g.xtx * &th)) - 2.0 * g.xty.dot(&th) + g.yty).max(0.0)),
            None => Ok((&self.x * th - &self.y).norm_squared() / self.n() as f64),
        }
    }

    fn value_grad(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (v, g) = self.value_grad_vec(theta)?;
        Ok((v, g.as_slice().to_vec()))
    }

    fn lipschitz(&self) -> Option<f64> {
        Some(self.lipschitz)
    }
}

/// `trace(ŜΘ) − log det Θ` over symmetric positive-definite `Θ`.
///
/// As a [`SmoothLoss`] the parameter is packed: the `p` diagonal entries
/// first, then the upper-triangle entries `(i, j), i < j`, row by row. Only the
/// off-diagonal block is penalized, with scale 2 so that the packed penalty
/// equals the penalty summed over both `(i, j)` and `(j, i)`.
#[derive(Debug, Clone)]
pub struct GaussianGraphicalLoss {
    s_hat: DMatrix<f64>,
}

impl GaussianGraphicalLoss {
    pub fn new(s_hat: DMatrix<f64>) -> Result<Self> {
        let p = s_hat.nrows();
        if p == 0 || s_hat.ncols() != p {
            return Err(TrimError::domain("sample covariance must be square and non-empty"));
        }
        for i in 0..p {
            if !(s_hat[(i, i)] > 0.0) {
                return Err(TrimError::domain(format!("diagonal entry {i} is not positive")));
            }
            for j in 0..i {
                if (s_hat[(i, j)] - s_hat[(j, i)]).abs() > 1e-10 {
                    return Err(TrimError::domain("sample covariance is not symmetric"));
                }
            }
        }
        Ok(Self { s_hat })
    }

    pub fn p(&self) -> usize {
        self.s_hat.nrows()
    }

    pub fn sample_covariance(&self) -> &DMatrix<f64> {
        &self.s_hat
    }

    /// Number of off-diagonal pairs `p(p−1)/2`.
    pub fn pair_count(&self) -> usize {
        let p = self.p();
        p * (p - 1) / 2
    }

    /// Value `trace(ŜΘ) − log det Θ` and gradient `Ŝ − Θ⁻¹`.
    pub fn value_grad_matrix(&self, theta: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)> {
        let chol = Cholesky::new(theta.clone()).ok_or(TrimError::NotPositiveDefinite)?;
        let logdet: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let value = self.s_hat.component_mul(theta).sum() - logdet;
        let mut inv = chol.inverse();
        inv = (&inv + inv.transpose()) * 0.5;
        Ok((value, &self.s_hat - inv))
    }

    pub fn value_matrix(&self, theta: &DMatrix<f64>) -> Result<f64> {
        let chol = Cholesky::new(theta.clone()).ok_or(TrimError::NotPositiveDefinite)?;
        let logdet: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        Ok(self.s_hat.component_mul(theta).sum() - logdet)
    }

    /// Packs a symmetric matrix (symmetrizing first).
    pub fn pack(&self, m: &DMatrix<f64>) -> Vec<f64> {
        pack_symmetric(m)
    }

    pub fn unpack(&self, v: &[f64]) -> DMatrix<f64> {
        unpack_symmetric(v, self.p())
    }
}

/// Packs the diagonal then the upper triangle of `(M + Mᵀ)/2`.
pub fn pack_symmetric(m: &DMatrix<f64>) -> Vec<f64> {
    let p = m.nrows();
    let mut out = Vec::with_capacity(p * (p + 1) / 2);
    out.extend((0..p).map(|i| m[(i, i)]));
    for i in 0..p {
        for j in (i + 1)..p {
            out.push(0.5 * (m[(i, j)] + m[(j, i)]));
        }
    }
    out
}

pub fn unpack_symmetric(v: &[f64], p: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(p, p);
    for i in 0..p {
        m[(i, i)] = v[i];
    }
    let mut k = p;
    for i in 0..p {
        for j in (i + 1)..p {
            m[(i, j)] = v[k];
            m[(j, i)] = v[k];
            k += 1;
        }
    }
    m
}

/// `(i, j)` with `i < j` for each packed off-diagonal slot, in packed order.
pub fn packed_pairs(p: usize) -> Vec<(usize, usize)> {
    (0..p)
        .flat_map(|i| ((i + 1)..p).map(move |j| (i, j)))
        .collect()
}

impl SmoothLoss for GaussianGraphicalLoss {
    fn dim(&self) -> usize {
        let p = self.p();
        p * (p + 1) / 2
    }

    fn value(&self, theta: &[f64]) -> Result<f64> {
        self.value_matrix(&self.unpack(theta))
    }

    fn value_grad(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        let p = self.p();
        let (v, g) = self.value_grad_matrix(&self.unpack(theta))?;
        let mut grad = Vec::with_capacity(self.dim());
        grad.extend((0..p).map(|i| g[(i, i)]));
        for (i, j) in packed_pairs(p) {
            grad.push(2.0 * g[(i, j)]);
        }
        Ok((v, grad))
    }

    fn lipschitz(&self) -> Option<f64> {
        None
    }

    /// `2 / λ_min(Θ)²`: the Hessian of `−log det` is `Θ⁻¹ ⊗ Θ⁻¹`, and the
    /// packed coordinates count each off-diagonal pair twice.
    fn local_lipschitz(&self, theta: &[f64]) -> Result<f64> {
        let m = self.unpack(theta);
        let eig = nalgebra::SymmetricEigen::new(m);
        let lmin = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(lmin > 0.0) {
            return Err(TrimError::NotPositiveDefinite);
        }
        Ok(2.0 / (lmin * lmin))
    }

    fn penalty_layout(&self) -> PenaltyLayout {
        let p = self.p();
        let pairs = p * (p - 1) / 2;
        PenaltyLayout {
            coords: (p..p + pairs).collect(),
            scale: vec![2.0; pairs],
        }
    }
}

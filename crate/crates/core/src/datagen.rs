//! Seeded synthetic datasets.
//!
//! Draw order for the regression designs, all from one [`Stream`] seeded with
//! the dataset seed: support positions (M₂ only), the `k` nonzero coefficients
//! in ascending index order, the `n × p` standard normals of the design
//! (row-major, mapped through the Cholesky factor of the covariance), then the
//! `n` noise draws.

use std::io::Write;
use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TrimError};
use crate::losses::{pack_symmetric, packed_pairs};
use crate::rng::Stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DesignKind {
    M2,
    M1,
    #[serde(rename = "diamond")]
    DiamondGgm,
}

impl std::fmt::Display for DesignKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DesignKind::M2 => "M2",
            DesignKind::M1 => "M1",
            DesignKind::DiamondGgm => "diamond",
        })
    }
}

/// Default correlation for the M₂ design.
pub const M2_CORRELATION: f64 = 0.7;
/// Default correlation for the M₁ design.
pub const M1_CORRELATION: f64 = 0.3;
/// Default coefficient scale.
pub const BETA_SD: f64 = 5.0;

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    /// Design (regression) or samples (graphical model), `n × p`.
    pub x: DMatrix<f64>,
    /// Response; `None` for the graphical model.
    pub y: Option<DVector<f64>>,
    /// True coefficients, or the packed true precision matrix.
    pub theta_star: Vec<f64>,
    /// Indices of the nonzero penalized entries of `theta_star`.
    pub support: Vec<usize>,
    /// Population covariance of the rows of `x`.
    pub covariance: DMatrix<f64>,
    pub seed: u64,
    pub design: DesignKind,
}

impl SyntheticDataset {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// `XᵀX / n`.
    pub fn sample_covariance(&self) -> DMatrix<f64> {
        let s = self.x.tr_mul(&self.x) / self.n() as f64;
        (&s + s.transpose()) * 0.5
    }

    /// Writes the design (one row per sample, `y` last when present) and the
    /// ground truth (`index,theta_star,in_support`).
    pub fn write_csv(&self, data_path: &Path, truth_path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(data_path)?;
        let mut header: Vec<String> = (0..self.p()).map(|j| format!("x{j}")).collect();
        if self.y.is_some() {
            header.push("y".into());
        }
        w.write_record(&header)?;
        for i in 0..self.n() {
            let mut row: Vec<String> = (0..self.p()).map(|j| fmt_f64(self.x[(i, j)])).collect();
            if let Some(y) = &self.y {
                row.push(fmt_f64(y[i]));
            }
            w.write_record(&row)?;
        }
        w.flush()?;

        let mut t = csv::Writer::from_path(truth_path)?;
        t.write_record(["index", "theta_star", "in_support"])?;
        for (j, v) in self.theta_star.iter().enumerate() {
            let s = if self.support.contains(&j) { "1" } else { "0" };
            t.write_record([j.to_string(), fmt_f64(*v), s.to_string()])?;
        }
        t.flush()?;
        Ok(())
    }
}

/// Shortest round-trip decimal representation.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Reads a design written by [`SyntheticDataset::write_csv`] (or any CSV with
/// a header row of `x*` columns and an optional trailing `y`).
pub fn read_design_csv(path: &Path) -> Result<(DMatrix<f64>, Option<DVector<f64>>)> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    let has_y = header.iter().last() == Some("y");
    let p = header.len() - usize::from(has_y);
    let mut rows = Vec::new();
    let mut ys = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(TrimError::domain(format!("ragged row in {}", path.display())));
        }
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| TrimError::domain(format!("bad number {field:?} in {}", path.display())))?;
            if has_y && j == p {
                ys.push(v);
            } else {
                rows.push(v);
            }
        }
    }
    let n = rows.len() / p.max(1);
    if n == 0 || p == 0 {
        return Err(TrimError::domain(format!("{} holds no data", path.display())));
    }
    let x = DMatrix::from_row_slice(n, p, &rows);
    Ok((x, has_y.then(|| DVector::from_vec(ys))))
}

/// Parameters shared by the regression designs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearDesign {
    pub n: usize,
    pub p: usize,
    pub k: usize,
    /// Correlation parameter of the covariance family.
    pub correlation: f64,
    pub beta_sd: f64,
    pub noise_sd: f64,
}

impl LinearDesign {
    pub fn new(n: usize, p: usize, k: usize, correlation: f64) -> Self {
        Self { n, p, k, correlation, beta_sd: BETA_SD, noise_sd: 1.0 }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 {
            return Err(TrimError::domain("n and p must be positive"));
        }
        if self.k > self.p {
            return Err(TrimError::domain(format!("k = {} exceeds p = {}", self.k, self.p)));
        }
        if !(self.beta_sd >= 0.0 && self.noise_sd >= 0.0) {
            return Err(TrimError::domain("standard deviations must be non-negative"));
        }
        Ok(())
    }
}

/// `M₂(ρ) = ρ 11ᵀ + (1 − ρ) I`.
pub fn m2_covariance(p: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { rho })
}

/// `M₁(ρ)`: identity with `ρ` in the first `k` entries of row and column `k`
/// (zero-based), i.e. the `(k+1)`-st variable correlates with the first `k`.
pub fn m1_covariance(p: usize, k: usize, rho: f64) -> DMatrix<f64> {
    let mut m = DMatrix::identity(p, p);
    if k < p {
        for j in 0..k {
            m[(k, j)] = rho;
            m[(j, k)] = rho;
        }
    }
    m
}

fn draw_linear(
    design: &LinearDesign,
    cov: DMatrix<f64>,
    support: Vec<usize>,
    stream: &mut Stream,
    seed: u64,
    kind: DesignKind,
) -> Result<SyntheticDataset> {
    let chol = Cholesky::new(cov.clone()).ok_or(TrimError::NotPositiveDefinite)?;
    let l = chol.l();
    let (n, p) = (design.n, design.p);
    let mut beta = vec![0.0; p];
    for &j in &support {
        beta[j] = design.beta_sd * stream.normal();
    }
    let z = DMatrix::from_row_iterator(n, p, (0..n * p).map(|_| stream.normal()));
    let x = z * l.transpose();
    let noise = DVector::from_iterator(n, (0..n).map(|_| design.noise_sd * stream.normal()));
    let y = &x * DVector::from_column_slice(&beta) + noise;
    Ok(SyntheticDataset {
        x,
        y: Some(y),
        theta_star: beta,
        support,
        covariance: cov,
        seed,
        design: kind,
    })
}

/// Rows iid `N(0, M₂(ρ))`, support at `k` uniformly random positions.
pub fn gen_linear_m2(design: &LinearDesign, seed: u64) -> Result<SyntheticDataset> {
    design.validate()?;
    if !(0.0..1.0).contains(&design.correlation) {
        return Err(TrimError::domain(format!(
            "M2 correlation must lie in [0, 1), got {}",
            design.correlation
        )));
    }
    let mut stream = Stream::new(seed);
    let support = stream.sample_indices(design.p, design.k);
    let cov = m2_covariance(design.p, design.correlation);
    draw_linear(design, cov, support, &mut stream, seed, DesignKind::M2)
}

/// Rows iid `N(0, M₁(ρ))`, support fixed to the first `k` coordinates.
pub fn gen_linear_m1(design: &LinearDesign, seed: u64) -> Result<SyntheticDataset> {
    design.validate()?;
    let bound = 1.0 / (design.k.max(1) as f64).sqrt();
    let cov = m1_covariance(design.p, design.k, design.correlation);
    if Cholesky::new(cov.clone()).is_none() {
        return Err(TrimError::domain(format!(
            "M1({}) is not positive definite; need |rho| < 1/sqrt(k) = {bound:.6}",
            design.correlation
        )));
    }
    let mut stream = Stream::new(seed);
    let support: Vec<usize> = (0..design.k).collect();
    draw_linear(design, cov, support, &mut stream, seed, DesignKind::M1)
}

/// Population covariance of the four-node diamond graph: unit diagonal, `ρ`
/// on the edges (1,2), (1,3), (2,4), (3,4), zero at (2,3) and `2ρ²` at the
/// non-edge (1,4) (one-based labels).
pub fn diamond_covariance(rho: f64) -> DMatrix<f64> {
    let mut s = DMatrix::identity(4, 4);
    for &(i, j) in &[(0, 1), (0, 2), (1, 3), (2, 3)] {
        s[(i, j)] = rho;
        s[(j, i)] = rho;
    }
    s[(0, 3)] = 2.0 * rho * rho;
    s[(3, 0)] = 2.0 * rho * rho;
    s
}

/// Zero threshold for reading the support off an inverted covariance.
const PRECISION_ZERO_TOL: f64 = 1e-9;

/// `n` iid samples from the diamond-graph Gaussian. `theta_star` is the packed
/// true precision matrix and `support` the packed indices of its nonzero
/// off-diagonal entries.
pub fn gen_diamond_ggm(n: usize, rho: f64, seed: u64) -> Result<SyntheticDataset> {
    if n == 0 {
        return Err(TrimError::domain("n must be positive"));
    }
    let cov = diamond_covariance(rho);
    let chol = Cholesky::new(cov.clone()).ok_or_else(|| {
        TrimError::domain(format!("diamond covariance with rho = {rho} is not positive definite"))
    })?;
    let precision = chol.inverse();
    let packed = pack_symmetric(&precision);
    let p = 4;
    let support: Vec<usize> = packed_pairs(p)
        .iter()
        .enumerate()
        .filter(|(_, &(i, j))| precision[(i, j)].abs() > PRECISION_ZERO_TOL)
        .map(|(k, _)| p + k)
        .collect();
    let mut stream = Stream::new(seed);
    let z = DMatrix::from_row_iterator(n, p, (0..n * p).map(|_| stream.normal()));
    let x = z * chol.l().transpose();
    Ok(SyntheticDataset {
        x,
        y: None,
        theta_star: packed,
        support,
        covariance: cov,
        seed,
        design: DesignKind::DiamondGgm,
    })
}

/// Maxima over sampled trim sets of the incoherence-type quantities of a
/// Gram matrix restricted to `A = support ∪ T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IncoherenceReport {
    /// `max ‖(Γ_AA)⁻¹‖_∞`
    pub inverse_norm: f64,
    /// `max ‖Γ_{AᶜA} (Γ_AA)⁻¹‖_∞`
    pub cross_norm: f64,
    /// `max λ_max(Γ_AA)`
    pub max_eigenvalue: f64,
    pub samples: usize,
    /// Samples where `Γ_AA` could not be inverted.
    pub singular: usize,
}

/// Max absolute row sum.
pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Diagnostics on `Γ = XᵀX / n`.
pub fn incoherence_diagnostics(
    x: &DMatrix<f64>,
    support: &[usize],
    h: usize,
    num_samples: usize,
    seed: u64,
) -> Result<IncoherenceReport> {
    let gamma = x.tr_mul(x) / x.nrows() as f64;
    incoherence_from_gram(&gamma, support, h, num_samples, seed)
}

/// Diagnostics on a given Gram (or population covariance) matrix. Trim sets
/// `T` are drawn uniformly among all `h`-subsets of the coordinates.
pub fn incoherence_from_gram(
    gamma: &DMatrix<f64>,
    support: &[usize],
    h: usize,
    num_samples: usize,
    seed: u64,
) -> Result<IncoherenceReport> {
    let p = gamma.nrows();
    if support.iter().any(|&j| j >= p) {
        return Err(TrimError::domain("support index out of range"));
    }
    if h > p {
        return Err(TrimError::domain(format!("h = {h} exceeds p = {p}")));
    }
    let mut stream = Stream::new(seed);
    let mut report = IncoherenceReport {
        inverse_norm: 0.0,
        cross_norm: 0.0,
        max_eigenvalue: 0.0,
        samples: num_samples.max(1),
        singular: 0,
    };
    for _ in 0..report.samples {
        let mut a: Vec<usize> = support.to_vec();
        a.extend(stream.sample_indices(p, h));
        a.sort_unstable();
        a.dedup();
        let ac: Vec<usize> = (0..p).filter(|j| !a.contains(j)).collect();
        let g_aa = gamma.select_rows(&a).select_columns(&a);
        let eig = nalgebra::SymmetricEigen::new(g_aa.clone());
        let lmax = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        report.max_eigenvalue = report.max_eigenvalue.max(lmax);
        let Some(inv) = g_aa.try_inverse() else {
            report.singular += 1;
            continue;
        };
        report.inverse_norm = report.inverse_norm.max(inf_norm(&inv));
        if !ac.is_empty() {
            let cross = gamma.select_rows(&ac).select_columns(&a) * &inv;
            report.cross_norm = report.cross_norm.max(inf_norm(&cross));
        }
    }
    Ok(report)
}

/// Writes `x` as CSV with an `x0..` header.
pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    let header: Vec<String> = (0..m.ncols()).map(|j| format!("x{j}")).collect();
    writeln!(f, "{}", header.join(","))?;
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| fmt_f64(m[(i, j)])).collect();
        writeln!(f, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_cov(x: &DMatrix<f64>) -> DMatrix<f64> {
        x.tr_mul(x) / x.nrows() as f64
    }

    #[test]
    fn isotropic_m2_moments() {
        let d = LinearDesign::new(100_000, 3, 1, 0.0);
        let ds = gen_linear_m2(&d, 1).unwrap();
        let s = sample_cov(&ds.x);
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((s[(i, j)] - target).abs() < 0.02);
            }
        }
    }

    #[test]
    fn m2_moments_match_target() {
        let n = 100_000;
        let ds = gen_linear_m2(&LinearDesign::new(n, 4, 2, 0.7), 2).unwrap();
        let s = sample_cov(&ds.x);
        for i in 0..4 {
            for j in 0..4 {
                let target = ds.covariance[(i, j)];
                let tol = 5.0 * (1.0 / n as f64).sqrt() * (1.0 + target.abs());
                assert!((s[(i, j)] - target).abs() <= tol, "({i},{j}) {} vs {target}", s[(i, j)]);
            }
        }
    }

    #[test]
    fn m1_moments_match_target() {
        let n = 100_000;
        let ds = gen_linear_m1(&LinearDesign::new(n, 5, 2, 0.3), 3).unwrap();
        let s = sample_cov(&ds.x);
        for i in 0..5 {
            for j in 0..5 {
                let target = ds.covariance[(i, j)];
                let tol = 5.0 * (1.0 / n as f64).sqrt() * (1.0 + target.abs());
                assert!((s[(i, j)] - target).abs() <= tol);
            }
        }
    }

    #[test]
    fn zero_signal_zero_noise_gives_zero_response() {
        let mut d = LinearDesign::new(20, 6, 3, 0.7);
        d.beta_sd = 0.0;
        d.noise_sd = 0.0;
        let ds = gen_linear_m2(&d, 4).unwrap();
        assert!(ds.y.unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn generators_are_deterministic() {
        let d = LinearDesign::new(30, 10, 3, 0.7);
        let a = gen_linear_m2(&d, 9).unwrap();
        let b = gen_linear_m2(&d, 9).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.y, b.y);
        assert_eq!(a.support, b.support);
        let c = gen_linear_m2(&d, 10).unwrap();
        assert_ne!(a.x, c.x);
        let g1 = gen_diamond_ggm(50, 0.1, 3).unwrap();
        let g2 = gen_diamond_ggm(50, 0.1, 3).unwrap();
        assert_eq!(g1.x, g2.x);
    }

    #[test]
    fn support_and_truth_consistent() {
        let ds = gen_linear_m2(&LinearDesign::new(10, 20, 5, 0.7), 5).unwrap();
        assert_eq!(ds.support.len(), 5);
        for j in 0..20 {
            if !ds.support.contains(&j) {
                assert_eq!(ds.theta_star[j], 0.0);
            }
        }
        let m1 = gen_linear_m1(&LinearDesign::new(10, 20, 4, 0.3), 5).unwrap();
        assert_eq!(m1.support, vec![0, 1, 2, 3]);
    }

    #[test]
    fn m1_zero_correlation_is_identity() {
        assert_eq!(m1_covariance(5, 2, 0.0), DMatrix::identity(5, 5));
    }

    #[test]
    fn m1_row_read_off() {
        let m = m1_covariance(4, 2, 0.3);
        let row: Vec<f64> = m.row(2).iter().cloned().collect();
        assert_eq!(row, vec![0.3, 0.3, 1.0, 0.0]);
    }

    #[test]
    fn m1_rejects_non_pd() {
        let err = gen_linear_m1(&LinearDesign::new(10, 8, 4, 0.6), 1).unwrap_err();
        assert!(err.to_string().contains("1/sqrt(k)"));
    }

    #[test]
    fn m1_population_incoherence() {
        // Γ_SS = I, Γ_{S^c S} has a single row (0.3, 0.3)
        let m = m1_covariance(4, 2, 0.3);
        let rep = incoherence_from_gram(&m, &[0, 1], 0, 1, 0).unwrap();
        assert!((rep.cross_norm - 0.6).abs() < 1e-12);
        assert!((rep.inverse_norm - 1.0).abs() < 1e-12);
        // trimming extra coordinates can only add to A
        let rep = incoherence_from_gram(&m, &[0, 1], 1, 20, 0).unwrap();
        assert!(rep.cross_norm >= 0.6 - 1e-12 || rep.samples > 0);
    }

    #[test]
    fn m2_population_incoherence_below_one() {
        let m = m2_covariance(8, 0.7);
        let rep = incoherence_from_gram(&m, &[0, 1], 2, 50, 1).unwrap();
        assert!(rep.cross_norm < 1.0, "{}", rep.cross_norm);
        // exact value for |A| = a: 0.7 a / (0.3 + 0.7 a)
        let a4 = 0.7 * 4.0 / (0.3 + 0.7 * 4.0);
        assert!(rep.cross_norm <= a4 + 1e-12);
    }

    #[test]
    fn orthonormal_design_incoherence() {
        let x = DMatrix::identity(6, 6) * (6f64).sqrt();
        let rep = incoherence_diagnostics(&x, &[1, 4], 2, 10, 0).unwrap();
        assert!(rep.cross_norm.abs() < 1e-12);
        assert!((rep.inverse_norm - 1.0).abs() < 1e-12);
        assert!((rep.max_eigenvalue - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diamond_independent_case() {
        let ds = gen_diamond_ggm(10, 0.0, 1).unwrap();
        assert_eq!(ds.covariance, DMatrix::identity(4, 4));
        assert!(ds.support.is_empty());
    }

    #[test]
    fn diamond_precision_zero_pattern() {
        for &rho in &[0.05, 0.1, 0.2, 0.3, 0.35] {
            let prec = diamond_covariance(rho).try_inverse().unwrap();
            assert!(prec[(0, 3)].abs() < 1e-9, "rho {rho}: {}", prec[(0, 3)]);
            let ds = gen_diamond_ggm(10, rho, 1).unwrap();
            // all pairs except (1,4): packed pair order (0,1),(0,2),(0,3),(1,2),(1,3),(2,3)
            assert_eq!(ds.support, vec![4, 5, 7, 8, 9], "rho {rho}");
        }
    }

    #[test]
    fn csv_round_trip() {
        let dir = std::env::temp_dir().join(format!("trimreg-datagen-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let ds = gen_linear_m2(&LinearDesign::new(7, 3, 1, 0.7), 11).unwrap();
        let (dp, tp) = (dir.join("d.csv"), dir.join("t.csv"));
        ds.write_csv(&dp, &tp).unwrap();
        let (x, y) = read_design_csv(&dp).unwrap();
        assert_eq!(x, ds.x);
        assert_eq!(y, ds.y);
        std::fs::remove_dir_all(&dir).ok();
    }
}

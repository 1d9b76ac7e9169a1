//! Per-replicate rows, their aggregation, and CSV input/output.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// One method on one replicate of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRow {
    pub experiment_id: String,
    pub method: String,
    pub design: String,
    pub p: usize,
    pub k: usize,
    pub n: usize,
    pub h: usize,
    /// Selected λ (NaN when no λ qualified).
    pub lambda: f64,
    pub replicate: usize,
    pub seed: u64,
    pub success_topk: u8,
    pub success_exact: u8,
    pub l2_err: f64,
    pub linf_err: f64,
    pub iters: usize,
    #[serde(rename = "final_T")]
    pub final_t: f64,
    pub runtime_ms: f64,
    /// `stationary`, `max_iters`, `plateau` or `failed`.
    pub status: String,
    /// Which success column the headline probability uses.
    pub primary: String,
}

impl RawRow {
    pub fn failed(&self) -> bool {
        self.status == "failed"
    }

    pub fn primary_success(&self) -> u8 {
        if self.primary == "exact_zero" {
            self.success_exact
        } else {
            self.success_topk
        }
    }
}

/// Aggregate over the replicates of one `(method, design, p, k, n, h)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggRow {
    pub experiment_id: String,
    pub method: String,
    pub design: String,
    pub p: usize,
    pub k: usize,
    pub n: usize,
    pub h: usize,
    pub replicates: usize,
    pub failures: usize,
    /// Headline success probability (see [`RawRow::primary`]).
    pub success_mean: f64,
    pub success_sd: f64,
    pub success_topk_mean: f64,
    pub success_exact_mean: f64,
    pub l2_err_mean: f64,
    pub l2_err_sd: f64,
    pub linf_err_mean: f64,
    pub linf_err_sd: f64,
    pub lambda_mean: f64,
    pub iters_mean: f64,
    #[serde(rename = "final_T_mean")]
    pub final_t_mean: f64,
    pub runtime_ms_mean: f64,
}

/// Mean and sample standard deviation; `(NaN, NaN)` when empty and sd 0 for
/// a single value.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Groups rows by cell in order of first appearance. Success probabilities
/// count failed runs as failures; error and iteration statistics use the
/// runs that finished.
pub fn aggregate(rows: &[RawRow]) -> Vec<AggRow> {
    let mut keys: Vec<(String, String, usize, usize, usize, usize)> = Vec::new();
    for r in rows {
        let key = (r.method.clone(), r.design.clone(), r.p, r.k, r.n, r.h);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|key| {
            let cell: Vec<&RawRow> = rows
                .iter()
                .filter(|r| (&r.method, &r.design, r.p, r.k, r.n, r.h) == (&key.0, &key.1, key.2, key.3, key.4, key.5))
                .collect();
            let ok: Vec<&&RawRow> = cell.iter().filter(|r| !r.failed()).collect();
            let col = |f: &dyn Fn(&RawRow) -> f64, src: &[&&RawRow]| -> Vec<f64> { src.iter().map(|r| f(r)).collect() };
            let all: Vec<&&RawRow> = cell.iter().collect();
            let (success_mean, success_sd) = mean_sd(&col(&|r| r.primary_success() as f64, &all));
            let (topk, _) = mean_sd(&col(&|r| r.success_topk as f64, &all));
            let (exact, _) = mean_sd(&col(&|r| r.success_exact as f64, &all));
            let (l2m, l2s) = mean_sd(&col(&|r| r.l2_err, &ok));
            let (lim, lis) = mean_sd(&col(&|r| r.linf_err, &ok));
            let lambdas: Vec<f64> = ok.iter().map(|r| r.lambda).filter(|l| l.is_finite()).collect();
            AggRow {
                experiment_id: cell[0].experiment_id.clone(),
                method: key.0,
                design: key.1,
                p: key.2,
                k: key.3,
                n: key.4,
                h: key.5,
                replicates: cell.len(),
                failures: cell.len() - ok.len(),
                success_mean,
                success_sd,
                success_topk_mean: topk,
                success_exact_mean: exact,
                l2_err_mean: l2m,
                l2_err_sd: l2s,
                linf_err_mean: lim,
                linf_err_sd: lis,
                lambda_mean: mean_sd(&lambdas).0,
                iters_mean: mean_sd(&col(&|r| r.iters as f64, &ok)).0,
                final_t_mean: mean_sd(&col(&|r| r.final_t, &ok)).0,
                runtime_ms_mean: mean_sd(&col(&|r| r.runtime_ms, &all)).0,
            }
        })
        .collect()
}

/// Least-squares slope of `log(mean ℓ2 error)` against `log n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub method: String,
    pub design: String,
    pub p: usize,
    pub k: usize,
    pub h: usize,
    pub n_points: usize,
    pub n_min: usize,
    pub n_max: usize,
    pub slope: f64,
}

/// Ordinary least-squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Fits the error slope of every `(method, design, p, k, h)` series on the
/// largest-n half of its grid (`⌈m/2⌉` of `m` points).
pub fn error_slopes(agg: &[AggRow]) -> Vec<SlopeFit> {
    let mut series: Vec<(String, String, usize, usize, usize)> = Vec::new();
    for a in agg {
        let key = (a.method.clone(), a.design.clone(), a.p, a.k, a.h);
        if !series.contains(&key) {
            series.push(key);
        }
    }
    series
        .into_iter()
        .filter_map(|key| {
            let mut pts: Vec<(usize, f64)> = agg
                .iter()
                .filter(|a| (&a.method, &a.design, a.p, a.k, a.h) == (&key.0, &key.1, key.2, key.3, key.4))
                .map(|a| (a.n, a.l2_err_mean))
                .collect();
            pts.sort_by_key(|p| p.0);
            let half = pts.len().div_ceil(2);
            let tail = &pts[pts.len() - half..];
            if tail.len() < 2 {
                return None;
            }
            let x: Vec<f64> = tail.iter().map(|p| (p.0 as f64).ln()).collect();
            let y: Vec<f64> = tail.iter().map(|p| p.1.ln()).collect();
            Some(SlopeFit {
                method: key.0,
                design: key.1,
                p: key.2,
                k: key.3,
                h: key.4,
                n_points: tail.len(),
                n_min: tail[0].0,
                n_max: tail[tail.len() - 1].0,
                slope: ols_slope(&x, &y),
            })
        })
        .collect()
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in r.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

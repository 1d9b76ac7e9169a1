//! Slow, independent reference computations for tests.
//!
//! Nothing here shares code with `trimreg`: every routine is a brute-force
//! enumeration, a dense grid search, a finite difference or a plain
//! coordinate-descent loop written from the textbook definitions.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Euclidean projection onto `{w in [0,1]^p : sum w = p - h}` by enumerating
/// every assignment of coordinates to {at 0, free, at 1} and keeping the
/// candidate that satisfies the KKT sign conditions with the smallest distance.
pub fn capped_simplex_qp(z: &[f64], h: usize) -> Vec<f64> {
    let p = z.len();
    let target = (p - h) as f64;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let total = 3usize.pow(p as u32);
    for code in 0..total {
        // 0 = lower, 1 = free, 2 = upper
        let mut c = code;
        let mut state = vec![0u8; p];
        for s in state.iter_mut() {
            *s = (c % 3) as u8;
            c /= 3;
        }
        let n_upper = state.iter().filter(|&&s| s == 2).count() as f64;
        let free: Vec<usize> = (0..p).filter(|&i| state[i] == 1).collect();
        let mu = if free.is_empty() {
            if (n_upper - target).abs() > 1e-12 {
                continue;
            }
            // any multiplier consistent with the sign conditions works
            let lo = (0..p)
                .filter(|&i| state[i] == 0)
                .map(|i| z[i])
                .fold(f64::NEG_INFINITY, f64::max);
            let hi = (0..p)
                .filter(|&i| state[i] == 2)
                .map(|i| z[i] - 1.0)
                .fold(f64::INFINITY, f64::min);
            if lo > hi + 1e-12 {
                continue;
            }
            if lo.is_finite() { lo } else if hi.is_finite() { hi } else { 0.0 }
        } else {
            (free.iter().map(|&i| z[i]).sum::<f64>() + n_upper - target) / free.len() as f64
        };
        let mut w = vec![0.0; p];
        let mut ok = true;
        for i in 0..p {
            match state[i] {
                0 => ok &= z[i] - mu <= 1e-12,
                2 => {
                    w[i] = 1.0;
                    ok &= z[i] - mu >= 1.0 - 1e-12;
                }
                _ => {
                    w[i] = z[i] - mu;
                    ok &= w[i] >= -1e-12 && w[i] <= 1.0 + 1e-12;
                }
            }
        }
        if !ok {
            continue;
        }
        let d: f64 = z.iter().zip(&w).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
            best = Some((d, w));
        }
    }
    best.expect("capped simplex is non-empty").1
}

/// Global minimizer of a 1-D function on `[lo, hi]`: dense grid followed by
/// repeated zooms around the best point.
pub fn grid_argmin(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let mut a = lo;
    let mut b = hi;
    let mut n = 20_000;
    let mut best = a;
    for _ in 0..6 {
        let step = (b - a) / n as f64;
        let mut best_val = f64::INFINITY;
        for i in 0..=n {
            let x = a + step * i as f64;
            let v = f(x);
            if v < best_val {
                best_val = v;
                best = x;
            }
        }
        a = (best - 2.0 * step).max(lo);
        b = (best + 2.0 * step).min(hi);
        n = 400;
    }
    // endpoints and the origin are candidates for kinked objectives
    [best, lo, hi, 0.0_f64.clamp(lo, hi)]
        .into_iter()
        .min_by(|x, y| f(*x).partial_cmp(&f(*y)).unwrap())
        .unwrap()
}

pub fn soft_threshold(z: f64, t: f64) -> f64 {
    z.signum() * (z.abs() - t).max(0.0)
}

/// SCAD penalty value with regularization `lambda` and shape `a > 2`.
pub fn scad_value(x: f64, lambda: f64, a: f64) -> f64 {
    let t = x.abs();
    if t <= lambda {
        lambda * t
    } else if t <= a * lambda {
        (2.0 * a * lambda * t - t * t - lambda * lambda) / (2.0 * (a - 1.0))
    } else {
        lambda * lambda * (a + 1.0) / 2.0
    }
}

/// MCP penalty value with regularization `lambda` and shape `gamma > 1`.
pub fn mcp_value(x: f64, lambda: f64, gamma: f64) -> f64 {
    let t = x.abs();
    if t <= gamma * lambda {
        lambda * t - t * t / (2.0 * gamma)
    } else {
        gamma * lambda * lambda / 2.0
    }
}

/// Scalar prox of `t * pen` at `z` by grid search over the segment between 0 and `z`
/// (the minimizer of any even, non-decreasing-in-|x| penalty lies there).
pub fn scalar_prox_grid(pen: impl Fn(f64) -> f64, z: f64, t: f64) -> f64 {
    let obj = |x: f64| 0.5 * (x - z) * (x - z) + t * pen(x);
    let (lo, hi) = if z >= 0.0 { (0.0, z) } else { (z, 0.0) };
    if lo == hi {
        return 0.0;
    }
    grid_argmin(obj, lo, hi)
}

/// Minimum-norm element of `g + lambda * w * d|theta|` for one coordinate, by
/// comparing the interval endpoints and zero.
pub fn min_norm_subgrad_scalar(g: f64, theta: f64, w: f64, lambda: f64) -> f64 {
    if theta != 0.0 {
        return g + lambda * w * theta.signum();
    }
    let lo = g - lambda * w;
    let hi = g + lambda * w;
    if lo <= 0.0 && hi >= 0.0 {
        0.0
    } else if lo.abs() < hi.abs() {
        lo
    } else {
        hi
    }
}

/// Squared distance of `lambda * |theta|` to `-N_S(w)` by a dense grid over the
/// equality multiplier.
pub fn weight_stationarity_grid(theta: &[f64], w: &[f64], lambda: f64) -> f64 {
    let a: Vec<f64> = theta.iter().map(|t| lambda * t.abs()).collect();
    let g = |mu: f64| -> f64 {
        a.iter()
            .zip(w)
            .map(|(&ai, &wi)| {
                let s = ai + mu;
                if wi <= 0.0 {
                    s.min(0.0).powi(2)
                } else if wi >= 1.0 {
                    s.max(0.0).powi(2)
                } else {
                    s * s
                }
            })
            .sum()
    };
    let amax = a.iter().cloned().fold(0.0, f64::max);
    let mu = grid_argmin(g, -amax - 1.0, 1.0);
    g(mu)
}

/// Central finite-difference gradient.
pub fn finite_diff_grad(f: impl Fn(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|j| {
            let orig = xp[j];
            xp[j] = orig + step;
            let fp = f(&xp);
            xp[j] = orig - step;
            let fm = f(&xp);
            xp[j] = orig;
            (fp - fm) / (2.0 * step)
        })
        .collect()
}

/// Largest eigenvalue of a symmetric matrix from a full eigendecomposition.
pub fn max_eigenvalue(a: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(a.clone())
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `(1/n) ||X theta - y||^2`.
pub fn ls_value(x: &DMatrix<f64>, y: &DVector<f64>, theta: &[f64]) -> f64 {
    let r = x * DVector::from_column_slice(theta) - y;
    r.norm_squared() / x.nrows() as f64
}

/// Cyclic coordinate descent for `(1/n)||X theta - y||^2 + lambda * sum c_j |theta_j|`.
/// `c_j = 0` leaves coordinate `j` unpenalized.
pub fn weighted_lasso_cd(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    c: &[f64],
    tol: f64,
) -> Vec<f64> {
    let n = x.nrows() as f64;
    let p = x.ncols();
    let mut theta = vec![0.0; p];
    let mut resid = y.clone();
    let col_sq: Vec<f64> = (0..p).map(|j| x.column(j).norm_squared() / n).collect();
    for _sweep in 0..1_000_000 {
        let mut max_delta: f64 = 0.0;
        for j in 0..p {
            let col = x.column(j);
            let b = col.dot(&resid) / n + col_sq[j] * theta[j];
            let new = soft_threshold(b, lambda * c[j] / 2.0) / col_sq[j];
            let delta = new - theta[j];
            if delta != 0.0 {
                resid.axpy(-delta, &col, 1.0);
                theta[j] = new;
            }
            max_delta = max_delta.max(delta.abs());
        }
        if max_delta < tol {
            break;
        }
    }
    theta
}

/// Global minimum of `(1/n)||X theta - y||^2 + lambda * R(theta; h)` by
/// enumerating every trim set of size `h` and solving the convex weighted lasso
/// on each. Returns `(objective, theta)`.
pub fn trimmed_ls_global(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64, h: usize) -> (f64, Vec<f64>) {
    let p = x.ncols();
    let mut best = (f64::INFINITY, vec![0.0; p]);
    for trim in combinations(p, h) {
        let mut c = vec![1.0; p];
        for &j in &trim {
            c[j] = 0.0;
        }
        let theta = weighted_lasso_cd(x, y, lambda, &c, 1e-13);
        let pen: f64 = theta.iter().zip(&c).map(|(t, ci)| ci * t.abs()).sum();
        let obj = ls_value(x, y, &theta) + lambda * pen;
        if obj < best.0 {
            best = (obj, theta);
        }
    }
    best
}

/// Sum of the `p - h` smallest absolute values, minimized over explicit trim sets.
pub fn trimmed_l1_enumerated(theta: &[f64], h: usize) -> f64 {
    combinations(theta.len(), h)
        .into_iter()
        .map(|trim| {
            theta
                .iter()
                .enumerate()
                .filter(|(j, _)| !trim.contains(j))
                .map(|(_, t)| t.abs())
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combinations_count() {
        assert_eq!(combinations(5, 2).len(), 10);
        assert_eq!(combinations(4, 0), vec![Vec::<usize>::new()]);
        assert_eq!(combinations(3, 3), vec![vec![0, 1, 2]]);
    }

    #[test]
    fn qp_oracle_kkt_example() {
        let w = capped_simplex_qp(&[2.0, 0.0, 0.0], 1);
        assert!((w[0] - 1.0).abs() < 1e-12);
        assert!((w[1] - 0.5).abs() < 1e-12);
        assert!((w[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn grid_finds_soft_threshold() {
        let x = scalar_prox_grid(|x| x.abs(), 2.0, 0.5);
        // a smooth minimum is only resolvable to about sqrt(eps)
        assert!((x - 1.5).abs() < 1e-6, "{x}");
    }
}

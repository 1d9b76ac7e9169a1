//! The trimmed ℓ1 penalty and the operators the block solver is built from.
//!
//! `R(θ; h)` is the sum of the `p − h` smallest magnitudes of `θ`. Written with
//! trimming weights it is `min ⟨w, |θ|⟩` over the capped simplex
//! `S = {w ∈ [0,1]^p : Σ w = p − h}`; the minimum is attained at a binary `w`
//! that zeroes the `h` largest magnitudes.
//!
//! Order statistics break ties by index: among equal magnitudes the lower index
//! ranks larger, so every selector here is deterministic.

use crate::error::{Result, TrimError};

/// Absolute tolerance on `Σ w = p − h`.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

/// Trimming weights: entries in `[0, 1]` summing to `p − h`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    entries: Vec<f64>,
    trim: usize,
}

impl WeightVector {
    /// Validates and wraps `entries` as weights with trim count `trim`.
    pub fn new(entries: Vec<f64>, trim: usize) -> Result<Self> {
        let p = entries.len();
        if trim > p {
            return Err(TrimError::domain(format!("trim count {trim} exceeds dimension {p}")));
        }
        if let Some(bad) = entries.iter().find(|&&e| !(0.0..=1.0).contains(&e)) {
            return Err(TrimError::domain(format!("weight {bad} outside [0, 1]")));
        }
        let sum: f64 = entries.iter().sum();
        if (sum - (p - trim) as f64).abs() > WEIGHT_SUM_TOL {
            return Err(TrimError::domain(format!(
                "weights sum to {sum}, expected {}",
                p - trim
            )));
        }
        Ok(Self { entries, trim })
    }

    /// All-ones weights (nothing trimmed).
    pub fn ones(p: usize) -> Self {
        Self { entries: vec![1.0; p], trim: 0 }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.entries
    }

    pub fn trim_count(&self) -> usize {
        self.trim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// True when every entry is exactly 0 or 1.
    pub fn is_binary(&self) -> bool {
        self.entries.iter().all(|&e| e == 0.0 || e == 1.0)
    }
}

/// Regularization weight and trim count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrimSpec {
    pub h: usize,
    pub lambda: f64,
}

impl TrimSpec {
    pub fn new(h: usize, lambda: f64, p: usize) -> Result<Self> {
        check_trim(h, p)?;
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(TrimError::domain(format!("lambda must be positive, got {lambda}")));
        }
        Ok(Self { h, lambda })
    }
}

fn check_trim(h: usize, p: usize) -> Result<()> {
    if h > p {
        Err(TrimError::domain(format!("trim count h = {h} out of range 0..={p}")))
    } else {
        Ok(())
    }
}

/// Indices sorted by decreasing magnitude; ties go to the lower index first.
pub fn magnitude_order(theta: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..theta.len()).collect();
    idx.sort_by(|&a, &b| {
        theta[b]
            .abs()
            .total_cmp(&theta[a].abs())
            .then(a.cmp(&b))
    });
    idx
}

/// Indices of the `h` largest magnitudes, in [`magnitude_order`].
pub fn top_h_indices(theta: &[f64], h: usize) -> Vec<usize> {
    let cmp = |a: &usize, b: &usize| theta[*b].abs().total_cmp(&theta[*a].abs()).then(a.cmp(b));
    let mut idx: Vec<usize> = (0..theta.len()).collect();
    if h == 0 {
        return Vec::new();
    }
    if h < idx.len() {
        idx.select_nth_unstable_by(h - 1, cmp);
        idx.truncate(h);
    }
    idx.sort_unstable_by(cmp);
    idx
}

/// Sum of the `p − h` smallest magnitudes of `theta`.
pub fn trimmed_l1(theta: &[f64], h: usize) -> Result<f64> {
    check_trim(h, theta.len())?;
    let mut mags: Vec<f64> = theta.iter().map(|v| v.abs()).collect();
    if h == 0 {
        return Ok(mags.iter().sum());
    }
    if h < mags.len() {
        mags.select_nth_unstable_by(h - 1, |a, b| b.total_cmp(a));
    }
    Ok(mags[h.min(mags.len())..].iter().sum())
}

/// Binary minimizer of `⟨w, |θ|⟩` over the capped simplex.
pub fn optimal_weights(theta: &[f64], h: usize) -> Result<WeightVector> {
    check_trim(h, theta.len())?;
    let mut w = vec![1.0; theta.len()];
    for j in top_h_indices(theta, h) {
        w[j] = 0.0;
    }
    Ok(WeightVector { entries: w, trim: h })
}

/// Sign vector supported on the `h` largest magnitudes: an element of the
/// subdifferential of the top-`h` absolute sum. Zero entries of `theta` get 0.
pub fn top_h_sign_selector(theta: &[f64], h: usize) -> Result<Vec<f64>> {
    check_trim(h, theta.len())?;
    let mut s = vec![0.0; theta.len()];
    for j in top_h_indices(theta, h) {
        s[j] = if theta[j] > 0.0 {
            1.0
        } else if theta[j] < 0.0 {
            -1.0
        } else {
            0.0
        };
    }
    Ok(s)
}

fn clipped_sum(z: &[f64], mu: f64) -> f64 {
    z.iter().map(|&zi| (zi - mu).clamp(0.0, 1.0)).sum()
}

/// Euclidean projection onto `{w ∈ [0,1]^p : Σ w = p − h}`.
///
/// The solution is `w_i = clip(z_i − μ, 0, 1)`. The multiplier is found by
/// bisection over the sorted kinks `z_i − 1, z_i` of the constraint sum, then
/// solved exactly on the bracketing linear piece so the sum constraint holds to
/// round-off.
pub fn project_capped_simplex(z: &[f64], h: usize) -> Result<WeightVector> {
    let p = z.len();
    check_trim(h, p)?;
    if z.iter().any(|v| !v.is_finite()) {
        return Err(TrimError::domain("projection input must be finite"));
    }
    if p == 0 {
        return Ok(WeightVector { entries: Vec::new(), trim: 0 });
    }
    let target = (p - h) as f64;
    if h == 0 {
        return Ok(WeightVector::ones(p));
    }
    if h == p {
        return Ok(WeightVector { entries: vec![0.0; p], trim: h });
    }

    // clipped_sum is non-increasing and piecewise linear with kinks at z_i and
    // z_i - 1.
    // With A the (p-h)-th largest z, the multiplier lies in [A - 1, A], so
    // only kinks inside that interval matter.
    let m = p - h;
    let mut scratch = z.to_vec();
    let top_a = *scratch.select_nth_unstable_by(m - 1, |a, b| b.total_cmp(a)).1;
    let (left, right) = (top_a - 1.0, top_a);
    let mut kinks: Vec<f64> = z
        .iter()
        .flat_map(|&zi| [zi - 1.0, zi])
        .filter(|&k| k > left && k < right)
        .chain([left, right])
        .collect();
    kinks.sort_unstable_by(f64::total_cmp);
    kinks.dedup();
    let (mut lo, mut hi) = (0usize, kinks.len() - 1);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if clipped_sum(z, kinks[mid]) >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (a, b) = (kinks[lo], kinks[hi]);

    // linear on [a, b]: solve for mu with the active sets of the midpoint
    let probe = 0.5 * (a + b);
    let (mut free_sum, mut free_n, mut upper_n) = (0.0, 0usize, 0usize);
    for &zi in z {
        let v = zi - probe;
        if v >= 1.0 {
            upper_n += 1;
        } else if v > 0.0 {
            free_sum += zi;
            free_n += 1;
        }
    }
    let mu = if free_n > 0 {
        ((free_sum + upper_n as f64 - target) / free_n as f64).clamp(a, b)
    } else {
        a
    };

    let mut entries: Vec<f64> = z.iter().map(|&zi| (zi - mu).clamp(0.0, 1.0)).collect();
    // Absorb residual round-off. Free coordinates share it first; anything left
    // (inputs so large that z_i - mu has no fractional part) is moved in
    // magnitude order, largest z gaining mass first and smallest z losing first.
    let mut resid = target - entries.iter().sum::<f64>();
    if resid != 0.0 {
        let free: Vec<usize> = (0..p).filter(|&i| entries[i] > 0.0 && entries[i] < 1.0).collect();
        if !free.is_empty() {
            let share = resid / free.len() as f64;
            for i in free {
                entries[i] = (entries[i] + share).clamp(0.0, 1.0);
            }
        }
        resid = target - entries.iter().sum::<f64>();
    }
    if resid.abs() > WEIGHT_SUM_TOL * 0.5 {
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| z[b].total_cmp(&z[a]).then(a.cmp(&b)));
        if resid < 0.0 {
            order.reverse();
        }
        for i in order {
            if resid.abs() <= 0.0 {
                break;
            }
            let old = entries[i];
            entries[i] = (old + resid).clamp(0.0, 1.0);
            resid -= entries[i] - old;
        }
    }
    Ok(WeightVector { entries, trim: h })
}

/// Weighted soft thresholding: the exact minimizer of
/// `½‖θ − z‖² + t Σ w_j |θ_j|`.
pub fn prox_weighted_l1(z: &[f64], w: &[f64], t: f64) -> Vec<f64> {
    debug_assert_eq!(z.len(), w.len());
    z.iter()
        .zip(w)
        .map(|(&zj, &wj)| soft_threshold(zj, t * wj))
        .collect()
}

#[inline]
pub fn soft_threshold(z: f64, t: f64) -> f64 {
    let m = z.abs() - t;
    if m > 0.0 {
        m.copysign(z)
    } else {
        0.0
    }
}

/// Minimum-norm element of `grad + λ Σ_j w_j ∂|θ_j|`.
pub fn min_norm_theta_subgradient(grad: &[f64], theta: &[f64], w: &[f64], lambda: f64) -> Vec<f64> {
    debug_assert!(grad.len() == theta.len() && theta.len() == w.len());
    grad.iter()
        .zip(theta)
        .zip(w)
        .map(|((&g, &t), &wj)| {
            if t != 0.0 {
                g + lambda * wj * t.signum()
            } else {
                soft_threshold(g, lambda * wj)
            }
        })
        .collect()
}

/// Squared norm of the minimum-norm element of `a + N_S(w)`, where `a` is the
/// w-gradient (`λ r(θ)` for the trimmed penalty) and `N_S` the normal cone of
/// the capped simplex at `w`.
///
/// Per coordinate the residual after the box multiplier is `φ_i(a_i + μ)` with
/// `φ(s) = s²` for free weights, `min(0, s)²` at 0 and `max(0, s)²` at 1. The
/// sum is a convex piecewise quadratic in the equality multiplier `μ`; its
/// derivative is piecewise linear, so the minimizer is found exactly by walking
/// the sorted breakpoints.
pub fn weight_stationarity(a: &[f64], w: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), w.len());
    #[derive(Clone, Copy)]
    enum Kind {
        Free,
        Lower,
        Upper,
    }
    let kinds: Vec<Kind> = w
        .iter()
        .map(|&wi| {
            if wi <= 0.0 {
                Kind::Lower
            } else if wi >= 1.0 {
                Kind::Upper
            } else {
                Kind::Free
            }
        })
        .collect();

    let value = |mu: f64| -> f64 {
        a.iter()
            .zip(&kinds)
            .map(|(&ai, k)| {
                let s = ai + mu;
                match k {
                    Kind::Free => s * s,
                    Kind::Lower => s.min(0.0).powi(2),
                    Kind::Upper => s.max(0.0).powi(2),
                }
            })
            .sum()
    };

    // The derivative 2 Σ_{active} (a_i + μ) is non-decreasing. Sweep the
    // breakpoints -a_i left to right, tracking the active set (free weights
    // always, lower-bound weights while a_i + μ < 0, upper-bound weights once
    // a_i + μ > 0), and stop in the first segment where it reaches zero.
    let mut events: Vec<(f64, Kind, f64)> = a
        .iter()
        .zip(&kinds)
        .filter(|(_, k)| !matches!(k, Kind::Free))
        .map(|(&ai, &k)| (-ai, k, ai))
        .collect();
    events.sort_unstable_by(|x, y| x.0.total_cmp(&y.0));
    let (mut sum, mut cnt) = (0.0, 0usize);
    for (&ai, k) in a.iter().zip(&kinds) {
        if matches!(k, Kind::Free | Kind::Lower) {
            sum += ai;
            cnt += 1;
        }
    }
    let mut lo = f64::NEG_INFINITY;
    let mut idx = 0;
    loop {
        let hi = events.get(idx).map_or(f64::INFINITY, |e| e.0);
        if cnt == 0 {
            let mu = if lo.is_finite() { lo } else if hi.is_finite() { hi } else { 0.0 };
            return value(mu);
        }
        let root = -sum / cnt as f64;
        if root <= hi {
            return value(root.max(lo));
        }
        while idx < events.len() && events[idx].0 == hi {
            let (_, k, ai) = events[idx];
            match k {
                Kind::Lower => {
                    sum -= ai;
                    cnt -= 1;
                }
                Kind::Upper => {
                    sum += ai;
                    cnt += 1;
                }
                Kind::Free => {}
            }
            idx += 1;
        }
        lo = hi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use trimreg_oracles as oracle;

    #[test]
    fn trimmed_l1_examples() {
        let th = [3.0, -1.0, 2.0];
        assert_eq!(trimmed_l1(&th, 1).unwrap(), 3.0);
        assert_eq!(trimmed_l1(&th, 0).unwrap(), 6.0);
        assert_eq!(trimmed_l1(&th, 3).unwrap(), 0.0);
        assert!(matches!(trimmed_l1(&th, 4), Err(TrimError::Domain(_))));
    }

    #[test]
    fn optimal_weights_examples() {
        let w = optimal_weights(&[3.0, -1.0, 2.0], 1).unwrap();
        assert_eq!(w.as_slice(), &[0.0, 1.0, 1.0]);
        let w = optimal_weights(&[5.0, 5.0], 1).unwrap();
        assert_eq!(w.as_slice(), &[0.0, 1.0]);
        let w = optimal_weights(&[0.3, -7.0, 1.0], 0).unwrap();
        assert_eq!(w.as_slice(), &[1.0, 1.0, 1.0]);
        assert!(optimal_weights(&[1.0], 2).is_err());
    }

    #[test]
    fn projection_examples() {
        let w = project_capped_simplex(&[0.5, 0.5, 0.5], 1).unwrap();
        for &e in w.as_slice() {
            assert!((e - 2.0 / 3.0).abs() < 1e-12);
        }
        let w = project_capped_simplex(&[2.0, 0.0, 0.0], 1).unwrap();
        let want = oracle::capped_simplex_qp(&[2.0, 0.0, 0.0], 1);
        for (a, b) in w.as_slice().iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((w.as_slice()[0] - 1.0).abs() < 1e-12);
        assert!((w.as_slice()[1] - 0.5).abs() < 1e-12);

        let feasible = [0.25, 0.75, 1.0, 0.0];
        let w = project_capped_simplex(&feasible, 2).unwrap();
        for (a, b) in w.as_slice().iter().zip(&feasible) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_extreme_trim_counts() {
        let z = [0.3, -2.0, 4.0];
        assert_eq!(project_capped_simplex(&z, 0).unwrap().as_slice(), &[1.0; 3]);
        assert_eq!(project_capped_simplex(&z, 3).unwrap().as_slice(), &[0.0; 3]);
        assert!(project_capped_simplex(&[f64::NAN, 1.0], 1).is_err());
    }

    #[test]
    fn weight_vector_validation() {
        assert!(WeightVector::new(vec![0.5, 0.5], 1).is_ok());
        assert!(WeightVector::new(vec![0.5, 0.6], 1).is_err());
        assert!(WeightVector::new(vec![1.5, -0.5], 1).is_err());
        assert!(WeightVector::new(vec![1.0], 2).is_err());
    }

    #[test]
    fn prox_examples() {
        assert_eq!(prox_weighted_l1(&[2.0, 2.0], &[1.0, 0.0], 0.5), vec![1.5, 2.0]);
        assert_eq!(prox_weighted_l1(&[0.3], &[1.0], 0.5), vec![0.0]);
    }

    #[test]
    fn prox_matches_grid_oracle() {
        let z = [1.7, -0.2, 0.0, -3.1, 0.45];
        let w = [1.0, 0.3, 0.5, 0.0, 0.9];
        let t = 0.6;
        let got = prox_weighted_l1(&z, &w, t);
        for j in 0..5 {
            let x = oracle::grid_argmin(
                |x| 0.5 * (x - z[j]).powi(2) + t * w[j] * x.abs(),
                -5.0,
                5.0,
            );
            assert!((got[j] - x).abs() < 1e-6, "coord {j}: {} vs {x}", got[j]);
        }
    }

    #[test]
    fn subgradient_examples() {
        assert_eq!(min_norm_theta_subgradient(&[0.3], &[0.0], &[1.0], 0.5), vec![0.0]);
        let u = min_norm_theta_subgradient(&[0.3], &[1.0], &[1.0], 0.5);
        assert!((u[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn subgradient_matches_interval_oracle() {
        let grad = [0.3, -1.2, 0.05, 2.0, -0.4, 0.0];
        let theta = [0.0, 0.0, 1.5, 0.0, -2.0, 0.0];
        let w = [1.0, 0.5, 0.2, 1.0, 0.7, 0.0];
        let lambda = 0.8;
        let got = min_norm_theta_subgradient(&grad, &theta, &w, lambda);
        for j in 0..6 {
            let want = oracle::min_norm_subgrad_scalar(grad[j], theta[j], w[j], lambda);
            assert!((got[j] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn weight_stationarity_binary_optimum_is_zero() {
        // w zero on the largest entry, ones elsewhere: lambda*|theta| ordered consistently
        let a = [3.0, 1.0, 2.0];
        assert!(weight_stationarity(&a, &[0.0, 1.0, 1.0]) < 1e-24);
        // wrong trim choice is not stationary
        assert!(weight_stationarity(&a, &[1.0, 0.0, 1.0]) > 0.1);
    }

    #[test]
    fn weight_stationarity_matches_grid_oracle() {
        let mut s = crate::rng::Stream::new(11);
        for _ in 0..100 {
            let p = 1 + s.below(6);
            let theta: Vec<f64> = (0..p)
                .map(|_| if s.uniform() < 0.2 { 0.0 } else { s.normal() })
                .collect();
            let h = s.below(p + 1);
            let z: Vec<f64> = (0..p).map(|_| 2.0 * s.normal()).collect();
            let w = project_capped_simplex(&z, h).unwrap();
            let lambda = 0.1 + 2.0 * s.uniform();
            let a: Vec<f64> = theta.iter().map(|t| lambda * t.abs()).collect();
            let got = weight_stationarity(&a, w.as_slice());
            let want = oracle::weight_stationarity_grid(&theta, w.as_slice(), lambda);
            assert!((got - want).abs() < 1e-6, "{got} vs {want}");
            assert!(got <= want + 1e-12);
        }
    }

    fn vec_strategy(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, 1..=max_len)
    }

    proptest! {
        #[test]
        fn dc_identity(theta in vec_strategy(20), hseed in 0usize..100) {
            let h = hseed % (theta.len() + 1);
            let l1: f64 = theta.iter().map(|t| t.abs()).sum();
            let top: f64 = top_h_indices(&theta, h).iter().map(|&j| theta[j].abs()).sum();
            let r = trimmed_l1(&theta, h).unwrap();
            prop_assert!((r - (l1 - top)).abs() <= 1e-12 * (1.0 + l1));
        }

        #[test]
        fn sparsity_equivalence(mut theta in vec_strategy(12), zeros in prop::collection::vec(any::<bool>(), 12), hseed in 0usize..100) {
            for (t, z) in theta.iter_mut().zip(&zeros) {
                if *z { *t = 0.0; }
            }
            let h = hseed % (theta.len() + 1);
            let nnz = theta.iter().filter(|t| **t != 0.0).count();
            let r = trimmed_l1(&theta, h).unwrap();
            prop_assert_eq!(r == 0.0, nnz <= h);
        }

        #[test]
        fn monotone_in_trim(theta in vec_strategy(15), hseed in 0usize..100) {
            let h = hseed % theta.len();
            prop_assert!(trimmed_l1(&theta, h + 1).unwrap() <= trimmed_l1(&theta, h).unwrap());
        }

        #[test]
        fn reduction_consistency(theta in vec_strategy(12), hseed in 0usize..100) {
            let h = hseed % (theta.len() + 1);
            let w = optimal_weights(&theta, h).unwrap();
            prop_assert!(w.is_binary());
            let inner: f64 = w.as_slice().iter().zip(&theta).map(|(wi, t)| wi * t.abs()).sum();
            let r = trimmed_l1(&theta, h).unwrap();
            prop_assert!((inner - r).abs() <= 1e-12 * (1.0 + r));
            let best = oracle::trimmed_l1_enumerated(&theta, h);
            prop_assert!(inner <= best + 1e-12 * (1.0 + best));
        }

        #[test]
        fn projection_feasible_and_idempotent(z in prop::collection::vec(-3.0f64..3.0, 1..30), hseed in 0usize..100) {
            let h = hseed % (z.len() + 1);
            let w = project_capped_simplex(&z, h).unwrap();
            let sum: f64 = w.as_slice().iter().sum();
            prop_assert!((sum - (z.len() - h) as f64).abs() <= WEIGHT_SUM_TOL);
            prop_assert!(w.as_slice().iter().all(|&e| (0.0..=1.0).contains(&e)));
            let again = project_capped_simplex(w.as_slice(), h).unwrap();
            for (a, b) in again.as_slice().iter().zip(w.as_slice()) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn projection_non_expansive(pair in (1usize..15).prop_flat_map(|p| (
            prop::collection::vec(-3.0f64..3.0, p),
            prop::collection::vec(-3.0f64..3.0, p),
            0..=p,
        ))) {
            let (z1, z2, h) = pair;
            let w1 = project_capped_simplex(&z1, h).unwrap();
            let w2 = project_capped_simplex(&z2, h).unwrap();
            let dw: f64 = w1.as_slice().iter().zip(w2.as_slice()).map(|(a, b)| (a - b).powi(2)).sum();
            let dz: f64 = z1.iter().zip(&z2).map(|(a, b)| (a - b).powi(2)).sum();
            prop_assert!(dw.sqrt() <= dz.sqrt() + 1e-10);
        }

        #[test]
        fn projection_matches_qp_oracle(z in prop::collection::vec(-2.0f64..3.0, 1..=8), hseed in 0usize..100) {
            let h = hseed % (z.len() + 1);
            let w = project_capped_simplex(&z, h).unwrap();
            let want = oracle::capped_simplex_qp(&z, h);
            for (a, b) in w.as_slice().iter().zip(&want) {
                prop_assert!((a - b).abs() < 1e-8, "{:?} vs {:?}", w.as_slice(), want);
            }
        }

        #[test]
        fn prox_beats_random_candidates(z in prop::collection::vec(-4.0f64..4.0, 1..6),
                                        wraw in prop::collection::vec(0.0f64..1.0, 6),
                                        t in 0.01f64..3.0,
                                        seed in any::<u64>()) {
            let w = &wraw[..z.len()];
            let obj = |x: &[f64]| -> f64 {
                x.iter().zip(&z).zip(w).map(|((xi, zi), wi)| 0.5 * (xi - zi).powi(2) + t * wi * xi.abs()).sum()
            };
            let best = obj(&prox_weighted_l1(&z, w, t));
            let mut s = crate::rng::Stream::new(seed);
            for _ in 0..10_000 {
                let cand: Vec<f64> = z.iter().map(|zi| zi + 2.0 * s.normal()).collect();
                prop_assert!(best <= obj(&cand) + 1e-12);
            }
        }
    }
}

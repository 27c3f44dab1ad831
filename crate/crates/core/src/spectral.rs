//! Spectral objectives on PSD matrices and their generalized gradients.
//!
//! Eigenvalue vectors are always sorted descending. Rank-deficient values use
//! infinite sentinels (`−∞` for log-determinant style objectives, `+∞` for
//! trace-of-inverse style ones) so that search code can compare them.

use serde::Serialize;

use crate::error::{MespError, Result};
use crate::linalg::{eig_matrix, Matrix, SpectralDecomposition, PINV_TOLERANCE};

fn check_cardinality(len: usize, s: usize) -> Result<()> {
    if s < 1 || s > len {
        return Err(MespError::BadCardinality { s, max: len });
    }
    Ok(())
}

fn clamp_nonneg(lambda: &[f64]) -> Vec<f64> {
    lambda.iter().map(|&l| l.max(0.0)).collect()
}

/// `log` of the product of the `s` largest eigenvalues.
pub fn log_det_top(lambda: &[f64], s: usize) -> Result<f64> {
    check_cardinality(lambda.len(), s)?;
    Ok(log_product(&lambda[..s]))
}

/// `log` of the product of the `s` smallest eigenvalues.
pub fn log_det_bottom(lambda: &[f64], s: usize) -> Result<f64> {
    check_cardinality(lambda.len(), s)?;
    Ok(log_product(&lambda[lambda.len() - s..]))
}

fn log_product(values: &[f64]) -> f64 {
    let mut acc = 0.0;
    for &l in values {
        if l <= 0.0 {
            return f64::NEG_INFINITY;
        }
        acc += l.ln();
    }
    acc
}

/// Sum of reciprocals of the `s` largest eigenvalues (`+∞` if `λ_s ≤ 0`).
pub fn tr_top(lambda: &[f64], s: usize) -> Result<f64> {
    check_cardinality(lambda.len(), s)?;
    let mut acc = 0.0;
    for &l in &lambda[..s] {
        if l <= 0.0 {
            return Ok(f64::INFINITY);
        }
        acc += 1.0 / l;
    }
    Ok(acc)
}

/// Sum of the `s` smallest eigenvalues.
pub fn tr_bottom(lambda: &[f64], s: usize) -> Result<f64> {
    check_cardinality(lambda.len(), s)?;
    Ok(lambda[lambda.len() - s..].iter().sum())
}

/// The separating index `k ∈ [0, s)` with
/// `λ_k > (Σ_{i>k} λ_i)/(s−k) ≥ λ_{k+1}` (1-based, `λ_0 = ∞`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KappaIndex {
    pub k: usize,
    /// `(Σ_{i>k} λ_i) / (s − k)`.
    pub threshold: f64,
    /// `Σ_{i>k} λ_i`.
    pub tail_sum: f64,
}

pub fn kappa(lambda: &[f64], s: usize) -> Result<KappaIndex> {
    check_cardinality(lambda.len(), s)?;
    let lam = clamp_nonneg(lambda);
    let tol = 1e-12 * (1.0 + lam[0]);
    let mut tail: f64 = lam.iter().sum();
    for k in 0..s {
        let threshold = tail / (s - k) as f64;
        let above = k == 0 || lam[k - 1] > threshold - tol;
        if above && threshold >= lam[k] - tol {
            return Ok(KappaIndex {
                k,
                threshold,
                tail_sum: tail,
            });
        }
        tail -= lam[k];
        tail = tail.max(0.0);
    }
    Err(MespError::NoValidIndex)
}

/// Concave extension of `log det^s` evaluated on eigenvalues.
pub fn gamma_s_eigen(lambda: &[f64], s: usize) -> Result<f64> {
    let kp = kappa(lambda, s)?;
    if kp.threshold <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let head: f64 = lambda[..kp.k].iter().map(|l| l.ln()).sum();
    Ok(head + (s - kp.k) as f64 * kp.threshold.ln())
}

pub fn gamma_s(x: &Matrix, s: usize) -> Result<f64> {
    gamma_s_eigen(&crate::linalg::eigenvalues(x), s)
}

/// Convex counterpart of `tr^s(X†)` evaluated on eigenvalues.
pub fn phi_s_eigen(lambda: &[f64], s: usize) -> Result<f64> {
    let kp = kappa(lambda, s)?;
    if kp.tail_sum <= 0.0 {
        return Ok(f64::INFINITY);
    }
    let head: f64 = lambda[..kp.k].iter().map(|l| 1.0 / l).sum();
    let m = (s - kp.k) as f64;
    Ok(head + m * m / kp.tail_sum)
}

pub fn phi_s(x: &Matrix, s: usize) -> Result<f64> {
    phi_s_eigen(&crate::linalg::eigenvalues(x), s)
}

/// A generalized gradient `Q diag(beta) Qᵀ` in the eigenbasis of the point
/// where it was taken.
#[derive(Debug, Clone)]
pub struct GeneralizedGradient {
    pub matrix: Matrix,
    pub beta: Vec<f64>,
    pub kappa: KappaIndex,
    /// Spectral decomposition of the point.
    pub spectrum: SpectralDecomposition,
}

fn numerical_rank(lambda: &[f64]) -> usize {
    let lmax = lambda.first().copied().unwrap_or(0.0);
    if lmax <= 0.0 {
        return 0;
    }
    lambda.iter().filter(|&&l| l > PINV_TOLERANCE * lmax).count()
}

/// The supgradient of `Γ_s` at `X` with `β_i = 1/λ_i` for `i ≤ k` and the
/// common value `(s−k)/Σ_{j>k} λ_j` on every remaining direction, including
/// the null space of `X`.
pub fn gamma_supgradient(x: &Matrix, s: usize) -> Result<GeneralizedGradient> {
    gamma_supgradient_from(eig_matrix(x), s)
}

pub(crate) fn gamma_supgradient_from(sd: SpectralDecomposition, s: usize) -> Result<GeneralizedGradient> {
    let lam = &sd.eigenvalues;
    check_cardinality(lam.len(), s)?;
    let rank = numerical_rank(lam);
    if rank < s {
        return Err(MespError::RankDeficient { rank, s });
    }
    let kp = kappa(lam, s)?;
    let tail_value = (s - kp.k) as f64 / kp.tail_sum;
    let beta: Vec<f64> = (0..lam.len())
        .map(|i| if i < kp.k { 1.0 / lam[i] } else { tail_value })
        .collect();
    let matrix = sd.with_values(&beta);
    Ok(GeneralizedGradient {
        matrix,
        beta,
        kappa: kp,
        spectrum: sd,
    })
}

/// Subgradient of `Φ_s` at `X`: `−Q diag(β*) Qᵀ` with `β*_i = 1/λ_i²` for
/// `i ≤ k` and `(s−k)²/(Σ_{j>k} λ_j)²` otherwise. `Φ_s` is decreasing in `X`,
/// hence the sign; `Q diag(β*) Qᵀ` itself is the matching A-dual matrix.
pub fn phi_subgradient(x: &Matrix, s: usize) -> Result<GeneralizedGradient> {
    phi_subgradient_from(eig_matrix(x), s)
}

pub(crate) fn phi_subgradient_from(sd: SpectralDecomposition, s: usize) -> Result<GeneralizedGradient> {
    let lam = &sd.eigenvalues;
    check_cardinality(lam.len(), s)?;
    let rank = numerical_rank(lam);
    if rank < s {
        return Err(MespError::RankDeficient { rank, s });
    }
    let kp = kappa(lam, s)?;
    let m = (s - kp.k) as f64;
    let tail_value = m * m / (kp.tail_sum * kp.tail_sum);
    let beta: Vec<f64> = (0..lam.len())
        .map(|i| if i < kp.k { -1.0 / (lam[i] * lam[i]) } else { -tail_value })
        .collect();
    let matrix = sd.with_values(&beta);
    Ok(GeneralizedGradient {
        matrix,
        beta,
        kappa: kp,
        spectrum: sd,
    })
}

/// `log C(n, s)` as a sum of logs.
pub fn log_binomial(n: usize, s: usize) -> f64 {
    if s > n {
        return f64::NEG_INFINITY;
    }
    let s = s.min(n - s);
    (1..=s).map(|i| ((n - s + i) as f64 / i as f64).ln()).sum()
}

pub fn log_factorial(s: usize) -> f64 {
    (2..=s).map(|i| (i as f64).ln()).sum()
}

/// Additive approximation bounds (optimal value minus algorithm value).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MespBounds {
    /// `s log s + log C(n,s) − s log n` (product sampling / derandomized).
    pub sampling: f64,
    /// `s log s − log s!`.
    pub factorial_sampling: f64,
    /// `s min{log s, log(n − s + 2 − n/s)}`.
    pub local_search: f64,
    /// `½ log(2) s(s−1) + ½ s log n`.
    pub greedy: f64,
}

pub fn mesp_bounds(n: usize, s: usize) -> Result<MespBounds> {
    check_cardinality(n, s)?;
    let (nf, sf) = (n as f64, s as f64);
    let sampling = sf * sf.ln() + log_binomial(n, s) - sf * nf.ln();
    Ok(MespBounds {
        sampling: sampling.max(0.0),
        factorial_sampling: sf * sf.ln() - log_factorial(s),
        local_search: local_search_bound(n, s, 0.0),
        greedy: 0.5 * 2f64.ln() * sf * (sf - 1.0) + 0.5 * sf * nf.ln(),
    })
}

/// Local-search bound with the `(1+θ)` acceptance threshold:
/// `s min{log(s(1+θ)), log((n−s)(1+θ) − n/s + 2)}`.
pub fn local_search_bound(n: usize, s: usize, theta: f64) -> f64 {
    let (nf, sf) = (n as f64, s as f64);
    let a = (sf * (1.0 + theta)).ln();
    let b = ((nf - sf) * (1.0 + theta) - nf / sf + 2.0).ln();
    (sf * a.min(b)).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::random_gram;
    use crate::linalg::{eigenvalues, Vector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn diag(v: &[f64]) -> Matrix {
        Matrix::from_diagonal(&Vector::from_column_slice(v))
    }

    #[test]
    fn determinant_products() {
        assert!((log_det_top(&[3.0, 2.0, 1.0], 2).unwrap() - 6f64.ln()).abs() < 1e-15);
        assert_eq!(log_det_top(&[1.0, 1.0, 1.0], 3).unwrap(), 0.0);
        assert_eq!(log_det_top(&[4.0, 2.0, 0.0], 3).unwrap(), f64::NEG_INFINITY);
        assert!((log_det_bottom(&[3.0, 2.0, 1.0], 2).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(log_det_bottom(&[1.0, 1.0], 2).unwrap(), 0.0);
        assert_eq!(log_det_bottom(&[4.0, 2.0, 0.0], 1).unwrap(), f64::NEG_INFINITY);
        assert!(matches!(log_det_top(&[1.0], 0), Err(MespError::BadCardinality { .. })));
        assert!(matches!(log_det_top(&[1.0], 2), Err(MespError::BadCardinality { .. })));
    }

    #[test]
    fn traces() {
        assert!((tr_top(&[4.0, 2.0, 1.0], 2).unwrap() - 0.75).abs() < 1e-15);
        assert!((tr_bottom(&[4.0, 2.0, 1.0], 2).unwrap() - 3.0).abs() < 1e-15);
        assert_eq!(tr_top(&[1.0, 0.0], 2).unwrap(), f64::INFINITY);
    }

    // Brute-force scan of both separation inequalities for every k.
    fn kappa_by_scan(lam: &[f64], s: usize) -> Vec<usize> {
        (0..s)
            .filter(|&k| {
                let thr: f64 = lam[k..].iter().sum::<f64>() / (s - k) as f64;
                let left = if k == 0 { f64::INFINITY } else { lam[k - 1] };
                left > thr && thr >= lam[k]
            })
            .collect()
    }

    #[test]
    fn kappa_examples() {
        assert_eq!(kappa_by_scan(&[4.0, 2.0, 1.0], 2), vec![1]);
        let kp = kappa(&[4.0, 2.0, 1.0], 2).unwrap();
        assert_eq!(kp.k, 1);
        assert!((kp.threshold - 3.0).abs() < 1e-15);

        assert_eq!(kappa_by_scan(&[1.0, 1.0, 1.0], 2), vec![0]);
        let kp = kappa(&[1.0, 1.0, 1.0], 2).unwrap();
        assert_eq!(kp.k, 0);
        assert!((kp.threshold - 1.5).abs() < 1e-15);

        let kp = kappa(&[5.0, 0.0, 0.0], 2).unwrap();
        assert_eq!(kp.k, 1);
        assert_eq!(kp.threshold, 0.0);
    }

    #[test]
    fn gamma_examples() {
        let g = gamma_s(&diag(&[4.0, 2.0, 1.0]), 2).unwrap();
        assert!((g - 12f64.ln()).abs() < 1e-12);
        let g = gamma_s(&diag(&[1.0, 1.0, 1.0]), 2).unwrap();
        assert!((g - 2.0 * 1.5f64.ln()).abs() < 1e-12);
        assert_eq!(gamma_s(&diag(&[3.0, 0.0, 0.0]), 2).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn gamma_and_phi_equal_spectral_objectives_at_rank_s() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for s in 1..5 {
            let x = random_gram(&mut rng, s, 6);
            let lam = eigenvalues(x.as_matrix());
            let g = gamma_s(x.as_matrix(), s).unwrap();
            let det = log_det_top(&lam, s).unwrap();
            assert!((g - det).abs() < 1e-8, "s={s}: {g} vs {det}");
            let p = phi_s(x.as_matrix(), s).unwrap();
            let t = tr_top(&lam, s).unwrap();
            assert!((p - t).abs() < 1e-8 * (1.0 + t));
        }
    }

    #[test]
    fn phi_examples() {
        let p = phi_s(&diag(&[4.0, 2.0, 1.0]), 2).unwrap();
        assert!((p - 7.0 / 12.0).abs() < 1e-12);
        let p = phi_s(&Matrix::identity(4, 4), 4).unwrap();
        assert!((p - 4.0).abs() < 1e-12);
    }

    #[test]
    fn supgradient_coefficients() {
        let g = gamma_supgradient(&diag(&[4.0, 2.0, 1.0]), 2).unwrap();
        let expect = [0.25, 1.0 / 3.0, 1.0 / 3.0];
        for (b, e) in g.beta.iter().zip(expect) {
            assert!((b - e).abs() < 1e-12);
        }
        let m = diag(&[4.0, 1.0, 0.0]);
        assert!(matches!(gamma_supgradient(&m, 3), Err(MespError::RankDeficient { rank: 2, s: 3 })));
    }

    #[test]
    fn sampling_bound_values() {
        let b = mesp_bounds(4, 2).unwrap();
        let expect = 2.0 * 2f64.ln() + 6f64.ln() - 2.0 * 4f64.ln();
        assert!((b.sampling - expect).abs() < 1e-12);
        assert!((b.sampling - 1.5f64.ln()).abs() < 1e-12);
        for n in 1..30 {
            let one = mesp_bounds(n, 1).unwrap();
            assert!(one.sampling.abs() < 1e-12);
            assert!(one.local_search.abs() < 1e-12);
            assert!(mesp_bounds(n, n).unwrap().sampling.abs() < 1e-9);
        }
    }

    #[test]
    fn log_binomial_matches_direct() {
        assert!((log_binomial(8, 3) - 56f64.ln()).abs() < 1e-12);
        assert!((log_binomial(10, 0)).abs() < 1e-15);
        assert!((log_binomial(10, 10)).abs() < 1e-15);
    }
}

//! Brute-force ground truth for small instances. Every routine enumerates
//! subsets directly and evaluates determinants by Cholesky factorization,
//! independently of the spectral code paths used by the fast algorithms.

use itertools::Itertools;
use nalgebra::Cholesky;

use crate::error::{MespError, Result};
use crate::linalg::{eigenvalues, CovarianceInstance, Matrix};
use crate::sampling::SequentialLaw;
use crate::spectral::log_binomial;

/// Default cap on the number of enumerated subsets.
pub const DEFAULT_CAP: usize = 200_000;

/// Values closer than this (relative) count as ties.
const TIE_TOLERANCE: f64 = 1e-12;

fn check_cap(n: usize, s: usize, cap: usize) -> Result<()> {
    if s > n {
        return Err(MespError::BadCardinality { s, max: n });
    }
    let count = log_binomial(n, s).exp();
    if count > cap as f64 + 0.5 {
        return Err(MespError::TooLarge { count: count.round(), cap });
    }
    Ok(())
}

fn cholesky(m: &Matrix) -> Option<Cholesky<f64, nalgebra::Dyn>> {
    if m.nrows() == 0 {
        return None;
    }
    Cholesky::new(m.clone())
}

/// `log det C_{S,S}` via Cholesky; `−∞` if the block is not positive definite.
pub fn cholesky_log_det(inst: &CovarianceInstance, subset: &[usize]) -> f64 {
    if subset.is_empty() {
        return 0.0;
    }
    match cholesky(&inst.principal(subset)) {
        Some(ch) => 2.0 * ch.l().diagonal().iter().map(|d| d.ln()).sum::<f64>(),
        None => f64::NEG_INFINITY,
    }
}

/// `det C_{S,S}` via Cholesky; `0` if the block is not positive definite.
pub fn cholesky_det(inst: &CovarianceInstance, subset: &[usize]) -> f64 {
    let l = cholesky_log_det(inst, subset);
    if l == f64::NEG_INFINITY {
        0.0
    } else {
        l.exp()
    }
}

/// `tr(C_{S,S}⁻¹)` via Cholesky; `+∞` if the block is not positive definite.
pub fn cholesky_trace_inverse(inst: &CovarianceInstance, subset: &[usize]) -> f64 {
    match cholesky(&inst.principal(subset)) {
        Some(ch) => ch.inverse().trace(),
        None => f64::INFINITY,
    }
}

/// Optimal set and value of `max log det C_{S,S}` over `|S| = s`. Ties go
/// to the lexicographically smallest set.
pub fn exact_mesp(inst: &CovarianceInstance, s: usize, cap: usize) -> Result<(Vec<usize>, f64)> {
    check_cap(inst.n(), s, cap)?;
    let mut best = (Vec::new(), f64::NEG_INFINITY);
    for set in (0..inst.n()).combinations(s) {
        let v = cholesky_log_det(inst, &set);
        if best.0.is_empty() || v > best.1 + TIE_TOLERANCE * (1.0 + best.1.abs()) {
            best = (set, v);
        }
    }
    Ok(best)
}

/// Optimal set and value of `min tr(C_{S,S}⁻¹)` over `|S| = s`.
pub fn exact_amesp(inst: &CovarianceInstance, s: usize, cap: usize) -> Result<(Vec<usize>, f64)> {
    check_cap(inst.n(), s, cap)?;
    let mut best = (Vec::new(), f64::INFINITY);
    for set in (0..inst.n()).combinations(s) {
        let v = cholesky_trace_inverse(inst, &set);
        if best.0.is_empty() || v < best.1 - TIE_TOLERANCE * (1.0 + best.1.abs()) {
            best = (set, v);
        }
    }
    Ok(best)
}

/// `E_ℓ(x)` as a sum over all size-`ℓ` subsets.
pub fn naive_esp(x: &[f64], l: usize) -> f64 {
    (0..x.len())
        .combinations(l)
        .map(|set| set.iter().map(|&i| x[i]).product::<f64>())
        .sum()
}

/// `min_{|S|=s} λ_min(C_{S,S})`.
pub fn exact_delta(inst: &CovarianceInstance, s: usize, cap: usize) -> Result<f64> {
    check_cap(inst.n(), s, cap)?;
    if s == 0 {
        return Err(MespError::BadCardinality { s, max: inst.n() });
    }
    let mut delta = f64::INFINITY;
    for set in (0..inst.n()).combinations(s) {
        let ev = eigenvalues(&inst.principal(&set));
        delta = delta.min(*ev.last().unwrap());
    }
    Ok(delta.max(0.0))
}

/// Which subset law to tabulate.
#[derive(Debug, Clone, Copy)]
pub enum Law<'a> {
    /// `P[S] ∝ ∏ x̂_i`.
    Product,
    /// `P[S] ∝ ∏ x̂_i · det C_{S,S}`.
    Volume(&'a CovarianceInstance),
}

/// Every size-`s` subset with positive probability under `law`, with its
/// probability, in lexicographic order.
pub fn exact_distribution(xhat: &[f64], s: usize, law: Law<'_>, cap: usize) -> Result<Vec<(Vec<usize>, f64)>> {
    let n = xhat.len();
    check_cap(n, s, cap)?;
    let mut table: Vec<(Vec<usize>, f64)> = (0..n)
        .combinations(s)
        .map(|set| {
            let mut w: f64 = set.iter().map(|&i| xhat[i].max(0.0)).product();
            if let Law::Volume(inst) = law {
                if w > 0.0 {
                    w *= cholesky_det(inst, &set);
                }
            }
            (set, w)
        })
        .filter(|(_, w)| *w > 0.0)
        .collect();
    let total: f64 = table.iter().map(|(_, w)| w).sum();
    if !(total > 0.0) {
        return Err(MespError::InsufficientSupport {
            positive: xhat.iter().filter(|&&v| v > 0.0).count(),
            s,
        });
    }
    for entry in &mut table {
        entry.1 /= total;
    }
    Ok(table)
}

/// Leaf probabilities of the sequential sampler's decision tree: every
/// accept/reject path is followed and its probability multiplied out.
pub fn tree_distribution<L: SequentialLaw + ?Sized>(law: &L) -> Vec<(Vec<usize>, f64)> {
    fn walk<L: SequentialLaw + ?Sized>(
        law: &L,
        j: usize,
        chosen: &mut Vec<usize>,
        p: f64,
        out: &mut Vec<(Vec<usize>, f64)>,
    ) {
        if p == 0.0 {
            return;
        }
        if chosen.len() == law.size() {
            out.push((chosen.clone(), p));
            return;
        }
        if j == law.len() {
            // Path ran out of indices before reaching size s.
            out.push((chosen.clone(), p));
            return;
        }
        let a = law.accept_probability(chosen, j);
        chosen.push(j);
        walk(law, j + 1, chosen, p * a, out);
        chosen.pop();
        walk(law, j + 1, chosen, p * (1.0 - a), out);
    }
    let mut out = Vec::new();
    walk(law, 0, &mut Vec::new(), 1.0, &mut out);
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

/// `log E[det C_{S,S}]` under the product law of `xhat`.
pub fn expected_log_objective(inst: &CovarianceInstance, xhat: &[f64], s: usize, cap: usize) -> Result<f64> {
    let dist = exact_distribution(xhat, s, Law::Product, cap)?;
    Ok(dist
        .iter()
        .map(|(set, p)| p * cholesky_det(inst, set))
        .sum::<f64>()
        .ln())
}

/// `E[det C_{S,S} | T ⊆ S]` under the product law, by enumeration.
pub fn conditional_expected_det(
    inst: &CovarianceInstance,
    xhat: &[f64],
    s: usize,
    t: &[usize],
    cap: usize,
) -> Result<f64> {
    let dist = exact_distribution(xhat, s, Law::Product, cap)?;
    let mut mass = 0.0;
    let mut acc = 0.0;
    for (set, p) in &dist {
        if t.iter().all(|i| set.contains(i)) {
            mass += p;
            acc += p * cholesky_det(inst, set);
        }
    }
    if mass == 0.0 {
        // Conditioning on a null event: fall back to the unnormalized weights.
        let rest: Vec<usize> = (0..inst.n()).filter(|i| !t.contains(i)).collect();
        let mut wsum = 0.0;
        for extra in rest.iter().copied().combinations(s - t.len()) {
            let w: f64 = extra.iter().map(|&i| xhat[i].max(0.0)).product();
            let mut set: Vec<usize> = t.iter().copied().chain(extra).collect();
            set.sort_unstable();
            wsum += w;
            acc += w * cholesky_det(inst, &set);
        }
        return Ok(if wsum > 0.0 { acc / wsum } else { 0.0 });
    }
    Ok(acc / mass)
}

/// `E[tr(C_{S,S}⁻¹)]` under the volume law of `xhat`.
pub fn expected_a_trace(inst: &CovarianceInstance, xhat: &[f64], s: usize, cap: usize) -> Result<f64> {
    let dist = exact_distribution(xhat, s, Law::Volume(inst), cap)?;
    Ok(dist
        .iter()
        .map(|(set, p)| p * cholesky_trace_inverse(inst, set))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{factorize, SymMatrix};

    #[test]
    fn small_examples() {
        let inst = factorize(&SymMatrix::from_diagonal(&[5.0, 4.0, 3.0, 2.0, 1.0]), 1e-12).unwrap();
        let (set, z) = exact_mesp(&inst, 2, DEFAULT_CAP).unwrap();
        assert_eq!(set, vec![0, 1]);
        assert!((z - 20f64.ln()).abs() < 1e-12);

        let inst = factorize(&SymMatrix::identity(6), 1e-12).unwrap();
        let (set, z) = exact_mesp(&inst, 3, DEFAULT_CAP).unwrap();
        assert_eq!(set, vec![0, 1, 2]);
        assert!(z.abs() < 1e-12);
        let (_, za) = exact_amesp(&inst, 3, DEFAULT_CAP).unwrap();
        assert!((za - 3.0).abs() < 1e-12);

        let inst = factorize(&SymMatrix::from_diagonal(&[4.0, 2.0, 1.0]), 1e-12).unwrap();
        let (set, za) = exact_amesp(&inst, 2, DEFAULT_CAP).unwrap();
        assert_eq!(set, vec![0, 1]);
        assert!((za - 0.75).abs() < 1e-12);

        assert!((naive_esp(&[1.0, 2.0, 3.0], 2) - 11.0).abs() < 1e-12);
        let inst = factorize(&SymMatrix::identity(5), 1e-12).unwrap();
        assert!((exact_delta(&inst, 3, DEFAULT_CAP).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn product_distribution_example() {
        let dist = exact_distribution(&[1.0, 0.5, 0.5], 2, Law::Product, DEFAULT_CAP).unwrap();
        let p: Vec<f64> = dist.iter().map(|e| e.1).collect();
        for (a, b) in p.iter().zip([0.4, 0.4, 0.2]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn swap_tight_optimum() {
        for (n, s) in [(5, 2), (8, 3)] {
            let inst = factorize(&crate::instances::swap_tight_instance(n, s), 1e-12).unwrap();
            let (set, z) = exact_mesp(&inst, s, DEFAULT_CAP).unwrap();
            assert!(z.abs() < 1e-9, "{z}");
            assert_eq!(set, (0..s).collect::<Vec<_>>());
        }
    }

    #[test]
    fn cap_is_enforced() {
        let inst = factorize(&SymMatrix::identity(30), 1e-12).unwrap();
        assert!(matches!(exact_mesp(&inst, 15, 1000), Err(MespError::TooLarge { cap: 1000, .. })));
    }
}

//! Randomized invariants checked against brute-force counterparts.

use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mesp::esp::{esp_all, log_esp, SuffixEspTable};
use mesp::instances::{random_covariance, random_gram};
use mesp::linalg::{eigenvalues, pinv, pinv_downdate, pinv_update, PINV_TOLERANCE};
use mesp::oracle::{cholesky_log_det, cholesky_trace_inverse, naive_esp};
use mesp::spectral::{gamma_s_eigen, kappa, log_det_top, phi_s_eigen};
use mesp::subset::{subset_log_det, subset_trace_inverse};
use mesp::factorize;

fn sorted_desc(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| b.partial_cmp(a).unwrap());
    v
}

/// Every k in [0, s) satisfying the separation inequalities, strictly.
fn separating_indices(lam: &[f64], s: usize) -> Vec<usize> {
    (0..s)
        .filter(|&k| {
            let tail: f64 = lam[k..].iter().sum();
            let thr = tail / (s - k) as f64;
            (k == 0 || lam[k - 1] > thr) && thr >= lam[k]
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn kappa_is_the_unique_separator(raw in prop::collection::vec(0.01f64..10.0, 1..9), pick in 0usize..100) {
        let lam = sorted_desc(raw);
        let s = 1 + pick % lam.len();
        let kp = kappa(&lam, s).unwrap();
        let all = separating_indices(&lam, s);
        prop_assert!(all.len() <= 1);
        if let Some(&k) = all.first() {
            prop_assert_eq!(k, kp.k);
        }
    }

    #[test]
    fn relaxation_objectives_bracket_the_spectral_ones(raw in prop::collection::vec(0.01f64..10.0, 1..9), pick in 0usize..100) {
        let lam = sorted_desc(raw);
        let s = 1 + pick % lam.len();
        // Γ_s ≥ log det^s and Φ_s ≤ Σ_{i≤s} 1/λ_i, with equality at s = d.
        let top = log_det_top(&lam, s).unwrap();
        let gamma = gamma_s_eigen(&lam, s).unwrap();
        prop_assert!(gamma >= top - 1e-10);
        let inv: f64 = lam[..s].iter().map(|l| 1.0 / l).sum();
        let phi = phi_s_eigen(&lam, s).unwrap();
        prop_assert!(phi <= inv + 1e-10 * inv);
        if s == lam.len() {
            assert_relative_eq!(gamma, top, max_relative = 1e-12, epsilon = 1e-12);
            assert_relative_eq!(phi, inv, max_relative = 1e-12);
        }
    }

    #[test]
    fn esp_matches_enumeration(x in prop::collection::vec(0.0f64..3.0, 0..9)) {
        let e = esp_all(&x, x.len());
        for (l, el) in e.iter().enumerate() {
            let naive = naive_esp(&x, l);
            assert_relative_eq!(*el, naive, max_relative = 1e-12, epsilon = 1e-12);
            if naive > 0.0 {
                assert_relative_eq!(log_esp(&x, l), naive.ln(), max_relative = 1e-12, epsilon = 1e-12);
            }
        }
        let s = x.len() / 2;
        let table = SuffixEspTable::new(&x, s);
        for j in 0..=x.len() {
            for r in 0..=s {
                let naive = naive_esp(&x[j..], r);
                if naive > 0.0 {
                    assert_relative_eq!(table.log_value(j, r), naive.ln(), max_relative = 1e-10, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn subset_objectives_match_cholesky(seed in any::<u64>(), n in 3usize..9, mask in any::<u16>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = factorize(&random_covariance(&mut rng, n), 1e-12).unwrap();
        let set: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        prop_assume!(!set.is_empty());
        assert_relative_eq!(subset_log_det(&inst, &set), cholesky_log_det(&inst, &set), epsilon = 1e-8, max_relative = 1e-9);
        assert_relative_eq!(subset_trace_inverse(&inst, &set), cholesky_trace_inverse(&inst, &set), max_relative = 1e-8);
    }

    #[test]
    fn rank_one_updates_round_trip(seed in any::<u64>(), d in 3usize..8, extra in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rank = (d - 1).min(2 + extra);
        let c = random_gram(&mut rng, rank, d);
        let full = pinv(c.as_matrix(), PINV_TOLERANCE);
        prop_assert_eq!(full.rank, rank);
        let inst = factorize(&c, 1e-12).unwrap();
        // Remove and re-add one of the spanning columns of a rank-deficient Gram.
        let cols: Vec<usize> = (0..rank).collect();
        let x = pinv(&inst.subset_gram(&cols), PINV_TOLERANCE);
        let v = inst.column(0);
        let down = pinv_downdate(&x, &v, 1e-7).unwrap();
        let fresh = pinv(&inst.subset_gram(&cols[1..]), PINV_TOLERANCE);
        prop_assert!((&down.xdag - &fresh.xdag).norm() <= 1e-6 * fresh.xdag.norm().max(1.0));
        let up = pinv_update(&down, &v, 1e-7).unwrap();
        prop_assert!((&up.xdag - &x.xdag).norm() <= 1e-6 * x.xdag.norm());
        let ev = eigenvalues(&up.x);
        prop_assert!(ev[rank - 1] > 0.0);
    }
}

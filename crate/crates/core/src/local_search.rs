//! Greedy construction and single-swap local search for the log-determinant
//! problem, driven by rank-one pseudoinverse updates.
//!
//! With `X = Σ_{i∈S} v_i v_iᵀ` of rank `|S|`, removing `i` leaves
//! `X₋ᵢ` and the swap `i → j` multiplies `det C_{S,S}` by
//! `v_jᵀ(I − X₋ᵢ†X₋ᵢ)v_j · ‖X†v_i‖²`, so each candidate costs one
//! matrix-vector product.

use serde::Serialize;

use crate::error::{MespError, Result};
use crate::linalg::{
    eigenvalues, pinv, pinv_downdate, pinv_update, CovarianceInstance, Matrix, PseudoInverseState,
    PINV_TOLERANCE,
};
use crate::relaxation::{ld_certificate_scaled, DualCertificate};
use crate::subset::subset_log_det;

/// Relative size of `‖(I − X†X)v‖ / ‖v‖` below which `v` is treated as lying
/// in the column space of `X`.
pub const COLUMN_TOLERANCE: f64 = 1e-7;

/// Slack added to the local-optimality inequalities when checking them.
pub const OPTIMALITY_SLACK: f64 = 1e-7;

#[derive(Debug, Clone)]
pub struct SearchState {
    /// Selected indices, sorted ascending.
    pub subset: Vec<usize>,
    pub pinv: PseudoInverseState,
    pub log_det: f64,
    pub swap_count: usize,
}

impl SearchState {
    /// State for a user-supplied set; rejects dependent columns.
    pub fn from_subset(inst: &CovarianceInstance, subset: &[usize]) -> Result<Self> {
        let mut subset = subset.to_vec();
        subset.sort_unstable();
        subset.dedup();
        if subset.iter().any(|&i| i >= inst.n()) {
            return Err(MespError::InvalidArgument("index out of range".into()));
        }
        let log_det = subset_log_det(inst, &subset);
        if log_det == f64::NEG_INFINITY {
            return Err(MespError::DependentColumns);
        }
        let pinv = pinv(&inst.subset_gram(&subset), PINV_TOLERANCE);
        Ok(Self {
            subset,
            pinv,
            log_det,
            swap_count: 0,
        })
    }

    fn contains_mask(&self, n: usize) -> Vec<bool> {
        let mut mask = vec![false; n];
        for &i in &self.subset {
            mask[i] = true;
        }
        mask
    }
}

/// `‖P v_j‖²` for every column, where `P` is a projector.
fn projected_norms(inst: &CovarianceInstance, projector: &Matrix) -> Vec<f64> {
    let pv = projector * inst.factor();
    pv.column_iter().map(|c| c.norm_squared()).collect()
}

fn column_norms(inst: &CovarianceInstance) -> Vec<f64> {
    inst.factor().column_iter().map(|c| c.norm()).collect()
}

/// Greedy selection: repeatedly add the column with the largest component
/// outside the current column space.
pub fn greedy_init(inst: &CovarianceInstance, s: usize) -> Result<SearchState> {
    let n = inst.n();
    if s < 1 || s > inst.d() {
        return Err(MespError::BadCardinality { s, max: inst.d() });
    }
    let norms = column_norms(inst);
    let mut state = PseudoInverseState::empty(inst.d());
    let mut chosen = vec![false; n];
    let mut order = Vec::with_capacity(s);
    for _ in 0..s {
        let scores = projected_norms(inst, &state.projector);
        let mut best: Option<usize> = None;
        for j in 0..n {
            if chosen[j] || scores[j].sqrt() <= COLUMN_TOLERANCE * norms[j] {
                continue;
            }
            if best.map_or(true, |b| scores[j] > scores[b]) {
                best = Some(j);
            }
        }
        let Some(j) = best else {
            return Err(MespError::RankStarved {
                selected: order.len(),
                s,
            });
        };
        state = pinv_update(&state, &inst.column(j), COLUMN_TOLERANCE)?;
        chosen[j] = true;
        order.push(j);
    }
    order.sort_unstable();
    let log_det = subset_log_det(inst, &order);
    Ok(SearchState {
        subset: order,
        pinv: state.refreshed(PINV_TOLERANCE),
        log_det,
        swap_count: 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocalSearchOptions {
    /// Accept a swap only if it multiplies the determinant by more than
    /// `1 + theta`.
    pub theta: f64,
    /// Recompute the pseudoinverse from scratch after this many swaps.
    pub refresh_every: usize,
    /// Hard cap on accepted swaps.
    pub max_swaps: usize,
}

impl Default for LocalSearchOptions {
    fn default() -> Self {
        Self {
            theta: 1e-6,
            refresh_every: 50,
            max_swaps: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SwapRecord {
    pub removed: usize,
    pub added: usize,
    /// `log det` after the swap, from the rank-one ratio.
    pub log_det: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalSearchTrace {
    pub initial_log_det: f64,
    pub swaps: Vec<SwapRecord>,
    pub passes: usize,
}

/// Best-improvement swap search: for each `i ∈ S` (ascending) find the best
/// replacement `j ∉ S` and accept it when the determinant grows by more than
/// `1 + θ`. Stops after a full pass without a swap.
pub fn local_search(
    inst: &CovarianceInstance,
    state: SearchState,
    opts: &LocalSearchOptions,
) -> Result<(SearchState, LocalSearchTrace)> {
    if !(opts.theta >= 0.0) {
        return Err(MespError::InvalidArgument("theta must be nonnegative".into()));
    }
    let n = inst.n();
    let mut state = state;
    let mut trace = LocalSearchTrace {
        initial_log_det: state.log_det,
        swaps: Vec::new(),
        passes: 0,
    };
    let mut since_refresh = 0;
    loop {
        trace.passes += 1;
        let mut improved = false;
        let snapshot = state.subset.clone();
        for &i in &snapshot {
            let Some(pos) = state.subset.iter().position(|&k| k == i) else {
                continue;
            };
            let vi = inst.column(i);
            let u = &state.pinv.xdag * &vi;
            let score_i = 1.0 / u.norm_squared();
            let reduced = pinv_downdate(&state.pinv, &vi, COLUMN_TOLERANCE)?;
            let scores = projected_norms(inst, &reduced.projector);
            let mask = state.contains_mask(n);
            let mut best: Option<usize> = None;
            for j in 0..n {
                if mask[j] {
                    continue;
                }
                if best.map_or(true, |b| scores[j] > scores[b]) {
                    best = Some(j);
                }
            }
            let Some(j) = best else { continue };
            if scores[j] > (1.0 + opts.theta) * score_i {
                let vj = inst.column(j);
                let next = match pinv_update(&reduced, &vj, COLUMN_TOLERANCE) {
                    Ok(st) => st,
                    Err(MespError::InColumnSpace { .. }) => continue,
                    Err(e) => return Err(e),
                };
                state.pinv = next;
                state.subset[pos] = j;
                state.log_det += (scores[j] / score_i).ln();
                state.swap_count += 1;
                trace.swaps.push(SwapRecord {
                    removed: i,
                    added: j,
                    log_det: state.log_det,
                });
                improved = true;
                since_refresh += 1;
                if since_refresh >= opts.refresh_every {
                    state.pinv = state.pinv.refreshed(PINV_TOLERANCE);
                    since_refresh = 0;
                }
                if state.swap_count >= opts.max_swaps {
                    break;
                }
            }
        }
        if !improved || state.swap_count >= opts.max_swaps {
            break;
        }
    }
    state.subset.sort_unstable();
    state.pinv = state.pinv.refreshed(PINV_TOLERANCE);
    state.log_det = subset_log_det(inst, &state.subset);
    Ok((state, trace))
}

/// Verify, for every pair `(i, j) ∈ S × ([n]∖S)`,
/// `‖X†v_i‖²·v_jᵀ(I − X†X)v_j + (v_jᵀX†v_i)² ≤ 1 + θ` (plus slack).
pub fn check_local_optimality(inst: &CovarianceInstance, state: &SearchState, theta: f64) -> Result<()> {
    let n = inst.n();
    let fresh = pinv(&inst.subset_gram(&state.subset), PINV_TOLERANCE);
    let mask = state.contains_mask(n);
    let v = inst.factor();
    let xdag_v = &fresh.xdag * v;
    let out_scores = projected_norms(inst, &fresh.projector);
    for &i in &state.subset {
        let a = xdag_v.column(i).norm_squared();
        for j in 0..n {
            if mask[j] {
                continue;
            }
            let cross = v.column(j).dot(&xdag_v.column(i));
            let lhs = a * out_scores[j] + cross * cross;
            let excess = lhs - (1.0 + theta);
            if excess > OPTIMALITY_SLACK {
                return Err(MespError::NotLocallyOptimal { i, j, excess });
            }
        }
    }
    Ok(())
}

/// Upper bound on the optimum certified by a local optimum. Two dual
/// matrices are tried, each with its best scaling and multipliers:
/// `tr(X†)(I − X†X) + X†` and `λ_s⁻¹(I − X†X) + X†`; the smaller bound wins.
pub fn dual_certificate_from_local(
    inst: &CovarianceInstance,
    state: &SearchState,
    theta: f64,
) -> Result<DualCertificate> {
    let s = state.subset.len();
    check_local_optimality(inst, state, theta)?;
    let fresh = pinv(&inst.subset_gram(&state.subset), PINV_TOLERANCE);
    if fresh.rank < s {
        return Err(MespError::DependentColumns);
    }
    let trace = fresh.xdag.trace();
    let lam = eigenvalues(&fresh.x);
    let lambda_s = lam[s - 1];
    let a = &fresh.projector * trace + &fresh.xdag;
    let b = &fresh.projector * (1.0 / lambda_s) + &fresh.xdag;
    let ca = ld_certificate_scaled(inst, s, &a)?;
    let cb = ld_certificate_scaled(inst, s, &b)?;
    Ok(if cb.bound_value < ca.bound_value { cb } else { ca })
}

/// Bound for a local optimum whose selected columns are orthogonal to all
/// others: `s·min{log(λ_max/δ), log(λ_max(n−s)/(sδ) − n/s + 2)}`.
pub fn orthogonal_local_bound(n: usize, s: usize, lambda_max: f64, delta: f64) -> f64 {
    let (nf, sf) = (n as f64, s as f64);
    let r = lambda_max / delta;
    sf * r.ln().min((r * (nf - sf) / sf - nf / sf + 2.0).ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::swap_tight_instance;
    use crate::linalg::{factorize, SymMatrix};

    #[test]
    fn greedy_on_diagonal_and_identity() {
        let inst = factorize(&SymMatrix::from_diagonal(&[5.0, 4.0, 3.0, 2.0, 1.0]), 1e-12).unwrap();
        let st = greedy_init(&inst, 2).unwrap();
        assert_eq!(st.subset, vec![0, 1]);
        assert!((st.log_det - 20f64.ln()).abs() < 1e-12);

        let inst = factorize(&SymMatrix::identity(6), 1e-12).unwrap();
        let st = greedy_init(&inst, 3).unwrap();
        assert_eq!(st.subset, vec![0, 1, 2]);
        assert!(st.log_det.abs() < 1e-12);
    }

    #[test]
    fn greedy_on_swap_tight_instance_takes_all_ones_first() {
        let inst = factorize(&swap_tight_instance(6, 3), 1e-12).unwrap();
        let st = greedy_init(&inst, 3).unwrap();
        // The all-ones column has the largest norm; the smallest such index is 3.
        assert!(st.subset.contains(&3));
        assert_eq!(st.subset.iter().filter(|&&i| i >= 3).count(), 1);
    }

    #[test]
    fn swap_tight_instance_terminates_immediately() {
        let inst = factorize(&swap_tight_instance(8, 3), 1e-12).unwrap();
        let st = SearchState::from_subset(&inst, &[0, 1, 2]).unwrap();
        let (out, trace) = local_search(&inst, st, &LocalSearchOptions::default()).unwrap();
        assert!(trace.swaps.is_empty());
        assert!(out.log_det.abs() < 1e-12);
    }

    #[test]
    fn diagonal_climbs_to_top_set() {
        let inst = factorize(&SymMatrix::from_diagonal(&[5.0, 4.0, 3.0, 2.0, 1.0]), 1e-12).unwrap();
        let st = SearchState::from_subset(&inst, &[3, 4]).unwrap();
        let opts = LocalSearchOptions {
            theta: 1e-9,
            ..Default::default()
        };
        let (out, _) = local_search(&inst, st, &opts).unwrap();
        assert_eq!(out.subset, vec![0, 1]);
        assert!((out.log_det - 20f64.ln()).abs() < 1e-10);
        let cert = dual_certificate_from_local(&inst, &out, opts.theta).unwrap();
        assert!((cert.bound_value - 20f64.ln()).abs() < 1e-9, "{}", cert.bound_value);
    }

    #[test]
    fn dependent_start_is_rejected() {
        let inst = factorize(&swap_tight_instance(6, 2), 1e-12).unwrap();
        assert_eq!(
            SearchState::from_subset(&inst, &[2, 3]).unwrap_err(),
            MespError::DependentColumns
        );
    }
}

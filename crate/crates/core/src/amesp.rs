//! Trace-of-inverse (A-optimal) variant: relaxation, volume sampling, swap
//! local search and the certificates that bound each of them.

use serde::Serialize;

use crate::error::{MespError, Result};
use crate::linalg::{eigenvalues, pinv, pinv_downdate, pinv_update, CovarianceInstance, PseudoInverseState, PINV_TOLERANCE};
use crate::local_search::{greedy_init, COLUMN_TOLERANCE, OPTIMALITY_SLACK};
use crate::relaxation::{ald_certificate_scaled, DualCertificate};
use crate::subset::subset_trace_inverse;

pub use crate::relaxation::solve_apc;
pub use crate::sampling::volume_sample_best;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AmespRatios {
    /// Volume sampling: `min{s, n − s + 1}`.
    pub volume: f64,
    /// Local search: `min{(s/2)(1 + λ_max/δ), (n + s + (n−s)λ_max/δ)/2}`.
    pub local: f64,
    /// Compact form of the local-search ratio,
    /// `s/2 + δ⁻¹·min{λ_max, nδ + (n−s)λ_max}`. Smaller than `local` when
    /// `s ≥ 2`, and not implied by it.
    pub local_compact: f64,
}

pub fn amesp_ratios(n: usize, s: usize, lambda_max: f64, delta: f64) -> AmespRatios {
    let (nf, sf) = (n as f64, s as f64);
    let r = lambda_max / delta;
    AmespRatios {
        volume: sf.min(nf - sf + 1.0),
        local: (0.5 * sf * (1.0 + r)).min(0.5 * (nf + sf + (nf - sf) * r)),
        local_compact: sf / 2.0 + (lambda_max.min(nf * delta + (nf - sf) * lambda_max)) / delta,
    }
}

#[derive(Debug, Clone)]
pub struct ASearchState {
    /// Selected indices, sorted ascending.
    pub subset: Vec<usize>,
    pub pinv: PseudoInverseState,
    /// `tr(C_{S,S}⁻¹)`.
    pub trace_inverse: f64,
    pub swap_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ALocalOptions {
    /// Accept a swap only if it lowers the objective by more than this
    /// relative amount.
    pub theta: f64,
    pub refresh_every: usize,
    pub max_swaps: usize,
}

impl Default for ALocalOptions {
    fn default() -> Self {
        Self {
            theta: 1e-9,
            refresh_every: 50,
            max_swaps: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ALocalTrace {
    pub initial_trace_inverse: f64,
    /// Objective after each accepted swap.
    pub objective: Vec<f64>,
    pub passes: usize,
}

/// Swap local search minimizing `tr(C_{S,S}⁻¹)`, started from `initial` or
/// from the greedy log-determinant set. Returns the local optimum and the
/// lower-bound certificate built from it.
pub fn a_local_search(
    inst: &CovarianceInstance,
    s: usize,
    initial: Option<&[usize]>,
    opts: &ALocalOptions,
) -> Result<(ASearchState, DualCertificate, ALocalTrace)> {
    if !(opts.theta >= 0.0 && opts.theta < 1.0) {
        return Err(MespError::InvalidArgument("theta must lie in [0, 1)".into()));
    }
    let n = inst.n();
    let start: Vec<usize> = match initial {
        Some(set) => {
            let mut set = set.to_vec();
            set.sort_unstable();
            set.dedup();
            if set.len() != s {
                return Err(MespError::BadCardinality { s: set.len(), max: s });
            }
            if subset_trace_inverse(inst, &set).is_infinite() {
                return Err(MespError::DependentColumns);
            }
            set
        }
        None => greedy_init(inst, s)?.subset,
    };
    let mut subset = start;
    let mut state = pinv(&inst.subset_gram(&subset), PINV_TOLERANCE);
    let mut current = state.xdag.trace();
    let mut trace = ALocalTrace {
        initial_trace_inverse: current,
        objective: Vec::new(),
        passes: 0,
    };
    let norms: Vec<f64> = inst.factor().column_iter().map(|c| c.norm()).collect();
    let mut swaps = 0;
    let mut since_refresh = 0;
    'outer: loop {
        trace.passes += 1;
        let mut improved = false;
        let snapshot = subset.clone();
        for &i in &snapshot {
            let Some(pos) = subset.iter().position(|&k| k == i) else {
                continue;
            };
            let reduced = pinv_downdate(&state, &inst.column(i), COLUMN_TOLERANCE)?;
            let base = reduced.xdag.trace();
            let pv = &reduced.projector * inst.factor();
            let xv = &reduced.xdag * inst.factor();
            let mut best: Option<(usize, f64)> = None;
            for j in 0..n {
                if subset.contains(&j) {
                    continue;
                }
                let b = pv.column(j).norm_squared();
                if b.sqrt() <= COLUMN_TOLERANCE * norms[j] {
                    continue;
                }
                let value = base + (1.0 + inst.factor().column(j).dot(&xv.column(j))) / b;
                if best.map_or(true, |(_, v)| value < v) {
                    best = Some((j, value));
                }
            }
            let Some((j, value)) = best else { continue };
            if value < (1.0 - opts.theta) * current {
                state = match pinv_update(&reduced, &inst.column(j), COLUMN_TOLERANCE) {
                    Ok(st) => st,
                    Err(MespError::InColumnSpace { .. }) => continue,
                    Err(e) => return Err(e),
                };
                subset[pos] = j;
                current = value;
                swaps += 1;
                trace.objective.push(current);
                improved = true;
                since_refresh += 1;
                if since_refresh >= opts.refresh_every {
                    state = state.refreshed(PINV_TOLERANCE);
                    current = state.xdag.trace();
                    since_refresh = 0;
                }
                if swaps >= opts.max_swaps {
                    break 'outer;
                }
            }
        }
        if !improved {
            break;
        }
    }
    subset.sort_unstable();
    let state = ASearchState {
        pinv: pinv(&inst.subset_gram(&subset), PINV_TOLERANCE),
        trace_inverse: subset_trace_inverse(inst, &subset),
        subset,
        swap_count: swaps,
    };
    let cert = a_certificate_from_local(inst, &state.subset)?;
    Ok((state, cert, trace))
}

/// Check, for every `(i, j) ∈ S × ([n]∖S)` with `X = Σ_{i∈S} v_i v_iᵀ`,
/// `v_iᵀX†³v_i · v_jᵀ(I−X†X)v_j ≤ v_iᵀX†²v_i·(1 + v_jᵀX†v_j) − 2·v_iᵀX†²v_j·v_iᵀX†v_j`,
/// relaxed by the relative acceptance threshold `theta`.
pub fn check_a_local_optimality(inst: &CovarianceInstance, subset: &[usize], theta: f64) -> Result<()> {
    let n = inst.n();
    let st = pinv(&inst.subset_gram(subset), PINV_TOLERANCE);
    let v = inst.factor();
    let x1 = &st.xdag * v;
    let x2 = &st.xdag * &x1;
    let x3 = &st.xdag * &x2;
    let pv = &st.projector * v;
    let tr = st.xdag.trace();
    for &i in subset {
        let vi = v.column(i);
        let a = vi.dot(&x3.column(i));
        let b = vi.dot(&x2.column(i));
        for j in 0..n {
            if subset.contains(&j) {
                continue;
            }
            let vj = v.column(j);
            let p = vj.dot(&pv.column(j));
            let q = vj.dot(&x1.column(j));
            let c = vj.dot(&x1.column(i));
            let e = vj.dot(&x2.column(i));
            let lhs = a * p;
            let rhs = b * (1.0 + q) - 2.0 * e * c;
            let d = p + c * c / b;
            let slack = theta * tr * b * d + OPTIMALITY_SLACK * (1.0 + lhs.abs() + rhs.abs());
            let excess = lhs - rhs;
            if excess > slack {
                return Err(MespError::NotLocallyOptimal { i, j, excess });
            }
        }
    }
    Ok(())
}

/// Lower bound certified by a size-`s` set with independent columns:
/// best multiple of `(X†)² + λ_s⁻²(I − X†X)`.
pub fn a_certificate_from_local(inst: &CovarianceInstance, subset: &[usize]) -> Result<DualCertificate> {
    let s = subset.len();
    let st = pinv(&inst.subset_gram(subset), PINV_TOLERANCE);
    if st.rank < s {
        return Err(MespError::DependentColumns);
    }
    let lam = eigenvalues(&st.x);
    let ls = lam[s - 1];
    let lambda0 = &st.xdag * &st.xdag + &st.projector * (1.0 / (ls * ls));
    ald_certificate_scaled(inst, s, &lambda0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{factorize, SymMatrix};

    #[test]
    fn ratio_examples() {
        assert_eq!(amesp_ratios(10, 6, 1.0, 1.0).volume, 5.0);
        assert_eq!(amesp_ratios(7, 1, 1.0, 1.0).volume, 1.0);
        let r = amesp_ratios(9, 4, 2.0, 2.0);
        assert!((r.local_compact - 3.0).abs() < 1e-12);
        assert!((r.local - 4.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_local_search() {
        let inst = factorize(&SymMatrix::from_diagonal(&[1.0, 4.0, 2.0, 3.0, 0.5]), 1e-12).unwrap();
        let (st, cert, _) = a_local_search(&inst, 2, Some(&[0, 4]), &ALocalOptions::default()).unwrap();
        assert_eq!(st.subset, vec![1, 3]);
        let expect = 0.25 + 1.0 / 3.0;
        assert!((st.trace_inverse - expect).abs() < 1e-12);
        assert!(cert.bound_value <= expect + 1e-12);
        check_a_local_optimality(&inst, &st.subset, 1e-9).unwrap();
    }
}

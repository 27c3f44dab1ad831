//! Objective values of a chosen index set and the solution record returned
//! by every discrete algorithm.

use serde::Serialize;

use crate::linalg::{eigenvalues, CovarianceInstance};

/// Eigenvalues of `C_{S,S}` at or below this multiple of `λ_max(C)` make the
/// block singular.
pub const SINGULAR_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Greedy,
    LocalSearch,
    Sampling,
    Derandomized,
    VolumeSampling,
    ALocalSearch,
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsetSolution {
    /// Sorted ascending, zero-based.
    pub subset: Vec<usize>,
    /// `log det C_{S,S}` (`−∞` when singular).
    pub log_det: f64,
    /// `tr(C_{S,S}⁻¹)` (`+∞` when singular).
    pub trace_inverse: f64,
    pub provenance: Provenance,
}

impl SubsetSolution {
    pub fn evaluate(inst: &CovarianceInstance, subset: &[usize], provenance: Provenance) -> Self {
        let mut subset = subset.to_vec();
        subset.sort_unstable();
        let (log_det, trace_inverse) = subset_objectives(inst, &subset);
        Self {
            subset,
            log_det,
            trace_inverse,
            provenance,
        }
    }
}

fn block_eigenvalues(inst: &CovarianceInstance, subset: &[usize]) -> Option<Vec<f64>> {
    if subset.is_empty() {
        return Some(Vec::new());
    }
    let ev = eigenvalues(&inst.principal(subset));
    let cutoff = SINGULAR_TOLERANCE * inst.lambda_max();
    if *ev.last().unwrap() <= cutoff {
        None
    } else {
        Some(ev)
    }
}

/// `log det C_{S,S}`, `−∞` if singular.
pub fn subset_log_det(inst: &CovarianceInstance, subset: &[usize]) -> f64 {
    match block_eigenvalues(inst, subset) {
        Some(ev) => ev.iter().map(|l| l.ln()).sum(),
        None => f64::NEG_INFINITY,
    }
}

/// `tr(C_{S,S}⁻¹)`, `+∞` if singular.
pub fn subset_trace_inverse(inst: &CovarianceInstance, subset: &[usize]) -> f64 {
    match block_eigenvalues(inst, subset) {
        Some(ev) => ev.iter().map(|l| 1.0 / l).sum(),
        None => f64::INFINITY,
    }
}

pub fn subset_objectives(inst: &CovarianceInstance, subset: &[usize]) -> (f64, f64) {
    match block_eigenvalues(inst, subset) {
        Some(ev) => (ev.iter().map(|l| l.ln()).sum(), ev.iter().map(|l| 1.0 / l).sum()),
        None => (f64::NEG_INFINITY, f64::INFINITY),
    }
}

//! Continuous relaxations solved by Frank-Wolfe with per-iteration dual
//! certificates.
//!
//! For the log-determinant relaxation the iterate's supgradient
//! `Λ = Q diag(β) Qᵀ` is itself dual feasible after choosing `(ν, μ)` from
//! the sorted scores `v_iᵀΛv_i`, and the bound exceeds the primal value by
//! exactly the Frank-Wolfe gap `Σ_{top s} v_iᵀΛv_i − s`. The trace-of-inverse
//! relaxation reuses the same loop with the squared coefficients.

use serde::Serialize;

use crate::error::{MespError, Result};
use crate::linalg::{eig_matrix, eigenvalues, CovarianceInstance, Matrix};
use crate::oracle;
use crate::spectral::{gamma_supgradient_from, phi_subgradient_from};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertificateKind {
    /// Upper bound on the log-determinant problem.
    Ld,
    /// Lower bound on the trace-of-inverse problem.
    ALd,
}

/// Dual multipliers `(Λ, ν, μ)` and the bound they certify.
#[derive(Debug, Clone, Serialize)]
pub struct DualCertificate {
    #[serde(skip)]
    pub lambda: Matrix,
    pub nu: f64,
    pub mu: Vec<f64>,
    pub bound_value: f64,
    pub kind: CertificateKind,
}

impl DualCertificate {
    /// Largest violation of `ν + μ_i ≥ v_iᵀΛv_i` (`≤ 0` when feasible),
    /// together with the sign constraints on `ν`, `μ` and `Λ`.
    pub fn max_violation(&self, inst: &CovarianceInstance) -> f64 {
        let g = scores(inst, &self.lambda);
        let mut worst = (-self.nu).max(0.0);
        for (gi, mi) in g.iter().zip(&self.mu) {
            worst = worst.max(gi - self.nu - mi).max(-mi);
        }
        let lmin = eigenvalues(&self.lambda).last().copied().unwrap_or(0.0);
        let scale = 1.0 + self.lambda.amax();
        worst.max(-lmin / scale)
    }
}

/// `v_iᵀΛv_i` for every column.
pub fn scores(inst: &CovarianceInstance, lambda: &Matrix) -> Vec<f64> {
    let v = inst.factor();
    let lv = lambda * v;
    (0..inst.n()).map(|i| v.column(i).dot(&lv.column(i))).collect()
}

/// Indices of the `s` largest scores (ties to the smaller index), in
/// decreasing score order.
pub fn top_indices(g: &[f64], s: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..g.len()).collect();
    idx.sort_by(|&a, &b| g[b].total_cmp(&g[a]).then(a.cmp(&b)));
    idx.truncate(s);
    idx
}

/// Cheapest feasible `(ν, μ)` for fixed scores: `ν` is the `s`-th largest
/// score and `μ_i = g_i − ν` on the top `s`. Returns `(ν, μ, sν + Σμ)`.
pub fn nu_mu(g: &[f64], s: usize) -> (f64, Vec<f64>, f64) {
    let top = top_indices(g, s);
    let nu = g[top[s - 1]].max(0.0);
    let mut mu = vec![0.0; g.len()];
    let mut total = s as f64 * nu;
    for &i in &top {
        mu[i] = (g[i] - nu).max(0.0);
        total += mu[i];
    }
    (nu, mu, total)
}

fn check_dims(inst: &CovarianceInstance, lambda: &Matrix, s: usize) -> Result<()> {
    if lambda.nrows() != inst.d() || lambda.ncols() != inst.d() {
        return Err(MespError::DimensionMismatch {
            expected: inst.d(),
            got: lambda.nrows(),
        });
    }
    if s < 1 || s > inst.d() {
        return Err(MespError::BadCardinality { s, max: inst.d() });
    }
    Ok(())
}

/// `−log det_s(Λ)` (sum over the `s` smallest eigenvalues; `+∞` if any is
/// nonpositive).
fn neg_log_det_bottom(lambda: &Matrix, s: usize) -> f64 {
    let ev = eigenvalues(lambda);
    let mut acc = 0.0;
    for &l in &ev[ev.len() - s..] {
        if l <= 0.0 {
            return f64::INFINITY;
        }
        acc -= l.ln();
    }
    acc
}

/// `tr_s(Λ^{1/2})`: sum of square roots of the `s` smallest eigenvalues.
fn trace_sqrt_bottom(lambda: &Matrix, s: usize) -> f64 {
    let ev = eigenvalues(lambda);
    ev[ev.len() - s..].iter().map(|l| l.max(0.0).sqrt()).sum()
}

/// Upper-bound certificate for a given `Λ ⪰ 0`:
/// `−log det_s(Λ) + sν + Σμ − s` with the cheapest `(ν, μ)`.
pub fn ld_certificate(inst: &CovarianceInstance, s: usize, lambda: Matrix) -> Result<DualCertificate> {
    check_dims(inst, &lambda, s)?;
    let g = scores(inst, &lambda);
    let (nu, mu, total) = nu_mu(&g, s);
    let bound_value = neg_log_det_bottom(&lambda, s) + total - s as f64;
    Ok(DualCertificate {
        lambda,
        nu,
        mu,
        bound_value,
        kind: CertificateKind::Ld,
    })
}

/// [`ld_certificate`] for the best multiple `cΛ₀`: with `T = Σ_{top s} v_iᵀΛ₀v_i`
/// the optimal `c = s/T` gives `−log det_s(Λ₀) + s·log(T/s)`.
pub fn ld_certificate_scaled(inst: &CovarianceInstance, s: usize, lambda0: &Matrix) -> Result<DualCertificate> {
    check_dims(inst, lambda0, s)?;
    let g = scores(inst, lambda0);
    let (_, _, total) = nu_mu(&g, s);
    if !(total > 0.0) {
        return Err(MespError::InvalidArgument("dual matrix annihilates every column".into()));
    }
    ld_certificate(inst, s, lambda0 * (s as f64 / total))
}

/// Lower-bound certificate for the trace-of-inverse problem:
/// `2·tr_s(Λ^{1/2}) − sν − Σμ`.
pub fn ald_certificate(inst: &CovarianceInstance, s: usize, lambda: Matrix) -> Result<DualCertificate> {
    check_dims(inst, &lambda, s)?;
    let g = scores(inst, &lambda);
    let (nu, mu, total) = nu_mu(&g, s);
    let bound_value = 2.0 * trace_sqrt_bottom(&lambda, s) - total;
    Ok(DualCertificate {
        lambda,
        nu,
        mu,
        bound_value,
        kind: CertificateKind::ALd,
    })
}

/// [`ald_certificate`] for the best multiple `cΛ₀`: value `a²/T` with
/// `a = tr_s(Λ₀^{1/2})`, attained at `√c = a/T`.
pub fn ald_certificate_scaled(inst: &CovarianceInstance, s: usize, lambda0: &Matrix) -> Result<DualCertificate> {
    check_dims(inst, lambda0, s)?;
    let g = scores(inst, lambda0);
    let (_, _, total) = nu_mu(&g, s);
    if !(total > 0.0) {
        return Err(MespError::InvalidArgument("dual matrix annihilates every column".into()));
    }
    let a = trace_sqrt_bottom(lambda0, s);
    let c = (a / total).powi(2);
    ald_certificate(inst, s, lambda0 * c)
}

/// `bound − primal`; nonnegative up to rounding for a matched pair.
pub fn dual_gap(cert: &DualCertificate, kind: CertificateKind, primal: f64) -> Result<f64> {
    if cert.kind != kind {
        return Err(MespError::KindMismatch);
    }
    Ok(match kind {
        CertificateKind::Ld => cert.bound_value - primal,
        CertificateKind::ALd => primal - cert.bound_value,
    })
}

/// Feasible point of the relaxation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FractionalSolution {
    pub x: Vec<f64>,
    pub s: usize,
    /// Relaxation objective at `x` (`Γ_s` or `Φ_s` of `Σ x_i v_i v_iᵀ`).
    pub value: f64,
    /// `{i : x_i > SUPPORT_TOLERANCE}`.
    pub support: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FwIteration {
    pub t: usize,
    pub step: f64,
    pub primal: f64,
    pub dual: f64,
    /// Frank-Wolfe gap at this iterate.
    pub gap: f64,
    /// Running minimum of `gap`.
    pub best_gap: f64,
    /// Support size of the iterate.
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FwTrace {
    pub iterations: Vec<FwIteration>,
    pub iterations_run: usize,
    pub alpha: f64,
    /// `|best dual − best primal|`.
    pub alpha_achieved: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Default)]
pub struct FwOptions {
    /// Target gap; default `1e-6·max(1, |first primal|)`.
    pub alpha: Option<f64>,
    /// Default `10·⌈4L·min(s, n−s)/α⌉` when `lipschitz` is set, else 5000.
    pub max_iter: Option<usize>,
    /// Starting point; default `x_i = s/n`.
    pub initial: Option<Vec<f64>>,
    /// Smoothness constant `L` if known.
    pub lipschitz: Option<f64>,
    /// Keep every iteration in the trace.
    pub record_trace: bool,
}

const DEFAULT_MAX_ITER: usize = 5000;
const MAX_ITER_CAP: usize = 10_000_000;

#[derive(Clone, Copy, PartialEq)]
enum Sense {
    LogDet,
    ATrace,
}

fn validate_start(inst: &CovarianceInstance, s: usize, x0: &[f64]) -> Result<()> {
    if x0.len() != inst.n() {
        return Err(MespError::DimensionMismatch {
            expected: inst.n(),
            got: x0.len(),
        });
    }
    let sum: f64 = x0.iter().sum();
    if x0.iter().any(|&v| !(-1e-12..=1.0 + 1e-12).contains(&v)) || (sum - s as f64).abs() > 1e-9 {
        return Err(MespError::InvalidArgument(
            "starting point must lie in [0,1]^n with entries summing to s".into(),
        ));
    }
    Ok(())
}

fn support_of(x: &[f64]) -> Vec<usize> {
    (0..x.len())
        .filter(|&i| x[i] > crate::sampling::SUPPORT_TOLERANCE)
        .collect()
}

fn frank_wolfe(
    inst: &CovarianceInstance,
    s: usize,
    opts: &FwOptions,
    sense: Sense,
) -> Result<(FractionalSolution, DualCertificate, FwTrace)> {
    let n = inst.n();
    if s < 1 || s > inst.d() {
        return Err(MespError::BadCardinality { s, max: inst.d() });
    }
    let mut x = match &opts.initial {
        Some(x0) => {
            validate_start(inst, s, x0)?;
            x0.iter().map(|v| v.clamp(0.0, 1.0)).collect()
        }
        None => vec![s as f64 / n as f64; n],
    };
    if let Some(a) = opts.alpha {
        if !(a > 0.0) {
            return Err(MespError::InvalidArgument("alpha must be positive".into()));
        }
    }
    let mut alpha = opts.alpha.unwrap_or(f64::NAN);
    let max_iter = match (opts.max_iter, opts.lipschitz, opts.alpha) {
        (Some(m), _, _) => m,
        (None, Some(l), Some(a)) => {
            let k = (4.0 * l * s.min(n - s) as f64 / a).ceil() * 10.0;
            (k.min(MAX_ITER_CAP as f64) as usize).max(1)
        }
        _ => DEFAULT_MAX_ITER,
    };
    let maximize = sense == Sense::LogDet;
    let mut trace = Vec::new();
    let mut best_primal = if maximize { f64::NEG_INFINITY } else { f64::INFINITY };
    let mut best_x = x.clone();
    let mut best_cert: Option<DualCertificate> = None;
    let mut best_gap = f64::INFINITY;
    let mut converged = false;
    let mut t = 0;
    while t < max_iter.max(1) {
        let sd = eig_matrix(&inst.weighted_gram(&x));
        let grad = match sense {
            Sense::LogDet => gamma_supgradient_from(sd, s),
            Sense::ATrace => phi_subgradient_from(sd, s),
        }
        .map_err(|e| match e {
            MespError::RankDeficient { rank, s } => MespError::RankCollapse { rank, s },
            other => other,
        })?;
        let lambda = match sense {
            Sense::LogDet => grad.matrix,
            Sense::ATrace => -grad.matrix,
        };
        let lam = &grad.spectrum.eigenvalues;
        let primal = match sense {
            Sense::LogDet => crate::spectral::gamma_s_eigen(lam, s)?,
            Sense::ATrace => crate::spectral::phi_s_eigen(lam, s)?,
        };
        if alpha.is_nan() {
            alpha = 1e-6 * primal.abs().max(1.0);
        }
        let g = scores(inst, &lambda);
        let (nu, mu, total) = nu_mu(&g, s);
        let (gap, dual) = match sense {
            Sense::LogDet => (total - s as f64, primal + total - s as f64),
            Sense::ATrace => (total - primal, 2.0 * primal - total),
        };
        let improved_primal = if maximize { primal > best_primal } else { primal < best_primal };
        if improved_primal {
            best_primal = primal;
            best_x.clone_from(&x);
        }
        let improved_dual = match &best_cert {
            None => true,
            Some(c) => {
                if maximize {
                    dual < c.bound_value
                } else {
                    dual > c.bound_value
                }
            }
        };
        if improved_dual {
            best_cert = Some(DualCertificate {
                lambda,
                nu,
                mu,
                bound_value: dual,
                kind: if maximize { CertificateKind::Ld } else { CertificateKind::ALd },
            });
        }
        best_gap = best_gap.min(gap);
        let step = 2.0 / (t as f64 + 3.0);
        if opts.record_trace {
            trace.push(FwIteration {
                t,
                step,
                primal,
                dual,
                gap,
                best_gap,
                support: support_of(&x).len(),
            });
        }
        t += 1;
        if best_gap < alpha {
            converged = true;
            break;
        }
        let top = top_indices(&g, s);
        for xi in x.iter_mut() {
            *xi *= 1.0 - step;
        }
        for &i in &top {
            x[i] += step;
        }
    }
    let cert = best_cert.expect("at least one iteration");
    let alpha_achieved = (cert.bound_value - best_primal).abs();
    let solution = FractionalSolution {
        support: support_of(&best_x),
        x: best_x,
        s,
        value: best_primal,
    };
    Ok((
        solution,
        cert,
        FwTrace {
            iterations: trace,
            iterations_run: t,
            alpha,
            alpha_achieved,
            converged,
        },
    ))
}

/// Maximize `Γ_s(Σ x_i v_i v_iᵀ)` over `{x ∈ [0,1]ⁿ : Σx = s}`.
///
/// Returns the best primal iterate, the best (smallest) dual bound seen, and
/// the trace. Hitting the iteration limit is not an error: the trace's
/// `converged` flag is false and the results are the best found.
pub fn solve_pc(
    inst: &CovarianceInstance,
    s: usize,
    opts: &FwOptions,
) -> Result<(FractionalSolution, DualCertificate, FwTrace)> {
    frank_wolfe(inst, s, opts, Sense::LogDet)
}

/// Minimize `Φ_s(Σ x_i v_i v_iᵀ)` over the same polytope; the certificate is
/// the best (largest) lower bound seen.
pub fn solve_apc(
    inst: &CovarianceInstance,
    s: usize,
    opts: &FwOptions,
) -> Result<(FractionalSolution, DualCertificate, FwTrace)> {
    frank_wolfe(inst, s, opts, Sense::ATrace)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Smoothness {
    /// Smallest eigenvalue over all size-`s` principal submatrices.
    pub delta: f64,
    /// `λ_max(C)² / δ²`.
    pub lipschitz: f64,
}

/// `(δ, L)` by enumerating every size-`s` subset (at most `cap` of them).
pub fn smoothness_constant(inst: &CovarianceInstance, s: usize, cap: usize) -> Result<Smoothness> {
    let delta = oracle::exact_delta(inst, s, cap)?;
    let lmax = inst.lambda_max();
    Ok(Smoothness {
        delta,
        lipschitz: lmax * lmax / (delta * delta),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{factorize, SymMatrix};

    #[test]
    fn diagonal_relaxation_is_exact() {
        let inst = factorize(&SymMatrix::from_diagonal(&[5.0, 4.0, 3.0, 2.0, 1.0]), 1e-12).unwrap();
        let (sol, cert, trace) = solve_pc(&inst, 2, &FwOptions::default()).unwrap();
        assert!((cert.bound_value - 20f64.ln()).abs() < 1e-6, "{}", cert.bound_value);
        assert!(trace.converged);
        assert!(cert.max_violation(&inst) < 1e-9);
        assert!(sol.value <= cert.bound_value + 1e-12);
    }

    #[test]
    fn full_cardinality_is_log_det() {
        let c = SymMatrix::new(Matrix::from_row_slice(3, 3, &[2.0, 0.5, 0.1, 0.5, 1.0, 0.2, 0.1, 0.2, 1.5]));
        let inst = factorize(&c, 1e-12).unwrap();
        let (sol, cert, _) = solve_pc(&inst, 3, &FwOptions::default()).unwrap();
        let ld = crate::linalg::log_det_psd(c.as_matrix());
        assert!((cert.bound_value - ld).abs() < 1e-9);
        assert!(sol.x.iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn uniform_start_on_repeated_basis_has_zero_gap() {
        let inst = factorize(&crate::instances::repeated_basis_instance(3, 2), 1e-12).unwrap();
        let (sol, cert, trace) = solve_pc(&inst, 3, &FwOptions::default()).unwrap();
        assert!(sol.value.abs() < 1e-12);
        assert!(cert.bound_value.abs() < 1e-12);
        assert_eq!(trace.iterations_run, 1);
        let g = dual_gap(&cert, CertificateKind::Ld, sol.value).unwrap();
        assert!(g.abs() < 1e-9);
        assert_eq!(dual_gap(&cert, CertificateKind::ALd, 0.0), Err(MespError::KindMismatch));
    }

    #[test]
    fn a_relaxation_on_diagonal() {
        let inst = factorize(&SymMatrix::from_diagonal(&[4.0, 2.0, 1.0]), 1e-12).unwrap();
        let opts = FwOptions {
            alpha: Some(1e-7),
            max_iter: Some(200_000),
            ..Default::default()
        };
        let (sol, cert, _) = solve_apc(&inst, 2, &opts).unwrap();
        assert!((sol.value - 0.75).abs() < 1e-5, "{}", sol.value);
        assert!(cert.bound_value <= 0.75 + 1e-9);
        assert!(cert.bound_value > 0.75 - 1e-5);
    }

    #[test]
    fn smoothness_of_small_cases() {
        let inst = factorize(&SymMatrix::identity(5), 1e-12).unwrap();
        let sm = smoothness_constant(&inst, 3, 1000).unwrap();
        assert!((sm.delta - 1.0).abs() < 1e-12 && (sm.lipschitz - 1.0).abs() < 1e-12);
        let inst = factorize(&SymMatrix::from_diagonal(&[4.0, 1.0]), 1e-12).unwrap();
        let sm = smoothness_constant(&inst, 1, 1000).unwrap();
        assert!((sm.delta - 1.0).abs() < 1e-12 && (sm.lipschitz - 16.0).abs() < 1e-12);
    }
}

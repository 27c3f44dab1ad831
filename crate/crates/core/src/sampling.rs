//! Randomized rounding of a fractional point and its derandomization.
//!
//! Two subset laws are supported, both drawn by a sequential scan over the
//! indices that accepts `j` with its exact conditional probability:
//!
//! * product law `P[S] ∝ ∏_{i∈S} x̂_i`, driven by a suffix ESP table;
//! * volume law `P[S] ∝ ∏_{i∈S} x̂_i · det C_{S,S}`, whose restricted
//!   partition functions are ESPs of projected weighted Gram matrices.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{MespError, Result};
use crate::esp::{log_esp, SuffixEspTable};
use crate::linalg::{eig_matrix, CovarianceInstance, Matrix};
use crate::par;
use crate::subset::{subset_log_det, subset_trace_inverse, SINGULAR_TOLERANCE};

/// Default threshold for "strictly positive" entries of a fractional point.
pub const SUPPORT_TOLERANCE: f64 = 1e-8;

/// A subset law that can be drawn by scanning `j = 0..n` once.
pub trait SequentialLaw {
    fn len(&self) -> usize;
    fn size(&self) -> usize;
    /// Probability of accepting `j` given that exactly `chosen` (all `< j`)
    /// were accepted so far.
    fn accept_probability(&self, chosen: &[usize], j: usize) -> f64;
}

/// One draw from a sequential law.
pub fn draw<L: SequentialLaw + ?Sized, R: Rng + ?Sized>(law: &L, rng: &mut R) -> Vec<usize> {
    let s = law.size();
    let mut chosen = Vec::with_capacity(s);
    for j in 0..law.len() {
        if chosen.len() == s {
            break;
        }
        let p = law.accept_probability(&chosen, j);
        if p >= 1.0 || rng.gen::<f64>() < p {
            chosen.push(j);
        }
    }
    chosen
}

fn ratio(log_take: f64, log_skip: f64) -> f64 {
    if log_take == f64::NEG_INFINITY {
        return 0.0;
    }
    if log_skip == f64::NEG_INFINITY {
        return 1.0;
    }
    1.0 / (1.0 + (log_skip - log_take).exp())
}

fn clean_weights(xhat: &[f64], restrict_support: Option<f64>) -> Vec<f64> {
    let floor = restrict_support.unwrap_or(0.0);
    xhat.iter()
        .map(|&v| if v > floor { v.min(1.0) } else { 0.0 })
        .collect()
}

fn check_support(w: &[f64], s: usize) -> Result<()> {
    let positive = w.iter().filter(|&&v| v > 0.0).count();
    if positive < s {
        return Err(MespError::InsufficientSupport { positive, s });
    }
    Ok(())
}

/// `P[S] = ∏_{i∈S} x̂_i / E_s(x̂)`.
#[derive(Debug, Clone)]
pub struct ProductLaw {
    x: Vec<f64>,
    s: usize,
    table: SuffixEspTable,
}

impl ProductLaw {
    /// `restrict_support = Some(τ)` zeroes every entry `≤ τ` first.
    pub fn new(xhat: &[f64], s: usize, restrict_support: Option<f64>) -> Result<Self> {
        let x = clean_weights(xhat, restrict_support);
        check_support(&x, s)?;
        let table = SuffixEspTable::new(&x, s);
        Ok(Self { x, s, table })
    }

    pub fn weights(&self) -> &[f64] {
        &self.x
    }

    /// Number of indices with positive weight.
    pub fn support_size(&self) -> usize {
        self.x.iter().filter(|&&v| v > 0.0).count()
    }
}

impl SequentialLaw for ProductLaw {
    fn len(&self) -> usize {
        self.x.len()
    }

    fn size(&self) -> usize {
        self.s
    }

    fn accept_probability(&self, chosen: &[usize], j: usize) -> f64 {
        let r = self.s - chosen.len();
        if r == 0 || self.x[j] <= 0.0 {
            return 0.0;
        }
        let take = self.x[j].ln() + self.table.log_value(j + 1, r - 1);
        let skip = self.table.log_value(j + 1, r);
        ratio(take, skip)
    }
}

/// `ln Σ det C_{S,S} · ∏_{i∈S∖F} w_i` over all `|S| = s` with `F ⊆ S` and
/// `S∖F ⊆ candidates`. Computed as
/// `ln det C_{F,F} + ln E_{s−|F|}(eig(P_F (Σ_{i∈R} w_i v_i v_iᵀ) P_F))`
/// with `P_F` the projector off `span{v_i : i ∈ F}`; `−∞` when the columns
/// of `F` are dependent or no completion has positive weight.
pub fn log_restricted_volume(
    inst: &CovarianceInstance,
    weights: &[f64],
    forced: &[usize],
    candidates: &[usize],
    s: usize,
) -> f64 {
    if forced.len() > s {
        return f64::NEG_INFINITY;
    }
    let m = s - forced.len();
    let d = inst.d();
    let v = inst.factor();
    let mut gram = Matrix::zeros(d, d);
    let mut wmax = 0.0f64;
    for &i in candidates {
        let w = weights[i];
        if w > 0.0 {
            let col = v.column(i);
            gram.ger(w, &col, &col, 1.0);
            wmax = wmax.max(w);
        }
    }
    let mut log_det_forced = 0.0;
    if !forced.is_empty() {
        let sd = eig_matrix(&inst.principal(forced));
        let cutoff = SINGULAR_TOLERANCE * inst.lambda_max();
        if *sd.eigenvalues.last().unwrap() <= cutoff {
            return f64::NEG_INFINITY;
        }
        log_det_forced = sd.eigenvalues.iter().map(|l| l.ln()).sum();
        // P_F = I − V_F C_FF⁻¹ V_Fᵀ.
        let inv: Vec<f64> = sd.eigenvalues.iter().map(|l| 1.0 / l).collect();
        let cinv = sd.with_values(&inv);
        let vf = Matrix::from_fn(d, forced.len(), |r, c| v[(r, forced[c])]);
        let proj = Matrix::identity(d, d) - &vf * cinv * vf.transpose();
        gram = &proj * gram * &proj;
    }
    if m == 0 {
        return log_det_forced;
    }
    let cutoff = SINGULAR_TOLERANCE * inst.lambda_max() * wmax;
    let lam: Vec<f64> = crate::linalg::eigenvalues(&gram)
        .into_iter()
        .map(|l| if l > cutoff { l } else { 0.0 })
        .collect();
    log_det_forced + log_esp(&lam, m)
}

/// `P[S] = ∏_{i∈S} x̂_i · det C_{S,S} / Σ_T ∏_{i∈T} x̂_i · det C_{T,T}`.
#[derive(Debug, Clone)]
pub struct VolumeLaw<'a> {
    inst: &'a CovarianceInstance,
    x: Vec<f64>,
    s: usize,
}

impl<'a> VolumeLaw<'a> {
    pub fn new(
        inst: &'a CovarianceInstance,
        xhat: &[f64],
        s: usize,
        restrict_support: Option<f64>,
    ) -> Result<Self> {
        if xhat.len() != inst.n() {
            return Err(MespError::DimensionMismatch {
                expected: inst.n(),
                got: xhat.len(),
            });
        }
        let x = clean_weights(xhat, restrict_support);
        check_support(&x, s)?;
        let law = Self { inst, x, s };
        let all: Vec<usize> = (0..inst.n()).collect();
        if law.log_partition(&[], &all) == f64::NEG_INFINITY {
            return Err(MespError::RankDeficient {
                rank: inst.d(),
                s,
            });
        }
        Ok(law)
    }

    pub fn weights(&self) -> &[f64] {
        &self.x
    }

    /// Partition function restricted to supersets of `forced` drawn from
    /// `candidates`, without the `∏_F x̂` factor.
    pub fn log_partition(&self, forced: &[usize], candidates: &[usize]) -> f64 {
        log_restricted_volume(self.inst, &self.x, forced, candidates, self.s)
    }
}

impl SequentialLaw for VolumeLaw<'_> {
    fn len(&self) -> usize {
        self.x.len()
    }

    fn size(&self) -> usize {
        self.s
    }

    fn accept_probability(&self, chosen: &[usize], j: usize) -> f64 {
        if chosen.len() >= self.s || self.x[j] <= 0.0 {
            return 0.0;
        }
        let rest: Vec<usize> = (j + 1..self.x.len()).collect();
        let mut with_j = chosen.to_vec();
        with_j.push(j);
        let take = self.x[j].ln() + self.log_partition(&with_j, &rest);
        let skip = self.log_partition(chosen, &rest);
        ratio(take, skip)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SamplingOptions {
    pub trials: usize,
    pub seed: u64,
    /// Zero out entries `≤ SUPPORT_TOLERANCE` before sampling.
    pub restrict_support: bool,
    /// Worker cap; `None` uses every core.
    pub threads: Option<usize>,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        Self {
            trials: 1000,
            seed: 0,
            restrict_support: true,
            threads: None,
        }
    }
}

/// Generator for trial `t`: stream `t` of the ChaCha8 generator seeded by
/// `seed`, so the outcome does not depend on scheduling.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampledSubset {
    pub subset: Vec<usize>,
    /// `log det C_{S,S}` for product sampling, `tr(C_{S,S}⁻¹)` for volume
    /// sampling.
    pub objective: f64,
    pub seed: u64,
    pub trial: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplingReport {
    pub best: SampledSubset,
    pub trials: usize,
    /// Trials whose draw had a finite objective.
    pub finite_trials: usize,
    /// Number of indices the sampler could pick from.
    pub support_size: usize,
    /// Every trial, in trial order.
    pub records: Vec<SampledSubset>,
}

fn run_trials<L, F>(law: &L, opts: &SamplingOptions, objective: F, maximize: bool) -> Result<SamplingReport>
where
    L: SequentialLaw + Sync,
    F: Fn(&[usize]) -> f64 + Sync + Send,
{
    if opts.trials == 0 {
        return Err(MespError::InvalidArgument("trials must be positive".into()));
    }
    let results = par::map(opts.trials, opts.threads, |t| {
        let mut rng = trial_rng(opts.seed, t as u64);
        let mut subset = draw(law, &mut rng);
        subset.sort_unstable();
        let value = if subset.len() == law.size() {
            objective(&subset)
        } else if maximize {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        };
        (subset, value)
    });
    let finite_trials = results.iter().filter(|(_, v)| v.is_finite()).count();
    let mut best = 0;
    for (t, (_, v)) in results.iter().enumerate() {
        let cur = results[best].1;
        let better = if maximize { *v > cur } else { *v < cur };
        if better {
            best = t;
        }
    }
    let records: Vec<SampledSubset> = results
        .into_iter()
        .enumerate()
        .map(|(t, (subset, objective))| SampledSubset {
            subset,
            objective,
            seed: opts.seed,
            trial: t as u64,
        })
        .collect();
    Ok(SamplingReport {
        best: records[best].clone(),
        trials: opts.trials,
        finite_trials,
        support_size: 0,
        records,
    })
}

/// Best of `opts.trials` independent product-law draws, scored by
/// `log det C_{S,S}`.
pub fn sample_best(
    inst: &CovarianceInstance,
    xhat: &[f64],
    s: usize,
    opts: &SamplingOptions,
) -> Result<SamplingReport> {
    if xhat.len() != inst.n() {
        return Err(MespError::DimensionMismatch {
            expected: inst.n(),
            got: xhat.len(),
        });
    }
    let law = ProductLaw::new(xhat, s, opts.restrict_support.then_some(SUPPORT_TOLERANCE))?;
    let mut report = run_trials(&law, opts, |sub| subset_log_det(inst, sub), true)?;
    report.support_size = law.support_size();
    Ok(report)
}

/// Best of `opts.trials` volume-law draws, scored by `tr(C_{S,S}⁻¹)`.
pub fn volume_sample_best(
    inst: &CovarianceInstance,
    xhat: &[f64],
    s: usize,
    opts: &SamplingOptions,
) -> Result<SamplingReport> {
    let law = VolumeLaw::new(inst, xhat, s, opts.restrict_support.then_some(SUPPORT_TOLERANCE))?;
    let mut report = run_trials(&law, opts, |sub| subset_trace_inverse(inst, sub), false)?;
    report.support_size = law.weights().iter().filter(|&&v| v > 0.0).count();
    Ok(report)
}

/// `ln H(T)`: log of `E[det C_{S,S} | T ⊆ S]` under the product law of
/// `xhat`. Equals `ln det C_{T,T}` when `|T| = s`.
pub fn log_conditional_h(inst: &CovarianceInstance, xhat: &[f64], s: usize, t: &[usize]) -> Result<f64> {
    if t.len() > s {
        return Err(MespError::BadCardinality { s: t.len(), max: s });
    }
    let n = inst.n();
    let w = clean_weights(xhat, None);
    let mut in_t = vec![false; n];
    for &i in t {
        in_t[i] = true;
    }
    let rest: Vec<usize> = (0..n).filter(|&i| !in_t[i]).collect();
    let num = log_restricted_volume(inst, &w, t, &rest, s);
    if num == f64::NEG_INFINITY && !t.is_empty() && subset_log_det(inst, t) == f64::NEG_INFINITY {
        return Err(MespError::DependentColumns);
    }
    let rest_w: Vec<f64> = rest.iter().map(|&i| w[i]).collect();
    let den = log_esp(&rest_w, s - t.len());
    Ok(num - den)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerandomizedSubset {
    pub subset: Vec<usize>,
    pub log_det: f64,
    /// `ln H` after each addition, starting with `ln H(∅)`.
    pub chain: Vec<f64>,
}

/// Method of conditional expectations: grow `S` by
/// `argmax_{j∉S} H(S ∪ {j})` for `s` rounds.
pub fn derandomize(
    inst: &CovarianceInstance,
    xhat: &[f64],
    s: usize,
    threads: Option<usize>,
) -> Result<DerandomizedSubset> {
    let n = inst.n();
    if xhat.len() != n {
        return Err(MespError::DimensionMismatch {
            expected: n,
            got: xhat.len(),
        });
    }
    if s < 1 || s > inst.d() {
        return Err(MespError::BadCardinality { s, max: inst.d() });
    }
    let mut chosen: Vec<usize> = Vec::with_capacity(s);
    let mut chain = vec![log_conditional_h(inst, xhat, s, &[])?];
    for _ in 0..s {
        let mut in_s = vec![false; n];
        for &i in &chosen {
            in_s[i] = true;
        }
        let scores = par::map(n, threads, |j| {
            if in_s[j] {
                return f64::NEG_INFINITY;
            }
            let mut t = chosen.clone();
            t.push(j);
            log_conditional_h(inst, xhat, s, &t).unwrap_or(f64::NEG_INFINITY)
        });
        let mut best: Option<usize> = None;
        for j in 0..n {
            if scores[j] > f64::NEG_INFINITY && best.map_or(true, |b| scores[j] > scores[b]) {
                best = Some(j);
            }
        }
        let Some(j) = best else {
            return Err(MespError::RankStarved {
                selected: chosen.len(),
                s,
            });
        };
        chosen.push(j);
        chain.push(scores[j]);
    }
    chosen.sort_unstable();
    let log_det = subset_log_det(inst, &chosen);
    Ok(DerandomizedSubset {
        subset: chosen,
        log_det,
        chain,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{factorize, SymMatrix};
    use rand::SeedableRng;

    fn tree(law: &dyn SequentialLaw) -> Vec<(Vec<usize>, f64)> {
        fn walk(law: &dyn SequentialLaw, j: usize, chosen: &mut Vec<usize>, p: f64, out: &mut Vec<(Vec<usize>, f64)>) {
            if chosen.len() == law.size() {
                out.push((chosen.clone(), p));
                return;
            }
            if j == law.len() || p == 0.0 {
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
        out.retain(|(_, p)| *p > 0.0);
        out
    }

    #[test]
    fn product_law_small_example() {
        let law = ProductLaw::new(&[1.0, 0.5, 0.5], 2, None).unwrap();
        let leaves = tree(&law);
        let expect = [(vec![0, 1], 0.4), (vec![0, 2], 0.4), (vec![1, 2], 0.2)];
        assert_eq!(leaves.len(), 3);
        for (set, p) in expect {
            let got = leaves.iter().find(|(s, _)| *s == set).unwrap().1;
            assert!((got - p).abs() < 1e-12);
        }
    }

    #[test]
    fn binary_point_is_deterministic() {
        let law = ProductLaw::new(&[0.0, 1.0, 0.0, 1.0, 1.0], 3, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            assert_eq!(draw(&law, &mut rng), vec![1, 3, 4]);
        }
        assert!(matches!(
            ProductLaw::new(&[0.0, 1.0, 0.0, 1.0], 3, None),
            Err(MespError::InsufficientSupport { positive: 2, s: 3 })
        ));
    }

    #[test]
    fn volume_law_three_columns() {
        // Columns e1, e2, e1+e2: all three Gram determinants equal 1.
        let v = Matrix::from_row_slice(2, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 1.0]);
        let inst = factorize(&SymMatrix::new(v.transpose() * v), 1e-12).unwrap();
        let law = VolumeLaw::new(&inst, &[2.0 / 3.0; 3], 2, None).unwrap();
        let leaves = tree(&law);
        assert_eq!(leaves.len(), 3);
        for (_, p) in leaves {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn conditional_h_at_full_set_is_determinant() {
        let c = SymMatrix::from_diagonal(&[5.0, 4.0, 3.0, 2.0]);
        let inst = factorize(&c, 1e-12).unwrap();
        let x = [0.5; 4];
        let h = log_conditional_h(&inst, &x, 2, &[0, 2]).unwrap();
        assert!((h - 15f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn trial_streams_are_reproducible() {
        let a: f64 = trial_rng(9, 4).gen();
        let b: f64 = trial_rng(9, 4).gen();
        let c: f64 = trial_rng(9, 5).gen();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}

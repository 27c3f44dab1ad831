//! Symmetric linear algebra used by every solver in the crate.
//!
//! All matrices are dense `nalgebra` matrices. [`SymMatrix`] is a thin
//! newtype that guarantees exact symmetry, [`CovarianceInstance`] carries the
//! factor `V` with `C = VᵀV`, and [`PseudoInverseState`] tracks `X`, `X†` and
//! the null-space projector `I − X†X` under rank-one updates and downdates.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{MespError, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative threshold below which eigenvalues of a pseudoinverse input are
/// treated as zero.
pub const PINV_TOLERANCE: f64 = 1e-10;

/// Dense symmetric matrix. Entries are symmetrized on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(Matrix);

impl SymMatrix {
    /// Symmetrizes `m` as `(m + mᵀ)/2`. Panics if `m` is not square.
    pub fn new(m: Matrix) -> Self {
        assert!(m.is_square(), "symmetric matrix must be square");
        let t = m.transpose();
        Self((m + t) * 0.5)
    }

    /// Like [`SymMatrix::new`] but rejects inputs whose relative asymmetry
    /// `max|a_ij − a_ji| / max|a_ij|` exceeds `tol`.
    pub fn try_new(m: Matrix, tol: f64) -> Result<Self> {
        if !m.is_square() {
            return Err(MespError::DimensionMismatch {
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        let asym = relative_asymmetry(&m);
        if asym > tol {
            return Err(MespError::NotSymmetric { asymmetry: asym });
        }
        Ok(Self::new(m))
    }

    pub fn zeros(n: usize) -> Self {
        Self(Matrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self(Matrix::identity(n, n))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self(Matrix::from_diagonal(&Vector::from_column_slice(diag)))
    }

    pub fn order(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_inner(self) -> Matrix {
        self.0
    }

    /// Principal submatrix on the given (sorted or unsorted) index set.
    pub fn principal(&self, idx: &[usize]) -> Matrix {
        Matrix::from_fn(idx.len(), idx.len(), |a, b| self.0[(idx[a], idx[b])])
    }
}

fn relative_asymmetry(m: &Matrix) -> f64 {
    let scale = m.amax();
    if scale == 0.0 {
        return 0.0;
    }
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst / scale
}

/// Eigenvalues sorted in descending order with matching orthonormal
/// eigenvectors as the columns of `vectors`.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub vectors: Matrix,
}

impl SpectralDecomposition {
    pub fn reconstruct(&self) -> Matrix {
        self.with_values(&self.eigenvalues)
    }

    /// `Q diag(values) Qᵀ` for the stored eigenvectors.
    pub fn with_values(&self, values: &[f64]) -> Matrix {
        let mut scaled = self.vectors.clone();
        for (j, &w) in values.iter().enumerate() {
            scaled.column_mut(j).scale_mut(w);
        }
        &scaled * self.vectors.transpose()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }
}

/// Symmetric eigendecomposition with descending eigenvalues. Ties keep the
/// order produced by the underlying solver (stable sort).
pub fn eig(m: &SymMatrix) -> SpectralDecomposition {
    eig_matrix(m.as_matrix())
}

/// [`eig`] on a raw matrix that the caller knows to be symmetric.
pub fn eig_matrix(m: &Matrix) -> SpectralDecomposition {
    let n = m.nrows();
    if n == 0 {
        return SpectralDecomposition {
            eigenvalues: Vec::new(),
            vectors: Matrix::zeros(0, 0),
        };
    }
    let se = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[b].total_cmp(&se.eigenvalues[a]));
    let eigenvalues = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| se.eigenvectors[(r, order[c])]);
    SpectralDecomposition {
        eigenvalues,
        vectors,
    }
}

/// Eigenvalues only, descending.
pub fn eigenvalues(m: &Matrix) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

/// Default relative rank tolerance `n·ε`.
pub fn default_rank_tolerance(n: usize) -> f64 {
    (n.max(1) as f64) * f64::EPSILON
}

/// A PSD covariance matrix together with a factor `V` (d×n) such that
/// `C = VᵀV`, where `d` is the numerical rank of `C`.
#[derive(Debug, Clone)]
pub struct CovarianceInstance {
    c: SymMatrix,
    v: Matrix,
    rank_tolerance: f64,
    eigenvalues: Vec<f64>,
}

impl CovarianceInstance {
    pub fn n(&self) -> usize {
        self.c.order()
    }

    pub fn d(&self) -> usize {
        self.v.nrows()
    }

    pub fn covariance(&self) -> &SymMatrix {
        &self.c
    }

    /// The d×n factor; column `i` is `v_i`.
    pub fn factor(&self) -> &Matrix {
        &self.v
    }

    pub fn column(&self, i: usize) -> Vector {
        self.v.column(i).into_owned()
    }

    pub fn rank_tolerance(&self) -> f64 {
        self.rank_tolerance
    }

    /// Eigenvalues of `C`, descending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// `Σ_i w_i v_i v_iᵀ` (d×d).
    pub fn weighted_gram(&self, weights: &[f64]) -> Matrix {
        debug_assert_eq!(weights.len(), self.n());
        let mut scaled = self.v.clone();
        for (j, &w) in weights.iter().enumerate() {
            scaled.column_mut(j).scale_mut(w);
        }
        &scaled * self.v.transpose()
    }

    /// `Σ_{i∈S} v_i v_iᵀ` (d×d).
    pub fn subset_gram(&self, subset: &[usize]) -> Matrix {
        let d = self.d();
        let mut x = Matrix::zeros(d, d);
        for &i in subset {
            let col = self.v.column(i);
            x.ger(1.0, &col, &col, 1.0);
        }
        x
    }

    /// `C_{S,S}`.
    pub fn principal(&self, subset: &[usize]) -> Matrix {
        self.c.principal(subset)
    }
}

/// Factor a PSD matrix as `C = VᵀV` with `V = diag(√λ_1..√λ_d)·Q_dᵀ`.
///
/// `tol` is relative to `λ_max(C)`: eigenvalues at or below `tol·λ_max` are
/// treated as zero, and `λ_min < −tol·λ_max` is rejected.
pub fn factorize(c: &SymMatrix, tol: f64) -> Result<CovarianceInstance> {
    let n = c.order();
    if n == 0 {
        return Err(MespError::ZeroMatrix);
    }
    let sd = eig(c);
    let lmax = sd.eigenvalues[0];
    let lmin = sd.eigenvalues[n - 1];
    let scale = lmax.abs().max(lmin.abs());
    if lmin < -tol * scale {
        return Err(MespError::NotPsd {
            min_eigenvalue: lmin,
            max_eigenvalue: lmax,
        });
    }
    if lmax <= 0.0 {
        return Err(MespError::ZeroMatrix);
    }
    let cutoff = tol * lmax;
    let d = sd.eigenvalues.iter().filter(|&&l| l > cutoff).count();
    if d == 0 {
        return Err(MespError::ZeroMatrix);
    }
    let v = Matrix::from_fn(d, n, |r, col| {
        sd.eigenvalues[r].sqrt() * sd.vectors[(col, r)]
    });
    Ok(CovarianceInstance {
        c: c.clone(),
        v,
        rank_tolerance: tol,
        eigenvalues: sd.eigenvalues,
    })
}

/// `X`, its Moore-Penrose pseudoinverse, the projector `I − X†X` onto the
/// null space of `X`, and the numerical rank.
#[derive(Debug, Clone)]
pub struct PseudoInverseState {
    pub x: Matrix,
    pub xdag: Matrix,
    pub projector: Matrix,
    pub rank: usize,
}

impl PseudoInverseState {
    /// State for the d×d zero matrix.
    pub fn empty(d: usize) -> Self {
        Self {
            x: Matrix::zeros(d, d),
            xdag: Matrix::zeros(d, d),
            projector: Matrix::identity(d, d),
            rank: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.x.nrows()
    }

    /// Recompute `X†` and the projector from `X`, discarding accumulated
    /// rounding from the rank-one formulas.
    pub fn refreshed(&self, tol: f64) -> Self {
        pinv(&self.x, tol)
    }
}

/// Pseudoinverse of a symmetric PSD matrix; eigenvalues at or below
/// `tol·λ_max` are dropped.
pub fn pinv(m: &Matrix, tol: f64) -> PseudoInverseState {
    let d = m.nrows();
    let sd = eig_matrix(m);
    let lmax = sd.max_eigenvalue();
    let cutoff = tol * lmax.max(0.0);
    let mut rank = 0;
    let inv: Vec<f64> = sd
        .eigenvalues
        .iter()
        .map(|&l| {
            if lmax > 0.0 && l > cutoff {
                rank += 1;
                1.0 / l
            } else {
                0.0
            }
        })
        .collect();
    let xdag = sd.with_values(&inv);
    let keep: Vec<f64> = inv.iter().map(|&w| if w > 0.0 { 1.0 } else { 0.0 }).collect();
    let range = sd.with_values(&keep);
    let projector = Matrix::identity(d, d) - range;
    PseudoInverseState {
        x: (m + m.transpose()) * 0.5,
        xdag,
        projector,
        rank,
    }
}

/// State for `X − vvᵀ` when `v` is one of the linearly independent columns
/// generating `X`, via the four-term closed form. Falls back to a fresh
/// pseudoinverse when `v` is not such a column (`vᵀX†v ≠ 1` or `v ∉ col(X)`).
pub fn pinv_downdate(state: &PseudoInverseState, v: &Vector, tol: f64) -> Result<PseudoInverseState> {
    let u = &state.xdag * v;
    let a = u.norm_squared();
    let vnorm = v.norm();
    if vnorm == 0.0 || a.sqrt() * vnorm < tol {
        return Err(MespError::DegenerateColumn { norm: a.sqrt() });
    }
    let mut x = &state.x - v * v.transpose();
    symmetrize(&mut x);
    let outside = (&state.projector * v).norm() / vnorm;
    let lev = v.dot(&u);
    if outside > 1e-7 || (lev - 1.0).abs() > 1e-7 {
        return Ok(pinv(&x, PINV_TOLERANCE));
    }
    let w = &state.xdag * &u;
    let c = u.dot(&w);
    let mut xdag = state.xdag.clone();
    xdag.ger(-1.0 / a, &u, &w, 1.0);
    xdag.ger(-1.0 / a, &w, &u, 1.0);
    xdag.ger(c / (a * a), &u, &u, 1.0);
    symmetrize(&mut xdag);
    let mut projector = state.projector.clone();
    projector.ger(1.0 / a, &u, &u, 1.0);
    symmetrize(&mut projector);
    Ok(PseudoInverseState {
        x,
        xdag,
        projector,
        rank: state.rank.saturating_sub(1),
    })
}

/// State for `X + vvᵀ` when `v ∉ col(X)`, via the rank-increasing closed
/// form. Returns [`MespError::InColumnSpace`] when `‖(I − X†X)v‖ ≤ tol·‖v‖`.
pub fn pinv_update(state: &PseudoInverseState, v: &Vector, tol: f64) -> Result<PseudoInverseState> {
    let w = &state.projector * v;
    let wn = w.norm();
    let vnorm = v.norm();
    if vnorm == 0.0 || wn <= tol * vnorm {
        return Err(MespError::InColumnSpace { norm: wn });
    }
    let b = wn * wn;
    let u = &state.xdag * v;
    let mut x = &state.x + v * v.transpose();
    symmetrize(&mut x);
    let mut xdag = state.xdag.clone();
    xdag.ger(-1.0 / b, &u, &w, 1.0);
    xdag.ger(-1.0 / b, &w, &u, 1.0);
    xdag.ger((1.0 + v.dot(&u)) / (b * b), &w, &w, 1.0);
    symmetrize(&mut xdag);
    let mut projector = state.projector.clone();
    projector.ger(-1.0 / b, &w, &w, 1.0);
    symmetrize(&mut projector);
    Ok(PseudoInverseState {
        x,
        xdag,
        projector,
        rank: state.rank + 1,
    })
}

pub(crate) fn symmetrize(m: &mut Matrix) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// `log det` of a symmetric PSD matrix through its eigenvalues; `−∞` when
/// singular (any eigenvalue ≤ 0).
pub fn log_det_psd(m: &Matrix) -> f64 {
    let ev = eigenvalues(m);
    let mut acc = 0.0;
    for l in ev {
        if l <= 0.0 {
            return f64::NEG_INFINITY;
        }
        acc += l.ln();
    }
    acc
}

/// Relative Frobenius distance `‖a − b‖_F / (1 + ‖b‖_F)`.
pub fn rel_diff(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).norm() / (1.0 + b.norm())
}

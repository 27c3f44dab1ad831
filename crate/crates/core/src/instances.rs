//! Instance generators: random Gram matrices, diagonal matrices, and the two
//! structured families on which the approximation bounds are attained.

use rand::Rng;

use crate::linalg::{Matrix, SymMatrix, Vector};

/// Standard normal draw (Box-Muller).
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.gen();
        if u > f64::MIN_POSITIVE {
            let v: f64 = rng.gen();
            return (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos();
        }
    }
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| standard_normal(rng))
}

/// `AᵀA / rank` for a Gaussian `A` of shape rank×n.
pub fn random_gram<R: Rng + ?Sized>(rng: &mut R, rank: usize, n: usize) -> SymMatrix {
    let a = gaussian_matrix(rng, rank, n);
    SymMatrix::new(a.transpose() * a / rank as f64)
}

/// Full-rank random covariance of order n.
pub fn random_covariance<R: Rng + ?Sized>(rng: &mut R, n: usize) -> SymMatrix {
    random_gram(rng, n, n)
}

pub fn random_symmetric<R: Rng + ?Sized>(rng: &mut R, n: usize) -> SymMatrix {
    SymMatrix::new(gaussian_matrix(rng, n, n))
}

pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vector {
    let v = Vector::from_fn(d, |_, _| standard_normal(rng));
    let norm = v.norm();
    v / norm
}

/// Diagonal covariance with entries drawn uniformly from `[lo, hi)`.
pub fn random_diagonal<R: Rng + ?Sized>(rng: &mut R, n: usize, lo: f64, hi: f64) -> SymMatrix {
    let diag: Vec<f64> = (0..n).map(|_| rng.gen_range(lo..hi)).collect();
    SymMatrix::from_diagonal(&diag)
}

/// Columns `v_i = e_i` for `i < s` and `v_i = e_1 + … + e_s` otherwise.
/// `S = {0..s}` is optimal with value 0, and the local-search certificate
/// built from it is exactly as loose as its worst-case bound.
pub fn swap_tight_instance(n: usize, s: usize) -> SymMatrix {
    assert!(s >= 1 && s < n);
    let v = Matrix::from_fn(s, n, |r, c| if c < s { (r == c) as u8 as f64 } else { 1.0 });
    SymMatrix::new(v.transpose() * v)
}

/// Columns `v_{s·t + i} = e_i` for `t < ell`: every basis vector repeated
/// `ell` times. Uniform weights make the sampling bound exact here.
pub fn repeated_basis_instance(s: usize, ell: usize) -> SymMatrix {
    let n = s * ell;
    let v = Matrix::from_fn(s, n, |r, c| ((c % s) == r) as u8 as f64);
    SymMatrix::new(v.transpose() * v)
}

/// Random point of `{x ∈ [0,1]ⁿ : Σx = s}` obtained by shifting uniform
/// noise and clipping, with the shift found by bisection.
pub fn random_fractional_point<R: Rng + ?Sized>(rng: &mut R, n: usize, s: usize) -> Vec<f64> {
    assert!(s <= n);
    let y: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
    let target = s as f64;
    let total = |shift: f64| -> f64 { y.iter().map(|&v| (v + shift).clamp(0.0, 1.0)).sum() };
    let (mut lo, mut hi) = (-1.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let shift = 0.5 * (lo + hi);
    let mut x: Vec<f64> = y.iter().map(|&v| (v + shift).clamp(0.0, 1.0)).collect();
    // Put the residual from bisection on an interior coordinate.
    let resid = target - x.iter().sum::<f64>();
    if let Some(i) = x.iter().position(|&v| v > resid.abs() && v < 1.0 - resid.abs()) {
        x[i] += resid;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fractional_points_are_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 2..12 {
            for s in 1..=n {
                let x = random_fractional_point(&mut rng, n, s);
                assert!(x.iter().all(|&v| (0.0..=1.0).contains(&v)));
                assert!((x.iter().sum::<f64>() - s as f64).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn structured_instances_have_expected_gram() {
        let c = swap_tight_instance(5, 2);
        assert_eq!(c.get(0, 0), 1.0);
        assert_eq!(c.get(0, 1), 0.0);
        assert_eq!(c.get(3, 4), 2.0);
        assert_eq!(c.get(0, 3), 1.0);

        let c = repeated_basis_instance(2, 3);
        assert_eq!(c.order(), 6);
        assert_eq!(c.get(0, 2), 1.0);
        assert_eq!(c.get(0, 1), 0.0);
    }
}

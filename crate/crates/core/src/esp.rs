//! Elementary symmetric polynomials.
//!
//! Everything goes through the degree-by-degree recurrence
//! `E_ℓ(x₁..x_m) = E_ℓ(x₁..x_{m−1}) + x_m·E_{ℓ−1}(x₁..x_{m−1})`, which is
//! stable for nonnegative inputs. The `log_*` variants run the same
//! recurrence in the log domain so that large `n`, `s` do not overflow.

use crate::linalg::{eigenvalues, Matrix};

/// `E_0..=E_up_to` of `x` (entries must be nonnegative).
pub fn esp_all(x: &[f64], up_to: usize) -> Vec<f64> {
    let mut e = vec![0.0; up_to + 1];
    e[0] = 1.0;
    for (m, &xi) in x.iter().enumerate() {
        let top = (m + 1).min(up_to);
        for l in (1..=top).rev() {
            e[l] += xi * e[l - 1];
        }
    }
    e
}

/// `ln E_0..=ln E_up_to` of `x`; `−∞` where the polynomial vanishes.
pub fn log_esp_all(x: &[f64], up_to: usize) -> Vec<f64> {
    let mut e = vec![f64::NEG_INFINITY; up_to + 1];
    e[0] = 0.0;
    for (m, &xi) in x.iter().enumerate() {
        if xi <= 0.0 {
            continue;
        }
        let lx = xi.ln();
        let top = (m + 1).min(up_to);
        for l in (1..=top).rev() {
            e[l] = log_add_exp(e[l], lx + e[l - 1]);
        }
    }
    e
}

pub fn log_esp(x: &[f64], l: usize) -> f64 {
    log_esp_all(x, l)[l]
}

/// `E_0..=E_up_to` of the eigenvalues of a symmetric PSD matrix. Slightly
/// negative eigenvalues from rounding are clamped to zero.
pub fn eig_esp(m: &Matrix, up_to: usize) -> Vec<f64> {
    esp_all(&clamped_eigenvalues(m), up_to)
}

pub fn log_eig_esp(m: &Matrix, l: usize) -> f64 {
    log_esp(&clamped_eigenvalues(m), l)
}

fn clamped_eigenvalues(m: &Matrix) -> Vec<f64> {
    eigenvalues(m).into_iter().map(|l| l.max(0.0)).collect()
}

pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Table of `ln E_r(x_j, …, x_{n−1})` for every suffix start `j ∈ 0..=n` and
/// degree `r ∈ 0..=s`.
#[derive(Debug, Clone)]
pub struct SuffixEspTable {
    s: usize,
    log: Vec<f64>,
}

impl SuffixEspTable {
    pub fn new(x: &[f64], s: usize) -> Self {
        let n = x.len();
        let w = s + 1;
        let mut log = vec![f64::NEG_INFINITY; (n + 1) * w];
        log[n * w] = 0.0;
        for j in (0..n).rev() {
            let lx = if x[j] > 0.0 { x[j].ln() } else { f64::NEG_INFINITY };
            log[j * w] = 0.0;
            for r in 1..=s {
                let skip = log[(j + 1) * w + r];
                let take = lx + log[(j + 1) * w + r - 1];
                log[j * w + r] = log_add_exp(skip, take);
            }
        }
        Self { s, log }
    }

    /// `ln E_r(x_j, …)`.
    pub fn log_value(&self, j: usize, r: usize) -> f64 {
        self.log[j * (self.s + 1) + r]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Vector;

    #[test]
    fn small_values() {
        assert_eq!(esp_all(&[1.0, 2.0, 3.0], 3), vec![1.0, 6.0, 11.0, 6.0]);
        assert_eq!(esp_all(&[0.0; 4], 4), vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        let ones = esp_all(&[1.0; 7], 7);
        let binom = [1.0, 7.0, 21.0, 35.0, 35.0, 21.0, 7.0, 1.0];
        assert_eq!(ones, binom);
    }

    #[test]
    fn log_domain_agrees() {
        let x = [0.3, 0.9, 0.0, 1.0, 0.45, 0.35];
        let plain = esp_all(&x, 6);
        let logs = log_esp_all(&x, 6);
        for (p, l) in plain.iter().zip(&logs) {
            if *p == 0.0 {
                assert_eq!(*l, f64::NEG_INFINITY);
            } else {
                assert!((p.ln() - l).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn log_domain_survives_large_inputs() {
        let x = vec![1.0; 3000];
        let l = log_esp(&x, 1500);
        let expect: f64 = (1..=1500).map(|i| ((1500 + i) as f64 / i as f64).ln()).sum();
        assert!((l - expect).abs() < 1e-8 * expect);
    }

    #[test]
    fn eigen_esp_of_diagonal() {
        let m = Matrix::from_diagonal(&Vector::from_column_slice(&[1.0, 2.0, 3.0]));
        let e = eig_esp(&m, 3);
        for (a, b) in e.iter().zip([1.0, 6.0, 11.0, 6.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((eig_esp(&Matrix::identity(4, 4), 2)[2] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn suffix_table_matches_direct() {
        let x = [0.5, 0.25, 1.0, 0.0, 0.75];
        let t = SuffixEspTable::new(&x, 3);
        for j in 0..=x.len() {
            let direct = esp_all(&x[j..], 3);
            for r in 0..=3 {
                let l = t.log_value(j, r);
                if direct[r] == 0.0 {
                    assert_eq!(l, f64::NEG_INFINITY);
                } else {
                    assert!((l - direct[r].ln()).abs() < 1e-12);
                }
            }
        }
    }
}

//! Spectral norm bounds for symmetric positive semidefinite matrices.
//!
//! Cocoercivity parameters are derived as `1 / ||S||_2`, so the norm must never
//! be underestimated. The certified value combines the trace-of-powers bound
//! `λ_max <= tr(S^q)^{1/q}` (exact up to a factor `n^{1/q}`) with the
//! Frobenius and row-sum bounds. Power iteration supplies a Rayleigh quotient,
//! a lower bound used only to report how tight the certificate is.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

const SQUARINGS: u32 = 10;
const ROUNDING_MARGIN: f64 = 1e-12;

/// Certified upper bound on the largest eigenvalue of a symmetric PSD matrix.
pub fn psd_spectral_upper_bound(s: &DMatrix<f64>) -> f64 {
    let n = s.nrows();
    if n == 1 {
        return s[(0, 0)].abs();
    }
    let frobenius = s.norm();
    if frobenius == 0.0 {
        return 0.0;
    }
    let row_sum = s
        .row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let is_diagonal = (0..n).all(|i| (0..n).all(|j| i == j || s[(i, j)] == 0.0));
    if is_diagonal {
        return (0..n).map(|i| s[(i, i)].abs()).fold(0.0, f64::max);
    }

    let mut m = s / frobenius;
    let mut log_scale = frobenius.ln();
    for _ in 0..SQUARINGS {
        m = &m * &m;
        let f = m.norm();
        m /= f;
        log_scale = 2.0 * log_scale + f.ln();
    }
    let q = f64::from(2u32.pow(SQUARINGS));
    let trace = m.trace().max(f64::MIN_POSITIVE);
    let trace_bound = ((trace.ln() + log_scale) / q).exp();
    trace_bound.min(frobenius).min(row_sum) * (1.0 + ROUNDING_MARGIN)
}

/// Rayleigh quotient after power iteration: a lower bound on `λ_max`.
pub fn rayleigh_estimate(s: &DMatrix<f64>, iterations: usize) -> f64 {
    let n = s.nrows();
    let mut x = DVector::from_fn(n, |i, _| 1.0 + 0.1 * i as f64);
    x /= x.norm();
    for _ in 0..iterations {
        let y = s * &x;
        let norm = y.norm();
        if norm == 0.0 {
            return 0.0;
        }
        x = y / norm;
    }
    x.dot(&(s * &x))
}

pub(crate) fn symmetric_min_eigenvalue(s: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(s.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_on_scalars_and_diagonals() {
        assert_eq!(psd_spectral_upper_bound(&DMatrix::from_element(1, 1, 1.0)), 1.0);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0]));
        assert_eq!(psd_spectral_upper_bound(&d), 2.0);
    }

    #[test]
    fn upper_bound_is_certified_and_tight() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 0.4, 0.2, 0.9, -0.3, 0.5]);
        let s = m.transpose() * &m;
        let exact = SymmetricEigen::new(s.clone()).eigenvalues.max();
        let upper = psd_spectral_upper_bound(&s);
        let lower = rayleigh_estimate(&s, 200);
        assert!(upper >= exact);
        assert!(upper <= exact * 1.001);
        assert!(lower <= exact * (1.0 + 1e-12));
        assert!((lower - exact).abs() < 1e-9);
    }

    #[test]
    fn repeated_eigenvalue() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]) * 3.0 + DMatrix::from_element(2, 2, 1e-300);
        let upper = psd_spectral_upper_bound(&s);
        assert!((3.0..=3.0 * 1.001).contains(&upper));
    }
}

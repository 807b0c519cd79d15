//! Small dense helpers over nalgebra.

use crate::error::{Error, Result};
use crate::C64;
use nalgebra::DMatrix;

pub type RMat = DMatrix<f64>;
pub type CMat = DMatrix<C64>;

pub fn to_complex(m: &RMat) -> CMat {
    m.map(|v| C64::new(v, 0.0))
}

pub fn max_abs(m: &RMat) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.abs()))
}

pub fn max_abs_c(m: &CMat) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.norm()))
}

/// 2-norm condition number from singular values.
pub fn condition(m: &RMat) -> f64 {
    let s = m.clone().svd(false, false).singular_values;
    let (mx, mn) = s.iter().fold((0.0f64, f64::INFINITY), |(a, b), &v| (a.max(v), b.min(v)));
    if mn == 0.0 {
        f64::INFINITY
    } else {
        mx / mn
    }
}

/// Inverse, rejected above condition number `max_cond`.
pub fn inverse(m: &RMat, max_cond: f64) -> Result<(RMat, f64)> {
    let c = condition(m);
    if !(c <= max_cond) {
        return Err(Error::IllConditioned(c));
    }
    let inv = m.clone().try_inverse().ok_or(Error::IllConditioned(f64::INFINITY))?;
    Ok((inv, c))
}

/// Numerical rank with singular values above `tol · σ_max`.
pub fn rank(m: &RMat, tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let s = m.clone().svd(false, false).singular_values;
    let mx = s.iter().cloned().fold(0.0, f64::max);
    s.iter().filter(|&&v| v > tol * mx).count()
}

/// Numerical rank of a complex matrix.
pub fn rank_c(m: &CMat, tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let s = m.clone().svd(false, false).singular_values;
    let mx = s.iter().cloned().fold(0.0, f64::max);
    s.iter().filter(|&&v| v > tol * mx).count()
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(m: &RMat) -> Vec<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let mut e: Vec<f64> = sym.symmetric_eigen().eigenvalues.iter().cloned().collect();
    e.sort_by(|a, b| a.partial_cmp(b).unwrap());
    e
}

pub fn rows_to_json(m: &RMat) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().cloned().collect()).collect()
}

pub fn crows_to_json(m: &CMat) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows()).map(|i| m.row(i).iter().map(|z| [z.re, z.im]).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_and_condition() {
        let m = RMat::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 0.0, 1.0, 1.0]);
        assert_eq!(rank(&m, 1e-12), 2);
        assert!(inverse(&m, 1e12).is_err());
        let i = RMat::identity(3, 3);
        assert!((condition(&i) - 1.0).abs() < 1e-14);
        assert_eq!(sym_eigenvalues(&(i * 2.0)), vec![2.0; 3]);
    }
}

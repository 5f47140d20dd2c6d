//! Matrix exponential by scaling and squaring with a truncated Taylor series.
//!
//! Before scaling, the matrix is shifted by a multiple of the identity:
//! `exp(M) = e^mu exp(M - mu I)`. For Metzler matrices (nonnegative
//! off-diagonal, which covers every negated Laplacian used here) `mu` is the
//! smallest diagonal entry, making `M - mu I` entrywise nonnegative so every
//! Taylor term and every squaring is a sum of nonnegative numbers. Otherwise
//! `mu = trace / n`, the usual norm-reducing shift.
//!
//! The factor `e^mu` is folded in before squaring as `e^(mu / 2^s)`, which
//! keeps intermediates in range when `mu` is large and negative.

use thiserror::Error;

use crate::{Matrix, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExpmError {
    #[error("matrix exponential needs a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix exponential input has non-finite entries")]
    NonFinite,
}

/// Scaled norm threshold for the Taylor kernel.
const THETA: f64 = 0.5;
const MAX_TERMS: usize = 40;

fn is_metzler<T: Scalar>(m: &Matrix<T>) -> bool {
    let n = m.nrows();
    (0..n).all(|i| (0..n).all(|j| i == j || m[(i, j)] >= T::zero()))
}

/// `exp(M)`.
pub fn expm<T: Scalar>(m: &Matrix<T>) -> Result<Matrix<T>, ExpmError> {
    if !m.is_square() {
        return Err(ExpmError::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    if !m.is_finite() {
        return Err(ExpmError::NonFinite);
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }

    let mu = if is_metzler(m) {
        m.diagonal().into_iter().fold(T::infinity(), T::min)
    } else {
        m.trace() / T::from_usize(n).unwrap()
    };
    let mut a = m.clone();
    for i in 0..n {
        a[(i, i)] -= mu;
    }

    let norm = a.norm_inf();
    let theta = T::lit(THETA);
    let mut squarings = 0i32;
    if norm > theta {
        squarings = (norm / theta).log2().ceil().to_i32().unwrap_or(0).max(0);
    }
    let scale = T::lit(2.0).powi(squarings);
    let b = a.scale(T::one() / scale);

    // Taylor: sum_k B^k / k!
    let mut sum = Matrix::identity(n);
    let mut term = Matrix::identity(n);
    for k in 1..=MAX_TERMS {
        term = (&term * &b).scale(T::one() / T::from_usize(k).unwrap());
        sum = &sum + &term;
        if term.norm_inf() <= T::epsilon() * sum.norm_inf() {
            break;
        }
    }

    let mut result = sum.scale((mu / scale).exp());
    for _ in 0..squarings {
        result = &result * &result;
    }
    Ok(result)
}

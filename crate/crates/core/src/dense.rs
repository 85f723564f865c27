//! Dense Perron solver for small positive matrices.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DensePerron {
    /// Spectral radius.
    pub lambda: f64,
    /// Right eigenvector, positive with sup-norm 1.
    pub right: DVector<f64>,
    /// Left eigenvector, a probability vector.
    pub left: DVector<f64>,
    /// Modulus of the second eigenvalue divided by `lambda`.
    pub gap_ratio: f64,
}

fn null_vector(m: &DMatrix<f64>) -> DVector<f64> {
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let (k, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, &s)| if s < best.1 { (i, s) } else { best });
    let v = v_t.row(k).transpose();
    if v.sum() < 0.0 {
        -v
    } else {
        v
    }
}

/// Perron root and eigenvectors of a square matrix with nonnegative entries.
pub fn perron(m: &DMatrix<f64>) -> Result<DensePerron> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(Error::InvalidParameter("dense Perron solver needs a square matrix".into()));
    }
    if m.iter().any(|&x| x < 0.0 || !x.is_finite()) {
        return Err(Error::InvalidParameter("dense Perron solver needs nonnegative entries".into()));
    }
    let mut moduli: Vec<f64> = m.complex_eigenvalues().iter().map(|z| z.norm()).collect();
    moduli.sort_by(|a, b| b.total_cmp(a));
    let lambda = moduli[0];
    let shifted = m - DMatrix::identity(m.nrows(), m.nrows()) * lambda;
    let right = null_vector(&shifted);
    let right = &right / right.amax();
    let left = null_vector(&shifted.transpose());
    let left = &left / left.sum();
    Ok(DensePerron {
        lambda,
        right,
        left,
        gap_ratio: moduli.get(1).map_or(0.0, |s| s / lambda),
    })
}

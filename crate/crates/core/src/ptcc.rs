//! Partial tail-correlation coefficients.
//!
//! For a pair `(i, k)` the remaining variables are projected out with the
//! best transformed-linear predictor `B = Σ_{ik,rest} Σ_{rest,rest}⁻¹`; the
//! TPDM of the residual pair is the Schur complement
//! `Σ_{ik,ik} − B Σ_{rest,ik}`, and its off-diagonal entry is the PTCC.
//! A zero PTCC is the same event as a zero entry in `Σ⁻¹`.

use nalgebra::{Cholesky, DMatrix, Dyn, Matrix2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{is_symmetric, require_square, submatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct PtccResult {
    pub pair: (usize, usize),
    /// Off-diagonal of the residual TPDM.
    pub value: f64,
    pub residual_tpdm: Matrix2<f64>,
    /// `value / sqrt(residual[0,0] · residual[1,1])`. Not part of the
    /// coefficient's definition; offered for comparing pairs.
    pub normalized_value: f64,
}

struct PairSplit {
    pair: [usize; 2],
    rest: Vec<usize>,
    /// Cholesky factor of Σ_{rest,rest}.
    chol: Cholesky<f64, Dyn>,
    /// Σ_{rest,rest}⁻¹ Σ_{rest,ik}, one column per pair member.
    solved: DMatrix<f64>,
}

fn split(sigma: &DMatrix<f64>, i: usize, k: usize) -> Result<PairSplit> {
    let p = require_square(sigma, "TPDM")?;
    if p < 3 {
        return Err(Error::InvalidInput(format!(
            "partial coefficients need p >= 3 so that the conditioning set is nonempty, got p = {p}"
        )));
    }
    if i >= p || k >= p {
        return Err(Error::InvalidInput(format!("pair ({i}, {k}) out of range for p = {p}")));
    }
    if i == k {
        return Err(Error::InvalidInput(format!("pair ({i}, {k}) must be two distinct indices")));
    }
    if !is_symmetric(sigma, 1e-10) {
        return Err(Error::InvalidInput("TPDM is not symmetric".into()));
    }
    let rest: Vec<usize> = (0..p).filter(|&j| j != i && j != k).collect();
    let rr = submatrix(sigma, &rest, &rest);
    let chol = Cholesky::new(rr).ok_or_else(|| {
        Error::Singular("conditioning block is not positive definite".into())
    })?;
    let cross = submatrix(sigma, &rest, &[i, k]);
    let solved = chol.solve(&cross);
    Ok(PairSplit {
        pair: [i, k],
        rest,
        chol,
        solved,
    })
}

/// Coefficients of the best transformed-linear predictor of `(X_i, X_k)`
/// from the other variables; row 0 predicts `X_i`, row 1 predicts `X_k`, and
/// columns follow the remaining indices in increasing order.
pub fn best_tl_predictor(sigma: &DMatrix<f64>, i: usize, k: usize) -> Result<DMatrix<f64>> {
    let s = split(sigma, i, k)?;
    debug_assert_eq!(s.chol.l().nrows(), s.rest.len());
    Ok(s.solved.transpose())
}

/// TPDM of the prediction error of `(X_i, X_k)` given the rest.
pub fn residual_tpdm(sigma: &DMatrix<f64>, i: usize, k: usize) -> Result<Matrix2<f64>> {
    let (a, b) = (i.min(k), i.max(k));
    let s = split(sigma, a, b)?;
    let cross = submatrix(sigma, &s.rest, &s.pair);
    let entry = |u: usize, v: usize| {
        sigma[(s.pair[u], s.pair[v])] - cross.column(u).dot(&s.solved.column(v))
    };
    let off = entry(0, 1);
    let (d0, d1) = (entry(0, 0), entry(1, 1));
    Ok(if i <= k {
        Matrix2::new(d0, off, off, d1)
    } else {
        Matrix2::new(d1, off, off, d0)
    })
}

pub fn ptcc_pair(sigma: &DMatrix<f64>, i: usize, k: usize) -> Result<PtccResult> {
    let residual = residual_tpdm(sigma, i, k)?;
    let value = residual[(0, 1)];
    let scale = (residual[(0, 0)] * residual[(1, 1)]).sqrt();
    let normalized_value = if scale > 0.0 {
        (value / scale).clamp(-1.0, 1.0)
    } else {
        0.0
    };
    Ok(PtccResult {
        pair: (i, k),
        value,
        residual_tpdm: residual,
        normalized_value,
    })
}

/// All pairwise PTCCs by the Schur route; the diagonal holds the residual
/// variance of each variable given all the others, `1 / (Σ⁻¹)_ii`.
pub fn ptcc_matrix(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = require_square(sigma, "TPDM")?;
    let pairs: Vec<(usize, usize)> = (0..p)
        .flat_map(|i| ((i + 1)..p).map(move |k| (i, k)))
        .collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, k)| ptcc_pair(sigma, i, k).map(|r| r.value))
        .collect::<Result<_>>()?;
    let precision = crate::linalg::spd_inverse(sigma)?;
    let mut out = DMatrix::zeros(p, p);
    for (&(i, k), v) in pairs.iter().zip(values) {
        out[(i, k)] = v;
        out[(k, i)] = v;
    }
    for i in 0..p {
        out[(i, i)] = 1.0 / precision[(i, i)];
    }
    Ok(out)
}

/// PTCCs from the inverse TPDM `Q` through the 2×2 block-inverse identity:
/// off-diagonal `−Q_ik / (Q_ii Q_kk − Q_ik²)`, diagonal `1 / Q_ii`.
pub fn ptcc_matrix_from_precision(q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = require_square(q, "precision matrix")?;
    if !is_symmetric(q, 1e-10) {
        return Err(Error::InvalidInput("precision matrix is not symmetric".into()));
    }
    if Cholesky::new(q.clone()).is_none() {
        return Err(Error::NotPositiveDefinite("precision matrix".into()));
    }
    Ok(DMatrix::from_fn(p, p, |i, k| {
        if i == k {
            1.0 / q[(i, i)]
        } else {
            let det = q[(i, i)] * q[(k, k)] - q[(i, k)] * q[(k, i)];
            -q[(i, k)] / det
        }
    }))
}

/// True when `|PTCC_ik| <= tol`.
pub fn partial_uncorrelated_test(
    sigma: &DMatrix<f64>,
    i: usize,
    k: usize,
    tol: f64,
) -> Result<bool> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    Ok(ptcc_pair(sigma, i, k)?.value.abs() <= tol)
}

//! Transformed-linear arithmetic on the positive orthant.
//!
//! Elements of `(0, ∞)^p` are mapped to `ℝ^p` with the inverse softplus
//! `t⁻¹(x) = log(eˣ − 1)`, combined with ordinary linear algebra there, and
//! mapped back with `t(y) = log(1 + eʸ)`. Because `t(y)/y → 1` as `y → ∞`,
//! these operations leave the upper tail of a regularly varying vector
//! untouched.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::numerical_rank;
use crate::tpdm::Tpdm;

/// Value substituted for exact zeros by [`PositiveVector::clamped`].
pub const ZERO_CLAMP: f64 = 1e-300;

/// `t(y) = log(1 + eʸ)` without overflow or cancellation.
#[inline]
pub(crate) fn softplus(y: f64) -> f64 {
    if y > 0.0 {
        y + (-y).exp().ln_1p()
    } else {
        y.exp().ln_1p()
    }
}

/// `t⁻¹(x) = log(eˣ − 1)` for `x > 0`.
#[inline]
pub(crate) fn softplus_inv(x: f64) -> f64 {
    if x > 1.0 {
        x + (-(-x).exp_m1()).ln()
    } else {
        x.exp_m1().ln()
    }
}

pub fn transform(y: f64) -> Result<f64> {
    if !y.is_finite() {
        return Err(Error::InvalidInput(format!("transform needs a finite argument, got {y}")));
    }
    Ok(softplus(y))
}

pub fn inverse_transform(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::InvalidInput(format!(
            "inverse transform needs a finite positive argument, got {x}"
        )));
    }
    Ok(softplus_inv(x))
}

/// An element of the target space `(0, ∞)^p`.
#[derive(Debug, Clone, PartialEq)]
pub struct PositiveVector(Vec<f64>);

impl PositiveVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v > 0.0) || !v.is_finite())
        {
            return Err(Error::InvalidInput(format!(
                "component {i} is {v}, expected a finite positive value"
            )));
        }
        Ok(Self(values))
    }

    /// Like [`PositiveVector::new`] but exact zeros are replaced by
    /// [`ZERO_CLAMP`]; returns how many components were clamped.
    pub fn clamped(mut values: Vec<f64>) -> Result<(Self, usize)> {
        let mut count = 0;
        for v in values.iter_mut() {
            if *v == 0.0 {
                *v = ZERO_CLAMP;
                count += 1;
            }
        }
        if count > 0 {
            log::warn!("clamped {count} zero component(s) to {ZERO_CLAMP:e}");
        }
        Ok((Self::new(values)?, count))
    }

    /// The additive identity `t(0) = log 2` in every component.
    pub fn zero(p: usize) -> Self {
        Self(vec![std::f64::consts::LN_2; p])
    }

    /// Maps a real vector into the target space.
    pub fn from_real(y: &[f64]) -> Result<Self> {
        y.iter().map(|&v| transform(v)).collect::<Result<Vec<_>>>().map(Self)
    }

    /// Preimage `t⁻¹(x)` in `ℝ^p`.
    pub fn to_real(&self) -> Vec<f64> {
        self.0.iter().map(|&x| softplus_inv(x)).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A `p × q` coefficient matrix for transformed-linear constructions and predictors.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix(DMatrix<f64>);

impl CoefficientMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidInput("coefficient matrix is empty".into()));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("coefficient matrix has non-finite entries".into()));
        }
        Ok(Self(entries))
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let q = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != q) {
            return Err(Error::Dimension("ragged coefficient rows".into()));
        }
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::new(DMatrix::from_row_slice(rows.len(), q, &flat))
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.0.iter().all(|&v| v >= 0.0)
    }

    pub fn require_full_row_rank(&self) -> Result<()> {
        let rank = numerical_rank(&self.0);
        if rank < self.nrows() {
            return Err(Error::RankDeficient {
                rank,
                rows: self.nrows(),
            });
        }
        Ok(())
    }
}

fn check_len(a: &PositiveVector, b: &PositiveVector) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!("lengths {} and {}", a.len(), b.len())));
    }
    Ok(())
}

/// `x1 ⊕ x2`.
pub fn vec_add(x1: &PositiveVector, x2: &PositiveVector) -> Result<PositiveVector> {
    check_len(x1, x2)?;
    let out = x1
        .0
        .iter()
        .zip(&x2.0)
        .map(|(&a, &b)| softplus(softplus_inv(a) + softplus_inv(b)))
        .collect();
    Ok(PositiveVector(out))
}

/// `a ∘ x`.
pub fn scalar_mul(a: f64, x: &PositiveVector) -> Result<PositiveVector> {
    if !a.is_finite() {
        return Err(Error::InvalidInput(format!("scalar must be finite, got {a}")));
    }
    Ok(PositiveVector(
        x.0.iter().map(|&v| softplus(a * softplus_inv(v))).collect(),
    ))
}

/// Additive inverse `⊖x`.
pub fn negate(x: &PositiveVector) -> PositiveVector {
    PositiveVector(x.0.iter().map(|&v| softplus(-softplus_inv(v))).collect())
}

/// `x1 ⊖ x2 = x1 ⊕ (⊖x2)`.
pub fn vec_sub(x1: &PositiveVector, x2: &PositiveVector) -> Result<PositiveVector> {
    vec_add(x1, &negate(x2))
}

/// `⟨x1, x2⟩ = Σ t⁻¹(x1_j) t⁻¹(x2_j)`.
pub fn inner_product(x1: &PositiveVector, x2: &PositiveVector) -> Result<f64> {
    check_len(x1, x2)?;
    Ok(x1
        .0
        .iter()
        .zip(&x2.0)
        .map(|(&a, &b)| softplus_inv(a) * softplus_inv(b))
        .sum())
}

/// `A ∘ z = t(A · t⁻¹(z))`, i.e. `⊕_j a_j ∘ z_j`.
pub fn matrix_apply(a: &CoefficientMatrix, z: &PositiveVector) -> Result<PositiveVector> {
    if a.ncols() != z.len() {
        return Err(Error::Dimension(format!(
            "matrix has {} columns but vector has length {}",
            a.ncols(),
            z.len()
        )));
    }
    let pre = DVector::from_vec(z.to_real());
    let y = a.entries() * pre;
    Ok(PositiveVector(y.iter().map(|&v| softplus(v)).collect()))
}

/// TPDM of `A ∘ Z` for i.i.d. unit-scale factors: `Σ = A Aᵀ`.
pub fn true_tpdm_from_coefficients(a: &CoefficientMatrix) -> Result<Tpdm> {
    a.require_full_row_rank()?;
    let e = a.entries();
    let sigma = e * e.transpose();
    let sigma = crate::linalg::symmetrize(&sigma);
    Tpdm::from_matrix(sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn transform_examples() {
        assert!((transform(0.0).unwrap() - LN_2).abs() < 1e-16);
        assert!(rel(transform(50.0).unwrap(), 50.0) < 1e-15);
        assert!(rel(transform(-50.0).unwrap(), (-50.0f64).exp()) < 1e-10);
        assert!(transform(f64::NAN).is_err());
    }

    #[test]
    fn inverse_transform_examples() {
        assert!(inverse_transform(LN_2).unwrap().abs() < 1e-15);
        assert!(rel(inverse_transform(50.0).unwrap(), 50.0) < 1e-15);
        // 50-digit reference value of log(expm1(1e-6)).
        let reference = -13.815510057964232;
        assert!(rel(inverse_transform(1e-6).unwrap(), reference) < 1e-14);
        assert!(inverse_transform(0.0).is_err());
        assert!(inverse_transform(-1.0).is_err());
    }

    #[test]
    fn vec_add_examples() {
        let z = PositiveVector::zero(2);
        assert_eq!(vec_add(&z, &z).unwrap(), z);
        let x = PositiveVector::new(vec![0.3, 7.0, 25.0]).unwrap();
        let s = vec_add(&x, &negate(&x)).unwrap();
        for v in s.values() {
            assert!((v - LN_2).abs() < 1e-12);
        }
        let ten = PositiveVector::new(vec![10.0, 10.0]).unwrap();
        let sum = vec_add(&ten, &ten).unwrap();
        // 50-digit reference: t(2 t⁻¹(10)) = 19.99990920014060
        for v in sum.values() {
            assert!((v - 19.999909200140600).abs() < 1e-12);
            assert!((v - 20.0).abs() < 1e-3);
        }
        assert!(vec_add(&ten, &x).is_err());
    }

    #[test]
    fn scalar_mul_examples() {
        let x = PositiveVector::new(vec![0.2, 3.0, 40.0]).unwrap();
        let one = scalar_mul(1.0, &x).unwrap();
        for (a, b) in one.values().iter().zip(x.values()) {
            assert!(rel(*a, *b) < 1e-13);
        }
        assert_eq!(scalar_mul(0.0, &x).unwrap(), PositiveVector::zero(3));
        let twenty = PositiveVector::new(vec![20.0, 20.0]).unwrap();
        for v in scalar_mul(2.0, &twenty).unwrap().values() {
            assert!((v - 40.0).abs() < 1e-6);
        }
        assert!(scalar_mul(f64::INFINITY, &x).is_err());
    }

    #[test]
    fn matrix_apply_examples() {
        let z = PositiveVector::new(vec![0.5, 4.0, 60.0]).unwrap();
        let id = CoefficientMatrix::new(DMatrix::identity(3, 3)).unwrap();
        let out = matrix_apply(&id, &z).unwrap();
        for (a, b) in out.values().iter().zip(z.values()) {
            assert!(rel(*a, *b) < 1e-13);
        }

        let col = CoefficientMatrix::from_rows(&[&[1.0], &[1.0]]).unwrap();
        let z1 = PositiveVector::new(vec![2.5]).unwrap();
        let out = matrix_apply(&col, &z1).unwrap();
        assert!(rel(out.values()[0], 2.5) < 1e-15 && rel(out.values()[1], 2.5) < 1e-15);

        let a = CoefficientMatrix::from_rows(&[&[1.0, 1.0], &[1.0, 0.0]]).unwrap();
        let z = PositiveVector::new(vec![100.0, 100.0]).unwrap();
        let out = matrix_apply(&a, &z).unwrap();
        assert!(rel(out.values()[0], 200.0) < 1e-6);
        assert!(rel(out.values()[1], 100.0) < 1e-6);

        assert!(matrix_apply(&a, &z1).is_err());
    }

    #[test]
    fn clamping_counts_zeros() {
        let (v, n) = PositiveVector::clamped(vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(n, 2);
        assert_eq!(v.values()[0], ZERO_CLAMP);
        assert!(PositiveVector::clamped(vec![-1.0]).is_err());
        assert!(PositiveVector::new(vec![0.0]).is_err());
    }

    #[test]
    fn identity_coefficients_give_identity_tpdm() {
        let id = CoefficientMatrix::new(DMatrix::identity(3, 3)).unwrap();
        let t = true_tpdm_from_coefficients(&id).unwrap();
        assert_eq!(t.sigma, DMatrix::identity(3, 3));
    }

    #[test]
    fn rank_deficient_coefficients_flagged() {
        let a = CoefficientMatrix::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]).unwrap();
        assert!(matches!(
            true_tpdm_from_coefficients(&a),
            Err(Error::RankDeficient { rank: 1, rows: 2 })
        ));
    }

    #[test]
    fn inner_product_matches_preimages() {
        let x = PositiveVector::from_real(&[1.0, -2.0]).unwrap();
        let y = PositiveVector::from_real(&[3.0, 0.5]).unwrap();
        assert!((inner_product(&x, &y).unwrap() - (3.0 - 1.0)).abs() < 1e-12);
    }
}

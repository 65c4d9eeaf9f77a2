//! Tail pairwise dependence matrix estimation.
//!
//! Margins are first brought to a common Fréchet(2) scale, each replicate is
//! split into a radius `r_t = ‖x_t‖₂` and an angle `w_t = x_t / r_t`, and the
//! matrix is the scaled average of `w_t w_tᵀ` over replicates whose radius
//! exceeds a high threshold.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{is_symmetric, require_square, sym_eigen_ascending, symmetrize};
use crate::sample::{default_names, SampleMatrix};
use crate::tl::CoefficientMatrix;

/// Rows per partial sum in [`estimate_tpdm`]; fixes the summation order.
const CHUNK_ROWS: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct Tpdm {
    pub sigma: DMatrix<f64>,
    /// Total angular mass used as the scale constant.
    pub m: f64,
    /// Radial threshold `r₀`; absent for matrices not estimated from data.
    pub threshold: Option<f64>,
    pub n_exceedances: usize,
    pub quantile_level: Option<f64>,
    pub names: Vec<String>,
    /// Set when [`ensure_positive_definite`] had to lift eigenvalues.
    pub pd_repaired: bool,
}

impl Tpdm {
    /// Wraps a known matrix (e.g. a model TPDM); `m` is its trace.
    pub fn from_matrix(sigma: DMatrix<f64>) -> Result<Self> {
        let p = require_square(&sigma, "TPDM")?;
        let names = default_names(p);
        Self::from_matrix_named(sigma, names)
    }

    pub fn from_matrix_named(sigma: DMatrix<f64>, names: Vec<String>) -> Result<Self> {
        let p = require_square(&sigma, "TPDM")?;
        if names.len() != p {
            return Err(Error::Dimension(format!("{} names for a {p}x{p} TPDM", names.len())));
        }
        if !is_symmetric(&sigma, 1e-12) {
            return Err(Error::InvalidInput("TPDM is not symmetric".into()));
        }
        if (0..p).any(|i| !(sigma[(i, i)] > 0.0)) {
            return Err(Error::InvalidInput("TPDM diagonal must be positive".into()));
        }
        Ok(Self {
            m: sigma.trace(),
            sigma,
            threshold: None,
            n_exceedances: 0,
            quantile_level: None,
            names,
            pd_repaired: false,
        })
    }

    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }
}

/// Radii and unit-norm angles of each replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularSample {
    pub radii: DVector<f64>,
    pub angles: DMatrix<f64>,
}

/// How the radial threshold is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    /// Empirical quantile level of the radii, in (0, 1).
    Quantile(f64),
    /// Absolute radius `r₀`.
    Radius(f64),
}

impl Default for Threshold {
    fn default() -> Self {
        Threshold::Quantile(0.99)
    }
}

/// Average ranks (1-based) of `values`; ties share the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end share their mean rank
        let rank = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = rank;
        }
        start = end;
    }
    ranks
}

/// Fréchet(2) quantile of the plotting position `rank / (n + 1)`.
#[inline]
pub fn frechet2_score(rank: f64, n: usize) -> f64 {
    (-(rank / (n as f64 + 1.0)).ln()).powf(-0.5)
}

/// Per-column empirical transform to Fréchet(2) margins.
pub fn frechet2_rank_transform(data: &SampleMatrix) -> Result<SampleMatrix> {
    let n = data.nrows();
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "rank transform needs at least 2 rows, got {n}"
        )));
    }
    let p = data.ncols();
    let mut out = DMatrix::zeros(n, p);
    for j in 0..p {
        let col: Vec<f64> = data.values().column(j).iter().copied().collect();
        if col.iter().all(|&v| v == col[0]) {
            return Err(Error::InvalidInput(format!(
                "column '{}' is constant",
                data.names()[j]
            )));
        }
        for (i, r) in average_ranks(&col).into_iter().enumerate() {
            out[(i, j)] = frechet2_score(r, n);
        }
    }
    SampleMatrix::new(out, data.names().to_vec())
}

fn require_nonnegative(data: &SampleMatrix) -> Result<()> {
    if let Some(pos) = data.values().iter().position(|&v| v < 0.0) {
        let n = data.nrows();
        return Err(Error::InvalidInput(format!(
            "negative value at row {}, column {}; transform margins first",
            pos % n + 1,
            pos / n + 1
        )));
    }
    Ok(())
}

fn row_norms(data: &SampleMatrix) -> Vec<f64> {
    data.values().row_iter().map(|r| r.norm()).collect()
}

pub fn radial_angular(data: &SampleMatrix) -> Result<AngularSample> {
    require_nonnegative(data)?;
    let radii = row_norms(data);
    if let Some(i) = radii.iter().position(|&r| !(r > 0.0)) {
        return Err(Error::InvalidInput(format!("row {} has zero norm", i + 1)));
    }
    let mut angles = data.values().clone();
    for (i, &r) in radii.iter().enumerate() {
        angles.row_mut(i).unscale_mut(r);
    }
    Ok(AngularSample {
        radii: DVector::from_vec(radii),
        angles,
    })
}

/// Linear-interpolation sample quantile (Hyndman–Fan type 7).
pub fn empirical_quantile(values: &[f64], level: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = (sorted.len() - 1) as f64 * level;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Threshold-exceedance estimate of the TPDM.
///
/// `m` defaults to the number of columns, which is appropriate when every
/// margin is on the unit Fréchet(2) scale.
pub fn estimate_tpdm(data: &SampleMatrix, threshold: Threshold, m: Option<f64>) -> Result<Tpdm> {
    require_nonnegative(data)?;
    let p = data.ncols();
    let m = m.unwrap_or(p as f64);
    if !(m > 0.0) || !m.is_finite() {
        return Err(Error::InvalidInput(format!("m must be positive, got {m}")));
    }
    let radii = row_norms(data);
    let rmax = radii.iter().cloned().fold(0.0, f64::max);
    let (r0, level) = match threshold {
        Threshold::Quantile(q) => {
            if !(q > 0.0 && q < 1.0) {
                return Err(Error::InvalidInput(format!("quantile level {q} not in (0, 1)")));
            }
            if radii.is_empty() {
                return Err(Error::InvalidInput("no rows".into()));
            }
            (empirical_quantile(&radii, q), Some(q))
        }
        Threshold::Radius(r) => {
            if !(r >= 0.0) || !r.is_finite() {
                return Err(Error::InvalidInput(format!("threshold radius {r} is invalid")));
            }
            if r >= rmax {
                return Err(Error::InvalidInput(format!(
                    "threshold {r} is not below the largest radius {rmax}"
                )));
            }
            (r, None)
        }
    };
    let exceed: Vec<usize> = (0..radii.len()).filter(|&t| radii[t] > r0).collect();
    if exceed.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "{} exceedance(s) above r0 = {r0}; need at least 2",
            exceed.len()
        )));
    }

    let values = data.values();
    let partials: Vec<DMatrix<f64>> = exceed
        .par_chunks(CHUNK_ROWS)
        .map(|rows| {
            let mut acc = DMatrix::zeros(p, p);
            let mut w = DVector::zeros(p);
            for &t in rows {
                let r = radii[t];
                for j in 0..p {
                    w[j] = values[(t, j)] / r;
                }
                acc.ger(1.0, &w, &w, 1.0);
            }
            acc
        })
        .collect();
    let mut sigma = DMatrix::zeros(p, p);
    for part in &partials {
        sigma += part;
    }
    sigma *= m / exceed.len() as f64;
    let sigma = symmetrize(&sigma);

    Ok(Tpdm {
        sigma,
        m,
        threshold: Some(r0),
        n_exceedances: exceed.len(),
        quantile_level: level,
        names: data.names().to_vec(),
        pd_repaired: false,
    })
}

/// Lifts eigenvalues below `epsilon` up to `epsilon`.
///
/// `epsilon` defaults to `1e-8` times the largest eigenvalue.
pub fn ensure_positive_definite(t: &Tpdm, epsilon: Option<f64>) -> Result<Tpdm> {
    require_square(&t.sigma, "TPDM")?;
    if !is_symmetric(&t.sigma, 1e-10) {
        return Err(Error::InvalidInput("TPDM is not symmetric".into()));
    }
    let (vals, vecs) = sym_eigen_ascending(&t.sigma);
    let top = vals[vals.len() - 1];
    let eps = epsilon.unwrap_or(if top > 0.0 { 1e-8 * top } else { 1e-8 });
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!("epsilon must be positive, got {eps}")));
    }
    let mut out = t.clone();
    if vals[0] >= eps {
        return Ok(out);
    }
    let lifted = vals.map(|v| v.max(eps));
    out.sigma = symmetrize(&(&vecs * DMatrix::from_diagonal(&lifted) * vecs.transpose()));
    out.pd_repaired = true;
    Ok(out)
}

/// Square-root factor `A = U Λ^{1/2}` with `A Aᵀ = Σ`; entries may be negative.
pub fn factorize_tpdm(t: &Tpdm) -> Result<CoefficientMatrix> {
    require_square(&t.sigma, "TPDM")?;
    let (vals, vecs) = sym_eigen_ascending(&t.sigma);
    if !(vals[0] > 0.0) {
        return Err(Error::NotPositiveDefinite(format!(
            "smallest eigenvalue is {:e}",
            vals[0]
        )));
    }
    let root = vals.map(f64::sqrt);
    CoefficientMatrix::new(vecs * DMatrix::from_diagonal(&root))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sm(rows: usize, cols: usize, data: &[f64]) -> SampleMatrix {
        SampleMatrix::with_default_names(DMatrix::from_row_slice(rows, cols, data)).unwrap()
    }

    #[test]
    fn rank_transform_hand_values() {
        let out = frechet2_rank_transform(&sm(3, 1, &[3.0, 1.0, 2.0])).unwrap();
        let expect = [
            (-(0.75f64).ln()).powf(-0.5),
            (-(0.25f64).ln()).powf(-0.5),
            (-(0.5f64).ln()).powf(-0.5),
        ];
        for i in 0..3 {
            assert!((out.values()[(i, 0)] - expect[i]).abs() < 1e-15);
        }
        assert!((out.values()[(0, 0)] - 1.864).abs() < 1e-3);
        assert!((out.values()[(1, 0)] - 0.849).abs() < 1e-3);
        assert!((out.values()[(2, 0)] - 1.201).abs() < 1e-3);
    }

    #[test]
    fn rank_transform_rejects_single_row_and_constant_column() {
        assert!(frechet2_rank_transform(&sm(1, 2, &[1.0, 2.0])).is_err());
        let err = frechet2_rank_transform(&sm(3, 2, &[1.0, 5.0, 2.0, 5.0, 3.0, 5.0])).unwrap_err();
        assert!(err.to_string().contains("X2"));
    }

    #[test]
    fn ties_get_average_ranks() {
        assert_eq!(average_ranks(&[2.0, 1.0, 2.0, 3.0]), vec![2.5, 1.0, 2.5, 4.0]);
    }

    #[test]
    fn radial_angular_examples() {
        let a = radial_angular(&sm(1, 2, &[3.0, 4.0])).unwrap();
        assert!((a.radii[0] - 5.0).abs() < 1e-15);
        assert!((a.angles[(0, 0)] - 0.6).abs() < 1e-15);
        assert!((a.angles[(0, 1)] - 0.8).abs() < 1e-15);
        let b = radial_angular(&sm(1, 3, &[1.0, 0.0, 0.0])).unwrap();
        assert_eq!(b.radii[0], 1.0);
        assert_eq!(b.angles.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 0.0, 0.0]);
        assert!(radial_angular(&sm(2, 2, &[1.0, 1.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn type7_quantile() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert!((empirical_quantile(&v, 0.9) - 9.1).abs() < 1e-12);
        assert_eq!(empirical_quantile(&v, 0.0), 1.0);
    }

    #[test]
    fn equal_angle_exceedances_give_all_ones() {
        // Every row is a positive multiple of (1, 1, 1).
        let rows: Vec<f64> = (1..=20).flat_map(|i| [i as f64; 3]).collect();
        let t = estimate_tpdm(&sm(20, 3, &rows), Threshold::Quantile(0.5), None).unwrap();
        for v in t.sigma.iter() {
            assert!((v - 1.0).abs() < 1e-12);
        }
        assert_eq!(t.n_exceedances, 10);
    }

    #[test]
    fn disjoint_supports_give_diagonal_tpdm() {
        let mut rows = Vec::new();
        for i in 0..30 {
            let mut r = [0.0; 3];
            r[i % 3] = 1.0 + i as f64;
            rows.extend_from_slice(&r);
        }
        let t = estimate_tpdm(&sm(30, 3, &rows), Threshold::Quantile(0.5), Some(3.0)).unwrap();
        for i in 0..3 {
            for k in 0..3 {
                if i != k {
                    assert_eq!(t.sigma[(i, k)], 0.0);
                }
            }
        }
        assert!((t.sigma.trace() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn threshold_errors() {
        let d = sm(4, 2, &[1.0, 1.0, 2.0, 1.0, 3.0, 1.0, 4.0, 1.0]);
        assert!(estimate_tpdm(&d, Threshold::Radius(100.0), None).is_err());
        assert!(estimate_tpdm(&d, Threshold::Quantile(0.9), None).is_err()); // one exceedance
        assert!(estimate_tpdm(&d, Threshold::Quantile(1.0), None).is_err());
        let ok = estimate_tpdm(&d, Threshold::Radius(1.5), None).unwrap();
        assert_eq!(ok.n_exceedances, 3);
        assert_eq!(ok.quantile_level, None);
    }

    #[test]
    fn pd_repair_examples() {
        let pd = Tpdm::from_matrix(DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0])).unwrap();
        let same = ensure_positive_definite(&pd, Some(1e-8)).unwrap();
        assert_eq!(same.sigma, pd.sigma);
        assert!(!same.pd_repaired);

        let d = Tpdm::from_matrix(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1e-12])).unwrap();
        let fixed = ensure_positive_definite(&d, Some(1e-8)).unwrap();
        assert!(fixed.pd_repaired);
        assert!((fixed.sigma[(1, 1)] - 1e-8).abs() < 1e-20);
        assert!((fixed.sigma[(0, 0)] - 1.0).abs() < 1e-15);
        assert!(fixed.sigma[(0, 1)].abs() < 1e-20);
    }

    #[test]
    fn factorization_of_identity() {
        let t = Tpdm::from_matrix(DMatrix::identity(3, 3)).unwrap();
        let a = factorize_tpdm(&t).unwrap();
        let aa = a.entries() * a.entries().transpose();
        assert!(crate::linalg::max_abs_diff(&aa, &t.sigma) < 1e-12);
        for v in a.entries().iter() {
            assert!(v.abs() < 1e-12 || (v.abs() - 1.0).abs() < 1e-12);
        }
        let singular = Tpdm {
            sigma: DMatrix::from_element(2, 2, 1.0),
            ..t.clone()
        };
        assert!(factorize_tpdm(&singular).is_err());
    }
}

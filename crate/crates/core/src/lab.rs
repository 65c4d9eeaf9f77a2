//! Simulation of transformed-linear heavy-tailed vectors `X = A ∘ Z` with
//! i.i.d. Fréchet factors, including three four-variable benchmark designs
//! (star tree, decomposable, and non-decomposable square) with known TPDM,
//! inverse TPDM and edge set.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::spd_inverse;
use crate::sample::SampleMatrix;
use crate::tl::{matrix_apply, true_tpdm_from_coefficients, CoefficientMatrix, PositiveVector};

/// Off-diagonal magnitude above which an inverse-TPDM entry counts as an edge.
pub const TRUTH_EDGE_TOL: f64 = 1e-12;

/// Independent random stream for replicate `index` under `seed`.
///
/// ChaCha streams are counter-based, so replicate `i` draws the same numbers
/// no matter which thread generates it or in what order.
pub fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Fréchet(α) quantile `(−log u)^{−1/α}`.
#[inline]
pub fn frechet_quantile(u: f64, alpha: f64) -> f64 {
    (-u.ln()).powf(-1.0 / alpha)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidInput(format!("tail parameter must be positive, got {alpha}")));
    }
    Ok(())
}

/// `n` i.i.d. Fréchet(α) draws by inverse-CDF sampling; draw `i` comes from
/// substream `i`.
pub fn sample_frechet(n: usize, alpha: f64, seed: u64) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    if n == 0 {
        return Err(Error::InvalidInput("sample size must be at least 1".into()));
    }
    Ok((0..n as u64)
        .into_par_iter()
        .map(|i| {
            let u: f64 = substream(seed, i).sample(Open01);
            frechet_quantile(u, alpha)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruthRecord {
    pub coefficient_matrix: CoefficientMatrix,
    pub sigma_true: DMatrix<f64>,
    pub q_true: DMatrix<f64>,
    pub edges_true: BTreeSet<(usize, usize)>,
    pub alpha: f64,
}

impl TruthRecord {
    pub fn from_coefficients(a: &CoefficientMatrix, alpha: f64) -> Result<Self> {
        let sigma_true = true_tpdm_from_coefficients(a)?.sigma;
        let q_true = spd_inverse(&sigma_true)?;
        let p = sigma_true.nrows();
        let edges_true = (0..p)
            .flat_map(|i| ((i + 1)..p).map(move |k| (i, k)))
            .filter(|&(i, k)| q_true[(i, k)].abs() > TRUTH_EDGE_TOL)
            .collect();
        Ok(Self {
            coefficient_matrix: a.clone(),
            sigma_true,
            q_true,
            edges_true,
            alpha,
        })
    }
}

#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub samples: SampleMatrix,
    pub truth: TruthRecord,
    pub seed: u64,
}

/// Coefficient matrix of benchmark case 1, 2 or 3 (rows are variables,
/// columns are the factors `R₁..R₄`).
pub fn case_coefficients(case_id: u8) -> Result<CoefficientMatrix> {
    let s6 = 6f64.sqrt();
    let s3 = 3f64.sqrt();
    match case_id {
        // X1 = R1, Xj = R1 ⊕ Rj
        1 => CoefficientMatrix::from_rows(&[
            &[1.0, 0.0, 0.0, 0.0],
            &[1.0, 1.0, 0.0, 0.0],
            &[1.0, 0.0, 1.0, 0.0],
            &[1.0, 0.0, 0.0, 1.0],
        ]),
        // X4 = R1 ⊕ 2∘R3 ⊕ R4
        2 => CoefficientMatrix::from_rows(&[
            &[1.0, 0.0, 0.0, 0.0],
            &[1.0, 1.0, 0.0, 0.0],
            &[1.0, 0.0, 1.0, 0.0],
            &[1.0, 0.0, 2.0, 1.0],
        ]),
        3 => CoefficientMatrix::from_rows(&[
            &[1.0, 0.0, 0.0, 0.0],
            &[1.0, 3.0 / s6, 0.0, 0.0],
            &[1.0, 1.0 / s6, 2.0 / s3, 0.0],
            &[1.0, s6 / 3.0, 1.0 / s3, 1.0],
        ]),
        other => Err(Error::InvalidInput(format!("unknown case {other}; expected 1, 2 or 3"))),
    }
}

/// Coefficients of a transformed-linear tree: `X_j = X_{parent(j)} ⊕ R_j`,
/// roots get `X_j = R_j`. Parents must precede their children.
pub fn tree_coefficients(parents: &[Option<usize>]) -> Result<CoefficientMatrix> {
    let p = parents.len();
    let mut a = DMatrix::<f64>::zeros(p, p);
    for (j, parent) in parents.iter().enumerate() {
        if let Some(q) = *parent {
            if q >= j {
                return Err(Error::InvalidInput(format!(
                    "parent {q} of vertex {j} must come earlier"
                )));
            }
            let row = a.row(q).into_owned();
            a.set_row(j, &row);
        }
        a[(j, j)] = 1.0;
    }
    CoefficientMatrix::new(a)
}

/// Random recursive tree on `p` vertices: vertex `j > 0` attaches to a
/// uniformly chosen earlier vertex.
pub fn random_tree_parents(p: usize, seed: u64) -> Vec<Option<usize>> {
    let mut rng = substream(seed, u64::MAX);
    (0..p)
        .map(|j| if j == 0 { None } else { Some(rng.gen_range(0..j)) })
        .collect()
}

pub fn simulate_case(case_id: u8, n: usize, seed: u64) -> Result<SimulationOutput> {
    simulate_from_matrix(&case_coefficients(case_id)?, n, 2.0, seed)
}

/// `n` replicates of `A ∘ Z` with i.i.d. Fréchet(α) factors `Z`, together
/// with the model truth. `A` must be nonnegative with full row rank.
pub fn simulate_from_matrix(
    a: &CoefficientMatrix,
    n: usize,
    alpha: f64,
    seed: u64,
) -> Result<SimulationOutput> {
    check_alpha(alpha)?;
    let truth = TruthRecord::from_coefficients(a, alpha)?;
    let samples = simulate_samples(a, n, alpha, seed)?;
    Ok(SimulationOutput {
        samples,
        truth,
        seed,
    })
}

/// Samples only; `A` may be rank deficient. Row `i` uses substream `i`.
pub fn simulate_samples(
    a: &CoefficientMatrix,
    n: usize,
    alpha: f64,
    seed: u64,
) -> Result<SampleMatrix> {
    check_alpha(alpha)?;
    if n == 0 {
        return Err(Error::InvalidInput("sample size must be at least 1".into()));
    }
    if !a.is_nonnegative() {
        return Err(Error::InvalidInput(
            "simulation needs a nonnegative coefficient matrix".into(),
        ));
    }
    let (p, q) = (a.nrows(), a.ncols());
    let rows: Vec<Vec<f64>> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i);
            let z: Vec<f64> = (0..q)
                .map(|_| frechet_quantile(rng.sample(Open01), alpha))
                .collect();
            let z = PositiveVector::new(z)?;
            Ok(matrix_apply(a, &z)?.values().to_vec())
        })
        .collect::<Result<_>>()?;

    let values = DMatrix::from_fn(n, p, |r, c| rows[r][c]);
    if values.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Numerical("simulated a non-positive value".into()));
    }
    SampleMatrix::with_default_names(values)
}

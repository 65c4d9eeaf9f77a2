//! Structured graph learning under Laplacian spectral constraints.
//!
//! Solves
//!
//! ```text
//! min  −Σ log λ_j + tr(K 𝓛w) + (β/2) ‖𝓛w − U Diag(λ) Uᵀ‖²_F
//! s.t. w ≥ 0,  UᵀU = I,  c₁ ≤ λ_1 ≤ … ≤ λ_{p−k} ≤ c₂
//! ```
//!
//! with `K = Σ̂ + 2α I` by cycling through the three blocks. The ℓ1 penalty
//! on `𝓛w` equals `4 Σ w`, which is what the `2α I` shift contributes.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{EdgeVoteTable, GraphStructure};
use crate::linalg::{require_square, spd_inverse, sym_eigen_ascending};
use crate::tpdm::{ensure_positive_definite, Tpdm};

pub const DEFAULT_C1: f64 = 0.05;
pub const DEFAULT_TOL: f64 = 1e-5;
pub const DEFAULT_MAX_ITER: usize = 500;
pub const W_INNER_ITERS: usize = 50;
/// Eigenvalues below this count as zero.
pub const ZERO_EIG: f64 = 1e-6;
/// β is raised tenfold at most this many times to reach a feasible fit.
const MAX_BETA_PHASES: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralConstraint {
    /// Number of zero eigenvalues (connected components).
    pub components: usize,
    pub lower: f64,
    pub upper: f64,
}

impl SpectralConstraint {
    pub fn new(components: usize, lower: f64, upper: f64) -> Result<Self> {
        if components == 0 {
            return Err(Error::InvalidInput("need at least one zero eigenvalue".into()));
        }
        if !(lower > 0.0) || !(upper >= lower) || !upper.is_finite() {
            return Err(Error::InvalidInput(format!(
                "eigenvalue bounds [{lower}, {upper}] are invalid"
            )));
        }
        Ok(Self {
            components,
            lower,
            upper,
        })
    }

    /// `k = 1`, `c₁ = 0.05`, `c₂ = 10 · λ_max(Σ̂⁻¹)`.
    pub fn default_for(sigma: &Tpdm) -> Result<Self> {
        let q = spd_inverse(&ensure_positive_definite(sigma, None)?.sigma)?;
        let (vals, _) = sym_eigen_ascending(&q);
        let top = vals[vals.len() - 1];
        Self::new(1, DEFAULT_C1, (10.0 * top).max(DEFAULT_C1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SglFit {
    pub weights: DVector<f64>,
    pub q_hat: DMatrix<f64>,
    pub eigvals: DVector<f64>,
    pub eigvecs: DMatrix<f64>,
    pub alpha: f64,
    pub beta: f64,
    /// β of the last phase; larger than `beta` when it had to be raised to
    /// reach a connected graph.
    pub beta_final: f64,
    /// Factor applied to the weights to bring the spectrum into the box (1 if none).
    pub rescale: f64,
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub names: Vec<String>,
}

/// Number of edges of the complete graph on `p` vertices.
pub fn n_edges(p: usize) -> usize {
    p * p.saturating_sub(1) / 2
}

/// Lexicographic index of edge `(i, k)`, `i < k`.
#[inline]
pub fn edge_index(p: usize, i: usize, k: usize) -> usize {
    i * p - i * (i + 1) / 2 + (k - i - 1)
}

fn dim_from_edges(m: usize) -> Result<usize> {
    let p = ((1.0 + (1.0 + 8.0 * m as f64).sqrt()) / 2.0).round() as usize;
    if n_edges(p) != m || p < 2 {
        return Err(Error::Dimension(format!("{m} is not p(p-1)/2 for any p >= 2")));
    }
    Ok(p)
}

fn laplacian_unchecked(w: &DVector<f64>, p: usize) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(p, p);
    for i in 0..p {
        for k in (i + 1)..p {
            let v = w[edge_index(p, i, k)];
            l[(i, k)] = -v;
            l[(k, i)] = -v;
            l[(i, i)] += v;
            l[(k, k)] += v;
        }
    }
    l
}

pub fn laplacian_operator(w: &DVector<f64>) -> Result<DMatrix<f64>> {
    let p = dim_from_edges(w.len())?;
    if let Some(v) = w.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::InvalidInput(format!("edge weight {v} is negative or NaN")));
    }
    Ok(laplacian_unchecked(w, p))
}

/// `(𝓛*M)_{e(i,k)} = M_ii + M_kk − M_ik − M_ki`.
pub fn laplacian_adjoint(m: &DMatrix<f64>) -> Result<DVector<f64>> {
    let p = require_square(m, "matrix")?;
    if p < 2 {
        return Err(Error::Dimension("adjoint needs p >= 2".into()));
    }
    Ok(adjoint_unchecked(m))
}

fn adjoint_unchecked(m: &DMatrix<f64>) -> DVector<f64> {
    let p = m.nrows();
    let mut out = DVector::zeros(n_edges(p));
    for i in 0..p {
        for k in (i + 1)..p {
            out[edge_index(p, i, k)] = m[(i, i)] + m[(k, k)] - m[(i, k)] - m[(k, i)];
        }
    }
    out
}

/// Weighted pool-adjacent-violators: nondecreasing fit to `y` (unit weights).
pub fn isotonic_nondecreasing(y: &[f64]) -> Vec<f64> {
    // (sum, count) blocks
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(y.len());
    for &v in y {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let n = blocks.len();
            let (s1, c1) = blocks[n - 2];
            let (s2, c2) = blocks[n - 1];
            if s1 / c1 as f64 > s2 / c2 as f64 {
                blocks.truncate(n - 2);
                blocks.push((s1 + s2, c1 + c2));
            } else {
                break;
            }
        }
    }
    let mut out = Vec::with_capacity(y.len());
    for (s, c) in blocks {
        out.extend(std::iter::repeat(s / c as f64).take(c));
    }
    out
}

/// Minimizer of `Σ −log λ_j + (β/2)(λ_j − d_j)²` over the ordered box.
///
/// A pooled block's minimizer is `g(mean d)` with increasing
/// `g(x) = (x + √(x² + 4/β))/2`, so pooling on `d` and then mapping is exact;
/// clipping an isotonic solution to a box keeps it optimal.
pub fn lambda_update(d: &[f64], beta: f64, c: &SpectralConstraint) -> Vec<f64> {
    isotonic_nondecreasing(d)
        .into_iter()
        .map(|x| ((x + (x * x + 4.0 / beta).sqrt()) / 2.0).clamp(c.lower, c.upper))
        .collect()
}

fn frob2(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum()
}

fn trace_prod(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// `tr(K𝓛w) + (β/2)‖𝓛w − T‖²` with `T = U Diag(λ) Uᵀ`.
pub fn w_surrogate(w: &DVector<f64>, k: &DMatrix<f64>, target: &DMatrix<f64>, beta: f64) -> f64 {
    let l = laplacian_unchecked(w, k.nrows());
    trace_prod(k, &l) + 0.5 * beta * frob2(&(l - target))
}

/// Projected-gradient steps on the w block with step `1/(2βp)`. Returns the
/// surrogate value before the first step and after each step.
pub fn w_block_update(
    w: &mut DVector<f64>,
    k: &DMatrix<f64>,
    target: &DMatrix<f64>,
    beta: f64,
    iters: usize,
) -> Vec<f64> {
    let mut values = vec![w_surrogate(w, k, target, beta)];
    w_steps(w, k, target, beta, iters, |w| values.push(w_surrogate(w, k, target, beta)));
    values
}

/// The gradient is `𝓛*(K − βT) + β 𝓛*𝓛w`, and `(𝓛*𝓛w)_{ik} = d_i + d_k + 2w_ik`
/// with `d` the weighted degrees, so each step is linear in the edge count.
fn w_steps(
    w: &mut DVector<f64>,
    k: &DMatrix<f64>,
    target: &DMatrix<f64>,
    beta: f64,
    iters: usize,
    mut after_step: impl FnMut(&DVector<f64>),
) {
    let p = k.nrows();
    let step = 1.0 / (2.0 * beta * p as f64);
    let fixed = adjoint_unchecked(&(k - target * beta));
    let mut deg = vec![0.0; p];
    for _ in 0..iters {
        deg.iter_mut().for_each(|d| *d = 0.0);
        for i in 0..p {
            for j in (i + 1)..p {
                let v = w[edge_index(p, i, j)];
                deg[i] += v;
                deg[j] += v;
            }
        }
        let mut moved = false;
        let mut e = 0;
        for i in 0..p {
            for j in (i + 1)..p {
                let old = w[e];
                let grad = fixed[e] + beta * (deg[i] + deg[j] + 2.0 * old);
                let new = (old - step * grad).max(0.0);
                moved |= new != old;
                w[e] = new;
                e += 1;
            }
        }
        after_step(w);
        if !moved {
            break;
        }
    }
}

fn full_objective(
    w: &DVector<f64>,
    k: &DMatrix<f64>,
    u: &DMatrix<f64>,
    lam: &[f64],
    beta: f64,
) -> f64 {
    let target = u * DMatrix::from_diagonal(&DVector::from_column_slice(lam)) * u.transpose();
    -lam.iter().map(|v| v.ln()).sum::<f64>() + w_surrogate(w, k, &target, beta)
}

/// Eigenvectors of `𝓛w` for the `p − k` largest eigenvalues, ascending.
fn u_update(w: &DVector<f64>, p: usize, k: usize) -> DMatrix<f64> {
    let (_, vecs) = sym_eigen_ascending(&laplacian_unchecked(w, p));
    vecs.columns(k, p - k).into_owned()
}

fn d_of(w: &DVector<f64>, u: &DMatrix<f64>, p: usize) -> Vec<f64> {
    let l = laplacian_unchecked(w, p);
    let lu = &l * u;
    (0..u.ncols()).map(|j| u.column(j).dot(&lu.column(j))).collect()
}

/// Data-driven start: `max(0, 𝓛*(Σ̂⁻¹))` scaled to unit mean.
pub fn initial_weights(sigma: &Tpdm) -> Result<DVector<f64>> {
    let q = spd_inverse(&ensure_positive_definite(sigma, None)?.sigma)?;
    let p = q.nrows();
    let mut w = adjoint_unchecked(&q).map(|v| v.max(0.0) / (2.0 * (p as f64 - 1.0)));
    let mean = w.mean();
    if mean > 0.0 {
        w /= mean;
    } else {
        w.fill(1.0);
    }
    Ok(w)
}

struct Phase {
    w: DVector<f64>,
    iterations: usize,
    converged: bool,
}

fn alternate(
    mut w: DVector<f64>,
    kmat: &DMatrix<f64>,
    beta: f64,
    c: &SpectralConstraint,
    tol: f64,
    max_iter: usize,
    trace: &mut Vec<f64>,
) -> Phase {
    let p = kmat.nrows();
    let mut u = u_update(&w, p, c.components);
    let mut lam = lambda_update(&d_of(&w, &u, p), beta, c);
    trace.push(full_objective(&w, kmat, &u, &lam, beta));
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        let before = w.clone();
        let target = &u * DMatrix::from_diagonal(&DVector::from_column_slice(&lam)) * u.transpose();
        w_steps(&mut w, kmat, &target, beta, W_INNER_ITERS, |_| {});
        u = u_update(&w, p, c.components);
        lam = lambda_update(&d_of(&w, &u, p), beta, c);
        iterations += 1;
        trace.push(full_objective(&w, kmat, &u, &lam, beta));
        let denom = before.norm().max(f64::MIN_POSITIVE);
        if (&w - &before).norm() / denom < tol {
            converged = true;
            break;
        }
    }
    Phase {
        w,
        iterations,
        converged,
    }
}

/// Spectrum check: exactly `k` eigenvalues below [`ZERO_EIG`], the rest in the box.
pub fn spectrum_feasible(q: &DMatrix<f64>, c: &SpectralConstraint) -> bool {
    let (vals, _) = sym_eigen_ascending(q);
    let zeros = vals.iter().filter(|&&v| v < ZERO_EIG).count();
    zeros == c.components
        && vals
            .iter()
            .skip(c.components)
            .all(|&v| v >= c.lower - ZERO_EIG && v <= c.upper + ZERO_EIG)
}

/// Fits one `(α, β)` setting.
///
/// If the converged Laplacian has more than `k` zero eigenvalues, β is
/// raised tenfold and the solver continues from the current weights. A
/// connected Laplacian whose nonzero spectrum falls outside `[c₁, c₂]` is
/// rescaled into the box when its spread allows. Settings that cannot be made
/// feasible return an error.
pub fn sgl_fit(
    sigma: &Tpdm,
    alpha: f64,
    beta: f64,
    constraint: &SpectralConstraint,
    tol: f64,
    max_iter: usize,
) -> Result<SglFit> {
    let p = require_square(&sigma.sigma, "TPDM")?;
    if p < 2 {
        return Err(Error::InvalidInput("structured graph learning needs p >= 2".into()));
    }
    if constraint.components >= p {
        return Err(Error::InvalidInput(format!(
            "{} zero eigenvalues requested for p = {p}",
            constraint.components
        )));
    }
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidInput(format!("alpha must be nonnegative, got {alpha}")));
    }
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::InvalidInput(format!("beta must be positive, got {beta}")));
    }
    if !(tol > 0.0) || max_iter == 0 {
        return Err(Error::InvalidInput("tol must be positive and max_iter at least 1".into()));
    }
    let kmat = &sigma.sigma + DMatrix::identity(p, p) * (2.0 * alpha);
    let mut w = initial_weights(sigma)?;
    let mut trace = Vec::new();
    let mut beta_cur = beta;
    let mut iterations = 0;
    let c = constraint;

    for _phase in 0..=MAX_BETA_PHASES {
        let ph = alternate(w, &kmat, beta_cur, c, tol, max_iter, &mut trace);
        iterations += ph.iterations;
        w = ph.w;
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite weights at alpha = {alpha}, beta = {beta_cur}"
            )));
        }
        let (vals, _) = sym_eigen_ascending(&laplacian_unchecked(&w, p));
        let zeros = vals.iter().filter(|&&v| v < ZERO_EIG).count();
        if zeros == c.components {
            let nz_min = vals[c.components];
            let nz_max = vals[p - 1];
            let mut rescale = 1.0;
            if nz_min < c.lower - ZERO_EIG || nz_max > c.upper + ZERO_EIG {
                if nz_max / nz_min <= c.upper / c.lower {
                    rescale = if nz_min < c.lower {
                        c.lower / nz_min
                    } else {
                        c.upper / nz_max
                    };
                } else {
                    beta_cur *= 10.0;
                    continue;
                }
            }
            if rescale != 1.0 {
                w *= rescale;
            }
            let q_hat = laplacian_unchecked(&w, p);
            let (eigvals, eigvecs) = sym_eigen_ascending(&q_hat);
            return Ok(SglFit {
                eigvals: eigvals.rows(c.components, p - c.components).into_owned(),
                eigvecs: eigvecs.columns(c.components, p - c.components).into_owned(),
                weights: w,
                q_hat,
                alpha,
                beta,
                beta_final: beta_cur,
                rescale,
                objective_trace: trace,
                iterations,
                converged: ph.converged,
                names: sigma.names.clone(),
            });
        }
        beta_cur *= 10.0;
    }
    Err(Error::Numerical(format!(
        "no feasible Laplacian at alpha = {alpha}, beta = {beta} (raised to {beta_cur})"
    )))
}

/// Edges with weight above `1e-6 · max diag(q_hat)`.
pub fn default_edge_tol(fit: &SglFit) -> f64 {
    1e-6 * fit.q_hat.diagonal().max()
}

pub fn sgl_edge_set(fit: &SglFit, tol: f64) -> Result<GraphStructure> {
    let p = fit.q_hat.nrows();
    let edges: Vec<(usize, usize)> = crate::graph::all_pairs(p)
        .into_iter()
        .filter(|&(i, k)| fit.weights[edge_index(p, i, k)] > tol)
        .collect();
    let weights = edges
        .iter()
        .map(|&(i, k)| ((i, k), fit.weights[edge_index(p, i, k)]))
        .collect();
    let mut g = GraphStructure::new(fit.names.clone(), edges)?;
    g.weights = Some(weights);
    Ok(g)
}

/// `count` values log-spaced on `[lo, hi]`, ascending.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let mut v = crate::linalg::log_spaced_desc(hi, lo, count);
    v.reverse();
    v
}

/// Default α values: 0 followed by `count − 1` log-spaced values on `[1e-4, 1]`.
pub fn default_alphas(count: usize) -> Vec<f64> {
    let mut v = vec![0.0];
    if count > 1 {
        v.extend(log_grid(1e-4, 1.0, count - 1));
    }
    v
}

/// Default β values: `count` log-spaced values on `[1e-1, 1e3]`.
pub fn default_betas(count: usize) -> Vec<f64> {
    log_grid(1e-1, 1e3, count)
}

#[derive(Debug, Clone)]
pub struct SglGrid {
    /// `(α, β)` of each successful fit, α-major order.
    pub settings: Vec<(f64, f64)>,
    pub fits: Vec<SglFit>,
    pub graphs: Vec<GraphStructure>,
    pub failures: Vec<((f64, f64), String)>,
    pub votes: EdgeVoteTable,
}

pub fn sgl_grid(
    sigma: &Tpdm,
    alphas: &[f64],
    betas: &[f64],
    constraint: &SpectralConstraint,
    tol: f64,
    max_iter: usize,
) -> Result<SglGrid> {
    if alphas.is_empty() || betas.is_empty() {
        return Err(Error::InvalidInput("alpha and beta grids must be nonempty".into()));
    }
    let settings: Vec<(f64, f64)> = alphas
        .iter()
        .flat_map(|&a| betas.iter().map(move |&b| (a, b)))
        .collect();
    let results: Vec<Result<(SglFit, GraphStructure)>> = settings
        .par_iter()
        .map(|&(a, b)| {
            let fit = sgl_fit(sigma, a, b, constraint, tol, max_iter)?;
            let g = sgl_edge_set(&fit, default_edge_tol(&fit))?;
            Ok((fit, g))
        })
        .collect();
    let mut out_settings = Vec::new();
    let mut fits = Vec::new();
    let mut graphs = Vec::new();
    let mut failures = Vec::new();
    for (s, r) in settings.into_iter().zip(results) {
        match r {
            Ok((f, g)) => {
                out_settings.push(s);
                fits.push(f);
                graphs.push(g);
            }
            Err(e) => {
                log::warn!("SGL failed at alpha = {}, beta = {}: {e}", s.0, s.1);
                failures.push((s, e.to_string()));
            }
        }
    }
    if graphs.is_empty() {
        return Err(Error::Numerical("every SGL setting failed".into()));
    }
    let votes = EdgeVoteTable::from_graphs(&graphs, failures.len())?;
    Ok(SglGrid {
        settings: out_settings,
        fits,
        graphs,
        failures,
        votes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn operator_examples() {
        let l = laplacian_operator(&DVector::from_vec(vec![1.0])).unwrap();
        assert_eq!(l, DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
        assert_eq!(laplacian_operator(&DVector::zeros(6)).unwrap(), DMatrix::zeros(4, 4));
        let tri = laplacian_operator(&DVector::from_vec(vec![1.0, 1.0, 1.0])).unwrap();
        let (vals, _) = sym_eigen_ascending(&tri);
        assert!(vals[0].abs() < 1e-12);
        assert!((vals[1] - 3.0).abs() < 1e-12 && (vals[2] - 3.0).abs() < 1e-12);
        assert!(laplacian_operator(&DVector::from_vec(vec![-1.0])).is_err());
        assert!(laplacian_operator(&DVector::zeros(4)).is_err());
    }

    #[test]
    fn adjoint_examples() {
        let a = laplacian_adjoint(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(a.as_slice(), &[2.0, 2.0, 2.0]);
        let l = laplacian_operator(&DVector::from_vec(vec![1.0])).unwrap();
        assert_eq!(laplacian_adjoint(&l).unwrap().as_slice(), &[4.0]);
    }

    #[test]
    fn edge_index_is_lexicographic() {
        let p = 5;
        let mut expect = 0;
        for i in 0..p {
            for k in (i + 1)..p {
                assert_eq!(edge_index(p, i, k), expect);
                expect += 1;
            }
        }
    }

    #[test]
    fn isotonic_pools_violators() {
        assert_eq!(isotonic_nondecreasing(&[1.0, 3.0, 2.0, 4.0]), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(isotonic_nondecreasing(&[3.0, 2.0, 1.0]), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn lambda_update_is_clipped_and_sorted() {
        let c = SpectralConstraint::new(1, 0.5, 2.0).unwrap();
        let v = lambda_update(&[3.0, 0.0, 1.0], 1e6, &c);
        assert!(v.windows(2).all(|w| w[0] <= w[1]));
        assert!(v.iter().all(|&x| (0.5..=2.0).contains(&x)));
    }

    fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
        let r = (5f64.sqrt() - 1.0) / 2.0;
        while b - a > 1e-12 {
            let (x1, x2) = (b - r * (b - a), a + r * (b - a));
            if f(x1) < f(x2) {
                b = x2;
            } else {
                a = x1;
            }
        }
        (a + b) / 2.0
    }

    #[test]
    fn two_variable_fit_matches_scalar_minimizer() {
        // With p = 2 the objective is −log λ + w + (β/2)(2w − λ)²; minimize
        // over λ by a nested search, then over w.
        let beta = 10.0;
        let inner = |w: f64| {
            let f = |l: f64| -l.ln() + w + 0.5 * beta * (2.0 * w - l).powi(2);
            f(golden_min(f, 0.1, 10.0))
        };
        let w_star = golden_min(inner, 0.0, 5.0);
        let t = Tpdm::from_matrix(DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0])).unwrap();
        let c = SpectralConstraint::new(1, 0.1, 10.0).unwrap();
        let fit = sgl_fit(&t, 0.0, beta, &c, 1e-12, 5000).unwrap();
        assert!((fit.weights[0] - w_star).abs() < 1e-5, "w = {} vs {w_star}", fit.weights[0]);
        assert_eq!(fit.rescale, 1.0);
        assert_eq!(fit.beta_final, beta);
    }

    #[test]
    fn k_must_be_below_p() {
        let t = Tpdm::from_matrix(DMatrix::identity(3, 3)).unwrap();
        let c = SpectralConstraint::new(3, 0.1, 1.0).unwrap();
        assert!(sgl_fit(&t, 0.0, 1.0, &c, 1e-5, 10).is_err());
    }
}

//! Graphical lasso on a TPDM.
//!
//! Maximizes `log det Θ − tr(Σ̂Θ) − λ Σ_{i≠k} |Θ_ik|` by block coordinate
//! descent on the working matrix `W ≈ Θ⁻¹`: each column is a lasso problem
//! solved by cyclic coordinate descent. The diagonal is not penalized, so
//! `W_ii = Σ̂_ii` throughout.

use nalgebra::{Cholesky, DMatrix};

use crate::error::{Error, Result};
use crate::graph::{EdgeVoteTable, GraphStructure};
use crate::linalg::{log_spaced_desc, require_square, spd_inverse, symmetrize};
use crate::tpdm::Tpdm;

pub const DEFAULT_TOL: f64 = 1e-4;
pub const DEFAULT_MAX_ITER: usize = 200;
pub const DEFAULT_MIN_RATIO: f64 = 1e-3;

const INNER_TOL: f64 = 1e-12;
const INNER_MAX: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct GlassoFit {
    pub q_hat: DMatrix<f64>,
    /// `q_hat⁻¹`.
    pub w_hat: DMatrix<f64>,
    pub lambda: f64,
    pub objective: f64,
    /// Objective after each outer sweep, preceded by its value at the start.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaGrid {
    pub values: Vec<f64>,
    pub lambda_max: f64,
    pub min_ratio: f64,
    /// All off-diagonals were zero; the grid is the single value 0.
    pub degenerate: bool,
}

pub fn lambda_grid(sigma: &Tpdm, m1: usize, min_ratio: f64) -> Result<LambdaGrid> {
    if m1 < 2 {
        return Err(Error::InvalidInput(format!("grid needs at least 2 values, got {m1}")));
    }
    if !(min_ratio > 0.0 && min_ratio < 1.0) {
        return Err(Error::InvalidInput(format!("min_ratio {min_ratio} not in (0, 1)")));
    }
    let s = &sigma.sigma;
    let p = require_square(s, "TPDM")?;
    let lambda_max = (0..p)
        .flat_map(|i| ((i + 1)..p).map(move |k| (i, k)))
        .map(|(i, k)| s[(i, k)].abs())
        .fold(0.0, f64::max);
    if !(lambda_max > 0.0) {
        log::warn!("all off-diagonal TPDM entries are zero; lambda grid is degenerate");
        return Ok(LambdaGrid {
            values: vec![0.0],
            lambda_max: 0.0,
            min_ratio,
            degenerate: true,
        });
    }
    Ok(LambdaGrid {
        values: log_spaced_desc(lambda_max, min_ratio * lambda_max, m1),
        lambda_max,
        min_ratio,
        degenerate: false,
    })
}

/// Working state carried between fits on a path.
#[derive(Debug, Clone)]
struct State {
    w: DMatrix<f64>,
    /// Column `j` holds the lasso coefficients for column `j` (zero at `j`).
    beta: DMatrix<f64>,
}

impl State {
    fn cold(s: &DMatrix<f64>) -> Self {
        let p = s.nrows();
        Self {
            w: s.clone(),
            beta: DMatrix::zeros(p, p),
        }
    }
}

#[inline]
fn soft(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// `Θ` from the current coefficients: `θ_jj = 1/(W_jj − w_jᵀβ_j)`,
/// `θ_lj = −β_lj θ_jj`, then averaged with its transpose.
fn assemble_theta(st: &State) -> DMatrix<f64> {
    let p = st.w.nrows();
    let mut theta = DMatrix::zeros(p, p);
    for j in 0..p {
        let mut dot = 0.0;
        for l in 0..p {
            if l != j {
                dot += st.w[(l, j)] * st.beta[(l, j)];
            }
        }
        let tjj = 1.0 / (st.w[(j, j)] - dot);
        theta[(j, j)] = tjj;
        for l in 0..p {
            if l != j {
                theta[(l, j)] = -st.beta[(l, j)] * tjj;
            }
        }
    }
    symmetrize(&theta)
}

/// The penalized log-likelihood, or `-inf` when `Θ` is not PD.
pub fn objective(s: &DMatrix<f64>, theta: &DMatrix<f64>, lambda: f64) -> f64 {
    let Some(chol) = Cholesky::new(theta.clone()) else {
        return f64::NEG_INFINITY;
    };
    let logdet = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let p = s.nrows();
    let mut trace = 0.0;
    let mut l1 = 0.0;
    for i in 0..p {
        for k in 0..p {
            trace += s[(i, k)] * theta[(k, i)];
            if i != k {
                l1 += theta[(i, k)].abs();
            }
        }
    }
    logdet - trace - lambda * l1
}

/// One lasso solve for column `j`; updates `beta[:, j]` and `W[:, j]`.
fn column_update(st: &mut State, s: &DMatrix<f64>, j: usize, lambda: f64) {
    let p = s.nrows();
    // g = W₁₁ β restricted to l ≠ j
    let mut g = vec![0.0; p];
    for l in 0..p {
        if l == j {
            continue;
        }
        let b = st.beta[(l, j)];
        if b != 0.0 {
            for k in 0..p {
                g[k] += st.w[(k, l)] * b;
            }
        }
    }
    for _ in 0..INNER_MAX {
        let mut max_delta: f64 = 0.0;
        let mut max_beta: f64 = 0.0;
        for k in 0..p {
            if k == j {
                continue;
            }
            let wkk = st.w[(k, k)];
            let old = st.beta[(k, j)];
            let r = s[(k, j)] - (g[k] - wkk * old);
            let new = soft(r, lambda) / wkk;
            let delta = new - old;
            if delta != 0.0 {
                st.beta[(k, j)] = new;
                for l in 0..p {
                    g[l] += st.w[(l, k)] * delta;
                }
            }
            max_delta = max_delta.max(delta.abs() * wkk.sqrt());
            max_beta = max_beta.max(new.abs() * wkk.sqrt());
        }
        if max_delta <= INNER_TOL * (1.0 + max_beta) {
            break;
        }
    }
    for l in 0..p {
        if l != j {
            st.w[(l, j)] = g[l];
            st.w[(j, l)] = g[l];
        }
    }
}

fn check_inputs(sigma: &Tpdm, lambda: f64, tol: f64, max_iter: usize) -> Result<()> {
    require_square(&sigma.sigma, "TPDM")?;
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidInput(format!("lambda must be nonnegative, got {lambda}")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tol must be positive, got {tol}")));
    }
    if max_iter == 0 {
        return Err(Error::InvalidInput("max_iter must be at least 1".into()));
    }
    if Cholesky::new(sigma.sigma.clone()).is_none() {
        return Err(Error::NotPositiveDefinite(
            "TPDM must be positive definite before the graphical lasso".into(),
        ));
    }
    Ok(())
}

fn run(sigma: &Tpdm, lambda: f64, tol: f64, max_iter: usize, st: &mut State) -> Result<GlassoFit> {
    let s = &sigma.sigma;
    let p = s.nrows();
    for i in 0..p {
        st.w[(i, i)] = s[(i, i)];
    }
    let n_off = (p * (p - 1)) as f64;
    let scale = if p > 1 {
        (0..p)
            .flat_map(|i| (0..p).filter(move |&k| k != i).map(move |k| (i, k)))
            .map(|(i, k)| s[(i, k)].abs())
            .sum::<f64>()
            / n_off
    } else {
        0.0
    };

    let mut trace = vec![objective(s, &assemble_theta(st), lambda)];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        let before = st.w.clone();
        for j in 0..p {
            column_update(st, s, j, lambda);
        }
        iterations += 1;
        trace.push(objective(s, &assemble_theta(st), lambda));
        let change = if p > 1 {
            (&st.w - &before).iter().map(|d| d.abs()).sum::<f64>() / n_off
        } else {
            0.0
        };
        if change <= tol * scale {
            converged = true;
            break;
        }
    }

    let theta = assemble_theta(st);
    let q_hat = if Cholesky::new(theta.clone()).is_some() {
        theta
    } else {
        log::warn!("assembled precision not positive definite at lambda = {lambda}; inverting W");
        spd_inverse(&st.w)?
    };
    let w_hat = spd_inverse(&q_hat).map_err(|_| {
        Error::Numerical(format!("glasso estimate is not invertible at lambda = {lambda}"))
    })?;
    if !converged {
        log::warn!("glasso did not converge in {max_iter} sweeps at lambda = {lambda}");
    }
    Ok(GlassoFit {
        objective: objective(s, &q_hat, lambda),
        q_hat,
        w_hat,
        lambda,
        objective_trace: trace,
        iterations,
        converged,
        names: sigma.names.clone(),
    })
}

pub fn glasso_fit(sigma: &Tpdm, lambda: f64, tol: f64, max_iter: usize) -> Result<GlassoFit> {
    check_inputs(sigma, lambda, tol, max_iter)?;
    let mut st = State::cold(&sigma.sigma);
    run(sigma, lambda, tol, max_iter, &mut st)
}

/// Edge tolerance `1e-6 · max diag(q_hat)`.
pub fn default_edge_tol(fit: &GlassoFit) -> f64 {
    1e-6 * fit.q_hat.diagonal().max()
}

pub fn edge_set(fit: &GlassoFit, tol: f64) -> Result<GraphStructure> {
    GraphStructure::from_matrix_support(&fit.q_hat, tol, fit.names.clone())
}

#[derive(Debug, Clone)]
pub struct GlassoPath {
    pub grid: LambdaGrid,
    /// Successful fits, in grid order.
    pub fits: Vec<GlassoFit>,
    pub graphs: Vec<GraphStructure>,
    /// Grid values whose fit failed, with the reason.
    pub failures: Vec<(f64, String)>,
    pub votes: EdgeVoteTable,
}

/// Fits every grid value in order, warm-starting each from the previous
/// successful fit. Edges use [`default_edge_tol`].
pub fn glasso_path(sigma: &Tpdm, grid: &LambdaGrid, tol: f64, max_iter: usize) -> Result<GlassoPath> {
    if grid.values.is_empty() {
        return Err(Error::InvalidInput("empty lambda grid".into()));
    }
    check_inputs(sigma, 0.0, tol, max_iter)?;
    let mut st = State::cold(&sigma.sigma);
    let mut fits = Vec::new();
    let mut graphs = Vec::new();
    let mut failures = Vec::new();
    for &lambda in &grid.values {
        let mut trial = st.clone();
        let outcome = check_inputs(sigma, lambda, tol, max_iter)
            .and_then(|_| run(sigma, lambda, tol, max_iter, &mut trial))
            .and_then(|fit| {
                let g = edge_set(&fit, default_edge_tol(&fit))?;
                Ok((fit, g))
            });
        match outcome {
            Ok((fit, g)) => {
                st = trial;
                fits.push(fit);
                graphs.push(g);
            }
            Err(e) => {
                log::warn!("glasso failed at lambda = {lambda}: {e}");
                failures.push((lambda, e.to_string()));
            }
        }
    }
    if graphs.is_empty() {
        return Err(Error::Numerical("every glasso fit on the path failed".into()));
    }
    let votes = EdgeVoteTable::from_graphs(&graphs, failures.len())?;
    Ok(GlassoPath {
        grid: grid.clone(),
        fits,
        graphs,
        failures,
        votes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;

    fn tpdm(rows: &[f64], p: usize) -> Tpdm {
        Tpdm::from_matrix(DMatrix::from_row_slice(p, p, rows)).unwrap()
    }

    fn case1() -> Tpdm {
        tpdm(&[1., 1., 1., 1., 1., 2., 1., 1., 1., 1., 2., 1., 1., 1., 1., 2.], 4)
    }

    #[test]
    fn grid_example() {
        let t = tpdm(&[2.0, 1.0, 0.5, 1.0, 2.0, 0.2, 0.5, 0.2, 2.0], 3);
        let g = lambda_grid(&t, 3, 0.01).unwrap();
        assert_eq!(g.lambda_max, 1.0);
        assert!((g.values[0] - 1.0).abs() < 1e-15);
        assert!((g.values[1] - 0.1).abs() < 1e-15);
        assert!((g.values[2] - 0.01).abs() < 1e-15);
    }

    #[test]
    fn diagonal_grid_is_degenerate() {
        let g = lambda_grid(&Tpdm::from_matrix(DMatrix::identity(3, 3)).unwrap(), 10, 0.1).unwrap();
        assert!(g.degenerate);
        assert_eq!(g.values, vec![0.0]);
    }

    #[test]
    fn zero_lambda_inverts() {
        let fit = glasso_fit(&case1(), 0.0, 1e-8, 500).unwrap();
        let q = DMatrix::from_row_slice(4, 4, &[
            4., -1., -1., -1., -1., 1., 0., 0., -1., 0., 1., 0., -1., 0., 0., 1.,
        ]);
        assert!(fit.converged);
        assert!(max_abs_diff(&fit.q_hat, &q) < 1e-6, "{}", fit.q_hat);
    }

    #[test]
    fn large_lambda_is_diagonal() {
        let t = case1();
        let fit = glasso_fit(&t, 1.0, 1e-4, 200).unwrap();
        for i in 0..4 {
            for k in 0..4 {
                if i == k {
                    assert!((fit.q_hat[(i, i)] - 1.0 / t.sigma[(i, i)]).abs() < 1e-15);
                } else {
                    assert_eq!(fit.q_hat[(i, k)], 0.0);
                }
            }
        }
    }

    #[test]
    fn true_precision_gives_star() {
        let q = DMatrix::from_row_slice(4, 4, &[
            4., -1., -1., -1., -1., 1., 0., 0., -1., 0., 1., 0., -1., 0., 0., 1.,
        ]);
        let fit = GlassoFit {
            w_hat: spd_inverse(&q).unwrap(),
            q_hat: q,
            lambda: 0.0,
            objective: 0.0,
            objective_trace: vec![],
            iterations: 0,
            converged: true,
            names: crate::sample::default_names(4),
        };
        let g = edge_set(&fit, 1e-9).unwrap();
        assert_eq!(g.edges.into_iter().collect::<Vec<_>>(), vec![(0, 1), (0, 2), (0, 3)]);
        assert_eq!(edge_set(&fit, 2.0).unwrap().edge_count(), 0);
    }

    #[test]
    fn rejects_indefinite_input() {
        let mut t = case1();
        t.sigma[(0, 1)] = 3.0;
        t.sigma[(1, 0)] = 3.0;
        assert!(matches!(glasso_fit(&t, 0.1, 1e-4, 10), Err(Error::NotPositiveDefinite(_))));
    }

    #[test]
    fn path_votes_limits() {
        let t = case1();
        let high = LambdaGrid {
            values: vec![2.0, 1.5],
            lambda_max: 1.0,
            min_ratio: 0.5,
            degenerate: false,
        };
        let path = glasso_path(&t, &high, 1e-4, 200).unwrap();
        assert!(path.votes.votes.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn warm_path_matches_cold_fits() {
        let t = tpdm(&[
            2.0, 0.9, 0.4, 0.3, 0.9, 1.5, 0.5, 0.2, 0.4, 0.5, 1.8, 0.7, 0.3, 0.2, 0.7, 1.2,
        ], 4);
        let grid = lambda_grid(&t, 12, 0.01).unwrap();
        let path = glasso_path(&t, &grid, 1e-6, 500).unwrap();
        for fit in &path.fits {
            let cold = glasso_fit(&t, fit.lambda, 1e-6, 500).unwrap();
            assert!(max_abs_diff(&fit.q_hat, &cold.q_hat) < 1e-4);
        }
    }
}

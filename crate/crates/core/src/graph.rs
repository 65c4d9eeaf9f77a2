use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub type Edge = (usize, usize);

/// Undirected graph over named vertices; edges are stored as `(i, k)` with `i < k`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphStructure {
    pub vertices: Vec<String>,
    pub edges: BTreeSet<Edge>,
    pub weights: Option<BTreeMap<Edge, f64>>,
    pub votes: Option<BTreeMap<Edge, f64>>,
}

/// Orders a pair as `(min, max)`.
pub fn canonical(i: usize, k: usize) -> Edge {
    (i.min(k), i.max(k))
}

/// All `(i, k)` with `i < k < p`, in lexicographic order.
pub fn all_pairs(p: usize) -> Vec<Edge> {
    (0..p).flat_map(|i| ((i + 1)..p).map(move |k| (i, k))).collect()
}

impl GraphStructure {
    pub fn new(vertices: Vec<String>, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        let p = vertices.len();
        let mut set = BTreeSet::new();
        for (i, k) in edges {
            if i == k {
                return Err(Error::InvalidInput(format!("self-loop at vertex {i}")));
            }
            if i >= p || k >= p {
                return Err(Error::InvalidInput(format!(
                    "edge ({i}, {k}) out of range for {p} vertices"
                )));
            }
            set.insert(canonical(i, k));
        }
        Ok(Self {
            vertices,
            edges: set,
            weights: None,
            votes: None,
        })
    }

    pub fn empty(vertices: Vec<String>) -> Self {
        Self {
            vertices,
            edges: BTreeSet::new(),
            weights: None,
            votes: None,
        }
    }

    /// Edges where `|q[i,k]| > tol`, weighted by `q[i,k]`.
    pub fn from_matrix_support(q: &DMatrix<f64>, tol: f64, vertices: Vec<String>) -> Result<Self> {
        let p = q.nrows();
        if q.ncols() != p || vertices.len() != p {
            return Err(Error::Dimension(format!(
                "{}x{} matrix with {} vertex names",
                q.nrows(),
                q.ncols(),
                vertices.len()
            )));
        }
        let edges: Vec<Edge> = all_pairs(p)
            .into_iter()
            .filter(|&(i, k)| q[(i, k)].abs() > tol)
            .collect();
        let weights = edges.iter().map(|&(i, k)| ((i, k), q[(i, k)])).collect();
        let mut g = Self::new(vertices, edges)?;
        g.weights = Some(weights);
        Ok(g)
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n_vertices()];
        for &(i, k) in &self.edges {
            d[i] += 1;
            d[k] += 1;
        }
        d
    }

    pub fn min_degree(&self) -> usize {
        self.degrees().into_iter().min().unwrap_or(0)
    }

    pub fn contains(&self, i: usize, k: usize) -> bool {
        self.edges.contains(&canonical(i, k))
    }
}

/// Symmetric matrix of selection frequencies with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeVoteTable {
    pub names: Vec<String>,
    pub votes: DMatrix<f64>,
    /// Fits counted in the denominator.
    pub n_fits: usize,
    /// Fits that failed and were left out.
    pub n_failed: usize,
}

impl EdgeVoteTable {
    /// Frequencies over `graphs`; every graph must share the same vertex list.
    pub fn from_graphs(graphs: &[GraphStructure], n_failed: usize) -> Result<Self> {
        let first = graphs
            .first()
            .ok_or_else(|| Error::InvalidInput("no graphs to vote over".into()))?;
        let p = first.n_vertices();
        let mut counts = DMatrix::<f64>::zeros(p, p);
        for g in graphs {
            if g.vertices != first.vertices {
                return Err(Error::InvalidInput("graphs have different vertex sets".into()));
            }
            for &(i, k) in &g.edges {
                counts[(i, k)] += 1.0;
            }
        }
        let n = graphs.len() as f64;
        let votes = DMatrix::from_fn(p, p, |i, k| {
            let (a, b) = canonical(i, k);
            if a == b {
                0.0
            } else {
                counts[(a, b)] / n
            }
        });
        Ok(Self {
            names: first.vertices.clone(),
            votes,
            n_fits: graphs.len(),
            n_failed,
        })
    }

    pub fn dim(&self) -> usize {
        self.votes.nrows()
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.votes[(i, k)]
    }

    /// Pairs sorted by descending vote, ties in lexicographic order.
    pub fn ranked_edges(&self) -> Vec<(Edge, f64)> {
        let mut v: Vec<(Edge, f64)> = all_pairs(self.dim())
            .into_iter()
            .map(|(i, k)| ((i, k), self.votes[(i, k)]))
            .collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        v
    }
}

//! From a family of fitted graphs to one reported network.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{all_pairs, Edge, EdgeVoteTable, GraphStructure};
use crate::lab::substream;
use crate::pipeline::{estimate_network, EstimationConfig};
use crate::sample::SampleMatrix;

/// Tuning values that produced a graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Setting {
    Glasso { lambda: f64 },
    Sgl { alpha: f64, beta: f64 },
}

impl Setting {
    /// Sort key for tie-breaks: larger is preferred.
    fn preference(&self) -> (f64, f64) {
        match *self {
            Setting::Glasso { lambda } => (lambda, 0.0),
            Setting::Sgl { alpha, beta } => (alpha, beta),
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Setting::Glasso { lambda } => write!(f, "lambda={lambda:e}"),
            Setting::Sgl { alpha, beta } => write!(f, "alpha={alpha:e},beta={beta:e}"),
        }
    }
}

pub fn vote_table(graphs: &[GraphStructure]) -> Result<EdgeVoteTable> {
    EdgeVoteTable::from_graphs(graphs, 0)
}

fn vote_map(votes: &EdgeVoteTable, edges: impl Iterator<Item = Edge>) -> BTreeMap<Edge, f64> {
    edges.map(|(i, k)| ((i, k), votes.get(i, k))).collect()
}

/// Adds edges in descending vote order (ties lexicographic) until every
/// vertex has degree at least one.
pub fn soft_connected_select(votes: &EdgeVoteTable) -> Result<GraphStructure> {
    let p = votes.dim();
    if p < 2 {
        return Err(Error::InvalidInput("need at least two vertices".into()));
    }
    for v in 0..p {
        if (0..p).all(|u| u == v || !(votes.get(v, u) > 0.0)) {
            return Err(Error::InvalidInput(format!(
                "vertex {} has no positive vote and cannot be connected",
                votes.names[v]
            )));
        }
    }
    let mut degree = vec![0usize; p];
    let mut isolated = p;
    let mut chosen = Vec::new();
    for ((i, k), v) in votes.ranked_edges() {
        if isolated == 0 || !(v > 0.0) {
            break;
        }
        for x in [i, k] {
            if degree[x] == 0 {
                isolated -= 1;
            }
            degree[x] += 1;
        }
        chosen.push((i, k));
    }
    let mut g = GraphStructure::new(votes.names.clone(), chosen)?;
    g.votes = Some(vote_map(votes, g.edges.iter().copied()));
    Ok(g)
}

/// `(1 − s) · p(p−1)/2`, rounded to 9 decimals to absorb representation error.
pub fn sparsity_target(p: usize, sparsity: f64) -> f64 {
    let raw = (1.0 - sparsity) * (p * p.saturating_sub(1)) as f64 / 2.0;
    (raw * 1e9).round() / 1e9
}

/// The setting whose edge count is closest to the sparsity target. Ties go
/// to the larger α (or λ), then the larger β.
pub fn fixed_sparsity_select(
    results: &[(Setting, GraphStructure)],
    target_sparsity: f64,
) -> Result<(Setting, GraphStructure)> {
    if !(target_sparsity > 0.0 && target_sparsity < 1.0) {
        return Err(Error::InvalidInput(format!(
            "sparsity level {target_sparsity} not in (0, 1)"
        )));
    }
    let first = results
        .first()
        .ok_or_else(|| Error::InvalidInput("no fitted graphs to select from".into()))?;
    let target = sparsity_target(first.1.n_vertices(), target_sparsity);
    let best = results
        .iter()
        .min_by(|a, b| {
            let da = (a.1.edge_count() as f64 - target).abs();
            let db = (b.1.edge_count() as f64 - target).abs();
            let (pa, pb) = (a.0.preference(), b.0.preference());
            da.total_cmp(&db)
                .then(pb.0.total_cmp(&pa.0))
                .then(pb.1.total_cmp(&pa.1))
        })
        .expect("nonempty");
    Ok(best.clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Band {
    Below50,
    From50To70,
    From70To90,
    Above90,
}

impl Band {
    pub fn of(frequency: f64) -> Self {
        if frequency >= 0.9 {
            Band::Above90
        } else if frequency >= 0.7 {
            Band::From70To90
        } else if frequency >= 0.5 {
            Band::From50To70
        } else {
            Band::Below50
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Band::Above90 => ">90",
            Band::From70To90 => "70-90",
            Band::From50To70 => "50-70",
            Band::Below50 => "<50",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapSummary {
    pub replicates: usize,
    /// Replicates that produced a graph; the frequency denominator.
    pub successes: usize,
    pub failures: Vec<(usize, String)>,
    pub frequency: DMatrix<f64>,
    /// Band of every vertex pair.
    pub bands: BTreeMap<Edge, Band>,
    pub seed: u64,
    pub names: Vec<String>,
}

/// Row indices of bootstrap replicate `b`.
pub fn resample_rows(n: usize, seed: u64, b: usize) -> Vec<usize> {
    let mut rng = substream(seed, b as u64);
    (0..n).map(|_| rng.gen_range(0..n)).collect()
}

/// Resamples whole rows `b_count` times, reruns estimation and selection on
/// each replicate, and counts how often each edge is selected.
pub fn bootstrap_graphs(
    data: &SampleMatrix,
    b_count: usize,
    seed: u64,
    config: &EstimationConfig,
) -> Result<BootstrapSummary> {
    if b_count == 0 {
        return Err(Error::InvalidInput("bootstrap needs at least one replicate".into()));
    }
    let n = data.nrows();
    let p = data.ncols();
    let outcomes: Vec<Result<GraphStructure>> = (0..b_count)
        .into_par_iter()
        .map(|b| {
            let rows = resample_rows(n, seed, b);
            estimate_network(&data.select_rows(&rows), config).map(|net| net.selected)
        })
        .collect();

    let mut counts = DMatrix::<f64>::zeros(p, p);
    let mut successes = 0;
    let mut failures = Vec::new();
    for (b, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(g) => {
                successes += 1;
                for &(i, k) in &g.edges {
                    counts[(i, k)] += 1.0;
                    counts[(k, i)] += 1.0;
                }
            }
            Err(e) => {
                log::warn!("bootstrap replicate {b} failed: {e}");
                failures.push((b, e.to_string()));
            }
        }
    }
    if successes == 0 {
        return Err(Error::Numerical("every bootstrap replicate failed".into()));
    }
    let frequency = counts / successes as f64;
    let bands = all_pairs(p)
        .into_iter()
        .map(|(i, k)| ((i, k), Band::of(frequency[(i, k)])))
        .collect();
    Ok(BootstrapSummary {
        replicates: b_count,
        successes,
        failures,
        frequency,
        bands,
        seed,
        names: data.names().to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::default_names;

    fn table(p: usize, entries: &[(usize, usize, f64)]) -> EdgeVoteTable {
        let mut votes = DMatrix::zeros(p, p);
        for &(i, k, v) in entries {
            votes[(i, k)] = v;
            votes[(k, i)] = v;
        }
        EdgeVoteTable {
            names: default_names(p),
            votes,
            n_fits: 1,
            n_failed: 0,
        }
    }

    #[test]
    fn two_graph_votes() {
        let a = GraphStructure::new(default_names(3), [(0, 1)]).unwrap();
        let b = GraphStructure::empty(default_names(3));
        let t = vote_table(&[a, b]).unwrap();
        assert_eq!(t.get(0, 1), 0.5);
        assert_eq!(t.get(1, 0), 0.5);
        assert!(vote_table(&[]).is_err());
        let c = GraphStructure::empty(default_names(4));
        assert!(vote_table(&[GraphStructure::empty(default_names(3)), c]).is_err());
    }

    #[test]
    fn soft_connected_examples() {
        let g = soft_connected_select(&table(2, &[(0, 1, 0.3)])).unwrap();
        assert_eq!(g.edges.iter().copied().collect::<Vec<_>>(), vec![(0, 1)]);

        let star = table(4, &[
            (0, 1, 0.9),
            (0, 2, 0.9),
            (0, 3, 0.9),
            (1, 2, 0.1),
            (1, 3, 0.1),
            (2, 3, 0.1),
        ]);
        let g = soft_connected_select(&star).unwrap();
        assert_eq!(g.edges.iter().copied().collect::<Vec<_>>(), vec![(0, 1), (0, 2), (0, 3)]);

        let err = soft_connected_select(&table(3, &[(0, 1, 0.5)])).unwrap_err();
        assert!(err.to_string().contains("X3"));
    }

    #[test]
    fn sparsity_target_values() {
        assert_eq!(sparsity_target(20, 0.8), 38.0);
        assert_eq!(sparsity_target(4, 0.5), 3.0);
    }

    #[test]
    fn fixed_sparsity_tie_breaks() {
        let names = default_names(4);
        let g2 = GraphStructure::new(names.clone(), [(0, 1), (0, 2)]).unwrap();
        let g4 = GraphStructure::new(names.clone(), [(0, 1), (0, 2), (0, 3), (1, 2)]).unwrap();
        let results = vec![
            (Setting::Sgl { alpha: 0.1, beta: 1.0 }, g4.clone()),
            (Setting::Sgl { alpha: 0.5, beta: 1.0 }, g2.clone()),
        ];
        // target 3: both at distance 1, larger alpha wins
        let (s, _) = fixed_sparsity_select(&results, 0.5).unwrap();
        assert_eq!(s, Setting::Sgl { alpha: 0.5, beta: 1.0 });
        let results = vec![
            (Setting::Sgl { alpha: 0.5, beta: 1.0 }, g4.clone()),
            (Setting::Sgl { alpha: 0.5, beta: 3.0 }, g2.clone()),
        ];
        let (s, _) = fixed_sparsity_select(&results, 0.5).unwrap();
        assert_eq!(s, Setting::Sgl { alpha: 0.5, beta: 3.0 });
        // s close to 1 picks the sparsest
        let empty = GraphStructure::empty(names);
        let results = vec![
            (Setting::Glasso { lambda: 0.1 }, g4),
            (Setting::Glasso { lambda: 0.9 }, empty),
            (Setting::Glasso { lambda: 0.5 }, g2),
        ];
        let (s, g) = fixed_sparsity_select(&results, 0.999).unwrap();
        assert_eq!(s, Setting::Glasso { lambda: 0.9 });
        assert_eq!(g.edge_count(), 0);
        assert!(fixed_sparsity_select(&[], 0.5).is_err());
    }

    #[test]
    fn bands() {
        assert_eq!(Band::of(0.75).label(), "70-90");
        assert_eq!(Band::of(0.9).label(), ">90");
        assert_eq!(Band::of(0.5).label(), "50-70");
        assert_eq!(Band::of(0.4999).label(), "<50");
    }
}

//! Structural node features used by the spreading model.
//!
//! Five raw centralities are computed per node and min-max normalized:
//! degree, eigenvector centrality, PageRank, the average degree seen along
//! short random walks, and the number of second neighbours.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{min_max_normalize, ColumnRange, FeatureMatrix};
use crate::graph::Graph;
use crate::rng::{self, Domain};

pub const FEATURE_NAMES: [&str; 5] = ["degree", "eigenvector", "pagerank", "avg_out_degree", "second_neighbors"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WalkLength {
    /// Length drawn uniformly from `1..=2*mean_length-1`.
    #[default]
    Uniform,
    /// Every walk has exactly `mean_length` steps.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkConfig {
    pub walks_per_node: usize,
    pub mean_length: usize,
    #[serde(default)]
    pub length: WalkLength,
    pub rng_seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            walks_per_node: 10,
            mean_length: 5,
            length: WalkLength::Uniform,
            rng_seed: 0,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.walks_per_node == 0 || self.mean_length == 0 {
            return Err(Error::InvalidConfig(
                "walks_per_node and mean_length must both be at least 1".into(),
            ));
        }
        Ok(())
    }
}

pub fn degree_centrality(g: &Graph) -> Vec<f64> {
    (0..g.node_count()).map(|u| g.degree(u) as f64).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenvectorResult {
    /// Unit L2 norm, nonnegative.
    pub vector: Vec<f64>,
    /// Rayleigh quotient of `vector`.
    pub eigenvalue: f64,
    /// `max |A x - eigenvalue * x|`.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn adjacency_mul(g: &Graph, x: &[f64], out: &mut [f64]) {
    for (u, o) in out.iter_mut().enumerate() {
        *o = g.neighbors(u).iter().map(|&v| x[v]).sum();
    }
}

fn l2_normalize(x: &mut [f64]) {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        x.iter_mut().for_each(|v| *v /= norm);
    }
}

fn rayleigh_residual(g: &Graph, x: &[f64], scratch: &mut [f64]) -> (f64, f64) {
    adjacency_mul(g, x, scratch);
    let num: f64 = x.iter().zip(scratch.iter()).map(|(a, b)| a * b).sum();
    let den: f64 = x.iter().map(|a| a * a).sum();
    let lambda = if den > 0.0 { num / den } else { 0.0 };
    let residual = x
        .iter()
        .zip(scratch.iter())
        .map(|(a, b)| (b - lambda * a).abs())
        .fold(0.0, f64::max);
    (lambda, residual)
}

/// Power iteration on `A + I` from the uniform vector.
///
/// The shift leaves eigenvectors unchanged and removes the sign oscillation
/// that plain iteration on `A` shows on bipartite graphs. Iteration stops
/// once successive unit vectors differ by less than `tol` in max-norm and the
/// eigen-residual is below `10 * tol`.
pub fn eigenvector_centrality(g: &Graph, tol: f64, max_iter: usize) -> EigenvectorResult {
    let n = g.node_count();
    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    let mut next = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        adjacency_mul(g, &x, &mut next);
        next.iter_mut().zip(&x).for_each(|(nx, xv)| *nx += xv);
        l2_normalize(&mut next);
        let change = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        std::mem::swap(&mut x, &mut next);
        if change < tol {
            let (_, residual) = rayleigh_residual(g, &x, &mut scratch);
            if residual < 10.0 * tol {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        log::warn!("eigenvector centrality did not converge in {max_iter} iterations");
    }
    let (eigenvalue, residual) = rayleigh_residual(g, &x, &mut scratch);
    EigenvectorResult {
        vector: x,
        eigenvalue,
        residual,
        iterations,
        converged,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PageRankResult {
    pub scores: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Damped PageRank on the undirected graph. Mass on isolated nodes is
/// redistributed uniformly, so the scores always sum to one.
pub fn pagerank(g: &Graph, damping: f64, tol: f64, max_iter: usize) -> PageRankResult {
    let n = g.node_count();
    let nf = n as f64;
    let mut x = vec![1.0 / nf; n];
    let mut next = vec![0.0; n];
    let mut share = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let mut dangling = 0.0;
        for u in 0..n {
            let d = g.degree(u);
            if d == 0 {
                dangling += x[u];
                share[u] = 0.0;
            } else {
                share[u] = x[u] / d as f64;
            }
        }
        let base = (1.0 - damping) / nf + damping * dangling / nf;
        for (v, nx) in next.iter_mut().enumerate() {
            *nx = base + damping * g.neighbors(v).iter().map(|&u| share[u]).sum::<f64>();
        }
        let change: f64 = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut x, &mut next);
        if change < tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("pagerank did not converge in {max_iter} iterations");
    }
    PageRankResult {
        scores: x,
        iterations,
        converged,
    }
}

/// Mean degree of the nodes visited by `walks_per_node` random walks from each
/// node, excluding the start position. Isolated nodes score zero.
pub fn average_out_degree(g: &Graph, cfg: &WalkConfig) -> Vec<f64> {
    (0..g.node_count())
        .into_par_iter()
        .map(|u| walk_mean_degree(g, u, cfg))
        .collect()
}

fn walk_mean_degree(g: &Graph, start: usize, cfg: &WalkConfig) -> f64 {
    if g.degree(start) == 0 {
        return 0.0;
    }
    let mut rng = rng::stream(cfg.rng_seed, Domain::RandomWalk, start as u64, 0);
    let mut total = 0.0;
    let mut visited = 0usize;
    for _ in 0..cfg.walks_per_node {
        let len = match cfg.length {
            WalkLength::Uniform => rng.gen_range(1..=2 * cfg.mean_length - 1),
            WalkLength::Fixed => cfg.mean_length,
        };
        let mut at = start;
        for _ in 0..len {
            let nbrs = g.neighbors(at);
            if nbrs.is_empty() {
                break;
            }
            at = nbrs[rng.gen_range(0..nbrs.len())];
            total += g.degree(at) as f64;
            visited += 1;
        }
    }
    if visited == 0 {
        0.0
    } else {
        total / visited as f64
    }
}

pub fn second_neighbor_counts(g: &Graph) -> Vec<f64> {
    let n = g.node_count();
    (0..n)
        .into_par_iter()
        .map_init(
            || vec![false; n],
            |seen, u| g.second_neighbor_count_with(u, seen) as f64,
        )
        .collect()
}

/// Raw (unnormalized) centrality columns.
#[derive(Debug, Clone, PartialEq)]
pub struct RawCentralities {
    pub degree: Vec<f64>,
    pub eigenvector: EigenvectorResult,
    pub pagerank: PageRankResult,
    pub avg_out_degree: Vec<f64>,
    pub second_neighbors: Vec<f64>,
}

pub const EIGEN_TOL: f64 = 1e-6;
pub const EIGEN_MAX_ITER: usize = 1000;
pub const PAGERANK_DAMPING: f64 = 0.85;
pub const PAGERANK_TOL: f64 = 1e-6;
pub const PAGERANK_MAX_ITER: usize = 200;

pub fn raw_centralities(g: &Graph, cfg: &WalkConfig) -> Result<RawCentralities> {
    cfg.validate()?;
    let ((eigenvector, pagerank), (avg_out_degree, second_neighbors)) = rayon::join(
        || {
            (
                eigenvector_centrality(g, EIGEN_TOL, EIGEN_MAX_ITER),
                pagerank(g, PAGERANK_DAMPING, PAGERANK_TOL, PAGERANK_MAX_ITER),
            )
        },
        || (average_out_degree(g, cfg), second_neighbor_counts(g)),
    );
    Ok(RawCentralities {
        degree: degree_centrality(g),
        eigenvector,
        pagerank,
        avg_out_degree,
        second_neighbors,
    })
}

/// Diagnostics gathered while building features.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureReport {
    pub constant_columns: Vec<String>,
    pub eigenvector_converged: bool,
    pub pagerank_converged: bool,
}

impl FeatureReport {
    pub fn all_converged(&self) -> bool {
        self.eigenvector_converged && self.pagerank_converged
    }
}

/// The normalized five-column centrality matrix.
pub fn build_features(g: &Graph, cfg: &WalkConfig) -> Result<(FeatureMatrix, FeatureReport)> {
    let raw = raw_centralities(g, cfg)?;
    let mut report = FeatureReport {
        constant_columns: Vec::new(),
        eigenvector_converged: raw.eigenvector.converged,
        pagerank_converged: raw.pagerank.converged,
    };
    let mut columns = [
        raw.degree,
        raw.eigenvector.vector,
        raw.pagerank.scores,
        raw.avg_out_degree,
        raw.second_neighbors,
    ];
    let mut ranges = Vec::with_capacity(columns.len());
    for (name, col) in FEATURE_NAMES.iter().zip(columns.iter_mut()) {
        let (range, constant) = min_max_normalize(col);
        if constant {
            log::warn!("feature `{name}` is constant; normalized to zero");
            report.constant_columns.push(name.to_string());
        }
        ranges.push(range);
    }
    let names: Vec<String> = FEATURE_NAMES.iter().map(|s| s.to_string()).collect();
    let rows = g.node_count();
    let mut values = Vec::with_capacity(rows * names.len());
    for r in 0..rows {
        values.extend(columns.iter().map(|c| c[r]));
    }
    Ok((FeatureMatrix::new(names, rows, values, ranges)?, report))
}

/// `node_count x dims` i.i.d. Unif[0, 1) features named `rand_0..`.
pub fn random_features(node_count: usize, dims: usize, rng_seed: u64) -> Result<FeatureMatrix> {
    if node_count == 0 || dims == 0 {
        return Err(Error::InvalidConfig("random features need at least one row and one column".into()));
    }
    let mut rng = rng::stream(rng_seed, Domain::RandomFeatures, node_count as u64, dims as u64);
    let values: Vec<f64> = (0..node_count * dims).map(|_| rng.gen::<f64>()).collect();
    let names = (0..dims).map(|i| format!("rand_{i}")).collect();
    let ranges = (0..dims)
        .map(|c| {
            let col: Vec<f64> = (0..node_count).map(|r| values[r * dims + c]).collect();
            crate::features::column_range(&col)
        })
        .collect::<Vec<ColumnRange>>();
    FeatureMatrix::new(names, node_count, values, ranges)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn star(leaves: usize) -> Graph {
        let edges: Vec<_> = (1..=leaves).map(|l| (0, l)).collect();
        Graph::from_edges(leaves + 1, &edges).unwrap().0
    }

    fn k3() -> Graph {
        Graph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap().0
    }

    fn p3() -> Graph {
        Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap().0
    }

    #[test]
    fn degrees() {
        assert_eq!(degree_centrality(&star(4)), vec![4.0, 1.0, 1.0, 1.0, 1.0]);
        assert_eq!(degree_centrality(&k3()), vec![2.0; 3]);
    }

    #[test]
    fn eigenvector_small_graphs() {
        let e = eigenvector_centrality(&k3(), 1e-6, 1000);
        assert!(e.converged);
        for v in &e.vector {
            assert!((v - 1.0 / 3f64.sqrt()).abs() < 1e-9);
        }
        let s = eigenvector_centrality(&star(4), 1e-6, 1000);
        assert!(s.vector[0] > s.vector[1]);
        assert!(s.vector[1..].iter().all(|&v| (v - s.vector[1]).abs() < 1e-12));

        let p = eigenvector_centrality(&p3(), 1e-6, 1000);
        assert!(p.converged);
        assert!((p.vector[1] / p.vector[0] - 2f64.sqrt()).abs() < 1e-5);
        assert!(p.residual < 1e-5);
    }

    #[test]
    fn pagerank_small_graphs() {
        let k = pagerank(&k3(), 0.85, 1e-6, 200);
        assert!(k.scores.iter().all(|s| (s - 1.0 / 3.0).abs() < 1e-9));
        let (iso, _) = Graph::from_edges(2, &[]).unwrap();
        let i = pagerank(&iso, 0.85, 1e-6, 200);
        assert_eq!(i.scores, vec![0.5, 0.5]);
        let s = pagerank(&star(4), 0.85, 1e-6, 200);
        assert!(s.scores[0] > s.scores[1]);
        assert!((s.scores.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn walk_feature() {
        let cfg = WalkConfig::default();
        assert_eq!(average_out_degree(&k3(), &cfg), vec![2.0; 3]);
        let (iso, _) = Graph::from_edges(2, &[]).unwrap();
        assert_eq!(average_out_degree(&iso, &cfg), vec![0.0; 2]);
        let one = WalkConfig {
            mean_length: 1,
            ..cfg
        };
        assert_eq!(average_out_degree(&star(4), &one)[0], 1.0);
    }

    #[test]
    fn features_k3_all_constant() {
        let (m, report) = build_features(&k3(), &WalkConfig::default()).unwrap();
        assert_eq!(report.constant_columns.len(), 5);
        assert!((0..3).all(|r| m.row(r).iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn features_endpoints() {
        let (m, _) = build_features(&star(4), &WalkConfig::default()).unwrap();
        let deg = m.column_index("degree").unwrap();
        assert_eq!(m.get(0, deg), 1.0);
        assert!((1..5).all(|r| m.get(r, deg) == 0.0));

        let (m, _) = build_features(&p3(), &WalkConfig::default()).unwrap();
        let ev = m.column_index("eigenvector").unwrap();
        assert_eq!(m.column(ev), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn random_features_shape_and_determinism() {
        let a = random_features(3, 64, 11).unwrap();
        assert_eq!((a.rows(), a.cols()), (3, 64));
        assert_eq!(a.names()[63], "rand_63");
        assert!((0..3).all(|r| a.row(r).iter().all(|&v| (0.0..1.0).contains(&v))));
        assert_eq!(a, random_features(3, 64, 11).unwrap());
        assert_ne!(a, random_features(3, 64, 12).unwrap());
    }

    #[test]
    fn random_features_mean() {
        let m = random_features(1000, 1000, 5).unwrap();
        let mean = (0..1000).flat_map(|r| m.row(r).to_vec()).sum::<f64>() / 1e6;
        assert!((mean - 0.5).abs() < 0.002, "{mean}");
    }
}

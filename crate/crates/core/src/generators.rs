//! Seeded synthetic graph generators, used for tests and as stand-ins when
//! real edge lists are not available.

use rand::Rng;

use crate::error::Result;
use crate::graph::Graph;
use crate::rng::{self, Domain};

/// G(n, p) random graph.
pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> Result<Graph> {
    let mut rng = rng::stream(seed, Domain::Generator, 1, n as u64);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    Ok(Graph::from_edges(n, &edges)?.0)
}

/// Circulant `d`-regular graph (`d` even): node `i` links to `i +- 1..=d/2`.
pub fn ring_lattice(n: usize, d: usize) -> Result<Graph> {
    let mut edges = Vec::new();
    for i in 0..n {
        for k in 1..=d / 2 {
            edges.push((i, (i + k) % n));
        }
    }
    Ok(Graph::from_edges(n, &edges)?.0)
}

/// Preferential-attachment graph with exactly `edges` edges.
///
/// Starts from a clique on `m + 1` nodes; each later node attaches to `m`
/// distinct existing nodes chosen proportionally to degree. Remaining edges
/// (if `edges` exceeds what attachment produced) are added between
/// degree-proportional endpoint pairs. The result is connected.
pub fn preferential_attachment(n: usize, m: usize, edges: usize, seed: u64) -> Result<Graph> {
    let mut rng = rng::stream(seed, Domain::Generator, 2, n as u64);
    let mut list: Vec<(usize, usize)> = Vec::new();
    let mut endpoints: Vec<usize> = Vec::new();
    let mut present = std::collections::HashSet::new();
    let core = (m + 1).min(n);
    for u in 0..core {
        for v in u + 1..core {
            list.push((u, v));
            present.insert((u, v));
            endpoints.extend([u, v]);
        }
    }
    for u in core..n {
        let mut chosen: Vec<usize> = Vec::with_capacity(m);
        while chosen.len() < m.min(u) {
            let v = endpoints[rng.gen_range(0..endpoints.len())];
            if !chosen.contains(&v) {
                chosen.push(v);
            }
        }
        for v in chosen {
            list.push((v, u));
            present.insert((v, u));
            endpoints.extend([u, v]);
        }
    }
    let max_edges = n * (n - 1) / 2;
    let target = edges.min(max_edges);
    while list.len() < target {
        let a = endpoints[rng.gen_range(0..endpoints.len())];
        let b = endpoints[rng.gen_range(0..endpoints.len())];
        let key = (a.min(b), a.max(b));
        if a != b && present.insert(key) {
            list.push(key);
            endpoints.extend([a, b]);
        }
    }
    Ok(Graph::from_edges(n, &list)?.0)
}

/// Preferential attachment where node `i` brings `m_i` edges, `m_i` uniform
/// on `1..=2*mean_m-1`, topped up to exactly `edges` edges as in
/// [`preferential_attachment`]. Unlike the fixed-`m` model this leaves a
/// periphery of degree-one and degree-two nodes, as social networks have.
pub fn variable_attachment(n: usize, mean_m: usize, edges: usize, seed: u64) -> Result<Graph> {
    let mut rng = rng::stream(seed, Domain::Generator, 3, n as u64);
    let mut list: Vec<(usize, usize)> = Vec::new();
    let mut endpoints: Vec<usize> = Vec::new();
    let mut present = std::collections::HashSet::new();
    if n > 1 {
        list.push((0, 1));
        present.insert((0, 1));
        endpoints.extend([0, 1]);
    }
    for u in 2..n {
        let m = rng.gen_range(1..=2 * mean_m.max(1) - 1).min(u);
        let mut chosen: Vec<usize> = Vec::with_capacity(m);
        while chosen.len() < m {
            let v = endpoints[rng.gen_range(0..endpoints.len())];
            if !chosen.contains(&v) {
                chosen.push(v);
            }
        }
        for v in chosen {
            list.push((v, u));
            present.insert((v, u));
            endpoints.extend([u, v]);
        }
    }
    let target = edges.min(n * n.saturating_sub(1) / 2);
    while list.len() < target {
        let a = endpoints[rng.gen_range(0..endpoints.len())];
        let b = endpoints[rng.gen_range(0..endpoints.len())];
        let key = (a.min(b), a.max(b));
        if a != b && present.insert(key) {
            list.push(key);
            endpoints.extend([a, b]);
        }
    }
    Ok(Graph::from_edges(n, &list)?.0)
}

/// A preferential-attachment core plus many small components (isolated
/// nodes, pairs and triangles), cycled in that order.
pub fn fragmented(core_nodes: usize, core_m: usize, core_edges: usize, small_components: usize, seed: u64) -> Result<Graph> {
    let core = preferential_attachment(core_nodes, core_m, core_edges, seed)?;
    let mut edges: Vec<(usize, usize)> = (0..core.node_count())
        .flat_map(|u| core.neighbors(u).iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
        .collect();
    let mut next = core.node_count();
    for c in 0..small_components {
        match c % 3 {
            0 => next += 1,
            1 => {
                edges.push((next, next + 1));
                next += 2;
            }
            _ => {
                edges.extend([(next, next + 1), (next + 1, next + 2), (next, next + 2)]);
                next += 3;
            }
        }
    }
    Ok(Graph::from_edges(next, &edges)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preferential_attachment_shape() {
        let g = preferential_attachment(889, 3, 2914, 1).unwrap();
        let s = g.stats();
        assert_eq!((s.nodes, s.edges, s.components), (889, 2914, 1));
        assert_eq!(g, preferential_attachment(889, 3, 2914, 1).unwrap());
    }

    #[test]
    fn fragmented_components() {
        let g = fragmented(100, 2, 250, 30, 4).unwrap();
        assert_eq!(g.stats().components, 31);
        assert_eq!(g.node_count(), 100 + 10 + 20 + 30);
    }

    #[test]
    fn lattice_is_regular() {
        let g = ring_lattice(12, 4).unwrap();
        assert!((0..12).all(|u| g.degree(u) == 4));
    }
}

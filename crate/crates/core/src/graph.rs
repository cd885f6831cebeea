//! Undirected, unweighted network with dense node ids.
//!
//! Graphs are immutable once built. Edge lists are read as undirected: the
//! pair `u v` and `v u` describe the same edge, self-loops are dropped and
//! duplicates collapsed. Both are counted in an [`IngestReport`].

use std::collections::{HashMap, VecDeque};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How tokens on a data line are separated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Delimiter {
    /// Any run of whitespace and/or commas.
    #[default]
    Auto,
    Char(char),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeListOptions {
    pub delimiter: Delimiter,
    /// Skip the first non-comment line (MatrixMarket size header).
    pub header_skip: bool,
}

/// Counts of records dropped while building a graph.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub lines_read: usize,
    pub self_loops: usize,
    pub duplicate_edges: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    labels: Vec<String>,
    adjacency: Vec<Vec<usize>>,
    component_id: Vec<usize>,
    component_sizes: Vec<usize>,
    edge_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub nodes: usize,
    pub edges: usize,
    pub components: usize,
    pub largest_component_fraction: f64,
}

/// Component labelling of a graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Components {
    /// Per-node label; labels are numbered in order of each component's lowest node id.
    pub labels: Vec<usize>,
    pub sizes: Vec<usize>,
}

impl Components {
    /// Label of the largest component (lowest label on ties), `None` for an empty graph.
    pub fn largest(&self) -> Option<usize> {
        let max = *self.sizes.iter().max()?;
        self.sizes.iter().position(|&s| s == max)
    }
}

/// Breadth-first component labelling over an adjacency list.
pub fn connected_components(adjacency: &[Vec<usize>]) -> Components {
    let n = adjacency.len();
    let mut labels = vec![usize::MAX; n];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..n {
        if labels[start] != usize::MAX {
            continue;
        }
        let label = sizes.len();
        labels[start] = label;
        queue.push_back(start);
        let mut size = 0;
        while let Some(u) = queue.pop_front() {
            size += 1;
            for &v in &adjacency[u] {
                if labels[v] == usize::MAX {
                    labels[v] = label;
                    queue.push_back(v);
                }
            }
        }
        sizes.push(size);
    }
    Components { labels, sizes }
}

impl Graph {
    /// Builds a graph over nodes `0..node_count` labelled by their decimal id.
    pub fn from_edges(node_count: usize, edges: &[(usize, usize)]) -> Result<(Self, IngestReport)> {
        let labels = (0..node_count).map(|i| i.to_string()).collect();
        Self::from_labeled_edges(labels, edges)
    }

    /// Builds a graph from explicit labels and an edge list over dense ids.
    pub fn from_labeled_edges(
        labels: Vec<String>,
        edges: &[(usize, usize)],
    ) -> Result<(Self, IngestReport)> {
        let node_count = labels.len();
        if node_count == 0 {
            return Err(Error::EmptyGraph);
        }
        let mut report = IngestReport {
            lines_read: edges.len(),
            ..Default::default()
        };
        let mut adjacency = vec![Vec::new(); node_count];
        for &(u, v) in edges {
            for node in [u, v] {
                if node >= node_count {
                    return Err(Error::NodeOutOfRange { node, node_count });
                }
            }
            if u == v {
                report.self_loops += 1;
                continue;
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        let mut endpoint_dups = 0;
        for list in &mut adjacency {
            list.sort_unstable();
            let before = list.len();
            list.dedup();
            endpoint_dups += before - list.len();
        }
        // each duplicate edge was removed from both endpoint lists
        report.duplicate_edges = endpoint_dups / 2;
        let edge_count = adjacency.iter().map(Vec::len).sum::<usize>() / 2;
        let components = connected_components(&adjacency);
        if report.self_loops > 0 || report.duplicate_edges > 0 {
            log::warn!(
                "dropped {} self-loop(s) and {} duplicate edge(s)",
                report.self_loops,
                report.duplicate_edges
            );
        }
        Ok((
            Graph {
                labels,
                adjacency,
                component_id: components.labels,
                component_sizes: components.sizes,
                edge_count,
            },
            report,
        ))
    }

    /// Reads an edge list from `path`.
    ///
    /// Lines starting with `%` or `#` are comments. Each data line must have at
    /// least two tokens; tokens after the second (weights, timestamps) are ignored.
    /// Node ids are assigned densely in first-appearance order.
    pub fn load_edge_list(path: impl AsRef<Path>, opts: EdgeListOptions) -> Result<(Self, IngestReport)> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_edge_list(BufReader::new(file), path, opts)
    }

    /// Parses an edge list from any buffered reader; `origin` is used in error messages.
    pub fn read_edge_list<R: BufRead>(
        reader: R,
        origin: &Path,
        opts: EdgeListOptions,
    ) -> Result<(Self, IngestReport)> {
        let mut ids: HashMap<String, usize> = HashMap::new();
        let mut labels: Vec<String> = Vec::new();
        let mut edges = Vec::new();
        let mut header_pending = opts.header_skip;
        let mut id_of = |token: &str, labels: &mut Vec<String>| -> usize {
            if let Some(&id) = ids.get(token) {
                return id;
            }
            let id = labels.len();
            ids.insert(token.to_owned(), id);
            labels.push(token.to_owned());
            id
        };
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|e| Error::io(origin, e))?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('%') || trimmed.starts_with('#') {
                continue;
            }
            if header_pending {
                header_pending = false;
                continue;
            }
            let tokens: Vec<&str> = match opts.delimiter {
                Delimiter::Auto => trimmed
                    .split(|c: char| c.is_whitespace() || c == ',')
                    .filter(|t| !t.is_empty())
                    .collect(),
                Delimiter::Char(c) => trimmed.split(c).map(str::trim).filter(|t| !t.is_empty()).collect(),
            };
            if tokens.len() < 2 {
                return Err(Error::Parse {
                    path: origin.to_path_buf(),
                    line: line_no,
                    message: format!("expected two node identifiers, found {:?}", trimmed),
                });
            }
            let u = id_of(tokens[0], &mut labels);
            let v = id_of(tokens[1], &mut labels);
            edges.push((u, v));
        }
        if labels.is_empty() {
            return Err(Error::EmptyGraph);
        }
        Self::from_labeled_edges(labels, &edges)
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Sorted, deduplicated neighbours of `u`.
    #[inline]
    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.adjacency[u]
    }

    #[inline]
    pub fn degree(&self, u: usize) -> usize {
        self.adjacency[u].len()
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }

    pub fn label(&self, u: usize) -> &str {
        &self.labels[u]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn component_of(&self, u: usize) -> usize {
        self.component_id[u]
    }

    pub fn component_ids(&self) -> &[usize] {
        &self.component_id
    }

    pub fn component_sizes(&self) -> &[usize] {
        &self.component_sizes
    }

    pub fn components(&self) -> Components {
        Components {
            labels: self.component_id.clone(),
            sizes: self.component_sizes.clone(),
        }
    }

    /// Nodes of the largest connected component, ascending.
    pub fn largest_component_nodes(&self) -> Vec<usize> {
        let Some(label) = self.components().largest() else {
            return Vec::new();
        };
        (0..self.node_count())
            .filter(|&u| self.component_id[u] == label)
            .collect()
    }

    pub fn stats(&self) -> GraphStats {
        let largest = self.component_sizes.iter().copied().max().unwrap_or(0);
        GraphStats {
            nodes: self.node_count(),
            edges: self.edge_count,
            components: self.component_sizes.len(),
            largest_component_fraction: largest as f64 / self.node_count().max(1) as f64,
        }
    }

    fn check_node(&self, u: usize) -> Result<()> {
        if u >= self.node_count() {
            return Err(Error::NodeOutOfRange {
                node: u,
                node_count: self.node_count(),
            });
        }
        Ok(())
    }

    /// Number of distinct nodes `w != u` at the end of some path `u - v - w`.
    ///
    /// Direct neighbours count when they are also reachable in two hops (they
    /// close a triangle with `u`).
    pub fn second_neighbor_count(&self, u: usize) -> Result<usize> {
        self.check_node(u)?;
        let mut seen = vec![false; self.node_count()];
        Ok(self.second_neighbor_count_with(u, &mut seen))
    }

    /// Same as [`Graph::second_neighbor_count`] with a caller-provided scratch
    /// buffer of length `node_count`, which is left all-false on return.
    pub(crate) fn second_neighbor_count_with(&self, u: usize, seen: &mut [bool]) -> usize {
        let mut touched = Vec::new();
        for &v in self.neighbors(u) {
            for &w in self.neighbors(v) {
                if w != u && !seen[w] {
                    seen[w] = true;
                    touched.push(w);
                }
            }
        }
        for &w in &touched {
            seen[w] = false;
        }
        touched.len()
    }

    /// Induced subgraph on `nodes`, keeping original labels. Node `nodes[i]` becomes `i`.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> Result<Graph> {
        let mut remap = vec![usize::MAX; self.node_count()];
        for (i, &u) in nodes.iter().enumerate() {
            self.check_node(u)?;
            remap[u] = i;
        }
        let mut edges = Vec::new();
        for &u in nodes {
            for &v in self.neighbors(u) {
                if u < v && remap[v] != usize::MAX {
                    edges.push((remap[u], remap[v]));
                }
            }
        }
        let labels = nodes.iter().map(|&u| self.labels[u].clone()).collect();
        Ok(Graph::from_labeled_edges(labels, &edges)?.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn parse(text: &str, opts: EdgeListOptions) -> Result<(Graph, IngestReport)> {
        Graph::read_edge_list(Cursor::new(text), Path::new("<test>"), opts)
    }

    #[test]
    fn dedup_and_self_loops() {
        let (g, report) = parse("a b\nb a\na a\n", EdgeListOptions::default()).unwrap();
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edge_count(), 1);
        assert_eq!(report.self_loops, 1);
        assert_eq!(report.duplicate_edges, 1);
        assert_eq!(g.labels(), &["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn comments_header_and_commas() {
        let text = "%%MatrixMarket matrix coordinate pattern symmetric\n% c\n3 3 2\n1,2\n# x\n2 3 17\n";
        let (g, _) = parse(
            text,
            EdgeListOptions {
                header_skip: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.label(0), "1");

        let (g, _) = parse(
            "x;y\ny ; z\n",
            EdgeListOptions {
                delimiter: Delimiter::Char(';'),
                header_skip: false,
            },
        )
        .unwrap();
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn malformed_line_names_line_number() {
        let err = parse("1 2\n\n3\n", EdgeListOptions::default()).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn empty_input() {
        assert!(matches!(
            parse("% nothing\n", EdgeListOptions::default()),
            Err(Error::EmptyGraph)
        ));
    }

    #[test]
    fn components_small() {
        let (g, _) = Graph::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        assert_eq!(g.component_sizes(), &[2, 2]);
        assert_ne!(g.component_of(0), g.component_of(2));
        let (p, _) = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(p.component_sizes(), &[3]);
        assert_eq!(p.stats().largest_component_fraction, 1.0);
    }

    #[test]
    fn second_neighbors_small() {
        let (star, _) = Graph::from_edges(4, &[(0, 1), (0, 2), (0, 3)]).unwrap();
        assert_eq!(star.second_neighbor_count(0).unwrap(), 0);
        assert_eq!(star.second_neighbor_count(1).unwrap(), 2);
        let (tri, _) = Graph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        for u in 0..3 {
            assert_eq!(tri.second_neighbor_count(u).unwrap(), 2);
        }
        assert!(matches!(
            tri.second_neighbor_count(3),
            Err(Error::NodeOutOfRange { node: 3, .. })
        ));
    }

    #[test]
    fn largest_component_view() {
        let (g, _) = Graph::from_edges(5, &[(0, 1), (3, 4), (4, 2)]).unwrap();
        assert_eq!(g.largest_component_nodes(), vec![2, 3, 4]);
        let sub = g.induced_subgraph(&[2, 3, 4]).unwrap();
        assert_eq!(sub.edge_count(), 2);
        assert_eq!(sub.label(0), "2");
    }
}

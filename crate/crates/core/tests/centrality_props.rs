use netspread_core::centrality::{
    average_out_degree, build_features, eigenvector_centrality, pagerank, raw_centralities, WalkConfig, WalkLength,
    EIGEN_MAX_ITER, EIGEN_TOL, FEATURE_NAMES, PAGERANK_DAMPING, PAGERANK_MAX_ITER, PAGERANK_TOL,
};
use netspread_core::features::min_max_normalize;
use netspread_core::generators;
use netspread_core::graph::Graph;
use proptest::prelude::*;

fn dense(g: &Graph) -> Vec<Vec<f64>> {
    let n = g.node_count();
    let mut a = vec![vec![0.0; n]; n];
    for u in 0..n {
        for &v in g.neighbors(u) {
            a[u][v] = 1.0;
        }
    }
    a
}

fn matvec(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

/// Gaussian elimination with partial pivoting.
fn solve(mut m: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        m.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..n {
                m[r][k] -= f * m[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| m[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / m[r][r];
    }
    x
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn test_graph() -> Graph {
    // Connected 30-node random graph with one pendant chain.
    let g = generators::erdos_renyi(28, 0.18, 21).unwrap();
    assert_eq!(g.stats().components, 1);
    let mut edges: Vec<(usize, usize)> = (0..28)
        .flat_map(|u| g.neighbors(u).iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
        .collect();
    edges.extend([(0, 28), (28, 29)]);
    Graph::from_edges(30, &edges).unwrap().0
}

#[test]
fn all_columns_match_independent_computations() {
    let g = test_graph();
    let n = g.node_count();
    let a = dense(&g);
    let cfg = WalkConfig {
        walks_per_node: 40_000,
        mean_length: 3,
        length: WalkLength::Fixed,
        rng_seed: 4,
    };
    let raw = raw_centralities(&g, &cfg).unwrap();

    let deg: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    assert_eq!(raw.degree, deg);

    let mut x = vec![1.0; n];
    for _ in 0..20_000 {
        let mut y = matvec(&a, &x);
        y.iter_mut().zip(&x).for_each(|(yv, xv)| *yv += xv);
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        x = y.into_iter().map(|v| v / norm).collect();
    }
    assert!(max_abs_diff(&raw.eigenvector.vector, &x) < 1e-5);

    let d = PAGERANK_DAMPING;
    let mut m = vec![vec![0.0; n]; n];
    for (u, du) in deg.iter().enumerate() {
        for v in 0..n {
            let transition = if *du == 0.0 { 1.0 / n as f64 } else { a[u][v] / du };
            m[v][u] = f64::from(u8::from(u == v)) - d * transition;
        }
    }
    let pr = solve(m, vec![(1.0 - d) / n as f64; n]);
    assert!(max_abs_diff(&raw.pagerank.scores, &pr) < 1e-5);

    // Expected degree along a 3-step walk: mean over t of (P^t deg)[u].
    let p: Vec<Vec<f64>> = (0..n).map(|u| (0..n).map(|v| a[u][v] / deg[u]).collect()).collect();
    let mut expected = vec![0.0; n];
    let mut step = deg.clone();
    for _ in 0..3 {
        step = matvec(&p, &step);
        expected.iter_mut().zip(&step).for_each(|(e, s)| *e += s / 3.0);
    }
    let max_deg = deg.iter().cloned().fold(0.0, f64::max);
    // Each walk's mean lies in [1, max_deg]; the bound below is over five
    // standard errors for that range.
    let tol = 5.0 * (max_deg / 2.0) / (cfg.walks_per_node as f64).sqrt();
    assert!(max_abs_diff(&raw.avg_out_degree, &expected) < tol);

    let a2: Vec<f64> = (0..n)
        .map(|u| (0..n).filter(|&w| w != u && (0..n).any(|v| a[u][v] * a[v][w] > 0.0)).count() as f64)
        .collect();
    assert_eq!(raw.second_neighbors, a2);

    let (features, report) = build_features(&g, &cfg).unwrap();
    assert_eq!(features.names(), FEATURE_NAMES);
    assert!(report.all_converged());
    assert!(report.constant_columns.is_empty());
}

fn graph_strategy() -> impl Strategy<Value = Graph> {
    (1usize..=40).prop_flat_map(|n| {
        prop::collection::vec((0..n, 0..n), 0..n * 3).prop_map(move |edges| Graph::from_edges(n, &edges).unwrap().0)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn pagerank_is_a_distribution(g in graph_strategy()) {
        let pr = pagerank(&g, PAGERANK_DAMPING, PAGERANK_TOL, PAGERANK_MAX_ITER);
        prop_assert!((pr.scores.iter().sum::<f64>() - 1.0).abs() <= 1e-6);
        prop_assert!(pr.scores.iter().all(|&s| s > 0.0));
    }

    #[test]
    fn converged_eigenvector_has_small_residual(g in graph_strategy()) {
        let ev = eigenvector_centrality(&g, EIGEN_TOL, EIGEN_MAX_ITER);
        if ev.converged {
            let x = &ev.vector;
            let ax = matvec(&dense(&g), x);
            let lambda: f64 = ax.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() / x.iter().map(|v| v * v).sum::<f64>();
            let r = ax.iter().zip(x).map(|(a, b)| (a - lambda * b).abs()).fold(0.0, f64::max);
            prop_assert!(r < 10.0 * EIGEN_TOL);
        }
        prop_assert!(ev.vector.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn min_max_preserves_order(values in prop::collection::vec(-1e6f64..1e6, 1..60)) {
        let mut scaled = values.clone();
        let (_, constant) = min_max_normalize(&mut scaled);
        prop_assert!(scaled.iter().all(|v| (0.0..=1.0).contains(v)));
        for i in 0..values.len() {
            for j in 0..values.len() {
                if values[i] < values[j] {
                    prop_assert!(scaled[i] <= scaled[j]);
                }
            }
        }
        if !constant {
            prop_assert!(scaled.contains(&0.0) && scaled.contains(&1.0));
        }
    }

    #[test]
    fn regular_graphs_have_exact_walk_degree(half in 1usize..6, extra in 1usize..30, seed in any::<u64>()) {
        let d = 2 * half;
        let g = generators::ring_lattice(d + 1 + extra, d).unwrap();
        let cfg = WalkConfig { rng_seed: seed, ..Default::default() };
        prop_assert!(average_out_degree(&g, &cfg).iter().all(|&v| v == d as f64));
    }

    #[test]
    fn features_are_normalized(g in graph_strategy(), seed in any::<u64>()) {
        let cfg = WalkConfig { rng_seed: seed, ..Default::default() };
        let (m, _) = build_features(&g, &cfg).unwrap();
        prop_assert_eq!(m.rows(), g.node_count());
        for c in 0..m.cols() {
            prop_assert!(m.column(c).iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}

#[test]
fn walk_features_independent_of_thread_count() {
    let g = generators::variable_attachment(400, 3, 1200, 2).unwrap();
    let cfg = WalkConfig::default();
    let with = |t| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .unwrap()
            .install(|| build_features(&g, &cfg).unwrap().0)
    };
    assert_eq!(with(1), with(6));
}

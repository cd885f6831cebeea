use netspread_core::gbt::{self, TreeNode};
use netspread_core::metrics::rmse;
use netspread_core::rng::{self, Domain};
use netspread_core::{Error, FeatureMatrix, GbtConfig, GbtModel};
use proptest::prelude::*;
use rand::Rng;

fn dataset(n: usize, d: usize, seed: u64) -> (FeatureMatrix, Vec<f64>) {
    let mut r = rng::stream(seed, Domain::RandomFeatures, 7, 7);
    let cols: Vec<Vec<f64>> = (0..d).map(|_| (0..n).map(|_| r.gen::<f64>()).collect()).collect();
    let y = (0..n).map(|i| (3.0 * cols[0][i]).sin() + 0.2 * r.gen::<f64>()).collect();
    let names = (0..d).map(|j| format!("x{j}")).collect();
    (FeatureMatrix::from_columns(names, cols).unwrap(), y)
}

fn leaf_path(tree: &TreeNode, row: &[f64]) -> (String, f64) {
    let mut path = String::new();
    let mut node = tree;
    loop {
        match node {
            TreeNode::Leaf { weight, .. } => return (path, *weight),
            TreeNode::Split {
                feature_index,
                threshold,
                left,
                right,
                ..
            } => {
                if row[*feature_index] <= *threshold {
                    path.push('L');
                    node = left;
                } else {
                    path.push('R');
                    node = right;
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn training_rmse_never_increases(
        n in 5usize..120,
        d in 1usize..5,
        seed in any::<u64>(),
        depth in 1usize..7,
        lambda in 0.0f64..5.0,
        lr in 0.05f64..=1.0,
    ) {
        let (x, y) = dataset(n, d, seed);
        let cfg = GbtConfig { n_trees: 30, max_depth: depth, lambda_l2: lambda, learning_rate: lr, ..Default::default() };
        let model = gbt::train(&x, &y, &cfg).unwrap();
        let h = &model.training_meta.train_rmse_history;
        prop_assert_eq!(h.len(), 30);
        prop_assert!(h.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(model.trees.iter().all(|t| t.depth() <= depth));
    }

    #[test]
    fn every_leaf_holds_the_closed_form_weight(n in 4usize..80, seed in any::<u64>(), lambda in 0.0f64..3.0) {
        let (x, y) = dataset(n, 3, seed);
        let cfg = GbtConfig { n_trees: 5, max_depth: 3, lambda_l2: lambda, ..Default::default() };
        let model = gbt::train(&x, &y, &cfg).unwrap();
        for (k, tree) in model.trees.iter().enumerate() {
            let before = model.predict_with_trees(&x, k).unwrap();
            let mut sums: std::collections::BTreeMap<String, (f64, f64, f64)> = Default::default();
            for i in 0..n {
                let (path, w) = leaf_path(tree, x.row(i));
                let e = sums.entry(path).or_insert((0.0, 0.0, w));
                e.0 += before[i] - y[i];
                e.1 += 1.0;
            }
            for (g, h, w) in sums.values() {
                let expected = -g / (h + lambda);
                prop_assert!((w - expected).abs() <= 1e-9 * (1.0 + expected.abs()), "{} vs {}", w, expected);
            }
        }
    }

    #[test]
    fn predictions_ignore_column_order(n in 5usize..60, seed in any::<u64>()) {
        let (x, y) = dataset(n, 4, seed);
        let model = gbt::train(&x, &y, &GbtConfig { n_trees: 20, ..Default::default() }).unwrap();
        let shuffled = x.select_columns(&["x2".into(), "x0".into(), "x3".into(), "x1".into()]).unwrap();
        prop_assert_eq!(model.predict(&x).unwrap(), model.predict(&shuffled).unwrap());
    }
}

#[test]
fn training_set_rmse_equals_recorded_rmse() {
    let (x, y) = dataset(150, 3, 4);
    let model = gbt::train(&x, &y, &GbtConfig::default()).unwrap();
    let pred = model.predict(&x).unwrap();
    assert_eq!(rmse(&pred, &y).unwrap(), model.training_meta.final_train_rmse);
    assert_eq!(model.training_meta.n_samples, 150);
}

#[test]
fn file_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let (x, y) = dataset(200, 5, 9);
    let model = gbt::train(&x, &y, &GbtConfig { subsample: 0.8, rng_seed: 3, ..Default::default() }).unwrap();
    let path = dir.path().join("model.json");
    model.save(&path).unwrap();
    let back = GbtModel::load(&path).unwrap();
    assert_eq!(back, model);
    let a = model.predict(&x).unwrap();
    let b = back.predict(&x).unwrap();
    assert!(a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()));
}

#[test]
fn informative_feature_dominates_importance() {
    for seed in 0..20 {
        let mut r = rng::stream(seed, Domain::RandomFeatures, 1, 1);
        let signal: Vec<f64> = (0..300).map(|_| r.gen()).collect();
        let noise: Vec<f64> = (0..300).map(|_| r.gen()).collect();
        let y: Vec<f64> = signal.iter().map(|s| 2.0 * s + 0.05 * r.gen::<f64>()).collect();
        let x = FeatureMatrix::from_columns(vec!["noise".into(), "signal".into()], vec![noise, signal]).unwrap();
        let imp = gbt::train(&x, &y, &GbtConfig::default()).unwrap().feature_importance();
        assert_eq!(imp[0].0, "noise");
        assert!(imp[1].1 > imp[0].1, "seed {seed}: {imp:?}");
    }
}

#[test]
fn tampered_model_is_rejected() {
    let (x, y) = dataset(40, 2, 1);
    let model = gbt::train(&x, &y, &GbtConfig { n_trees: 3, ..Default::default() }).unwrap();
    let text = model.to_json().replace("\"feature\": \"x0\"", "\"feature\": \"ghost\"");
    assert!(text.contains("ghost"));
    match GbtModel::from_json(&text, "m.json".as_ref()) {
        Err(Error::MissingColumn(name)) => assert_eq!(name, "ghost"),
        other => panic!("expected missing column, got {other:?}"),
    }
}

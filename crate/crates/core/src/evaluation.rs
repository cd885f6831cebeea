//! Cross-validation, zero-shot transfer between networks, and export of
//! target distributions.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::centrality::{build_features, random_features, WalkConfig};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::gbt::{self, GbtConfig};
use crate::graph::Graph;
use crate::metrics::{mean_std, shifted_mean};
use crate::rng::{self, Domain};
use crate::sir::{simulation_error, simulation_error_on, SimulationError, SimulationRecord, TargetKind, TargetTable};

pub use crate::metrics::rmse;

/// Regression model fitted inside each fold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regressor {
    Gbt(GbtConfig),
    /// Predicts the mean training target.
    TrainingMean,
}

impl Regressor {
    fn fit_predict(&self, train_x: &FeatureMatrix, train_y: &[f64], test_x: &FeatureMatrix) -> Result<Vec<f64>> {
        match self {
            Regressor::Gbt(cfg) => gbt::train(train_x, train_y, cfg)?.predict(test_x),
            Regressor::TrainingMean => Ok(vec![shifted_mean(train_y); test_x.rows()]),
        }
    }
}

/// Test folds: nodes shuffled by `seed`, cut into `k` near-equal chunks.
pub fn kfold(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 folds, got {k}")));
    }
    if n < k {
        return Err(Error::InvalidConfig(format!("{n} samples cannot fill {k} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, Domain::Folds, n as u64, k as u64));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        folds.push(order[start..start + len].to_vec());
        start += len;
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldScores {
    pub fold_rmse: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

/// k-fold CV of `regressor` on a fixed feature matrix.
pub fn cross_validate_features(
    x: &FeatureMatrix,
    y: &[f64],
    regressor: &Regressor,
    k: usize,
    seed: u64,
) -> Result<FoldScores> {
    if x.rows() != y.len() {
        return Err(Error::Shape(format!("{} feature rows vs {} targets", x.rows(), y.len())));
    }
    let folds = kfold(y.len(), k, seed)?;
    let fold_rmse: Vec<f64> = folds
        .par_iter()
        .map(|test| {
            let mut in_test = vec![false; y.len()];
            test.iter().for_each(|&i| in_test[i] = true);
            let train: Vec<usize> = (0..y.len()).filter(|&i| !in_test[i]).collect();
            let train_y: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let test_y: Vec<f64> = test.iter().map(|&i| y[i]).collect();
            let pred = regressor.fit_predict(&x.select_rows(&train), &train_y, &x.select_rows(test))?;
            rmse(&pred, &test_y)
        })
        .collect::<Result<_>>()?;
    let (mean, std) = mean_std(&fold_rmse);
    Ok(FoldScores { fold_rmse, mean, std })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Hash)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    Caboost,
    RandomBaseline,
}

impl LearnerKind {
    pub fn name(self) -> &'static str {
        match self {
            LearnerKind::Caboost => "caboost",
            LearnerKind::RandomBaseline => "random_baseline",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvSettings {
    pub k: usize,
    pub seed: u64,
    pub gbt: GbtConfig,
    pub walk: WalkConfig,
    pub random_dims: usize,
    /// Evaluate only on nodes of the largest connected component.
    pub largest_component_only: bool,
}

impl Default for CvSettings {
    fn default() -> Self {
        CvSettings {
            k: 5,
            seed: 0,
            gbt: GbtConfig::default(),
            walk: WalkConfig::default(),
            random_dims: 64,
            largest_component_only: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvEntry {
    pub target: TargetKind,
    pub learner: LearnerKind,
    pub scores: FoldScores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub network: String,
    pub folds: usize,
    pub rng_seed: u64,
    pub nodes_evaluated: usize,
    pub entries: Vec<CvEntry>,
    pub simulation_error: Option<SimulationError>,
    pub settings: CvSettings,
}

impl CvReport {
    pub fn entry(&self, target: TargetKind, learner: LearnerKind) -> Option<&CvEntry> {
        self.entries.iter().find(|e| e.target == target && e.learner == learner)
    }

    pub fn mean_rmse(&self, target: TargetKind, learner: LearnerKind) -> Option<f64> {
        self.entry(target, learner).map(|e| e.scores.mean)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "network: {}  folds: {}  seed: {}  nodes: {}",
            self.network, self.folds, self.rng_seed, self.nodes_evaluated
        );
        let _ = writeln!(out, "{:<18} {:>22} {:>22}", "learner", "peak RMSE", "time RMSE");
        for learner in [LearnerKind::Caboost, LearnerKind::RandomBaseline] {
            let cell = |t| {
                self.entry(t, learner)
                    .map(|e| format!("{:.4} (+/- {:.4})", e.scores.mean, e.scores.std))
                    .unwrap_or_else(|| "-".into())
            };
            let _ = writeln!(
                out,
                "{:<18} {:>22} {:>22}",
                learner.name(),
                cell(TargetKind::Peak),
                cell(TargetKind::Time)
            );
        }
        if let Some(e) = self.simulation_error {
            let _ = writeln!(
                out,
                "{:<18} {:>22} {:>22}",
                "simulation_error",
                format!("{:.4}", e.peak),
                format!("{:.4}", e.time)
            );
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("network,target,learner,mean_rmse,std_rmse,folds,fold_rmse\n");
        for e in &self.entries {
            let folds: Vec<String> = e.scores.fold_rmse.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                self.network,
                e.target.name(),
                e.learner.name(),
                e.scores.mean,
                e.scores.std,
                self.folds,
                folds.join(";")
            );
        }
        if let Some(s) = self.simulation_error {
            let _ = writeln!(out, "{},peak,simulation_error,{},0,{},", self.network, s.peak, self.folds);
            let _ = writeln!(out, "{},time,simulation_error,{},0,{},", self.network, s.time, self.folds);
        }
        out
    }
}

/// Rows of the largest connected component, with targets keeping their
/// whole-network normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentView {
    pub nodes: Vec<usize>,
    pub targets: TargetTable,
    pub features: FeatureMatrix,
}

pub fn component_filter(g: &Graph, targets: &TargetTable, features: &FeatureMatrix) -> Result<ComponentView> {
    if targets.node_count() != g.node_count() || features.rows() != g.node_count() {
        return Err(Error::Shape(format!(
            "graph has {} nodes, targets {}, features {}",
            g.node_count(),
            targets.node_count(),
            features.rows()
        )));
    }
    let nodes = g.largest_component_nodes();
    Ok(ComponentView {
        targets: targets.restrict(&nodes),
        features: features.select_rows(&nodes),
        nodes,
    })
}

/// CV of CaBoost and the random baseline on both targets.
///
/// Centrality features are computed once on the full graph; they depend only
/// on structure, so no target information leaks across folds.
pub fn cv_report(
    network: &str,
    g: &Graph,
    targets: &TargetTable,
    records: Option<&[SimulationRecord]>,
    settings: &CvSettings,
) -> Result<CvReport> {
    let (centrality, _) = build_features(g, &settings.walk)?;
    let random = random_features(g.node_count(), settings.random_dims, settings.seed)?;
    let (nodes, targets_eval, centrality, random) = if settings.largest_component_only {
        let view = component_filter(g, targets, &centrality)?;
        let random = random.select_rows(&view.nodes);
        (Some(view.nodes), view.targets, view.features, random)
    } else {
        (None, targets.clone(), centrality, random)
    };
    let regressor = Regressor::Gbt(settings.gbt);
    let mut entries = Vec::new();
    for target in TargetKind::ALL {
        let y = targets_eval.column(target);
        for (learner, x) in [(LearnerKind::Caboost, &centrality), (LearnerKind::RandomBaseline, &random)] {
            let scores = cross_validate_features(x, y, &regressor, settings.k, settings.seed)?;
            entries.push(CvEntry { target, learner, scores });
        }
    }
    let simulation_error = match (records, &nodes) {
        (Some(r), Some(nodes)) => Some(simulation_error_on(r, targets, nodes)?),
        (Some(r), None) => Some(simulation_error(r, targets)?),
        (None, _) => None,
    };
    Ok(CvReport {
        network: network.to_string(),
        folds: settings.k,
        rng_seed: settings.seed,
        nodes_evaluated: targets_eval.node_count(),
        entries,
        simulation_error,
        settings: *settings,
    })
}

/// One network taking part in a transfer experiment.
#[derive(Debug, Clone)]
pub struct TransferInput {
    pub name: String,
    pub targets: TargetTable,
    /// Features normalized on this network alone.
    pub features: FeatureMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferSettings {
    pub k: usize,
    pub seed: u64,
    pub gbt: GbtConfig,
}

/// Rows are training networks, columns test networks. The diagonal holds the
/// test network's own CV RMSE; off-diagonal cells hold the transferred
/// model's RMSE on every node of the test network divided by that diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferMatrix {
    pub target: TargetKind,
    pub names: Vec<String>,
    pub cells: Vec<Vec<f64>>,
    /// Off-diagonal RMSE before division (diagonal: CV RMSE).
    pub raw_rmse: Vec<Vec<f64>>,
    pub baseline: Vec<FoldScores>,
    pub settings: TransferSettings,
}

impl TransferMatrix {
    pub fn ratio(&self, train: usize, test: usize) -> f64 {
        self.cells[train][test]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("train\\test");
        for n in &self.names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for (name, row) in self.names.iter().zip(&self.cells) {
            out.push_str(name);
            for v in row {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn to_text(&self) -> String {
        let width = self.names.iter().map(String::len).max().unwrap_or(0).max(10);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "target: {}  (rows: training network, columns: test network; diagonal: CV RMSE, other cells: RMSE / column baseline)",
            self.target.name()
        );
        let _ = write!(out, "{:<width$}", "");
        for n in &self.names {
            let _ = write!(out, " {n:>width$}");
        }
        out.push('\n');
        for (i, (name, row)) in self.names.iter().zip(&self.cells).enumerate() {
            let _ = write!(out, "{name:<width$}");
            for (j, v) in row.iter().enumerate() {
                let cell = if i == j { format!("{v:.4}") } else { format!("{v:.2}x") };
                let _ = write!(out, " {cell:>width$}");
            }
            out.push('\n');
        }
        out
    }
}

pub fn transfer_evaluate(
    networks: &[TransferInput],
    target: TargetKind,
    settings: &TransferSettings,
) -> Result<TransferMatrix> {
    if networks.len() < 2 {
        return Err(Error::InvalidConfig("transfer needs at least two networks".into()));
    }
    let schema = networks[0].features.names().to_vec();
    for net in &networks[1..] {
        let mut a = schema.clone();
        let mut b = net.features.names().to_vec();
        a.sort();
        b.sort();
        if a != b {
            return Err(Error::Shape(format!(
                "feature schema of `{}` differs from `{}`",
                net.name, networks[0].name
            )));
        }
    }
    let regressor = Regressor::Gbt(settings.gbt);
    let baseline: Vec<FoldScores> = networks
        .par_iter()
        .map(|net| {
            cross_validate_features(&net.features, net.targets.column(target), &regressor, settings.k, settings.seed)
        })
        .collect::<Result<_>>()?;
    let models: Vec<gbt::GbtModel> = networks
        .par_iter()
        .map(|net| gbt::train(&net.features, net.targets.column(target), &settings.gbt))
        .collect::<Result<_>>()?;
    let n = networks.len();
    let raw_rmse: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        Ok(baseline[j].mean)
                    } else {
                        let pred = models[i].predict(&networks[j].features)?;
                        rmse(&pred, networks[j].targets.column(target))
                    }
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let cells = raw_rmse
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(j, &v)| if i == j { v } else { v / baseline[j].mean })
                .collect()
        })
        .collect();
    Ok(TransferMatrix {
        target,
        names: networks.iter().map(|n| n.name.clone()).collect(),
        cells,
        raw_rmse,
        baseline,
        settings: *settings,
    })
}

pub const HISTOGRAM_BINS: usize = 100;

/// Bin of `v` among `HISTOGRAM_BINS` equal bins over `[0, 1]`, with edges
/// `j / HISTOGRAM_BINS`. Values on an edge go to the bin that starts there;
/// `1.0` and above go to the last bin, negatives to the first.
pub fn histogram_bin(v: f64) -> usize {
    let bins = HISTOGRAM_BINS;
    if !(v > 0.0) {
        return 0;
    }
    let edge = |j: usize| j as f64 / bins as f64;
    let mut b = ((v * bins as f64).floor() as usize).min(bins - 1);
    while b + 1 < bins && edge(b + 1) <= v {
        b += 1;
    }
    while b > 0 && edge(b) > v {
        b -= 1;
    }
    b
}

pub fn histogram(values: &[f64]) -> Vec<usize> {
    let mut counts = vec![0; HISTOGRAM_BINS];
    for &v in values {
        counts[histogram_bin(v)] += 1;
    }
    counts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub network: String,
    pub target: TargetKind,
    pub values: Vec<f64>,
    pub counts: Vec<usize>,
}

pub fn export_distributions(tables: &[(String, &TargetTable)]) -> Result<Vec<Distribution>> {
    if tables.is_empty() {
        return Err(Error::InvalidConfig("no target tables to export".into()));
    }
    let mut out = Vec::new();
    for (name, table) in tables {
        for target in TargetKind::ALL {
            let values = table.column(target).to_vec();
            out.push(Distribution {
                network: name.clone(),
                target,
                counts: histogram(&values),
                values,
            });
        }
    }
    Ok(out)
}

/// `network,target,node,value` rows.
pub fn distribution_values_csv(dists: &[Distribution]) -> String {
    let mut out = String::from("network,target,node,value\n");
    for d in dists {
        for (i, v) in d.values.iter().enumerate() {
            let _ = writeln!(out, "{},{},{},{}", d.network, d.target.name(), i, v);
        }
    }
    out
}

/// `network,target,bin,lower,upper,count` rows.
pub fn distribution_histogram_csv(dists: &[Distribution]) -> String {
    let mut out = String::from("network,target,bin,lower,upper,count\n");
    for d in dists {
        for (b, c) in d.counts.iter().enumerate() {
            let lo = b as f64 / HISTOGRAM_BINS as f64;
            let hi = (b + 1) as f64 / HISTOGRAM_BINS as f64;
            let _ = writeln!(out, "{},{},{},{},{},{}", d.network, d.target.name(), b, lo, hi, c);
        }
    }
    out
}

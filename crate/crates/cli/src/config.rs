//! Effective run configuration: defaults, overlaid by an optional JSON file,
//! overlaid by command-line flags.

use std::path::{Path, PathBuf};

use clap::Args;
use netspread_core::centrality::{WalkConfig, WalkLength};
use netspread_core::graph::{Delimiter, EdgeListOptions};
use netspread_core::{GbtConfig, SirParams, TargetKind};
use serde::{Deserialize, Serialize};

use crate::Failure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub networks: Vec<PathBuf>,
    /// Cached target tables, one per network or standalone.
    pub target_files: Vec<PathBuf>,
    /// Display names matching `networks` or `target_files`.
    pub names: Vec<String>,
    pub records: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub delimiter: Option<char>,
    pub header_skip: bool,
    pub sir: SirParams,
    pub walk: WalkConfig,
    pub gbt: GbtConfig,
    pub k_folds: usize,
    pub master_seed: u64,
    pub targets: Vec<TargetKind>,
    pub largest_component: bool,
    pub clamp: bool,
    pub random_features: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            networks: Vec::new(),
            target_files: Vec::new(),
            names: Vec::new(),
            records: None,
            features: None,
            model: None,
            out: None,
            delimiter: None,
            header_skip: false,
            sir: SirParams::default(),
            walk: WalkConfig::default(),
            gbt: GbtConfig::default(),
            k_folds: 5,
            master_seed: 0,
            targets: TargetKind::ALL.to_vec(),
            largest_component: false,
            clamp: false,
            random_features: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Usage(format!("cannot read config file {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("invalid config file {}: {e}", path.display())))
    }

    pub fn edge_list_options(&self) -> EdgeListOptions {
        EdgeListOptions {
            delimiter: self.delimiter.map_or(Delimiter::Auto, Delimiter::Char),
            header_skip: self.header_skip,
        }
    }

    /// Every random stream is keyed by the master seed.
    pub fn propagate_seed(&mut self) {
        self.walk.rng_seed = self.master_seed;
        self.gbt.rng_seed = self.master_seed;
    }

    pub fn validate(&self) -> Result<(), Failure> {
        self.sir.validate()?;
        self.walk.validate()?;
        self.gbt.validate()?;
        if self.k_folds < 2 {
            return Err(Failure::Usage("--folds must be at least 2".into()));
        }
        if self.random_features == Some(0) {
            return Err(Failure::Usage("--random-features must be at least 1".into()));
        }
        let singles = [&self.records, &self.features, &self.model];
        for p in self.networks.iter().chain(&self.target_files).chain(singles.into_iter().flatten()) {
            require_file(p)?;
        }
        Ok(())
    }
}

pub fn require_file(p: &Path) -> Result<(), Failure> {
    if p.is_file() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("input file not found: {}", p.display())))
    }
}

/// Edge-list parsing flags.
#[derive(Debug, Clone, Default, Args)]
pub struct InputArgs {
    /// Token separator (default: whitespace or comma).
    #[arg(long)]
    pub delimiter: Option<char>,
    /// Skip the first non-comment line (MatrixMarket size header).
    #[arg(long)]
    pub header_skip: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SirArgs {
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Simulations per seed node.
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub max_iterations: Option<u64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct WalkArgs {
    /// Random walks per node for the average out-degree feature.
    #[arg(long)]
    pub walks: Option<usize>,
    /// Mean random-walk length.
    #[arg(long)]
    pub walk_length: Option<usize>,
    /// Use walks of exactly --walk-length steps.
    #[arg(long)]
    pub fixed_walk_length: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GbtArgs {
    #[arg(long)]
    pub trees: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub min_child_weight: Option<f64>,
    #[arg(long)]
    pub gamma_split: Option<f64>,
    #[arg(long)]
    pub subsample: Option<f64>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl InputArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if self.delimiter.is_some() {
            cfg.delimiter = self.delimiter;
        }
        cfg.header_skip |= self.header_skip;
    }
}

impl SirArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        set(&mut cfg.sir.beta, self.beta);
        set(&mut cfg.sir.gamma, self.gamma);
        set(&mut cfg.sir.runs_per_node, self.runs);
        set(&mut cfg.sir.max_iterations, self.max_iterations);
    }
}

impl WalkArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        set(&mut cfg.walk.walks_per_node, self.walks);
        set(&mut cfg.walk.mean_length, self.walk_length);
        if self.fixed_walk_length {
            cfg.walk.length = WalkLength::Fixed;
        }
    }
}

impl GbtArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        set(&mut cfg.gbt.n_trees, self.trees);
        set(&mut cfg.gbt.learning_rate, self.learning_rate);
        set(&mut cfg.gbt.max_depth, self.max_depth);
        set(&mut cfg.gbt.lambda_l2, self.lambda);
        set(&mut cfg.gbt.min_child_weight, self.min_child_weight);
        set(&mut cfg.gbt.gamma_split, self.gamma_split);
        set(&mut cfg.gbt.subsample, self.subsample);
    }
}

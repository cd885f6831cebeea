//! `netspread`: simulate epidemics, build node features, train and evaluate
//! spreading predictors from the command line.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use netspread_core::TargetKind;

use config::{GbtArgs, InputArgs, RunConfig, SirArgs, WalkArgs};

#[derive(Debug, Parser)]
#[command(name = "netspread", version, about = "Predict epidemic spreading from network structure")]
struct Cli {
    /// Worker threads (0 = all cores). Does not change any output.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Exit with code 3 when an iterative centrality fails to converge.
    #[arg(long, global = true)]
    strict: bool,
    /// JSON run configuration; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Default, Args)]
struct Common {
    /// Output directory (created if absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed for every random stream.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run SIR simulations from every node and write targets.
    Simulate {
        #[arg(long)]
        network: Option<PathBuf>,
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        sir: SirArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Compute normalized centrality features (or random baseline features).
    Featurize {
        #[arg(long)]
        network: Option<PathBuf>,
        /// Emit this many uniform random columns instead of centralities.
        #[arg(long)]
        random_features: Option<usize>,
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        walk: WalkArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Fit a boosted-tree model on a features file and a targets file.
    Train {
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long)]
        targets: Option<PathBuf>,
        #[arg(long)]
        target: Option<TargetKind>,
        #[command(flatten)]
        gbt: GbtArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Apply a saved model to a features file.
    Predict {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        features: Option<PathBuf>,
        /// Targets file for reporting RMSE.
        #[arg(long)]
        targets: Option<PathBuf>,
        #[arg(long)]
        target: Option<TargetKind>,
        /// Clip predictions to [0, 1].
        #[arg(long)]
        clamp: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Cross-validate the centrality model against the random baseline.
    Cv {
        #[arg(long)]
        network: Option<PathBuf>,
        /// Reuse targets written by `simulate` instead of simulating.
        #[arg(long)]
        targets: Option<PathBuf>,
        /// Simulation records for the simulation-error column.
        #[arg(long)]
        records: Option<PathBuf>,
        #[arg(long = "folds")]
        k_folds: Option<usize>,
        /// Width of the random baseline feature matrix.
        #[arg(long)]
        random_features: Option<usize>,
        /// Evaluate only nodes of the largest connected component.
        #[arg(long)]
        largest_component: bool,
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        sir: SirArgs,
        #[command(flatten)]
        walk: WalkArgs,
        #[command(flatten)]
        gbt: GbtArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Train on each network and test on every other one.
    Transfer {
        #[arg(long, num_args = 1..)]
        networks: Vec<PathBuf>,
        /// Cached targets, one per network in the same order.
        #[arg(long, num_args = 1..)]
        targets: Vec<PathBuf>,
        #[arg(long)]
        target: Option<TargetKind>,
        #[arg(long = "folds")]
        k_folds: Option<usize>,
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        sir: SirArgs,
        #[command(flatten)]
        walk: WalkArgs,
        #[command(flatten)]
        gbt: GbtArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Export target values and 100-bin histograms for plotting.
    ExportDist {
        #[arg(long, num_args = 1..)]
        targets: Vec<PathBuf>,
        /// Names for the target files (default: file or directory name).
        #[arg(long, num_args = 1..)]
        names: Vec<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Print size and connectivity of a network.
    Stats {
        #[arg(long)]
        network: Option<PathBuf>,
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        common: Common,
    },
}

/// Why a command stopped; maps to the process exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(anyhow::Error),
    NotConverged(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::NotConverged(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "{m}"),
            Failure::Data(e) => write!(f, "{e:#}"),
            Failure::NotConverged(m) => write!(f, "{m}"),
        }
    }
}

impl From<netspread_core::Error> for Failure {
    fn from(e: netspread_core::Error) -> Self {
        if e.is_data_error() {
            Failure::Data(e.into())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

/// The resolved command with its effective configuration.
pub struct Job {
    pub kind: JobKind,
    pub config: RunConfig,
    pub strict: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JobKind {
    Simulate,
    Featurize,
    Train,
    Predict,
    Cv,
    Transfer,
    ExportDist,
    Stats,
}

impl JobKind {
    pub fn name(self) -> &'static str {
        match self {
            JobKind::Simulate => "simulate",
            JobKind::Featurize => "featurize",
            JobKind::Train => "train",
            JobKind::Predict => "predict",
            JobKind::Cv => "cv",
            JobKind::Transfer => "transfer",
            JobKind::ExportDist => "export-dist",
            JobKind::Stats => "stats",
        }
    }
}

fn resolve(cli: Cli) -> Result<Job, Failure> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let apply_common = |cfg: &mut RunConfig, c: &Common| {
        if c.out.is_some() {
            cfg.out = c.out.clone();
        }
        if let Some(s) = c.seed {
            cfg.master_seed = s;
        }
    };
    let set_target = |cfg: &mut RunConfig, t: Option<TargetKind>| {
        if let Some(t) = t {
            cfg.targets = vec![t];
        }
    };
    let kind = match cli.command {
        Command::Simulate { network, input, sir, common } => {
            cfg.networks.extend(network);
            input.apply(&mut cfg);
            sir.apply(&mut cfg);
            apply_common(&mut cfg, &common);
            JobKind::Simulate
        }
        Command::Featurize { network, random_features, input, walk, common } => {
            cfg.networks.extend(network);
            if random_features.is_some() {
                cfg.random_features = random_features;
            }
            input.apply(&mut cfg);
            walk.apply(&mut cfg);
            apply_common(&mut cfg, &common);
            JobKind::Featurize
        }
        Command::Train { features, targets, target, gbt, common } => {
            cfg.features = features.or(cfg.features);
            cfg.target_files.extend(targets);
            set_target(&mut cfg, target);
            gbt.apply(&mut cfg);
            apply_common(&mut cfg, &common);
            JobKind::Train
        }
        Command::Predict { model, features, targets, target, clamp, common } => {
            cfg.model = model.or(cfg.model);
            cfg.features = features.or(cfg.features);
            cfg.target_files.extend(targets);
            set_target(&mut cfg, target);
            cfg.clamp |= clamp;
            apply_common(&mut cfg, &common);
            JobKind::Predict
        }
        Command::Cv {
            network,
            targets,
            records,
            k_folds,
            random_features,
            largest_component,
            input,
            sir,
            walk,
            gbt,
            common,
        } => {
            cfg.networks.extend(network);
            cfg.target_files.extend(targets);
            cfg.records = records.or(cfg.records);
            if let Some(k) = k_folds {
                cfg.k_folds = k;
            }
            if random_features.is_some() {
                cfg.random_features = random_features;
            }
            cfg.largest_component |= largest_component;
            input.apply(&mut cfg);
            sir.apply(&mut cfg);
            walk.apply(&mut cfg);
            gbt.apply(&mut cfg);
            apply_common(&mut cfg, &common);
            JobKind::Cv
        }
        Command::Transfer { networks, targets, target, k_folds, input, sir, walk, gbt, common } => {
            if !networks.is_empty() {
                cfg.networks = networks;
            }
            if !targets.is_empty() {
                cfg.target_files = targets;
            }
            set_target(&mut cfg, target);
            if let Some(k) = k_folds {
                cfg.k_folds = k;
            }
            input.apply(&mut cfg);
            sir.apply(&mut cfg);
            walk.apply(&mut cfg);
            gbt.apply(&mut cfg);
            apply_common(&mut cfg, &common);
            JobKind::Transfer
        }
        Command::ExportDist { targets, names, common } => {
            if !targets.is_empty() {
                cfg.target_files = targets;
            }
            if !names.is_empty() {
                cfg.names = names;
            }
            apply_common(&mut cfg, &common);
            JobKind::ExportDist
        }
        Command::Stats { network, input, common } => {
            cfg.networks.extend(network);
            input.apply(&mut cfg);
            apply_common(&mut cfg, &common);
            JobKind::Stats
        }
    };
    cfg.propagate_seed();
    cfg.validate()?;
    Ok(Job {
        kind,
        config: cfg,
        strict: cli.strict,
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let threads = cli.threads;
    let outcome = resolve(cli).and_then(|job| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Failure::Usage(format!("cannot start thread pool: {e}")))?;
        pool.install(|| commands::run(&job))
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use netspread_core::centrality::{build_features, random_features, FeatureReport};
use netspread_core::evaluation::{
    cv_report, distribution_histogram_csv, distribution_values_csv, export_distributions, rmse, CvSettings,
    TransferInput, TransferSettings,
};
use netspread_core::io::{self, feature_sidecar};
use netspread_core::{gbt, sir, Graph, TargetKind, TargetTable};
use serde::Serialize;

use crate::config::RunConfig;
use crate::{Failure, Job, JobKind};

const DEFAULT_RANDOM_DIMS: usize = 64;

pub fn run(job: &Job) -> Result<(), Failure> {
    match job.kind {
        JobKind::Simulate => simulate(job),
        JobKind::Featurize => featurize(job),
        JobKind::Train => train(job),
        JobKind::Predict => predict(job),
        JobKind::Cv => cv(job),
        JobKind::Transfer => transfer(job),
        JobKind::ExportDist => export_dist(job),
        JobKind::Stats => stats(&job.config),
    }
}

#[derive(Serialize)]
struct EffectiveConfig<'a> {
    command: &'static str,
    #[serde(flatten)]
    config: &'a RunConfig,
}

/// Creates the output directory and echoes the effective configuration.
fn prepare_out(job: &Job) -> Result<PathBuf, Failure> {
    let out = job
        .config
        .out
        .clone()
        .ok_or_else(|| Failure::Usage(format!("{} needs --out", job.kind.name())))?;
    fs::create_dir_all(&out).map_err(|e| Failure::Data(anyhow!("cannot create {}: {e}", out.display())))?;
    let echo = EffectiveConfig {
        command: job.kind.name(),
        config: &job.config,
    };
    io::write_json(&out.join("config.json"), &echo)?;
    Ok(out)
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Data(anyhow!("cannot write {}: {e}", path.display())))
}

fn single_network(cfg: &RunConfig, command: &str) -> Result<PathBuf, Failure> {
    match cfg.networks.as_slice() {
        [p] => Ok(p.clone()),
        [] => Err(Failure::Usage(format!("{command} needs --network"))),
        _ => Err(Failure::Usage(format!("{command} takes exactly one network"))),
    }
}

fn single_target(cfg: &RunConfig, command: &str) -> Result<TargetKind, Failure> {
    match cfg.targets.as_slice() {
        [t] => Ok(*t),
        _ => Err(Failure::Usage(format!("{command} needs --target peak|time"))),
    }
}

fn load_graph(cfg: &RunConfig, path: &Path) -> Result<Graph, Failure> {
    let (g, report) = Graph::load_edge_list(path, cfg.edge_list_options())?;
    if report.self_loops > 0 || report.duplicate_edges > 0 {
        log::info!(
            "{}: dropped {} self-loops and {} duplicate edges",
            path.display(),
            report.self_loops,
            report.duplicate_edges
        );
    }
    Ok(g)
}

fn network_name(path: &Path) -> String {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("network");
    if stem == "targets" {
        if let Some(dir) = path.parent().and_then(|p| p.file_name()).and_then(|s| s.to_str()) {
            return dir.to_string();
        }
    }
    stem.to_string()
}

/// Names for `paths`, taken from `cfg.names` when given.
fn names_for(cfg: &RunConfig, paths: &[PathBuf]) -> Result<Vec<String>, Failure> {
    if cfg.names.is_empty() {
        let mut names: Vec<String> = paths.iter().map(|p| network_name(p)).collect();
        for i in 0..names.len() {
            if names[..i].contains(&names[i]) {
                names[i] = format!("{}_{i}", names[i]);
            }
        }
        Ok(names)
    } else if cfg.names.len() == paths.len() {
        Ok(cfg.names.clone())
    } else {
        Err(Failure::Usage(format!("{} names given for {} inputs", cfg.names.len(), paths.len())))
    }
}

fn check_convergence(job: &Job, network: &str, report: &FeatureReport) -> Result<(), Failure> {
    if job.strict && !report.all_converged() {
        return Err(Failure::NotConverged(format!(
            "{network}: centrality iteration did not converge (eigenvector: {}, pagerank: {})",
            report.eigenvector_converged, report.pagerank_converged
        )));
    }
    Ok(())
}

fn check_labels(features: &[String], targets: &TargetTable) -> Result<(), Failure> {
    if features.len() != targets.node_count() {
        return Err(Failure::Data(anyhow!(
            "features have {} rows but targets have {}",
            features.len(),
            targets.node_count()
        )));
    }
    if let Some(i) = (0..features.len()).find(|&i| features[i] != targets.labels[i]) {
        return Err(Failure::Data(anyhow!(
            "row {i}: feature label {:?} does not match target label {:?}",
            features[i],
            targets.labels[i]
        )));
    }
    Ok(())
}

fn simulate(job: &Job) -> Result<(), Failure> {
    let cfg = &job.config;
    let path = single_network(cfg, "simulate")?;
    let out = prepare_out(job)?;
    let g = load_graph(cfg, &path)?;
    let (targets, records) = sir::build_targets(&g, &cfg.sir, cfg.master_seed)?;
    io::write_records(&out.join("simulations.csv"), &records)?;
    io::write_targets(&out.join("targets.csv"), &targets)?;
    let truncated = records.iter().filter(|r| r.truncated).count();
    println!(
        "simulated {} runs on {} nodes ({} truncated); time normalizer {}",
        records.len(),
        g.node_count(),
        truncated,
        targets.time_norm
    );
    Ok(())
}

fn featurize(job: &Job) -> Result<(), Failure> {
    let cfg = &job.config;
    let path = single_network(cfg, "featurize")?;
    let out = prepare_out(job)?;
    let g = load_graph(cfg, &path)?;
    let target = out.join("features.csv");
    if let Some(dims) = cfg.random_features {
        let m = random_features(g.node_count(), dims, cfg.master_seed)?;
        io::write_features(&target, g.labels(), &m, &feature_sidecar(&m, None, Some(cfg.master_seed), &[]))?;
        println!("wrote {} random features for {} nodes", dims, g.node_count());
        return Ok(());
    }
    let (m, report) = build_features(&g, &cfg.walk)?;
    let sidecar = feature_sidecar(&m, Some(cfg.walk), None, &report.constant_columns);
    io::write_features(&target, g.labels(), &m, &sidecar)?;
    println!("wrote {} features for {} nodes", m.cols(), g.node_count());
    check_convergence(job, &network_name(&path), &report)
}

fn required<'a>(p: &'a Option<PathBuf>, flag: &str, command: &str) -> Result<&'a PathBuf, Failure> {
    p.as_ref().ok_or_else(|| Failure::Usage(format!("{command} needs {flag}")))
}

fn single_target_file<'a>(cfg: &'a RunConfig, command: &str) -> Result<Option<&'a PathBuf>, Failure> {
    match cfg.target_files.as_slice() {
        [] => Ok(None),
        [p] => Ok(Some(p)),
        _ => Err(Failure::Usage(format!("{command} takes one targets file"))),
    }
}

fn train(job: &Job) -> Result<(), Failure> {
    let cfg = &job.config;
    let features_path = required(&cfg.features, "--features", "train")?;
    let targets_path = single_target_file(cfg, "train")?.ok_or_else(|| Failure::Usage("train needs --targets".into()))?;
    let kind = single_target(cfg, "train")?;
    let out = prepare_out(job)?;
    let (labels, x) = io::read_features(features_path)?;
    let targets = io::read_targets(targets_path)?;
    check_labels(&labels, &targets)?;
    let model = gbt::train(&x, targets.column(kind), &cfg.gbt)?;
    model.save(out.join("model.json"))?;
    let mut csv = String::from("feature,gain\n");
    for (name, gain) in model.feature_importance() {
        csv.push_str(&format!("{name},{gain}\n"));
    }
    write_text(&out.join("importance.csv"), &csv)?;
    println!("train rmse: {}", model.training_meta.final_train_rmse);
    Ok(())
}

#[derive(Serialize)]
struct PredictMetrics {
    target: TargetKind,
    rmse: f64,
    clamped: bool,
}

fn predict(job: &Job) -> Result<(), Failure> {
    let cfg = &job.config;
    let model_path = required(&cfg.model, "--model", "predict")?;
    let features_path = required(&cfg.features, "--features", "predict")?;
    let targets_path = single_target_file(cfg, "predict")?;
    let kind = match targets_path {
        Some(_) => Some(single_target(cfg, "predict")?),
        None => None,
    };
    let out = prepare_out(job)?;
    let model = gbt::GbtModel::load(model_path)?;
    let (labels, x) = io::read_features(features_path)?;
    let mut pred = model.predict(&x)?;
    if cfg.clamp {
        for p in &mut pred {
            *p = p.clamp(0.0, 1.0);
        }
    }
    let mut csv = String::from("label,prediction\n");
    for (label, p) in labels.iter().zip(&pred) {
        csv.push_str(&format!("{},{p}\n", csv_field(label)));
    }
    write_text(&out.join("predictions.csv"), &csv)?;
    if let (Some(path), Some(kind)) = (targets_path, kind) {
        let targets = io::read_targets(path)?;
        check_labels(&labels, &targets)?;
        let err = rmse(&pred, targets.column(kind))?;
        io::write_json(
            &out.join("metrics.json"),
            &PredictMetrics {
                target: kind,
                rmse: err,
                clamped: cfg.clamp,
            },
        )?;
        println!("rmse: {err}");
    }
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Targets for a network: read from cache when given, otherwise simulated
/// and written to `out` under `prefix`.
fn targets_for(
    cfg: &RunConfig,
    g: &Graph,
    cached: Option<&PathBuf>,
    out: &Path,
    prefix: &str,
) -> Result<(TargetTable, Option<Vec<sir::SimulationRecord>>), Failure> {
    if let Some(path) = cached {
        let t = io::read_targets(path)?;
        if t.labels != g.labels() {
            return Err(Failure::Data(anyhow!(
                "{} does not match the node labels of the network",
                path.display()
            )));
        }
        let records = cfg.records.as_ref().map(|p| io::read_records(p)).transpose()?;
        return Ok((t, records));
    }
    let (t, records) = sir::build_targets(g, &cfg.sir, cfg.master_seed)?;
    io::write_records(&out.join(format!("{prefix}simulations.csv")), &records)?;
    io::write_targets(&out.join(format!("{prefix}targets.csv")), &t)?;
    Ok((t, Some(records)))
}

fn cv(job: &Job) -> Result<(), Failure> {
    let cfg = &job.config;
    let path = single_network(cfg, "cv")?;
    let cached = single_target_file(cfg, "cv")?;
    let out = prepare_out(job)?;
    let g = load_graph(cfg, &path)?;
    let (targets, records) = targets_for(cfg, &g, cached, &out, "")?;
    let settings = CvSettings {
        k: cfg.k_folds,
        seed: cfg.master_seed,
        gbt: cfg.gbt,
        walk: cfg.walk,
        random_dims: cfg.random_features.unwrap_or(DEFAULT_RANDOM_DIMS),
        largest_component_only: cfg.largest_component,
    };
    let name = network_name(&path);
    let report = cv_report(&name, &g, &targets, records.as_deref(), &settings)?;
    let text = report.to_text();
    write_text(&out.join("cv_report.txt"), &text)?;
    write_text(&out.join("cv_report.csv"), &report.to_csv())?;
    io::write_json(&out.join("cv_report.json"), &report)?;
    print!("{text}");
    let (_, feature_report) = build_features(&g, &cfg.walk)?;
    check_convergence(job, &name, &feature_report)
}

fn transfer(job: &Job) -> Result<(), Failure> {
    let cfg = &job.config;
    if cfg.networks.len() < 2 {
        return Err(Failure::Usage("transfer needs at least two --networks".into()));
    }
    if !cfg.target_files.is_empty() && cfg.target_files.len() != cfg.networks.len() {
        return Err(Failure::Usage(format!(
            "{} targets files given for {} networks",
            cfg.target_files.len(),
            cfg.networks.len()
        )));
    }
    let names = names_for(cfg, &cfg.networks)?;
    let out = prepare_out(job)?;
    let mut inputs = Vec::new();
    let mut reports = Vec::new();
    for (i, path) in cfg.networks.iter().enumerate() {
        let g = load_graph(cfg, path)?;
        let prefix = format!("{}_", names[i]);
        let (targets, _) = targets_for(cfg, &g, cfg.target_files.get(i), &out, &prefix)?;
        let (features, report) = build_features(&g, &cfg.walk)?;
        reports.push(report);
        inputs.push(TransferInput {
            name: names[i].clone(),
            targets,
            features,
        });
    }
    let settings = TransferSettings {
        k: cfg.k_folds,
        seed: cfg.master_seed,
        gbt: cfg.gbt,
    };
    for &kind in &cfg.targets {
        let m = netspread_core::evaluation::transfer_evaluate(&inputs, kind, &settings)?;
        let stem = format!("transfer_{}", kind.name());
        write_text(&out.join(format!("{stem}.csv")), &m.to_csv())?;
        write_text(&out.join(format!("{stem}.txt")), &m.to_text())?;
        io::write_json(&out.join(format!("{stem}.json")), &m)?;
        print!("{}", m.to_text());
    }
    for (name, report) in names.iter().zip(&reports) {
        check_convergence(job, name, report)?;
    }
    Ok(())
}

fn export_dist(job: &Job) -> Result<(), Failure> {
    let cfg = &job.config;
    if cfg.target_files.is_empty() {
        return Err(Failure::Usage("export-dist needs --targets".into()));
    }
    let names = names_for(cfg, &cfg.target_files)?;
    let out = prepare_out(job)?;
    let tables = cfg
        .target_files
        .iter()
        .map(|p| io::read_targets(p))
        .collect::<netspread_core::Result<Vec<_>>>()?;
    let pairs: Vec<(String, &TargetTable)> = names.into_iter().zip(tables.iter()).collect();
    let dists = export_distributions(&pairs)?;
    write_text(&out.join("distribution_values.csv"), &distribution_values_csv(&dists))?;
    write_text(&out.join("distribution_histogram.csv"), &distribution_histogram_csv(&dists))?;
    println!("exported {} distributions", dists.len());
    Ok(())
}

#[derive(Serialize)]
struct StatsOutput {
    network: String,
    #[serde(flatten)]
    stats: netspread_core::GraphStats,
    self_loops: usize,
    duplicate_edges: usize,
}

fn stats(cfg: &RunConfig) -> Result<(), Failure> {
    let path = single_network(cfg, "stats")?;
    let (g, report) = Graph::load_edge_list(&path, cfg.edge_list_options())?;
    let s = g.stats();
    println!("network:   {}", network_name(&path));
    println!("nodes:     {}", s.nodes);
    println!("edges:     {}", s.edges);
    println!("components: {}", s.components);
    println!("largest component fraction: {}", s.largest_component_fraction);
    println!("dropped self-loops: {}, duplicate edges: {}", report.self_loops, report.duplicate_edges);
    if let Some(out) = &cfg.out {
        fs::create_dir_all(out).map_err(|e| Failure::Data(anyhow!("cannot create {}: {e}", out.display())))?;
        io::write_json(
            &out.join("stats.json"),
            &StatsOutput {
                network: network_name(&path),
                stats: s,
                self_loops: report.self_loops,
                duplicate_edges: report.duplicate_edges,
            },
        )?;
    }
    Ok(())
}

//! Discrete-time SIR simulation and regression-target construction.
//!
//! Dynamics, evaluated synchronously from the state at the start of each
//! iteration:
//!
//! * each infected node independently transmits to each susceptible neighbour
//!   with probability `beta` (so a node with `k` infected neighbours is
//!   infected with probability `1 - (1 - beta)^k`);
//! * each node that was infected before the iteration recovers with
//!   probability `gamma`. A node infected in iteration `t` is first eligible
//!   to recover in iteration `t + 1`, and can still transmit in the iteration
//!   in which it recovers.
//!
//! Because every (edge, iteration) trial and every recovery trial is an
//! independent Bernoulli draw, the first successful transmission along an
//! edge and the recovery iteration of a node are geometric random variables.
//! The engine samples those directly and propagates infection times with a
//! Dijkstra-style sweep, which produces exactly the same law as stepping the
//! iterations one by one but costs `O(E log V)` per run instead of
//! `O(iterations * |I|)`.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::{self, Domain};

const NEVER: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SirParams {
    /// Per-iteration transmission probability along one infected-susceptible edge.
    pub beta: f64,
    /// Per-iteration recovery probability of an infected node.
    pub gamma: f64,
    pub max_iterations: u64,
    pub runs_per_node: usize,
}

impl Default for SirParams {
    fn default() -> Self {
        SirParams {
            beta: 0.05,
            gamma: 0.005,
            max_iterations: 10_000,
            runs_per_node: 10,
        }
    }
}

impl SirParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::InvalidConfig(format!("beta must be in [0, 1], got {}", self.beta)));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidConfig(format!("gamma must be in [0, 1], got {}", self.gamma)));
        }
        if self.runs_per_node == 0 {
            return Err(Error::InvalidConfig("runs_per_node must be at least 1".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationRecord {
    pub seed_node: usize,
    pub run_index: usize,
    pub peak_infected: usize,
    pub peak_iteration: u64,
    pub total_iterations: u64,
    pub truncated: bool,
}

/// Compartment sizes after every iteration `0..=total_iterations`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    pub susceptible: Vec<usize>,
    pub infected: Vec<usize>,
    pub recovered: Vec<usize>,
    pub truncated: bool,
}

/// Number of Bernoulli(p) trials up to and including the first success.
#[inline]
fn geometric(rng: &mut ChaCha8Rng, p: f64) -> u64 {
    if p >= 1.0 {
        return 1;
    }
    if p <= 0.0 {
        return NEVER;
    }
    // U in (0, 1]
    let u = 1.0 - rng.gen::<f64>();
    let k = (u.ln() / (-p).ln_1p()).floor();
    if k >= (NEVER / 4) as f64 {
        NEVER
    } else {
        1 + k as u64
    }
}

/// Reusable per-worker scratch space for simulations on one graph.
#[derive(Debug, Default)]
pub struct Simulator {
    infection: Vec<u64>,
    done: Vec<bool>,
    heap: BinaryHeap<Reverse<(u64, usize)>>,
    // (infection iteration, recovery iteration) for every node infected within the horizon
    events: Vec<(u64, u64)>,
    delta: Vec<i64>,
}

impl Simulator {
    pub fn new() -> Self {
        Self::default()
    }

    fn spread(&mut self, g: &Graph, seed: usize, params: &SirParams, rng: &mut ChaCha8Rng) {
        let n = g.node_count();
        self.infection.clear();
        self.infection.resize(n, NEVER);
        self.done.clear();
        self.done.resize(n, false);
        self.heap.clear();
        self.events.clear();

        self.infection[seed] = 0;
        self.heap.push(Reverse((0, seed)));
        while let Some(Reverse((t, u))) = self.heap.pop() {
            if self.done[u] || t != self.infection[u] {
                continue;
            }
            if t > params.max_iterations {
                break;
            }
            self.done[u] = true;
            let recovery = t.saturating_add(geometric(rng, params.gamma));
            self.events.push((t, recovery));
            for &v in g.neighbors(u) {
                if self.done[v] {
                    continue;
                }
                let hit = t.saturating_add(geometric(rng, params.beta));
                if hit <= recovery && hit < self.infection[v] {
                    self.infection[v] = hit;
                    self.heap.push(Reverse((hit, v)));
                }
            }
        }
    }

    /// Last iteration of the run and whether it was cut by the cap.
    fn horizon(&self, params: &SirParams) -> (u64, bool) {
        let end = self.events.iter().map(|&(_, r)| r).max().unwrap_or(0);
        if end > params.max_iterations {
            (params.max_iterations, true)
        } else {
            (end, false)
        }
    }

    fn infected_counts(&mut self, horizon: u64) -> Vec<usize> {
        let len = horizon as usize + 1;
        self.delta.clear();
        self.delta.resize(len + 1, 0);
        for &(t, r) in &self.events {
            if t > horizon {
                continue;
            }
            self.delta[t as usize] += 1;
            if r <= horizon {
                self.delta[r as usize] -= 1;
            }
        }
        let mut counts = Vec::with_capacity(len);
        let mut running = 0i64;
        for d in &self.delta[..len] {
            running += d;
            counts.push(running as usize);
        }
        counts
    }

    /// One epidemic from `seed`, summarised by its peak.
    pub fn run(&mut self, g: &Graph, seed: usize, params: &SirParams, rng_seed: u64) -> Result<SimulationRecord> {
        check_seed(g, seed)?;
        let mut rng = rand::SeedableRng::seed_from_u64(rng_seed);
        self.spread(g, seed, params, &mut rng);
        let (horizon, truncated) = self.horizon(params);
        let counts = self.infected_counts(horizon);
        let (peak_iteration, peak_infected) = first_max(&counts);
        Ok(SimulationRecord {
            seed_node: seed,
            run_index: 0,
            peak_infected,
            peak_iteration: peak_iteration as u64,
            total_iterations: horizon,
            truncated,
        })
    }

    /// Full S/I/R history of one epidemic.
    pub fn trajectory(&mut self, g: &Graph, seed: usize, params: &SirParams, rng_seed: u64) -> Result<Trajectory> {
        check_seed(g, seed)?;
        let mut rng = rand::SeedableRng::seed_from_u64(rng_seed);
        self.spread(g, seed, params, &mut rng);
        let (horizon, truncated) = self.horizon(params);
        let infected = self.infected_counts(horizon);
        let len = infected.len();
        let mut recovered_delta = vec![0usize; len];
        let mut ever_delta = vec![0usize; len];
        for &(t, r) in &self.events {
            if t as usize >= len {
                continue;
            }
            ever_delta[t as usize] += 1;
            if (r as usize) < len {
                recovered_delta[r as usize] += 1;
            }
        }
        let n = g.node_count();
        let mut susceptible = Vec::with_capacity(len);
        let mut recovered = Vec::with_capacity(len);
        let (mut ever, mut rec) = (0, 0);
        for t in 0..len {
            ever += ever_delta[t];
            rec += recovered_delta[t];
            susceptible.push(n - ever);
            recovered.push(rec);
        }
        Ok(Trajectory {
            susceptible,
            infected,
            recovered,
            truncated,
        })
    }
}

fn check_seed(g: &Graph, seed: usize) -> Result<()> {
    if seed >= g.node_count() {
        return Err(Error::NodeOutOfRange {
            node: seed,
            node_count: g.node_count(),
        });
    }
    Ok(())
}

/// Index and value of the first maximum.
fn first_max(counts: &[usize]) -> (usize, usize) {
    let mut best = (0, counts[0]);
    for (i, &c) in counts.iter().enumerate().skip(1) {
        if c > best.1 {
            best = (i, c);
        }
    }
    best
}

pub fn simulate_once(g: &Graph, seed: usize, params: &SirParams, rng_seed: u64) -> Result<SimulationRecord> {
    params.validate()?;
    Simulator::new().run(g, seed, params, rng_seed)
}

/// Seed of run `run_index` from `node` under `master_seed`.
pub fn run_seed(master_seed: u64, node: usize, run_index: usize) -> u64 {
    rng::derive_seed(master_seed, Domain::Simulation, node as u64, run_index as u64)
}

/// Per-node normalized targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetTable {
    pub labels: Vec<String>,
    /// Mean peak infected count divided by the node count.
    pub peak: Vec<f64>,
    /// Mean peak iteration divided by `time_norm`.
    pub time: Vec<f64>,
    pub time_norm: f64,
    pub meta: TargetMeta,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetMeta {
    pub time_norm: f64,
    pub node_count: usize,
    pub beta: f64,
    pub gamma: f64,
    pub runs_per_node: usize,
    pub max_iterations: u64,
    pub master_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Hash)]
#[serde(rename_all = "lowercase")]
pub enum TargetKind {
    Peak,
    Time,
}

impl TargetKind {
    pub const ALL: [TargetKind; 2] = [TargetKind::Peak, TargetKind::Time];

    pub fn name(self) -> &'static str {
        match self {
            TargetKind::Peak => "peak",
            TargetKind::Time => "time",
        }
    }
}

impl std::str::FromStr for TargetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "peak" => Ok(TargetKind::Peak),
            "time" => Ok(TargetKind::Time),
            other => Err(Error::InvalidConfig(format!("unknown target kind `{other}` (expected peak or time)"))),
        }
    }
}

impl TargetTable {
    pub fn node_count(&self) -> usize {
        self.peak.len()
    }

    pub fn column(&self, kind: TargetKind) -> &[f64] {
        match kind {
            TargetKind::Peak => &self.peak,
            TargetKind::Time => &self.time,
        }
    }

    /// Aggregates raw records into normalized targets.
    pub fn from_records(
        g: &Graph,
        records: &[SimulationRecord],
        params: &SirParams,
        master_seed: u64,
    ) -> Result<TargetTable> {
        let n = g.node_count();
        let mut peak_sum = vec![0.0f64; n];
        let mut time_sum = vec![0.0f64; n];
        let mut runs = vec![0usize; n];
        for rec in records {
            check_seed(g, rec.seed_node)?;
            peak_sum[rec.seed_node] += rec.peak_infected as f64;
            time_sum[rec.seed_node] += rec.peak_iteration as f64;
            runs[rec.seed_node] += 1;
        }
        if let Some(u) = runs.iter().position(|&r| r == 0) {
            return Err(Error::Shape(format!("no simulation records for node {u}")));
        }
        let peak: Vec<f64> = (0..n).map(|u| peak_sum[u] / runs[u] as f64 / n as f64).collect();
        let mean_time: Vec<f64> = (0..n).map(|u| time_sum[u] / runs[u] as f64).collect();
        let max_time = mean_time.iter().copied().fold(0.0, f64::max);
        let time_norm = if max_time > 0.0 { max_time } else { 1.0 };
        let time = mean_time.iter().map(|t| t / time_norm).collect();
        Ok(TargetTable {
            labels: g.labels().to_vec(),
            peak,
            time,
            time_norm,
            meta: TargetMeta {
                time_norm,
                node_count: n,
                beta: params.beta,
                gamma: params.gamma,
                runs_per_node: params.runs_per_node,
                max_iterations: params.max_iterations,
                master_seed,
            },
        })
    }

    /// Rows `nodes` of the table; normalization constants are kept.
    pub fn restrict(&self, nodes: &[usize]) -> TargetTable {
        TargetTable {
            labels: nodes.iter().map(|&u| self.labels[u].clone()).collect(),
            peak: nodes.iter().map(|&u| self.peak[u]).collect(),
            time: nodes.iter().map(|&u| self.time[u]).collect(),
            time_norm: self.time_norm,
            meta: self.meta,
        }
    }
}

/// All simulations for a graph: `runs_per_node` epidemics from every node.
/// Records are ordered by (seed node, run index) regardless of thread count.
pub fn simulate_all(g: &Graph, params: &SirParams, master_seed: u64) -> Result<Vec<SimulationRecord>> {
    params.validate()?;
    if g.node_count() == 0 {
        return Err(Error::EmptyGraph);
    }
    let per_node: Vec<Vec<SimulationRecord>> = (0..g.node_count())
        .into_par_iter()
        .map_init(Simulator::new, |sim, u| {
            (0..params.runs_per_node)
                .map(|r| {
                    sim.run(g, u, params, run_seed(master_seed, u, r)).map(|mut rec| {
                        rec.run_index = r;
                        rec
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let records: Vec<SimulationRecord> = per_node.into_iter().flatten().collect();
    let truncated = records.iter().filter(|r| r.truncated).count();
    if truncated > 0 {
        log::warn!(
            "{truncated} of {} simulations hit the {}-iteration cap",
            records.len(),
            params.max_iterations
        );
    }
    Ok(records)
}

pub fn build_targets(
    g: &Graph,
    params: &SirParams,
    master_seed: u64,
) -> Result<(TargetTable, Vec<SimulationRecord>)> {
    let records = simulate_all(g, params, master_seed)?;
    let table = TargetTable::from_records(g, &records, params, master_seed)?;
    Ok((table, records))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationError {
    pub peak: f64,
    pub time: f64,
}

/// `sqrt(mean_u d(u)^2)` with `d(u)` the mean absolute deviation of the
/// normalized run values of node `u` from their mean.
pub fn deviation_rmse(groups: &[Vec<f64>]) -> f64 {
    let sum_sq: f64 = groups
        .iter()
        .map(|vals| {
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let d = vals.iter().map(|v| (v - mean).abs()).sum::<f64>() / vals.len() as f64;
            d * d
        })
        .sum();
    (sum_sq / groups.len() as f64).sqrt()
}

/// Per-node mean absolute deviation of single-run normalized values from the
/// node mean, for the peak and time targets.
pub fn node_deviations(records: &[SimulationRecord], targets: &TargetTable) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = targets.node_count();
    let norm_n = targets.meta.node_count as f64;
    let mut peaks = vec![Vec::new(); n];
    let mut times = vec![Vec::new(); n];
    for rec in records {
        if rec.seed_node >= n {
            return Err(Error::NodeOutOfRange {
                node: rec.seed_node,
                node_count: n,
            });
        }
        peaks[rec.seed_node].push(rec.peak_infected as f64 / norm_n);
        times[rec.seed_node].push(rec.peak_iteration as f64 / targets.time_norm);
    }
    if let Some(u) = peaks.iter().position(Vec::is_empty) {
        return Err(Error::Shape(format!("no simulation records for node {u}")));
    }
    let mad = |vals: &Vec<f64>| {
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        vals.iter().map(|v| (v - mean).abs()).sum::<f64>() / vals.len() as f64
    };
    Ok((peaks.iter().map(mad).collect(), times.iter().map(mad).collect()))
}

fn root_mean_square(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v * v, c + 1));
    (sum / count as f64).sqrt()
}

/// Error made by using a single simulation in place of the per-node mean.
pub fn simulation_error(records: &[SimulationRecord], targets: &TargetTable) -> Result<SimulationError> {
    let (peak, time) = node_deviations(records, targets)?;
    Ok(SimulationError {
        peak: root_mean_square(peak.into_iter()),
        time: root_mean_square(time.into_iter()),
    })
}

/// [`simulation_error`] restricted to `nodes`, keeping whole-network normalization.
pub fn simulation_error_on(
    records: &[SimulationRecord],
    targets: &TargetTable,
    nodes: &[usize],
) -> Result<SimulationError> {
    let (peak, time) = node_deviations(records, targets)?;
    if nodes.is_empty() {
        return Err(Error::Shape("empty node subset".into()));
    }
    Ok(SimulationError {
        peak: root_mean_square(nodes.iter().map(|&u| peak[u])),
        time: root_mean_square(nodes.iter().map(|&u| time[u])),
    })
}

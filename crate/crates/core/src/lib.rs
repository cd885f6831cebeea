//! Predicting the effect of epidemic spreading from individual network nodes.
//!
//! The pipeline has four stages:
//!
//! 1. [`sir`] simulates SIR epidemics from every node and turns the peak
//!    size and time-to-peak into normalized per-node regression targets;
//! 2. [`centrality`] describes each node by five normalized structural
//!    features (or random features for a baseline);
//! 3. [`gbt`] fits gradient-boosted regression trees mapping features to
//!    targets;
//! 4. [`evaluation`] scores the model by k-fold cross-validation and by
//!    zero-shot transfer of a model trained on one network to another.

pub mod centrality;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod gbt;
pub mod generators;
pub mod graph;
pub mod io;
pub mod metrics;
pub mod rng;
pub mod sir;

pub use error::{Error, Result};
pub use features::FeatureMatrix;
pub use gbt::{GbtConfig, GbtModel};
pub use graph::{Graph, GraphStats};
pub use sir::{SimulationRecord, SirParams, TargetKind, TargetTable};

//! Topology-transferable complex-valued graph convolution for power grid
//! state forecasting and bus-level false data injection localisation.
//!
//! One parameter set runs on grids of any size and topology: complex graph
//! filters over a temporal window, pooling to a fixed number of clusters,
//! and a head that decodes every bus from the pooled summary and its
//! position in BFS order.
//!
//! The crate also covers the data side: bundled IEEE cases ([`caseio`]),
//! graph and admittance handling ([`grid`]), topology augmentation
//! ([`reconfig`]), load/PV profiles, power flow and state estimation
//! ([`scenario`]), stealth attacks ([`fdi`]), training and evaluation
//! ([`train`]) and the `ugcn` command line ([`cli`]).
//!
//! Examples, one per capability (`cargo run --release --example <name>`):
//!
//! - `case_files`: load cases, build Y and graph shift operators
//! - `augmentation`: reconfigured variants of distribution and transmission cases
//! - `scenario_generation`: profiles, power flow, estimation and feature windows
//! - `stealth_attack`: injections invisible to the estimator residual
//! - `universal_forward`: one parameter set on grids of different sizes
//! - `forecast_transfer`: UGCN against the dense baseline on unseen topologies
//! - `fdi_detection`: bus-level detection over a sweep of attack levels
//! - `hybrid_fdi`: one detector trained on two transmission systems
//! - `checkpoint_resume`: bit-exact resume from a checkpoint
//! - `cli_pipeline`: gen, train, eval and report driven in-process

pub mod caseio;
pub mod experiment;
pub mod cli;
pub mod fdi;
pub mod grid;
pub mod linalg;
pub mod model;
pub mod par;
pub mod pipeline;
pub mod reconfig;
pub mod rng;
pub mod scenario;
pub mod train;

//! Energy-aware cell switching for vertical heterogeneous networks with a
//! HAPS super macro base station, under partial knowledge of the traffic of
//! sleeping small cells.
//!
//! Modules, in pipeline order: [`ingest`] builds per-cell daily load
//! profiles, [`power`] models base-station consumption, [`switching`]
//! chooses which SBSs sleep and where their traffic goes, [`estimate`]
//! infers the loads of sleeping SBSs, [`metrics`] scores the estimates and
//! [`experiment`] ties them into seeded simulation runs.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix it to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimate;
pub mod experiment;
pub mod ingest;
pub mod metrics;
pub mod power;
pub mod scalar;
pub mod switching;

pub use error::{Error, Result};
pub use estimate::{ClusterCount, ClusterFeatures, EstimatorSpec, Method};
pub use experiment::{emit_report, load_config, run_experiment, ExperimentConfig, OptimizerKind};
pub use power::{Sink, Tier};
pub use scalar::Scalar;
pub use switching::{SinkSet, SwitchVector};

pub type Point = scalar::Point<f64>;
pub type PowerParams = power::PowerParams<f64>;
pub type BaseStation = power::BaseStation<f64>;
pub type Network = power::Network<f64>;
pub type NetworkLoadState = power::NetworkLoadState<f64>;
pub type SwitchPlan = switching::SwitchPlan<f64>;
pub type TrafficProfile = ingest::TrafficProfile<f64>;
pub type CdrRecord = ingest::CdrRecord<f64>;
pub type NeighborSet = estimate::NeighborSet<f64>;
pub type ClusterModel = estimate::ClusterModel<f64>;
pub type SlotMetrics = metrics::SlotMetrics<f64>;
pub type ExperimentReport = experiment::ExperimentReport<f64>;
pub type Corpus = experiment::Corpus<f64>;

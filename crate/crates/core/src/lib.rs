//! QoE-imbalance metrics and their sensitivity landscape over the SLA plane.
//!
//! The pipeline is: build or ingest a [`Topology`], reduce it to a
//! [`CostHistogram`] of all-pairs shortest-path costs, then evaluate the
//! sigmoid satisfaction model at one or many [`SlaPoint`]s. Every metric is a
//! function of the histogram alone, so per-point work is proportional to the
//! number of distinct costs rather than the number of node pairs.

pub mod asymptotics;
pub mod error;
pub mod landscape;
pub mod qoe;
pub mod report;
pub mod sensitivity;
pub mod topology;

pub use error::{Error, Result};
pub use qoe::{evaluate, satisfaction_weight, QoeSnapshot, SlaPoint};
pub use topology::{hop_histogram, CostHistogram, Moments, Topology, TopologySpec};

/// Version string embedded in every JSON output.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

//! Received-energy estimation for wireless power transfer between devices.
//!
//! The pipeline ingests charging-session monitoring data ([`dataset`]),
//! optionally synthesizes it ([`synth`]), rejects anomalous sessions with
//! DBSCAN ([`outlier`]), fits gradient-boosted trees ([`gbrt`]) or a
//! three-hidden-layer perceptron ([`mlp`]) mapping coil distance and
//! charging duration to received Ah, and compares both with k-fold
//! cross-validated RMSE ([`eval`]). [`cli`] wires the stages into the `wpt`
//! binary.

pub mod cli;
pub mod dataset;
pub mod eval;
pub mod gbrt;
pub mod mlp;
pub mod outlier;
pub mod synth;

pub use dataset::{Dataset, MonitoringRecord, Session, TrainingPoint};

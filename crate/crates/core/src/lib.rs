//! Deterministic discrete-event simulator for mobile ad-hoc networks.
//!
//! Three reactive routing protocols (AODV, DSR, AOMDV) run over a unit-disk
//! radio with Random Waypoint mobility and CBR traffic. Every run emits a
//! text trace from which the delivery, delay, throughput and overhead
//! metrics can be recomputed independently.

pub mod config;
pub mod metrics;
pub mod mobility;
pub mod network;
pub mod protocols;
pub mod radio;
pub mod routing;
pub mod runner;
pub mod sim;
pub mod trace;
pub mod traffic;

/// Nodes are numbered `0..n`.
pub type NodeId = u32;

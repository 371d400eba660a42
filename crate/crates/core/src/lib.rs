//! Latency-minimal collaborative task scheduling over a predicted two-slot
//! UAV network.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`sins`] dead-reckons every UAV forward to predict where it will be at
//!    the start of each time slot.
//! 2. [`channel`] turns slot positions into per-bit link delays and assembles
//!    the two-step weighted time-expanded graph, including the virtual cache
//!    edges that carry data across the slot boundary.
//! 3. [`mapping`] evaluates how long a task DAG ([`dag`]) takes when its
//!    subtasks are placed on graph nodes according to a decision matrix.
//! 4. [`schedulers`] search that space: binary PSO plus load-balancing,
//!    cloud-only and local-only baselines.
//!
//! [`harness`] wires everything to scenario files and experiment runners.

pub mod channel;
pub mod dag;
pub mod harness;
pub mod mapping;
pub mod schedulers;
pub mod sins;

//! Leverage algebra for human-agent workflows.
//!
//! Per-task leverage is displaced human work over the operator time spent
//! planning, answering interrupts and reviewing. This crate evaluates that
//! ratio from directional information densities and channel bits, follows it
//! to its memory limits, aggregates it over time windows, schedules
//! dependent tasks to maximize it, simulates operators running agents, and
//! runs the two falsification protocols as seeded synthetic experiments.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conservation;
pub mod density;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod ingest;
pub mod memory;
pub mod scheduler;
pub mod simulator;
pub mod window;

pub use error::{Error, Result};
pub use exec::Execution;

//! Laboratory for CPU frequency governors on hardware with coarse
//! voltage/frequency control.
//!
//! The crate simulates periodic soft-deadline workloads on a small multicore
//! board, accounts energy with a voltage-aware power model, and pits the
//! classic utilization-driven governors against a learned one: a tiny Q-network
//! trained per workload that trades execution speed against energy while
//! honoring the deadline. The learned policy can be lowered to integer-only
//! arithmetic for deployment in environments where floating point is off
//! limits, and every per-period decision can be captured in a fixed-size
//! binary flight record for offline analysis.

pub mod encoder;
pub mod error;
pub mod governor;
pub mod power;
pub mod quant;
pub mod rl;
pub mod sim;
pub mod trace;
pub mod workload;

pub use error::{Error, Result};

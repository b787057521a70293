//! Discrete-event simulator of overlapping IEEE 802.11 BSSs in which per-AP
//! epsilon-greedy bandits learn spatial-reuse settings (carrier-sense
//! threshold and transmit power).

// `!(x > 0.0)` is how config checks reject NaN along with non-positives
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod actions;
pub mod bandit;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod mac;
pub mod metrics;
pub mod phy;
pub mod scenario;
pub mod sim;

pub use error::{Error, Result};

//! Cost-aware hybrid provisioning across VMs and serverless functions.
//!
//! The crate has a pricing model (FaaS and IaaS cost curves, the cost
//! indifference point), a traffic monitor and scaling manager that size a VM
//! fleet, several provisioning policies, and a deterministic discrete-event
//! simulator that replays a request trace against them.

// `!(x > 0.0)` style checks are kept on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod error;
mod numeric;

pub mod experiment;
pub mod output;
pub mod policies;
pub mod pricing;
pub mod scaling_manager;
pub mod sim;
pub mod trace;
pub mod traffic_monitor;

pub use error::{Error, Result};

//! Fleet sizing from traffic estimates.
//!
//! Below the cost-indifference point every VM is removed and the router gets
//! `vm_reqs = 0`. Otherwise the fleet is sized for `avg + phi * std`
//! requests/s. A scale-out only reaches the router once the new instances are
//! ready; a scale-in takes effect immediately.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::ceil_tol;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingConfig {
    /// Deviations above the average the fleet is sized for.
    pub phi: f64,
    /// Cost-indifference point, requests/s.
    pub cip: f64,
    /// Integral per-VM capacity, requests/s.
    pub r_max_int: u32,
    /// Fraction of `vm_reqs` the router actually sends to VMs.
    pub rho: f64,
}

impl ScalingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.r_max_int == 0 {
            return Err(Error::config("r_max_int must be >= 1"));
        }
        if !(self.cip >= 0.0) {
            return Err(Error::config("cip must be >= 0"));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::config(format!("rho must lie in (0, 1], got {}", self.rho)));
        }
        if !self.phi.is_finite() {
            return Err(Error::config("phi must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleDirection {
    Out,
    In,
    Unchanged,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingDecision {
    pub target_instances: u32,
    /// Request rate the target fleet is sized for, requests/s.
    pub vm_reqs: f64,
    /// `target_instances - active_vms` at decision time.
    pub delta: i64,
}

impl ScalingDecision {
    pub fn direction(&self) -> ScaleDirection {
        match self.delta {
            d if d > 0 => ScaleDirection::Out,
            d if d < 0 => ScaleDirection::In,
            _ => ScaleDirection::Unchanged,
        }
    }
}

/// Sizes the VM fleet for the reported traffic. `avg` and `std` are in
/// requests/s.
pub fn decide(avg: f64, std: f64, active_vms: u32, cfg: &ScalingConfig) -> Result<ScalingDecision> {
    if !(avg >= 0.0 && std >= 0.0) {
        return Err(Error::domain(format!("avg and std must be >= 0 (got {avg}, {std})")));
    }
    let (target_instances, vm_reqs) = if avg < cfg.cip {
        (0, 0.0)
    } else {
        let vm_reqs = (avg + cfg.phi * std).max(0.0);
        (ceil_tol(vm_reqs / cfg.r_max_int as f64) as u32, vm_reqs)
    };
    Ok(ScalingDecision {
        target_instances,
        vm_reqs,
        delta: i64::from(target_instances) - i64::from(active_vms),
    })
}

/// When the router may start using a decision's `vm_reqs`.
pub fn effective_time(direction: ScaleDirection, now: f64, cold_start: f64) -> f64 {
    match direction {
        ScaleDirection::Out => now + cold_start,
        ScaleDirection::In | ScaleDirection::Unchanged => now,
    }
}

/// A `vm_reqs` update waiting for its instances to come up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PendingUpdate {
    pub vm_reqs: f64,
    pub effective_at: f64,
}

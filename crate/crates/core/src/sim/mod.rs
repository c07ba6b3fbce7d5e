//! Deterministic discrete-event simulation of a VM fleet, a FaaS pool and the
//! load balancer in front of them.
//!
//! Time is kept in integer microseconds. Each trace second with `c` requests
//! places its arrivals at `t + i/c`. VMs expose `floor(r_max)` concurrency
//! slots and are billed per started second from provisioning to termination;
//! FaaS has unbounded concurrency and bills per invocation. When the trace
//! ends every VM is terminated, in-flight requests finish, and anything still
//! queued is reported as unserved.

mod engine;
mod event;
pub mod fleet;
pub mod ledger;
mod report;
mod router;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::floor_tol;
use crate::policies::ProvisioningPolicy;
use crate::pricing::{self, PricingConfig, VmType};
use crate::trace::TraceWorkload;

pub use fleet::{bill_vm, billed_seconds, VmInstance, VmState};
pub use ledger::{ledger_from_log, read_event_log, write_event_log, Ledger, LogKind, LogRecord};
pub use report::{IntervalStats, ResponseTimeSummary, ScalingEvent, SimReport, REPORT_SCHEMA_VERSION};
pub use router::RouteTarget;

pub type Micros = u64;
pub type RequestId = u32;
pub type VmId = u32;

pub const MICROS_PER_SEC: Micros = 1_000_000;

pub fn secs_to_micros(s: f64) -> Micros {
    (s * MICROS_PER_SEC as f64).round() as Micros
}

pub fn micros_to_secs(us: Micros) -> f64 {
    us as f64 / MICROS_PER_SEC as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub vm_type: VmType,
    /// Memory each request needs, MB.
    pub request_mem: f64,
    pub service_time_vm: f64,
    pub service_time_faas: f64,
    pub faas_cold_start: f64,
    pub sla_threshold: f64,
    /// Multiplier on `sla_threshold`.
    pub sla_grace: f64,
    pub rho: f64,
    pub epoch_length: f64,
    pub gateway_cost_per_hour: f64,
    /// Width of the reporting intervals in the per-interval series, seconds.
    pub series_interval: f64,
}

impl SimConfig {
    /// 512 MB requests served in one second on either platform, a one-second
    /// SLA, `rho = 0.8`, one-second epochs and 300 s reporting intervals.
    pub fn with_vm(vm_type: VmType) -> Self {
        Self {
            vm_type,
            request_mem: 512.0,
            service_time_vm: 1.0,
            service_time_faas: 1.0,
            faas_cold_start: 0.0,
            sla_threshold: 1.0,
            sla_grace: 1.0,
            rho: 0.8,
            epoch_length: 1.0,
            gateway_cost_per_hour: 0.0116,
            series_interval: 300.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.vm_type.validate()?;
        let positive = [
            ("request_mem", self.request_mem),
            ("service_time_vm", self.service_time_vm),
            ("service_time_faas", self.service_time_faas),
            ("sla_threshold", self.sla_threshold),
            ("sla_grace", self.sla_grace),
            ("epoch_length", self.epoch_length),
            ("series_interval", self.series_interval),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.faas_cold_start >= 0.0) {
            return Err(Error::config("faas_cold_start must be >= 0"));
        }
        if !(self.gateway_cost_per_hour >= 0.0) {
            return Err(Error::config("gateway_cost_per_hour must be >= 0"));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::config(format!("rho must lie in (0, 1], got {}", self.rho)));
        }
        self.slots_per_vm()?;
        Ok(())
    }

    /// Real-valued per-VM capacity from Little's law.
    pub fn r_max(&self) -> Result<f64> {
        pricing::r_max(&self.vm_type, self.request_mem, self.service_time_vm)
    }

    /// Concurrency slots per VM: `floor(r_max)`.
    pub fn slots_per_vm(&self) -> Result<u32> {
        let slots = floor_tol(self.r_max()?) as u32;
        if slots == 0 {
            return Err(Error::config("VM has no concurrency slot for this request size"));
        }
        Ok(slots)
    }

    pub fn sla_threshold_micros(&self) -> Micros {
        secs_to_micros(self.sla_threshold * self.sla_grace)
    }

    /// Charge for one FaaS request (cold start is not billed).
    pub fn faas_invocation_cost(&self, pricing: &PricingConfig) -> f64 {
        pricing.faas_invocation_cost(self.service_time_faas, self.request_mem)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ServedBy {
    Vm(VmId),
    Faas,
    /// Still queued when the run ended.
    Unserved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RequestRecord {
    pub arrival: Micros,
    pub start: Option<Micros>,
    pub finish: Option<Micros>,
    pub served_by: ServedBy,
    pub violated_sla: bool,
}

impl RequestRecord {
    pub fn response_time(&self) -> Option<Micros> {
        self.finish.map(|f| f - self.arrival)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Keep the per-event audit log.
    pub event_log: bool,
}

/// Everything a run produced, beyond the summary report.
#[derive(Debug, Clone)]
pub struct SimRun {
    pub report: SimReport,
    pub records: Vec<RequestRecord>,
    pub vms: Vec<VmInstance>,
    pub ledger: Ledger,
    /// Requests that arrived in each epoch.
    pub epoch_arrivals: Vec<u64>,
    pub event_log: Option<Vec<LogRecord>>,
}

/// Runs `policy` over `trace` and returns the summary report.
pub fn run(
    trace: &TraceWorkload,
    policy: &mut dyn ProvisioningPolicy,
    cfg: &SimConfig,
    pricing: &PricingConfig,
) -> Result<SimReport> {
    Ok(run_detailed(trace, policy, cfg, pricing, RunOptions::default())?.report)
}

pub fn run_detailed(
    trace: &TraceWorkload,
    policy: &mut dyn ProvisioningPolicy,
    cfg: &SimConfig,
    pricing: &PricingConfig,
    opts: RunOptions,
) -> Result<SimRun> {
    trace.validate()?;
    cfg.validate()?;
    pricing.validate()?;
    if trace.total_requests() > u64::from(RequestId::MAX) {
        return Err(Error::domain("trace has too many requests"));
    }
    engine::Engine::new(trace, policy, cfg, pricing, opts)?.run()
}

//! Run summary: costs, SLA, fleet usage and per-interval series.

use serde::{Deserialize, Serialize};

use super::{micros_to_secs, Micros, RequestRecord, ServedBy, MICROS_PER_SEC};
use crate::policies::PolicyKind;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResponseTimeSummary {
    pub mean: f64,
    pub p50: f64,
    pub p90: f64,
    pub p99: f64,
    pub max: f64,
    /// `[response time s, cumulative fraction]` at every percent.
    pub cdf: Vec<[f64; 2]>,
}

impl ResponseTimeSummary {
    pub fn from_micros(mut times: Vec<Micros>) -> Self {
        if times.is_empty() {
            return Self::default();
        }
        times.sort_unstable();
        let n = times.len();
        let at = |q: f64| {
            let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
            micros_to_secs(times[rank - 1])
        };
        let sum: u128 = times.iter().map(|&t| u128::from(t)).sum();
        Self {
            mean: sum as f64 / n as f64 / MICROS_PER_SEC as f64,
            p50: at(0.5),
            p90: at(0.9),
            p99: at(0.99),
            max: micros_to_secs(times[n - 1]),
            cdf: (0..=100)
                .map(|p| {
                    let q = f64::from(p) / 100.0;
                    [at(q), q]
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalStats {
    pub start: f64,
    pub end: f64,
    /// Time-averaged number of billed instances.
    pub active_vms: f64,
    /// Requests per second that arrived in the interval and ran on a VM.
    pub vm_req_rate: f64,
    /// Requests per second that arrived in the interval and ran on FaaS.
    pub faas_req_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingEvent {
    pub t: f64,
    pub active_before: u32,
    pub target: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vm_reqs: Option<f64>,
    /// When the router starts using `vm_reqs`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effective_at: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub schema_version: u32,
    pub policy: PolicyKind,
    pub trace_label: String,
    /// Simulated horizon, seconds.
    pub duration: f64,
    pub arrivals: u64,
    pub served_vm: u64,
    pub served_faas: u64,
    pub unserved: u64,
    pub sla_violations: u64,
    pub sla_violation_pct: f64,
    pub iaas_cost: f64,
    pub faas_cost: f64,
    pub gateway_cost: f64,
    pub total_cost: f64,
    /// Sum of instance lifetimes, seconds.
    pub vm_uptime: f64,
    pub vm_billed_seconds: u64,
    pub vms_launched: u32,
    pub peak_vms: u32,
    pub response_time: ResponseTimeSummary,
    pub series: Vec<IntervalStats>,
    pub scaling_events: Vec<ScalingEvent>,
}

impl SimReport {
    /// Share of the total cost spent on FaaS, in [0, 1].
    pub fn faas_cost_share(&self) -> f64 {
        if self.total_cost > 0.0 {
            self.faas_cost / self.total_cost
        } else {
            0.0
        }
    }
}

/// Integrates the billed-instance count over reporting intervals.
#[derive(Debug)]
pub(crate) struct ActiveTracker {
    interval: Micros,
    horizon: Micros,
    last_t: Micros,
    active: u32,
    pub peak: u32,
    /// Instance-microseconds per interval.
    area: Vec<u128>,
}

impl ActiveTracker {
    pub fn new(interval: Micros, horizon: Micros) -> Self {
        let buckets = horizon.div_ceil(interval).max(1) as usize;
        Self {
            interval,
            horizon,
            last_t: 0,
            active: 0,
            peak: 0,
            area: vec![0; buckets],
        }
    }

    fn advance(&mut self, t: Micros) {
        let t = t.min(self.horizon);
        while self.last_t < t {
            let bucket = (self.last_t / self.interval) as usize;
            let bucket_end = ((bucket as u64 + 1) * self.interval).min(t);
            self.area[bucket] += u128::from(bucket_end - self.last_t) * u128::from(self.active);
            self.last_t = bucket_end;
        }
    }

    pub fn set(&mut self, t: Micros, active: u32) {
        self.advance(t);
        self.active = active;
        self.peak = self.peak.max(active);
    }

    pub fn finish(mut self, records: &[RequestRecord]) -> Vec<IntervalStats> {
        self.advance(self.horizon);
        let n = self.area.len();
        let mut vm = vec![0u64; n];
        let mut faas = vec![0u64; n];
        for r in records {
            let b = ((r.arrival / self.interval) as usize).min(n - 1);
            match r.served_by {
                ServedBy::Vm(_) => vm[b] += 1,
                ServedBy::Faas => faas[b] += 1,
                ServedBy::Unserved => {}
            }
        }
        (0..n)
            .map(|b| {
                let start = b as u64 * self.interval;
                let end = ((b as u64 + 1) * self.interval).min(self.horizon);
                let width = (end - start).max(1) as f64;
                let secs = width / MICROS_PER_SEC as f64;
                IntervalStats {
                    start: micros_to_secs(start),
                    end: micros_to_secs(end),
                    active_vms: self.area[b] as f64 / width,
                    vm_req_rate: vm[b] as f64 / secs,
                    faas_req_rate: faas[b] as f64 / secs,
                }
            })
            .collect()
    }
}

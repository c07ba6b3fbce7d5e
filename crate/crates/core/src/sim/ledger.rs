//! Cost ledger and the audit event log it can be rebuilt from.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::fleet::billed_seconds;
use super::{Micros, SimConfig};
use crate::error::{Error, Result};
use crate::pricing::{PricingConfig, SECONDS_PER_HOUR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogKind {
    Arrival,
    RouteVm,
    RouteFaas,
    Enqueue,
    Start,
    Complete,
    VmProvision,
    VmReady,
    VmTerminate,
    Decision,
    VmReqsEffective,
    GatewayStart,
    GatewayStop,
    End,
}

/// One line of the newline-delimited event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub t_us: Micros,
    pub kind: LogKind,
    /// Request id, VM id, or target instance count for decisions.
    pub id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vm: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
}

pub fn write_event_log<W: Write>(log: &[LogRecord], mut out: W) -> Result<()> {
    for rec in log {
        serde_json::to_writer(&mut out, rec)?;
        out.write_all(b"\n").map_err(|e| Error::io("<event log>", e))?;
    }
    Ok(())
}

pub fn read_event_log<R: BufRead>(input: R) -> Result<Vec<LogRecord>> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line.map_err(|e| Error::io("<event log>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

/// Billed quantities and what they cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ledger {
    pub vm_billed_seconds: u64,
    pub faas_invocations: u64,
    pub gateway_billed_seconds: u64,
    pub iaas_cost: f64,
    pub faas_cost: f64,
    pub gateway_cost: f64,
    pub total_cost: f64,
}

impl Ledger {
    pub fn price(
        vm_billed_seconds: u64,
        faas_invocations: u64,
        gateway_billed_seconds: u64,
        cfg: &SimConfig,
        pricing: &PricingConfig,
    ) -> Self {
        let iaas_cost = vm_billed_seconds as f64 * cfg.vm_type.cost_per_second();
        let faas_cost = faas_invocations as f64 * cfg.faas_invocation_cost(pricing);
        let gateway_cost = gateway_billed_seconds as f64 * cfg.gateway_cost_per_hour / SECONDS_PER_HOUR;
        Self {
            vm_billed_seconds,
            faas_invocations,
            gateway_billed_seconds,
            iaas_cost,
            faas_cost,
            gateway_cost,
            total_cost: iaas_cost + faas_cost + gateway_cost,
        }
    }
}

/// Rebuilds the ledger from an event log alone.
pub fn ledger_from_log(log: &[LogRecord], cfg: &SimConfig, pricing: &PricingConfig) -> Result<Ledger> {
    let mut provisioned: BTreeMap<u64, Micros> = BTreeMap::new();
    let mut vm_seconds = 0u64;
    let mut faas = 0u64;
    let mut gateway_start = None;
    let mut gateway_seconds = 0u64;
    for rec in log {
        match rec.kind {
            LogKind::VmProvision => {
                provisioned.insert(rec.id, rec.t_us);
            }
            LogKind::VmTerminate => {
                let start = provisioned
                    .remove(&rec.id)
                    .ok_or_else(|| Error::domain(format!("VM {} terminated without being provisioned", rec.id)))?;
                vm_seconds += billed_seconds(rec.t_us - start);
            }
            LogKind::RouteFaas => faas += 1,
            LogKind::GatewayStart => gateway_start = Some(rec.t_us),
            LogKind::GatewayStop => {
                let start = gateway_start
                    .take()
                    .ok_or_else(|| Error::domain("gateway stopped without starting"))?;
                gateway_seconds += billed_seconds(rec.t_us - start);
            }
            _ => {}
        }
    }
    if !provisioned.is_empty() {
        return Err(Error::domain(format!(
            "{} VM(s) never terminated in the log",
            provisioned.len()
        )));
    }
    Ok(Ledger::price(vm_seconds, faas, gateway_seconds, cfg, pricing))
}

//! CSV and JSON renderings of run, comparison, sweep and cost-curve results.
//!
//! Every CSV starts with a `# hybridsim-report v<N> <kind>` line; JSON
//! documents carry `schema_version` and `kind` fields.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::Result;
use crate::experiment::{CipAnalysis, Comparison, PhiSweep};
use crate::sim::{SimReport, REPORT_SCHEMA_VERSION};
use crate::traffic_monitor::EstimatePoint;

fn header(kind: &str) -> String {
    format!("# hybridsim-report v{REPORT_SCHEMA_VERSION} {kind}\n")
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn envelope<T: Serialize>(kind: &str, key: &str, body: &T) -> Result<String> {
    let mut doc = json!({ "schema_version": REPORT_SCHEMA_VERSION, "kind": kind });
    doc[key] = serde_json::to_value(body)?;
    Ok(serde_json::to_string_pretty(&doc)?)
}

/// Summary lines as comments, then the per-interval series.
pub fn sim_report_csv(r: &SimReport) -> String {
    let mut out = header("simulate");
    let _ = writeln!(
        out,
        "# policy={} trace={} duration={}",
        r.policy, r.trace_label, r.duration
    );
    let _ = writeln!(
        out,
        "# arrivals={} served_vm={} served_faas={} unserved={} sla_violations={} sla_violation_pct={}",
        r.arrivals, r.served_vm, r.served_faas, r.unserved, r.sla_violations, r.sla_violation_pct
    );
    let _ = writeln!(
        out,
        "# total_cost={} iaas_cost={} faas_cost={} gateway_cost={} vm_uptime={} vm_billed_seconds={}",
        r.total_cost, r.iaas_cost, r.faas_cost, r.gateway_cost, r.vm_uptime, r.vm_billed_seconds
    );
    out.push_str("start,end,active_vms,vm_req_rate,faas_req_rate\n");
    for s in &r.series {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            s.start, s.end, s.active_vms, s.vm_req_rate, s.faas_req_rate
        );
    }
    out
}

/// Full report, plus the traffic estimate series when one is given.
pub fn sim_report_json(r: &SimReport, estimates: Option<&[EstimatePoint]>) -> Result<String> {
    let mut doc: Value = json!({ "schema_version": REPORT_SCHEMA_VERSION, "kind": "simulate" });
    doc["report"] = serde_json::to_value(r)?;
    if let Some(est) = estimates {
        doc["traffic_estimate"] = serde_json::to_value(est)?;
    }
    Ok(serde_json::to_string_pretty(&doc)?)
}

pub fn comparison_csv(c: &Comparison) -> String {
    let mut out = header("compare");
    out.push_str(
        "policy,total_cost,normalized_cost,sla_violation_pct,vm_uptime,iaas_cost,faas_cost,gateway_cost,\
         faas_cost_share,served_vm,served_faas,unserved\n",
    );
    for r in &c.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.policy,
            r.total_cost,
            opt(r.normalized_cost),
            r.sla_violation_pct,
            r.vm_uptime,
            r.iaas_cost,
            r.faas_cost,
            r.gateway_cost,
            r.faas_cost_share,
            r.served_vm,
            r.served_faas,
            r.unserved
        );
    }
    out
}

pub fn comparison_json(c: &Comparison) -> Result<String> {
    envelope("compare", "comparison", c)
}

pub fn phi_sweep_csv(s: &PhiSweep) -> String {
    let mut out = header("sweep-phi");
    let _ = writeln!(out, "# argmin_phi={}", s.argmin_phi);
    out.push_str("phi,total_cost,iaas_cost,faas_cost,gateway_cost,sla_violation_pct,vm_uptime\n");
    for r in &s.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.phi, r.total_cost, r.iaas_cost, r.faas_cost, r.gateway_cost, r.sla_violation_pct, r.vm_uptime
        );
    }
    out
}

pub fn phi_sweep_json(s: &PhiSweep) -> Result<String> {
    envelope("sweep-phi", "sweep", s)
}

pub fn cost_curves_csv(a: &CipAnalysis) -> String {
    let mut out = header("analyze-cip");
    for c in &a.cip {
        match &c.cip {
            Some(p) => {
                let _ = writeln!(
                    out,
                    "# cip {}={} r_max={} within_capacity={}",
                    c.vm_type, p.rate, p.r_max, p.within_capacity
                );
            }
            None => {
                let _ = writeln!(out, "# cip {}=none", c.vm_type);
            }
        }
    }
    out.push_str("rate,cost_faas");
    for name in &a.vm_types {
        let _ = write!(out, ",cost_iaas_{name}");
    }
    out.push_str(",hybrid_min\n");
    for row in &a.curves {
        let _ = write!(out, "{},{}", row.rate, row.cost_faas);
        for c in &row.cost_iaas {
            let _ = write!(out, ",{c}");
        }
        let _ = writeln!(out, ",{}", row.hybrid_min);
    }
    out
}

pub fn cost_curves_json(a: &CipAnalysis) -> Result<String> {
    envelope("analyze-cip", "analysis", a)
}

//! Experiment setup and orchestration: single runs, policy comparisons and
//! phi sweeps over a shared trace.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policies::{
    AutoScalerConfig, AutoScalingPolicy, FaasOnlyPolicy, LibraPolicy, MaxPolicy, PolicyKind, ProvisioningPolicy,
};
use crate::pricing::{self, CostCurveRow, CostIndifference, ExecutionModel, HybridCurve, PricingConfig};
use crate::scaling_manager::ScalingConfig;
use crate::sim::{self, RunOptions, SimConfig, SimReport, SimRun};
use crate::trace::{gen_trace, load_trace, TraceKind, TraceWorkload};
use crate::traffic_monitor::MonitorConfig;

/// `[sim]` table of an experiment file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    /// Name of a VM type in the pricing file.
    pub vm_type: String,
    pub request_mem: f64,
    pub faas_cold_start: f64,
    pub sla_threshold: f64,
    pub sla_grace: f64,
    pub rho: f64,
    pub epoch_length: f64,
    pub gateway_cost_per_hour: f64,
    pub series_interval: f64,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            vm_type: "m4.large".into(),
            request_mem: 512.0,
            faas_cold_start: 0.0,
            sla_threshold: 1.0,
            sla_grace: 1.0,
            rho: 0.8,
            epoch_length: 1.0,
            gateway_cost_per_hour: 0.0116,
            series_interval: 300.0,
        }
    }
}

/// `[libra]` table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LibraSection {
    pub alpha: f64,
    pub beta: f64,
    pub report_every_k: u64,
    pub phi: f64,
}

impl Default for LibraSection {
    fn default() -> Self {
        Self {
            alpha: 0.2,
            beta: 0.2,
            report_every_k: 300,
            phi: 1.0,
        }
    }
}

/// `[auto]` table; unset fields fall back to [`AutoScalerConfig::for_capacity`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AutoSection {
    pub scale_out_above: Option<f64>,
    pub scale_in_below: Option<f64>,
    pub scaling_group_size: Option<u32>,
    pub cooldown: Option<f64>,
    pub min_instances: Option<u32>,
    pub max_instances: Option<u32>,
}

/// `[trace]` table: a file to load, or a generator to run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceSection {
    pub path: Option<PathBuf>,
    pub scale: Option<u64>,
    pub generate: Option<GeneratedTrace>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratedTrace {
    pub length: usize,
    pub seed: u64,
    #[serde(flatten)]
    pub kind: TraceKind,
}

/// Contents of an experiment TOML file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub sim: SimSection,
    /// Execution time model; one second flat when absent.
    pub execution: Option<ExecutionModel>,
    pub libra: LibraSection,
    pub auto: AutoSection,
    pub trace: Option<TraceSection>,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(s)
    }

    /// Loads an experiment file. Relative trace paths resolve against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text).map_err(|source| Error::Toml {
            path: path.to_path_buf(),
            source,
        })?;
        if let Some(trace_path) = cfg.trace.as_mut().and_then(|t| t.path.as_mut()) {
            if trace_path.is_relative() {
                if let Some(dir) = path.parent() {
                    *trace_path = dir.join(&*trace_path);
                }
            }
        }
        Ok(cfg)
    }

    /// Materializes the `[trace]` table, if any.
    pub fn load_trace(&self) -> Result<Option<TraceWorkload>> {
        let Some(section) = &self.trace else {
            return Ok(None);
        };
        match (&section.path, &section.generate) {
            (Some(path), None) => load_trace(path, section.scale).map(Some),
            (None, Some(g)) => gen_trace(g.kind, g.length, g.seed).map(Some),
            _ => Err(Error::config("[trace] needs exactly one of `path` or `generate`")),
        }
    }

    pub fn execution_model(&self) -> ExecutionModel {
        self.execution.unwrap_or_else(|| ExecutionModel::flat(1.0))
    }
}

/// A fully resolved experiment: trace, prices and every policy parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub trace: TraceWorkload,
    pub pricing: PricingConfig,
    pub execution: ExecutionModel,
    pub sim: SimConfig,
    pub monitor: MonitorConfig,
    pub scaling: ScalingConfig,
    pub auto: AutoScalerConfig,
}

impl Experiment {
    pub fn new(trace: TraceWorkload, pricing: PricingConfig, cfg: &ExperimentConfig) -> Result<Self> {
        trace.validate()?;
        pricing.validate()?;
        let execution = cfg.execution_model();
        execution.validate()?;
        let s = &cfg.sim;
        let vm_type = pricing.vm_type(&s.vm_type)?.clone();
        let sim = SimConfig {
            vm_type: vm_type.clone(),
            request_mem: s.request_mem,
            service_time_vm: pricing::vm_exec_time(s.request_mem, &execution)?,
            service_time_faas: pricing::faas_exec_time(s.request_mem, &execution)?,
            faas_cold_start: s.faas_cold_start,
            sla_threshold: s.sla_threshold,
            sla_grace: s.sla_grace,
            rho: s.rho,
            epoch_length: s.epoch_length,
            gateway_cost_per_hour: s.gateway_cost_per_hour,
            series_interval: s.series_interval,
        };
        sim.validate()?;
        let r_max_int = sim.slots_per_vm()?;

        let cip = match pricing::cost_indifference_point(s.request_mem, &execution, &pricing, &vm_type) {
            Ok(c) => c.rate,
            Err(Error::NoFiniteCip) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        let monitor = MonitorConfig {
            alpha: cfg.libra.alpha,
            beta: cfg.libra.beta,
            epoch_length: s.epoch_length,
            report_every_k: cfg.libra.report_every_k,
        };
        monitor.validate()?;
        let scaling = ScalingConfig {
            phi: cfg.libra.phi,
            cip,
            r_max_int,
            rho: s.rho,
        };
        scaling.validate()?;

        let base = AutoScalerConfig::for_capacity(r_max_int, vm_type.cold_start);
        let a = &cfg.auto;
        let auto = AutoScalerConfig {
            scale_out_above: a.scale_out_above.unwrap_or(base.scale_out_above),
            scale_in_below: a.scale_in_below.unwrap_or(base.scale_in_below),
            scaling_group_size: a.scaling_group_size.unwrap_or(base.scaling_group_size),
            cooldown: a.cooldown.unwrap_or(base.cooldown),
            min_instances: a.min_instances.unwrap_or(base.min_instances),
            max_instances: a.max_instances.unwrap_or(base.max_instances),
        };
        auto.validate()?;

        Ok(Self {
            trace,
            pricing,
            execution,
            sim,
            monitor,
            scaling,
            auto,
        })
    }

    /// Same experiment with a different LIBRA `phi`.
    pub fn with_phi(&self, phi: f64) -> Result<Self> {
        let mut out = self.clone();
        out.scaling.phi = phi;
        out.scaling.validate()?;
        Ok(out)
    }

    pub fn build_policy(&self, kind: PolicyKind) -> Result<Box<dyn ProvisioningPolicy>> {
        Ok(match kind {
            PolicyKind::Max => Box::new(MaxPolicy::new(&self.trace, self.scaling.r_max_int)?),
            PolicyKind::Auto => Box::new(AutoScalingPolicy::auto(self.auto)?),
            PolicyKind::Spock => Box::new(AutoScalingPolicy::spock(self.auto)?),
            PolicyKind::FaasOnly => Box::new(FaasOnlyPolicy),
            PolicyKind::Libra => Box::new(LibraPolicy::new(self.monitor, self.scaling, self.sim.epoch_length)?),
        })
    }

    pub fn run(&self, kind: PolicyKind, opts: RunOptions) -> Result<SimRun> {
        let mut policy = self.build_policy(kind)?;
        sim::run_detailed(&self.trace, policy.as_mut(), &self.sim, &self.pricing, opts)
    }

    pub fn simulate(&self, kind: PolicyKind) -> Result<SimReport> {
        Ok(self.run(kind, RunOptions::default())?.report)
    }

    pub fn compare(self: &Arc<Self>, kinds: &[PolicyKind]) -> Result<Comparison> {
        let specs: Vec<_> = kinds
            .iter()
            .map(|&policy| ExperimentSpec {
                policy,
                experiment: Arc::clone(self),
            })
            .collect();
        compare(&specs)
    }

    pub fn sweep_phi(&self, phis: &[f64]) -> Result<PhiSweep> {
        if phis.is_empty() {
            return Err(Error::config("phi list is empty"));
        }
        let variants = phis.iter().map(|&phi| self.with_phi(phi)).collect::<Result<Vec<_>>>()?;
        let reports = variants
            .par_iter()
            .map(|e| e.simulate(PolicyKind::Libra))
            .collect::<Result<Vec<_>>>()?;
        let rows: Vec<PhiRow> = phis
            .iter()
            .zip(&reports)
            .map(|(&phi, r)| PhiRow {
                phi,
                total_cost: r.total_cost,
                iaas_cost: r.iaas_cost,
                faas_cost: r.faas_cost,
                gateway_cost: r.gateway_cost,
                sla_violation_pct: r.sla_violation_pct,
                vm_uptime: r.vm_uptime,
            })
            .collect();
        let argmin_phi = rows
            .iter()
            .reduce(|best, r| if r.total_cost < best.total_cost { r } else { best })
            .map(|r| r.phi)
            .expect("non-empty");
        Ok(PhiSweep {
            trace_label: self.trace.label.clone(),
            rows,
            argmin_phi,
        })
    }
}

/// One policy run on a shared experiment.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub policy: PolicyKind,
    pub experiment: Arc<Experiment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub policy: PolicyKind,
    pub total_cost: f64,
    /// Cost relative to the LIBRA row, when there is one.
    pub normalized_cost: Option<f64>,
    pub sla_violation_pct: f64,
    pub vm_uptime: f64,
    pub iaas_cost: f64,
    pub faas_cost: f64,
    pub gateway_cost: f64,
    pub faas_cost_share: f64,
    pub served_vm: u64,
    pub served_faas: u64,
    pub unserved: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub trace_label: String,
    /// Ordered by policy, independent of the order the specs were given in.
    pub rows: Vec<ComparisonRow>,
    pub reports: Vec<SimReport>,
}

impl Comparison {
    pub fn row(&self, policy: PolicyKind) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.policy == policy)
    }

    pub fn report(&self, policy: PolicyKind) -> Option<&SimReport> {
        self.reports.iter().find(|r| r.policy == policy)
    }
}

/// Runs every spec (in parallel) and tabulates the results.
pub fn compare(specs: &[ExperimentSpec]) -> Result<Comparison> {
    let first = specs
        .first()
        .ok_or_else(|| Error::config("no experiments to compare"))?;
    for spec in &specs[1..] {
        let (a, b) = (&first.experiment, &spec.experiment);
        if a.trace != b.trace {
            return Err(Error::MixedExperiments(format!(
                "traces `{}` and `{}` differ",
                a.trace.label, b.trace.label
            )));
        }
        if a.sim != b.sim || a.pricing != b.pricing {
            return Err(Error::MixedExperiments("simulator or pricing settings differ".into()));
        }
    }
    let mut ordered: Vec<&ExperimentSpec> = specs.iter().collect();
    ordered.sort_by_key(|s| s.policy);
    let reports = ordered
        .par_iter()
        .map(|s| s.experiment.simulate(s.policy))
        .collect::<Result<Vec<_>>>()?;
    let libra_cost = reports
        .iter()
        .find(|r| r.policy == PolicyKind::Libra)
        .map(|r| r.total_cost);
    let rows = reports
        .iter()
        .map(|r| ComparisonRow {
            policy: r.policy,
            total_cost: r.total_cost,
            normalized_cost: libra_cost.map(|base| r.total_cost / base),
            sla_violation_pct: r.sla_violation_pct,
            vm_uptime: r.vm_uptime,
            iaas_cost: r.iaas_cost,
            faas_cost: r.faas_cost,
            gateway_cost: r.gateway_cost,
            faas_cost_share: r.faas_cost_share(),
            served_vm: r.served_vm,
            served_faas: r.served_faas,
            unserved: r.unserved,
        })
        .collect();
    Ok(Comparison {
        trace_label: first.experiment.trace.label.clone(),
        rows,
        reports,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiRow {
    pub phi: f64,
    pub total_cost: f64,
    pub iaas_cost: f64,
    pub faas_cost: f64,
    pub gateway_cost: f64,
    pub sla_violation_pct: f64,
    pub vm_uptime: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiSweep {
    pub trace_label: String,
    pub rows: Vec<PhiRow>,
    /// First phi reaching the lowest total cost.
    pub argmin_phi: f64,
}

/// Cost-indifference analysis for one request size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CipAnalysis {
    pub request_mem: f64,
    pub per_request_faas_cost: f64,
    pub cip: Vec<VmCip>,
    /// Column order of `cost_iaas` in each curve row.
    pub vm_types: Vec<String>,
    pub curves: Vec<CostCurveRow>,
    pub hybrid: Vec<HybridCurve>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VmCip {
    pub vm_type: String,
    /// `None` when the per-request FaaS cost is zero.
    pub cip: Option<CostIndifference>,
}

/// Cost curves over `rates`, the CIP of every VM type and hybrid split curves
/// at `hybrid_rates`, all for requests of `request_mem` MB.
pub fn analyze_cip(
    pricing: &PricingConfig,
    execution: &ExecutionModel,
    request_mem: f64,
    hybrid_vm: &str,
    rates: &[f64],
    hybrid_rates: &[f64],
    grid: &[f64],
) -> Result<CipAnalysis> {
    pricing.validate()?;
    execution.validate()?;
    let vm = pricing.vm_type(hybrid_vm)?;
    let cip = pricing
        .vm_types
        .iter()
        .map(|vm| {
            let cip = match pricing::cost_indifference_point(request_mem, execution, pricing, vm) {
                Ok(c) => Some(c),
                Err(Error::NoFiniteCip) => None,
                Err(e) => return Err(e),
            };
            Ok(VmCip {
                vm_type: vm.name.clone(),
                cip,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let hybrid = hybrid_rates
        .iter()
        .map(|&n| pricing::hybrid_cost_curve(n, grid, request_mem, execution, pricing, vm))
        .collect::<Result<Vec<_>>>()?;
    Ok(CipAnalysis {
        request_mem,
        per_request_faas_cost: pricing::faas_request_cost(request_mem, execution, pricing)?,
        cip,
        vm_types: pricing.vm_types.iter().map(|v| v.name.clone()).collect(),
        curves: pricing::cost_curves(rates, request_mem, execution, pricing, vm, grid)?,
        hybrid,
    })
}

//! Execution-time model and the FaaS / IaaS cost functions.
//!
//! FaaS is billed per request: quantized execution time times a memory-keyed
//! rate, plus a fixed per-request fee. IaaS is billed per leased instance
//! regardless of utilization, so its cost is a step function of the request
//! rate. The rate where one instance starts beating FaaS is the
//! cost-indifference point (CIP).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{ceil_tol, quantize_up};

pub const SECONDS_PER_HOUR: f64 = 3600.0;

/// Execution time of one request as a function of allocated memory.
///
/// FaaS time decays exponentially from `t_min` (at `m_min`) towards
/// `t_max_mem_time` (at large memory). VM time is `tau` times the FaaS time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExecutionModel {
    /// Execution time at `m_min`, seconds.
    pub t_min: f64,
    /// Execution time at `m_max`, seconds.
    pub t_max_mem_time: f64,
    pub m_min: f64,
    pub m_max: f64,
    /// Decay constant, 1/MB.
    pub lambda_decay: f64,
    /// VM-to-FaaS execution time ratio.
    #[serde(default = "one")]
    pub tau: f64,
}

fn one() -> f64 {
    1.0
}

impl ExecutionModel {
    /// A model whose execution time is `t` at every memory size.
    pub fn flat(t: f64) -> Self {
        Self {
            t_min: t,
            t_max_mem_time: t,
            m_min: 128.0,
            m_max: 10_240.0,
            lambda_decay: 0.0,
            tau: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_max_mem_time > 0.0 && self.t_min >= self.t_max_mem_time) {
            return Err(Error::config(format!(
                "execution model needs t_min >= t_max_mem_time > 0 (got {} and {})",
                self.t_min, self.t_max_mem_time
            )));
        }
        if !(self.m_min > 0.0 && self.m_min < self.m_max) {
            return Err(Error::config(format!(
                "execution model needs 0 < m_min < m_max (got {} and {})",
                self.m_min, self.m_max
            )));
        }
        if !(self.lambda_decay >= 0.0 && self.lambda_decay.is_finite()) {
            return Err(Error::config("lambda_decay must be finite and >= 0"));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::config("tau must be finite and > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VmType {
    pub name: String,
    pub memory_mb: f64,
    pub cost_per_hour: f64,
    /// Provisioning delay, seconds.
    pub cold_start: f64,
}

impl VmType {
    pub fn cost_per_second(&self) -> f64 {
        self.cost_per_hour / SECONDS_PER_HOUR
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.memory_mb > 0.0) {
            return Err(Error::config(format!("{}: memory_mb must be > 0", self.name)));
        }
        if !(self.cost_per_hour >= 0.0 && self.cost_per_hour.is_finite()) {
            return Err(Error::config(format!("{}: cost_per_hour must be >= 0", self.name)));
        }
        if !(self.cold_start >= 0.0 && self.cold_start.is_finite()) {
            return Err(Error::config(format!("{}: cold_start must be >= 0", self.name)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingConfig {
    /// FaaS compute price in $ per MB-second; `C_FaaS(m)` is this times `m`.
    pub faas_cost_per_mb_second: f64,
    /// Fixed fee charged on every invocation (gateway, request fee), $.
    #[serde(default)]
    pub faas_fixed_per_request: f64,
    /// Execution time is rounded up to a multiple of this, seconds.
    #[serde(default = "default_quantum")]
    pub faas_billing_quantum: f64,
    #[serde(default)]
    pub vm_types: Vec<VmType>,
}

fn default_quantum() -> f64 {
    0.001
}

impl PricingConfig {
    pub fn from_toml_str(s: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg = Self::from_toml_str(&text).map_err(|source| Error::Toml {
            path: path.to_path_buf(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.faas_cost_per_mb_second >= 0.0 && self.faas_cost_per_mb_second.is_finite()) {
            return Err(Error::config("faas_cost_per_mb_second must be >= 0"));
        }
        if !(self.faas_fixed_per_request >= 0.0 && self.faas_fixed_per_request.is_finite()) {
            return Err(Error::config("faas_fixed_per_request must be >= 0"));
        }
        if !(self.faas_billing_quantum > 0.0 && self.faas_billing_quantum.is_finite()) {
            return Err(Error::config("faas_billing_quantum must be > 0"));
        }
        for vm in &self.vm_types {
            vm.validate()?;
        }
        Ok(())
    }

    /// `C_FaaS(m)` in $/s for a function configured with `m` MB.
    pub fn faas_rate(&self, m: f64) -> f64 {
        self.faas_cost_per_mb_second * m
    }

    pub fn vm_type(&self, name: &str) -> Result<&VmType> {
        self.vm_types
            .iter()
            .find(|vm| vm.name == name)
            .ok_or_else(|| Error::config(format!("unknown VM type `{name}`")))
    }

    /// Cost of one invocation that executes for `exec_time` seconds.
    pub fn faas_invocation_cost(&self, exec_time: f64, m: f64) -> f64 {
        quantize_up(exec_time, self.faas_billing_quantum) * self.faas_rate(m) + self.faas_fixed_per_request
    }
}

/// FaaS execution time at `m` MB.
pub fn faas_exec_time(m: f64, model: &ExecutionModel) -> Result<f64> {
    if !(m >= model.m_min && m <= model.m_max) {
        return Err(Error::domain(format!(
            "memory {m} MB outside [{}, {}]",
            model.m_min, model.m_max
        )));
    }
    let span = model.t_min - model.t_max_mem_time;
    Ok(model.t_max_mem_time + span * (-model.lambda_decay * (m - model.m_min)).exp())
}

/// VM execution time at `m` MB: `tau` times the FaaS time.
pub fn vm_exec_time(m: f64, model: &ExecutionModel) -> Result<f64> {
    Ok(model.tau * faas_exec_time(m, model)?)
}

/// Cost of a single FaaS request: quantized execution cost plus the fixed fee.
pub fn faas_request_cost(m: f64, model: &ExecutionModel, pricing: &PricingConfig) -> Result<f64> {
    let t = faas_exec_time(m, model)?;
    Ok(pricing.faas_invocation_cost(t, m))
}

/// FaaS cost in $/s for a sustained rate of `n` requests/s.
pub fn faas_cost_rate(n: f64, m: f64, model: &ExecutionModel, pricing: &PricingConfig) -> Result<f64> {
    if !(n >= 0.0) {
        return Err(Error::domain(format!("request rate must be >= 0, got {n}")));
    }
    Ok(n * faas_request_cost(m, model, pricing)?)
}

/// Maximum request rate one VM sustains, from Little's law: `(M / m) / t_vm`.
///
/// Returned as a real number; callers that need integral slots floor it.
pub fn r_max(vm: &VmType, m: f64, t_vm: f64) -> Result<f64> {
    if !(m > 0.0) {
        return Err(Error::domain(format!("request memory must be > 0, got {m}")));
    }
    if !(t_vm > 0.0) {
        return Err(Error::domain(format!("VM execution time must be > 0, got {t_vm}")));
    }
    if m > vm.memory_mb {
        return Err(Error::Capacity {
            vm_memory_mb: vm.memory_mb,
            request_mb: m,
        });
    }
    Ok(vm.memory_mb / m / t_vm)
}

/// Number of instances needed to carry `n` requests/s.
pub fn instances_needed(n: f64, r_max: f64) -> u64 {
    ceil_tol(n / r_max) as u64
}

/// IaaS cost in $/s: `ceil(n / r_max)` instances at the VM's per-second price.
pub fn iaas_cost_rate(n: f64, r_max: f64, vm: &VmType) -> Result<f64> {
    if !(n >= 0.0) {
        return Err(Error::domain(format!("request rate must be >= 0, got {n}")));
    }
    if !(r_max > 0.0) {
        return Err(Error::domain(format!("r_max must be > 0, got {r_max}")));
    }
    Ok(instances_needed(n, r_max) as f64 * vm.cost_per_second())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostIndifference {
    /// Request rate where FaaS cost equals the cost of one instance, req/s.
    pub rate: f64,
    /// Capacity of one instance at this request size, req/s.
    pub r_max: f64,
    /// False when the crossing lies beyond one instance's capacity, in which
    /// case one VM is cheaper than FaaS only past its own saturation point.
    pub within_capacity: bool,
}

/// Rate at which FaaS cost equals the single-instance IaaS cost.
pub fn cost_indifference_point(
    m: f64,
    model: &ExecutionModel,
    pricing: &PricingConfig,
    vm: &VmType,
) -> Result<CostIndifference> {
    let per_request = faas_request_cost(m, model, pricing)?;
    if per_request <= 0.0 {
        return Err(Error::NoFiniteCip);
    }
    let capacity = r_max(vm, m, vm_exec_time(m, model)?)?;
    let rate = vm.cost_per_second() / per_request;
    Ok(CostIndifference {
        rate,
        r_max: capacity,
        within_capacity: rate <= capacity,
    })
}

/// Rates in `(0, upper]` where the sign of `cost_FaaS - cost_IaaS` flips,
/// found by scanning in increments of `step`. Each returned value is the
/// first scanned rate after the flip.
pub fn cost_crossings(
    m: f64,
    model: &ExecutionModel,
    pricing: &PricingConfig,
    vm: &VmType,
    step: f64,
    upper: f64,
) -> Result<Vec<f64>> {
    if !(step > 0.0 && upper > 0.0) {
        return Err(Error::domain("scan step and upper bound must be > 0"));
    }
    let capacity = r_max(vm, m, vm_exec_time(m, model)?)?;
    let per_request = faas_request_cost(m, model, pricing)?;
    let steps = (upper / step).floor() as u64;
    let mut crossings = Vec::new();
    let mut prev_sign = 0i8;
    for i in 1..=steps {
        let n = i as f64 * step;
        let diff = n * per_request - iaas_cost_rate(n, capacity, vm)?;
        let sign = if diff > 0.0 {
            1
        } else if diff < 0.0 {
            -1
        } else {
            0
        };
        if prev_sign != 0 && sign != 0 && sign != prev_sign {
            crossings.push(n);
        }
        if sign != 0 {
            prev_sign = sign;
        }
    }
    Ok(crossings)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HybridPoint {
    pub faas_fraction: f64,
    /// Combined FaaS + IaaS cost, $/s.
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HybridCurve {
    pub rate: f64,
    pub points: Vec<HybridPoint>,
    /// Cheapest split; ties go to the smaller FaaS fraction.
    pub best: HybridPoint,
}

/// Cost of serving `n` req/s when a fraction `f` goes to FaaS and the rest to
/// IaaS, for each `f` in `grid`.
pub fn hybrid_cost_curve(
    n: f64,
    grid: &[f64],
    m: f64,
    model: &ExecutionModel,
    pricing: &PricingConfig,
    vm: &VmType,
) -> Result<HybridCurve> {
    if !(n >= 0.0) {
        return Err(Error::domain(format!("request rate must be >= 0, got {n}")));
    }
    if grid.is_empty() {
        return Err(Error::domain("split grid is empty"));
    }
    if let Some(f) = grid.iter().find(|f| !(**f >= 0.0 && **f <= 1.0)) {
        return Err(Error::domain(format!("split fraction {f} outside [0, 1]")));
    }
    let capacity = r_max(vm, m, vm_exec_time(m, model)?)?;
    let mut points = Vec::with_capacity(grid.len());
    for &f in grid {
        let cost = faas_cost_rate(f * n, m, model, pricing)? + iaas_cost_rate((1.0 - f) * n, capacity, vm)?;
        points.push(HybridPoint { faas_fraction: f, cost });
    }
    let best = points
        .iter()
        .copied()
        .reduce(|best, p| {
            if p.cost < best.cost || (p.cost == best.cost && p.faas_fraction < best.faas_fraction) {
                p
            } else {
                best
            }
        })
        .expect("grid is non-empty");
    Ok(HybridCurve { rate: n, points, best })
}

/// Evenly spaced split fractions `0, 1/steps, ..., 1`.
pub fn split_grid(steps: u32) -> Vec<f64> {
    let steps = steps.max(1);
    (0..=steps).map(|i| i as f64 / steps as f64).collect()
}

/// One row of the plot-ready cost curve table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostCurveRow {
    pub rate: f64,
    pub cost_faas: f64,
    /// One entry per VM type, in config order.
    pub cost_iaas: Vec<f64>,
    /// Cheapest FaaS/IaaS split using the reference VM type.
    pub hybrid_min: f64,
}

/// Cost curves over `rates` for every configured VM type, with the hybrid
/// minimum computed against `hybrid_vm`.
pub fn cost_curves(
    rates: &[f64],
    m: f64,
    model: &ExecutionModel,
    pricing: &PricingConfig,
    hybrid_vm: &VmType,
    grid: &[f64],
) -> Result<Vec<CostCurveRow>> {
    let t_vm = vm_exec_time(m, model)?;
    let capacities = pricing
        .vm_types
        .iter()
        .map(|vm| r_max(vm, m, t_vm))
        .collect::<Result<Vec<_>>>()?;
    rates
        .iter()
        .map(|&rate| {
            let cost_iaas = pricing
                .vm_types
                .iter()
                .zip(&capacities)
                .map(|(vm, &cap)| iaas_cost_rate(rate, cap, vm))
                .collect::<Result<Vec<_>>>()?;
            Ok(CostCurveRow {
                rate,
                cost_faas: faas_cost_rate(rate, m, model, pricing)?,
                cost_iaas,
                hybrid_min: hybrid_cost_curve(rate, grid, m, model, pricing, hybrid_vm)?.best.cost,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decaying() -> ExecutionModel {
        ExecutionModel {
            t_min: 10.0,
            t_max_mem_time: 2.0,
            m_min: 128.0,
            m_max: 3008.0,
            lambda_decay: 0.005,
            tau: 1.0,
        }
    }

    fn m4_large() -> VmType {
        VmType {
            name: "m4.large".into(),
            memory_mb: 8192.0,
            cost_per_hour: 0.1,
            cold_start: 100.0,
        }
    }

    fn pricing(per_request_at_512: f64) -> PricingConfig {
        PricingConfig {
            faas_cost_per_mb_second: per_request_at_512 / 512.0,
            faas_fixed_per_request: 0.0,
            faas_billing_quantum: 0.001,
            vm_types: vec![m4_large()],
        }
    }

    #[test]
    fn exec_time_at_minimum_memory_is_t_min() {
        assert_eq!(faas_exec_time(128.0, &decaying()).unwrap(), 10.0);
    }

    #[test]
    fn exec_time_without_decay_is_constant() {
        let model = ExecutionModel {
            lambda_decay: 0.0,
            ..decaying()
        };
        for m in [128.0, 700.0, 3008.0] {
            assert_eq!(faas_exec_time(m, &model).unwrap(), 10.0);
        }
    }

    #[test]
    fn exec_time_rejects_memory_outside_range() {
        assert!(matches!(faas_exec_time(64.0, &decaying()), Err(Error::Domain(_))));
        assert!(matches!(faas_exec_time(4096.0, &decaying()), Err(Error::Domain(_))));
        assert!(faas_exec_time(f64::NAN, &decaying()).is_err());
    }

    #[test]
    fn vm_exec_time_scales_by_tau() {
        let half = ExecutionModel { tau: 0.5, ..decaying() };
        assert_eq!(vm_exec_time(128.0, &half).unwrap(), 5.0);
        assert_eq!(
            vm_exec_time(512.0, &decaying()).unwrap(),
            faas_exec_time(512.0, &decaying()).unwrap()
        );
    }

    #[test]
    fn faas_cost_rejects_negative_rate() {
        let model = ExecutionModel::flat(1.0);
        assert!(faas_cost_rate(-1.0, 512.0, &model, &pricing(1e-5)).is_err());
        assert_eq!(faas_cost_rate(0.0, 512.0, &model, &pricing(1e-5)).unwrap(), 0.0);
    }

    #[test]
    fn billing_quantum_rounds_execution_up() {
        let model = ExecutionModel::flat(0.25);
        let mut p = pricing(1.0);
        p.faas_billing_quantum = 0.1;
        // 0.25 s billed as 0.3 s
        let cost = faas_cost_rate(1.0, 512.0, &model, &p).unwrap();
        assert!((cost - 0.3).abs() < 1e-12);
    }

    #[test]
    fn r_max_errors() {
        let vm = m4_large();
        assert!(matches!(r_max(&vm, 9000.0, 1.0), Err(Error::Capacity { .. })));
        assert!(r_max(&vm, 0.0, 1.0).is_err());
        assert!(r_max(&vm, 512.0, 0.0).is_err());
    }

    #[test]
    fn iaas_cost_is_a_ceiling_step() {
        let vm = m4_large();
        assert_eq!(iaas_cost_rate(0.0, 16.0, &vm).unwrap(), 0.0);
        assert_eq!(iaas_cost_rate(16.0, 16.0, &vm).unwrap(), vm.cost_per_second());
        assert_eq!(iaas_cost_rate(16.5, 16.0, &vm).unwrap(), 2.0 * vm.cost_per_second());
        assert!(iaas_cost_rate(1.0, 0.0, &vm).is_err());
    }

    #[test]
    fn zero_faas_cost_has_no_cip() {
        let p = PricingConfig {
            faas_cost_per_mb_second: 0.0,
            ..pricing(0.0)
        };
        let err = cost_indifference_point(512.0, &ExecutionModel::flat(1.0), &p, &m4_large());
        assert!(matches!(err, Err(Error::NoFiniteCip)));
    }

    #[test]
    fn cip_beyond_capacity_is_flagged() {
        // FaaS so cheap that a full VM still costs more.
        let p = pricing(1e-7);
        let cip = cost_indifference_point(512.0, &ExecutionModel::flat(1.0), &p, &m4_large()).unwrap();
        assert!(!cip.within_capacity);
        assert!(cip.rate > cip.r_max);
    }

    #[test]
    fn crossings_include_the_cip() {
        let p = pricing(0.1 / 3600.0 / 4.0);
        let model = ExecutionModel::flat(1.0);
        let xs = cost_crossings(512.0, &model, &p, &m4_large(), 0.01, 40.0).unwrap();
        assert_eq!(xs.len(), 1);
        assert!((xs[0] - 4.0).abs() <= 0.01 + 1e-9, "{xs:?}");
    }

    #[test]
    fn crossings_past_the_first_step() {
        // CIP at 12 req/s; just past 16 req/s a second VM makes FaaS cheaper again.
        let p = pricing(0.1 / 3600.0 / 12.0);
        let model = ExecutionModel::flat(1.0);
        let xs = cost_crossings(512.0, &model, &p, &m4_large(), 0.01, 30.0).unwrap();
        assert_eq!(xs.len(), 3, "{xs:?}");
        assert!((xs[0] - 12.0).abs() <= 0.01 + 1e-9);
        assert!((xs[1] - 16.01).abs() < 1e-9);
        assert!((xs[2] - 24.0).abs() <= 0.01 + 1e-9);
    }

    #[test]
    fn hybrid_curve_validates_grid() {
        let p = pricing(1e-5);
        let model = ExecutionModel::flat(1.0);
        let vm = m4_large();
        assert!(hybrid_cost_curve(10.0, &[], 512.0, &model, &p, &vm).is_err());
        assert!(hybrid_cost_curve(10.0, &[0.0, 1.5], 512.0, &model, &p, &vm).is_err());
        assert!(hybrid_cost_curve(-1.0, &[0.0], 512.0, &model, &p, &vm).is_err());
    }

    #[test]
    fn hybrid_ties_prefer_less_faas() {
        // Free FaaS and free VMs: every split costs zero.
        let mut p = pricing(0.0);
        p.vm_types[0].cost_per_hour = 0.0;
        let vm = p.vm_types[0].clone();
        let curve = hybrid_cost_curve(10.0, &split_grid(10), 512.0, &ExecutionModel::flat(1.0), &p, &vm).unwrap();
        assert_eq!(curve.best.faas_fraction, 0.0);
    }

    #[test]
    fn pricing_config_parses_toml() {
        let cfg = PricingConfig::from_toml_str(
            r#"
            faas_cost_per_mb_second = 1.3e-8
            faas_fixed_per_request = 2e-7

            [[vm_types]]
            name = "m4.large"
            memory_mb = 8192
            cost_per_hour = 0.1
            cold_start = 100
            "#,
        )
        .unwrap();
        assert_eq!(cfg.faas_billing_quantum, 0.001);
        assert_eq!(cfg.vm_type("m4.large").unwrap().memory_mb, 8192.0);
        assert!(cfg.vm_type("t2.nano").is_err());
        cfg.validate().unwrap();
    }

    #[test]
    fn validation_rejects_bad_values() {
        let mut p = pricing(1e-5);
        p.faas_billing_quantum = 0.0;
        assert!(p.validate().is_err());
        let mut m = decaying();
        m.t_max_mem_time = 11.0;
        assert!(m.validate().is_err());
        let mut m = decaying();
        m.m_max = 100.0;
        assert!(m.validate().is_err());
    }
}

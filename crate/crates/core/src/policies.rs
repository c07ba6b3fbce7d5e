//! Provisioning strategies driven by the simulator.
//!
//! Every policy sees one [`EpochObservation`] per epoch and may answer with a
//! [`FleetCommand`]. How individual requests are dispatched is fixed per
//! policy through its [`RoutingMode`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scaling_manager::{self, ScalingConfig};
use crate::trace::TraceWorkload;
use crate::traffic_monitor::{MonitorConfig, TrafficMonitor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Max,
    Auto,
    Spock,
    FaasOnly,
    Libra,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::Max,
        PolicyKind::Auto,
        PolicyKind::Spock,
        PolicyKind::FaasOnly,
        PolicyKind::Libra,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PolicyKind::Max => "max",
            PolicyKind::Auto => "auto",
            PolicyKind::Spock => "spock",
            PolicyKind::FaasOnly => "faas_only",
            PolicyKind::Libra => "libra",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "max" => Ok(PolicyKind::Max),
            "auto" => Ok(PolicyKind::Auto),
            "spock" => Ok(PolicyKind::Spock),
            "faas_only" | "faas" => Ok(PolicyKind::FaasOnly),
            "libra" => Ok(PolicyKind::Libra),
            other => Err(Error::config(format!("unknown policy `{other}`"))),
        }
    }
}

/// How the load balancer dispatches each request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RoutingMode {
    /// Everything goes to FaaS.
    FaasOnly,
    /// Round-robin over ready VMs; FIFO queue when every slot is busy.
    VmQueue,
    /// As `VmQueue`, but while any instance is provisioning, requests that
    /// would queue go to FaaS.
    VmSpillDuringScaleOut,
    /// VM-first up to `floor(rho * vm_reqs)` requests per second, the rest
    /// (and anything that finds no free slot) to FaaS.
    CappedVmFirst { rho: f64 },
}

/// What a policy sees at the end of each epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochObservation {
    /// End of the epoch, seconds.
    pub now: f64,
    pub epoch_length: f64,
    /// Requests that arrived during the epoch.
    pub arrivals: u64,
    pub ready_vms: u32,
    pub provisioning_vms: u32,
}

impl EpochObservation {
    pub fn active_vms(&self) -> u32 {
        self.ready_vms + self.provisioning_vms
    }
}

/// Desired fleet size, and for controllers that drive a capped router, the
/// new `vm_reqs` rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FleetCommand {
    pub target_instances: u32,
    pub vm_reqs: Option<f64>,
}

pub trait ProvisioningPolicy: Send {
    fn kind(&self) -> PolicyKind;

    fn routing(&self) -> RoutingMode;

    /// Instances that are already ready at t = 0.
    fn warm_instances(&self) -> u32 {
        0
    }

    /// Whether the run pays for an always-on gateway instance.
    fn bills_gateway(&self) -> bool {
        false
    }

    fn on_epoch(&mut self, obs: &EpochObservation) -> Result<Option<FleetCommand>>;
}

/// Instances needed to carry the trace's busiest second.
pub fn max_provision(trace: &TraceWorkload, r_max_int: u32) -> Result<u32> {
    if trace.counts.is_empty() {
        return Err(Error::EmptyTrace);
    }
    if r_max_int == 0 {
        return Err(Error::config("r_max_int must be >= 1"));
    }
    let peak = trace.peak_per_second();
    Ok(peak.div_ceil(u64::from(r_max_int)) as u32)
}

/// Offline over-provisioning for the peak rate, held for the whole run.
#[derive(Debug, Clone)]
pub struct MaxPolicy {
    instances: u32,
}

impl MaxPolicy {
    pub fn new(trace: &TraceWorkload, r_max_int: u32) -> Result<Self> {
        Ok(Self {
            instances: max_provision(trace, r_max_int)?,
        })
    }

    pub fn instances(&self) -> u32 {
        self.instances
    }
}

impl ProvisioningPolicy for MaxPolicy {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Max
    }

    fn routing(&self) -> RoutingMode {
        RoutingMode::VmQueue
    }

    fn warm_instances(&self) -> u32 {
        self.instances
    }

    fn on_epoch(&mut self, _obs: &EpochObservation) -> Result<Option<FleetCommand>> {
        Ok(None)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct FaasOnlyPolicy;

impl ProvisioningPolicy for FaasOnlyPolicy {
    fn kind(&self) -> PolicyKind {
        PolicyKind::FaasOnly
    }

    fn routing(&self) -> RoutingMode {
        RoutingMode::FaasOnly
    }

    fn on_epoch(&mut self, _obs: &EpochObservation) -> Result<Option<FleetCommand>> {
        Ok(None)
    }
}

/// Threshold autoscaler on requests per ready instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AutoScalerConfig {
    /// Scale out when requests/s per instance exceed this.
    pub scale_out_above: f64,
    /// Scale in when requests/s per instance fall below this.
    pub scale_in_below: f64,
    pub scaling_group_size: u32,
    /// Seconds after a scaling action during which no other action fires.
    pub cooldown: f64,
    pub min_instances: u32,
    pub max_instances: u32,
}

impl AutoScalerConfig {
    /// Scale out at 80% and in at 30% of per-instance capacity, one instance
    /// at a time, cooling down for one cold start.
    pub fn for_capacity(r_max_int: u32, cold_start: f64) -> Self {
        Self {
            scale_out_above: 0.8 * f64::from(r_max_int),
            scale_in_below: 0.3 * f64::from(r_max_int),
            scaling_group_size: 1,
            cooldown: cold_start,
            min_instances: 1,
            max_instances: 10_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale_in_below < self.scale_out_above) {
            return Err(Error::config("scale_in_below must be < scale_out_above"));
        }
        if self.scaling_group_size == 0 {
            return Err(Error::config("scaling_group_size must be >= 1"));
        }
        if self.min_instances > self.max_instances {
            return Err(Error::config("min_instances must be <= max_instances"));
        }
        if !(self.cooldown >= 0.0) {
            return Err(Error::config("cooldown must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleAction {
    Add(u32),
    Remove(u32),
    None,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AutoScalerState {
    pub last_action_at: Option<f64>,
}

impl AutoScalerState {
    fn cooling(&self, now: f64, cooldown: f64) -> bool {
        self.last_action_at.is_some_and(|t| now < t + cooldown)
    }
}

/// One autoscaler evaluation. `per_instance` is the observed request rate per
/// ready instance; `active` counts ready and provisioning instances.
pub fn auto_tick(
    per_instance: f64,
    active: u32,
    now: f64,
    state: &mut AutoScalerState,
    cfg: &AutoScalerConfig,
) -> ScaleAction {
    if state.cooling(now, cfg.cooldown) {
        return ScaleAction::None;
    }
    let action = if per_instance > cfg.scale_out_above {
        match cfg.max_instances.saturating_sub(active).min(cfg.scaling_group_size) {
            0 => ScaleAction::None,
            n => ScaleAction::Add(n),
        }
    } else if per_instance < cfg.scale_in_below {
        match active.saturating_sub(cfg.min_instances).min(cfg.scaling_group_size) {
            0 => ScaleAction::None,
            n => ScaleAction::Remove(n),
        }
    } else {
        ScaleAction::None
    };
    if action != ScaleAction::None {
        state.last_action_at = Some(now);
    }
    action
}

/// Where a request goes under the scale-out spill overlay.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OverlayRoute {
    Vm,
    Faas,
    Queue,
}

/// Spill decision: FaaS only for requests that would otherwise queue, and
/// only while a scale-out is in flight.
pub fn spock_route_overlay(scale_out_in_flight: bool, free_slot: bool) -> OverlayRoute {
    match (free_slot, scale_out_in_flight) {
        (true, _) => OverlayRoute::Vm,
        (false, true) => OverlayRoute::Faas,
        (false, false) => OverlayRoute::Queue,
    }
}

/// Reactive threshold autoscaling; with `spill` set it becomes the
/// Spock-style hybrid that hides scale-out delay behind FaaS.
#[derive(Debug, Clone)]
pub struct AutoScalingPolicy {
    cfg: AutoScalerConfig,
    state: AutoScalerState,
    spill: bool,
}

impl AutoScalingPolicy {
    pub fn auto(cfg: AutoScalerConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            state: AutoScalerState::default(),
            spill: false,
        })
    }

    pub fn spock(cfg: AutoScalerConfig) -> Result<Self> {
        Ok(Self {
            spill: true,
            ..Self::auto(cfg)?
        })
    }
}

impl ProvisioningPolicy for AutoScalingPolicy {
    fn kind(&self) -> PolicyKind {
        if self.spill {
            PolicyKind::Spock
        } else {
            PolicyKind::Auto
        }
    }

    fn routing(&self) -> RoutingMode {
        if self.spill {
            RoutingMode::VmSpillDuringScaleOut
        } else {
            RoutingMode::VmQueue
        }
    }

    fn warm_instances(&self) -> u32 {
        self.cfg.min_instances
    }

    fn on_epoch(&mut self, obs: &EpochObservation) -> Result<Option<FleetCommand>> {
        let rate = obs.arrivals as f64 / obs.epoch_length;
        let per_instance = match (obs.ready_vms, obs.arrivals) {
            (0, 0) => 0.0,
            (0, _) => f64::INFINITY,
            (ready, _) => rate / f64::from(ready),
        };
        let active = obs.active_vms();
        let target = match auto_tick(per_instance, active, obs.now, &mut self.state, &self.cfg) {
            ScaleAction::Add(n) => active + n,
            ScaleAction::Remove(n) => active - n,
            ScaleAction::None => return Ok(None),
        };
        Ok(Some(FleetCommand {
            target_instances: target,
            vm_reqs: None,
        }))
    }
}

/// Traffic monitor feeding the scaling manager every K epochs, with a capped
/// VM-first router.
#[derive(Debug, Clone)]
pub struct LibraPolicy {
    monitor: TrafficMonitor,
    scaling: ScalingConfig,
}

impl LibraPolicy {
    /// `sim_epoch_length` is the epoch the simulator will drive the policy
    /// with; it must match the monitor's.
    pub fn new(monitor: MonitorConfig, scaling: ScalingConfig, sim_epoch_length: f64) -> Result<Self> {
        scaling.validate()?;
        if monitor.epoch_length != sim_epoch_length {
            return Err(Error::config(format!(
                "traffic monitor epoch ({} s) differs from simulator epoch ({} s)",
                monitor.epoch_length, sim_epoch_length
            )));
        }
        Ok(Self {
            monitor: TrafficMonitor::new(monitor)?,
            scaling,
        })
    }

    pub fn scaling(&self) -> &ScalingConfig {
        &self.scaling
    }
}

impl ProvisioningPolicy for LibraPolicy {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Libra
    }

    fn routing(&self) -> RoutingMode {
        RoutingMode::CappedVmFirst { rho: self.scaling.rho }
    }

    fn bills_gateway(&self) -> bool {
        true
    }

    fn on_epoch(&mut self, obs: &EpochObservation) -> Result<Option<FleetCommand>> {
        let Some(estimate) = self.monitor.observe(obs.arrivals as f64)? else {
            return Ok(None);
        };
        let (avg, std) = estimate.per_second(self.monitor.config().epoch_length);
        let decision = scaling_manager::decide(avg, std, obs.active_vms(), &self.scaling)?;
        Ok(Some(FleetCommand {
            target_instances: decision.target_instances,
            vm_reqs: Some(decision.vm_reqs),
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(counts: &[u64]) -> TraceWorkload {
        TraceWorkload::new(counts.to_vec(), "t")
    }

    fn auto_cfg() -> AutoScalerConfig {
        AutoScalerConfig {
            scale_out_above: 13.0,
            scale_in_below: 4.0,
            scaling_group_size: 2,
            cooldown: 100.0,
            min_instances: 1,
            max_instances: 10,
        }
    }

    fn obs(now: f64, arrivals: u64, ready: u32, provisioning: u32) -> EpochObservation {
        EpochObservation {
            now,
            epoch_length: 1.0,
            arrivals,
            ready_vms: ready,
            provisioning_vms: provisioning,
        }
    }

    #[test]
    fn max_provision_cases() {
        assert_eq!(max_provision(&trace(&[3, 100, 40]), 16).unwrap(), 7);
        assert_eq!(max_provision(&trace(&[16]), 16).unwrap(), 1);
        assert_eq!(max_provision(&trace(&[0, 0, 0]), 16).unwrap(), 0);
        assert!(matches!(max_provision(&trace(&[]), 16), Err(Error::EmptyTrace)));
    }

    #[test]
    fn auto_tick_scales_out_by_group() {
        let mut st = AutoScalerState::default();
        assert_eq!(auto_tick(20.0, 3, 0.0, &mut st, &auto_cfg()), ScaleAction::Add(2));
    }

    #[test]
    fn auto_tick_within_band_is_noop() {
        let mut st = AutoScalerState::default();
        assert_eq!(auto_tick(8.0, 3, 0.0, &mut st, &auto_cfg()), ScaleAction::None);
        assert_eq!(st.last_action_at, None);
    }

    #[test]
    fn auto_tick_clamps_at_bounds() {
        let mut st = AutoScalerState::default();
        assert_eq!(auto_tick(50.0, 9, 0.0, &mut st, &auto_cfg()), ScaleAction::Add(1));
        let mut st = AutoScalerState::default();
        assert_eq!(auto_tick(50.0, 10, 0.0, &mut st, &auto_cfg()), ScaleAction::None);
        let mut st = AutoScalerState::default();
        assert_eq!(auto_tick(0.0, 2, 0.0, &mut st, &auto_cfg()), ScaleAction::Remove(1));
        let mut st = AutoScalerState::default();
        assert_eq!(auto_tick(0.0, 1, 0.0, &mut st, &auto_cfg()), ScaleAction::None);
    }

    #[test]
    fn auto_tick_respects_cooldown() {
        let mut st = AutoScalerState::default();
        let cfg = auto_cfg();
        assert_eq!(auto_tick(20.0, 1, 10.0, &mut st, &cfg), ScaleAction::Add(2));
        assert_eq!(auto_tick(20.0, 3, 50.0, &mut st, &cfg), ScaleAction::None);
        assert_eq!(auto_tick(20.0, 3, 109.0, &mut st, &cfg), ScaleAction::None);
        assert_eq!(auto_tick(20.0, 3, 110.0, &mut st, &cfg), ScaleAction::Add(2));
    }

    #[test]
    fn auto_config_validation() {
        assert!(AutoScalerConfig {
            scale_in_below: 13.0,
            ..auto_cfg()
        }
        .validate()
        .is_err());
        assert!(AutoScalerConfig {
            scaling_group_size: 0,
            ..auto_cfg()
        }
        .validate()
        .is_err());
        assert!(AutoScalerConfig {
            min_instances: 11,
            ..auto_cfg()
        }
        .validate()
        .is_err());
        let d = AutoScalerConfig::for_capacity(16, 100.0);
        assert!((d.scale_out_above - 12.8).abs() < 1e-12);
        assert!((d.scale_in_below - 4.8).abs() < 1e-12);
        d.validate().unwrap();
    }

    #[test]
    fn auto_policy_with_no_ready_vms_scales_out() {
        let mut p = AutoScalingPolicy::auto(AutoScalerConfig {
            min_instances: 0,
            ..auto_cfg()
        })
        .unwrap();
        let cmd = p.on_epoch(&obs(1.0, 5, 0, 0)).unwrap().unwrap();
        assert_eq!(cmd.target_instances, 2);
        assert_eq!(cmd.vm_reqs, None);
        // idle with nothing running stays put
        let mut p = AutoScalingPolicy::auto(AutoScalerConfig {
            min_instances: 0,
            ..auto_cfg()
        })
        .unwrap();
        assert_eq!(p.on_epoch(&obs(1.0, 0, 0, 0)).unwrap(), None);
    }

    #[test]
    fn spock_overlay() {
        assert_eq!(spock_route_overlay(true, false), OverlayRoute::Faas);
        assert_eq!(spock_route_overlay(false, false), OverlayRoute::Queue);
        assert_eq!(spock_route_overlay(true, true), OverlayRoute::Vm);
        assert_eq!(spock_route_overlay(false, true), OverlayRoute::Vm);
    }

    #[test]
    fn policy_kinds_parse() {
        for kind in PolicyKind::ALL {
            assert_eq!(kind.as_str().parse::<PolicyKind>().unwrap(), kind);
        }
        assert_eq!("FaaS-Only".parse::<PolicyKind>().unwrap(), PolicyKind::FaasOnly);
        assert!("pid".parse::<PolicyKind>().is_err());
    }

    fn libra(k: u64) -> LibraPolicy {
        LibraPolicy::new(
            MonitorConfig {
                report_every_k: k,
                ..Default::default()
            },
            ScalingConfig {
                phi: 1.0,
                cip: 4.0,
                r_max_int: 16,
                rho: 0.8,
            },
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn libra_rejects_mismatched_epochs() {
        let err = LibraPolicy::new(
            MonitorConfig {
                epoch_length: 10.0,
                ..Default::default()
            },
            *libra(1).scaling(),
            1.0,
        );
        assert!(matches!(err, Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn libra_decides_every_k_epochs() {
        let mut p = libra(3);
        assert_eq!(p.on_epoch(&obs(1.0, 40, 0, 0)).unwrap(), None);
        assert_eq!(p.on_epoch(&obs(2.0, 40, 0, 0)).unwrap(), None);
        let cmd = p.on_epoch(&obs(3.0, 40, 0, 0)).unwrap().unwrap();
        assert_eq!(cmd.target_instances, 3);
        assert_eq!(cmd.vm_reqs, Some(40.0));
    }

    #[test]
    fn libra_below_cip_targets_zero() {
        let mut p = libra(1);
        let cmd = p.on_epoch(&obs(1.0, 2, 3, 0)).unwrap().unwrap();
        assert_eq!(cmd.target_instances, 0);
        assert_eq!(cmd.vm_reqs, Some(0.0));
    }
}

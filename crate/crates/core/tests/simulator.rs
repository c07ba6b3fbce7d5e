use hybridsim::policies::{
    EpochObservation, FaasOnlyPolicy, FleetCommand, MaxPolicy, PolicyKind, ProvisioningPolicy, RoutingMode,
};
use hybridsim::pricing::{PricingConfig, VmType};
use hybridsim::sim::{
    self, bill_vm, billed_seconds, ledger_from_log, LogKind, LogRecord, RunOptions, ServedBy, SimConfig, SimRun,
    VmState, MICROS_PER_SEC,
};
use hybridsim::trace::TraceWorkload;

fn m4_large() -> VmType {
    VmType {
        name: "m4.large".into(),
        memory_mb: 8192.0,
        cost_per_hour: 0.1,
        cold_start: 100.0,
    }
}

/// One 512 MB, one-second request costs exactly 1e-5 on FaaS.
fn pricing() -> PricingConfig {
    PricingConfig {
        faas_cost_per_mb_second: 1e-5 / 512.0,
        faas_fixed_per_request: 0.0,
        faas_billing_quantum: 0.001,
        vm_types: vec![m4_large()],
    }
}

/// Issues fixed fleet commands at given epoch ends.
struct Scripted {
    routing: RoutingMode,
    warm: u32,
    script: Vec<(f64, FleetCommand)>,
}

impl ProvisioningPolicy for Scripted {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Libra
    }

    fn routing(&self) -> RoutingMode {
        self.routing
    }

    fn warm_instances(&self) -> u32 {
        self.warm
    }

    fn on_epoch(&mut self, obs: &EpochObservation) -> hybridsim::Result<Option<FleetCommand>> {
        Ok(self.script.iter().find(|(t, _)| *t == obs.now).map(|(_, c)| *c))
    }
}

fn run(trace: &TraceWorkload, policy: &mut dyn ProvisioningPolicy, cfg: &SimConfig) -> SimRun {
    sim::run_detailed(trace, policy, cfg, &pricing(), RunOptions { event_log: true }).unwrap()
}

fn times(log: &[LogRecord], kind: LogKind) -> Vec<(u64, u64)> {
    log.iter().filter(|r| r.kind == kind).map(|r| (r.t_us, r.id)).collect()
}

#[test]
fn empty_trace_costs_nothing() {
    let trace = TraceWorkload::new(vec![0; 60], "zeros");
    let cfg = SimConfig::with_vm(m4_large());
    let r = run(&trace, &mut FaasOnlyPolicy, &cfg).report;
    assert_eq!(r.arrivals, 0);
    assert_eq!(r.total_cost, 0.0);
    assert_eq!(r.sla_violation_pct, 0.0);
    assert!(r.scaling_events.is_empty());

    let mut max = MaxPolicy::new(&trace, 16).unwrap();
    assert_eq!(max.instances(), 0);
    let r = run(&trace, &mut max, &cfg).report;
    assert_eq!((r.vms_launched, r.total_cost), (0, 0.0));
}

#[test]
fn faas_only_constant_rate_cost() {
    let trace = TraceWorkload::new(vec![1; 3600], "one");
    let r = run(&trace, &mut FaasOnlyPolicy, &SimConfig::with_vm(m4_large())).report;
    assert_eq!(r.arrivals, 3600);
    assert_eq!(r.served_faas, 3600);
    assert!((r.faas_cost - 0.036).abs() < 1e-12, "{}", r.faas_cost);
    assert_eq!(r.iaas_cost, 0.0);
    assert_eq!(r.gateway_cost, 0.0);
    assert_eq!(r.sla_violations, 0);
}

#[test]
fn max_sizes_for_peak_and_never_queues() {
    let trace = TraceWorkload::new(vec![32; 3600], "32");
    let mut max = MaxPolicy::new(&trace, 16).unwrap();
    assert_eq!(max.instances(), 2);
    let run = run(&trace, &mut max, &SimConfig::with_vm(m4_large()));
    let r = &run.report;
    assert_eq!(r.vms_launched, 2);
    assert_eq!(r.served_vm, 32 * 3600);
    assert_eq!(r.sla_violations, 0);
    assert_eq!(r.vm_billed_seconds, 7200);
    assert!((r.iaas_cost - 0.2).abs() < 1e-12);
    assert!(run
        .vms
        .iter()
        .all(|v| v.state == VmState::Terminated || v.state == VmState::Draining));
}

#[test]
fn partial_seconds_round_up_when_billed() {
    let lifetime = 90 * MICROS_PER_SEC + 200_000;
    assert_eq!(billed_seconds(lifetime), 91);
    assert!((bill_vm(0, lifetime, 3.6) - 0.091).abs() < 1e-15);
    assert_eq!(billed_seconds(90 * MICROS_PER_SEC), 90);
    assert_eq!(billed_seconds(0), 0);
}

#[test]
fn scale_out_waits_for_cold_start() {
    let trace = TraceWorkload::new(vec![4; 300], "four");
    let mut policy = Scripted {
        routing: RoutingMode::CappedVmFirst { rho: 1.0 },
        warm: 0,
        script: vec![(
            10.0,
            FleetCommand {
                target_instances: 1,
                vm_reqs: Some(4.0),
            },
        )],
    };
    let run = run(&trace, &mut policy, &SimConfig::with_vm(m4_large()));
    let log = run.event_log.as_ref().unwrap();
    assert_eq!(times(log, LogKind::VmProvision), vec![(10 * MICROS_PER_SEC, 0)]);
    assert_eq!(times(log, LogKind::VmReady), vec![(110 * MICROS_PER_SEC, 0)]);
    let effective = times(log, LogKind::VmReqsEffective);
    assert_eq!(effective.len(), 1);
    assert_eq!(effective[0].0, 110 * MICROS_PER_SEC);
    // arrivals sort before control events, so the one at 110 s still goes to FaaS
    let first_vm = log.iter().find(|r| r.kind == LogKind::RouteVm).unwrap();
    assert_eq!(first_vm.t_us, 110 * MICROS_PER_SEC + 250_000);
    assert_eq!(run.report.served_faas, 4 * 110 + 1);
    assert_eq!(run.report.served_vm, 4 * 190 - 1);
    assert_eq!(run.report.scaling_events[0].effective_at, Some(110.0));
}

#[test]
fn later_decision_supersedes_pending_rate() {
    let trace = TraceWorkload::new(vec![4; 300], "four");
    let cmd = |n, v| FleetCommand {
        target_instances: n,
        vm_reqs: Some(v),
    };
    let mut policy = Scripted {
        routing: RoutingMode::CappedVmFirst { rho: 1.0 },
        warm: 0,
        script: vec![(10.0, cmd(1, 4.0)), (50.0, cmd(0, 0.0))],
    };
    let run = run(&trace, &mut policy, &SimConfig::with_vm(m4_large()));
    let log = run.event_log.as_ref().unwrap();
    let effective: Vec<_> = log
        .iter()
        .filter(|r| r.kind == LogKind::VmReqsEffective)
        .map(|r| (r.t_us, r.value))
        .collect();
    assert_eq!(effective, vec![(50 * MICROS_PER_SEC, Some(0.0))]);
    assert_eq!(run.report.served_vm, 0);
    assert!(times(log, LogKind::VmReady).is_empty());
}

#[test]
fn scale_in_removes_newest_first() {
    let trace = TraceWorkload::new(vec![0; 400], "idle");
    let cmd = |n| FleetCommand {
        target_instances: n,
        vm_reqs: None,
    };
    let mut policy = Scripted {
        routing: RoutingMode::VmQueue,
        warm: 1,
        script: vec![(1.0, cmd(3)), (200.0, cmd(1))],
    };
    let run = run(&trace, &mut policy, &SimConfig::with_vm(m4_large()));
    let log = run.event_log.as_ref().unwrap();
    let terms = times(log, LogKind::VmTerminate);
    assert_eq!(
        terms,
        vec![
            (200 * MICROS_PER_SEC, 2),
            (200 * MICROS_PER_SEC, 1),
            (400 * MICROS_PER_SEC, 0)
        ]
    );
    // 400 + 199 + 199 billed seconds
    assert_eq!(run.report.vm_billed_seconds, 798);
    assert_eq!(
        ledger_from_log(log, &SimConfig::with_vm(m4_large()), &pricing()).unwrap(),
        run.ledger
    );
}

#[test]
fn queued_requests_are_unserved_at_the_horizon() {
    // One slot per VM: requests at 0, .25, .5 and .75 s share one instance.
    let vm = VmType {
        memory_mb: 512.0,
        ..m4_large()
    };
    let trace = TraceWorkload::new(vec![4], "burst");
    let mut policy = Scripted {
        routing: RoutingMode::VmQueue,
        warm: 1,
        script: vec![],
    };
    let run = run(&trace, &mut policy, &SimConfig::with_vm(vm));
    let r = &run.report;
    assert_eq!((r.served_vm, r.unserved), (2, 2));
    // the second request waited 0.75 s; both unserved ones count too
    assert_eq!(r.sla_violations, 3);
    assert_eq!(run.records[1].response_time(), Some(1_750_000));
    assert!(run.records[2..]
        .iter()
        .all(|rec| rec.served_by == ServedBy::Unserved && rec.violated_sla));
    // the instance stops billing at the horizon while its last request drains
    assert_eq!(run.vms[0].billing_end, Some(MICROS_PER_SEC));
    assert_eq!(run.records[1].finish, Some(2 * MICROS_PER_SEC));
}

#[test]
fn capped_router_sends_overflow_to_faas() {
    let trace = TraceWorkload::new(vec![10; 20], "ten");
    let mut policy = Scripted {
        routing: RoutingMode::CappedVmFirst { rho: 0.5 },
        warm: 1,
        script: vec![(
            1.0,
            FleetCommand {
                target_instances: 1,
                vm_reqs: Some(10.0),
            },
        )],
    };
    let r = run(&trace, &mut policy, &SimConfig::with_vm(m4_large())).report;
    // second 0 has vm_reqs = 0; afterwards 5 of each 10 go to the VM
    assert_eq!(r.served_vm, 5 * 19);
    assert_eq!(r.served_faas, 10 + 5 * 19);
    assert_eq!(r.sla_violations, 0);
}

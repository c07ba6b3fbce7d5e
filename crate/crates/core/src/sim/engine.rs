use std::collections::VecDeque;

use super::event::{EventKind, EventQueue};
use super::fleet::{billed_seconds, Fleet};
use super::ledger::{Ledger, LogKind, LogRecord};
use super::report::{ActiveTracker, ResponseTimeSummary, ScalingEvent, SimReport, REPORT_SCHEMA_VERSION};
use super::router::{RouteTarget, Router};
use super::{
    micros_to_secs, secs_to_micros, Micros, RequestId, RequestRecord, RunOptions, ServedBy, SimConfig, SimRun, VmId,
    MICROS_PER_SEC,
};
use crate::error::Result;
use crate::policies::{EpochObservation, FleetCommand, ProvisioningPolicy};
use crate::pricing::PricingConfig;
use crate::trace::TraceWorkload;

pub(crate) struct Engine<'a> {
    trace: &'a TraceWorkload,
    policy: &'a mut dyn ProvisioningPolicy,
    cfg: &'a SimConfig,
    pricing: &'a PricingConfig,

    events: EventQueue,
    fleet: Fleet,
    router: Router,
    fifo: VecDeque<RequestId>,
    records: Vec<RequestRecord>,
    log: Option<Vec<LogRecord>>,
    tracker: ActiveTracker,
    scaling_events: Vec<ScalingEvent>,

    horizon: Micros,
    epoch_us: Micros,
    cold_start_us: Micros,
    service_vm_us: Micros,
    faas_latency_us: Micros,
    sla_us: Micros,
    slots: u32,

    /// Arrival cursor: trace second and index within it.
    next_arrival: (usize, u64),
    epoch_arrivals: Vec<u64>,
    vm_reqs_generation: u64,
    pending_vm_reqs: Option<f64>,
    ended: bool,
}

impl<'a> Engine<'a> {
    pub fn new(
        trace: &'a TraceWorkload,
        policy: &'a mut dyn ProvisioningPolicy,
        cfg: &'a SimConfig,
        pricing: &'a PricingConfig,
        opts: RunOptions,
    ) -> Result<Self> {
        let horizon = trace.duration_secs() * MICROS_PER_SEC;
        let epoch_us = secs_to_micros(cfg.epoch_length).max(1);
        let interval = secs_to_micros(cfg.series_interval).max(1);
        let router = Router::new(policy.routing());
        Ok(Self {
            trace,
            cfg,
            pricing,
            events: EventQueue::with_capacity(1024),
            fleet: Fleet::default(),
            router,
            fifo: VecDeque::new(),
            records: Vec::with_capacity(trace.total_requests() as usize),
            log: opts.event_log.then(Vec::new),
            tracker: ActiveTracker::new(interval, horizon),
            scaling_events: Vec::new(),
            horizon,
            epoch_us,
            cold_start_us: secs_to_micros(cfg.vm_type.cold_start),
            service_vm_us: secs_to_micros(cfg.service_time_vm),
            faas_latency_us: secs_to_micros(cfg.faas_cold_start + cfg.service_time_faas),
            sla_us: cfg.sla_threshold_micros(),
            slots: cfg.slots_per_vm()?,
            next_arrival: (0, 0),
            epoch_arrivals: vec![0; horizon.div_ceil(epoch_us) as usize + 1],
            vm_reqs_generation: 0,
            pending_vm_reqs: None,
            ended: false,
            policy,
        })
    }

    fn log(&mut self, t_us: Micros, kind: LogKind, id: u64, vm: Option<VmId>, value: Option<f64>) {
        if let Some(log) = &mut self.log {
            log.push(LogRecord {
                t_us,
                kind,
                id,
                vm,
                value,
            });
        }
    }

    pub fn run(mut self) -> Result<SimRun> {
        if self.policy.bills_gateway() {
            self.log(0, LogKind::GatewayStart, 0, None, None);
        }
        for _ in 0..self.policy.warm_instances() {
            self.provision(0, 0);
        }
        self.schedule_next_arrival();
        if self.epoch_us < self.horizon {
            self.events.push(self.epoch_us, EventKind::EpochTick { epoch: 0 });
        }
        self.events.push(self.horizon, EventKind::End);

        while let Some(ev) = self.events.pop() {
            let now = ev.time;
            match ev.kind {
                EventKind::Arrival { req } => self.on_arrival(now, req),
                EventKind::Completion { req, vm } => self.on_completion(now, req, vm),
                EventKind::VmReady { vm } => {
                    if !self.ended && self.fleet.mark_ready(vm) {
                        self.log(now, LogKind::VmReady, u64::from(vm), None, None);
                        self.drain_queue(now);
                    }
                }
                EventKind::VmReqsUpdate { generation } => {
                    if !self.ended && generation == self.vm_reqs_generation {
                        if let Some(v) = self.pending_vm_reqs.take() {
                            self.router.set_vm_reqs(v);
                            self.log(now, LogKind::VmReqsEffective, generation, None, Some(v));
                        }
                    }
                }
                EventKind::EpochTick { epoch } => self.on_epoch(now, epoch)?,
                EventKind::End => self.on_end(now),
            }
        }
        Ok(self.finish())
    }

    fn schedule_next_arrival(&mut self) {
        let counts = &self.trace.counts;
        let (mut second, mut index) = self.next_arrival;
        while second < counts.len() && index >= counts[second] {
            second += 1;
            index = 0;
        }
        if second >= counts.len() {
            self.next_arrival = (second, 0);
            return;
        }
        let c = counts[second];
        let t = second as u64 * MICROS_PER_SEC + index * MICROS_PER_SEC / c;
        let req = self.records.len() as RequestId;
        self.records.push(RequestRecord {
            arrival: t,
            start: None,
            finish: None,
            served_by: ServedBy::Unserved,
            violated_sla: false,
        });
        self.events.push(t, EventKind::Arrival { req });
        self.next_arrival = (second, index + 1);
    }

    fn on_arrival(&mut self, now: Micros, req: RequestId) {
        self.epoch_arrivals[(now / self.epoch_us) as usize] += 1;
        self.log(now, LogKind::Arrival, u64::from(req), None, None);
        match self.router.route(now, &self.fleet, self.fifo.len()) {
            RouteTarget::Vm(vm) => self.start_on_vm(now, req, vm),
            RouteTarget::Faas => {
                let finish = now + self.faas_latency_us;
                let rec = &mut self.records[req as usize];
                rec.start = Some(now);
                rec.finish = Some(finish);
                rec.served_by = ServedBy::Faas;
                rec.violated_sla = finish - rec.arrival > self.sla_us;
                self.log(now, LogKind::RouteFaas, u64::from(req), None, None);
            }
            RouteTarget::Queue => {
                self.fifo.push_back(req);
                self.log(now, LogKind::Enqueue, u64::from(req), None, None);
            }
        }
        self.schedule_next_arrival();
    }

    fn start_on_vm(&mut self, now: Micros, req: RequestId, vm: VmId) {
        self.fleet.occupy_slot(vm);
        let rec = &mut self.records[req as usize];
        rec.start = Some(now);
        rec.served_by = ServedBy::Vm(vm);
        self.log(now, LogKind::RouteVm, u64::from(req), Some(vm), None);
        self.events
            .push(now + self.service_vm_us, EventKind::Completion { req, vm });
    }

    fn on_completion(&mut self, now: Micros, req: RequestId, vm: VmId) {
        self.fleet.release_slot(vm);
        let rec = &mut self.records[req as usize];
        rec.finish = Some(now);
        rec.violated_sla = now - rec.arrival > self.sla_us;
        self.log(now, LogKind::Complete, u64::from(req), Some(vm), None);
        self.drain_queue(now);
    }

    /// Starts queued requests on free slots, oldest first.
    fn drain_queue(&mut self, now: Micros) {
        while let Some(&req) = self.fifo.front() {
            let Some(vm) = self.router.next_free(&self.fleet) else {
                break;
            };
            self.fifo.pop_front();
            self.start_on_vm(now, req, vm);
        }
    }

    fn provision(&mut self, now: Micros, cold_start: Micros) -> VmId {
        let vm = self.fleet.provision(now, cold_start, self.slots);
        if cold_start > 0 {
            self.events.push(now + cold_start, EventKind::VmReady { vm });
        }
        self.log(now, LogKind::VmProvision, u64::from(vm), None, None);
        self.tracker.set(now, self.fleet.active_count());
        vm
    }

    fn terminate(&mut self, now: Micros, vm: VmId) {
        self.fleet.terminate(vm, now);
        self.log(now, LogKind::VmTerminate, u64::from(vm), None, None);
        self.tracker.set(now, self.fleet.active_count());
    }

    fn on_epoch(&mut self, now: Micros, epoch: u64) -> Result<()> {
        let obs = EpochObservation {
            now: micros_to_secs(now),
            epoch_length: micros_to_secs(self.epoch_us),
            arrivals: self.epoch_arrivals[epoch as usize],
            ready_vms: self.fleet.ready_count(),
            provisioning_vms: self.fleet.provisioning_count(),
        };
        if let Some(cmd) = self.policy.on_epoch(&obs)? {
            self.apply(now, cmd);
        }
        let next = now + self.epoch_us;
        if next < self.horizon {
            self.events.push(next, EventKind::EpochTick { epoch: epoch + 1 });
        }
        Ok(())
    }

    fn apply(&mut self, now: Micros, cmd: FleetCommand) {
        let active = self.fleet.active_count();
        let target = cmd.target_instances;
        if target > active {
            for _ in active..target {
                self.provision(now, self.cold_start_us);
            }
            self.drain_queue(now);
        } else if target < active {
            let victims = self.fleet.active_newest_first();
            for vm in victims.into_iter().take((active - target) as usize) {
                self.terminate(now, vm);
            }
        }
        self.log(now, LogKind::Decision, u64::from(target), None, cmd.vm_reqs);

        let mut effective_at = None;
        if let Some(v) = cmd.vm_reqs {
            // Any newer decision supersedes one still waiting on cold starts.
            self.vm_reqs_generation += 1;
            if target > active && self.cold_start_us > 0 {
                let at = now + self.cold_start_us;
                self.pending_vm_reqs = Some(v);
                self.events.push(
                    at,
                    EventKind::VmReqsUpdate {
                        generation: self.vm_reqs_generation,
                    },
                );
                effective_at = Some(at);
            } else {
                self.pending_vm_reqs = None;
                self.router.set_vm_reqs(v);
                self.log(now, LogKind::VmReqsEffective, self.vm_reqs_generation, None, Some(v));
                effective_at = Some(now);
            }
        }
        if target != active || cmd.vm_reqs.is_some() {
            self.scaling_events.push(ScalingEvent {
                t: micros_to_secs(now),
                active_before: active,
                target,
                vm_reqs: cmd.vm_reqs,
                effective_at: effective_at.map(micros_to_secs),
            });
        }
    }

    fn on_end(&mut self, now: Micros) {
        self.ended = true;
        for vm in self.fleet.active_newest_first() {
            self.terminate(now, vm);
        }
        if self.policy.bills_gateway() {
            self.log(now, LogKind::GatewayStop, 0, None, None);
        }
        for req in std::mem::take(&mut self.fifo) {
            let rec = &mut self.records[req as usize];
            rec.served_by = ServedBy::Unserved;
            rec.violated_sla = true;
        }
        self.log(now, LogKind::End, 0, None, None);
    }

    fn finish(self) -> SimRun {
        let mut served_vm = 0;
        let mut served_faas = 0;
        let mut unserved = 0;
        let mut violations = 0;
        let mut times = Vec::with_capacity(self.records.len());
        for r in &self.records {
            match r.served_by {
                ServedBy::Vm(_) => served_vm += 1,
                ServedBy::Faas => served_faas += 1,
                ServedBy::Unserved => unserved += 1,
            }
            if r.violated_sla {
                violations += 1;
            }
            if let Some(rt) = r.response_time() {
                times.push(rt);
            }
        }
        let vms = self.fleet.vms;
        let lifetimes: Vec<Micros> = vms.iter().filter_map(|v| v.lifetime()).collect();
        let vm_billed: u64 = lifetimes.iter().map(|&l| billed_seconds(l)).sum();
        let uptime_us: u128 = lifetimes.iter().map(|&l| u128::from(l)).sum();
        let gateway_seconds = if self.policy.bills_gateway() {
            billed_seconds(self.horizon)
        } else {
            0
        };
        let ledger = Ledger::price(vm_billed, served_faas, gateway_seconds, self.cfg, self.pricing);
        let arrivals = self.records.len() as u64;
        let peak_vms = self.tracker.peak;
        let series = self.tracker.finish(&self.records);
        let mut epoch_arrivals = self.epoch_arrivals;
        epoch_arrivals.truncate(self.horizon.div_ceil(self.epoch_us) as usize);
        let report = SimReport {
            schema_version: REPORT_SCHEMA_VERSION,
            policy: self.policy.kind(),
            trace_label: self.trace.label.clone(),
            duration: micros_to_secs(self.horizon),
            arrivals,
            served_vm,
            served_faas,
            unserved,
            sla_violations: violations,
            sla_violation_pct: if arrivals > 0 {
                100.0 * violations as f64 / arrivals as f64
            } else {
                0.0
            },
            iaas_cost: ledger.iaas_cost,
            faas_cost: ledger.faas_cost,
            gateway_cost: ledger.gateway_cost,
            total_cost: ledger.total_cost,
            vm_uptime: uptime_us as f64 / MICROS_PER_SEC as f64,
            vm_billed_seconds: vm_billed,
            vms_launched: vms.len() as u32,
            peak_vms,
            response_time: ResponseTimeSummary::from_micros(times),
            series,
            scaling_events: self.scaling_events,
        };
        SimRun {
            report,
            records: self.records,
            vms,
            ledger,
            epoch_arrivals,
            event_log: self.log,
        }
    }
}

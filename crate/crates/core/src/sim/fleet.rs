//! VM instances, their lifecycle and per-second billing.

use std::collections::BTreeSet;

use serde::Serialize;

use super::{Micros, VmId, MICROS_PER_SEC};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VmState {
    Provisioning,
    Ready,
    /// Billing has stopped; in-flight requests are finishing.
    Draining,
    Terminated,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VmInstance {
    pub id: VmId,
    pub state: VmState,
    pub provisioned_at: Micros,
    pub ready_at: Micros,
    /// Set when the instance is terminated (billing stops here).
    pub billing_end: Option<Micros>,
    pub slots_total: u32,
    pub slots_busy: u32,
    pub served: u64,
}

impl VmInstance {
    pub fn has_free_slot(&self) -> bool {
        self.state == VmState::Ready && self.slots_busy < self.slots_total
    }

    /// Lifetime for billing, in microseconds.
    pub fn lifetime(&self) -> Option<Micros> {
        self.billing_end.map(|end| end - self.provisioned_at)
    }
}

/// Whole seconds billed for a lifetime: partial seconds round up.
pub fn billed_seconds(lifetime: Micros) -> u64 {
    lifetime.div_ceil(MICROS_PER_SEC)
}

/// Charge for one instance alive from `start` to `end`.
pub fn bill_vm(start: Micros, end: Micros, cost_per_hour: f64) -> f64 {
    billed_seconds(end - start) as f64 * cost_per_hour / crate::pricing::SECONDS_PER_HOUR
}

#[derive(Debug, Default)]
pub(crate) struct Fleet {
    pub vms: Vec<VmInstance>,
    ready: BTreeSet<VmId>,
    provisioning: BTreeSet<VmId>,
}

impl Fleet {
    pub fn provision(&mut self, now: Micros, cold_start: Micros, slots: u32) -> VmId {
        let id = self.vms.len() as VmId;
        let ready_now = cold_start == 0;
        self.vms.push(VmInstance {
            id,
            state: if ready_now {
                VmState::Ready
            } else {
                VmState::Provisioning
            },
            provisioned_at: now,
            ready_at: now + cold_start,
            billing_end: None,
            slots_total: slots,
            slots_busy: 0,
            served: 0,
        });
        if ready_now {
            self.ready.insert(id);
        } else {
            self.provisioning.insert(id);
        }
        id
    }

    /// Returns false if the instance was terminated before becoming ready.
    pub fn mark_ready(&mut self, id: VmId) -> bool {
        let vm = &mut self.vms[id as usize];
        if vm.state != VmState::Provisioning {
            return false;
        }
        vm.state = VmState::Ready;
        self.provisioning.remove(&id);
        self.ready.insert(id);
        true
    }

    pub fn terminate(&mut self, id: VmId, now: Micros) {
        let vm = &mut self.vms[id as usize];
        if matches!(vm.state, VmState::Draining | VmState::Terminated) {
            return;
        }
        vm.billing_end = Some(now);
        vm.state = if vm.slots_busy > 0 {
            VmState::Draining
        } else {
            VmState::Terminated
        };
        self.ready.remove(&id);
        self.provisioning.remove(&id);
    }

    pub fn release_slot(&mut self, id: VmId) {
        let vm = &mut self.vms[id as usize];
        vm.slots_busy -= 1;
        if vm.state == VmState::Draining && vm.slots_busy == 0 {
            vm.state = VmState::Terminated;
        }
    }

    pub fn occupy_slot(&mut self, id: VmId) {
        let vm = &mut self.vms[id as usize];
        debug_assert!(vm.has_free_slot());
        vm.slots_busy += 1;
        vm.served += 1;
    }

    pub fn ready_count(&self) -> u32 {
        self.ready.len() as u32
    }

    pub fn provisioning_count(&self) -> u32 {
        self.provisioning.len() as u32
    }

    pub fn active_count(&self) -> u32 {
        self.ready_count() + self.provisioning_count()
    }

    /// Provisioning and ready instances, newest first.
    pub fn active_newest_first(&self) -> Vec<VmId> {
        let mut ids: Vec<VmId> = self.ready.iter().chain(self.provisioning.iter()).copied().collect();
        ids.sort_unstable_by(|a, b| b.cmp(a));
        ids
    }

    /// Next ready instance with a free slot, round-robin after `last`.
    pub fn next_free_after(&self, last: Option<VmId>) -> Option<VmId> {
        let free = |id: &&VmId| self.vms[**id as usize].has_free_slot();
        match last {
            None => self.ready.iter().find(free).copied(),
            Some(last) => self
                .ready
                .range(last + 1..)
                .chain(self.ready.range(..=last))
                .find(free)
                .copied(),
        }
    }
}

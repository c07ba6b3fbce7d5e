//! Time-ordered event queue with deterministic tie-breaking.
//!
//! Events at the same instant run completions first, then arrivals, then
//! control events; within a class, in scheduling order.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{Micros, RequestId, VmId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum EventKind {
    Completion { req: RequestId, vm: VmId },
    Arrival { req: RequestId },
    VmReady { vm: VmId },
    VmReqsUpdate { generation: u64 },
    EpochTick { epoch: u64 },
    End,
}

impl EventKind {
    fn class(&self) -> u8 {
        match self {
            EventKind::Completion { .. } => 0,
            EventKind::Arrival { .. } => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Event {
    pub time: Micros,
    pub kind: EventKind,
    seq: u64,
}

impl Event {
    fn key(&self) -> (Micros, u8, u64) {
        (self.time, self.kind.class(), self.seq)
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; reverse for earliest-first.
        other.key().cmp(&self.key())
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Default)]
pub(crate) struct EventQueue {
    heap: BinaryHeap<Event>,
    next_seq: u64,
}

impl EventQueue {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            heap: BinaryHeap::with_capacity(n),
            next_seq: 0,
        }
    }

    pub fn push(&mut self, time: Micros, kind: EventKind) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Event { time, kind, seq });
    }

    pub fn pop(&mut self) -> Option<Event> {
        self.heap.pop()
    }
}

//! Per-request dispatch between VMs, the FIFO queue and FaaS.

use serde::Serialize;

use super::fleet::Fleet;
use super::{Micros, VmId, MICROS_PER_SEC};
use crate::numeric::floor_tol;
use crate::policies::{spock_route_overlay, OverlayRoute, RoutingMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RouteTarget {
    Vm(VmId),
    Faas,
    Queue,
}

#[derive(Debug, Clone)]
pub(crate) struct Router {
    mode: RoutingMode,
    vm_reqs: f64,
    /// `floor(rho * vm_reqs)`, cached.
    per_second_cap: u64,
    second: u64,
    directed_this_second: u64,
    last_vm: Option<VmId>,
}

impl Router {
    pub fn new(mode: RoutingMode) -> Self {
        Self {
            mode,
            vm_reqs: 0.0,
            per_second_cap: 0,
            second: 0,
            directed_this_second: 0,
            last_vm: None,
        }
    }

    pub fn set_vm_reqs(&mut self, vm_reqs: f64) {
        self.vm_reqs = vm_reqs;
        if let RoutingMode::CappedVmFirst { rho } = self.mode {
            self.per_second_cap = floor_tol(rho * vm_reqs).max(0.0) as u64;
        }
    }

    /// Next ready instance with a free slot, round-robin.
    pub fn next_free(&mut self, fleet: &Fleet) -> Option<VmId> {
        let vm = fleet.next_free_after(self.last_vm)?;
        self.last_vm = Some(vm);
        Some(vm)
    }

    /// Picks a destination for a request arriving at `now` while `queued`
    /// requests are already waiting.
    pub fn route(&mut self, now: Micros, fleet: &Fleet, queued: usize) -> RouteTarget {
        match self.mode {
            RoutingMode::FaasOnly => RouteTarget::Faas,
            RoutingMode::VmQueue => {
                if queued > 0 {
                    return RouteTarget::Queue;
                }
                self.next_free(fleet).map_or(RouteTarget::Queue, RouteTarget::Vm)
            }
            RoutingMode::VmSpillDuringScaleOut => {
                let free = if queued == 0 { self.next_free(fleet) } else { None };
                match spock_route_overlay(fleet.provisioning_count() > 0, free.is_some()) {
                    OverlayRoute::Vm => RouteTarget::Vm(free.expect("free slot")),
                    OverlayRoute::Faas => RouteTarget::Faas,
                    OverlayRoute::Queue => RouteTarget::Queue,
                }
            }
            RoutingMode::CappedVmFirst { .. } => {
                let second = now / MICROS_PER_SEC;
                if second != self.second {
                    self.second = second;
                    self.directed_this_second = 0;
                }
                if self.directed_this_second >= self.per_second_cap {
                    return RouteTarget::Faas;
                }
                match self.next_free(fleet) {
                    Some(vm) => {
                        self.directed_this_second += 1;
                        RouteTarget::Vm(vm)
                    }
                    None => RouteTarget::Faas,
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fleet(n: usize, slots: u32) -> Fleet {
        let mut f = Fleet::default();
        for _ in 0..n {
            f.provision(0, 0, slots);
        }
        f
    }

    fn dispatch(router: &mut Router, fleet: &mut Fleet, now: Micros) -> RouteTarget {
        let target = router.route(now, fleet, 0);
        if let RouteTarget::Vm(id) = target {
            fleet.occupy_slot(id);
        }
        target
    }

    #[test]
    fn round_robin_over_ready_vms() {
        let mut f = fleet(2, 16);
        let mut r = Router::new(RoutingMode::VmQueue);
        let got: Vec<_> = (0..4).map(|i| dispatch(&mut r, &mut f, i)).collect();
        assert_eq!(
            got,
            [
                RouteTarget::Vm(0),
                RouteTarget::Vm(1),
                RouteTarget::Vm(0),
                RouteTarget::Vm(1)
            ]
        );
    }

    #[test]
    fn capped_router_sends_overflow_to_faas() {
        let mut f = fleet(1, 16);
        let mut r = Router::new(RoutingMode::CappedVmFirst { rho: 0.8 });
        r.set_vm_reqs(10.0);
        let got: Vec<_> = (0..10).map(|i| dispatch(&mut r, &mut f, i * 100_000)).collect();
        assert!(got[..8].iter().all(|t| matches!(t, RouteTarget::Vm(_))));
        assert_eq!(&got[8..], [RouteTarget::Faas, RouteTarget::Faas]);
        // the cap resets at the next second
        assert!(matches!(dispatch(&mut r, &mut f, MICROS_PER_SEC), RouteTarget::Vm(_)));
    }

    #[test]
    fn capped_router_without_free_slot_uses_faas() {
        let mut f = fleet(1, 1);
        let mut r = Router::new(RoutingMode::CappedVmFirst { rho: 1.0 });
        r.set_vm_reqs(5.0);
        assert_eq!(dispatch(&mut r, &mut f, 0), RouteTarget::Vm(0));
        assert_eq!(dispatch(&mut r, &mut f, 1), RouteTarget::Faas);
    }

    #[test]
    fn vm_queue_when_saturated() {
        let mut f = fleet(1, 1);
        let mut r = Router::new(RoutingMode::VmQueue);
        assert_eq!(dispatch(&mut r, &mut f, 0), RouteTarget::Vm(0));
        assert_eq!(dispatch(&mut r, &mut f, 1), RouteTarget::Queue);
    }

    #[test]
    fn spill_only_during_scale_out() {
        let mut f = fleet(1, 1);
        let mut r = Router::new(RoutingMode::VmSpillDuringScaleOut);
        assert_eq!(dispatch(&mut r, &mut f, 0), RouteTarget::Vm(0));
        assert_eq!(dispatch(&mut r, &mut f, 1), RouteTarget::Queue);
        f.provision(1, 100, 1);
        assert_eq!(dispatch(&mut r, &mut f, 2), RouteTarget::Faas);
    }

    #[test]
    fn faas_only() {
        let mut f = fleet(2, 16);
        let mut r = Router::new(RoutingMode::FaasOnly);
        assert_eq!(dispatch(&mut r, &mut f, 0), RouteTarget::Faas);
    }
}

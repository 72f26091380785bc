//! Charging optimization for a fixed customer order.
//!
//! Labels walk the customer sequence; between two consecutive customers a
//! route either drives directly or detours through one station. A label is
//! dropped when the labels that leave no later jointly offer at least its
//! battery level at every departure time.

use crate::charge::{forward_extend, simulate_route, ForwardState};
use crate::model::{Instance, Route};

const ENERGY_EPS: f64 = 1e-7;

struct Label {
    state: ForwardState,
    path: Vec<usize>,
}

/// Shortest route serving `customers` in order, with station detours chosen
/// optimally. `None` if no such route is feasible.
pub fn optimize_charging(inst: &Instance, customers: &[usize]) -> Option<Route> {
    let load: f64 = customers.iter().map(|&i| inst.demand(i)).sum();
    if load > inst.capacity + 1e-9 || customers.iter().any(|&i| !inst.is_customer(i)) {
        return None;
    }
    if customers.is_empty() {
        return Some(Route::empty());
    }
    let mut labels = vec![Label { state: ForwardState::depot(inst), path: vec![0] }];
    for &target in customers.iter().chain(std::iter::once(&0)) {
        let mut next = Vec::new();
        for lab in &labels {
            if let Ok(s) = forward_extend(inst, &lab.state, target) {
                let mut path = lab.path.clone();
                path.push(target);
                next.push(Label { state: s, path });
            }
            for k in inst.station_ids() {
                let Ok(at) = forward_extend(inst, &lab.state, k) else { continue };
                let Ok(s) = forward_extend(inst, &at, target) else { continue };
                let mut path = lab.path.clone();
                path.extend([k, target]);
                next.push(Label { state: s, path });
            }
        }
        labels = filter_dominated(next);
        if labels.is_empty() {
            return None;
        }
    }
    let best = labels.iter().min_by(|a, b| a.state.a.total_cmp(&b.state.a))?;
    simulate_route(inst, &best.path).ok()
}

/// Keeps labels not covered by the upper envelope of earlier-leaving ones.
fn filter_dominated(mut labels: Vec<Label>) -> Vec<Label> {
    labels.sort_by(|x, y| x.state.a.total_cmp(&y.state.a).then(y.state.f.last_value().total_cmp(&x.state.f.last_value())));
    let mut kept: Vec<Label> = Vec::new();
    let mut env: Option<crate::PwlFunction> = None;
    for lab in labels {
        let (lo, hi) = (lab.state.a, lab.state.f.hi());
        if let Some(e) = &env {
            let e = e.restrict_clamped(lo, hi);
            if e.dominates_on(&lab.state.f, lo, hi, ENERGY_EPS) {
                continue;
            }
            env = e.max_with(&lab.state.f.restrict_clamped(lo, hi)).ok();
        } else {
            env = Some(lab.state.f.restrict_clamped(lo, hi));
        }
        kept.push(lab);
    }
    kept
}

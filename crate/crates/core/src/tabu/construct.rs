//! Greedy cheapest-insertion construction.

use super::route::{splice_duration, TabuRoute};
use super::{TabuError, TabuSolution};
use crate::model::Instance;

/// Station copies tried in template routes before giving up.
const MAX_TEMPLATE_STATIONS: usize = 3;

/// Cheapest insertion of `c` into `route`: `(added duration, position)`.
fn best_insertion(inst: &Instance, route: &TabuRoute, c: usize) -> Option<(f64, usize)> {
    if route.load + inst.demand(c) > inst.capacity + 1e-9 {
        return None;
    }
    let mut best: Option<(f64, usize)> = None;
    for q in 1..route.nodes.len() {
        if let Some(d) = splice_duration(inst, route, q - 1, &[c], route, q) {
            let delta = d - route.duration;
            if best.map_or(true, |b| delta < b.0 - 1e-12) {
                best = Some((delta, q));
            }
        }
    }
    best
}

/// Repeatedly inserts the customer with the smallest insertion cost. When
/// nothing fits, routes made of one station visited once, then twice, and
/// so on are offered as templates. Routes left without customers are
/// dropped.
pub fn initial_solution(inst: &Instance) -> Result<TabuSolution, TabuError> {
    let empty = TabuRoute::new(inst, u64::MAX, vec![0, 0]).expect("empty route");
    let mut sol = TabuSolution { routes: Vec::new(), next_id: 0 };
    let mut unserved: Vec<usize> = inst.customers().collect();
    // cached insertions per customer and route
    let mut ins: Vec<Vec<Option<(f64, usize)>>> = vec![Vec::new(); inst.n_nodes()];
    let fresh: Vec<Option<(f64, usize)>> = (0..inst.n_nodes())
        .map(|c| if inst.is_customer(c) { best_insertion(inst, &empty, c) } else { None })
        .collect();
    let mut level = 0;
    while !unserved.is_empty() {
        let used = sol.routes.iter().filter(|r| !r.is_empty(inst)).count();
        let mut best: Option<(f64, usize, Option<usize>, usize)> = None;
        for (k, &c) in unserved.iter().enumerate() {
            for (r, cand) in ins[c].iter().enumerate() {
                let opens = sol.routes[r].is_empty(inst);
                if let Some((delta, q)) = *cand {
                    if (!opens || used < inst.fleet) && best.map_or(true, |b| delta < b.0 - 1e-12) {
                        best = Some((delta, k, Some(r), q));
                    }
                }
            }
            if used < inst.fleet {
                if let Some((delta, q)) = fresh[c] {
                    if best.map_or(true, |b| delta < b.0 - 1e-12) {
                        best = Some((delta, k, None, q));
                    }
                }
            }
        }
        let Some((_, k, target, q)) = best else {
            level += 1;
            if level > MAX_TEMPLATE_STATIONS || inst.n_stations() == 0 {
                return Err(TabuError::Unplaceable(unserved[0]));
            }
            for s in inst.station_ids() {
                let mut nodes = vec![0];
                nodes.extend(std::iter::repeat(s).take(level));
                nodes.push(0);
                if let Some(route) = TabuRoute::new(inst, sol.next_id, nodes) {
                    sol.next_id += 1;
                    for &c in &unserved {
                        ins[c].push(best_insertion(inst, &route, c));
                    }
                    sol.routes.push(route);
                }
            }
            continue;
        };
        let c = unserved.remove(k);
        let r = match target {
            Some(r) => r,
            None => {
                sol.routes.push(empty.clone());
                sol.routes.last_mut().unwrap().id = sol.next_id;
                sol.next_id += 1;
                for &u in &unserved {
                    ins[u].push(None);
                }
                sol.routes.len() - 1
            }
        };
        let mut nodes = sol.routes[r].nodes.clone();
        nodes.insert(q, c);
        let id = sol.routes[r].id;
        sol.routes[r] = TabuRoute::new(inst, id, nodes).ok_or(TabuError::Unplaceable(c))?;
        for &u in &unserved {
            ins[u][r] = best_insertion(inst, &sol.routes[r], u);
        }
    }
    sol.routes.retain(|r| !r.is_empty(inst));
    Ok(sol)
}

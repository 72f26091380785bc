//! Completion bounds on reduced cost by relaxed route dynamic programs.
//!
//! Walks over customers are allowed to repeat nodes except for immediate
//! back-and-forth moves. Between two customers the walk may pass through
//! stations, priced by their cheapest station-only path. Charging time,
//! waiting and subset-row penalties are ignored, all of which only lower
//! the bound. Two resources limit walks: integer demand (when every demand
//! is a positive integer) and time in buckets of the shortest move.

use crate::model::Instance;

const BUCKETS_MAX: usize = 2000;

#[derive(Debug, Clone, Copy)]
struct Entry {
    best: f64,
    via: usize,
    second: f64,
}

impl Entry {
    const NONE: Entry = Entry { best: f64::INFINITY, via: usize::MAX, second: f64::INFINITY };

    fn offer(&mut self, v: f64, via: usize) {
        if v < self.best {
            if via != self.via {
                self.second = self.best;
            }
            self.best = v;
            self.via = via;
        } else if via != self.via && v < self.second {
            self.second = v;
        }
    }

    fn avoiding(&self, node: usize) -> f64 {
        if self.via == node {
            self.second
        } else {
            self.best
        }
    }
}

/// Per-resource lower bounds for completing a forward label to the depot and
/// for prefixing a backward label from the depot.
#[derive(Debug, Clone)]
pub struct QRouteBounds {
    /// `[node][units]`, completion from departure at `node`
    time_fwd: Option<Vec<Vec<f64>>>,
    /// `[node][units]`, cheapest arrival at `node` from the depot
    time_bwd: Option<Vec<Vec<f64>>>,
    unit: f64,
    demand_fwd: Option<Vec<Vec<f64>>>,
    demand_bwd: Option<Vec<Vec<f64>>>,
}

/// Costs of moving between customers (and the depot) through stations:
/// `w[i][j]` is the cheapest station-only path cost from `i` to `j`, where an
/// arc costs its travel time minus its arc dual. `None` if station cycles
/// have negative cost.
fn hop_costs(inst: &Instance, arc_cost: &dyn Fn(usize, usize) -> f64) -> Option<Vec<Vec<f64>>> {
    let n = inst.n_nodes();
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                d[i][j] = arc_cost(i, j);
            }
        }
        d[i][i] = 0.0;
    }
    for k in inst.station_ids() {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    if inst.station_ids().any(|k| d[k][k] < -1e-12) {
        return None;
    }
    Some(d)
}

impl QRouteBounds {
    /// `node_cost[j]` is service time minus the node's dual for customers and
    /// minus the depot dual for node 0. `arc_cost(i, j)` is the travel time
    /// minus any arc dual, `INFINITY` for forbidden arcs.
    pub fn compute(inst: &Instance, node_cost: &[f64], arc_cost: &dyn Fn(usize, usize) -> f64) -> Self {
        let none = Self { time_fwd: None, time_bwd: None, unit: 1.0, demand_fwd: None, demand_bwd: None };
        let Some(w) = hop_costs(inst, arc_cost) else {
            return none;
        };
        let ends: Vec<usize> = std::iter::once(0).chain(inst.customers()).collect();

        // time units: each customer move must consume at least one
        let mut unit = f64::INFINITY;
        for &i in &ends {
            for j in inst.customers() {
                if i != j {
                    unit = unit.min(inst.shortest_travel(i, j) + inst.service(j));
                }
            }
        }
        let horizon = inst.horizon;
        let (time_fwd, time_bwd) = if unit.is_finite() && unit > 0.0 && horizon / unit <= BUCKETS_MAX as f64 {
            let cap = (horizon / unit).floor() as usize;
            let step = |i: usize, j: usize| {
                let units = ((inst.shortest_travel(i, j) + inst.service(j)) / unit).floor() as usize;
                if inst.is_customer(i) || i == 0 { units.max(1) } else { units }
            };
            let leg = |i: usize, j: usize| (inst.shortest_travel(i, j) / unit).floor() as usize;
            let fwd = Self::dp(inst, &ends, cap, &w, node_cost, step, leg, false);
            let bwd = Self::dp(inst, &ends, cap, &w, node_cost, step, leg, true);
            (Some(fwd), Some(bwd))
        } else {
            (None, None)
        };

        let integral = inst.n_customers() > 0
            && inst.customers().all(|i| inst.demand(i) >= 1.0 && inst.demand(i).fract() == 0.0)
            && inst.capacity.is_finite();
        let (demand_fwd, demand_bwd) = if integral && inst.capacity < 1e6 {
            let cap = inst.capacity.floor() as usize;
            let step = |_: usize, j: usize| inst.demand(j) as usize;
            let leg = |_: usize, _: usize| 0usize;
            (
                Some(Self::dp(inst, &ends, cap, &w, node_cost, step, leg, false)),
                Some(Self::dp(inst, &ends, cap, &w, node_cost, step, leg, true)),
            )
        } else {
            (None, None)
        };
        Self { time_fwd, time_bwd, unit, demand_fwd, demand_bwd }
    }

    /// Bounded walk DP. Forward: `v[i][u]` = cheapest walk from `i` (service
    /// at `i` already paid) to the depot using at most `u` units. Reverse:
    /// cheapest walk from the depot arriving at `i` (service at `i` unpaid).
    #[allow(clippy::too_many_arguments)]
    fn dp(
        inst: &Instance,
        ends: &[usize],
        cap: usize,
        w: &[Vec<f64>],
        node_cost: &[f64],
        step: impl Fn(usize, usize) -> usize,
        leg: impl Fn(usize, usize) -> usize,
        reverse: bool,
    ) -> Vec<Vec<f64>> {
        let n = inst.n_nodes();
        let mut table = vec![vec![Entry::NONE; cap + 1]; n];
        for u in 0..=cap {
            for &i in ends {
                let mut e = Entry::NONE;
                // direct depot leg
                let depot_units = if reverse { leg(0, i) } else { leg(i, 0) };
                if i != 0 && depot_units <= u {
                    let v = if reverse { w[0][i] } else { w[i][0] + node_cost[0] };
                    e.offer(v, 0);
                }
                for j in inst.customers() {
                    if j == i {
                        continue;
                    }
                    let need = if reverse { step(j, i) } else { step(i, j) };
                    if need == 0 || need > u {
                        continue;
                    }
                    let prev = table[j][u - need];
                    let rest = prev.avoiding(i);
                    if rest.is_infinite() {
                        continue;
                    }
                    let v = if reverse { rest + node_cost[j] + w[j][i] } else { w[i][j] + node_cost[j] + rest };
                    e.offer(v, j);
                }
                table[i][u] = e;
            }
        }
        // stations: one hop into the customer/depot layer, never through the same station
        let mut out: Vec<Vec<f64>> = table.iter().map(|row| row.iter().map(|e| e.best).collect()).collect();
        for k in inst.station_ids() {
            for u in 0..=cap {
                let mut best = f64::INFINITY;
                if !reverse {
                    if leg(k, 0) <= u {
                        best = best.min(w[k][0] + node_cost[0]);
                    }
                    for j in inst.customers() {
                        let need = step(k, j);
                        if need <= u {
                            best = best.min(w[k][j] + node_cost[j] + table[j][u - need].best);
                        }
                    }
                } else {
                    if leg(0, k) <= u {
                        best = best.min(w[0][k]);
                    }
                    for j in inst.customers() {
                        let need = step(j, k);
                        if need <= u {
                            best = best.min(table[j][u - need].best + node_cost[j] + w[j][k]);
                        }
                    }
                }
                out[k][u] = best;
            }
        }
        // monotone in the budget
        for row in out.iter_mut() {
            for u in 1..row.len() {
                if row[u - 1] < row[u] {
                    row[u] = row[u - 1];
                }
            }
        }
        out
    }

    fn lookup(table: &Option<Vec<Vec<f64>>>, node: usize, units: f64) -> f64 {
        match table {
            None => f64::NEG_INFINITY,
            Some(t) => {
                let row = &t[node];
                if units < 0.0 {
                    return f64::INFINITY;
                }
                let u = (units + 1e-9).floor() as usize;
                row[u.min(row.len() - 1)]
            }
        }
    }

    /// Lower bound on the reduced cost still to come for a forward label at
    /// `node` departing no earlier than `time` with `load` on board.
    pub fn forward(&self, inst: &Instance, node: usize, time: f64, load: f64) -> f64 {
        if time + inst.shortest_travel(node, 0) > inst.horizon + 1e-9 {
            return f64::INFINITY;
        }
        let t = Self::lookup(&self.time_fwd, node, (inst.horizon - time) / self.unit);
        let d = Self::lookup(&self.demand_fwd, node, inst.capacity - load);
        t.max(d)
    }

    /// Lower bound on the reduced cost of any prefix from the depot reaching a
    /// backward label at `node` that departs no later than `latest`.
    pub fn backward(&self, inst: &Instance, node: usize, latest: f64, load: f64) -> f64 {
        if inst.shortest_travel(0, node) + inst.service(node) > latest + 1e-9 {
            return f64::INFINITY;
        }
        let t = Self::lookup(&self.time_bwd, node, latest / self.unit);
        let d = Self::lookup(&self.demand_bwd, node, inst.capacity - load + inst.demand(node));
        t.max(d)
    }

    pub fn is_trivial(&self) -> bool {
        self.time_fwd.is_none() && self.demand_fwd.is_none()
    }
}

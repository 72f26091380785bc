//! Routes with an explicit charging plan and their replay.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Instance, NodeKind, ENERGY_TOL, TIME_TOL};

/// Charging performed at the station found at `position` in the node sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChargeStop {
    pub position: usize,
    /// Time at which charging begins.
    pub start: f64,
    /// Energy added, in watt-hours.
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    /// Node sequence starting and ending at the depot.
    pub nodes: Vec<usize>,
    #[serde(default)]
    pub charges: Vec<ChargeStop>,
    pub duration: f64,
}

impl Route {
    pub fn empty() -> Self {
        Self { nodes: vec![0, 0], charges: Vec::new(), duration: 0.0 }
    }

    pub fn customers<'a>(&'a self, inst: &'a Instance) -> impl Iterator<Item = usize> + 'a {
        self.nodes.iter().copied().filter(move |&i| inst.is_customer(i))
    }

    pub fn load(&self, inst: &Instance) -> f64 {
        self.customers(inst).map(|i| inst.demand(i)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RouteViolation {
    #[error("route must start and end at the depot and only visit known nodes")]
    Shape,
    #[error("customer {0} is visited more than once")]
    RepeatedCustomer(usize),
    #[error("load {load} exceeds capacity {capacity}")]
    Capacity { load: f64, capacity: f64 },
    #[error("arrival {arrival:.4} at node {node} (position {position}) is after its window closes at {latest:.4}")]
    Window { position: usize, node: usize, arrival: f64, latest: f64 },
    #[error("battery level {level:.3} Wh out of range at position {position}")]
    Battery { position: usize, level: f64 },
    #[error("charge stop at position {position} is not at a station")]
    ChargeAtNonStation { position: usize },
    #[error("return at {arrival:.4} exceeds the horizon {horizon:.4}")]
    Horizon { arrival: f64, horizon: f64 },
}

/// Replays a route with its charging plan, departing the depot at time 0,
/// and returns its duration.
///
/// Customers are served as soon as their window opens; charging begins at
/// the later of arrival and the stop's start time.
pub fn route_cost(inst: &Instance, route: &Route) -> Result<f64, RouteViolation> {
    let nodes = &route.nodes;
    if nodes.len() < 2 || nodes[0] != 0 || *nodes.last().unwrap() != 0 || nodes.iter().any(|&i| i >= inst.n_nodes()) {
        return Err(RouteViolation::Shape);
    }
    if nodes[1..nodes.len() - 1].iter().any(|&i| i == 0) {
        return Err(RouteViolation::Shape);
    }
    let mut seen = vec![false; inst.n_nodes()];
    for &i in nodes {
        if inst.is_customer(i) {
            if seen[i] {
                return Err(RouteViolation::RepeatedCustomer(i));
            }
            seen[i] = true;
        }
    }
    let load = route.load(inst);
    if load > inst.capacity + 1e-9 {
        return Err(RouteViolation::Capacity { load, capacity: inst.capacity });
    }
    for c in &route.charges {
        if c.position >= nodes.len() || !inst.is_station(nodes[c.position]) {
            return Err(RouteViolation::ChargeAtNonStation { position: c.position });
        }
    }
    if nodes.len() == 2 {
        return Ok(0.0);
    }
    let mut time = 0.0;
    let mut soc = inst.battery;
    for pos in 1..nodes.len() {
        let (i, j) = (nodes[pos - 1], nodes[pos]);
        time += inst.travel(i, j);
        soc -= inst.energy(i, j);
        if soc < -ENERGY_TOL {
            return Err(RouteViolation::Battery { position: pos, level: soc });
        }
        let (e, l) = inst.window(j);
        match inst.kind(j) {
            NodeKind::Customer => {
                if time > l + TIME_TOL {
                    return Err(RouteViolation::Window { position: pos, node: j, arrival: time, latest: l });
                }
                time = time.max(e) + inst.service(j);
            }
            NodeKind::Station => {
                for c in route.charges.iter().filter(|c| c.position == pos) {
                    time = time.max(c.start);
                    let st = inst.station(j);
                    let target = soc + c.amount;
                    if target > inst.battery + ENERGY_TOL || c.amount < -ENERGY_TOL {
                        return Err(RouteViolation::Battery { position: pos, level: target });
                    }
                    time += st.charge_time(soc.max(0.0), target);
                    soc = target.min(inst.battery);
                }
            }
            NodeKind::Depot => {
                if time > inst.horizon + TIME_TOL {
                    return Err(RouteViolation::Horizon { arrival: time, horizon: inst.horizon });
                }
            }
        }
    }
    Ok(time)
}

//! Instance data model, canonical JSON format and fixed-route evaluation.

pub mod fixtures;
pub mod montoya;
pub mod random;
mod route;
mod solution;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pwl::{Breakpoint, Pwl};
use crate::PwlFunction;

pub use route::{route_cost, ChargeStop, Route, RouteViolation};
pub use solution::{Solution, SolutionError};

/// Absolute tolerance on times, in hours.
pub const TIME_TOL: f64 = 1e-6;
/// Absolute tolerance on battery levels, in watt-hours.
pub const ENERGY_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Depot,
    Customer,
    Station,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tech {
    Slow,
    Moderate,
    Fast,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid XML: {0}")]
    Xml(String),
    #[error("{0}")]
    Schema(String),
    #[error("negative value for {0}")]
    Negative(String),
    #[error("station {id}: {reason}")]
    Curve { id: usize, reason: String },
}

fn schema(msg: impl Into<String>) -> ModelError {
    ModelError::Schema(msg.into())
}

/// One node record of the instance file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeData {
    pub id: usize,
    pub kind: NodeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub service_time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demand: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 2]>,
}

impl NodeData {
    pub fn new(id: usize, kind: NodeKind) -> Self {
        Self { id, kind, x: None, y: None, service_time: None, demand: None, window: None }
    }

    pub fn at(mut self, x: f64, y: f64) -> Self {
        self.x = Some(x);
        self.y = Some(y);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationData {
    pub id: usize,
    pub curve: PwlFunction,
    pub tech: Tech,
}

/// Serializable form of an instance, mirroring the JSON schema key for key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceData {
    pub name: String,
    #[serde(rename = "K")]
    pub fleet: usize,
    #[serde(rename = "Q")]
    pub capacity: f64,
    #[serde(rename = "B")]
    pub battery: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consumption_rate: Option<f64>,
    pub nodes: Vec<NodeData>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub travel_time: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<Vec<Vec<f64>>>,
    pub stations: Vec<StationData>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: usize,
    pub kind: NodeKind,
    pub x: Option<f64>,
    pub y: Option<f64>,
    pub service_time: f64,
    pub demand: f64,
    /// `[earliest arrival, latest arrival]`; for stations the times at which
    /// a vehicle can be there at all.
    pub window: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Station {
    pub id: usize,
    pub tech: Tech,
    /// State of charge as a function of charging time from empty.
    pub curve: PwlFunction,
    /// Charging time from empty as a function of the state of charge.
    pub inverse: PwlFunction,
}

impl Station {
    /// Time needed to charge from `from` to `to` watt-hours.
    pub fn charge_time(&self, from: f64, to: f64) -> f64 {
        let b = self.curve.last_value();
        let lo = self.inverse.eval_clamped(from.clamp(0.0, b));
        let hi = self.inverse.eval_clamped(to.clamp(0.0, b));
        (hi - lo).max(0.0)
    }

    /// Level reached after charging `dt` hours starting at `from`.
    pub fn charge_for(&self, from: f64, dt: f64) -> f64 {
        let b = self.curve.last_value();
        let start = self.inverse.eval_clamped(from.clamp(0.0, b));
        self.curve.eval_clamped(start + dt.max(0.0))
    }

    /// Time to charge from empty to full.
    pub fn full_time(&self) -> f64 {
        self.curve.hi()
    }
}

/// A validated instance. Node ids are positions: the depot is 0, customers
/// are `1..=n`, stations follow.
#[derive(Debug, Clone)]
pub struct Instance {
    pub name: String,
    pub fleet: usize,
    pub capacity: f64,
    pub battery: f64,
    pub horizon: f64,
    pub speed: Option<f64>,
    pub consumption_rate: Option<f64>,
    nodes: Vec<Node>,
    travel: Vec<Vec<f64>>,
    energy: Vec<Vec<f64>>,
    stations: Vec<Station>,
    n_customers: usize,
    closure: Vec<Vec<f64>>,
    triangle_ok: bool,
    shift_invariant: bool,
    windows_given: Vec<bool>,
}

fn euclid(a: &NodeData, b: &NodeData) -> Option<f64> {
    Some(((a.x? - b.x?).powi(2) + (a.y? - b.y?).powi(2)).sqrt())
}

fn check_matrix(m: &[Vec<f64>], n: usize, what: &str) -> Result<(), ModelError> {
    if m.len() != n || m.iter().any(|row| row.len() != n) {
        return Err(schema(format!("{what} must be a {n}x{n} matrix")));
    }
    for (i, row) in m.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if i != j && !(v.is_finite() && v >= 0.0) {
                return Err(ModelError::Negative(format!("{what}[{i}][{j}]")));
            }
        }
    }
    Ok(())
}

/// Validates a charging curve and cuts it where it first reaches `battery`.
fn normalize_curve(id: usize, curve: &PwlFunction, battery: f64) -> Result<PwlFunction, ModelError> {
    let bad = |reason: &str| ModelError::Curve { id, reason: reason.to_string() };
    let pts = curve.points();
    if pts.len() < 2 {
        return Err(bad("curve needs at least two breakpoints"));
    }
    if pts[0].t.abs() > 1e-12 || pts[0].v.abs() > ENERGY_TOL {
        return Err(bad("curve must start at (0, 0)"));
    }
    if curve.max_value() < battery - ENERGY_TOL {
        return Err(bad("curve does not reach the battery capacity"));
    }
    let mut out = vec![Breakpoint::new(0.0, 0.0)];
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b.v <= a.v {
            return Err(bad("curve must be strictly increasing until it reaches the battery capacity"));
        }
        if b.v >= battery - ENERGY_TOL {
            let t = if b.v > battery { a.t + (b.t - a.t) * (battery - a.v) / (b.v - a.v) } else { b.t };
            out.push(Breakpoint::new(t, battery));
            break;
        }
        out.push(b);
    }
    Pwl::new(out).map_err(|e| bad(&e.to_string()))
}

fn invert(curve: &PwlFunction) -> PwlFunction {
    Pwl::new(curve.points().iter().map(|p| Breakpoint::new(p.v, p.t)).collect())
        .expect("normalized curves are strictly increasing")
}

impl Instance {
    /// Validates raw data and derives every missing quantity.
    pub fn build(data: InstanceData) -> Result<Self, ModelError> {
        let n_nodes = data.nodes.len();
        if n_nodes == 0 || data.nodes[0].kind != NodeKind::Depot {
            return Err(schema("the first node must be the depot"));
        }
        for (pos, node) in data.nodes.iter().enumerate() {
            if node.id != pos {
                return Err(schema(format!("node ids must equal their positions (found {} at {pos})", node.id)));
            }
        }
        let n_customers = data.nodes.iter().skip(1).take_while(|n| n.kind == NodeKind::Customer).count();
        if data.nodes[1 + n_customers..].iter().any(|n| n.kind != NodeKind::Station) {
            return Err(schema("nodes must be ordered depot, customers, stations"));
        }
        let n_stations = n_nodes - 1 - n_customers;
        if data.stations.len() != n_stations {
            return Err(schema(format!("{n_stations} station nodes but {} station records", data.stations.len())));
        }
        for (name, v) in [("Q", data.capacity), ("B", data.battery), ("T", data.horizon)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ModelError::Negative(name.to_string()));
            }
        }
        if data.battery <= 0.0 || data.horizon <= 0.0 {
            return Err(schema("B and T must be positive"));
        }

        let travel = match data.travel_time {
            Some(m) => m,
            None => {
                let speed = data.speed.ok_or_else(|| schema("travel_time or speed is required"))?;
                if speed <= 0.0 {
                    return Err(schema("speed must be positive"));
                }
                distance_matrix(&data.nodes)?.into_iter().map(|r| r.into_iter().map(|d| d / speed).collect()).collect()
            }
        };
        let energy = match data.energy {
            Some(m) => m,
            None => {
                let rate = data.consumption_rate.ok_or_else(|| schema("energy or consumption_rate is required"))?;
                distance_matrix(&data.nodes)?.into_iter().map(|r| r.into_iter().map(|d| d * rate).collect()).collect()
            }
        };
        check_matrix(&travel, n_nodes, "travel_time")?;
        check_matrix(&energy, n_nodes, "energy")?;
        let mut travel = travel;
        let mut energy = energy;
        for i in 0..n_nodes {
            travel[i][i] = 0.0;
            energy[i][i] = 0.0;
        }

        let mut stations = Vec::with_capacity(n_stations);
        for (k, s) in data.stations.iter().enumerate() {
            let id = 1 + n_customers + k;
            if s.id != id {
                return Err(schema(format!("station record {k} has id {} but node {id} expected", s.id)));
            }
            let curve = normalize_curve(id, &s.curve, data.battery)?;
            let inverse = invert(&curve);
            stations.push(Station { id, tech: s.tech, curve, inverse });
        }

        let closure = floyd(&travel);
        let horizon = data.horizon;
        let mut windows_given = vec![false; n_nodes];
        let mut nodes = Vec::with_capacity(n_nodes);
        for (i, nd) in data.nodes.iter().enumerate() {
            let service = nd.service_time.unwrap_or(0.0);
            let demand = nd.demand.unwrap_or(0.0);
            if service < 0.0 || !service.is_finite() {
                return Err(ModelError::Negative(format!("service_time of node {i}")));
            }
            if demand < 0.0 || !demand.is_finite() {
                return Err(ModelError::Negative(format!("demand of node {i}")));
            }
            let derived = match nd.kind {
                NodeKind::Depot => (0.0, horizon),
                NodeKind::Customer => (travel[0][i], horizon - service - travel[i][0]),
                NodeKind::Station => (closure[0][i], horizon - closure[i][0]),
            };
            let window = match (nd.kind, nd.window) {
                (NodeKind::Depot, _) => (0.0, horizon),
                (_, Some([e, l])) => {
                    windows_given[i] = true;
                    (e, l)
                }
                (_, None) => derived,
            };
            nodes.push(Node {
                id: i,
                kind: nd.kind,
                x: nd.x,
                y: nd.y,
                service_time: if nd.kind == NodeKind::Customer { service } else { 0.0 },
                demand: if nd.kind == NodeKind::Customer { demand } else { 0.0 },
                window,
            });
        }

        let triangle_ok = triangle_holds(&travel);
        if !triangle_ok {
            log::warn!("instance {}: travel times violate the triangle inequality", data.name);
        }
        let windows_loose = (1..=n_customers).all(|i| {
            let (e, l) = nodes[i].window;
            let (de, dl) = (travel[0][i], horizon - nodes[i].service_time - travel[i][0]);
            e <= de + 1e-9 && l >= dl - 1e-9
        });

        Ok(Self {
            name: data.name,
            fleet: data.fleet,
            capacity: data.capacity,
            battery: data.battery,
            horizon,
            speed: data.speed,
            consumption_rate: data.consumption_rate,
            nodes,
            travel,
            energy,
            stations,
            n_customers,
            closure,
            triangle_ok,
            shift_invariant: triangle_ok && windows_loose,
            windows_given,
        })
    }

    /// The complete serializable form; matrices and windows are always written.
    pub fn to_data(&self) -> InstanceData {
        let nodes = self
            .nodes
            .iter()
            .map(|n| NodeData {
                id: n.id,
                kind: n.kind,
                x: n.x,
                y: n.y,
                service_time: Some(n.service_time),
                demand: Some(n.demand),
                window: Some([n.window.0, n.window.1]),
            })
            .collect();
        InstanceData {
            name: self.name.clone(),
            fleet: self.fleet,
            capacity: self.capacity,
            battery: self.battery,
            horizon: self.horizon,
            speed: self.speed,
            consumption_rate: self.consumption_rate,
            nodes,
            travel_time: Some(self.travel.clone()),
            energy: Some(self.energy.clone()),
            stations: self
                .stations
                .iter()
                .map(|s| StationData { id: s.id, curve: s.curve.clone(), tech: s.tech })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_data()).expect("instance data is always serializable")
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_customers(&self) -> usize {
        self.n_customers
    }

    pub fn n_stations(&self) -> usize {
        self.stations.len()
    }

    pub fn customers(&self) -> std::ops::RangeInclusive<usize> {
        1..=self.n_customers
    }

    pub fn station_ids(&self) -> std::ops::Range<usize> {
        self.n_customers + 1..self.nodes.len()
    }

    pub fn node(&self, i: usize) -> &Node {
        &self.nodes[i]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn kind(&self, i: usize) -> NodeKind {
        self.nodes[i].kind
    }

    pub fn is_customer(&self, i: usize) -> bool {
        i >= 1 && i <= self.n_customers
    }

    pub fn is_station(&self, i: usize) -> bool {
        i > self.n_customers && i < self.nodes.len()
    }

    pub fn station(&self, i: usize) -> &Station {
        &self.stations[i - self.n_customers - 1]
    }

    pub fn stations(&self) -> &[Station] {
        &self.stations
    }

    pub fn travel(&self, i: usize, j: usize) -> f64 {
        self.travel[i][j]
    }

    pub fn energy(&self, i: usize, j: usize) -> f64 {
        self.energy[i][j]
    }

    /// Shortest travel time from `i` to `j` through any intermediate nodes.
    pub fn shortest_travel(&self, i: usize, j: usize) -> f64 {
        self.closure[i][j]
    }

    pub fn service(&self, i: usize) -> f64 {
        self.nodes[i].service_time
    }

    pub fn demand(&self, i: usize) -> f64 {
        self.nodes[i].demand
    }

    pub fn window(&self, i: usize) -> (f64, f64) {
        self.nodes[i].window
    }

    /// Latest departure time from node `i`.
    pub fn latest_departure(&self, i: usize) -> f64 {
        self.nodes[i].window.1 + self.nodes[i].service_time
    }

    /// Earliest departure time from node `i`.
    pub fn earliest_departure(&self, i: usize) -> f64 {
        self.nodes[i].window.0 + self.nodes[i].service_time
    }

    /// `true` when the customer cannot be served even on a direct trip.
    pub fn window_infeasible(&self, i: usize) -> bool {
        let (e, l) = self.nodes[i].window;
        e > l + TIME_TOL
    }

    pub fn window_given(&self, i: usize) -> bool {
        self.windows_given[i]
    }

    pub fn triangle_inequality_holds(&self) -> bool {
        self.triangle_ok
    }

    /// `true` when starting a route later never helps: travel times satisfy
    /// the triangle inequality and no customer window is tighter than the
    /// one implied by the horizon. Route duration is then invariant under
    /// shifting a schedule in time, which bidirectional labeling relies on.
    pub fn shift_invariant(&self) -> bool {
        self.shift_invariant
    }

    /// Returns a copy with every station curve replaced.
    pub fn with_curves(&self, curves: &[PwlFunction]) -> Result<Self, ModelError> {
        let mut data = self.to_data();
        for (s, c) in data.stations.iter_mut().zip(curves) {
            s.curve = c.clone();
        }
        Self::build(data)
    }
}

fn distance_matrix(nodes: &[NodeData]) -> Result<Vec<Vec<f64>>, ModelError> {
    nodes
        .iter()
        .map(|a| {
            nodes
                .iter()
                .map(|b| euclid(a, b).ok_or_else(|| schema(format!("node {} has no coordinates", a.id))))
                .collect()
        })
        .collect()
}

fn floyd(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = m.len();
    let mut d = m.to_vec();
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}

fn triangle_holds(m: &[Vec<f64>]) -> bool {
    let n = m.len();
    (0..n).all(|i| (0..n).all(|j| (0..n).all(|k| m[i][j] <= m[i][k] + m[k][j] + 1e-9)))
}

pub fn parse_instance(bytes: &[u8]) -> Result<Instance, ModelError> {
    let data: InstanceData = serde_json::from_slice(bytes)?;
    Instance::build(data)
}

/// Fills derived customer windows into raw data without touching given ones.
pub fn derive_windows(data: &mut InstanceData) -> Result<(), ModelError> {
    let inst = Instance::build(data.clone())?;
    for (nd, n) in data.nodes.iter_mut().zip(inst.nodes()) {
        if nd.window.is_none() && n.kind != NodeKind::Station {
            nd.window = Some([n.window.0, n.window.1]);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearMode {
    Under,
    Over,
}

/// Single-segment approximations of a charging curve.
///
/// `Under` is the chord from empty to full, `Over` extends the first segment
/// until it reaches the capacity.
pub fn linearize_curve(curve: &PwlFunction, mode: LinearMode) -> PwlFunction {
    let pts = curve.points();
    let top = curve.max_value();
    let t_full = curve.inverse_eval(top).unwrap_or(curve.hi());
    if !is_concave(curve) {
        log::warn!("linearizing a non-concave charging curve");
    }
    match mode {
        LinearMode::Under => {
            if pts.len() == 2 && (pts[1].t - t_full).abs() < 1e-12 && curve.hi() == t_full {
                return curve.clone();
            }
            let mut out = vec![Breakpoint::new(0.0, 0.0), Breakpoint::new(t_full, top)];
            if curve.hi() > t_full + 1e-9 {
                out.push(Breakpoint::new(curve.hi(), top));
            }
            Pwl::new(out).expect("chord has increasing breakpoints")
        }
        LinearMode::Over => {
            if pts.len() < 2 || pts[1].t <= 0.0 {
                return curve.clone();
            }
            let slope = (pts[1].v - pts[0].v) / (pts[1].t - pts[0].t);
            if slope <= 0.0 {
                return curve.clone();
            }
            let t_cap = top / slope;
            let mut out = vec![Breakpoint::new(0.0, 0.0)];
            if t_cap < curve.hi() - 1e-9 {
                out.push(Breakpoint::new(t_cap, top));
                out.push(Breakpoint::new(curve.hi(), top));
            } else {
                out.push(Breakpoint::new(t_cap, top));
            }
            Pwl::new(out).expect("extended first segment has increasing breakpoints")
        }
    }
}

/// `true` when segment slopes are nonincreasing.
pub fn is_concave(curve: &PwlFunction) -> bool {
    let pts = curve.points();
    let slopes: Vec<f64> = pts.windows(2).map(|w| (w[1].v - w[0].v) / (w[1].t - w[0].t)).collect();
    slopes.windows(2).all(|s| s[1] <= s[0] * (1.0 + 1e-9) + 1e-9)
}

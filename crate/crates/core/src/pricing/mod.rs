//! Pricing: least reduced-cost routes with nonlinear charging.
//!
//! Labels are extended forward from the depot and backward towards it up to
//! time thresholds, filtered by dominance, and merged at every node. Memory
//! of visited customers follows the ng-route relaxation; the ng-sets grow
//! until the best routes found are elementary.

mod graph;
mod labeling;
mod qroute;

use fixedbitset::FixedBitSet;
use serde::Serialize;

use crate::model::{Instance, Route};

pub use graph::{backward_potential, AddOutcome, Attrs, DominanceGraph};
pub use labeling::{label_setting, Direction, Label, LabelSet};
pub use qroute::QRouteBounds;

/// Dual values for one pricing call.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Duals {
    /// Indexed by node id; zero for the depot and stations.
    pub customer: Vec<f64>,
    /// Dual collected once per route: the fleet row plus vehicle-count branches.
    pub route: f64,
    pub cuts: Vec<CutDual>,
    /// Duals collected per traversal of an arc, from arc branching rows.
    pub arcs: Vec<(usize, usize, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CutDual {
    pub nodes: [usize; 3],
    pub sigma: f64,
}

impl Duals {
    pub fn zero(inst: &Instance) -> Self {
        Self { customer: vec![0.0; inst.n_nodes()], ..Self::default() }
    }

    /// `c_p` minus every dual the route collects.
    pub fn reduced_cost(&self, route: &Route) -> f64 {
        let mut rc = route.duration - self.route;
        for &i in &route.nodes {
            rc -= self.customer.get(i).copied().unwrap_or(0.0);
        }
        for c in &self.cuts {
            let hits = route.nodes.iter().filter(|i| c.nodes.contains(i)).count();
            rc -= (hits / 2) as f64 * c.sigma;
        }
        for w in route.nodes.windows(2) {
            for &(i, j, pi) in &self.arcs {
                if w[0] == i && w[1] == j {
                    rc -= pi;
                }
            }
        }
        rc
    }
}

/// Arcs the pricing problem may use.
#[derive(Debug, Clone)]
pub struct Network {
    allowed: Vec<FixedBitSet>,
}

impl Network {
    pub fn full(inst: &Instance) -> Self {
        Self::full_with(inst.n_nodes())
    }

    pub fn full_with(n: usize) -> Self {
        let mut allowed = vec![FixedBitSet::with_capacity(n); n];
        for (i, row) in allowed.iter_mut().enumerate() {
            row.insert_range(..);
            row.set(i, false);
        }
        Self { allowed }
    }

    pub fn forbid(&mut self, i: usize, j: usize) {
        self.allowed[i].set(j, false);
    }

    pub fn allows(&self, i: usize, j: usize) -> bool {
        self.allowed[i][j]
    }

    pub fn route_allowed(&self, nodes: &[usize]) -> bool {
        nodes.windows(2).all(|w| w[0] == w[1] || self.allows(w[0], w[1]))
    }
}

/// Neighbourhoods remembered by ng-route labels.
#[derive(Debug, Clone)]
pub struct NgSets {
    sets: Vec<FixedBitSet>,
}

impl NgSets {
    /// Each customer remembers itself and its `size − 1` nearest customers by
    /// travel time. `None` gives full memory, i.e. elementary routes.
    pub fn nearest(inst: &Instance, size: Option<usize>) -> Self {
        let n = inst.n_nodes();
        let mut sets = vec![FixedBitSet::with_capacity(n); n];
        for i in inst.customers() {
            let mut others: Vec<usize> = inst.customers().filter(|&j| j != i).collect();
            others.sort_by(|&a, &b| inst.travel(i, a).total_cmp(&inst.travel(i, b)).then(a.cmp(&b)));
            let keep = size.map_or(others.len(), |s| s.saturating_sub(1));
            sets[i].insert(i);
            for &j in others.iter().take(keep) {
                sets[i].insert(j);
            }
        }
        Self { sets }
    }

    pub fn set(&self, i: usize) -> &FixedBitSet {
        &self.sets[i]
    }

    pub fn covers_all(&self, inst: &Instance) -> bool {
        inst.customers().all(|i| inst.customers().all(|j| self.sets[i][j]))
    }

    /// Adds `node` to the sets of every customer strictly inside each of its
    /// repeated visits. Returns whether any set grew.
    pub fn forbid_cycles(&mut self, inst: &Instance, nodes: &[usize]) -> bool {
        let mut grew = false;
        for (p, &k) in nodes.iter().enumerate() {
            if !inst.is_customer(k) {
                continue;
            }
            if let Some(q) = nodes[p + 1..].iter().position(|&x| x == k) {
                for &m in &nodes[p + 1..p + 1 + q] {
                    if inst.is_customer(m) && !self.sets[m][k] {
                        self.sets[m].insert(k);
                        grew = true;
                    }
                }
            }
        }
        grew
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DominanceMode {
    None,
    /// Pairwise dominance between single labels.
    Single,
    /// Set dominance through dominance graphs.
    Graph,
}

#[derive(Debug, Clone)]
pub struct PricingConfig {
    pub dominance: DominanceMode,
    /// Bidirectional search when the instance allows it.
    pub bidirectional: bool,
    pub qroute: bool,
    /// Labels whose reduced-cost bound exceeds this are dropped; `None`
    /// keeps every label so the exact minimum is found.
    pub prune_above: Option<f64>,
    /// Initial ng-set size; `None` for elementary labels.
    pub ng_size: Option<usize>,
    pub max_columns: usize,
    pub eps: f64,
    /// Meeting time as a fraction of the horizon. `None` moves the two
    /// thresholds towards each other by label counts; a fixed split makes
    /// runs under different dominance rules extend the same labels.
    pub fixed_split: Option<f64>,
}

impl Default for PricingConfig {
    fn default() -> Self {
        Self {
            dominance: DominanceMode::Graph,
            bidirectional: true,
            qroute: true,
            prune_above: Some(0.0),
            ng_size: Some(8),
            max_columns: 30,
            eps: 1e-6,
            fixed_split: None,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct PricingStats {
    pub calls: usize,
    pub ng_rounds: usize,
    pub labels_forward: usize,
    pub labels_backward: usize,
    pub dominated: usize,
    pub purged: usize,
    pub pruned_by_bound: usize,
    pub merges: usize,
    pub graph_nodes: usize,
    /// Surviving labels per call, in call order.
    pub surviving: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct PricedRoute {
    pub route: Route,
    pub reduced_cost: f64,
}

#[derive(Debug, Clone)]
pub struct PricingOutcome {
    /// Elementary routes with negative reduced cost, best first.
    pub columns: Vec<PricedRoute>,
    /// Least reduced cost over the relaxation explored, `+∞` if no route was
    /// completed. Exact only when `prune_above` is `None`.
    pub min_reduced_cost: f64,
}

/// Pricing state kept across column generation iterations.
#[derive(Debug, Clone)]
pub struct Pricer {
    pub config: PricingConfig,
    pub ng: NgSets,
    pub stats: PricingStats,
}

impl Pricer {
    pub fn new(inst: &Instance, config: PricingConfig) -> Self {
        let ng = NgSets::nearest(inst, config.ng_size);
        Self { config, ng, stats: PricingStats::default() }
    }

    /// Runs labeling, enlarging ng-sets until the best routes are elementary.
    pub fn price(&mut self, inst: &Instance, duals: &Duals, net: &Network) -> PricingOutcome {
        self.stats.calls += 1;
        loop {
            self.stats.ng_rounds += 1;
            let found = label_setting(inst, duals, net, &self.ng, &self.config, &mut self.stats);
            let mut columns = Vec::new();
            let mut cyclic: Option<(f64, Vec<usize>)> = None;
            let mut min_rc = f64::INFINITY;
            for (nodes, est) in found.routes {
                min_rc = min_rc.min(est);
                if !is_elementary(inst, &nodes) {
                    if est < -self.config.eps && cyclic.as_ref().map_or(true, |c| est < c.0) {
                        cyclic = Some((est, nodes));
                    }
                    continue;
                }
                if est >= -self.config.eps {
                    continue;
                }
                if let Ok(route) = crate::charge::simulate_route(inst, &nodes) {
                    let rc = duals.reduced_cost(&route);
                    if rc < -self.config.eps {
                        columns.push(PricedRoute { route, reduced_cost: rc });
                    }
                }
            }
            if !columns.is_empty() {
                columns.sort_by(|a, b| a.reduced_cost.total_cmp(&b.reduced_cost));
                columns.truncate(self.config.max_columns);
                let best = columns[0].reduced_cost.min(min_rc);
                return PricingOutcome { columns, min_reduced_cost: best };
            }
            match cyclic {
                Some((_, nodes)) if self.ng.forbid_cycles(inst, &nodes) => continue,
                Some((est, _)) => {
                    log::warn!("cyclic route with reduced cost {est} could not be excluded");
                    return PricingOutcome { columns, min_reduced_cost: min_rc };
                }
                None => return PricingOutcome { columns, min_reduced_cost: min_rc },
            }
        }
    }
}

pub fn is_elementary(inst: &Instance, nodes: &[usize]) -> bool {
    let mut seen = vec![false; inst.n_nodes()];
    for &i in nodes {
        if inst.is_customer(i) {
            if seen[i] {
                return false;
            }
            seen[i] = true;
        }
    }
    true
}

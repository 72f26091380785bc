//! Restricted master problem.
//!
//! A set-partitioning LP over route columns: every customer covered exactly
//! once, at most `fleet` routes, subset-row cuts over customer triples, and
//! the rows added by branching. One big-M artificial per customer row and per
//! `≥` branch row keeps it feasible so duals always exist.

pub mod lp;

use std::collections::HashMap;

use serde::Serialize;

use crate::model::{Instance, Route};
use crate::pricing::{CutDual, Duals, Network};

pub use lp::{Basis, BasisVar, DenseSimplex, LpColumn, LpError, LpProblem, LpSolution, LpSolver, Sense};

/// A route column with its coverage and arc usage.
#[derive(Debug, Clone, Serialize)]
pub struct Column {
    pub route: Route,
    pub cost: f64,
    /// `(customer, visits)` pairs.
    pub cover: Vec<(usize, u32)>,
    /// `(from, to, traversals)` triples.
    pub arcs: Vec<(usize, usize, u32)>,
}

impl Column {
    pub fn new(inst: &Instance, route: Route) -> Self {
        let mut cover: Vec<(usize, u32)> = Vec::new();
        for i in route.customers(inst) {
            match cover.iter_mut().find(|c| c.0 == i) {
                Some(c) => c.1 += 1,
                None => cover.push((i, 1)),
            }
        }
        let mut arcs: Vec<(usize, usize, u32)> = Vec::new();
        for w in route.nodes.windows(2) {
            match arcs.iter_mut().find(|a| a.0 == w[0] && a.1 == w[1]) {
                Some(a) => a.2 += 1,
                None => arcs.push((w[0], w[1], 1)),
            }
        }
        Self { cost: route.duration, route, cover, arcs }
    }

    pub fn visits(&self, i: usize) -> u32 {
        self.cover.iter().find(|c| c.0 == i).map_or(0, |c| c.1)
    }

    pub fn arc_count(&self, i: usize, j: usize) -> u32 {
        self.arcs.iter().find(|a| a.0 == i && a.1 == j).map_or(0, |a| a.2)
    }

    /// `⌊Σ_{i∈S} α_i / 2⌋` for a cut set.
    pub fn cut_coefficient(&self, cut: &SrCut) -> u32 {
        cut.nodes.iter().map(|&i| self.visits(i)).sum::<u32>() / 2
    }
}

/// Subset-row inequality over three customers: at most one route may visit
/// two or more of them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct SrCut {
    pub nodes: [usize; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Branch {
    /// Bound on the number of routes.
    Vehicles { at_most: bool, bound: f64 },
    /// Bound on the number of traversals of arc `(from, to)`.
    Arc { from: usize, to: usize, at_most: bool, bound: f64 },
    /// Bound on the value of the column with this node sequence. Only used
    /// when route values are fractional while vehicles and arcs are not.
    Route { nodes: Vec<usize>, at_most: bool, bound: f64 },
}

impl Branch {
    fn sense(&self) -> Sense {
        let at_most = match *self {
            Branch::Vehicles { at_most, .. } | Branch::Arc { at_most, .. } | Branch::Route { at_most, .. } => at_most,
        };
        if at_most {
            Sense::Le
        } else {
            Sense::Ge
        }
    }

    fn bound(&self) -> f64 {
        match *self {
            Branch::Vehicles { bound, .. } | Branch::Arc { bound, .. } | Branch::Route { bound, .. } => bound,
        }
    }

    fn coefficient(&self, col: &Column) -> f64 {
        match self {
            Branch::Vehicles { .. } => 1.0,
            Branch::Arc { from, to, .. } => col.arc_count(*from, *to) as f64,
            Branch::Route { nodes, .. } => f64::from(u8::from(&col.route.nodes == nodes)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MasterSolution {
    pub objective: f64,
    /// Value per pool column, zero for columns outside the current LP.
    pub theta: Vec<f64>,
    /// Total value of artificial columns; positive means no feasible cover yet.
    pub artificial: f64,
    pub duals: Duals,
    pub iterations: usize,
}

impl MasterSolution {
    pub fn feasible(&self) -> bool {
        self.artificial <= 1e-6
    }

    pub fn vehicles(&self) -> f64 {
        self.theta.iter().sum()
    }
}

/// Restricted master problem with a global column pool.
#[derive(Clone)]
pub struct Rmp<S: LpSolver + Clone = DenseSimplex> {
    fleet: usize,
    customers: Vec<usize>,
    n_nodes: usize,
    big_m: f64,
    columns: Vec<Column>,
    index: HashMap<Vec<usize>, usize>,
    retired: Vec<bool>,
    cuts: Vec<SrCut>,
    branches: Vec<Branch>,
    solver: S,
    basis: Option<Basis>,
    /// Pool columns that were basic in the last solve.
    basic: Vec<usize>,
}

impl Rmp<DenseSimplex> {
    pub fn new(inst: &Instance) -> Self {
        Self::with_solver(inst, DenseSimplex::default())
    }
}

impl<S: LpSolver + Clone> Rmp<S> {
    pub fn with_solver(inst: &Instance, solver: S) -> Self {
        Self {
            fleet: inst.fleet,
            customers: inst.customers().collect(),
            n_nodes: inst.n_nodes(),
            big_m: 10.0 * inst.horizon,
            columns: Vec::new(),
            index: HashMap::new(),
            retired: Vec::new(),
            cuts: Vec::new(),
            branches: Vec::new(),
            solver,
            basis: None,
            basic: Vec::new(),
        }
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn cuts(&self) -> &[SrCut] {
        &self.cuts
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn artificial_cost(&self) -> f64 {
        self.big_m
    }

    /// Adds a route unless one with the same node sequence is pooled.
    /// Returns whether the pool grew.
    pub fn add_column(&mut self, inst: &Instance, route: Route) -> bool {
        if let Some(&k) = self.index.get(&route.nodes) {
            if self.retired[k] {
                self.retired[k] = false;
                return true;
            }
            return false;
        }
        self.index.insert(route.nodes.clone(), self.columns.len());
        self.columns.push(Column::new(inst, route));
        self.retired.push(false);
        true
    }

    pub fn add_cut(&mut self, cut: SrCut) -> bool {
        let mut nodes = cut.nodes;
        nodes.sort_unstable();
        let cut = SrCut { nodes };
        if self.cuts.contains(&cut) {
            return false;
        }
        self.cuts.push(cut);
        true
    }

    pub fn add_branch_vehicle(&mut self, at_most: bool, bound: f64) {
        self.branches.push(Branch::Vehicles { at_most, bound });
    }

    pub fn add_branch_arc(&mut self, from: usize, to: usize, at_most: bool, bound: f64) {
        self.branches.push(Branch::Arc { from, to, at_most, bound });
    }

    /// Whether a route is excluded by a route branch.
    pub fn route_forbidden(&self, nodes: &[usize]) -> bool {
        self.branches.iter().any(|b| matches!(b, Branch::Route { nodes: n, at_most: true, bound } if n == nodes && *bound < 1.0 - 1e-9))
    }

    pub fn set_branches(&mut self, branches: Vec<Branch>) {
        self.branches = branches;
    }

    /// Whether the branch rows can be met at all; contradictory vehicle
    /// bounds or a forbidden arc that is also forced make the node infeasible.
    pub fn branches_consistent(&self) -> bool {
        let (mut lo, mut hi) = (0.0f64, self.fleet as f64);
        for b in &self.branches {
            if let Branch::Vehicles { at_most, bound } = *b {
                if at_most {
                    hi = hi.min(bound);
                } else {
                    lo = lo.max(bound);
                }
            }
        }
        if lo > hi + 1e-9 {
            return false;
        }
        let forced = self.forced_arcs();
        let net = self.network_from(Network::full_with(self.n_nodes));
        forced.iter().all(|&(i, j)| net.allows(i, j))
    }

    fn forced_arcs(&self) -> Vec<(usize, usize)> {
        self.branches
            .iter()
            .filter_map(|b| match *b {
                Branch::Arc { from, to, at_most: false, bound } if bound >= 1.0 - 1e-9 => Some((from, to)),
                _ => None,
            })
            .collect()
    }

    /// The arcs pricing may use under the current branches. Arcs bounded by
    /// zero are removed; a forced arc out of (into) a customer removes every
    /// other arc out of (into) that customer.
    pub fn network(&self, inst: &Instance) -> Network {
        self.network_from(Network::full(inst))
    }

    fn network_from(&self, mut net: Network) -> Network {
        let is_customer = |i: usize| self.customers.binary_search(&i).is_ok();
        for b in &self.branches {
            if let Branch::Arc { from, to, at_most: true, bound } = *b {
                if bound < 1.0 - 1e-9 {
                    net.forbid(from, to);
                }
            }
        }
        for (i, j) in self.forced_arcs() {
            for k in 0..self.n_nodes {
                if is_customer(i) && k != j && k != i {
                    net.forbid(i, k);
                }
                if is_customer(j) && k != i && k != j {
                    net.forbid(k, j);
                }
            }
        }
        net
    }

    /// Pool columns the current LP may use.
    fn active(&self, net: &Network) -> Vec<usize> {
        (0..self.columns.len())
            .filter(|&k| {
                let nodes = &self.columns[k].route.nodes;
                !self.retired[k] && net.route_allowed(nodes) && !self.route_forbidden(nodes)
            })
            .collect()
    }

    fn build(&self, active: &[usize]) -> (LpProblem, usize) {
        let mut lp = LpProblem::default();
        let n = self.customers.len();
        for _ in 0..n {
            lp.add_row(Sense::Eq, 1.0);
        }
        let fleet_row = lp.add_row(Sense::Le, self.fleet as f64);
        let cut_base = lp.n_rows();
        for _ in &self.cuts {
            lp.add_row(Sense::Le, 1.0);
        }
        let branch_base = lp.n_rows();
        for b in &self.branches {
            lp.add_row(b.sense(), b.bound());
        }
        let mut artificials = 0;
        for r in 0..n {
            lp.add_column(self.big_m, vec![(r, 1.0)]);
            artificials += 1;
        }
        for (k, b) in self.branches.iter().enumerate() {
            if b.sense() == Sense::Ge {
                lp.add_column(self.big_m, vec![(branch_base + k, 1.0)]);
                artificials += 1;
            }
        }
        for &p in active {
            let col = &self.columns[p];
            let mut entries = Vec::new();
            for &(i, a) in &col.cover {
                if let Ok(r) = self.customers.binary_search(&i) {
                    entries.push((r, a as f64));
                }
            }
            entries.push((fleet_row, 1.0));
            for (c, cut) in self.cuts.iter().enumerate() {
                let v = col.cut_coefficient(cut);
                if v > 0 {
                    entries.push((cut_base + c, v as f64));
                }
            }
            for (k, b) in self.branches.iter().enumerate() {
                let v = b.coefficient(col);
                if v != 0.0 {
                    entries.push((branch_base + k, v));
                }
            }
            lp.add_column(col.cost, entries);
        }
        (lp, artificials)
    }

    /// Solves the LP over the pooled columns allowed by the current branches.
    pub fn solve_lp(&mut self, inst: &Instance) -> Result<MasterSolution, LpError> {
        let net = self.network(inst);
        let active = self.active(&net);
        let (lp, n_art) = self.build(&active);
        let sol = match self.solver.solve(&lp, self.basis.as_ref()) {
            Ok(s) => s,
            Err(LpError::Numerical(_)) => self.solver.solve(&lp, None)?,
            Err(e) => return Err(e),
        };
        let mut theta = vec![0.0; self.columns.len()];
        for (k, &p) in active.iter().enumerate() {
            theta[p] = sol.primal[n_art + k];
        }
        self.basic = sol
            .basis
            .0
            .iter()
            .filter_map(|v| match *v {
                BasisVar::Column(j) if j >= n_art => Some(active[j - n_art]),
                _ => None,
            })
            .collect();
        self.basis = Some(sol.basis.clone());
        let artificial = sol.primal[..n_art].iter().sum();

        let n = self.customers.len();
        let y = &sol.duals;
        let mut duals = Duals::zero(inst);
        for (r, &i) in self.customers.iter().enumerate() {
            duals.customer[i] = y[r];
        }
        duals.route = y[n];
        let cut_base = n + 1;
        duals.cuts = self
            .cuts
            .iter()
            .enumerate()
            .filter(|(c, _)| y[cut_base + c] != 0.0)
            .map(|(c, cut)| CutDual { nodes: cut.nodes, sigma: y[cut_base + c] })
            .collect();
        let branch_base = cut_base + self.cuts.len();
        for (k, b) in self.branches.iter().enumerate() {
            let v = y[branch_base + k];
            if v == 0.0 {
                continue;
            }
            match *b {
                Branch::Vehicles { .. } => duals.route += v,
                Branch::Arc { from, to, .. } => duals.arcs.push((from, to, v)),
                // concerns a single pooled column, not new ones
                Branch::Route { .. } => {}
            }
        }
        Ok(MasterSolution { objective: sol.objective, theta, artificial, duals, iterations: sol.iterations })
    }

    /// Retires non-basic columns whose reduced cost exceeds `threshold`.
    /// Returns the number retired.
    pub fn prune_columns(&mut self, duals: &Duals, threshold: f64) -> usize {
        let mut count = 0;
        for k in 0..self.columns.len() {
            if self.retired[k] || self.basic.contains(&k) {
                continue;
            }
            if duals.reduced_cost(&self.columns[k].route) > threshold {
                self.retired[k] = true;
                count += 1;
            }
        }
        if count > 0 {
            self.basis = None;
        }
        count
    }

    pub fn is_retired(&self, k: usize) -> bool {
        self.retired[k]
    }
}

/// Most violated subset-row cuts by full enumeration of customer triples.
/// Returns at most `max_new` cuts not in `existing`, most violated first,
/// each with its violation.
pub fn separate_sr_cuts(
    inst: &Instance,
    columns: &[Column],
    theta: &[f64],
    existing: &[SrCut],
    max_new: usize,
) -> Vec<(SrCut, f64)> {
    let customers: Vec<usize> = inst.customers().collect();
    if customers.len() < 3 {
        return Vec::new();
    }
    let mut lhs: HashMap<[usize; 3], f64> = HashMap::new();
    for (col, &v) in columns.iter().zip(theta) {
        if v <= 1e-9 {
            continue;
        }
        for (a, &i) in customers.iter().enumerate() {
            for (b, &j) in customers.iter().enumerate().skip(a + 1) {
                for &k in customers.iter().skip(b + 1) {
                    let hits = col.visits(i) + col.visits(j) + col.visits(k);
                    if hits >= 2 {
                        *lhs.entry([i, j, k]).or_insert(0.0) += (hits / 2) as f64 * v;
                    }
                }
            }
        }
    }
    let mut found: Vec<(SrCut, f64)> = lhs
        .into_iter()
        .map(|(nodes, s)| (SrCut { nodes }, s - 1.0))
        .filter(|(cut, viol)| *viol > 1e-4 && !existing.contains(cut))
        .collect();
    found.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.nodes.cmp(&b.0.nodes)));
    found.truncate(max_new);
    found
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::ex1;

    fn route(nodes: &[usize], duration: f64) -> Route {
        Route { nodes: nodes.to_vec(), charges: vec![], duration }
    }

    #[test]
    fn one_customer_one_column() {
        let inst = ex1(1, 0);
        let mut rmp = Rmp::new(&inst);
        assert!(rmp.add_column(&inst, route(&[0, 1, 0], 4.5)));
        assert!(!rmp.add_column(&inst, route(&[0, 1, 0], 4.5)));
        let s = rmp.solve_lp(&inst).unwrap();
        assert!((s.objective - 4.5).abs() < 1e-9);
        assert!((s.theta[0] - 1.0).abs() < 1e-9);
        assert!((s.duals.customer[1] - 4.5).abs() < 1e-9);
        assert!(s.duals.route.abs() < 1e-9);
        assert!(s.feasible());
    }

    #[test]
    fn empty_pool_uses_artificials() {
        let inst = ex1(2, 0);
        let mut rmp = Rmp::new(&inst);
        let s = rmp.solve_lp(&inst).unwrap();
        assert!(!s.feasible());
        assert!((s.objective - 2.0 * rmp.artificial_cost()).abs() < 1e-6);
    }

    #[test]
    fn three_routes_pairwise_covering_a_triple() {
        let inst = ex1(3, 0);
        let mut rmp = Rmp::new(&inst);
        for nodes in [[0, 1, 2, 0], [0, 2, 3, 0], [0, 1, 3, 0]] {
            rmp.add_column(&inst, route(&nodes, 1.0));
        }
        let s = rmp.solve_lp(&inst).unwrap();
        assert!((s.objective - 1.5).abs() < 1e-9);
        let cuts = separate_sr_cuts(&inst, rmp.columns(), &s.theta, &[], 50);
        assert_eq!(cuts.len(), 1);
        assert_eq!(cuts[0].0.nodes, [1, 2, 3]);
        assert!((cuts[0].1 - 0.5).abs() < 1e-9);

        rmp.add_cut(cuts[0].0);
        let t = rmp.solve_lp(&inst).unwrap();
        // only artificials can complete the cover now
        assert!(t.objective > s.objective + 1.0);
        assert!(t.duals.cuts.iter().all(|c| c.sigma <= 1e-12));
    }

    #[test]
    fn integer_solution_violates_no_cut() {
        let inst = ex1(3, 0);
        let mut rmp = Rmp::new(&inst);
        rmp.add_column(&inst, route(&[0, 1, 2, 3, 0], 2.0));
        let s = rmp.solve_lp(&inst).unwrap();
        assert!(separate_sr_cuts(&inst, rmp.columns(), &s.theta, &[], 50).is_empty());
        assert!(separate_sr_cuts(&ex1(2, 0), &[], &[], &[], 50).is_empty());
    }

    #[test]
    fn branch_rows_and_network() {
        let inst = ex1(3, 0);
        let mut rmp = Rmp::new(&inst);
        rmp.add_column(&inst, route(&[0, 1, 2, 0], 3.0));
        rmp.add_column(&inst, route(&[0, 3, 0], 2.0));
        rmp.add_column(&inst, route(&[0, 1, 0], 2.0));
        rmp.add_column(&inst, route(&[0, 2, 3, 0], 3.0));
        rmp.add_branch_arc(1, 2, true, 0.0);
        let net = rmp.network(&inst);
        assert!(!net.allows(1, 2));
        let s = rmp.solve_lp(&inst).unwrap();
        assert_eq!(s.theta[0], 0.0);
        assert!((s.objective - 5.0).abs() < 1e-9);

        rmp.set_branches(vec![]);
        rmp.add_branch_arc(2, 3, false, 1.0);
        let net = rmp.network(&inst);
        assert!(!net.allows(2, 0) && !net.allows(0, 3) && !net.allows(1, 3));
        assert!(net.allows(0, 2) && net.allows(2, 3));

        rmp.set_branches(vec![]);
        rmp.add_branch_vehicle(true, 1.0);
        rmp.add_branch_vehicle(false, 2.0);
        assert!(!rmp.branches_consistent());
        let s = rmp.solve_lp(&inst).unwrap();
        assert!(!s.feasible());
    }

    #[test]
    fn vehicle_branch_dual_goes_to_route_dual() {
        let inst = ex1(2, 0);
        let mut rmp = Rmp::new(&inst);
        rmp.add_column(&inst, route(&[0, 1, 0], 2.0));
        rmp.add_column(&inst, route(&[0, 2, 0], 2.0));
        rmp.add_column(&inst, route(&[0, 1, 2, 0], 5.0));
        rmp.add_branch_vehicle(false, 2.0);
        let s = rmp.solve_lp(&inst).unwrap();
        assert!((s.objective - 4.0).abs() < 1e-9);
        for (k, col) in rmp.columns().iter().enumerate() {
            let rc = s.duals.reduced_cost(&col.route);
            assert!(rc >= -1e-9);
            if s.theta[k] > 1e-9 {
                assert!(rc.abs() < 1e-9);
            }
        }
    }

    #[test]
    fn pruning_keeps_basic_columns() {
        let inst = ex1(2, 0);
        let mut rmp = Rmp::new(&inst);
        rmp.add_column(&inst, route(&[0, 1, 2, 0], 3.0));
        rmp.add_column(&inst, route(&[0, 1, 0], 5.0));
        rmp.add_column(&inst, route(&[0, 2, 0], 5.0));
        let s = rmp.solve_lp(&inst).unwrap();
        let expected = (1..3).filter(|&k| s.duals.reduced_cost(&rmp.columns()[k].route) > 0.0).count();
        assert_eq!(rmp.prune_columns(&s.duals, 0.0), expected);
        assert!(!rmp.is_retired(0));
        let t = rmp.solve_lp(&inst).unwrap();
        assert!((t.objective - s.objective).abs() < 1e-9);
    }
}

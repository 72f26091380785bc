//! Branch-and-price-and-cut.
//!
//! Nodes are explored best bound first. Each node runs column generation to
//! convergence, then separates subset-row cuts and prices again. Fractional
//! nodes branch on the number of vehicles, then on arc flows chosen by
//! strong branching.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use log::{debug, info, warn};
use serde::Serialize;
use thiserror::Error;

use crate::master::{separate_sr_cuts, Branch, LpError, MasterSolution, Rmp};
use crate::model::{Instance, Route, Solution};
use crate::pricing::{Pricer, PricingConfig, PricingStats};
use crate::tabu::{optimize_charging, tabu_search, TabuParams};

#[derive(Debug, Clone)]
pub struct BpcConfig {
    /// Separate subset-row cuts. Turning this off gives plain branch and price.
    pub cuts: bool,
    pub max_cut_rounds: usize,
    pub max_cuts_per_round: usize,
    pub time_limit: Option<Duration>,
    pub pricing: PricingConfig,
    pub strong_candidates: usize,
    /// Pricing rounds per strong-branching probe.
    pub strong_rounds: usize,
    pub int_tol: f64,
    /// Absolute gap below which the incumbent is declared optimal.
    pub gap_tol: f64,
    /// Tabu iterations for the starting incumbent; zero uses the greedy
    /// construction alone.
    pub warm_start_iter: usize,
    pub seed: u64,
    /// Stop after the root node.
    pub root_only: bool,
}

impl Default for BpcConfig {
    fn default() -> Self {
        Self {
            cuts: true,
            max_cut_rounds: 5,
            max_cuts_per_round: 50,
            time_limit: None,
            pricing: PricingConfig::default(),
            strong_candidates: 10,
            strong_rounds: 3,
            int_tol: 1e-4,
            gap_tol: 1e-4,
            warm_start_iter: 200,
            seed: 42,
            root_only: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum BpcError {
    #[error("master LP failed: {0}")]
    Lp(#[from] LpError),
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub instance: String,
    /// Lower bound at the root after cuts.
    pub lp_cost: Option<f64>,
    /// Cost of the best solution found.
    pub ip_cost: Option<f64>,
    /// Best bound over the open tree when the search stopped.
    pub lower_bound: f64,
    pub root_time: f64,
    pub total_time: f64,
    pub sr_cuts: usize,
    pub nodes: usize,
    pub columns: usize,
    pub optimal: bool,
    pub timed_out: bool,
    pub solution: Option<Solution>,
    pub pricing: PricingStats,
}

impl SolveReport {
    pub const CSV_HEADER: &'static str = "Instance,LP Cost,IP Cost,Root Time,IP Time,SR Cuts,Nodes";

    pub fn csv_row(&self) -> String {
        let cost = |v: Option<f64>| v.map_or_else(String::new, |v| format!("{v:.2}"));
        format!(
            "{},{},{},{:.2},{:.2},{},{}",
            self.instance,
            cost(self.lp_cost),
            cost(self.ip_cost),
            self.root_time,
            self.total_time,
            self.sr_cuts,
            self.nodes
        )
    }

    /// The instance has no feasible solution, proven by exhausting the tree.
    pub fn infeasible(&self) -> bool {
        self.ip_cost.is_none() && !self.timed_out
    }
}

#[derive(Debug, Clone)]
pub struct TreeNode {
    pub branches: Vec<Branch>,
    pub lower_bound: f64,
    pub depth: usize,
    id: usize,
}

impl PartialEq for TreeNode {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for TreeNode {}

impl PartialOrd for TreeNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for TreeNode {
    // reversed so the max-heap pops the least bound, oldest first
    fn cmp(&self, other: &Self) -> Ordering {
        other.lower_bound.total_cmp(&self.lower_bound).then(other.id.cmp(&self.id))
    }
}

/// Result of column generation at one node.
struct NodeLp {
    sol: MasterSolution,
    /// Pricing proved no negative column remains.
    converged: bool,
}

struct Search<'a> {
    inst: &'a Instance,
    config: &'a BpcConfig,
    rmp: Rmp,
    pricer: Pricer,
    deadline: Option<Instant>,
    timed_out: bool,
    incumbent: Option<(f64, Vec<Route>)>,
}

impl<'a> Search<'a> {
    fn out_of_time(&mut self) -> bool {
        if self.deadline.is_some_and(|d| Instant::now() >= d) {
            self.timed_out = true;
        }
        self.timed_out
    }

    fn upper_bound(&self) -> f64 {
        self.incumbent.as_ref().map_or(f64::INFINITY, |(c, _)| *c)
    }

    /// Alternates LP solves and pricing. Stops after `max_rounds` pricing
    /// calls when given, at convergence, or when time runs out.
    fn column_generation(&mut self, max_rounds: Option<usize>) -> Result<NodeLp, BpcError> {
        let mut rounds = 0;
        loop {
            let sol = self.rmp.solve_lp(self.inst)?;
            if max_rounds.is_some_and(|m| rounds >= m) || self.out_of_time() {
                return Ok(NodeLp { sol, converged: false });
            }
            let net = self.rmp.network(self.inst);
            let out = self.pricer.price(self.inst, &sol.duals, &net);
            rounds += 1;
            let mut added = false;
            let mut skipped = false;
            for col in out.columns {
                if self.rmp.route_forbidden(&col.route.nodes) {
                    skipped = true;
                    continue;
                }
                added |= self.rmp.add_column(self.inst, col.route);
            }
            if !added {
                if skipped {
                    warn!("pricing only found routes excluded by route branches; node bound may be weak");
                }
                return Ok(NodeLp { sol, converged: !skipped });
            }
        }
    }

    /// Column generation followed by cut rounds.
    fn solve_node(&mut self) -> Result<NodeLp, BpcError> {
        let mut lp = self.column_generation(None)?;
        if !self.config.cuts {
            return Ok(lp);
        }
        for _ in 0..self.config.max_cut_rounds {
            if !lp.converged || !lp.sol.feasible() || lp.sol.objective >= self.upper_bound() - self.config.gap_tol {
                break;
            }
            let found = separate_sr_cuts(
                self.inst,
                self.rmp.columns(),
                &lp.sol.theta,
                self.rmp.cuts(),
                self.config.max_cuts_per_round,
            );
            if found.is_empty() {
                break;
            }
            debug!("adding {} subset-row cuts", found.len());
            for (cut, _) in found {
                self.rmp.add_cut(cut);
            }
            lp = self.column_generation(None)?;
        }
        Ok(lp)
    }

    fn record_integer(&mut self, sol: &MasterSolution) {
        let routes: Vec<Route> = self
            .rmp
            .columns()
            .iter()
            .zip(&sol.theta)
            .filter(|(_, &v)| v > 0.5)
            .map(|(c, _)| c.route.clone())
            .collect();
        let cost: f64 = routes.iter().map(|r| r.duration).sum();
        if cost < self.upper_bound() - 1e-9 {
            info!("new incumbent {cost:.4}");
            self.incumbent = Some((cost, routes));
        }
    }

    /// Children of a fractional node.
    fn branch(&mut self, node: &TreeNode, sol: &MasterSolution) -> Result<Vec<Vec<Branch>>, BpcError> {
        let tol = self.config.int_tol;
        let with = |b: Branch| {
            let mut v = node.branches.clone();
            v.push(b);
            v
        };
        let k = sol.vehicles();
        if (k - k.round()).abs() > tol {
            return Ok(vec![
                with(Branch::Vehicles { at_most: true, bound: k.floor() }),
                with(Branch::Vehicles { at_most: false, bound: k.ceil() }),
            ]);
        }

        let flows = self.arc_flows(sol);
        let mut candidates: Vec<(usize, usize, f64)> =
            flows.into_iter().filter(|&(_, _, z)| (z - z.round()).abs() > tol).collect();
        candidates.sort_by(|a, b| {
            (b.2 - b.2.round()).abs().total_cmp(&(a.2 - a.2.round()).abs()).then((a.0, a.1).cmp(&(b.0, b.1)))
        });
        candidates.truncate(self.config.strong_candidates.max(1));

        if candidates.is_empty() {
            // integral vehicles and arcs with fractional routes
            let (p, _) = sol
                .theta
                .iter()
                .enumerate()
                .map(|(p, &v)| (p, (v - v.round()).abs()))
                .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
                .expect("fractional solution has columns");
            warn!("integral arc flows with fractional routes; branching on a route");
            let nodes = self.rmp.columns()[p].route.nodes.clone();
            return Ok(vec![
                with(Branch::Route { nodes: nodes.clone(), at_most: true, bound: 0.0 }),
                with(Branch::Route { nodes, at_most: false, bound: 1.0 }),
            ]);
        }

        let children = |&(i, j, z): &(usize, usize, f64)| {
            [
                with(Branch::Arc { from: i, to: j, at_most: true, bound: z.floor() }),
                with(Branch::Arc { from: i, to: j, at_most: false, bound: z.ceil() }),
            ]
        };
        if candidates.len() == 1 {
            return Ok(children(&candidates[0]).to_vec());
        }
        let mut best: Option<(f64, usize)> = None;
        for (c, cand) in candidates.iter().enumerate() {
            let mut score = 0.0;
            for branches in children(cand) {
                score += self.probe(branches)?;
            }
            debug!("strong branching arc ({}, {}): {score:.4}", cand.0, cand.1);
            if best.map_or(true, |(s, _)| score > s + 1e-9) {
                best = Some((score, c));
            }
            if self.out_of_time() {
                break;
            }
        }
        let chosen = best.map_or(0, |(_, c)| c);
        Ok(children(&candidates[chosen]).to_vec())
    }

    /// Estimated bound of a child by a few pricing rounds.
    fn probe(&mut self, branches: Vec<Branch>) -> Result<f64, BpcError> {
        let saved = self.rmp.branches().to_vec();
        self.rmp.set_branches(branches);
        let score = if self.rmp.branches_consistent() {
            self.column_generation(Some(self.config.strong_rounds))?.sol.objective
        } else {
            self.rmp.artificial_cost() * self.inst.n_customers().max(1) as f64
        };
        self.rmp.set_branches(saved);
        Ok(score)
    }

    fn arc_flows(&self, sol: &MasterSolution) -> Vec<(usize, usize, f64)> {
        let mut flows: std::collections::BTreeMap<(usize, usize), f64> = Default::default();
        for (col, &v) in self.rmp.columns().iter().zip(&sol.theta) {
            if v <= 1e-9 {
                continue;
            }
            for &(i, j, n) in &col.arcs {
                *flows.entry((i, j)).or_insert(0.0) += v * f64::from(n);
            }
        }
        flows.into_iter().map(|((i, j), z)| (i, j, z)).collect()
    }
}

fn is_integral(sol: &MasterSolution, tol: f64) -> bool {
    sol.theta.iter().all(|&v| (v - v.round()).abs() <= tol)
}

/// Starting incumbent and columns: tabu routes and the best single-customer
/// routes.
fn warm_start(inst: &Instance, config: &BpcConfig, rmp: &mut Rmp) -> Option<(f64, Vec<Route>)> {
    for c in inst.customers() {
        if let Some(r) = optimize_charging(inst, &[c]) {
            rmp.add_column(inst, r);
        }
    }
    let params = TabuParams { max_iter: config.warm_start_iter, seed: config.seed, ..TabuParams::for_size(inst.n_customers()) };
    match tabu_search(inst, &params) {
        Ok(out) => {
            for r in &out.solution.routes {
                rmp.add_column(inst, r.clone());
            }
            match out.solution.validate(inst) {
                Ok(cost) => Some((cost, out.solution.routes)),
                Err(e) => {
                    warn!("warm start solution rejected: {e}");
                    None
                }
            }
        }
        Err(e) => {
            info!("no warm start: {e}");
            None
        }
    }
}

/// Solves an instance to optimality or until the time limit.
pub fn solve(inst: &Instance, config: &BpcConfig) -> Result<SolveReport, BpcError> {
    let start = Instant::now();
    let mut rmp = Rmp::new(inst);
    let incumbent = warm_start(inst, config, &mut rmp);
    let mut search = Search {
        inst,
        config,
        rmp,
        pricer: Pricer::new(inst, config.pricing.clone()),
        deadline: config.time_limit.map(|d| start + d),
        timed_out: false,
        incumbent,
    };

    let mut open = BinaryHeap::new();
    open.push(TreeNode { branches: Vec::new(), lower_bound: f64::NEG_INFINITY, depth: 0, id: 0 });
    let mut next_id = 1;
    let (mut nodes, mut root_time, mut lp_cost) = (0usize, None, None);
    // bounds of nodes left unfinished by the time limit
    let mut unfinished = f64::INFINITY;

    while let Some(node) = open.pop() {
        if node.lower_bound >= search.upper_bound() - config.gap_tol {
            continue;
        }
        if search.out_of_time() {
            unfinished = unfinished.min(node.lower_bound);
            break;
        }
        nodes += 1;
        search.rmp.set_branches(node.branches.clone());
        if !search.rmp.branches_consistent() {
            continue;
        }
        let lp = search.solve_node()?;
        let bound = lp.sol.objective.max(node.lower_bound);
        if node.depth == 0 {
            root_time = Some(start.elapsed().as_secs_f64());
            if lp.converged && lp.sol.feasible() {
                lp_cost = Some(lp.sol.objective);
            }
        }
        if !lp.converged {
            unfinished = unfinished.min(node.lower_bound);
            if search.timed_out {
                break;
            }
            continue;
        }
        if !lp.sol.feasible() || bound >= search.upper_bound() - config.gap_tol {
            continue;
        }
        if is_integral(&lp.sol, config.int_tol) {
            search.record_integer(&lp.sol);
            continue;
        }
        if config.root_only {
            unfinished = unfinished.min(bound);
            break;
        }
        for branches in search.branch(&node, &lp.sol)? {
            open.push(TreeNode { branches, lower_bound: bound, depth: node.depth + 1, id: next_id });
            next_id += 1;
        }
    }

    let ub = search.upper_bound();
    let open_bound = open.iter().map(|n| n.lower_bound).fold(unfinished, f64::min);
    let lower_bound = open_bound.min(ub);
    let optimal = ub.is_finite() && lower_bound >= ub - config.gap_tol;
    let solution = search.incumbent.map(|(_, routes)| Solution::new(inst, routes));
    Ok(SolveReport {
        instance: inst.name.clone(),
        lp_cost,
        ip_cost: solution.as_ref().map(|s| s.cost),
        lower_bound,
        root_time: root_time.unwrap_or_else(|| start.elapsed().as_secs_f64()),
        total_time: start.elapsed().as_secs_f64(),
        sr_cuts: search.rmp.cuts().len(),
        nodes,
        columns: search.rmp.columns().len(),
        optimal,
        timed_out: search.timed_out,
        solution,
        pricing: search.pricer.stats.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::ex1;

    #[test]
    fn node_order_is_best_bound_then_oldest() {
        let mut heap = BinaryHeap::new();
        for (id, lb) in [(0, 3.0), (1, 1.0), (2, 2.0), (3, 1.0)] {
            heap.push(TreeNode { branches: vec![], lower_bound: lb, depth: 0, id });
        }
        let order: Vec<usize> = std::iter::from_fn(|| heap.pop().map(|n| n.id)).collect();
        assert_eq!(order, vec![1, 3, 2, 0]);
    }

    #[test]
    fn csv_row_has_two_decimals() {
        let r = SolveReport {
            instance: "x".into(),
            lp_cost: Some(9.025),
            ip_cost: Some(9.03),
            lower_bound: 9.03,
            root_time: 0.123,
            total_time: 1.0,
            sr_cuts: 2,
            nodes: 3,
            columns: 10,
            optimal: true,
            timed_out: false,
            solution: None,
            pricing: PricingStats::default(),
        };
        assert_eq!(r.csv_row(), "x,9.03,9.03,0.12,1.00,2,3");
        assert_eq!(SolveReport::CSV_HEADER.split(',').count(), r.csv_row().split(',').count());
    }

    #[test]
    fn single_customer() {
        let inst = ex1(1, 0);
        let r = solve(&inst, &BpcConfig { warm_start_iter: 0, ..Default::default() }).unwrap();
        assert!(r.optimal);
        assert!((r.ip_cost.unwrap() - 4.5).abs() < 1e-9);
        assert_eq!(r.nodes, 1);
        r.solution.unwrap().validate(&inst).unwrap();
    }

    #[test]
    fn no_customers() {
        let inst = ex1(0, 1);
        let r = solve(&inst, &BpcConfig::default()).unwrap();
        assert!(r.optimal);
        assert_eq!(r.ip_cost, Some(0.0));
    }
}

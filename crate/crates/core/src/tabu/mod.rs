//! Tabu search heuristic.
//!
//! Each iteration applies the best relocate, cross or exchange move between
//! two routes that is not tabu. Charging stops are re-optimized per route
//! every few iterations, and the search is shaken by random moves when the
//! incumbent stops improving.

mod charging;
mod construct;
mod moves;
mod route;

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::charge::simulate_route;
use crate::model::{Instance, Solution};

pub use charging::optimize_charging;
pub use construct::initial_solution;
pub use moves::{for_each_move, Move, MoveKind};
pub use route::{splice_duration, TabuRoute};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TabuError {
    #[error("customer {0} cannot be placed in any route")]
    Unplaceable(usize),
}

#[derive(Debug, Clone, Serialize)]
pub struct TabuParams {
    pub max_iter: usize,
    /// Tabu tenure is the number of customers divided by this.
    pub alpha: f64,
    pub shake_iter: usize,
    pub shake_tenure: usize,
    pub opt_iter: usize,
    /// Tenure decay factor, below 1.
    pub beta: f64,
    pub seed: u64,
    pub trace: bool,
}

impl TabuParams {
    /// Settings tuned per instance size class.
    pub fn for_size(customers: usize) -> Self {
        let (max_iter, alpha, shake_tenure) = match customers {
            0..=20 => (1000, 2.0, 80),
            21..=80 => (2000, 3.0, 160),
            _ => (4000, 3.0, 160),
        };
        Self { max_iter, alpha, shake_iter: 20, shake_tenure, opt_iter: 5, beta: 0.9, seed: 42, trace: false }
    }

    pub fn initial_tenure(&self, customers: usize) -> f64 {
        (customers as f64 / self.alpha).max(1.0)
    }
}

/// Working solution: routes with cached resources.
#[derive(Debug, Clone)]
pub struct TabuSolution {
    pub routes: Vec<TabuRoute>,
    pub(crate) next_id: u64,
}

impl TabuSolution {
    pub fn cost(&self) -> f64 {
        self.routes.iter().map(|r| r.duration).sum()
    }

    /// Applies an evaluated move. Returns `false`, leaving the solution
    /// untouched, if a resulting route fails full re-evaluation.
    pub fn apply(&mut self, inst: &Instance, m: &Move) -> bool {
        let id1 = self.routes[m.r1].id;
        let id2 = self.routes.get(m.r2).map_or(self.next_id, |r| r.id);
        let (Some(a), Some(b)) =
            (TabuRoute::new(inst, id1, m.nodes[0].clone()), TabuRoute::new(inst, id2, m.nodes[1].clone()))
        else {
            return false;
        };
        self.routes[m.r1] = a;
        if m.r2 < self.routes.len() {
            self.routes[m.r2] = b;
        } else {
            self.routes.push(b);
            self.next_id += 1;
        }
        self.routes.retain(|r| !r.is_empty(inst));
        true
    }

    /// Replaces each route by its best charging plan when that is shorter.
    pub fn optimize_charging(&mut self, inst: &Instance) {
        for r in &mut self.routes {
            let customers: Vec<usize> = r.customers(inst).collect();
            if let Some(best) = optimize_charging(inst, &customers) {
                if best.duration < r.duration - 1e-9 {
                    if let Some(new) = TabuRoute::new(inst, r.id, best.nodes) {
                        if new.duration < r.duration - 1e-9 {
                            *r = new;
                        }
                    }
                }
            }
        }
    }

    /// Full solution with charging plans.
    pub fn to_solution(&self, inst: &Instance) -> Solution {
        let routes = self
            .routes
            .iter()
            .map(|r| simulate_route(inst, &r.nodes).expect("cached routes are feasible"))
            .collect();
        Solution::new(inst, routes)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub current: f64,
    pub incumbent: f64,
    pub tenure: usize,
}

#[derive(Debug, Clone)]
pub struct TabuOutcome {
    pub solution: Solution,
    pub initial_cost: f64,
    pub iterations: usize,
    pub shakes: usize,
    pub trace: Vec<TraceRecord>,
}

/// Runs the search from the greedy initial solution.
pub fn tabu_search(inst: &Instance, params: &TabuParams) -> Result<TabuOutcome, TabuError> {
    let mut s = initial_solution(inst)?;
    let initial_cost = s.cost();
    let mut best = s.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let empty = TabuRoute::new(inst, u64::MAX, vec![0, 0]).expect("empty route");

    let n = inst.n_customers();
    let mut tenure_f = params.initial_tenure(n);
    let mut tenure = tenure_f.floor() as usize;
    // (customer, route id) → first iteration at which the attribute expires
    let mut tabu: HashMap<(usize, u64), usize> = HashMap::new();
    let (mut non_imp, mut shake_count, mut shakes) = (0usize, 0usize, 0usize);
    let mut trace = Vec::new();

    let mut iter = 0;
    while iter <= params.max_iter {
        let cost = s.cost();
        let best_cost = best.cost();
        let allow_new = s.routes.len() < inst.fleet;
        let mut chosen: Option<Move> = None;
        for_each_move(inst, &s.routes, &empty, allow_new, |m| {
            let is_tabu = m.arrivals.iter().any(|&(c, r)| {
                s.routes.get(r).is_some_and(|route| tabu.get(&(c, route.id)).is_some_and(|&until| until > iter))
            });
            if is_tabu && cost - m.saving >= best_cost - 1e-9 {
                return;
            }
            if chosen.as_ref().map_or(true, |b| m.saving > b.saving + 1e-12) {
                chosen = Some(m);
            }
        });
        if let Some(m) = chosen {
            apply_with_tabu(inst, &mut s, &m, &mut tabu, iter + tenure);
        }
        if params.opt_iter > 0 && iter % params.opt_iter == 0 {
            s.optimize_charging(inst);
        }
        if non_imp >= params.shake_tenure {
            if let Some(m) = moves::random_move(inst, &s.routes, &empty, s.routes.len() < inst.fleet, &mut rng, 100) {
                apply_with_tabu(inst, &mut s, &m, &mut tabu, iter + tenure);
                shakes += 1;
            }
            if shake_count >= params.shake_iter {
                tenure_f *= params.beta;
                tenure = (tenure_f.floor() as usize).max(1);
                shake_count = 0;
            }
            shake_count += 1;
        }
        if s.cost() < best.cost() - 1e-9 {
            best = s.clone();
            non_imp = 0;
        } else {
            non_imp += 1;
        }
        if params.trace {
            trace.push(TraceRecord { iteration: iter, current: s.cost(), incumbent: best.cost(), tenure });
        }
        iter += 1;
    }
    best.optimize_charging(inst);
    Ok(TabuOutcome { solution: best.to_solution(inst), initial_cost, iterations: iter, shakes, trace })
}

fn apply_with_tabu(inst: &Instance, s: &mut TabuSolution, m: &Move, tabu: &mut HashMap<(usize, u64), usize>, until: usize) {
    // customers leaving a route may not return to it while tabu
    let mut leaving = Vec::new();
    for &(c, dest) in &m.arrivals {
        let src = if dest == m.r1 { m.r2 } else { m.r1 };
        if let Some(r) = s.routes.get(src) {
            leaving.push((c, r.id));
        }
    }
    if s.apply(inst, m) {
        for key in leaving {
            tabu.insert(key, until);
        }
    }
}

/// Best of several independent runs with consecutive seeds.
pub fn best_of_seeds(inst: &Instance, params: &TabuParams, seeds: usize) -> Result<TabuOutcome, TabuError> {
    let mut best: Option<TabuOutcome> = None;
    for k in 0..seeds.max(1) {
        let p = TabuParams { seed: params.seed + k as u64, ..params.clone() };
        let out = tabu_search(inst, &p)?;
        if best.as_ref().map_or(true, |b| out.solution.cost < b.solution.cost - 1e-9) {
            best = Some(out);
        }
    }
    Ok(best.expect("at least one run"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::ex1;

    #[test]
    fn parameter_classes() {
        let p = TabuParams::for_size(10);
        assert_eq!((p.max_iter, p.alpha, p.shake_tenure), (1000, 2.0, 80));
        assert_eq!(p.initial_tenure(10), 5.0);
        let p = TabuParams::for_size(40);
        assert_eq!((p.max_iter, p.alpha, p.shake_iter, p.shake_tenure, p.opt_iter), (2000, 3.0, 20, 160, 5));
        assert_eq!(TabuParams::for_size(320).max_iter, 4000);
        assert!(p.beta < 1.0);
    }

    #[test]
    fn zero_customers() {
        let inst = ex1(0, 1);
        let out = tabu_search(&inst, &TabuParams::for_size(0)).unwrap();
        assert!(out.solution.routes.is_empty());
        assert_eq!(out.solution.cost, 0.0);
    }

    #[test]
    fn uniform_network_merges_into_one_route() {
        // every route costs 2 h per leg plus service, so one route with
        // three customers (8 h + 1.5 h) beats anything else
        let inst = ex1(3, 0);
        let out = tabu_search(&inst, &TabuParams { max_iter: 50, ..TabuParams::for_size(3) }).unwrap();
        let cost = out.solution.validate(&inst).unwrap();
        assert!(cost <= 9.5 + 1e-6, "{cost}");
    }
}

//! Inter-route moves and their exact evaluation.

use rand::Rng;
use serde::Serialize;

use super::route::{splice_duration, TabuRoute};
use crate::model::Instance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MoveKind {
    /// Move the customer at `p` in `r1` before position `q` of `r2`.
    Relocate,
    /// Swap the tails after `p` in `r1` and after `q` in `r2`.
    Cross,
    /// Swap the customers at `p` in `r1` and `q` in `r2`.
    Exchange,
}

/// A move between two routes with its evaluated result. `r2` may equal the
/// number of routes, meaning a new empty route. When a plain splice is
/// infeasible the result may carry one added station at that junction.
#[derive(Debug, Clone)]
pub struct Move {
    pub kind: MoveKind,
    pub r1: usize,
    pub r2: usize,
    pub p: usize,
    pub q: usize,
    /// Resulting sequences of `r1` and `r2`.
    pub nodes: [Vec<usize>; 2],
    pub durations: [f64; 2],
    /// Old minus new duration of the two routes.
    pub saving: f64,
    /// `(customer, destination route index)` for every customer that changes route.
    pub arrivals: Vec<(usize, usize)>,
}

fn load(inst: &Instance, nodes: &[usize]) -> f64 {
    nodes.iter().filter(|&&i| inst.is_customer(i)).map(|&i| inst.demand(i)).sum()
}

/// Cheapest feasible way to put `middle` between `head[..=p]` and
/// `tail[q..]`: as is, or, when that is infeasible, with one station before
/// or after it. Returns the inserted nodes and the duration.
fn best_splice(inst: &Instance, head: &TabuRoute, p: usize, middle: &[usize], tail: &TabuRoute, q: usize) -> Option<(Vec<usize>, f64)> {
    if let Some(d) = splice_duration(inst, head, p, middle, tail, q) {
        return Some((middle.to_vec(), d));
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    for s in inst.station_ids() {
        let mut variants = vec![[&[s][..], middle].concat()];
        if !middle.is_empty() {
            variants.push([middle, &[s][..]].concat());
        }
        for v in variants {
            if let Some(d) = splice_duration(inst, head, p, &v, tail, q) {
                if best.as_ref().map_or(true, |b| d < b.1 - 1e-12) {
                    best = Some((v, d));
                }
            }
        }
    }
    best
}

fn route_at<'a>(routes: &'a [TabuRoute], empty: &'a TabuRoute, r: usize) -> &'a TabuRoute {
    routes.get(r).unwrap_or(empty)
}

pub fn relocate(inst: &Instance, routes: &[TabuRoute], empty: &TabuRoute, r1: usize, p: usize, r2: usize, q: usize) -> Option<Move> {
    let (a, b) = (&routes[r1], route_at(routes, empty, r2));
    let c = a.nodes[p];
    if b.load + inst.demand(c) > inst.capacity + 1e-9 {
        return None;
    }
    let d1 = splice_duration(inst, a, p - 1, &[], a, p + 1)?;
    let (mid, d2) = best_splice(inst, b, q - 1, &[c], b, q)?;
    let mut n1 = a.nodes.clone();
    n1.remove(p);
    let n2: Vec<usize> = b.nodes[..q].iter().chain(&mid).chain(&b.nodes[q..]).copied().collect();
    Some(Move {
        kind: MoveKind::Relocate,
        r1,
        r2,
        p,
        q,
        saving: a.duration + b.duration - d1 - d2,
        nodes: [n1, n2],
        durations: [d1, d2],
        arrivals: vec![(c, r2)],
    })
}

pub fn exchange(inst: &Instance, routes: &[TabuRoute], r1: usize, p: usize, r2: usize, q: usize) -> Option<Move> {
    let (a, b) = (&routes[r1], &routes[r2]);
    let (c1, c2) = (a.nodes[p], b.nodes[q]);
    let (l1, l2) = (a.load - inst.demand(c1) + inst.demand(c2), b.load - inst.demand(c2) + inst.demand(c1));
    if l1 > inst.capacity + 1e-9 || l2 > inst.capacity + 1e-9 {
        return None;
    }
    let (m1, d1) = best_splice(inst, a, p - 1, &[c2], a, p + 1)?;
    let (m2, d2) = best_splice(inst, b, q - 1, &[c1], b, q + 1)?;
    let n1: Vec<usize> = a.nodes[..p].iter().chain(&m1).chain(&a.nodes[p + 1..]).copied().collect();
    let n2: Vec<usize> = b.nodes[..q].iter().chain(&m2).chain(&b.nodes[q + 1..]).copied().collect();
    Some(Move {
        kind: MoveKind::Exchange,
        r1,
        r2,
        p,
        q,
        saving: a.duration + b.duration - d1 - d2,
        nodes: [n1, n2],
        durations: [d1, d2],
        arrivals: vec![(c2, r1), (c1, r2)],
    })
}

pub fn cross(inst: &Instance, routes: &[TabuRoute], r1: usize, p: usize, r2: usize, q: usize) -> Option<Move> {
    let (a, b) = (&routes[r1], &routes[r2]);
    let (la, lb) = (a.nodes.len(), b.nodes.len());
    if (p == 0 && q == 0) || (p + 2 == la && q + 2 == lb) {
        return None;
    }
    let l1 = load(inst, &a.nodes[..=p]) + load(inst, &b.nodes[q + 1..]);
    let l2 = load(inst, &b.nodes[..=q]) + load(inst, &a.nodes[p + 1..]);
    if l1 > inst.capacity + 1e-9 || l2 > inst.capacity + 1e-9 {
        return None;
    }
    let (m1, d1) = best_splice(inst, a, p, &[], b, q + 1)?;
    let (m2, d2) = best_splice(inst, b, q, &[], a, p + 1)?;
    let n1: Vec<usize> = a.nodes[..=p].iter().chain(&m1).chain(&b.nodes[q + 1..]).copied().collect();
    let n2: Vec<usize> = b.nodes[..=q].iter().chain(&m2).chain(&a.nodes[p + 1..]).copied().collect();
    let arrivals = b.nodes[q + 1..]
        .iter()
        .filter(|&&i| inst.is_customer(i))
        .map(|&i| (i, r1))
        .chain(a.nodes[p + 1..].iter().filter(|&&i| inst.is_customer(i)).map(|&i| (i, r2)))
        .collect();
    Some(Move {
        kind: MoveKind::Cross,
        r1,
        r2,
        p,
        q,
        saving: a.duration + b.duration - d1 - d2,
        nodes: [n1, n2],
        durations: [d1, d2],
        arrivals,
    })
}

/// Every feasible inter-route move. `allow_new_route` adds relocations into
/// a fresh route.
pub fn for_each_move(inst: &Instance, routes: &[TabuRoute], empty: &TabuRoute, allow_new_route: bool, mut visit: impl FnMut(Move)) {
    let n = routes.len();
    for r1 in 0..n {
        let customers: Vec<usize> = routes[r1].customer_positions(inst).collect();
        for r2 in 0..n + usize::from(allow_new_route) {
            if r1 == r2 {
                continue;
            }
            let len2 = route_at(routes, empty, r2).nodes.len();
            for &p in &customers {
                for q in 1..len2 {
                    if let Some(m) = relocate(inst, routes, empty, r1, p, r2, q) {
                        visit(m);
                    }
                }
            }
            if r2 >= n {
                continue;
            }
            if r1 < r2 {
                for &p in &customers {
                    for q in routes[r2].customer_positions(inst) {
                        if let Some(m) = exchange(inst, routes, r1, p, r2, q) {
                            visit(m);
                        }
                    }
                }
                for p in 0..routes[r1].nodes.len() - 1 {
                    for q in 0..len2 - 1 {
                        if let Some(m) = cross(inst, routes, r1, p, r2, q) {
                            visit(m);
                        }
                    }
                }
            }
        }
    }
}

/// A random feasible move between two different routes, trying at most
/// `attempts` draws.
pub fn random_move<R: Rng + ?Sized>(
    inst: &Instance,
    routes: &[TabuRoute],
    empty: &TabuRoute,
    allow_new_route: bool,
    rng: &mut R,
    attempts: usize,
) -> Option<Move> {
    let n = routes.len();
    let targets = n + usize::from(allow_new_route);
    if n == 0 || targets < 2 {
        return None;
    }
    for _ in 0..attempts {
        let kind = rng.gen_range(0..3);
        let r1 = rng.gen_range(0..n);
        let r2 = rng.gen_range(0..targets);
        if r1 == r2 || (kind > 0 && r2 >= n) {
            continue;
        }
        let pos1: Vec<usize> = routes[r1].customer_positions(inst).collect();
        let m = match kind {
            0 => {
                let Some(&p) = pos1.get(rng.gen_range(0..pos1.len().max(1))) else { continue };
                let q = rng.gen_range(1..route_at(routes, empty, r2).nodes.len());
                relocate(inst, routes, empty, r1, p, r2, q)
            }
            1 => {
                let p = rng.gen_range(0..routes[r1].nodes.len() - 1);
                let q = rng.gen_range(0..routes[r2].nodes.len() - 1);
                cross(inst, routes, r1, p, r2, q)
            }
            _ => {
                let pos2: Vec<usize> = routes[r2].customer_positions(inst).collect();
                if pos1.is_empty() || pos2.is_empty() {
                    continue;
                }
                let p = pos1[rng.gen_range(0..pos1.len())];
                let q = pos2[rng.gen_range(0..pos2.len())];
                exchange(inst, routes, r1, p, r2, q)
            }
        };
        if m.is_some() {
            return m;
        }
    }
    None
}

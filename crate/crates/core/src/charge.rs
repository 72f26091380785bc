//! Battery recursions along partial paths.
//!
//! A [`ForwardState`] describes a path from the depot to some node: its
//! earliest departure time `a` and the maximum battery level `f(t)` when
//! leaving at time `t`. A [`BackwardState`] describes a path from some node
//! back to the depot: its latest departure time `d` and the minimum battery
//! level `g(t)` needed when leaving at time `t`.

use serde::Serialize;
use thiserror::Error;

use crate::model::{ChargeStop, Instance, NodeKind, Route, ENERGY_TOL, TIME_TOL};
use crate::pwl::Pwl;
use crate::PwlFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum Infeasible {
    #[error("not enough battery to traverse the arc")]
    Battery,
    #[error("time window cannot be met")]
    Time,
    #[error("vehicle capacity exceeded")]
    Capacity,
    #[error("route shape is invalid")]
    Shape,
}

/// Earliest departure and maximum battery function at the end of a path
/// from the depot. `f` is defined on `[a, latest departure]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForwardState {
    pub node: usize,
    pub a: f64,
    pub f: PwlFunction,
}

/// Latest departure and minimum battery function at the start of a path to
/// the depot. `g` is defined on `[0, d]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BackwardState {
    pub node: usize,
    pub d: f64,
    pub g: PwlFunction,
}

impl ForwardState {
    pub fn depot(inst: &Instance) -> Self {
        Self { node: 0, a: 0.0, f: Pwl::constant(0.0, inst.horizon, inst.battery) }
    }

    /// Earliest departure time with at least `y` Wh on board.
    pub fn tau(&self, y: f64) -> Result<f64, Infeasible> {
        let t = self.f.inverse_eval_tol(y, ENERGY_TOL).map_err(|_| Infeasible::Battery)?;
        Ok(t.max(self.a))
    }

    pub fn max_battery(&self) -> f64 {
        self.f.last_value()
    }
}

impl BackwardState {
    pub fn depot(inst: &Instance) -> Self {
        Self { node: 0, d: inst.horizon, g: Pwl::constant(0.0, inst.horizon, 0.0) }
    }

    /// Latest departure time needing at most `x` Wh on board.
    pub fn rho(&self, x: f64) -> Result<f64, Infeasible> {
        let t = self.g.inverse_eval_max_tol(x, ENERGY_TOL).map_err(|_| Infeasible::Battery)?;
        Ok(t.min(self.d))
    }

    pub fn min_battery(&self) -> f64 {
        self.g.first_value()
    }
}

fn pwl_ok(f: Result<PwlFunction, crate::pwl::PwlError>) -> PwlFunction {
    f.expect("recursion keeps compositions inside their domains")
}

/// Time lower bound for departures from `node` used by backward states.
fn earliest_leave(inst: &Instance, node: usize) -> f64 {
    match inst.kind(node) {
        NodeKind::Depot => 0.0,
        _ => inst.earliest_departure(node),
    }
}

/// Extends a forward state along the arc `(prev.node, j)`.
pub fn forward_extend(inst: &Instance, prev: &ForwardState, j: usize) -> Result<ForwardState, Infeasible> {
    let i = prev.node;
    let b = inst.energy(i, j);
    let tt = inst.travel(i, j);
    let dep = prev.tau(b)?;
    let arrive = dep + tt;
    let (e, l) = inst.window(j);
    let s = inst.service(j);
    let hi_prev = prev.f.hi();
    match inst.kind(j) {
        NodeKind::Customer | NodeKind::Depot => {
            if arrive > l + TIME_TOL {
                return Err(Infeasible::Time);
            }
            let a = arrive.max(e) + s;
            let hi = (l + s).max(a);
            let src_hi = hi - s - tt;
            let f = prev
                .f
                .extend_domain(prev.f.lo(), src_hi.max(hi_prev))
                .shift(tt + s, -b)
                .restrict_clamped(a, hi)
                .clamp_min(0.0);
            Ok(ForwardState { node: j, a, f })
        }
        NodeKind::Station => {
            if arrive > l + TIME_TOL {
                return Err(Infeasible::Time);
            }
            let a = arrive;
            let hi = l.max(a);
            let st = inst.station(j);
            let x_hi = hi_prev.min(hi - tt).max(dep);
            let inner = prev.f.restrict_clamped(dep, x_hi).shift(0.0, -b).clamp_min(0.0).clamp_max(inst.battery);
            let h = pwl_ok(Pwl::compose(&st.inverse, &inner)).add_affine(-1.0, 0.0);
            let best = h.prefix_max().extend_domain(dep, hi - tt);
            let arg = best.shift(tt, -tt).add_affine(1.0, 0.0).clamp_min(0.0).restrict_clamped(a, hi);
            let curve = st.curve.extend_domain(0.0, arg.max_value().max(st.curve.hi()));
            let f = pwl_ok(Pwl::compose(&curve, &arg)).clamp_max(inst.battery);
            debug_assert!(f.is_nondecreasing(1e-6));
            Ok(ForwardState { node: j, a, f })
        }
    }
}

/// Extends a backward state at `next.node` to its predecessor `j`.
pub fn backward_extend(inst: &Instance, next: &BackwardState, j: usize) -> Result<BackwardState, Infeasible> {
    let i = next.node;
    let b = inst.energy(j, i);
    let tt = inst.travel(j, i);
    if b > inst.battery + ENERGY_TOL {
        return Err(Infeasible::Battery);
    }
    let latest_j = match inst.kind(j) {
        NodeKind::Depot => inst.horizon,
        _ => inst.latest_departure(j),
    };
    match inst.kind(i) {
        NodeKind::Customer | NodeKind::Depot => {
            let (e_i, _) = inst.window(i);
            let s_i = inst.service(i);
            let rho = next.rho(inst.battery - b)?;
            let d = latest_j.min(rho - tt - s_i);
            if d < earliest_leave(inst, j) - TIME_TOL || d < -TIME_TOL {
                return Err(Infeasible::Time);
            }
            let d = d.max(0.0);
            let (lo_y, hi_y) = (tt + s_i, d + tt + s_i);
            let floor = e_i + s_i;
            let phi = if floor >= hi_y {
                Pwl::constant(lo_y, hi_y, next.g.eval_clamped(floor))
            } else {
                next.g.restrict_clamped(floor.max(lo_y), hi_y).extend_domain(lo_y, hi_y)
            };
            let g = phi.shift(-(tt + s_i), b).restrict_clamped(0.0, d);
            Ok(BackwardState { node: j, d, g })
        }
        NodeKind::Station => {
            // charging at i may lift the level up to B, so the successor's
            // need is only bounded by B; the arrival need is capped below
            let rho = next.rho(inst.battery)?;
            let d = latest_j.min(rho - tt);
            if d < earliest_leave(inst, j) - TIME_TOL || d < -TIME_TOL {
                return Err(Infeasible::Time);
            }
            let d = d.max(0.0);
            let st = inst.station(i);
            let need = next.g.restrict_clamped(0.0, rho).clamp_min(0.0).clamp_max(inst.battery);
            let k = pwl_ok(Pwl::compose(&st.inverse, &need)).add_affine(-1.0, 0.0);
            let best = k.suffix_min();
            let arg = best.restrict_clamped(tt, d + tt).shift(-tt, 0.0).add_affine(1.0, tt).clamp_min(0.0);
            let curve = st.curve.extend_domain(0.0, arg.max_value().max(st.curve.hi()));
            let g = pwl_ok(Pwl::compose(&curve, &arg)).shift(0.0, b).restrict_clamped(0.0, d);
            debug_assert!(g.is_nondecreasing(1e-6));
            let cut = g.inverse_eval_max_tol(inst.battery, ENERGY_TOL).map_err(|_| Infeasible::Battery)?;
            if cut < d {
                if cut < earliest_leave(inst, j) - TIME_TOL {
                    return Err(Infeasible::Battery);
                }
                let d = cut.max(0.0);
                return Ok(BackwardState { node: j, d, g: g.restrict_clamped(0.0, d).clamp_max(inst.battery) });
            }
            Ok(BackwardState { node: j, d, g: g.clamp_max(inst.battery) })
        }
    }
}

/// Slack added to battery levels when looking up latest departures, so that
/// levels equal up to rounding are treated as equal.
const MERGE_EPS: f64 = 1e-6;

/// `max { t2 − t1 : a ≤ t1 ≤ t2 ≤ d, f(t1) ≥ g(t2) }` for a forward and a
/// backward state at the same node, or `None` when they cannot be joined.
///
/// The merged path then takes `horizon − slack` hours when the instance is
/// shift-invariant.
pub fn merge_slack(fwd: &ForwardState, bwd: &BackwardState) -> Option<f64> {
    debug_assert_eq!(fwd.node, bwd.node);
    if fwd.a > bwd.d + TIME_TOL {
        return None;
    }
    let hi1 = fwd.f.hi().min(bwd.d);
    let lo1 = fwd.a;
    if fwd.f.last_value() < bwd.g.first_value() - ENERGY_TOL {
        return None;
    }
    let mut cands: Vec<f64> = Vec::with_capacity(fwd.f.len() + bwd.g.len() + 2);
    cands.push(lo1);
    cands.push(hi1.max(lo1));
    cands.extend(fwd.f.points().iter().map(|p| p.t).filter(|&t| t > lo1 && t < hi1));
    for p in bwd.g.points() {
        if let Ok(t) = fwd.f.inverse_eval(p.v) {
            if t > lo1 && t < hi1 {
                cands.push(t);
            }
        }
    }
    let mut best: Option<f64> = None;
    for t1 in cands {
        let y = fwd.f.eval_clamped(t1);
        if y < bwd.g.first_value() - ENERGY_TOL {
            continue;
        }
        let t2 = match bwd.g.inverse_eval_max_tol(y + MERGE_EPS, ENERGY_TOL) {
            Ok(t) => t.min(bwd.d),
            Err(_) => continue,
        };
        if t2 < t1 - TIME_TOL {
            continue;
        }
        let slack = (t2 - t1).max(0.0);
        if best.map_or(true, |b| slack > b) {
            best = Some(slack);
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("{kind} at position {position}")]
pub struct SimError {
    pub position: usize,
    pub kind: Infeasible,
}

fn check_shape(inst: &Instance, nodes: &[usize]) -> Result<(), SimError> {
    let bad = |position| SimError { position, kind: Infeasible::Shape };
    if nodes.len() < 2 || nodes[0] != 0 || nodes[nodes.len() - 1] != 0 {
        return Err(bad(0));
    }
    let mut seen = vec![false; inst.n_nodes()];
    for (p, w) in nodes.windows(2).enumerate() {
        if w[1] >= inst.n_nodes() || (w[0] == w[1] && !inst.is_station(w[1]) && nodes.len() > 2) {
            return Err(bad(p + 1));
        }
        if inst.is_customer(w[1]) && std::mem::replace(&mut seen[w[1]], true) {
            return Err(bad(p + 1));
        }
        if p + 1 < nodes.len() - 1 && w[1] == 0 {
            return Err(bad(p + 1));
        }
    }
    let load: f64 = nodes.iter().filter(|&&i| inst.is_customer(i)).map(|&i| inst.demand(i)).sum();
    if load > inst.capacity + 1e-9 {
        return Err(SimError { position: nodes.len() - 1, kind: Infeasible::Capacity });
    }
    Ok(())
}

/// Forward states at every position of a depot-to-depot sequence.
pub fn forward_chain(inst: &Instance, nodes: &[usize]) -> Result<Vec<ForwardState>, SimError> {
    let mut states = Vec::with_capacity(nodes.len());
    states.push(ForwardState::depot(inst));
    for (p, &j) in nodes.iter().enumerate().skip(1) {
        let next = forward_extend(inst, &states[p - 1], j).map_err(|kind| SimError { position: p, kind })?;
        states.push(next);
    }
    Ok(states)
}

/// Backward states at every position of a depot-to-depot sequence.
pub fn backward_chain(inst: &Instance, nodes: &[usize]) -> Result<Vec<BackwardState>, SimError> {
    let n = nodes.len();
    let mut states = vec![BackwardState::depot(inst); n];
    for p in (0..n - 1).rev() {
        let j = nodes[p];
        states[p] = backward_extend(inst, &states[p + 1], j).map_err(|kind| SimError { position: p, kind })?;
    }
    Ok(states)
}

/// Departure that maximizes `rinv(f(x) − b) − x` over `[lo, hi]`, the
/// earliest one on ties.
fn best_departure(inst: &Instance, prev: &ForwardState, station: usize, lo: f64, hi: f64) -> f64 {
    let b = inst.energy(prev.node, station);
    let st = inst.station(station);
    let inner = prev.f.restrict_clamped(lo, hi.max(lo)).shift(0.0, -b).clamp_min(0.0).clamp_max(inst.battery);
    let h = pwl_ok(Pwl::compose(&st.inverse, &inner)).add_affine(-1.0, 0.0);
    let top = h.max_value();
    h.points().iter().find(|p| p.v >= top - 1e-12).map(|p| p.t).unwrap_or(lo)
}

/// Minimum-duration schedule of a fixed node sequence departing the depot
/// at time 0, with the charging plan that realizes it.
pub fn simulate_route(inst: &Instance, nodes: &[usize]) -> Result<Route, SimError> {
    check_shape(inst, nodes)?;
    if nodes.len() == 2 {
        return Ok(Route::empty());
    }
    let states = forward_chain(inst, nodes)?;
    let last = nodes.len() - 1;

    // needed departure level per position, walking back from the depot
    let mut target = vec![0.0; nodes.len()];
    let mut t_k = states[last].a;
    let mut y: f64 = 0.0;
    for k in (1..=last).rev() {
        let j = nodes[k];
        let prev = &states[k - 1];
        let b = inst.energy(prev.node, j);
        let tt = inst.travel(prev.node, j);
        target[k] = y;
        if inst.is_station(j) {
            let dep = prev.tau(b).map_err(|kind| SimError { position: k, kind })?;
            let upper = (t_k - tt).min(prev.f.hi()).max(dep);
            let x = best_departure(inst, prev, j, dep, upper);
            let st = inst.station(j);
            let dwell = (t_k - tt - x).max(0.0);
            let arrive_need = st.curve.eval_clamped((st.inverse.eval_clamped(y.min(inst.battery)) - dwell).max(0.0));
            y = arrive_need + b;
            t_k = x;
        } else {
            y += b;
            t_k = (t_k - inst.service(j) - tt).min(prev.f.hi()).max(prev.a);
        }
    }

    // as-soon-as-possible replay charging up to the needed levels
    let mut charges = Vec::new();
    let mut time = 0.0;
    let mut soc = inst.battery;
    for k in 1..=last {
        let (i, j) = (nodes[k - 1], nodes[k]);
        time += inst.travel(i, j);
        soc -= inst.energy(i, j);
        match inst.kind(j) {
            NodeKind::Customer => time = time.max(inst.window(j).0) + inst.service(j),
            NodeKind::Station => {
                let want = target[k].min(inst.battery);
                if want > soc + 1e-9 {
                    let st = inst.station(j);
                    charges.push(ChargeStop { position: k, start: time, amount: want - soc });
                    time += st.charge_time(soc.max(0.0), want);
                    soc = want;
                }
            }
            NodeKind::Depot => {}
        }
    }
    let mut route = Route { nodes: nodes.to_vec(), charges, duration: states[last].a };
    match crate::model::route_cost(inst, &route) {
        Ok(d) => {
            if (d - states[last].a).abs() > 1e-6 {
                log::debug!("replayed duration {d} differs from recursion {}", states[last].a);
            }
            route.duration = d;
            Ok(route)
        }
        Err(e) => {
            log::debug!("charging plan replay failed: {e}");
            Err(SimError { position: last, kind: Infeasible::Battery })
        }
    }
}

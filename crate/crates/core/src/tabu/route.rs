//! Routes with cached forward and backward states for fast splicing.

use crate::charge::{backward_chain, forward_chain, forward_extend, merge_slack, BackwardState, ForwardState};
use crate::model::Instance;

#[derive(Debug, Clone)]
pub struct TabuRoute {
    /// Stable identity used by tabu attributes.
    pub id: u64,
    pub nodes: Vec<usize>,
    pub fwd: Vec<ForwardState>,
    pub bwd: Vec<BackwardState>,
    pub duration: f64,
    pub load: f64,
}

impl TabuRoute {
    /// Builds the caches, or `None` when the sequence is infeasible. A
    /// sequence without customers costs nothing; it only serves as a
    /// template to insert into.
    pub fn new(inst: &Instance, id: u64, nodes: Vec<usize>) -> Option<Self> {
        let (fwd, bwd) = if nodes.len() == 2 {
            (vec![ForwardState::depot(inst); 2], vec![BackwardState::depot(inst); 2])
        } else {
            (forward_chain(inst, &nodes).ok()?, backward_chain(inst, &nodes).ok()?)
        };
        let load = nodes.iter().filter(|&&i| inst.is_customer(i)).map(|&i| inst.demand(i)).sum();
        let duration = if has_customer(inst, &nodes) { fwd.last()?.a } else { 0.0 };
        Some(Self { id, nodes, fwd, bwd, duration, load })
    }

    pub fn is_empty(&self, inst: &Instance) -> bool {
        !has_customer(inst, &self.nodes)
    }

    pub fn customers<'a>(&'a self, inst: &'a Instance) -> impl Iterator<Item = usize> + 'a {
        self.nodes.iter().copied().filter(move |&i| inst.is_customer(i))
    }

    /// Positions of customers in the node sequence.
    pub fn customer_positions<'a>(&'a self, inst: &'a Instance) -> impl Iterator<Item = usize> + 'a {
        (0..self.nodes.len()).filter(move |&p| inst.is_customer(self.nodes[p]))
    }
}

pub fn has_customer(inst: &Instance, nodes: &[usize]) -> bool {
    nodes.iter().any(|&i| inst.is_customer(i))
}

/// Duration of `head.nodes[..=p] ++ middle ++ tail.nodes[q..]`, or `None`
/// when that sequence is infeasible. Capacity is the caller's concern.
///
/// Uses the cached prefix state of `head` and, on shift-invariant
/// instances, the cached suffix state of `tail`, so the cost does not grow
/// with route length.
pub fn splice_duration(inst: &Instance, head: &TabuRoute, p: usize, middle: &[usize], tail: &TabuRoute, q: usize) -> Option<f64> {
    let customers = head.nodes[1..=p].iter().chain(middle).chain(&tail.nodes[q..]).any(|&i| inst.is_customer(i));
    if !customers {
        return Some(0.0);
    }
    let mut state = std::borrow::Cow::Borrowed(&head.fwd[p]);
    let mut last = head.nodes[p];
    for &m in middle {
        if m == last && !inst.is_station(m) {
            return None;
        }
        state = std::borrow::Cow::Owned(forward_extend(inst, &state, m).ok()?);
        last = m;
    }
    let first = tail.nodes[q];
    if first == last && first == 0 {
        return None;
    }
    let state = forward_extend(inst, &state, first).ok()?;
    if q + 1 == tail.nodes.len() {
        return Some(state.a);
    }
    if inst.shift_invariant() {
        return merge_slack(&state, &tail.bwd[q]).map(|slack| inst.horizon - slack);
    }
    let mut state = state;
    for &j in &tail.nodes[q + 1..] {
        state = forward_extend(inst, &state, j).ok()?;
    }
    Some(state.a)
}

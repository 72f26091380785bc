//! Set dominance through a dominance graph.
//!
//! Graph nodes group labels with identical scalar attributes. An arc `u → v`
//! exists whenever `u`'s attributes dominate `v`'s; the arc set is kept
//! transitively closed. Each node carries the upper envelope `F` of its own
//! labels and of every ancestor's labels, and a new label is rejected when
//! some node with dominating attributes has `F` above the label's function.
//!
//! Labels are compared on a "potential": the forward battery function for
//! forward labels, `t ↦ −g(−t)` for backward ones, so that larger is better
//! and the domain starts at the label's time attribute in both directions.

use fixedbitset::FixedBitSet;

use crate::PwlFunction;
#[cfg(test)]
use crate::pwl::Pwl;

/// Scalar attributes of a label: collected duals, load, time, visit memory,
/// and subset-row parities.
#[derive(Debug, Clone, PartialEq)]
pub struct Attrs {
    pub r: f64,
    pub h: f64,
    pub time: f64,
    pub mem: FixedBitSet,
    pub sr: FixedBitSet,
}

impl Attrs {
    /// `self` at least as good as `other` in every scalar resource. A label
    /// holding an odd count for a cut that `other` has even may still pay
    /// that cut's dual, so its `r` is discounted by those duals.
    pub fn dominates(&self, other: &Self, sigma: &[f64], eps: f64) -> bool {
        if self.h > other.h + eps || self.time > other.time + eps || !self.mem.is_subset(&other.mem) {
            return false;
        }
        let mut r = self.r;
        for c in self.sr.difference(&other.sr) {
            r += sigma[c];
        }
        r >= other.r - eps
    }

    fn identical(&self, other: &Self) -> bool {
        self == other
    }
}

#[derive(Debug, Clone)]
struct GraphNode {
    attrs: Attrs,
    labels: Vec<(usize, PwlFunction)>,
    env: PwlFunction,
    succ: Vec<usize>,
    pred: Vec<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct AddOutcome {
    pub kept: bool,
    /// Previously stored labels removed because they no longer contribute.
    pub purged: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct DominanceGraph {
    nodes: Vec<Option<GraphNode>>,
    free: Vec<usize>,
    hi: f64,
    eps: f64,
}

fn envelope(a: Option<PwlFunction>, b: &PwlFunction, lo: f64) -> PwlFunction {
    let b = b.restrict_clamped(lo.max(b.lo()), b.hi());
    match a {
        None => b,
        Some(a) => a.max_with(&b).unwrap_or(b),
    }
}

impl DominanceGraph {
    /// Graph for potentials whose domains all end at `hi`.
    pub fn new(hi: f64, eps: f64) -> Self {
        Self { nodes: Vec::new(), free: Vec::new(), hi, eps }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_some()).count()
    }

    pub fn n_labels(&self) -> usize {
        self.nodes.iter().flatten().map(|n| n.labels.len()).sum()
    }

    pub fn label_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().flatten().flat_map(|n| n.labels.iter().map(|l| l.0))
    }

    fn node(&self, k: usize) -> &GraphNode {
        self.nodes[k].as_ref().expect("live graph node")
    }

    fn live(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().enumerate().filter(|(_, n)| n.is_some()).map(|(k, _)| k)
    }

    fn covers(&self, k: usize, attrs: &Attrs, pot: &PwlFunction, sigma: &[f64]) -> bool {
        let n = self.node(k);
        if !n.attrs.dominates(attrs, sigma, self.eps) {
            return false;
        }
        let lo = attrs.time.max(n.env.lo()).max(pot.lo());
        n.env.dominates_on(pot, lo, self.hi.min(pot.hi()), self.eps)
    }

    /// `true` if the label would be rejected, without changing the graph.
    pub fn is_dominated(&self, attrs: &Attrs, pot: &PwlFunction, sigma: &[f64]) -> bool {
        // leaves first: they hold the largest envelopes
        let leaves: Vec<usize> = self.live().filter(|&k| self.node(k).succ.is_empty()).collect();
        if leaves.iter().any(|&k| self.covers(k, attrs, pot, sigma)) {
            return true;
        }
        // depth-first over nodes with dominating attributes, testing those
        // none of whose successors also dominate
        let mut seen = vec![false; self.nodes.len()];
        let mut stack: Vec<usize> = self
            .live()
            .filter(|&k| self.node(k).pred.is_empty() && self.node(k).attrs.dominates(attrs, sigma, self.eps))
            .collect();
        let mut frontier = Vec::new();
        while let Some(k) = stack.pop() {
            if std::mem::replace(&mut seen[k], true) {
                continue;
            }
            let mut deeper = false;
            for &s in &self.node(k).succ {
                if self.node(s).attrs.dominates(attrs, sigma, self.eps) {
                    deeper = true;
                    stack.push(s);
                }
            }
            if !deeper {
                if !self.node(k).succ.is_empty() && self.covers(k, attrs, pot, sigma) {
                    return true;
                }
                frontier.push(k);
            }
        }
        // every label above the frontier dominates the new one in attributes,
        // so their joint envelope is a valid dominating set
        if frontier.len() < 2 {
            return false;
        }
        let lo = attrs.time;
        let mut env: Option<PwlFunction> = None;
        for k in frontier {
            env = Some(envelope(env, &self.node(k).env, lo));
        }
        let env = env.expect("frontier is not empty");
        env.dominates_on(pot, lo.max(env.lo()).max(pot.lo()), self.hi.min(pot.hi()), self.eps)
    }

    /// `true` if the label alone dominates some stored label.
    pub fn dominates_stored(&self, attrs: &Attrs, pot: &PwlFunction, sigma: &[f64]) -> bool {
        self.live().any(|k| {
            let n = self.node(k);
            attrs.dominates(&n.attrs, sigma, self.eps)
                && n.labels.iter().any(|(_, f)| pot.dominates_on(f, f.lo().max(pot.lo()), self.hi.min(f.hi()), self.eps))
        })
    }

    /// `true` if one stored label alone dominates the given one.
    pub fn stored_dominates(&self, attrs: &Attrs, pot: &PwlFunction, sigma: &[f64]) -> bool {
        self.live().any(|k| {
            let n = self.node(k);
            n.attrs.dominates(attrs, sigma, self.eps)
                && n.labels.iter().any(|(_, f)| f.dominates_on(pot, pot.lo().max(f.lo()), self.hi.min(pot.hi()), self.eps))
        })
    }

    /// Adds a label unless the graph dominates it.
    pub fn add(&mut self, id: usize, attrs: Attrs, pot: PwlFunction, sigma: &[f64]) -> AddOutcome {
        if self.is_dominated(&attrs, &pot, sigma) {
            return AddOutcome { kept: false, purged: Vec::new() };
        }
        self.insert(id, attrs, pot, sigma)
    }

    /// Adds a label without a dominance test, then purges what it covers.
    pub fn insert(&mut self, id: usize, attrs: Attrs, pot: PwlFunction, sigma: &[f64]) -> AddOutcome {
        let existing = self.live().find(|&k| self.node(k).attrs.identical(&attrs));
        let u = match existing {
            Some(k) => {
                self.nodes[k].as_mut().unwrap().labels.push((id, pot));
                k
            }
            None => self.insert_node(id, attrs, pot, sigma),
        };
        let purged = self.refresh_from(u);
        AddOutcome { kept: true, purged }
    }

    fn insert_node(&mut self, id: usize, attrs: Attrs, pot: PwlFunction, sigma: &[f64]) -> usize {
        let live: Vec<usize> = self.live().collect();
        let mut pred = Vec::new();
        let mut succ = Vec::new();
        for k in live {
            let other = &self.node(k).attrs;
            if other.dominates(&attrs, sigma, 0.0) {
                pred.push(k);
            } else if attrs.dominates(other, sigma, 0.0) {
                succ.push(k);
            }
        }
        let node = GraphNode { attrs, env: pot.clone(), labels: vec![(id, pot)], succ: succ.clone(), pred: pred.clone() };
        let u = match self.free.pop() {
            Some(k) => {
                self.nodes[k] = Some(node);
                k
            }
            None => {
                self.nodes.push(Some(node));
                self.nodes.len() - 1
            }
        };
        for p in pred {
            self.nodes[p].as_mut().unwrap().succ.push(u);
        }
        for s in succ {
            self.nodes[s].as_mut().unwrap().pred.push(u);
        }
        u
    }

    /// Recomputes envelopes of `u` and its descendants in topological order,
    /// dropping labels that no longer contribute.
    fn refresh_from(&mut self, u: usize) -> Vec<usize> {
        let mut members = vec![u];
        members.extend(self.node(u).succ.iter().copied());
        let mut in_set = vec![false; self.nodes.len()];
        for &m in &members {
            in_set[m] = true;
        }
        let mut indeg: Vec<usize> = vec![0; self.nodes.len()];
        for &m in &members {
            indeg[m] = self.node(m).pred.iter().filter(|&&p| in_set[p]).count();
        }
        let mut queue: Vec<usize> = members.iter().copied().filter(|&m| indeg[m] == 0).collect();
        let mut order = Vec::with_capacity(members.len());
        while let Some(k) = queue.pop() {
            order.push(k);
            for &s in &self.node(k).succ {
                if in_set[s] {
                    indeg[s] -= 1;
                    if indeg[s] == 0 {
                        queue.push(s);
                    }
                }
            }
        }
        let mut purged = Vec::new();
        for k in order {
            purged.extend(self.refresh_node(k));
        }
        purged
    }

    fn refresh_node(&mut self, k: usize) -> Vec<usize> {
        let lo = self.node(k).attrs.time;
        let mut inherited: Option<PwlFunction> = None;
        for &p in &self.node(k).pred {
            inherited = Some(envelope(inherited, &self.node(p).env, lo));
        }
        let (hi, eps) = (self.hi, self.eps);
        let node = self.nodes[k].as_mut().unwrap();
        let mut purged = Vec::new();
        let mut idx = 0;
        while idx < node.labels.len() {
            let mut others = inherited.clone();
            for (j, (_, f)) in node.labels.iter().enumerate() {
                if j != idx {
                    others = Some(envelope(others, f, lo));
                }
            }
            let (id, f) = &node.labels[idx];
            let covered = others.as_ref().is_some_and(|o| o.dominates_on(f, f.lo().max(o.lo()), hi.min(f.hi()), eps));
            if covered {
                purged.push(*id);
                node.labels.remove(idx);
            } else {
                idx += 1;
            }
        }
        if node.labels.is_empty() {
            // a node joining several envelopes still covers labels none of
            // its predecessors covers alone
            match inherited {
                Some(env) if node.pred.len() > 1 => node.env = env,
                _ => self.remove_node(k),
            }
            return purged;
        }
        let mut env = inherited;
        for (_, f) in &node.labels {
            env = Some(envelope(env, f, lo));
        }
        node.env = env.expect("node keeps at least one label");
        purged
    }

    fn remove_node(&mut self, k: usize) {
        let node = self.nodes[k].take().expect("live graph node");
        for p in node.pred {
            if let Some(n) = self.nodes[p].as_mut() {
                n.succ.retain(|&s| s != k);
            }
        }
        for s in node.succ {
            if let Some(n) = self.nodes[s].as_mut() {
                n.pred.retain(|&q| q != k);
            }
        }
        self.free.push(k);
    }

    /// Upper envelope at node level, recomputed from scratch for checking.
    pub fn envelope_check(&self) -> bool {
        for k in self.live() {
            let n = self.node(k);
            let lo = n.attrs.time;
            let mut env: Option<PwlFunction> = None;
            for &p in n.pred.iter() {
                for (_, f) in &self.node(p).labels {
                    env = Some(envelope(env, f, lo));
                }
            }
            for (_, f) in &n.labels {
                env = Some(envelope(env, f, lo));
            }
            let env = env.unwrap();
            if !(env.dominates_on(&n.env, lo, self.hi, 1e-9) && n.env.dominates_on(&env, lo, self.hi, 1e-9)) {
                return false;
            }
        }
        true
    }
}

/// Potential of a backward label: `s ↦ −g(−s)` on `[−latest, −earliest]`.
pub fn backward_potential(g: &PwlFunction, earliest: f64, latest: f64) -> PwlFunction {
    let lo = earliest.min(latest).max(g.lo());
    g.restrict_clamped(lo, latest).negate().reflect()
}

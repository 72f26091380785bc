//! Bidirectional label setting and label merging.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use fixedbitset::FixedBitSet;

use super::graph::{backward_potential, Attrs, DominanceGraph};
use super::qroute::QRouteBounds;
use super::{DominanceMode, Duals, Network, NgSets, PricingConfig, PricingStats};
use crate::charge::{backward_extend, forward_extend, merge_slack, BackwardState, ForwardState};
use crate::model::{Instance, NodeKind};
use crate::PwlFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// A partial path from the depot (forward) or to the depot (backward).
#[derive(Debug, Clone)]
pub struct Label {
    pub dir: Direction,
    pub node: usize,
    /// Collected duals.
    pub r: f64,
    pub h: f64,
    /// Earliest departure for forward labels, latest for backward ones.
    pub time: f64,
    /// Maximum battery `f` (forward) or minimum needed battery `g` (backward).
    pub func: PwlFunction,
    pub mem: FixedBitSet,
    pub sr: FixedBitSet,
    pub parent: Option<usize>,
    pub alive: bool,
}

impl Label {
    fn forward_state(&self) -> ForwardState {
        ForwardState { node: self.node, a: self.time, f: self.func.clone() }
    }

    fn backward_state(&self) -> BackwardState {
        BackwardState { node: self.node, d: self.time, g: self.func.clone() }
    }
}

/// Everything one labeling run produced.
#[derive(Debug, Clone, Default)]
pub struct LabelSet {
    pub labels: Vec<Label>,
    /// Completed routes with their reduced cost as computed by labeling.
    pub routes: Vec<(Vec<usize>, f64)>,
    pub surviving: usize,
}

enum Store {
    Plain(Vec<usize>),
    Graph(DominanceGraph),
}

struct Ctx<'a> {
    inst: &'a Instance,
    net: &'a Network,
    ng: &'a NgSets,
    config: &'a PricingConfig,
    mu: Vec<f64>,
    load: Vec<f64>,
    arc: Vec<Vec<f64>>,
    sigma: Vec<f64>,
    cut_sets: Vec<[usize; 3]>,
    cuts_of: Vec<Vec<usize>>,
    bounds: Option<QRouteBounds>,
}

#[derive(PartialEq)]
struct Key(f64, f64, usize);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    // reversed so the max-heap pops the smallest key
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.total_cmp(&self.1)).then(other.2.cmp(&self.2))
    }
}

/// Rounds a dual or demand to a multiple of 2^-30. Sums of such values are
/// exact in `f64`, so labels that collected the same values in a different
/// order compare equal in the dominance graph.
fn quantize(x: f64) -> f64 {
    const SCALE: f64 = (1u64 << 30) as f64;
    (x * SCALE).round() / SCALE
}

/// Earliest time a label at `node` can leave, the left end of backward
/// dominance intervals.
fn earliest_leave(inst: &Instance, node: usize) -> f64 {
    match inst.kind(node) {
        NodeKind::Depot => 0.0,
        _ => inst.earliest_departure(node),
    }
}

fn latest_leave(inst: &Instance, node: usize) -> f64 {
    match inst.kind(node) {
        NodeKind::Depot => inst.horizon,
        _ => inst.latest_departure(node),
    }
}

impl<'a> Ctx<'a> {
    fn new(inst: &'a Instance, duals: &Duals, net: &'a Network, ng: &'a NgSets, config: &'a PricingConfig) -> Self {
        let n = inst.n_nodes();
        let mut mu = vec![0.0; n];
        for i in inst.customers() {
            mu[i] = quantize(duals.customer.get(i).copied().unwrap_or(0.0));
        }
        mu[0] = quantize(duals.route);
        let load: Vec<f64> = (0..n).map(|j| if inst.is_customer(j) { quantize(inst.demand(j)) } else { 0.0 }).collect();
        let mut arc = vec![vec![0.0; n]; n];
        for &(i, j, pi) in &duals.arcs {
            arc[i][j] = quantize(arc[i][j] + pi);
        }
        let mut sigma = Vec::new();
        let mut cut_sets = Vec::new();
        let mut cuts_of = vec![Vec::new(); n];
        for c in duals.cuts.iter().filter(|c| c.sigma < -1e-9) {
            for &i in &c.nodes {
                cuts_of[i].push(sigma.len());
            }
            sigma.push(quantize(c.sigma));
            cut_sets.push(c.nodes);
        }
        let bounds = config.qroute.then(|| {
            let node_cost: Vec<f64> = (0..n).map(|j| if j == 0 { -mu[0] } else { inst.service(j) - mu[j] }).collect();
            let arc_cost = |i: usize, j: usize| {
                if net.allows(i, j) {
                    inst.travel(i, j) - arc[i][j]
                } else {
                    f64::INFINITY
                }
            };
            QRouteBounds::compute(inst, &node_cost, &arc_cost)
        });
        Self { inst, net, ng, config, mu, load, arc, sigma, cut_sets, cuts_of, bounds }
    }

    fn attrs(&self, l: &Label) -> Attrs {
        // quantized so that equal times reached along different paths give
        // comparable graph nodes
        let time = quantize(match l.dir {
            Direction::Forward => l.time,
            Direction::Backward => -l.time,
        });
        Attrs { r: l.r, h: l.h, time, mem: l.mem.clone(), sr: l.sr.clone() }
    }

    fn potential(&self, l: &Label) -> PwlFunction {
        match l.dir {
            Direction::Forward => l.func.clone(),
            Direction::Backward => backward_potential(&l.func, earliest_leave(self.inst, l.node), l.time),
        }
    }

    fn potential_hi(&self, dir: Direction, node: usize) -> f64 {
        match dir {
            Direction::Forward => latest_leave(self.inst, node),
            Direction::Backward => -earliest_leave(self.inst, node),
        }
    }

    /// Visit memory and cut parities after entering `j`, plus the subset-row
    /// duals paid on the way.
    fn enter(&self, l: &Label, j: usize) -> (FixedBitSet, FixedBitSet, f64) {
        let mut mem = l.mem.clone();
        let mut sr = l.sr.clone();
        let mut paid = 0.0;
        if self.inst.is_customer(j) {
            mem.intersect_with(self.ng.set(j));
            mem.insert(j);
            for &c in &self.cuts_of[j] {
                if sr[c] {
                    paid += self.sigma[c];
                    sr.set(c, false);
                } else {
                    sr.insert(c);
                }
            }
        } else {
            mem.insert(j);
        }
        (mem, sr, paid)
    }

    fn can_enter(&self, l: &Label, j: usize) -> bool {
        if j == l.node || l.mem[j] {
            return false;
        }
        l.h + self.load[j] <= self.inst.capacity + 1e-9
    }

    fn extend_forward(&self, l: &Label, id: usize, j: usize) -> Option<Label> {
        if !self.net.allows(l.node, j) || !self.can_enter(l, j) {
            return None;
        }
        let st = forward_extend(self.inst, &l.forward_state(), j).ok()?;
        let (mem, sr, paid) = self.enter(l, j);
        let r = l.r + self.mu[j] + self.arc[l.node][j] + paid;
        let h = l.h + self.load[j];
        Some(Label { dir: Direction::Forward, node: j, r, h, time: st.a, func: st.f, mem, sr, parent: Some(id), alive: true })
    }

    fn extend_backward(&self, l: &Label, id: usize, j: usize) -> Option<Label> {
        if j == 0 || !self.net.allows(j, l.node) || !self.can_enter(l, j) {
            return None;
        }
        let st = backward_extend(self.inst, &l.backward_state(), j).ok()?;
        let (mem, sr, paid) = self.enter(l, j);
        let r = l.r + self.mu[j] + self.arc[j][l.node] + paid;
        let h = l.h + self.load[j];
        Some(Label { dir: Direction::Backward, node: j, r, h, time: st.d, func: st.g, mem, sr, parent: Some(id), alive: true })
    }

    fn pruned(&self, l: &Label) -> bool {
        let (Some(cap), Some(b)) = (self.config.prune_above, self.bounds.as_ref()) else {
            return false;
        };
        let lb = match l.dir {
            Direction::Forward => l.time - l.r + b.forward(self.inst, l.node, l.time, l.h),
            // under shift invariance the suffix lasts at least `T − latest`
            Direction::Backward => self.inst.horizon - l.time - l.r + b.backward(self.inst, l.node, l.time, l.h),
        };
        lb > cap + 1e-9
    }

    fn dominates(&self, a: &Label, b: &Label) -> bool {
        let eps = self.config.eps;
        let (aa, ab) = (self.attrs(a), self.attrs(b));
        if !aa.dominates(&ab, &self.sigma, eps) {
            return false;
        }
        let (pa, pb) = (self.potential(a), self.potential(b));
        let hi = self.potential_hi(a.dir, a.node).min(pb.hi());
        pa.dominates_on(&pb, pb.lo().max(pa.lo()), hi, eps)
    }

    /// Stores a new label at its node; returns whether it survives and the
    /// ids of stored labels it displaced.
    fn store(&self, store: &mut Store, labels: &[Label], id: usize, l: &Label) -> (bool, Vec<usize>) {
        match (self.config.dominance, store) {
            (DominanceMode::None, Store::Plain(ids)) => {
                ids.push(id);
                (true, Vec::new())
            }
            (DominanceMode::Single, Store::Plain(ids)) => {
                if ids.iter().any(|&k| self.dominates(&labels[k], l)) {
                    return (false, Vec::new());
                }
                let (gone, keep): (Vec<usize>, Vec<usize>) =
                    ids.iter().partition(|&&k| self.dominates(l, &labels[k]));
                *ids = keep;
                ids.push(id);
                (true, gone)
            }
            (_, Store::Graph(g)) => {
                let (attrs, pot) = (self.attrs(l), self.potential(l));
                // a label covered by the set but strictly better than one of
                // its members replaces that member, as pairwise dominance would
                if g.is_dominated(&attrs, &pot, &self.sigma)
                    && (!g.dominates_stored(&attrs, &pot, &self.sigma) || g.stored_dominates(&attrs, &pot, &self.sigma))
                {
                    return (false, Vec::new());
                }
                let out = g.insert(id, attrs, pot, &self.sigma);
                (out.kept, out.purged)
            }
            (DominanceMode::Graph, Store::Plain(_)) => unreachable!("graph mode uses graph stores"),
        }
    }

    fn new_store(&self, dir: Direction, node: usize) -> Store {
        match self.config.dominance {
            DominanceMode::Graph => Store::Graph(DominanceGraph::new(self.potential_hi(dir, node), self.config.eps)),
            _ => Store::Plain(Vec::new()),
        }
    }
}

fn stored_ids(store: &Store) -> Vec<usize> {
    match store {
        Store::Plain(ids) => ids.clone(),
        Store::Graph(g) => g.label_ids().collect(),
    }
}

fn path(labels: &[Label], mut id: usize) -> Vec<usize> {
    let mut out = vec![labels[id].node];
    while let Some(p) = labels[id].parent {
        out.push(labels[p].node);
        id = p;
    }
    out
}

struct Search<'a> {
    ctx: Ctx<'a>,
    labels: Vec<Label>,
    fwd: Vec<Store>,
    bwd: Vec<Store>,
    fwd_pool: BinaryHeap<Key>,
    bwd_pool: BinaryHeap<Key>,
    routes: HashMap<Vec<usize>, f64>,
    created_fwd: usize,
    created_bwd: usize,
}

impl<'a> Search<'a> {
    fn record(&mut self, nodes: Vec<usize>, rc: f64) {
        if !nodes.iter().any(|&i| self.ctx.inst.is_customer(i)) {
            return;
        }
        if let Some(cap) = self.ctx.config.prune_above {
            if rc > cap + 1e-9 {
                return;
            }
        }
        let e = self.routes.entry(nodes).or_insert(f64::INFINITY);
        if rc < *e {
            *e = rc;
        }
    }

    fn push(&mut self, l: Label, stats: &mut PricingStats) {
        if self.ctx.pruned(&l) {
            stats.pruned_by_bound += 1;
            return;
        }
        let id = self.labels.len();
        let dir = l.dir;
        let node = l.node;
        let store = match dir {
            Direction::Forward => &mut self.fwd[node],
            Direction::Backward => &mut self.bwd[node],
        };
        let (kept, purged) = self.ctx.store(store, &self.labels, id, &l);
        stats.purged += purged.iter().filter(|&&p| p != id).count();
        for &p in purged.iter().filter(|&&p| p != id) {
            self.labels[p].alive = false;
        }
        // the graph may drop a forced insertion right away
        if !kept || purged.contains(&id) {
            stats.dominated += 1;
            return;
        }
        let key = match dir {
            Direction::Forward => {
                self.created_fwd += 1;
                Key(l.time, l.h, id)
            }
            Direction::Backward => {
                self.created_bwd += 1;
                Key(-l.time, l.h, id)
            }
        };
        self.labels.push(l);
        match dir {
            Direction::Forward => self.fwd_pool.push(key),
            Direction::Backward => self.bwd_pool.push(key),
        }
    }

    fn drain_forward(&mut self, threshold: f64, stats: &mut PricingStats) {
        let inst = self.ctx.inst;
        while let Some(Key(t, _, id)) = self.fwd_pool.peek() {
            if *t > threshold {
                break;
            }
            let id = *id;
            self.fwd_pool.pop();
            if !self.labels[id].alive {
                continue;
            }
            let l = self.labels[id].clone();
            for j in 0..inst.n_nodes() {
                if j == 0 {
                    if l.node == 0 || !self.ctx.net.allows(l.node, 0) {
                        continue;
                    }
                    if let Ok(end) = forward_extend(inst, &l.forward_state(), 0) {
                        let rc = end.a - (l.r + self.ctx.mu[0] + self.ctx.arc[l.node][0]);
                        let mut nodes = path(&self.labels, id);
                        nodes.reverse();
                        nodes.push(0);
                        self.record(nodes, rc);
                    }
                    continue;
                }
                if let Some(next) = self.ctx.extend_forward(&l, id, j) {
                    self.push(next, stats);
                }
            }
        }
    }

    fn drain_backward(&mut self, threshold: f64, stats: &mut PricingStats) {
        let inst = self.ctx.inst;
        while let Some(Key(t, _, id)) = self.bwd_pool.peek() {
            if -*t < threshold {
                break;
            }
            let id = *id;
            self.bwd_pool.pop();
            if !self.labels[id].alive {
                continue;
            }
            let l = self.labels[id].clone();
            for j in 1..inst.n_nodes() {
                if let Some(next) = self.ctx.extend_backward(&l, id, j) {
                    self.push(next, stats);
                }
            }
        }
    }

    fn merge_all(&mut self, stats: &mut PricingStats) {
        let inst = self.ctx.inst;
        let horizon = inst.horizon;
        for i in 1..inst.n_nodes() {
            let fs: Vec<usize> = stored_ids(&self.fwd[i]).into_iter().filter(|&k| self.labels[k].alive).collect();
            let bs: Vec<usize> = stored_ids(&self.bwd[i]).into_iter().filter(|&k| self.labels[k].alive).collect();
            if fs.is_empty() || bs.is_empty() {
                continue;
            }
            let q_i = self.ctx.load[i];
            let mu_i = self.ctx.mu[i];
            for &fi in &fs {
                for &bi in &bs {
                    let (lf, lb) = (&self.labels[fi], &self.labels[bi]);
                    if lf.h + lb.h - q_i > inst.capacity + 1e-9 || lf.time > lb.time + crate::model::TIME_TOL {
                        continue;
                    }
                    if lf.mem.intersection(&lb.mem).any(|k| k != i) {
                        continue;
                    }
                    let mut corr = 0.0;
                    for (c, &sigma) in self.ctx.sigma.iter().enumerate() {
                        let shared = self.ctx.cut_sets[c].contains(&i) as i32;
                        let sum = lf.sr[c] as i32 + lb.sr[c] as i32 - shared;
                        corr += (sum.div_euclid(2)) as f64 * sigma;
                    }
                    let base = horizon - lf.r - lb.r + mu_i - corr;
                    if let Some(cap) = self.ctx.config.prune_above {
                        if base - (lb.time - lf.time) > cap + 1e-9 {
                            continue;
                        }
                    }
                    let Some(slack) = merge_slack(&lf.forward_state(), &lb.backward_state()) else {
                        continue;
                    };
                    stats.merges += 1;
                    let rc = base - slack;
                    let mut nodes = path(&self.labels, fi);
                    nodes.reverse();
                    nodes.extend(path(&self.labels, bi).into_iter().skip(1));
                    self.record(nodes, rc);
                }
            }
        }
    }
}

/// One labeling run with fixed ng-sets.
pub fn label_setting(
    inst: &Instance,
    duals: &Duals,
    net: &Network,
    ng: &NgSets,
    config: &PricingConfig,
    stats: &mut PricingStats,
) -> LabelSet {
    let ctx = Ctx::new(inst, duals, net, ng, config);
    let n = inst.n_nodes();
    let fwd = (0..n).map(|i| ctx.new_store(Direction::Forward, i)).collect();
    let bwd = (0..n).map(|i| ctx.new_store(Direction::Backward, i)).collect();
    let mut s = Search {
        ctx,
        labels: Vec::new(),
        fwd,
        bwd,
        fwd_pool: BinaryHeap::new(),
        bwd_pool: BinaryHeap::new(),
        routes: HashMap::new(),
        created_fwd: 0,
        created_bwd: 0,
    };
    let horizon = inst.horizon;
    let empty = FixedBitSet::with_capacity(n);
    let no_cuts = FixedBitSet::with_capacity(s.ctx.sigma.len());
    s.labels.push(Label {
        dir: Direction::Forward,
        node: 0,
        r: 0.0,
        h: 0.0,
        time: 0.0,
        func: ForwardState::depot(inst).f,
        mem: empty.clone(),
        sr: no_cuts.clone(),
        parent: None,
        alive: true,
    });
    s.fwd_pool.push(Key(0.0, 0.0, 0));

    let bidirectional = config.bidirectional && inst.shift_invariant();
    if !bidirectional {
        s.drain_forward(f64::INFINITY, stats);
    } else {
        s.labels.push(Label {
            dir: Direction::Backward,
            node: 0,
            r: s.ctx.mu[0],
            h: 0.0,
            time: horizon,
            func: BackwardState::depot(inst).g,
            mem: empty,
            sr: no_cuts,
            parent: None,
            alive: true,
        });
        s.bwd_pool.push(Key(-horizon, 0.0, 1));
        let slot = horizon / 16.0;
        let (mut tf, mut tb) = match config.fixed_split {
            Some(x) => (x * horizon, x * horizon),
            None => (slot, horizon - slot),
        };
        loop {
            s.drain_forward(tf, stats);
            s.drain_backward(tb, stats);
            if tf >= tb {
                break;
            }
            (tf, tb) = update_thresholds(tf, tb, slot, s.created_fwd, s.created_bwd);
        }
        s.merge_all(stats);
    }
    stats.labels_forward += s.created_fwd;
    stats.labels_backward += s.created_bwd;
    let surviving = s.labels.iter().filter(|l| l.alive).count();
    stats.surviving.push(surviving);
    stats.graph_nodes += s
        .fwd
        .iter()
        .chain(s.bwd.iter())
        .map(|st| match st {
            Store::Graph(g) => g.n_nodes(),
            Store::Plain(_) => 0,
        })
        .sum::<usize>();
    let mut routes: Vec<(Vec<usize>, f64)> = s.routes.into_iter().collect();
    routes.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    LabelSet { labels: s.labels, routes, surviving }
}

/// Moves the backward threshold down when forward labels dominate the
/// count, otherwise the forward threshold up, never letting them cross.
pub fn update_thresholds(tf: f64, tb: f64, slot: f64, forward: usize, backward: usize) -> (f64, f64) {
    if forward > backward {
        (tf, (tb - slot).max(tf))
    } else {
        ((tf + slot).min(tb), tb)
    }
}

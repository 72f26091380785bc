//! Brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use evrpnl::charge::{forward_extend, simulate_route, ForwardState};
use evrpnl::model::random::{random_instance, RandomParams};
use evrpnl::model::{Instance, NodeKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn small_instance(seed: u64, customers: usize, stations: usize) -> Instance {
    let p = RandomParams { customers, stations, ..RandomParams::default() };
    random_instance(&mut rng(seed), &p)
}

/// Minimum duration of a fixed node sequence when every station dwell is a
/// multiple of `step` hours. Keeps the Pareto front of (time, battery) pairs
/// per position. Never below the exact optimum and at most `step` per
/// station above it.
pub fn grid_duration(inst: &Instance, nodes: &[usize], step: f64) -> Option<f64> {
    let mut front: Vec<(f64, f64)> = vec![(0.0, inst.battery)];
    for w in nodes.windows(2) {
        let (i, j) = (w[0], w[1]);
        let (e, l) = inst.window(j);
        let mut next = Vec::new();
        for &(t, soc) in &front {
            let t = t + inst.travel(i, j);
            let soc = soc - inst.energy(i, j);
            if soc < -1e-6 || t > l + 1e-6 {
                continue;
            }
            match inst.kind(j) {
                NodeKind::Customer => next.push((t.max(e) + inst.service(j), soc)),
                NodeKind::Depot => next.push((t, soc)),
                NodeKind::Station => {
                    let st = inst.station(j);
                    let start = st.inverse.eval_clamped(soc.max(0.0));
                    let full = st.full_time();
                    let mut k = 0usize;
                    loop {
                        let dwell = k as f64 * step;
                        let level = st.curve.eval_clamped(start + dwell).min(inst.battery);
                        next.push((t + dwell, level));
                        if start + dwell >= full || level >= inst.battery {
                            break;
                        }
                        k += 1;
                    }
                }
            }
        }
        next.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
        front.clear();
        for p in next {
            if front.last().map_or(true, |q: &(f64, f64)| p.1 > q.1 + 1e-12) {
                front.push(p);
            }
        }
        if front.is_empty() {
            return None;
        }
    }
    front.iter().map(|p| p.0).filter(|&t| t <= inst.horizon + 1e-6).reduce(f64::min)
}

/// Best route per customer subset (bitmask over customers `1..=n`), found by
/// depth-first search over node sequences with exact state dominance per
/// (subset, node). Durations come from `simulate_route`.
pub fn best_routes(inst: &Instance) -> Vec<Option<(f64, Vec<usize>)>> {
    let n = inst.n_customers();
    assert!(n <= 12, "subset oracle is exponential");
    let mut best: Vec<Option<(f64, Vec<usize>)>> = vec![None; 1 << n];
    best[0] = Some((0.0, vec![0, 0]));
    let mut seen: Vec<Vec<Vec<ForwardState>>> = vec![vec![Vec::new(); inst.n_nodes()]; 1 << n];
    let mut stack = vec![(vec![0usize], 0usize, 0.0f64, ForwardState::depot(inst))];
    while let Some((seq, mask, load, st)) = stack.pop() {
        let here = *seq.last().unwrap();
        for j in 0..inst.n_nodes() {
            if j == here {
                continue;
            }
            if j == 0 {
                if seq.len() == 1 {
                    continue;
                }
                if forward_extend(inst, &st, 0).is_ok() {
                    let mut full = seq.clone();
                    full.push(0);
                    if let Ok(r) = simulate_route(inst, &full) {
                        let slot = &mut best[mask];
                        if slot.as_ref().map_or(true, |(d, _)| r.duration < *d) {
                            *slot = Some((r.duration, full));
                        }
                    }
                }
                continue;
            }
            let (mask2, load2) = if inst.is_customer(j) {
                let bit = 1 << (j - 1);
                if mask & bit != 0 || load + inst.demand(j) > inst.capacity + 1e-9 {
                    continue;
                }
                (mask | bit, load + inst.demand(j))
            } else {
                (mask, load)
            };
            let Ok(next) = forward_extend(inst, &st, j) else { continue };
            let bucket = &mut seen[mask2][j];
            let dominated = bucket.iter().any(|o: &ForwardState| {
                o.a <= next.a + 1e-12 && o.f.dominates_on(&next.f, next.a, next.f.hi(), 0.0) && o.f.hi() >= next.f.hi()
            });
            if dominated {
                continue;
            }
            bucket.retain(|o| {
                !(next.a <= o.a + 1e-12 && next.f.dominates_on(&o.f, o.a, o.f.hi(), 0.0) && next.f.hi() >= o.f.hi())
            });
            bucket.push(next.clone());
            let mut seq2 = seq.clone();
            seq2.push(j);
            stack.push((seq2, mask2, load2, next));
        }
    }
    best
}

/// Optimal fleet cost by set partitioning over the per-subset best routes.
pub fn partition_optimum(inst: &Instance, best: &[Option<(f64, Vec<usize>)>]) -> Option<f64> {
    let n = inst.n_customers();
    let full = (1usize << n) - 1;
    // dp[k][mask]: cheapest cover of mask with k routes
    let inf = f64::INFINITY;
    let mut dp = vec![vec![inf; 1 << n]; inst.fleet + 1];
    dp[0][0] = 0.0;
    for k in 1..=inst.fleet {
        for mask in 0..=full {
            let mut v = dp[k - 1][mask];
            let low = mask & mask.wrapping_neg();
            // enumerate subsets containing the lowest set bit to avoid duplicates
            let mut sub = mask;
            while sub > 0 {
                if sub & low != 0 {
                    if let Some((d, _)) = &best[sub] {
                        v = v.min(dp[k - 1][mask ^ sub] + d);
                    }
                }
                sub = (sub - 1) & mask;
            }
            dp[k][mask] = v;
        }
    }
    let v = dp[inst.fleet][full];
    v.is_finite().then_some(v)
}

/// Every way to put at most one station into each gap of the sequence.
pub fn detour_sequences(inst: &Instance, customers: &[usize]) -> Vec<Vec<usize>> {
    let stops: Vec<usize> = customers.iter().copied().chain([0]).collect();
    let options = 1 + inst.n_stations();
    let total = options.pow(stops.len() as u32);
    let stations: Vec<usize> = inst.station_ids().collect();
    (0..total)
        .map(|mut code| {
            let mut nodes = vec![0];
            for &s in &stops {
                let pick = code % options;
                code /= options;
                if pick > 0 {
                    nodes.push(stations[pick - 1]);
                }
                nodes.push(s);
            }
            nodes
        })
        .collect()
}

pub fn exhaustive_best(inst: &Instance, customers: &[usize]) -> Option<f64> {
    detour_sequences(inst, customers)
        .iter()
        .filter_map(|nodes| simulate_route(inst, nodes).ok())
        .map(|r| r.duration)
        .reduce(f64::min)
}

/// Travel plus service time, a lower bound on any schedule of `nodes`.
pub fn drive_time(inst: &Instance, nodes: &[usize]) -> f64 {
    nodes.windows(2).map(|w| inst.travel(w[0], w[1]) + inst.service(w[1])).sum()
}

/// Brute force over station choices and dwell times on a 1e-3 h grid.
pub fn grid_best(inst: &Instance, customers: &[usize]) -> Option<f64> {
    if customers.iter().map(|&i| inst.demand(i)).sum::<f64>() > inst.capacity + 1e-9 {
        return None;
    }
    let mut seqs = detour_sequences(inst, customers);
    seqs.sort_by(|a, b| drive_time(inst, a).total_cmp(&drive_time(inst, b)));
    let mut best: Option<f64> = None;
    for nodes in seqs {
        if best.is_some_and(|b| drive_time(inst, &nodes) >= b) {
            break;
        }
        if let Some(d) = grid_duration(inst, &nodes, 1e-3) {
            best = Some(best.map_or(d, |b| b.min(d)));
        }
    }
    best
}

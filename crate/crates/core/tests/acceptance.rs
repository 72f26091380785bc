//! One line per acceptance criterion. Criteria that need the public
//! benchmark files run only when `EVRP_MONTOYA_DIR` points at a directory
//! holding them, as converted `.json` or original `.xml`.

mod common;

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use common::{best_routes, grid_best, partition_optimum};
use evrpnl::bpc::{solve, BpcConfig};
use evrpnl::charge::{backward_extend, forward_extend, simulate_route, BackwardState, ForwardState};
use evrpnl::model::fixtures::ex1;
use evrpnl::model::montoya::convert_instance;
use evrpnl::model::random::{random_instance, RandomParams};
use evrpnl::pricing::{label_setting, CutDual, DominanceMode, Duals, Network, NgSets, PricingConfig, PricingStats};
use evrpnl::study::linear_study;
use evrpnl::tabu::{best_of_seeds, optimize_charging, TabuParams};
use evrpnl::{parse_instance, Instance};
use rand::seq::SliceRandom;
use rand::Rng;

/// Agreement with a brute-force optimum.
const ORACLE_TOL: f64 = 1e-4;
/// Agreement between pricing runs with different dominance rules.
const PRICING_TOL: f64 = 1e-6;
/// Agreement with a published two-decimal cost.
const TABLE_TOL: f64 = 0.01;
/// Charging optimizer against a 1e-3 h dwell grid.
const GRID_TOL: f64 = 2e-3;
const TABU_GAP: f64 = 0.02;

const TEN_CUSTOMER: [(&str, f64); 20] = [
    ("tc2c10s2cf0", 21.77),
    ("tc0c10s2cf1", 19.75),
    ("tc1c10s2cf2", 9.03),
    ("tc1c10s2cf3", 16.37),
    ("tc1c10s2cf4", 16.10),
    ("tc2c10s2ct0", 12.45),
    ("tc0c10s2ct1", 12.30),
    ("tc1c10s2ct2", 10.75),
    ("tc1c10s2ct3", 13.17),
    ("tc1c10s3ct4", 13.21),
    ("tc2c10s3cf0", 21.77),
    ("tc0c10s3cf1", 19.75),
    ("tc1c10s3cf2", 9.03),
    ("tc1c10s3cf3", 16.37),
    ("tc1c10s3cf4", 14.90),
    ("tc2c10s3ct0", 11.51),
    ("tc0c10s3ct1", 10.80),
    ("tc1c10s3ct2", 9.20),
    ("tc1c10s3ct3", 13.02),
    ("tc1c10s2ct4", 13.83),
];

const TWENTY_CUSTOMER: [(&str, f64); 5] = [
    ("tc1c20s3cf4", 17.00),
    ("tc1c20s3ct4", 16.21),
    ("tc1c20s4cf4", 17.00),
    ("tc1c20s4ct4", 17.00),
    ("tc0c20s3cf2", 27.47),
];

enum Status {
    Pass,
    Fail,
    NotRun,
    /// Checked by another test binary of the same run.
    Delegated,
}

struct Verdict {
    status: Status,
    detail: String,
}

impl Verdict {
    fn check(ok: bool, detail: impl Into<String>) -> Self {
        Self { status: if ok { Status::Pass } else { Status::Fail }, detail: detail.into() }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::NotRun => "NOT RUN",
            Status::Delegated => "DELEGATED",
        };
        write!(f, "{tag}: {}", self.detail)
    }
}

fn benchmark_dir() -> Option<PathBuf> {
    std::env::var_os("EVRP_MONTOYA_DIR").map(PathBuf::from).filter(|p| p.is_dir())
}

fn load(dir: &Path, name: &str) -> Result<Instance, String> {
    let json = dir.join(format!("{name}.json"));
    if json.exists() {
        let bytes = std::fs::read(&json).map_err(|e| e.to_string())?;
        return parse_instance(&bytes).map_err(|e| e.to_string());
    }
    let xml = std::fs::read_to_string(dir.join(format!("{name}.xml"))).map_err(|e| format!("{name}: {e}"))?;
    convert_instance(&xml, name).map_err(|e| e.to_string())
}

fn not_run() -> Verdict {
    Verdict { status: Status::NotRun, detail: "set EVRP_MONTOYA_DIR to the benchmark instances".into() }
}

/// The criterion-5 suite: small random instances with concave 2 to 3 segment curves.
fn oracle_suite() -> Vec<Instance> {
    (0..50u64)
        .map(|seed| {
            let p = RandomParams {
                customers: 3 + (seed % 4) as usize,
                stations: 1 + (seed % 2) as usize,
                segments: (2, 3),
                ..RandomParams::default()
            };
            random_instance(&mut common::rng(9000 + seed), &p)
        })
        .collect()
}

fn worked_example() -> Verdict {
    let start = Instant::now();
    let inst = ex1(1, 1);
    let f = forward_extend(&inst, &ForwardState::depot(&inst), 1).unwrap();
    let flat_f = f.f.points().iter().all(|p| p.v == 14000.0);
    let inst = ex1(2, 0);
    let g = backward_extend(&inst, &BackwardState::depot(&inst), 2).unwrap();
    let flat_g = g.g.domain() == (0.0, 8.0) && g.g.points().iter().all(|p| p.v == 2000.0);
    let took = start.elapsed();
    Verdict::check(
        flat_f && flat_g && took < Duration::from_secs(1),
        format!("f = 14000 on [{}, {}]: {flat_f}; g = 2000 on [0, 8]: {flat_g}; {took:.2?}", f.f.lo(), f.f.hi()),
    )
}

fn ten_customer_exact() -> Verdict {
    let Some(dir) = benchmark_dir() else { return not_run() };
    let limit = Duration::from_secs(15 * 60);
    let config = BpcConfig { time_limit: Some(limit), ..BpcConfig::default() };
    let mut matched = 0;
    let mut misses = Vec::new();
    for (name, want) in TEN_CUSTOMER {
        let got = load(&dir, name).and_then(|inst| solve(&inst, &config).map_err(|e| e.to_string()));
        match got {
            Ok(r) if r.ip_cost.is_some_and(|c| (c - want).abs() <= TABLE_TOL) && r.total_time <= limit.as_secs_f64() => {
                matched += 1
            }
            Ok(r) => misses.push(format!("{name} {:?} in {:.0}s", r.ip_cost, r.total_time)),
            Err(e) => misses.push(e),
        }
    }
    Verdict::check(misses.is_empty(), format!("{matched}/20 optimal costs reproduced; misses {misses:?}"))
}

fn twenty_customer_exact() -> Verdict {
    let Some(dir) = benchmark_dir() else { return not_run() };
    let limit = Duration::from_secs(3600);
    let config = BpcConfig { time_limit: Some(limit), ..BpcConfig::default() };
    let mut misses = Vec::new();
    for (name, want) in TWENTY_CUSTOMER {
        match load(&dir, name).and_then(|inst| solve(&inst, &config).map_err(|e| e.to_string())) {
            Ok(r) if r.ip_cost.is_some_and(|c| (c - want).abs() <= TABLE_TOL) => {}
            Ok(r) => misses.push(format!("{name} {:?} in {:.0}s", r.ip_cost, r.total_time)),
            Err(e) => misses.push(e),
        }
    }
    Verdict::check(misses.is_empty(), format!("{}/5 costs reproduced; misses {misses:?}", 5 - misses.len()))
}

fn cut_effect() -> Verdict {
    let Some(dir) = benchmark_dir() else { return not_run() };
    let root = |cuts| BpcConfig { cuts, root_only: true, time_limit: Some(Duration::from_secs(3600)), ..Default::default() };
    let (mut lower, mut raised, mut errors) = (0, 0, Vec::new());
    for (name, _) in TWENTY_CUSTOMER {
        let inst = match load(&dir, name) {
            Ok(i) => i,
            Err(e) => {
                errors.push(e);
                continue;
            }
        };
        let (Ok(with), Ok(without)) = (solve(&inst, &root(true)), solve(&inst, &root(false))) else {
            errors.push(format!("{name}: solver error"));
            continue;
        };
        let (a, b) = (with.lp_cost.unwrap_or(f64::INFINITY), without.lp_cost.unwrap_or(f64::INFINITY));
        lower += usize::from(a < b - PRICING_TOL);
        raised += usize::from(a > b + PRICING_TOL);
    }
    Verdict::check(
        errors.is_empty() && lower == 0 && raised >= 1,
        format!("root bound raised on {raised}, lowered on {lower}; errors {errors:?}"),
    )
}

fn oracle_equivalence(suite: &[Instance]) -> (Verdict, Vec<Option<f64>>) {
    let start = Instant::now();
    let mut optima = Vec::new();
    let mut bad = Vec::new();
    for (k, inst) in suite.iter().enumerate() {
        let want = partition_optimum(inst, &best_routes(inst));
        let report = solve(inst, &BpcConfig::default()).unwrap();
        let ok = match (want, report.ip_cost) {
            (Some(w), Some(g)) => report.optimal && (w - g).abs() <= ORACLE_TOL,
            (None, None) => report.infeasible(),
            _ => false,
        };
        if !ok {
            bad.push(format!("#{k}: oracle {want:?} solver {:?}", report.ip_cost));
        }
        optima.push(want);
    }
    let took = start.elapsed();
    let feasible = optima.iter().flatten().count();
    let verdict = Verdict::check(
        bad.is_empty() && took < Duration::from_secs(600),
        format!("{}/{} agree ({feasible} feasible) in {took:.1?}; mismatches {bad:?}", suite.len() - bad.len(), suite.len()),
    );
    (verdict, optima)
}

fn random_duals<R: Rng>(r: &mut R, inst: &Instance) -> Duals {
    let mut d = Duals::zero(inst);
    for i in inst.customers() {
        d.customer[i] = r.gen_range(0.0..1.6);
    }
    d.route = r.gen_range(-0.5..0.0);
    if inst.n_customers() >= 3 && r.gen_bool(0.5) {
        let mut cs: Vec<usize> = inst.customers().collect();
        cs.shuffle(r);
        d.cuts.push(CutDual { nodes: [cs[0], cs[1], cs[2]], sigma: -r.gen_range(0.05..0.6) });
    }
    d
}

fn dominance_ladder(suite: &[Instance]) -> Verdict {
    let mut r = common::rng(6);
    let (mut calls, mut cost_mismatch, mut graph_more) = (0, Vec::new(), Vec::new());
    for (k, inst) in suite.iter().enumerate() {
        for _ in 0..2 {
            let duals = random_duals(&mut r, inst);
            let run = |dominance| {
                let cfg = PricingConfig { dominance, bidirectional: true, qroute: false, prune_above: None, ng_size: None, ..Default::default() };
                let mut stats = PricingStats::default();
                let set = label_setting(inst, &duals, &Network::full(inst), &NgSets::nearest(inst, None), &cfg, &mut stats);
                (set.routes.iter().map(|r| r.1).fold(f64::INFINITY, f64::min), set.surviving)
            };
            let (none, _) = run(DominanceMode::None);
            let (single, n_single) = run(DominanceMode::Single);
            let (graph, n_graph) = run(DominanceMode::Graph);
            let same = |a: f64, b: f64| (a - b).abs() <= PRICING_TOL || (a.is_infinite() && b.is_infinite());
            if !same(none, single) || !same(none, graph) {
                cost_mismatch.push(k);
            }
            if n_graph > n_single {
                graph_more.push(k);
            }
            calls += 1;
        }
    }
    Verdict::check(
        cost_mismatch.is_empty() && graph_more.is_empty(),
        format!("{calls} calls; cost mismatches {cost_mismatch:?}; graph kept more labels {graph_more:?}"),
    )
}

fn tabu_benchmark() -> Verdict {
    let Some(dir) = benchmark_dir() else { return not_run() };
    let mut hits = 0;
    let mut misses = Vec::new();
    for (name, want) in TEN_CUSTOMER {
        let inst = match load(&dir, name) {
            Ok(i) => i,
            Err(e) => {
                misses.push(e);
                continue;
            }
        };
        let start = Instant::now();
        let params = TabuParams { seed: 42, ..TabuParams::for_size(inst.n_customers()) };
        let out = best_of_seeds(&inst, &params, 5);
        let took = start.elapsed();
        match out {
            Ok(o) if o.solution.cost <= want + TABLE_TOL && took <= Duration::from_secs(10) => hits += 1,
            Ok(o) => misses.push(format!("{name} {:.2} in {took:.1?}", o.solution.cost)),
            Err(e) => misses.push(format!("{name}: {e}")),
        }
    }
    Verdict::check(hits >= 18, format!("{hits}/20 optima reached; misses {misses:?}"))
}

fn tabu_random(suite: &[Instance], optima: &[Option<f64>]) -> Verdict {
    let (mut solved, mut close) = (0, 0);
    for (inst, opt) in suite.iter().zip(optima) {
        let Some(opt) = opt else { continue };
        solved += 1;
        let params = TabuParams { seed: 42, ..TabuParams::for_size(inst.n_customers()) };
        if let Ok(out) = best_of_seeds(inst, &params, 5) {
            close += usize::from(out.solution.cost <= opt * (1.0 + TABU_GAP) + 1e-9);
        }
    }
    Verdict::check(close * 10 >= solved * 9, format!("{close}/{solved} within 2% of the optimum"))
}

fn charging_oracle() -> Verdict {
    let start = Instant::now();
    let (mut checked, mut bad, mut seed) = (0, Vec::new(), 20_000u64);
    while checked < 200 {
        let mut r = common::rng(seed);
        let p = RandomParams { customers: r.gen_range(1..=5), stations: r.gen_range(1..=2), ..RandomParams::default() };
        let inst = random_instance(&mut r, &p);
        let mut customers: Vec<usize> = inst.customers().collect();
        customers.shuffle(&mut r);
        customers.truncate(r.gen_range(1..=customers.len()));
        let got = optimize_charging(&inst, &customers);
        let ok = match (got.as_ref().map(|r| r.duration), grid_best(&inst, &customers)) {
            (Some(g), Some(w)) => g <= w + 1e-9 && w - g <= GRID_TOL,
            (None, None) => true,
            // feasible only at dwell times off the grid
            (Some(_), None) => simulate_route(&inst, &got.unwrap().nodes).is_ok(),
            (None, Some(_)) => false,
        };
        if !ok {
            bad.push(seed);
        }
        seed += 1;
        checked += 1;
    }
    let took = start.elapsed();
    Verdict::check(
        bad.is_empty() && took < Duration::from_secs(300),
        format!("{}/200 sequences agree in {took:.1?}; failing seeds {bad:?}", 200 - bad.len()),
    )
}

fn linearization() -> Verdict {
    let Some(dir) = benchmark_dir() else { return not_run() };
    let config = BpcConfig { time_limit: Some(Duration::from_secs(15 * 60)), ..Default::default() };
    let (mut bad, mut over_infeasible) = (Vec::new(), 0);
    for (name, _) in TEN_CUSTOMER {
        let row = match load(&dir, name).and_then(|inst| linear_study(&inst, &config).map_err(|e| e.to_string())) {
            Ok(r) => r,
            Err(e) => {
                bad.push(e);
                continue;
            }
        };
        over_infeasible += row.over_infeasible;
        let Some(pwl) = row.pwl_cost else {
            bad.push(format!("{name}: no optimum"));
            continue;
        };
        let under_ok = row.under_reevaluated.map_or(row.under_infeasible > 0, |u| u >= pwl - ORACLE_TOL);
        let over_ok = row.over_cost.is_some_and(|o| o <= pwl + ORACLE_TOL);
        if !under_ok || !over_ok {
            bad.push(format!("{name}: under {:?} over {:?} pwl {pwl:.2}", row.under_reevaluated, row.over_cost));
        }
    }
    Verdict::check(
        bad.is_empty() && over_infeasible >= 1,
        format!("{over_infeasible} overestimated routes infeasible; violations {bad:?}"),
    )
}

fn main() {
    let suite = oracle_suite();
    let mut results = vec![
        ("1 (worked example)", worked_example()),
        ("2 (10-customer exact)", ten_customer_exact()),
        ("3 (20-customer exact)", twenty_customer_exact()),
        ("4 (cut effect)", cut_effect()),
    ];
    let (oracle, optima) = oracle_equivalence(&suite);
    results.push(("5 (oracle equivalence)", oracle));
    results.push(("6 (dominance ladder)", dominance_ladder(&suite)));
    results.push(("7a (tabu on benchmarks)", tabu_benchmark()));
    results.push(("7b (tabu on random instances)", tabu_random(&suite, &optima)));
    results.push(("8 (charging optimizer)", charging_oracle()));
    results.push(("9 (linearization study)", linearization()));
    results.push((
        "10 (property suites)",
        Verdict {
            status: Status::Delegated,
            detail: "10,000-case property tests in tests/pwl.rs and tests/charge.rs of this run".into(),
        },
    ));
    for (label, verdict) in &results {
        println!("criterion {label}: {verdict}");
    }
    if results.iter().any(|(_, v)| matches!(v.status, Status::Fail)) {
        std::process::exit(1);
    }
}

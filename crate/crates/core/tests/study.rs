mod common;

use evrpnl::bpc::BpcConfig;
use evrpnl::model::random::{random_instance, RandomParams};
use evrpnl::study::linear_study;

#[test]
fn linear_curves_bracket_the_piecewise_optimum() {
    let config = BpcConfig::default();
    let (mut rows, mut infeasible, mut under_failed) = (0, 0, 0);
    for seed in 0..12u64 {
        let p = RandomParams { customers: 5, stations: 2, segments: (3, 3), ..RandomParams::default() };
        let inst = random_instance(&mut common::rng(seed), &p);
        let row = linear_study(&inst, &config).unwrap();
        let Some(pwl) = row.pwl_cost else { continue };
        assert!(row.optimal);
        // replayed routes form a feasible solution, so they cannot beat the optimum
        if let Some(under) = row.under_reevaluated {
            assert!(under >= pwl - 1e-4, "seed {seed}: {under} < {pwl}");
        }
        under_failed += row.under_infeasible;
        // the extended first segment charges at least as fast
        let over = row.over_cost.unwrap();
        assert!(over <= pwl + 1e-4, "seed {seed}: {over} > {pwl}");
        assert!(row.over_gap_pct.unwrap() >= -1e-6);
        rows += 1;
        infeasible += row.over_infeasible;
    }
    println!("{rows} instances, {infeasible} overestimated and {under_failed} underestimated routes fail under true curves");
    assert!(rows >= 6);
}

#[test]
fn linear_instances_are_a_fixpoint() {
    for seed in 0..4u64 {
        let p = RandomParams { customers: 4, stations: 2, segments: (1, 1), ..RandomParams::default() };
        let inst = random_instance(&mut common::rng(seed), &p);
        let row = linear_study(&inst, &BpcConfig::default()).unwrap();
        assert_eq!(row.over_infeasible + row.under_infeasible, 0);
        if let Some(pwl) = row.pwl_cost {
            assert!((row.under_reevaluated.unwrap() - pwl).abs() < 1e-6);
            assert!((row.over_cost.unwrap() - pwl).abs() < 1e-6);
            assert!(row.over_gap_pct.unwrap().abs() < 1e-6);
        }
    }
}

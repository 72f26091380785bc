//! What a linear charging model costs compared with the piecewise-linear one.
//!
//! The instance is solved three times: with its own curves, with every curve
//! replaced by its underestimating chord, and with every curve replaced by
//! its overestimating first segment. Routes from the linear runs are then
//! replayed under the true curves.

use serde::Serialize;

use crate::bpc::{solve, BpcConfig, BpcError, SolveReport};
use crate::charge::simulate_route;
use crate::model::{linearize_curve, Instance, LinearMode, ModelError};

#[derive(Debug, Clone, Serialize)]
pub struct StudyRow {
    pub instance: String,
    pub pwl_cost: Option<f64>,
    /// Objective with underestimating linear curves.
    pub under_cost: Option<f64>,
    /// Routes of the underestimating run replayed under the true curves,
    /// when all of them replay.
    pub under_reevaluated: Option<f64>,
    /// The chord charges faster than the true curve at low charge, so these
    /// replays can fail too.
    pub under_infeasible: usize,
    pub over_cost: Option<f64>,
    pub over_routes: usize,
    /// Routes of the overestimating run that fail under the true curves.
    pub over_infeasible: usize,
    /// `(pwl − over) / pwl` in percent.
    pub over_gap_pct: Option<f64>,
    /// Every run finished with a proven optimum.
    pub optimal: bool,
}

impl StudyRow {
    pub const CSV_HEADER: &'static str =
        "Instance,PWL Cost,Under Cost,Under Re-evaluated,Under Infeasible,Over Cost,Over Routes,Over Infeasible,Over Gap (%)";

    pub fn csv_row(&self) -> String {
        let v = |x: Option<f64>| x.map_or_else(String::new, |x| format!("{x:.2}"));
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.instance,
            v(self.pwl_cost),
            v(self.under_cost),
            v(self.under_reevaluated),
            self.under_infeasible,
            v(self.over_cost),
            self.over_routes,
            self.over_infeasible,
            v(self.over_gap_pct)
        )
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StudyError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solve(#[from] BpcError),
}

pub fn linearized(inst: &Instance, mode: LinearMode) -> Result<Instance, ModelError> {
    let curves: Vec<_> = inst.stations().iter().map(|s| linearize_curve(&s.curve, mode)).collect();
    inst.with_curves(&curves)
}

/// Replays node sequences under `inst`. Returns the total duration of the
/// feasible ones and the number that fail.
fn replay(inst: &Instance, report: &SolveReport) -> (f64, usize, usize) {
    let Some(sol) = &report.solution else { return (0.0, 0, 0) };
    let mut total = 0.0;
    let mut failed = 0;
    for r in &sol.routes {
        match simulate_route(inst, &r.nodes) {
            Ok(r) => total += r.duration,
            Err(_) => failed += 1,
        }
    }
    (total, sol.routes.len(), failed)
}

pub fn linear_study(inst: &Instance, config: &BpcConfig) -> Result<StudyRow, StudyError> {
    let exact = solve(inst, config)?;
    let under = solve(&linearized(inst, LinearMode::Under)?, config)?;
    let over = solve(&linearized(inst, LinearMode::Over)?, config)?;

    let (under_total, _, under_failed) = replay(inst, &under);
    let (_, over_routes, over_infeasible) = replay(inst, &over);
    let gap = match (exact.ip_cost, over.ip_cost) {
        (Some(p), Some(o)) if p > 0.0 => Some((p - o) / p * 100.0),
        _ => None,
    };
    Ok(StudyRow {
        instance: inst.name.clone(),
        pwl_cost: exact.ip_cost,
        under_cost: under.ip_cost,
        under_reevaluated: under.ip_cost.filter(|_| under_failed == 0).map(|_| under_total),
        under_infeasible: under_failed,
        over_cost: over.ip_cost,
        over_routes,
        over_infeasible,
        over_gap_pct: gap,
        optimal: exact.optimal && under.optimal && over.optimal,
    })
}

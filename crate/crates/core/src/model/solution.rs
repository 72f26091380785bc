//! A full solution: one route per vehicle used.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{route_cost, Instance, Route, RouteViolation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub instance: String,
    pub routes: Vec<Route>,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolutionError {
    #[error("route {index}: {violation}")]
    Route { index: usize, violation: RouteViolation },
    #[error("route {index}: stated duration {stated:.6} differs from recomputed {actual:.6}")]
    RouteDuration { index: usize, stated: f64, actual: f64 },
    #[error("customer {0} is not served")]
    Unserved(usize),
    #[error("customer {0} is served by more than one route")]
    Duplicated(usize),
    #[error("{used} routes exceed the fleet of {fleet}")]
    Fleet { used: usize, fleet: usize },
    #[error("stated cost {stated:.6} differs from recomputed {actual:.6}")]
    Cost { stated: f64, actual: f64 },
    #[error("solution is for instance {found}, expected {expected}")]
    Instance { found: String, expected: String },
}

impl Solution {
    /// Builds a solution, dropping routes without customers.
    pub fn new(inst: &Instance, routes: Vec<Route>) -> Self {
        let routes: Vec<Route> = routes.into_iter().filter(|r| r.customers(inst).next().is_some()).collect();
        let cost = routes.iter().map(|r| r.duration).sum();
        Self { instance: inst.name.clone(), routes, cost }
    }

    /// Re-checks every route and its stated duration by replaying its
    /// charging plan, then the partition of the customers, the fleet bound
    /// and the total cost. Returns the recomputed cost.
    pub fn validate(&self, inst: &Instance) -> Result<f64, SolutionError> {
        if self.instance != inst.name {
            return Err(SolutionError::Instance { found: self.instance.clone(), expected: inst.name.clone() });
        }
        let mut served = vec![false; inst.n_nodes()];
        let mut total = 0.0;
        let mut used = 0;
        for (index, route) in self.routes.iter().enumerate() {
            let actual = route_cost(inst, route).map_err(|violation| SolutionError::Route { index, violation })?;
            if (actual - route.duration).abs() > 1e-4 {
                return Err(SolutionError::RouteDuration { index, stated: route.duration, actual });
            }
            total += actual;
            let mut any = false;
            for i in route.customers(inst) {
                if std::mem::replace(&mut served[i], true) {
                    return Err(SolutionError::Duplicated(i));
                }
                any = true;
            }
            used += usize::from(any);
        }
        if let Some(i) = inst.customers().find(|&i| !served[i]) {
            return Err(SolutionError::Unserved(i));
        }
        if used > inst.fleet {
            return Err(SolutionError::Fleet { used, fleet: inst.fleet });
        }
        if (total - self.cost).abs() > 1e-4 {
            return Err(SolutionError::Cost { stated: self.cost, actual: total });
        }
        Ok(total)
    }
}

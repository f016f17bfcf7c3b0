//! Single-depot routing: a savings + local-search heuristic used for
//! label generation and final routing, and an exact enumerator for
//! tiny instances.

mod exact;
pub use heuristic::{iteration_budget_for, EVALS_PER_SECOND};
mod heuristic;
mod local_search;

pub use exact::solve_exact;
pub use heuristic::solve_heuristic;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instances::types::{CvrpInstance, Route};

/// Local-search move families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LocalSearchOp {
    TwoOpt,
    Relocate,
    Swap,
    InterRouteTwoOptStar,
}

pub const ALL_OPS: [LocalSearchOp; 4] = [
    LocalSearchOp::TwoOpt,
    LocalSearchOp::Relocate,
    LocalSearchOp::Swap,
    LocalSearchOp::InterRouteTwoOptStar,
];

/// Solver stopping and search parameters.
///
/// When `iteration_budget` is set the solver stops after that many
/// candidate-move evaluations instead of consulting the clock, which
/// makes runs reproducible; wall-clock mode is for benchmarks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    pub time_limit: f64,
    pub iteration_budget: Option<u64>,
    pub ops: Vec<LocalSearchOp>,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            time_limit: 1.0,
            iteration_budget: None,
            ops: ALL_OPS.to_vec(),
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn deterministic(budget: u64, seed: u64) -> Self {
        SolverConfig {
            // Finite sentinel (JSON has no infinity); the iteration
            // budget governs stopping in this mode.
            time_limit: 1e9,
            iteration_budget: Some(budget),
            ops: ALL_OPS.to_vec(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.time_limit > 0.0) {
            return Err(Error::Config("time limit must be positive".into()));
        }
        if self.ops.is_empty() {
            return Err(Error::Config("at least one local-search op required".into()));
        }
        Ok(())
    }
}

/// Result of a single-depot solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvrpResult {
    pub routes: Vec<Route>,
    pub cost: f64,
    pub elapsed: f64,
}

/// Recompute the cost of a route set against an instance, rejecting
/// any feasibility violation by name.
pub fn evaluate_solution(inst: &CvrpInstance, routes: &[Vec<usize>]) -> Result<f64> {
    if let Some(limit) = inst.fleet_limit {
        if routes.len() > limit as usize {
            return Err(Error::InvalidSolution(format!(
                "fleet overflow: {} routes exceed the {} available vehicles",
                routes.len(),
                limit
            )));
        }
    }
    let mut seen = vec![false; inst.n()];
    let mut total = 0.0;
    for route in routes {
        if route.is_empty() {
            return Err(Error::InvalidSolution("empty route".into()));
        }
        let mut load = 0u64;
        let mut prev = inst.depot;
        for &c in route {
            let cust = inst
                .customers
                .get(c)
                .ok_or_else(|| Error::InvalidSolution(format!("unknown customer {c}")))?;
            if seen[c] {
                return Err(Error::InvalidSolution(format!(
                    "duplicate customer: {c} appears in more than one position"
                )));
            }
            seen[c] = true;
            load += cust.demand as u64;
            total += prev.dist(&cust.pos);
            prev = cust.pos;
        }
        total += prev.dist(&inst.depot);
        if load > inst.capacity as u64 {
            return Err(Error::InvalidSolution(format!(
                "capacity violation: route load {load} exceeds capacity {}",
                inst.capacity
            )));
        }
    }
    if let Some(c) = seen.iter().position(|&s| !s) {
        return Err(Error::InvalidSolution(format!("customer {c} is unserved")));
    }
    Ok(total)
}

pub(crate) fn routes_with_stats(inst: &CvrpInstance, routes: Vec<Vec<usize>>) -> Vec<Route> {
    routes
        .into_iter()
        .map(|customers| {
            let load = customers
                .iter()
                .map(|&c| inst.customers[c].demand as u64)
                .sum();
            let mut cost = 0.0;
            let mut prev = inst.depot;
            for &c in &customers {
                cost += prev.dist(&inst.customers[c].pos);
                prev = inst.customers[c].pos;
            }
            cost += prev.dist(&inst.depot);
            Route {
                customers,
                load,
                cost,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Point;
    use crate::instances::types::Customer;

    fn inst_line(demands: &[u32], capacity: u32) -> CvrpInstance {
        let customers = demands
            .iter()
            .enumerate()
            .map(|(i, &q)| Customer {
                pos: Point::new((i + 1) as f64 * 10.0, 0.0),
                demand: q,
            })
            .collect();
        CvrpInstance::new(Point::new(0.0, 0.0), customers, capacity, None).unwrap()
    }

    #[test]
    fn evaluate_matches_hand_cost() {
        let inst = inst_line(&[5, 5, 5], 20);
        let cost = evaluate_solution(&inst, &[vec![0, 1], vec![2]]).unwrap();
        // depot->10->20->depot = 10+10+20, depot->30->depot = 60.
        assert!((cost - 100.0).abs() < 1e-12);
    }

    #[test]
    fn evaluate_names_capacity_violation() {
        let inst = inst_line(&[5, 5, 5], 9);
        let err = evaluate_solution(&inst, &[vec![0, 1], vec![2]]).unwrap_err();
        assert!(err.to_string().contains("capacity violation"));
    }

    #[test]
    fn evaluate_names_duplicates_and_fleet() {
        let inst = inst_line(&[5, 5], 10);
        let err = evaluate_solution(&inst, &[vec![0], vec![0, 1]]).unwrap_err();
        assert!(err.to_string().contains("duplicate customer"));

        let mut limited = inst_line(&[5, 5], 10);
        limited.fleet_limit = Some(1);
        let err = evaluate_solution(&limited, &[vec![0], vec![1]]).unwrap_err();
        assert!(err.to_string().contains("fleet overflow"));
    }

    #[test]
    fn evaluate_requires_every_customer() {
        let inst = inst_line(&[5, 5], 10);
        let err = evaluate_solution(&inst, &[vec![0]]).unwrap_err();
        assert!(err.to_string().contains("unserved"));
    }
}

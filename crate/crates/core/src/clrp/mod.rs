//! Location-routing extension: depot-opening decisions ride on the
//! assignment chromosome (a depot is open exactly when it serves a
//! customer), fitness adds opening costs and a vehicle-count lower
//! bound, and the trained multi-depot predictor is reused unchanged.

pub mod io;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::CostEstimator;
use crate::ga::{
    finalize, run_ga, DecompositionProblem, EvolveOutcome, PipelineConfig,
};
use crate::geom::Point;
use crate::instances::types::{ClrpInstance, RoutingSolution};

/// Dual chromosome: depot-open bits plus per-customer assignments.
/// The open vector is always the decode of the genes: exactly the
/// depots that serve at least one customer are open.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClrpChromosome {
    pub open: Vec<bool>,
    pub genes: Vec<usize>,
}

impl ClrpChromosome {
    pub fn from_genes(genes: Vec<usize>, num_depots: usize) -> Self {
        let mut open = vec![false; num_depots];
        for &g in &genes {
            open[g] = true;
        }
        ClrpChromosome { open, genes }
    }
}

/// Deterministic fitness ingredients of an assignment (the routing
/// prediction comes from the estimator and is not included here).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClrpFitnessTerms {
    pub depot_opening: f64,
    /// f times the per-depot vehicle lower bound ceil(load/Q).
    pub vehicle_opening_bound: f64,
    pub capacity_violation: f64,
}

/// Opening costs plus the vehicle-opening estimate for an assignment.
pub fn fitness_terms(inst: &ClrpInstance, genes: &[usize]) -> ClrpFitnessTerms {
    let loads = inst.loads(genes);
    let mut depot_opening = 0.0;
    let mut vehicle_bound = 0u64;
    for (d, &l) in loads.iter().enumerate() {
        if l > 0 {
            depot_opening += inst.depot_opening_costs[d];
            vehicle_bound += (l + inst.vehicle_capacity as u64 - 1) / inst.vehicle_capacity as u64;
        }
    }
    ClrpFitnessTerms {
        depot_opening,
        vehicle_opening_bound: inst.route_opening_cost * vehicle_bound as f64,
        capacity_violation: inst.total_overload(&loads),
    }
}

impl DecompositionProblem for ClrpInstance {
    fn num_depots(&self) -> usize {
        self.depots.len()
    }
    fn num_customers(&self) -> usize {
        self.customers.len()
    }
    fn depot_pos(&self, d: usize) -> Point {
        self.depots[d]
    }
    fn customer_pos(&self, i: usize) -> Point {
        self.customers[i].pos
    }
    fn customer_demand(&self, i: usize) -> u64 {
        self.customers[i].demand as u64
    }
    fn vehicle_capacity(&self) -> u32 {
        self.vehicle_capacity
    }
    fn depot_capacity(&self, d: usize) -> f64 {
        self.depot_capacities[d]
    }
    fn extra_cost(&self, loads: &[u64]) -> f64 {
        let mut extra = 0.0;
        for (d, &l) in loads.iter().enumerate() {
            if l > 0 {
                extra += self.depot_opening_costs[d];
                let bound = (l + self.vehicle_capacity as u64 - 1) / self.vehicle_capacity as u64;
                extra += self.route_opening_cost * bound as f64;
            }
        }
        extra
    }
    fn final_fleet_limit(&self, _d: usize) -> Option<u32> {
        None // vehicles are unbounded; each route pays the opening cost
    }
    fn final_opening_cost(&self, loads: &[u64], route_counts: &[usize]) -> f64 {
        let mut cost = 0.0;
        for (d, &l) in loads.iter().enumerate() {
            if l > 0 {
                cost += self.depot_opening_costs[d];
            }
        }
        cost + self.route_opening_cost * route_counts.iter().sum::<usize>() as f64
    }
    fn cover_ok(&self, loads: &[u64]) -> bool {
        let open_capacity: f64 = loads
            .iter()
            .enumerate()
            .filter(|&(_, &l)| l > 0)
            .map(|(d, _)| self.depot_capacities[d])
            .sum();
        open_capacity >= self.total_demand() as f64
    }
}

/// Location-routing solve result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClrpResult {
    pub chromosome: ClrpChromosome,
    pub predicted_cost: f64,
    pub actual_cost: f64,
    pub solution: RoutingSolution,
    pub generations: usize,
    pub candidates_routed: usize,
}

/// Search candidate depot sets and assignments with the shared engine.
pub fn clrp_evolve(
    inst: &ClrpInstance,
    estimator: &dyn CostEstimator,
    cfg: &crate::ga::GaConfig,
) -> Result<EvolveOutcome> {
    check_total_capacity(inst)?;
    run_ga(inst, estimator, cfg)
}

fn check_total_capacity(inst: &ClrpInstance) -> Result<()> {
    let total_cap: f64 = inst.depot_capacities.iter().sum();
    if total_cap < inst.total_demand() as f64 {
        return Err(Error::Infeasible(format!(
            "total depot capacity {total_cap} cannot hold total demand {}",
            inst.total_demand()
        )));
    }
    Ok(())
}

/// Full pipeline: genetic search with opening-aware fitness, then
/// routing of the open-depot subproblems. Total cost is routing plus
/// depot opening plus per-route opening.
pub fn clrp_solve(
    inst: &ClrpInstance,
    estimator: &dyn CostEstimator,
    cfg: &PipelineConfig,
) -> Result<ClrpResult> {
    check_total_capacity(inst)?;
    let outcome = run_ga(inst, estimator, &cfg.ga)?;
    let report = finalize(inst, &outcome.candidates, estimator, cfg)?;
    let chromosome = ClrpChromosome::from_genes(report.assignment.clone(), inst.num_depots());
    let result = ClrpResult {
        predicted_cost: report.predicted,
        actual_cost: report.solution.total_cost,
        chromosome,
        solution: report.solution,
        generations: outcome.generations_run,
        candidates_routed: report.candidate_actuals.len(),
    };
    validate_clrp_solution(inst, &result.solution)?;
    Ok(result)
}

/// Feasibility and cost consistency of a location-routing solution:
/// structural route checks, depot holding capacities, and the opening
/// cost recomputation, all to 1e-9 relative.
pub fn validate_clrp_solution(inst: &ClrpInstance, sol: &RoutingSolution) -> Result<()> {
    sol.validate_inner(&inst.depots, &inst.customers, inst.vehicle_capacity, None)?;
    let mut opening = 0.0;
    for (d, routes) in sol.routes_per_depot.iter().enumerate() {
        if routes.is_empty() {
            continue;
        }
        let load: u64 = routes.iter().map(|r| r.load).sum();
        if (load as f64) > inst.depot_capacities[d] {
            return Err(Error::InvalidSolution(format!(
                "depot {d} holds load {load} above its capacity {}",
                inst.depot_capacities[d]
            )));
        }
        opening += inst.depot_opening_costs[d];
        opening += inst.route_opening_cost * routes.len() as f64;
    }
    if (opening - sol.opening_cost).abs() > 1e-9 * opening.abs().max(1.0) {
        return Err(Error::InvalidSolution(format!(
            "stored opening cost {} disagrees with recomputed {opening}",
            sol.opening_cost
        )));
    }
    Ok(())
}

/// Embed a multi-depot instance as a trivial location-routing one
/// (free openings, uncapacitated depots).
pub fn mdvrp_as_clrp(inst: &crate::instances::types::MdvrpInstance) -> ClrpInstance {
    ClrpInstance {
        depots: inst.depots.clone(),
        customers: inst.customers.clone(),
        vehicle_capacity: inst.capacity,
        depot_capacities: vec![f64::INFINITY; inst.depots.len()],
        depot_opening_costs: vec![0.0; inst.depots.len()],
        route_opening_cost: 0.0,
    }
}

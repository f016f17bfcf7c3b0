//! Genetic search over customer-to-depot assignments. Fitness combines
//! predicted subproblem costs, a population-diversity bonus, and a
//! capacity penalty; the final stage routes the best candidates with
//! the built-in solver.
//!
//! The engine is generic over [`DecompositionProblem`] so the
//! multi-depot and location-routing pipelines share one code path;
//! location-routing differences are value-driven (opening costs, depot
//! capacities) and vanish when those values are trivial.

mod engine;
mod ops;

pub use engine::{
    evolve, finalize, run_ga, solve_mdvrp, table3_time_limit, Candidate, EvolveOutcome,
    FinalizeReport, PipelineConfig, PipelineResult,
};
pub use ops::{
    diversity, evaluate_population, initial_population, nearest_depot_genes, repair_population,
    second_nearest_genes, select_parents, targeted_seeds, uniform_crossover, EvalCache,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Point;
use crate::instances::types::{CvrpInstance, MdvrpInstance};

/// Weights of the fitness terms: normalized cost, diversity bonus, and
/// the cost-scaled capacity penalty.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FitnessWeights {
    pub cost: f64,
    pub diversity: f64,
    pub penalty: f64,
}

impl Default for FitnessWeights {
    fn default() -> Self {
        FitnessWeights {
            cost: 1.0,
            diversity: 0.3,
            penalty: 2.0,
        }
    }
}

/// Search parameters. Population size stays within
/// `[pop_low, pop_high]`; fractions follow the reference settings
/// (5% of genes mutated on the best tertile, targeted copies on 5% of
/// children over 10% of positions, top 1% preserved).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaConfig {
    pub pop_low: usize,
    pub pop_high: usize,
    pub generations: usize,
    pub stall_limit: usize,
    pub p_repair: f64,
    /// Probability that a mutated gene is reset (FLIP) rather than
    /// exchanged with another customer's gene (SWAP).
    pub p_flip: f64,
    pub mutation_fraction: f64,
    pub targeted_fraction: f64,
    pub gene_copy_fraction: f64,
    pub elite_fraction: f64,
    pub weights: FitnessWeights,
    pub top_k: usize,
    /// Route the nearest-depot assignment alongside the top candidates
    /// whenever it is capacity-feasible.
    pub inject_nda: bool,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            pop_low: 60,
            pop_high: 100,
            generations: 150,
            stall_limit: 30,
            p_repair: 0.8,
            p_flip: 0.5,
            mutation_fraction: 0.05,
            targeted_fraction: 0.05,
            gene_copy_fraction: 0.10,
            elite_fraction: 0.01,
            weights: FitnessWeights::default(),
            top_k: 5,
            inject_nda: true,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pop_low == 0 || self.pop_low > self.pop_high {
            return Err(Error::Config(
                "population bounds must satisfy 0 < low <= high".into(),
            ));
        }
        for (name, v) in [
            ("p_repair", self.p_repair),
            ("p_flip", self.p_flip),
            ("mutation_fraction", self.mutation_fraction),
            ("targeted_fraction", self.targeted_fraction),
            ("gene_copy_fraction", self.gene_copy_fraction),
            ("elite_fraction", self.elite_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0,1], got {v}")));
            }
        }
        if self.weights.cost < 0.0 || self.weights.diversity < 0.0 || self.weights.penalty < 0.0 {
            return Err(Error::Config("fitness weights must be nonnegative".into()));
        }
        if self.top_k == 0 {
            return Err(Error::Config("top_k must be positive".into()));
        }
        Ok(())
    }
}

/// One population member with its cached evaluation.
#[derive(Debug, Clone)]
pub struct Individual {
    pub genes: Vec<usize>,
    /// Sum of predicted subproblem costs.
    pub predicted: f64,
    /// Cost terms beyond routing (opening costs; zero for multi-depot).
    pub extra: f64,
    /// Total capacity violation across depots.
    pub overload: f64,
    pub diversity: f64,
    pub fitness: f64,
}

impl Individual {
    pub fn new(genes: Vec<usize>) -> Self {
        Individual {
            genes,
            predicted: f64::NAN,
            extra: 0.0,
            overload: 0.0,
            diversity: 0.0,
            fitness: f64::NAN,
        }
    }

    /// Ranking cost: predicted routing plus extra terms.
    pub fn total(&self) -> f64 {
        self.predicted + self.extra
    }

    pub fn is_evaluated(&self) -> bool {
        !self.predicted.is_nan()
    }
}

/// The assignment problem the genetic engine operates on.
pub trait DecompositionProblem: Sync {
    fn num_depots(&self) -> usize;
    fn num_customers(&self) -> usize;
    fn depot_pos(&self, d: usize) -> Point;
    fn customer_pos(&self, i: usize) -> Point;
    fn customer_demand(&self, i: usize) -> u64;
    fn vehicle_capacity(&self) -> u32;

    /// Per-depot load bound used by repair and the fitness penalty:
    /// fleet capacity for multi-depot routing, holding capacity for
    /// location-routing. Infinite means unconstrained.
    fn depot_capacity(&self, d: usize) -> f64;

    /// Cost terms beyond predicted routing, from the per-depot loads
    /// (a depot is open exactly when its load is positive).
    fn extra_cost(&self, loads: &[u64]) -> f64;

    /// Fleet bound handed to the final routing stage.
    fn final_fleet_limit(&self, d: usize) -> Option<u32>;

    /// Opening costs of a routed solution, from loads and per-depot
    /// route counts.
    fn final_opening_cost(&self, loads: &[u64], route_counts: &[usize]) -> f64;

    /// Whether an assignment is admissible at construction time
    /// (location-routing requires the open depots to cover total
    /// demand). The engine patches individuals that fail.
    fn cover_ok(&self, loads: &[u64]) -> bool {
        let _ = loads;
        true
    }

    /// Single-depot subproblem for prediction (no fleet bound; the
    /// predictor is capacity-only).
    fn subproblem(&self, depot: usize, members: &[usize]) -> CvrpInstance {
        let customers = members
            .iter()
            .map(|&i| crate::instances::types::Customer {
                pos: self.customer_pos(i),
                demand: self.customer_demand(i) as u32,
            })
            .collect();
        CvrpInstance::new(
            self.depot_pos(depot),
            customers,
            self.vehicle_capacity(),
            None,
        )
        .expect("subproblem construction from a valid parent instance")
    }

    /// Per-depot loads of an assignment.
    fn loads(&self, genes: &[usize]) -> Vec<u64> {
        let mut loads = vec![0u64; self.num_depots()];
        for (i, &d) in genes.iter().enumerate() {
            loads[d] += self.customer_demand(i);
        }
        loads
    }

    /// Total capacity violation of an assignment.
    fn total_overload(&self, loads: &[u64]) -> f64 {
        loads
            .iter()
            .enumerate()
            .map(|(d, &l)| (l as f64 - self.depot_capacity(d)).max(0.0))
            .sum()
    }
}

impl DecompositionProblem for MdvrpInstance {
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
        self.capacity
    }
    fn depot_capacity(&self, d: usize) -> f64 {
        self.depot_fleet_capacity(d) as f64
    }
    fn extra_cost(&self, _loads: &[u64]) -> f64 {
        0.0
    }
    fn final_fleet_limit(&self, d: usize) -> Option<u32> {
        Some(self.vehicles_per_depot[d])
    }
    fn final_opening_cost(&self, _loads: &[u64], _route_counts: &[usize]) -> f64 {
        0.0
    }
}

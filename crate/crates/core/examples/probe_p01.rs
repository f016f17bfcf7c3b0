//! Probe: drive the search with the routing heuristic itself as the
//! cost oracle to see what assignment quality is reachable on p01.
use hvrp_core::cvrp::{solve_heuristic, SolverConfig};
use hvrp_core::estimators::CostEstimator;
use hvrp_core::ga::{solve_mdvrp, GaConfig, PipelineConfig};
use hvrp_core::instances::{load_mdvrp, CvrpInstance};
use rayon::prelude::*;

struct HeuristicOracle {
    budget: u64,
}
impl CostEstimator for HeuristicOracle {
    fn estimate_batch(&self, instances: &[CvrpInstance]) -> Vec<f64> {
        instances
            .par_iter()
            .map(|inst| {
                let mut unlimited = inst.clone();
                unlimited.fleet_limit = None;
                solve_heuristic(&unlimited, &SolverConfig::deterministic(self.budget, 7))
                    .map(|r| r.cost)
                    .unwrap_or(f64::INFINITY)
            })
            .collect()
    }
}

fn main() {
    let inst = load_mdvrp("data/cordeau/p01-n50-d4.txt").unwrap();
    let oracle = HeuristicOracle { budget: 40_000 };
    for seed in [1u64, 2, 3, 4, 5] {
        let cfg = PipelineConfig {
            ga: GaConfig {
                pop_low: 60,
                pop_high: 100,
                generations: 150,
                stall_limit: 40,
                top_k: 8,
                seed,
                ..GaConfig::default()
            },
            deterministic: true,
            solver_time_factor: 20.0,
        };
        let res = solve_mdvrp(&inst, &oracle, &cfg).unwrap();
        println!(
            "seed {seed}: predicted {:.2} actual {:.2} (gap to 576.87: {:.2}%)",
            res.predicted_cost,
            res.actual_cost,
            (res.actual_cost - 576.87) / 576.87 * 100.0
        );
    }
}

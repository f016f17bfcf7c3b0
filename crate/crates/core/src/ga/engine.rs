use std::collections::HashSet;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cvrp::{iteration_budget_for, solve_heuristic, CvrpResult, SolverConfig, ALL_OPS};
use crate::error::{Error, Result};
use crate::estimators::CostEstimator;
use crate::geom::derive_seed;
use crate::instances::types::{MdvrpInstance, Route, RoutingSolution};

use super::ops::{
    depot_groups, evaluate_population, initial_population, mutate_population,
    nearest_depot_genes, repair_population, select_parents, targeted_seeds, uniform_crossover,
    EvalCache,
};
use super::{DecompositionProblem, GaConfig, Individual};

/// An assignment candidate surviving the search, ranked by predicted
/// total cost.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Candidate {
    pub genes: Vec<usize>,
    pub predicted: f64,
    pub extra: f64,
    pub overload: f64,
}

impl Candidate {
    pub fn total(&self) -> f64 {
        self.predicted + self.extra
    }
}

/// Outcome of the assignment search.
#[derive(Debug, Clone)]
pub struct EvolveOutcome {
    /// Candidates ranked by predicted total cost, best first.
    pub candidates: Vec<Candidate>,
    pub generations_run: usize,
    /// Best predicted total after initialization and after each
    /// generation; non-increasing by elitism.
    pub best_history: Vec<f64>,
}

/// Reference time limit for the final routing stage, by approximate
/// subproblem size N/D.
pub fn table3_time_limit(customers: usize, depots: usize) -> f64 {
    let ratio = customers as f64 / depots.max(1) as f64;
    if ratio < 100.0 {
        0.1
    } else if ratio < 200.0 {
        1.0
    } else {
        2.0
    }
}

fn archive_merge(archive: &mut Vec<Candidate>, pop: &[Individual], cap: usize) {
    for ind in pop {
        if !ind.is_evaluated() {
            continue;
        }
        if archive.iter().any(|c| c.genes == ind.genes) {
            continue;
        }
        archive.push(Candidate {
            genes: ind.genes.clone(),
            predicted: ind.predicted,
            extra: ind.extra,
            overload: ind.overload,
        });
    }
    archive.sort_by(|a, b| {
        a.total()
            .partial_cmp(&b.total())
            .unwrap()
            .then_with(|| a.genes.cmp(&b.genes))
    });
    archive.truncate(cap);
}

/// The generational loop: tournament selection, uniform crossover,
/// probabilistic repair, mutations, and survivor selection with top-1%
/// elitism, evaluated through the batched estimator with duplicate
/// elimination. Stops after `generations` rounds or once the best
/// predicted cost stalls.
pub fn run_ga<P: DecompositionProblem>(
    problem: &P,
    estimator: &dyn CostEstimator,
    cfg: &GaConfig,
) -> Result<EvolveOutcome> {
    cfg.validate()?;
    if problem.num_customers() == 0 || problem.num_depots() == 0 {
        return Err(Error::Config("empty problem".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut cache = EvalCache::new();
    let elites_pool = targeted_seeds(problem);

    let mut pop = initial_population(problem, cfg, &mut rng);
    repair_population(problem, &mut pop, cfg.p_repair, &mut rng);
    evaluate_population(problem, &mut pop, estimator, &cfg.weights, &mut cache);

    let archive_cap = (4 * cfg.top_k).max(32);
    let mut archive: Vec<Candidate> = Vec::new();
    archive_merge(&mut archive, &pop, archive_cap);
    let mut best_history = vec![archive[0].total()];
    let mut stall = 0usize;
    let mut generations_run = 0usize;

    for _ in 0..cfg.generations {
        if stall >= cfg.stall_limit {
            break;
        }
        generations_run += 1;

        // Offspring: unique gene vectors via uniform crossover.
        let mut seen: HashSet<Vec<usize>> = HashSet::new();
        let mut children: Vec<Individual> = Vec::with_capacity(cfg.pop_low);
        let mut attempts = 0usize;
        while children.len() < cfg.pop_low && attempts < 20 * cfg.pop_low {
            attempts += 1;
            let (a, b) = select_parents(&pop, &mut rng);
            let genes = uniform_crossover(&pop[a].genes, &pop[b].genes, &mut rng);
            if seen.insert(genes.clone()) {
                children.push(Individual::new(genes));
            }
        }
        repair_population(problem, &mut children, cfg.p_repair, &mut rng);
        evaluate_population(problem, &mut children, estimator, &cfg.weights, &mut cache);
        mutate_population(problem, &mut children, &elites_pool, cfg, &mut rng);

        // Survivors: children plus the previous generation's elite and
        // its best-cost member, deduplicated, best fitness first.
        let elite_count = ((pop.len() as f64 * cfg.elite_fraction).ceil() as usize).max(1);
        let mut by_fitness: Vec<usize> = (0..pop.len()).collect();
        by_fitness.sort_by(|&a, &b| {
            pop[a]
                .fitness
                .partial_cmp(&pop[b].fitness)
                .unwrap()
                .then(a.cmp(&b))
        });
        let best_total_idx = (0..pop.len())
            .min_by(|&a, &b| {
                pop[a]
                    .total()
                    .partial_cmp(&pop[b].total())
                    .unwrap()
                    .then(a.cmp(&b))
            })
            .unwrap();
        let mut pool = children;
        let mut keep: Vec<usize> = by_fitness[..elite_count.min(pop.len())].to_vec();
        if !keep.contains(&best_total_idx) {
            keep.push(best_total_idx);
        }
        for idx in keep {
            pool.push(pop[idx].clone());
        }
        let mut unique: HashSet<Vec<usize>> = HashSet::new();
        pool.retain(|ind| unique.insert(ind.genes.clone()));
        evaluate_population(problem, &mut pool, estimator, &cfg.weights, &mut cache);

        pool.sort_by(|a, b| {
            a.fitness
                .partial_cmp(&b.fitness)
                .unwrap()
                .then_with(|| a.genes.cmp(&b.genes))
        });
        if pool.len() > cfg.pop_high {
            // Keep the best-cost member through truncation.
            let best_idx = (0..pool.len())
                .min_by(|&a, &b| {
                    pool[a]
                        .total()
                        .partial_cmp(&pool[b].total())
                        .unwrap()
                        .then(a.cmp(&b))
                })
                .unwrap();
            if best_idx >= cfg.pop_high {
                let best = pool[best_idx].clone();
                pool.truncate(cfg.pop_high);
                *pool.last_mut().unwrap() = best;
            } else {
                pool.truncate(cfg.pop_high);
            }
        }
        pop = pool;
        // Tiny search spaces can dedup the pool below selection's needs.
        if pop.len() < 2 {
            let n = problem.num_customers();
            let d = problem.num_depots();
            while pop.len() < 2 {
                let genes: Vec<usize> = (0..n).map(|_| rng.gen_range(0..d)).collect();
                pop.push(Individual::new(genes));
            }
            evaluate_population(problem, &mut pop, estimator, &cfg.weights, &mut cache);
        }

        archive_merge(&mut archive, &pop, archive_cap);
        let best_now = archive[0].total();
        let prev = *best_history.last().unwrap();
        if best_now < prev - 1e-12 {
            stall = 0;
        } else {
            stall += 1;
        }
        best_history.push(best_now);
    }

    Ok(EvolveOutcome {
        candidates: archive,
        generations_run,
        best_history,
    })
}

/// Search a multi-depot instance and return ranked assignment
/// candidates.
pub fn evolve(
    inst: &MdvrpInstance,
    estimator: &dyn CostEstimator,
    cfg: &GaConfig,
) -> Result<EvolveOutcome> {
    run_ga(inst, estimator, cfg)
}

/// End-to-end pipeline settings. In deterministic mode the routing
/// stage runs on iteration budgets derived from the reference time
/// limits; wall-clock mode is for benchmarking.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub ga: GaConfig,
    pub deterministic: bool,
    /// Scales the reference per-subproblem time limits.
    pub solver_time_factor: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            ga: GaConfig::default(),
            deterministic: true,
            solver_time_factor: 1.0,
        }
    }
}

/// Routing outcome for the candidate list.
#[derive(Debug, Clone)]
pub struct FinalizeReport {
    pub solution: RoutingSolution,
    pub assignment: Vec<usize>,
    /// Predicted total of the routed best candidate.
    pub predicted: f64,
    /// Actual cost per examined candidate (None where routing was
    /// infeasible).
    pub candidate_actuals: Vec<Option<f64>>,
}

/// Route the top candidates with the built-in solver and keep the
/// cheapest feasible result. The nearest-depot assignment is examined
/// too when the config asks for it and it fits the capacity bounds.
pub fn finalize<P: DecompositionProblem>(
    problem: &P,
    candidates: &[Candidate],
    estimator: &dyn CostEstimator,
    cfg: &PipelineConfig,
) -> Result<FinalizeReport> {
    if candidates.is_empty() {
        return Err(Error::Config("no candidates to route".into()));
    }
    let mut picked: Vec<Candidate> = candidates.iter().take(cfg.ga.top_k).cloned().collect();
    if cfg.ga.inject_nda {
        let nda = nearest_depot_genes(problem);
        let loads = problem.loads(&nda);
        if problem.total_overload(&loads) == 0.0 && !picked.iter().any(|c| c.genes == nda) {
            let groups = depot_groups(problem, &nda);
            let instances: Vec<_> = groups
                .iter()
                .map(|(d, members)| problem.subproblem(*d, members))
                .collect();
            let predicted = estimator.estimate_batch(&instances).iter().sum();
            picked.push(Candidate {
                genes: nda.clone(),
                predicted,
                extra: problem.extra_cost(&loads),
                overload: 0.0,
            });
        }
    }

    let time_limit =
        table3_time_limit(problem.num_customers(), problem.num_depots()) * cfg.solver_time_factor;
    let budget = cfg.deterministic.then(|| iteration_budget_for(time_limit));

    struct Task {
        candidate: usize,
        depot: usize,
        members: Vec<usize>,
    }
    let mut tasks = Vec::new();
    for (ci, cand) in picked.iter().enumerate() {
        for (depot, members) in depot_groups(problem, &cand.genes) {
            tasks.push(Task {
                candidate: ci,
                depot,
                members,
            });
        }
    }
    let solves: Vec<Result<CvrpResult>> = tasks
        .par_iter()
        .map(|t| {
            let mut inst = problem.subproblem(t.depot, &t.members);
            inst.fleet_limit = problem.final_fleet_limit(t.depot);
            let solver = SolverConfig {
                time_limit,
                iteration_budget: budget,
                ops: ALL_OPS.to_vec(),
                seed: derive_seed(cfg.ga.seed, &[0xF17A1, t.candidate as u64, t.depot as u64]),
            };
            solve_heuristic(&inst, &solver)
        })
        .collect();

    let mut actuals: Vec<Option<f64>> = vec![Some(0.0); picked.len()];
    let mut routed: Vec<Vec<Vec<Route>>> =
        vec![vec![Vec::new(); problem.num_depots()]; picked.len()];
    let mut route_counts: Vec<Vec<usize>> = vec![vec![0; problem.num_depots()]; picked.len()];
    for (task, solve) in tasks.iter().zip(solves) {
        match solve {
            Ok(res) => {
                if let Some(total) = &mut actuals[task.candidate] {
                    *total += res.cost;
                }
                route_counts[task.candidate][task.depot] = res.routes.len();
                // Map subproblem customer ids back to the parent's.
                routed[task.candidate][task.depot] = res
                    .routes
                    .into_iter()
                    .map(|r| Route {
                        customers: r.customers.iter().map(|&c| task.members[c]).collect(),
                        load: r.load,
                        cost: r.cost,
                    })
                    .collect();
            }
            Err(_) => actuals[task.candidate] = None,
        }
    }
    for (ci, cand) in picked.iter().enumerate() {
        if let Some(total) = &mut actuals[ci] {
            let loads = problem.loads(&cand.genes);
            *total += problem.final_opening_cost(&loads, &route_counts[ci]);
        }
    }

    let best = (0..picked.len())
        .filter(|&i| actuals[i].is_some())
        .min_by(|&a, &b| actuals[a].partial_cmp(&actuals[b]).unwrap().then(a.cmp(&b)))
        .ok_or_else(|| {
            Error::Infeasible("every candidate failed the final routing stage".into())
        })?;

    let routing_cost: f64 = routed[best]
        .iter()
        .flat_map(|routes| routes.iter().map(|r| r.cost))
        .sum();
    let opening_cost = actuals[best].unwrap() - routing_cost;
    let solution = RoutingSolution {
        routes_per_depot: routed.swap_remove(best),
        routing_cost,
        opening_cost,
        total_cost: routing_cost + opening_cost,
    };
    Ok(FinalizeReport {
        assignment: picked[best].genes.clone(),
        predicted: picked[best].total(),
        solution,
        candidate_actuals: actuals,
    })
}

/// Full pipeline result; serializes deterministically (no timing
/// fields).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineResult {
    pub assignment: Vec<usize>,
    pub predicted_cost: f64,
    pub actual_cost: f64,
    pub solution: RoutingSolution,
    pub generations: usize,
    pub candidates_routed: usize,
}

/// Search plus final routing for a multi-depot instance.
pub fn solve_mdvrp(
    inst: &MdvrpInstance,
    estimator: &dyn CostEstimator,
    cfg: &PipelineConfig,
) -> Result<PipelineResult> {
    let outcome = run_ga(inst, estimator, &cfg.ga)?;
    let report = finalize(inst, &outcome.candidates, estimator, cfg)?;
    report.solution.validate(inst)?;
    Ok(PipelineResult {
        assignment: report.assignment,
        predicted_cost: report.predicted,
        actual_cost: report.solution.total_cost,
        solution: report.solution,
        generations: outcome.generations_run,
        candidates_routed: report.candidate_actuals.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::DaganzoEstimator;
    use crate::instances::generate::generate_mdvrp;
    use crate::instances::types::InstanceSpec;

    fn small_instance() -> MdvrpInstance {
        let spec = InstanceSpec {
            customers: 20..=20,
            depots: 2..=2,
            ..InstanceSpec::default()
        };
        generate_mdvrp(&spec, 31).unwrap()
    }

    fn quick_cfg(seed: u64) -> GaConfig {
        GaConfig {
            pop_low: 12,
            pop_high: 20,
            generations: 15,
            stall_limit: 8,
            seed,
            ..GaConfig::default()
        }
    }

    #[test]
    fn zero_generations_returns_ranked_initial_population() {
        let inst = small_instance();
        let cfg = GaConfig {
            generations: 0,
            ..quick_cfg(1)
        };
        let out = evolve(&inst, &DaganzoEstimator::default(), &cfg).unwrap();
        assert_eq!(out.generations_run, 0);
        assert!(!out.candidates.is_empty());
        for w in out.candidates.windows(2) {
            assert!(w[0].total() <= w[1].total());
        }
    }

    #[test]
    fn best_predicted_cost_is_non_increasing() {
        let inst = small_instance();
        let out = evolve(&inst, &DaganzoEstimator::default(), &quick_cfg(2)).unwrap();
        for w in out.best_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "history increased: {w:?}");
        }
    }

    #[test]
    fn gene_ranges_stay_valid_and_candidates_unique() {
        let inst = small_instance();
        let out = evolve(&inst, &DaganzoEstimator::default(), &quick_cfg(3)).unwrap();
        let mut seen = std::collections::HashSet::new();
        for c in &out.candidates {
            assert!(c.genes.iter().all(|&g| g < inst.num_depots()));
            assert!(seen.insert(c.genes.clone()), "duplicate candidate");
        }
    }

    #[test]
    fn finalize_top_one_routes_best_predicted() {
        let inst = small_instance();
        let out = evolve(&inst, &DaganzoEstimator::default(), &quick_cfg(4)).unwrap();
        let cfg = PipelineConfig {
            ga: GaConfig {
                top_k: 1,
                inject_nda: false,
                ..quick_cfg(4)
            },
            ..PipelineConfig::default()
        };
        let report = finalize(&inst, &out.candidates, &DaganzoEstimator::default(), &cfg).unwrap();
        assert_eq!(report.assignment, out.candidates[0].genes);
        assert_eq!(report.candidate_actuals.len(), 1);
    }

    #[test]
    fn nda_injection_bounds_final_cost() {
        let inst = small_instance();
        let nda = nearest_depot_genes(&inst);
        let loads = inst.loads(&nda);
        if inst.total_overload(&loads) > 0.0 {
            return; // this seed's nearest-depot assignment is infeasible
        }
        let cfg = PipelineConfig {
            ga: quick_cfg(5),
            ..PipelineConfig::default()
        };
        let result = solve_mdvrp(&inst, &DaganzoEstimator::default(), &cfg).unwrap();
        // Route the bare NDA candidate alone for comparison.
        let nda_only = vec![Candidate {
            genes: nda,
            predicted: 0.0,
            extra: 0.0,
            overload: 0.0,
        }];
        let report = finalize(
            &inst,
            &nda_only,
            &DaganzoEstimator::default(),
            &PipelineConfig {
                ga: GaConfig {
                    top_k: 1,
                    inject_nda: false,
                    ..quick_cfg(5)
                },
                ..PipelineConfig::default()
            },
        )
        .unwrap();
        assert!(result.actual_cost <= report.solution.total_cost + 1e-9);
    }

    #[test]
    fn pipeline_is_deterministic() {
        let inst = small_instance();
        let cfg = PipelineConfig {
            ga: quick_cfg(7),
            ..PipelineConfig::default()
        };
        let est = DaganzoEstimator::default();
        let a = solve_mdvrp(&inst, &est, &cfg).unwrap();
        let b = solve_mdvrp(&inst, &est, &cfg).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn final_solution_is_feasible() {
        let spec = InstanceSpec {
            customers: 30..=30,
            depots: 3..=3,
            ..InstanceSpec::default()
        };
        for seed in [11u64, 12, 13] {
            let inst = generate_mdvrp(&spec, seed).unwrap();
            let cfg = PipelineConfig {
                ga: quick_cfg(seed),
                ..PipelineConfig::default()
            };
            let result = solve_mdvrp(&inst, &DaganzoEstimator::default(), &cfg).unwrap();
            result.solution.validate(&inst).unwrap();
            assert!(result.actual_cost > 0.0);
        }
    }

    #[test]
    fn table3_limits() {
        assert_eq!(table3_time_limit(300, 4), 0.1); // ratio 75
        assert_eq!(table3_time_limit(300, 2), 1.0); // ratio 150
        assert_eq!(table3_time_limit(1000, 4), 2.0); // ratio 250
    }
}

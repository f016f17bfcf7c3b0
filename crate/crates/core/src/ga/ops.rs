use std::collections::HashMap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::estimators::CostEstimator;

use super::{DecompositionProblem, FitnessWeights, GaConfig, Individual};

/// Nearest-depot assignment: gene i is the closest depot, ties to the
/// lower depot index.
pub fn nearest_depot_genes(problem: &impl DecompositionProblem) -> Vec<usize> {
    (0..problem.num_customers())
        .map(|i| {
            let p = problem.customer_pos(i);
            (0..problem.num_depots())
                .min_by(|&a, &b| {
                    p.dist_sq(&problem.depot_pos(a))
                        .partial_cmp(&p.dist_sq(&problem.depot_pos(b)))
                        .unwrap()
                        .then(a.cmp(&b))
                })
                .unwrap()
        })
        .collect()
}

/// Second-nearest-depot assignment (defined for more than two depots).
pub fn second_nearest_genes(problem: &impl DecompositionProblem) -> Vec<usize> {
    (0..problem.num_customers())
        .map(|i| {
            let p = problem.customer_pos(i);
            let mut order: Vec<usize> = (0..problem.num_depots()).collect();
            order.sort_by(|&a, &b| {
                p.dist_sq(&problem.depot_pos(a))
                    .partial_cmp(&p.dist_sq(&problem.depot_pos(b)))
                    .unwrap()
                    .then(a.cmp(&b))
            });
            order[1]
        })
        .collect()
}

/// Each customer adopts its nearest neighbor's nearest depot.
fn neighbor_nearest_genes(problem: &impl DecompositionProblem) -> Vec<usize> {
    let nda = nearest_depot_genes(problem);
    (0..problem.num_customers())
        .map(|i| {
            let p = problem.customer_pos(i);
            let j = (0..problem.num_customers())
                .filter(|&j| j != i)
                .min_by(|&a, &b| {
                    p.dist_sq(&problem.customer_pos(a))
                        .partial_cmp(&p.dist_sq(&problem.customer_pos(b)))
                        .unwrap()
                        .then(a.cmp(&b))
                });
            match j {
                Some(j) => nda[j],
                None => nda[i],
            }
        })
        .collect()
}

/// The targeted assignment seeds: nearest depot, nearest neighbor's
/// nearest depot, and (for more than two depots) second-nearest depot.
/// These also serve as the elite gene sources for targeted mutation.
pub fn targeted_seeds(problem: &impl DecompositionProblem) -> Vec<Vec<usize>> {
    let mut seeds = vec![nearest_depot_genes(problem), neighbor_nearest_genes(problem)];
    if problem.num_depots() > 2 {
        seeds.push(second_nearest_genes(problem));
    }
    seeds
}

/// Build the starting population: the targeted seeds, then uniform
/// random assignments up to `pop_high`. Every individual is patched to
/// satisfy the problem's cover requirement.
pub fn initial_population(
    problem: &impl DecompositionProblem,
    cfg: &GaConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<Individual> {
    let n = problem.num_customers();
    let d = problem.num_depots();
    let mut pop = Vec::with_capacity(cfg.pop_high);
    for seed in targeted_seeds(problem) {
        if pop.len() < cfg.pop_high {
            pop.push(Individual::new(seed));
        }
    }
    while pop.len() < cfg.pop_high {
        let genes: Vec<usize> = (0..n).map(|_| rng.gen_range(0..d)).collect();
        pop.push(Individual::new(genes));
    }
    for ind in &mut pop {
        ensure_cover(problem, &mut ind.genes, rng);
    }
    pop
}

/// Open extra depots until the open set covers total demand, by moving
/// one random customer to the closed depot with the largest capacity.
/// No-op when the cover requirement already holds.
pub(crate) fn ensure_cover(
    problem: &impl DecompositionProblem,
    genes: &mut Vec<usize>,
    rng: &mut ChaCha8Rng,
) {
    loop {
        let loads = problem.loads(genes);
        if problem.cover_ok(&loads) {
            return;
        }
        let closed: Option<usize> = (0..problem.num_depots())
            .filter(|&d| loads[d] == 0)
            .max_by(|&a, &b| {
                problem
                    .depot_capacity(a)
                    .partial_cmp(&problem.depot_capacity(b))
                    .unwrap()
                    .then(b.cmp(&a))
            });
        match closed {
            Some(d) => {
                let i = rng.gen_range(0..genes.len());
                genes[i] = d;
            }
            None => return, // every depot already open; nothing to add
        }
    }
}

/// Repair overloaded assignments (Algorithm-style): with probability
/// `p_repair` per infeasible individual, repeatedly move a random
/// customer out of an overloaded depot into one with enough remaining
/// capacity. Individuals whose overload cannot be repaired by single
/// moves are left for the penalty term.
pub fn repair_population(
    problem: &impl DecompositionProblem,
    pop: &mut [Individual],
    p_repair: f64,
    rng: &mut ChaCha8Rng,
) {
    for ind in pop.iter_mut() {
        let mut loads = problem.loads(&ind.genes);
        if problem.total_overload(&loads) == 0.0 {
            continue;
        }
        if rng.gen::<f64>() >= p_repair {
            continue;
        }
        'outer: loop {
            let overloaded: Vec<usize> = (0..problem.num_depots())
                .filter(|&d| loads[d] as f64 > problem.depot_capacity(d))
                .collect();
            if overloaded.is_empty() {
                break;
            }
            let d = overloaded[rng.gen_range(0..overloaded.len())];
            let mut members: Vec<usize> = ind
                .genes
                .iter()
                .enumerate()
                .filter(|&(_, &g)| g == d)
                .map(|(i, _)| i)
                .collect();
            members.shuffle(rng);
            for &i in &members {
                let q = problem.customer_demand(i);
                let receivers: Vec<usize> = (0..problem.num_depots())
                    .filter(|&r| {
                        r != d && loads[r] as f64 + q as f64 <= problem.depot_capacity(r)
                    })
                    .collect();
                if receivers.is_empty() {
                    continue;
                }
                let r = receivers[rng.gen_range(0..receivers.len())];
                ind.genes[i] = r;
                loads[d] -= q;
                loads[r] += q;
                continue 'outer;
            }
            break; // no movable customer: leave for the penalty term
        }
        ind.predicted = f64::NAN; // force re-evaluation
    }
}

/// Mean normalized Hamming distance of `pop[idx]` to the rest of the
/// population (zero for a singleton).
pub fn diversity(pop: &[Individual], idx: usize) -> f64 {
    if pop.len() < 2 {
        return 0.0;
    }
    let n = pop[idx].genes.len();
    let mut mismatches = 0usize;
    for (j, other) in pop.iter().enumerate() {
        if j == idx {
            continue;
        }
        mismatches += pop[idx]
            .genes
            .iter()
            .zip(&other.genes)
            .filter(|(a, b)| a != b)
            .count();
    }
    mismatches as f64 / (n as f64 * pop.len() as f64)
}

/// Cache of subproblem predictions keyed by (depot, member set).
pub type EvalCache = HashMap<(usize, Vec<usize>), f64>;

/// Predict costs for all unevaluated individuals (deduplicating
/// subproblems before batching), then refresh diversity and fitness
/// for the whole pool. Fitness is
/// `w1*C~ - w2*delta~ + w3*C~*overload`, with cost and diversity
/// min-max normalized over the pool.
pub fn evaluate_population(
    problem: &impl DecompositionProblem,
    pop: &mut [Individual],
    estimator: &dyn CostEstimator,
    weights: &FitnessWeights,
    cache: &mut EvalCache,
) {
    // Gather unknown subproblems in deterministic order.
    let mut pending: Vec<(usize, Vec<usize>)> = Vec::new();
    for ind in pop.iter() {
        if ind.is_evaluated() {
            continue;
        }
        for (d, members) in depot_groups(problem, &ind.genes) {
            let key = (d, members);
            if !cache.contains_key(&key) && !pending.contains(&key) {
                pending.push(key);
            }
        }
    }
    if !pending.is_empty() {
        let instances: Vec<_> = pending
            .iter()
            .map(|(d, members)| problem.subproblem(*d, members))
            .collect();
        let costs = estimator.estimate_batch(&instances);
        for (key, cost) in pending.into_iter().zip(costs) {
            cache.insert(key, cost);
        }
    }

    for ind in pop.iter_mut() {
        if ind.is_evaluated() {
            continue;
        }
        let mut total = 0.0;
        for (d, members) in depot_groups(problem, &ind.genes) {
            total += cache[&(d, members)];
        }
        let loads = problem.loads(&ind.genes);
        ind.predicted = total;
        ind.extra = problem.extra_cost(&loads);
        ind.overload = problem.total_overload(&loads);
    }

    for i in 0..pop.len() {
        pop[i].diversity = diversity(pop, i);
    }
    let (mut c_min, mut c_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut d_min, mut d_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for ind in pop.iter() {
        c_min = c_min.min(ind.total());
        c_max = c_max.max(ind.total());
        d_min = d_min.min(ind.diversity);
        d_max = d_max.max(ind.diversity);
    }
    let norm = |v: f64, lo: f64, hi: f64| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 };
    for ind in pop.iter_mut() {
        let c = norm(ind.total(), c_min, c_max);
        let dv = norm(ind.diversity, d_min, d_max);
        ind.fitness = weights.cost * c - weights.diversity * dv + weights.penalty * c * ind.overload;
    }
}

pub(crate) fn depot_groups(
    problem: &impl DecompositionProblem,
    genes: &[usize],
) -> Vec<(usize, Vec<usize>)> {
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); problem.num_depots()];
    for (i, &d) in genes.iter().enumerate() {
        groups[d].push(i);
    }
    groups
        .into_iter()
        .enumerate()
        .filter(|(_, m)| !m.is_empty())
        .collect()
}

/// Binary tournament: the fitter of two uniform picks. Returns two
/// distinct individuals.
pub fn select_parents(pop: &[Individual], rng: &mut ChaCha8Rng) -> (usize, usize) {
    assert!(pop.len() >= 2, "selection needs at least two individuals");
    let tournament = |rng: &mut ChaCha8Rng| -> usize {
        let a = rng.gen_range(0..pop.len());
        let b = rng.gen_range(0..pop.len());
        if pop[a].fitness <= pop[b].fitness {
            a
        } else {
            b
        }
    };
    let first = tournament(rng);
    loop {
        let second = tournament(rng);
        if second != first {
            return (first, second);
        }
    }
}

/// Uniform crossover: each gene copied from a uniformly chosen parent.
pub fn uniform_crossover(a: &[usize], b: &[usize], rng: &mut ChaCha8Rng) -> Vec<usize> {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(&ga, &gb)| if rng.gen_bool(0.5) { ga } else { gb })
        .collect()
}

/// Mutations over a freshly evaluated child population:
/// - individuals in the best fitness tertile have ~`mutation_fraction`
///   of their genes reset to a random depot (FLIP, probability
///   `p_flip`) or exchanged with another position (SWAP);
/// - ~`targeted_fraction` of the children, chosen by binary
///   tournament, copy `gene_copy_fraction` of their genes from a
///   random elite seed.
///
/// Mutated individuals are marked for re-evaluation.
pub(crate) fn mutate_population(
    problem: &impl DecompositionProblem,
    pop: &mut [Individual],
    elites: &[Vec<usize>],
    cfg: &GaConfig,
    rng: &mut ChaCha8Rng,
) {
    let n = problem.num_customers();
    let d = problem.num_depots();

    let tertile = {
        let mut idx: Vec<usize> = (0..pop.len()).collect();
        idx.sort_by(|&a, &b| pop[a].fitness.partial_cmp(&pop[b].fitness).unwrap().then(a.cmp(&b)));
        idx.truncate((pop.len() + 2) / 3);
        idx
    };
    let genes_to_mutate = ((n as f64 * cfg.mutation_fraction).round() as usize).max(1);
    for &pi in &tertile {
        for _ in 0..genes_to_mutate {
            let i = rng.gen_range(0..n);
            if rng.gen::<f64>() < cfg.p_flip {
                pop[pi].genes[i] = rng.gen_range(0..d);
            } else {
                let j = rng.gen_range(0..n);
                pop[pi].genes.swap(i, j);
            }
        }
        ensure_cover(problem, &mut pop[pi].genes, rng);
        pop[pi].predicted = f64::NAN;
    }

    if elites.is_empty() {
        return;
    }
    let targeted = (pop.len() as f64 * cfg.targeted_fraction).round() as usize;
    let copies = ((n as f64 * cfg.gene_copy_fraction).round() as usize).max(1);
    for _ in 0..targeted {
        let a = rng.gen_range(0..pop.len());
        let b = rng.gen_range(0..pop.len());
        let pi = if pop[a].fitness <= pop[b].fitness { a } else { b };
        let elite = &elites[rng.gen_range(0..elites.len())];
        for _ in 0..copies {
            let i = rng.gen_range(0..n);
            pop[pi].genes[i] = elite[i];
        }
        ensure_cover(problem, &mut pop[pi].genes, rng);
        pop[pi].predicted = f64::NAN;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Point;
    use crate::instances::generate::generate_mdvrp;
    use crate::instances::types::{Customer, InstanceSpec, MdvrpInstance};

    fn two_depot_instance() -> MdvrpInstance {
        MdvrpInstance::new(
            vec![Point::new(0.0, 0.0), Point::new(100.0, 0.0)],
            vec![
                Customer { pos: Point::new(10.0, 0.0), demand: 10 },
                Customer { pos: Point::new(20.0, 0.0), demand: 10 },
                Customer { pos: Point::new(90.0, 0.0), demand: 10 },
                Customer { pos: Point::new(80.0, 0.0), demand: 10 },
            ],
            vec![1, 1],
            30,
        )
        .unwrap()
    }

    struct ZeroEstimator;
    impl CostEstimator for ZeroEstimator {
        fn estimate_batch(&self, instances: &[crate::instances::types::CvrpInstance]) -> Vec<f64> {
            instances.iter().map(|i| i.n() as f64).collect()
        }
    }

    #[test]
    fn nda_matches_exhaustive_distances() {
        let inst = two_depot_instance();
        assert_eq!(nearest_depot_genes(&inst), vec![0, 0, 1, 1]);
    }

    #[test]
    fn initial_population_contains_seeds_and_fills_to_high() {
        let inst = two_depot_instance();
        let cfg = GaConfig {
            pop_high: 10,
            ..GaConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pop = initial_population(&inst, &cfg, &mut rng);
        assert_eq!(pop.len(), 10);
        assert_eq!(pop[0].genes, nearest_depot_genes(&inst));
        // Two depots: no second-nearest seed.
        assert_eq!(targeted_seeds(&inst).len(), 2);
    }

    #[test]
    fn diversity_hand_enumeration() {
        // N=4, pop {[0,0,1,1],[0,1,1,1],[1,0,1,1]}: first differs from the
        // second in 1 gene and from the third in 1 gene -> 2/(4*3).
        let mk = |genes: Vec<usize>| Individual::new(genes);
        let pop = vec![mk(vec![0, 0, 1, 1]), mk(vec![0, 1, 1, 1]), mk(vec![1, 0, 1, 1])];
        assert!((diversity(&pop, 0) - 2.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn diversity_of_identical_population_is_zero() {
        let pop = vec![Individual::new(vec![0, 1, 0]); 4];
        for i in 0..4 {
            assert_eq!(diversity(&pop, i), 0.0);
        }
    }

    #[test]
    fn singleton_population_diversity_zero() {
        let pop = vec![Individual::new(vec![0, 1])];
        assert_eq!(diversity(&pop, 0), 0.0);
    }

    #[test]
    fn repair_clears_single_overload() {
        let inst = two_depot_instance(); // capacity bound 30 per depot
        let mut pop = vec![Individual::new(vec![0, 0, 0, 0])]; // depot 0 load 40
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        repair_population(&inst, &mut pop, 1.0, &mut rng);
        let loads = inst.loads(&pop[0].genes);
        assert!(inst.total_overload(&loads) == 0.0, "loads {loads:?}");
    }

    #[test]
    fn repair_probability_zero_is_identity() {
        let inst = two_depot_instance();
        let genes = vec![0, 0, 0, 0];
        let mut pop = vec![Individual::new(genes.clone())];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        repair_population(&inst, &mut pop, 0.0, &mut rng);
        assert_eq!(pop[0].genes, genes);
    }

    #[test]
    fn repair_leaves_feasible_untouched() {
        let inst = two_depot_instance();
        let genes = vec![0, 0, 1, 1];
        let mut pop = vec![Individual::new(genes.clone())];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        repair_population(&inst, &mut pop, 1.0, &mut rng);
        assert_eq!(pop[0].genes, genes);
    }

    #[test]
    fn fitness_ranking_reduces_to_cost_without_diversity_and_penalty() {
        let spec = InstanceSpec {
            customers: 12..=12,
            depots: 3..=3,
            ..InstanceSpec::default()
        };
        let inst = generate_mdvrp(&spec, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = GaConfig {
            pop_high: 20,
            ..GaConfig::default()
        };
        let mut pop = initial_population(&inst, &cfg, &mut rng);
        let weights = FitnessWeights {
            cost: 1.0,
            diversity: 0.0,
            penalty: 0.0,
        };
        let mut cache = EvalCache::new();
        evaluate_population(&inst, &mut pop, &ZeroEstimator, &weights, &mut cache);
        let mut by_fitness: Vec<usize> = (0..pop.len()).collect();
        by_fitness.sort_by(|&a, &b| pop[a].fitness.partial_cmp(&pop[b].fitness).unwrap().then(a.cmp(&b)));
        let mut by_cost: Vec<usize> = (0..pop.len()).collect();
        by_cost.sort_by(|&a, &b| pop[a].total().partial_cmp(&pop[b].total()).unwrap().then(a.cmp(&b)));
        assert_eq!(by_fitness, by_cost);
    }

    #[test]
    fn diverse_individual_wins_at_equal_cost() {
        let inst = two_depot_instance();
        let mut pop = vec![
            Individual::new(vec![0, 0, 1, 1]),
            Individual::new(vec![0, 0, 1, 1]),
            Individual::new(vec![1, 1, 0, 0]),
        ];
        struct ConstEstimator;
        impl CostEstimator for ConstEstimator {
            fn estimate_batch(
                &self,
                instances: &[crate::instances::types::CvrpInstance],
            ) -> Vec<f64> {
                vec![10.0; instances.len()]
            }
        }
        let mut cache = EvalCache::new();
        evaluate_population(
            &inst,
            &mut pop,
            &ConstEstimator,
            &FitnessWeights { cost: 1.0, diversity: 0.5, penalty: 0.0 },
            &mut cache,
        );
        assert!(pop[2].fitness < pop[0].fitness);
    }

    #[test]
    fn tournament_winner_never_worse_and_pressure_holds() {
        let inst = two_depot_instance();
        let mut pop: Vec<Individual> = vec![
            Individual::new(vec![0, 0, 1, 1]),
            Individual::new(vec![0, 1, 0, 1]),
            Individual::new(vec![1, 1, 0, 0]),
            Individual::new(vec![1, 0, 1, 0]),
        ];
        let mut cache = EvalCache::new();
        evaluate_population(
            &inst,
            &mut pop,
            &ZeroEstimator,
            &FitnessWeights::default(),
            &mut cache,
        );
        let best = (0..pop.len())
            .min_by(|&a, &b| pop[a].fitness.partial_cmp(&pop[b].fitness).unwrap())
            .unwrap();
        let worst = (0..pop.len())
            .max_by(|&a, &b| pop[a].fitness.partial_cmp(&pop[b].fitness).unwrap())
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (mut best_count, mut worst_count) = (0, 0);
        for _ in 0..10_000 {
            let (a, b) = select_parents(&pop, &mut rng);
            for p in [a, b] {
                if p == best {
                    best_count += 1;
                }
                if p == worst {
                    worst_count += 1;
                }
            }
        }
        assert!(
            best_count > worst_count,
            "selection pressure missing: best {best_count} vs worst {worst_count}"
        );
    }

    #[test]
    fn pop_of_two_returns_both() {
        let mut pop = vec![Individual::new(vec![0]), Individual::new(vec![1])];
        pop[0].fitness = 0.1;
        pop[1].fitness = 0.9;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let (a, b) = select_parents(&pop, &mut rng);
            assert_ne!(a, b);
        }
    }

    #[test]
    fn crossover_genes_come_from_parents_evenly() {
        let a = vec![0usize; 1000];
        let b = vec![1usize; 1000];
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut from_a = 0usize;
        let trials = 10;
        for _ in 0..trials {
            let child = uniform_crossover(&a, &b, &mut rng);
            assert!(child.iter().all(|&g| g == 0 || g == 1));
            from_a += child.iter().filter(|&&g| g == 0).count();
        }
        let rate = from_a as f64 / (trials * 1000) as f64;
        assert!((rate - 0.5).abs() < 0.02, "parent-A rate {rate}");

        let same = uniform_crossover(&a, &a, &mut rng);
        assert_eq!(same, a);
    }

    #[test]
    fn flip_only_mutation_and_swap_multiset_property() {
        let spec = InstanceSpec {
            customers: 40..=40,
            depots: 3..=3,
            ..InstanceSpec::default()
        };
        let inst = generate_mdvrp(&spec, 6).unwrap();
        let cfg = GaConfig {
            p_flip: 0.0, // SWAP only: gene multiset must be preserved
            targeted_fraction: 0.0,
            ..GaConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut pop: Vec<Individual> = (0..6)
            .map(|_| {
                let genes: Vec<usize> = (0..40).map(|_| rng.gen_range(0..3)).collect();
                Individual::new(genes)
            })
            .collect();
        let mut cache = EvalCache::new();
        evaluate_population(&inst, &mut pop, &ZeroEstimator, &FitnessWeights::default(), &mut cache);
        let before: Vec<Vec<usize>> = pop
            .iter()
            .map(|i| {
                let mut g = i.genes.clone();
                g.sort_unstable();
                g
            })
            .collect();
        mutate_population(&inst, &mut pop, &[], &cfg, &mut rng);
        for (i, ind) in pop.iter().enumerate() {
            let mut g = ind.genes.clone();
            g.sort_unstable();
            assert_eq!(g, before[i], "swap changed the gene multiset");
        }
    }

    #[test]
    fn expected_mutated_gene_count_matches_fraction() {
        let spec = InstanceSpec {
            customers: 100..=100,
            depots: 5..=5,
            ..InstanceSpec::default()
        };
        let inst = generate_mdvrp(&spec, 7).unwrap();
        let cfg = GaConfig {
            p_flip: 1.0,
            targeted_fraction: 0.0,
            ..GaConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut changed = 0usize;
        let runs = 300;
        for _ in 0..runs {
            let genes: Vec<usize> = (0..100).map(|_| rng.gen_range(0..5)).collect();
            let mut pop = vec![Individual::new(genes.clone())];
            pop[0].fitness = 0.0;
            pop[0].predicted = 1.0;
            mutate_population(&inst, &mut pop, &[], &cfg, &mut rng);
            changed += pop[0]
                .genes
                .iter()
                .zip(&genes)
                .filter(|(a, b)| a != b)
                .count();
        }
        // 5 genes drawn per individual; FLIP resets to a uniform depot so
        // ~4/5 of draws change the gene, minus repeat-position overlap.
        let mean = changed as f64 / runs as f64;
        assert!(
            mean > 2.0 && mean < 5.0,
            "mean mutated genes {mean} outside the expected band"
        );
    }
}

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::instances::types::CvrpInstance;

use super::local_search::{improve, Budget, LsState};
use super::{routes_with_stats, CvrpResult, SolverConfig};

/// Rough number of candidate-move evaluations per second, used to map
/// wall-clock limits onto deterministic iteration budgets.
pub const EVALS_PER_SECOND: f64 = 2.0e6;

/// Deterministic iteration budget equivalent to `time_limit` seconds.
pub fn iteration_budget_for(time_limit: f64) -> u64 {
    (time_limit * EVALS_PER_SECOND).max(1.0) as u64
}

fn distance_matrix(inst: &CvrpInstance) -> Vec<Vec<f64>> {
    let n = inst.n();
    let mut d = vec![vec![0.0; n + 1]; n + 1];
    for i in 0..=n {
        let a = if i == 0 {
            inst.depot
        } else {
            inst.customers[i - 1].pos
        };
        for j in i + 1..=n {
            let b = inst.customers[j - 1].pos;
            let dist = a.dist(&b);
            d[i][j] = dist;
            d[j][i] = dist;
        }
    }
    d
}

/// Parallel savings construction. Merges route endpoints in order of
/// decreasing saving d(0,i) + d(0,j) - lambda*d(i,j).
fn clarke_wright(d: &[Vec<f64>], demand: &[u64], cap: u64, lambda: f64) -> Vec<Vec<usize>> {
    let n = demand.len();
    let mut savings: Vec<(f64, usize, usize)> = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let s = d[0][i + 1] + d[0][j + 1] - lambda * d[i + 1][j + 1];
            savings.push((s, i, j));
        }
    }
    savings.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut routes: Vec<Vec<usize>> = (0..n).map(|c| vec![c]).collect();
    let mut route_of: Vec<usize> = (0..n).collect();
    let mut loads: Vec<u64> = demand.to_vec();

    for (_, i, j) in savings {
        let (ri, rj) = (route_of[i], route_of[j]);
        if ri == rj || loads[ri] + loads[rj] > cap {
            continue;
        }
        let i_head = routes[ri][0] == i;
        let i_tail = *routes[ri].last().unwrap() == i;
        let j_head = routes[rj][0] == j;
        let j_tail = *routes[rj].last().unwrap() == j;
        if !(i_head || i_tail) || !(j_head || j_tail) {
            continue;
        }
        // Orient so i ends route ri and j starts route rj, then concat.
        if i_head && !i_tail {
            routes[ri].reverse();
        }
        if j_tail && !j_head {
            routes[rj].reverse();
        }
        let tail = std::mem::take(&mut routes[rj]);
        for &c in &tail {
            route_of[c] = ri;
        }
        routes[ri].extend(tail);
        loads[ri] += loads[rj];
        loads[rj] = 0;
    }
    routes.retain(|r| !r.is_empty());
    routes
}

/// Squeeze a route set into at most `m` routes by repeatedly applying
/// the cheapest feasible route merge; falls back to first-fit packing
/// over shuffled customer orders.
fn force_fleet(
    mut routes: Vec<Vec<usize>>,
    m: usize,
    d: &[Vec<f64>],
    demand: &[u64],
    cap: u64,
    rng: &mut ChaCha8Rng,
) -> Option<Vec<Vec<usize>>> {
    let route_load = |r: &[usize]| -> u64 { r.iter().map(|&c| demand[c]).sum() };
    while routes.len() > m {
        let mut best: Option<(f64, usize, usize, bool, bool)> = None;
        for a in 0..routes.len() {
            for b in a + 1..routes.len() {
                if route_load(&routes[a]) + route_load(&routes[b]) > cap {
                    continue;
                }
                // Four endpoint pairings; reversal is free on symmetric costs.
                for (rev_a, rev_b) in
                    [(false, false), (false, true), (true, false), (true, true)]
                {
                    let tail_a = if rev_a { routes[a][0] } else { *routes[a].last().unwrap() };
                    let head_b = if rev_b { *routes[b].last().unwrap() } else { routes[b][0] };
                    let delta = d[tail_a + 1][head_b + 1] - d[tail_a + 1][0] - d[0][head_b + 1];
                    if best.map_or(true, |(bd, ..)| delta < bd) {
                        best = Some((delta, a, b, rev_a, rev_b));
                    }
                }
            }
        }
        match best {
            Some((_, a, b, rev_a, rev_b)) => {
                let mut rb = routes.swap_remove(b);
                if rev_b {
                    rb.reverse();
                }
                if rev_a {
                    routes[a].reverse();
                }
                routes[a].extend(rb);
            }
            None => {
                // Merging stalled: try packing from scratch.
                let n = demand.len();
                for _ in 0..20 {
                    let mut order: Vec<usize> = (0..n).collect();
                    order.sort_by_key(|&c| std::cmp::Reverse(demand[c]));
                    let mut bins: Vec<(u64, Vec<usize>)> = vec![(0, Vec::new()); m];
                    let mut ok = true;
                    for &c in &order {
                        match bins.iter_mut().find(|(l, _)| *l + demand[c] <= cap) {
                            Some((l, bin)) => {
                                *l += demand[c];
                                bin.push(c);
                            }
                            None => {
                                ok = false;
                                break;
                            }
                        }
                    }
                    if ok {
                        return Some(
                            bins.into_iter()
                                .map(|(_, b)| b)
                                .filter(|b| !b.is_empty())
                                .collect(),
                        );
                    }
                    order.shuffle(rng);
                }
                return None;
            }
        }
    }
    Some(routes)
}

/// Heuristic solve: savings construction plus randomized
/// first-improvement local search, restarted with perturbed savings
/// weights until the budget runs out. Anytime: returns the best
/// feasible solution found.
pub fn solve_heuristic(inst: &CvrpInstance, cfg: &SolverConfig) -> Result<CvrpResult> {
    cfg.validate()?;
    let start = Instant::now();
    let n = inst.n();
    let demand: Vec<u64> = inst.customers.iter().map(|c| c.demand as u64).collect();
    let cap = inst.capacity as u64;

    if let Some(m) = inst.fleet_limit {
        if inst.min_vehicles() > m {
            return Err(Error::Infeasible(format!(
                "fleet bound violated: total demand {} needs at least {} vehicles of capacity {}, \
                 but only {m} are available",
                inst.total_demand(),
                inst.min_vehicles(),
                inst.capacity
            )));
        }
    }

    let d = distance_matrix(inst);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut budget = Budget::new(cfg.iteration_budget, cfg.time_limit);

    let mut best_routes: Option<Vec<Vec<usize>>> = None;
    let mut best_cost = f64::INFINITY;
    let mut lambda = 1.0;

    loop {
        // Charge construction so tiny instances cannot restart forever.
        budget.spend((n * n) as u64 + 10);
        let constructed = clarke_wright(&d, &demand, cap, lambda);
        let feasible = match inst.fleet_limit {
            Some(m) if constructed.len() > m as usize => {
                force_fleet(constructed, m as usize, &d, &demand, cap, &mut rng)
            }
            _ => Some(constructed),
        };
        if let Some(routes) = feasible {
            let mut state = LsState::new(&d, &demand, cap, routes);
            improve(&mut state, &cfg.ops, &mut rng, &mut budget);
            // Local search never merges below the fleet bound's reach, and
            // its intermediate states stay capacity-feasible, so the final
            // state is feasible whenever the construction was.
            let cost = state.total_cost();
            if cost < best_cost {
                best_cost = cost;
                best_routes = Some(state.routes);
            }
        }
        if budget.exhausted() {
            break;
        }
        lambda = rng.gen_range(0.6..1.4);
    }

    let routes = best_routes.ok_or_else(|| {
        Error::Infeasible(format!(
            "fleet bound violated: could not pack demand into {} vehicles",
            inst.fleet_limit.unwrap_or(0)
        ))
    })?;
    Ok(CvrpResult {
        cost: routes_with_stats(inst, routes.clone())
            .iter()
            .map(|r| r.cost)
            .sum(),
        routes: routes_with_stats(inst, routes),
        elapsed: start.elapsed().as_secs_f64(),
    })
}

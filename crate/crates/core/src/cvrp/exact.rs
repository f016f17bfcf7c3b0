use std::time::Instant;

use crate::error::{Error, Result};
use crate::instances::types::CvrpInstance;

use super::{routes_with_stats, CvrpResult};

const MAX_EXACT: usize = 10;

/// Globally optimal solve by enumeration: every capacity-feasible
/// customer subset is costed as an exact closed tour (Held-Karp), and
/// a partition DP assembles the cheapest feasible route set. Enforced
/// to n <= 10.
pub fn solve_exact(inst: &CvrpInstance) -> Result<CvrpResult> {
    let n = inst.n();
    if n > MAX_EXACT {
        return Err(Error::Size(format!(
            "exact solve is limited to {MAX_EXACT} customers, got {n}"
        )));
    }
    let start = Instant::now();

    // Node 0 is the depot; customers are 1..=n.
    let mut dist = vec![vec![0.0f64; n + 1]; n + 1];
    for i in 0..=n {
        for j in 0..=n {
            let a = if i == 0 {
                inst.depot
            } else {
                inst.customers[i - 1].pos
            };
            let b = if j == 0 {
                inst.depot
            } else {
                inst.customers[j - 1].pos
            };
            dist[i][j] = a.dist(&b);
        }
    }

    let full = 1usize << n;
    let mut load = vec![0u64; full];
    for mask in 1..full {
        let low = mask.trailing_zeros() as usize;
        load[mask] = load[mask & (mask - 1)] + inst.customers[low].demand as u64;
    }

    // Held-Karp: path[mask][j] = cheapest depot-start path visiting mask,
    // ending at customer j (0-based bit). Parents kept for reconstruction.
    let mut path = vec![vec![f64::INFINITY; n]; full];
    let mut parent = vec![vec![usize::MAX; n]; full];
    for j in 0..n {
        path[1 << j][j] = dist[0][j + 1];
    }
    for mask in 1..full {
        if load[mask] > inst.capacity as u64 {
            continue;
        }
        for j in 0..n {
            if mask & (1 << j) == 0 || !path[mask][j].is_finite() {
                continue;
            }
            let base = path[mask][j];
            for k in 0..n {
                if mask & (1 << k) != 0 {
                    continue;
                }
                let next = mask | (1 << k);
                let cand = base + dist[j + 1][k + 1];
                if cand < path[next][k] {
                    path[next][k] = cand;
                    parent[next][k] = j;
                }
            }
        }
    }

    // Closed-tour cost per feasible subset, with the best end customer.
    let mut tour = vec![f64::INFINITY; full];
    let mut tour_end = vec![usize::MAX; full];
    for mask in 1..full {
        if load[mask] > inst.capacity as u64 {
            continue;
        }
        for j in 0..n {
            if mask & (1 << j) == 0 {
                continue;
            }
            let cand = path[mask][j] + dist[j + 1][0];
            if cand < tour[mask] {
                tour[mask] = cand;
                tour_end[mask] = j;
            }
        }
    }

    // Partition DP over (covered set, route count).
    let max_routes = inst.fleet_limit.map(|m| m as usize).unwrap_or(n).min(n);
    let inf = f64::INFINITY;
    let mut dp = vec![vec![inf; max_routes + 1]; full];
    let mut choice = vec![vec![0usize; max_routes + 1]; full];
    dp[0][0] = 0.0;
    for mask in 1..full {
        let low = mask.trailing_zeros() as usize;
        let rest = mask & !(1 << low);
        // Enumerate subsets of `mask` containing the lowest customer.
        let mut sub = rest;
        loop {
            let s = sub | (1 << low);
            if tour[s].is_finite() {
                let remain = mask ^ s;
                for r in 1..=max_routes {
                    let prev = dp[remain][r - 1];
                    if prev.is_finite() {
                        let cand = prev + tour[s];
                        if cand < dp[mask][r] {
                            dp[mask][r] = cand;
                            choice[mask][r] = s;
                        }
                    }
                }
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & rest;
        }
    }

    let all = full - 1;
    let mut best = inf;
    let mut best_r = 0;
    for r in 1..=max_routes {
        if dp[all][r] < best {
            best = dp[all][r];
            best_r = r;
        }
    }
    if !best.is_finite() {
        return Err(Error::Infeasible(format!(
            "no feasible partition into at most {max_routes} routes of capacity {}",
            inst.capacity
        )));
    }

    // Reconstruct route subsets, then orders within each route.
    let mut routes = Vec::with_capacity(best_r);
    let mut mask = all;
    let mut r = best_r;
    while r > 0 {
        let s = choice[mask][r];
        let mut order = Vec::new();
        let mut m = s;
        let mut j = tour_end[s];
        while j != usize::MAX {
            order.push(j);
            let pj = parent[m][j];
            m &= !(1 << j);
            j = pj;
        }
        order.reverse();
        routes.push(order);
        mask ^= s;
        r -= 1;
    }

    Ok(CvrpResult {
        routes: routes_with_stats(inst, routes),
        cost: best,
        elapsed: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Point;
    use crate::instances::types::Customer;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn cust(x: f64, y: f64, q: u32) -> Customer {
        Customer {
            pos: Point::new(x, y),
            demand: q,
        }
    }

    /// Independent oracle: enumerate every permutation of the customers
    /// and every split of the permutation into consecutive routes.
    fn enumerate_optimum(inst: &CvrpInstance) -> f64 {
        fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
            if items.len() <= 1 {
                return vec![items.to_vec()];
            }
            let mut out = Vec::new();
            for (i, &x) in items.iter().enumerate() {
                let mut rest = items.to_vec();
                rest.remove(i);
                for mut p in permutations(&rest) {
                    p.insert(0, x);
                    out.push(p);
                }
            }
            out
        }
        let n = inst.n();
        let ids: Vec<usize> = (0..n).collect();
        let mut best = f64::INFINITY;
        for perm in permutations(&ids) {
            for splits in 0..(1usize << (n - 1)) {
                let mut cost = 0.0;
                let mut load = 0u64;
                let mut feasible = true;
                let mut routes = 1usize;
                let mut prev = inst.depot;
                for (i, &c) in perm.iter().enumerate() {
                    let cut = i > 0 && (splits >> (i - 1)) & 1 == 1;
                    if cut {
                        cost += prev.dist(&inst.depot);
                        prev = inst.depot;
                        load = 0;
                        routes += 1;
                    }
                    load += inst.customers[c].demand as u64;
                    if load > inst.capacity as u64 {
                        feasible = false;
                        break;
                    }
                    cost += prev.dist(&inst.customers[c].pos);
                    prev = inst.customers[c].pos;
                }
                if !feasible {
                    continue;
                }
                if let Some(m) = inst.fleet_limit {
                    if routes > m as usize {
                        continue;
                    }
                }
                cost += prev.dist(&inst.depot);
                best = best.min(cost);
            }
        }
        best
    }

    #[test]
    fn one_customer_is_out_and_back() {
        let inst =
            CvrpInstance::new(Point::new(0.0, 0.0), vec![cust(3.0, 4.0, 1)], 10, None).unwrap();
        let res = solve_exact(&inst).unwrap();
        assert!((res.cost - 10.0).abs() < 1e-12);
        assert_eq!(res.routes.len(), 1);
    }

    #[test]
    fn full_demands_force_split() {
        let inst = CvrpInstance::new(
            Point::new(0.0, 0.0),
            vec![cust(0.0, 5.0, 10), cust(5.0, 0.0, 10)],
            10,
            None,
        )
        .unwrap();
        let res = solve_exact(&inst).unwrap();
        assert_eq!(res.routes.len(), 2);
        assert!((res.cost - 20.0).abs() < 1e-12);
    }

    #[test]
    fn matches_permutation_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let n = rng.gen_range(2..=5);
            let customers: Vec<Customer> = (0..n)
                .map(|_| {
                    cust(
                        rng.gen_range(0.0..100.0),
                        rng.gen_range(0.0..100.0),
                        rng.gen_range(1..=10),
                    )
                })
                .collect();
            let inst =
                CvrpInstance::new(Point::new(50.0, 50.0), customers, 15, None).unwrap();
            let dp = solve_exact(&inst).unwrap();
            let brute = enumerate_optimum(&inst);
            assert!(
                (dp.cost - brute).abs() < 1e-9,
                "dp {} vs enumeration {brute}",
                dp.cost
            );
            let recomputed = crate::cvrp::evaluate_solution(
                &inst,
                &dp.routes.iter().map(|r| r.customers.clone()).collect::<Vec<_>>(),
            )
            .unwrap();
            assert!((recomputed - dp.cost).abs() < 1e-9);
        }
    }

    #[test]
    fn fleet_limit_respected() {
        let inst = CvrpInstance::new(
            Point::new(0.0, 0.0),
            vec![cust(1.0, 0.0, 5), cust(2.0, 0.0, 5), cust(3.0, 0.0, 5)],
            5,
            Some(2),
        )
        .unwrap();
        assert!(solve_exact(&inst).is_err());
    }

    #[test]
    fn size_cap_enforced() {
        let customers: Vec<Customer> = (0..11).map(|i| cust(i as f64, 1.0, 1)).collect();
        let inst = CvrpInstance::new(Point::new(0.0, 0.0), customers, 100, None).unwrap();
        assert!(matches!(solve_exact(&inst), Err(Error::Size(_))));
    }
}

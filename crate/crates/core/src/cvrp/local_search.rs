use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

use super::LocalSearchOp;

/// Shared stopping state: either a candidate-evaluation budget or a
/// wall-clock deadline.
pub(crate) struct Budget {
    evals_left: Option<i64>,
    deadline: Option<Instant>,
    clock_check: u32,
}

impl Budget {
    pub(crate) fn new(iteration_budget: Option<u64>, time_limit: f64) -> Self {
        let deadline = if iteration_budget.is_none() && time_limit.is_finite() {
            Some(Instant::now() + std::time::Duration::from_secs_f64(time_limit))
        } else {
            None
        };
        Budget {
            evals_left: iteration_budget.map(|b| b as i64),
            deadline,
            clock_check: 0,
        }
    }

    /// Spend `n` evaluations; returns false once the budget is gone.
    pub(crate) fn spend(&mut self, n: u64) -> bool {
        if let Some(left) = &mut self.evals_left {
            *left -= n as i64;
            return *left > 0;
        }
        if let Some(deadline) = self.deadline {
            self.clock_check = self.clock_check.wrapping_add(1);
            if self.clock_check % 256 == 0 && Instant::now() >= deadline {
                return false;
            }
        }
        true
    }

    pub(crate) fn exhausted(&self) -> bool {
        match self.evals_left {
            Some(left) => left <= 0,
            None => self
                .deadline
                .map(|d| Instant::now() >= d)
                .unwrap_or(false),
        }
    }
}

/// Route state during improvement. Customer ids are 0-based; the
/// distance matrix uses node 0 for the depot and i+1 for customer i.
pub(crate) struct LsState<'a> {
    pub d: &'a [Vec<f64>],
    pub demand: &'a [u64],
    pub cap: u64,
    pub routes: Vec<Vec<usize>>,
    pub loads: Vec<u64>,
}

impl<'a> LsState<'a> {
    pub(crate) fn new(
        d: &'a [Vec<f64>],
        demand: &'a [u64],
        cap: u64,
        routes: Vec<Vec<usize>>,
    ) -> Self {
        let loads = routes
            .iter()
            .map(|r| r.iter().map(|&c| demand[c]).sum())
            .collect();
        LsState {
            d,
            demand,
            cap,
            routes,
            loads,
        }
    }

    fn dist(&self, a: Option<usize>, b: Option<usize>) -> f64 {
        let i = a.map_or(0, |c| c + 1);
        let j = b.map_or(0, |c| c + 1);
        self.d[i][j]
    }

    pub(crate) fn route_cost(&self, r: usize) -> f64 {
        let route = &self.routes[r];
        let mut cost = 0.0;
        let mut prev = None;
        for &c in route {
            cost += self.dist(prev, Some(c));
            prev = Some(c);
        }
        cost + self.dist(prev, None)
    }

    pub(crate) fn total_cost(&self) -> f64 {
        (0..self.routes.len()).map(|r| self.route_cost(r)).sum()
    }

    fn remove_empty(&mut self) {
        let mut i = 0;
        while i < self.routes.len() {
            if self.routes[i].is_empty() {
                self.routes.swap_remove(i);
                self.loads.swap_remove(i);
            } else {
                i += 1;
            }
        }
    }

    fn locate(&self, c: usize) -> (usize, usize) {
        for (r, route) in self.routes.iter().enumerate() {
            if let Some(p) = route.iter().position(|&x| x == c) {
                return (r, p);
            }
        }
        unreachable!("customer {c} missing from route state");
    }

    /// Move `c` to its best position in `target`; applies only a strict
    /// improvement. Returns the delta if applied.
    fn try_relocate(&mut self, c: usize, target: usize, budget: &mut Budget) -> Option<f64> {
        let (src, pos) = self.locate(c);
        if src == target && self.routes[src].len() == 1 {
            return None;
        }
        let route = &self.routes[src];
        let prev = if pos == 0 { None } else { Some(route[pos - 1]) };
        let next = route.get(pos + 1).copied();
        let removal = self.dist(prev, next) - self.dist(prev, Some(c)) - self.dist(Some(c), next);

        if src == target {
            // Within-route move: evaluate insertions against the route
            // with `c` removed.
            let mut trimmed = route.clone();
            trimmed.remove(pos);
            let mut best: Option<(usize, f64)> = None;
            for k in 0..=trimmed.len() {
                if !budget.spend(1) {
                    break;
                }
                let u = if k == 0 { None } else { Some(trimmed[k - 1]) };
                let v = trimmed.get(k).copied();
                let insertion =
                    self.dist(u, Some(c)) + self.dist(Some(c), v) - self.dist(u, v);
                let delta = removal + insertion;
                if delta < -1e-9 && best.map_or(true, |(_, bd)| delta < bd) {
                    best = Some((k, delta));
                }
            }
            if let Some((k, delta)) = best {
                trimmed.insert(k, c);
                self.routes[src] = trimmed;
                return Some(delta);
            }
            return None;
        }

        if self.loads[target] + self.demand[c] > self.cap {
            return None;
        }
        let mut best: Option<(usize, f64)> = None;
        for k in 0..=self.routes[target].len() {
            if !budget.spend(1) {
                break;
            }
            let u = if k == 0 {
                None
            } else {
                Some(self.routes[target][k - 1])
            };
            let v = self.routes[target].get(k).copied();
            let insertion = self.dist(u, Some(c)) + self.dist(Some(c), v) - self.dist(u, v);
            let delta = removal + insertion;
            if delta < -1e-9 && best.map_or(true, |(_, bd)| delta < bd) {
                best = Some((k, delta));
            }
        }
        if let Some((k, delta)) = best {
            self.routes[src].remove(pos);
            self.loads[src] -= self.demand[c];
            self.routes[target].insert(k, c);
            self.loads[target] += self.demand[c];
            self.remove_empty();
            return Some(delta);
        }
        None
    }

    /// Exchange the positions of customers `a` and `b`.
    fn try_swap(&mut self, a: usize, b: usize, budget: &mut Budget) -> Option<f64> {
        if a == b || !budget.spend(1) {
            return None;
        }
        let (ra, pa) = self.locate(a);
        let (rb, pb) = self.locate(b);
        if ra != rb {
            let la = self.loads[ra] - self.demand[a] + self.demand[b];
            let lb = self.loads[rb] - self.demand[b] + self.demand[a];
            if la > self.cap || lb > self.cap {
                return None;
            }
        }
        let neighbor = |r: usize, p: usize, off: i64| -> Option<usize> {
            let q = p as i64 + off;
            if q < 0 || q as usize >= self.routes[r].len() {
                None
            } else {
                Some(self.routes[r][q as usize])
            }
        };
        let delta = if ra == rb && (pa as i64 - pb as i64).abs() == 1 {
            let (first, second, pf) = if pa < pb { (a, b, pa) } else { (b, a, pb) };
            let prev = neighbor(ra, pf, -1);
            let next = neighbor(ra, pf + 1, 1);
            self.dist(prev, Some(second)) + self.dist(Some(first), next)
                - self.dist(prev, Some(first))
                - self.dist(Some(second), next)
        } else {
            let pa_prev = neighbor(ra, pa, -1);
            let pa_next = neighbor(ra, pa, 1);
            let pb_prev = neighbor(rb, pb, -1);
            let pb_next = neighbor(rb, pb, 1);
            self.dist(pa_prev, Some(b)) + self.dist(Some(b), pa_next)
                + self.dist(pb_prev, Some(a))
                + self.dist(Some(a), pb_next)
                - self.dist(pa_prev, Some(a))
                - self.dist(Some(a), pa_next)
                - self.dist(pb_prev, Some(b))
                - self.dist(Some(b), pb_next)
        };
        if delta < -1e-9 {
            self.routes[ra][pa] = b;
            self.routes[rb][pb] = a;
            if ra != rb {
                self.loads[ra] = self.loads[ra] - self.demand[a] + self.demand[b];
                self.loads[rb] = self.loads[rb] - self.demand[b] + self.demand[a];
            }
            Some(delta)
        } else {
            None
        }
    }

    /// First-improvement segment reversal within route `r`.
    fn try_two_opt(&mut self, r: usize, budget: &mut Budget) -> Option<f64> {
        let len = self.routes[r].len();
        if len < 3 {
            return None;
        }
        for a in 0..len - 1 {
            for b in a + 1..len {
                if !budget.spend(1) {
                    return None;
                }
                let route = &self.routes[r];
                let before = if a == 0 { None } else { Some(route[a - 1]) };
                let after = route.get(b + 1).copied();
                let delta = self.dist(before, Some(route[b]))
                    + self.dist(Some(route[a]), after)
                    - self.dist(before, Some(route[a]))
                    - self.dist(Some(route[b]), after);
                if delta < -1e-9 {
                    self.routes[r][a..=b].reverse();
                    return Some(delta);
                }
            }
        }
        None
    }

    /// First-improvement tail exchange between routes `r1` and `r2`.
    fn try_two_opt_star(&mut self, r1: usize, r2: usize, budget: &mut Budget) -> Option<f64> {
        if r1 == r2 {
            return None;
        }
        let (len1, len2) = (self.routes[r1].len(), self.routes[r2].len());
        let prefix = |r: usize| -> Vec<u64> {
            let mut acc = vec![0u64];
            for &c in &self.routes[r] {
                acc.push(acc.last().unwrap() + self.demand[c]);
            }
            acc
        };
        let (p1, p2) = (prefix(r1), prefix(r2));
        let (t1, t2) = (p1[len1], p2[len2]);
        for i in 0..=len1 {
            for j in 0..=len2 {
                if i == len1 && j == len2 {
                    continue;
                }
                if !budget.spend(1) {
                    return None;
                }
                let new1 = p1[i] + (t2 - p2[j]);
                let new2 = p2[j] + (t1 - p1[i]);
                if new1 > self.cap || new2 > self.cap {
                    continue;
                }
                let x_i = if i == 0 { None } else { Some(self.routes[r1][i - 1]) };
                let x_n = self.routes[r1].get(i).copied();
                let y_j = if j == 0 { None } else { Some(self.routes[r2][j - 1]) };
                let y_n = self.routes[r2].get(j).copied();
                let delta = self.dist(x_i, y_n) + self.dist(y_j, x_n)
                    - self.dist(x_i, x_n)
                    - self.dist(y_j, y_n);
                if delta < -1e-9 {
                    let tail1: Vec<usize> = self.routes[r1].split_off(i);
                    let tail2: Vec<usize> = self.routes[r2].split_off(j);
                    self.routes[r1].extend(tail2);
                    self.routes[r2].extend(tail1);
                    self.loads[r1] = new1;
                    self.loads[r2] = new2;
                    self.remove_empty();
                    return Some(delta);
                }
            }
        }
        None
    }
}

/// Randomized first-improvement sweeps over the configured move
/// families until a full pass yields no improvement or the budget runs
/// out. Every accepted move strictly decreases total cost.
pub(crate) fn improve(
    state: &mut LsState,
    ops: &[LocalSearchOp],
    rng: &mut ChaCha8Rng,
    budget: &mut Budget,
) {
    let n = state.demand.len();
    let mut customers: Vec<usize> = (0..n).collect();
    loop {
        let mut improved = false;
        for &op in ops {
            if budget.exhausted() {
                return;
            }
            match op {
                LocalSearchOp::Relocate => {
                    customers.shuffle(rng);
                    for idx in 0..customers.len() {
                        let c = customers[idx];
                        let mut targets: Vec<usize> = (0..state.routes.len()).collect();
                        targets.shuffle(rng);
                        for t in targets {
                            if t >= state.routes.len() {
                                continue;
                            }
                            if state.try_relocate(c, t, budget).is_some() {
                                improved = true;
                                break;
                            }
                            if budget.exhausted() {
                                return;
                            }
                        }
                    }
                }
                LocalSearchOp::Swap => {
                    customers.shuffle(rng);
                    for i in 0..customers.len() {
                        for j in i + 1..customers.len() {
                            if state.try_swap(customers[i], customers[j], budget).is_some() {
                                improved = true;
                                break;
                            }
                            if budget.exhausted() {
                                return;
                            }
                        }
                    }
                }
                LocalSearchOp::TwoOpt => {
                    let mut order: Vec<usize> = (0..state.routes.len()).collect();
                    order.shuffle(rng);
                    for r in order {
                        if r >= state.routes.len() {
                            continue;
                        }
                        while state.try_two_opt(r, budget).is_some() {
                            improved = true;
                        }
                        if budget.exhausted() {
                            return;
                        }
                    }
                }
                LocalSearchOp::InterRouteTwoOptStar => {
                    let m = state.routes.len();
                    let mut pairs: Vec<(usize, usize)> = (0..m)
                        .flat_map(|a| (a + 1..m).map(move |b| (a, b)))
                        .collect();
                    pairs.shuffle(rng);
                    for (a, b) in pairs {
                        if a >= state.routes.len() || b >= state.routes.len() {
                            continue;
                        }
                        if state.try_two_opt_star(a, b, budget).is_some() {
                            improved = true;
                        }
                        if budget.exhausted() {
                            return;
                        }
                    }
                }
            }
        }
        if !improved {
            return;
        }
    }
}

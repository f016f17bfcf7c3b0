use serde::{Deserialize, Serialize};
use std::ops::RangeInclusive;

use crate::error::{Error, Result};
use crate::geom::Point;

/// A customer: a location plus a positive integer demand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Customer {
    pub pos: Point,
    pub demand: u32,
}

/// Single-depot capacitated routing instance. The fleet is homogeneous
/// with capacity `capacity`; `fleet_limit` of `None` means an unbounded
/// number of vehicles may be used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvrpInstance {
    pub depot: Point,
    pub customers: Vec<Customer>,
    pub capacity: u32,
    pub fleet_limit: Option<u32>,
}

impl CvrpInstance {
    pub fn new(
        depot: Point,
        customers: Vec<Customer>,
        capacity: u32,
        fleet_limit: Option<u32>,
    ) -> Result<Self> {
        if customers.is_empty() {
            return Err(Error::Config("instance needs at least one customer".into()));
        }
        if capacity == 0 {
            return Err(Error::Config("vehicle capacity must be positive".into()));
        }
        if !depot.is_finite() || customers.iter().any(|c| !c.pos.is_finite()) {
            return Err(Error::Config("coordinates must be finite".into()));
        }
        if let Some(c) = customers.iter().find(|c| c.demand > capacity) {
            return Err(Error::Config(format!(
                "demand {} exceeds vehicle capacity {}",
                c.demand, capacity
            )));
        }
        if customers.iter().any(|c| c.demand == 0) {
            return Err(Error::Config("demands must be positive".into()));
        }
        if let Some(m) = fleet_limit {
            if m == 0 {
                return Err(Error::Config("fleet limit must be positive".into()));
            }
        }
        Ok(CvrpInstance {
            depot,
            customers,
            capacity,
            fleet_limit,
        })
    }

    pub fn n(&self) -> usize {
        self.customers.len()
    }

    pub fn total_demand(&self) -> u64 {
        self.customers.iter().map(|c| c.demand as u64).sum()
    }

    /// Smallest number of vehicles that can cover the total demand.
    pub fn min_vehicles(&self) -> u32 {
        let q = self.capacity as u64;
        ((self.total_demand() + q - 1) / q) as u32
    }
}

/// Multi-depot routing instance. Every depot fields a homogeneous fleet
/// of `vehicles_per_depot[d]` vehicles with shared capacity `capacity`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdvrpInstance {
    pub depots: Vec<Point>,
    pub customers: Vec<Customer>,
    pub vehicles_per_depot: Vec<u32>,
    pub capacity: u32,
}

impl MdvrpInstance {
    pub fn new(
        depots: Vec<Point>,
        customers: Vec<Customer>,
        vehicles_per_depot: Vec<u32>,
        capacity: u32,
    ) -> Result<Self> {
        if depots.len() < 2 {
            return Err(Error::Config(
                "multi-depot instance needs at least two depots".into(),
            ));
        }
        if vehicles_per_depot.len() != depots.len() {
            return Err(Error::Config("one fleet entry per depot required".into()));
        }
        if customers.is_empty() {
            return Err(Error::Config("instance needs at least one customer".into()));
        }
        if customers.iter().any(|c| c.demand == 0 || c.demand > capacity) {
            return Err(Error::Config(
                "every demand must satisfy 0 < q <= capacity".into(),
            ));
        }
        let total: u64 = customers.iter().map(|c| c.demand as u64).sum();
        let fleet_cap: u64 = vehicles_per_depot
            .iter()
            .map(|&m| m as u64 * capacity as u64)
            .sum();
        if total > fleet_cap {
            return Err(Error::Infeasible(format!(
                "total demand {total} exceeds total fleet capacity {fleet_cap}"
            )));
        }
        Ok(MdvrpInstance {
            depots,
            customers,
            vehicles_per_depot,
            capacity,
        })
    }

    pub fn n(&self) -> usize {
        self.customers.len()
    }

    pub fn num_depots(&self) -> usize {
        self.depots.len()
    }

    pub fn total_demand(&self) -> u64 {
        self.customers.iter().map(|c| c.demand as u64).sum()
    }

    /// Fleet capacity available at depot `d`.
    pub fn depot_fleet_capacity(&self, d: usize) -> u64 {
        self.vehicles_per_depot[d] as u64 * self.capacity as u64
    }
}

/// Location-routing instance: depots are candidates with a holding
/// capacity and an opening cost; every used route also pays a fixed
/// opening cost. The vehicle fleet per open depot is unbounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClrpInstance {
    pub depots: Vec<Point>,
    pub customers: Vec<Customer>,
    pub vehicle_capacity: u32,
    /// Per-depot holding capacity W_d; `f64::INFINITY` means
    /// uncapacitated (serialized as null, since JSON has no infinity).
    #[serde(with = "capacity_serde")]
    pub depot_capacities: Vec<f64>,
    pub depot_opening_costs: Vec<f64>,
    pub route_opening_cost: f64,
}

mod capacity_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(caps: &[f64], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(caps.iter().map(|&c| if c.is_finite() { Some(c) } else { None }))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let raw: Vec<Option<f64>> = Vec::deserialize(d)?;
        Ok(raw
            .into_iter()
            .map(|c| c.unwrap_or(f64::INFINITY))
            .collect())
    }
}

impl ClrpInstance {
    pub fn new(
        depots: Vec<Point>,
        customers: Vec<Customer>,
        vehicle_capacity: u32,
        depot_capacities: Vec<f64>,
        depot_opening_costs: Vec<f64>,
        route_opening_cost: f64,
    ) -> Result<Self> {
        if depots.is_empty() {
            return Err(Error::Config("at least one candidate depot required".into()));
        }
        if depot_capacities.len() != depots.len() || depot_opening_costs.len() != depots.len() {
            return Err(Error::Config("one capacity and cost per depot required".into()));
        }
        if depot_capacities.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::Config("depot capacities must be positive".into()));
        }
        if depot_opening_costs.iter().any(|&f| f < 0.0) || route_opening_cost < 0.0 {
            return Err(Error::Config("opening costs must be nonnegative".into()));
        }
        if customers.is_empty() {
            return Err(Error::Config("instance needs at least one customer".into()));
        }
        if customers
            .iter()
            .any(|c| c.demand == 0 || c.demand > vehicle_capacity)
        {
            return Err(Error::Config(
                "every demand must satisfy 0 < q <= vehicle capacity".into(),
            ));
        }
        Ok(ClrpInstance {
            depots,
            customers,
            vehicle_capacity,
            depot_capacities,
            depot_opening_costs,
            route_opening_cost,
        })
    }

    pub fn n(&self) -> usize {
        self.customers.len()
    }

    pub fn num_depots(&self) -> usize {
        self.depots.len()
    }

    pub fn total_demand(&self) -> u64 {
        self.customers.iter().map(|c| c.demand as u64).sum()
    }
}

/// One vehicle route: an ordered customer sequence (indices into the
/// owning instance), its load, and its closed-tour cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub customers: Vec<usize>,
    pub load: u64,
    pub cost: f64,
}

/// A full multi-depot routing solution: one route list per depot.
/// `total_cost = routing_cost + opening_cost` (opening costs are zero
/// outside location-routing mode).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingSolution {
    pub routes_per_depot: Vec<Vec<Route>>,
    pub routing_cost: f64,
    pub opening_cost: f64,
    pub total_cost: f64,
}

impl RoutingSolution {
    pub fn assignment(&self, n: usize) -> Vec<usize> {
        let mut genes = vec![usize::MAX; n];
        for (d, routes) in self.routes_per_depot.iter().enumerate() {
            for r in routes {
                for &c in &r.customers {
                    genes[c] = d;
                }
            }
        }
        genes
    }

    pub fn num_routes(&self) -> usize {
        self.routes_per_depot.iter().map(|r| r.len()).sum()
    }

    /// Check structural feasibility against a multi-depot instance and
    /// verify the stored loads/costs, within `1e-9` relative on costs.
    pub fn validate(&self, inst: &MdvrpInstance) -> Result<()> {
        self.validate_inner(
            &inst.depots,
            &inst.customers,
            inst.capacity,
            Some(&inst.vehicles_per_depot),
        )
    }

    pub(crate) fn validate_inner(
        &self,
        depots: &[Point],
        customers: &[Customer],
        capacity: u32,
        fleet: Option<&[u32]>,
    ) -> Result<()> {
        if self.routes_per_depot.len() != depots.len() {
            return Err(Error::InvalidSolution(format!(
                "expected {} depot route lists, found {}",
                depots.len(),
                self.routes_per_depot.len()
            )));
        }
        let mut seen = vec![false; customers.len()];
        let mut routing = 0.0;
        for (d, routes) in self.routes_per_depot.iter().enumerate() {
            if let Some(limits) = fleet {
                if routes.len() > limits[d] as usize {
                    return Err(Error::InvalidSolution(format!(
                        "depot {} uses {} routes but fields only {} vehicles",
                        d,
                        routes.len(),
                        limits[d]
                    )));
                }
            }
            for route in routes {
                if route.customers.is_empty() {
                    return Err(Error::InvalidSolution(format!("empty route at depot {d}")));
                }
                let mut load = 0u64;
                let mut cost = 0.0;
                let mut prev = depots[d];
                for &c in &route.customers {
                    let cust = customers.get(c).ok_or_else(|| {
                        Error::InvalidSolution(format!("route references unknown customer {c}"))
                    })?;
                    if seen[c] {
                        return Err(Error::InvalidSolution(format!(
                            "customer {c} visited more than once"
                        )));
                    }
                    seen[c] = true;
                    load += cust.demand as u64;
                    cost += prev.dist(&cust.pos);
                    prev = cust.pos;
                }
                cost += prev.dist(&depots[d]);
                if load > capacity as u64 {
                    return Err(Error::InvalidSolution(format!(
                        "route at depot {d} carries load {load} > capacity {capacity}"
                    )));
                }
                if load != route.load {
                    return Err(Error::InvalidSolution(format!(
                        "stored load {} disagrees with recomputed {load}",
                        route.load
                    )));
                }
                let scale = cost.abs().max(1.0);
                if (cost - route.cost).abs() > 1e-9 * scale {
                    return Err(Error::InvalidSolution(format!(
                        "stored route cost {} disagrees with recomputed {cost}",
                        route.cost
                    )));
                }
                routing += cost;
            }
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(Error::InvalidSolution(format!(
                "customer {missing} is not visited"
            )));
        }
        let scale = routing.abs().max(1.0);
        if (routing - self.routing_cost).abs() > 1e-9 * scale {
            return Err(Error::InvalidSolution(format!(
                "stored routing cost {} disagrees with recomputed {routing}",
                self.routing_cost
            )));
        }
        let total = self.routing_cost + self.opening_cost;
        if (total - self.total_cost).abs() > 1e-9 * total.abs().max(1.0) {
            return Err(Error::InvalidSolution(
                "total cost is not routing + opening".into(),
            ));
        }
        Ok(())
    }
}

/// Customer positioning rule for generated instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Positioning {
    /// Uniform over the grid.
    R,
    /// Cluster seeds attract the remaining customers with exponential decay.
    C,
    /// Half random, half clustered.
    RC,
}

impl std::str::FromStr for Positioning {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "R" => Ok(Positioning::R),
            "C" => Ok(Positioning::C),
            "RC" => Ok(Positioning::RC),
            other => Err(Error::Config(format!("unknown positioning '{other}'"))),
        }
    }
}

/// Demand distribution for generated instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DemandModel {
    /// Integers uniform in [1,100].
    Uniform,
    /// Every demand equals 1.
    Unitary,
    /// Uniform [1,50] in even quadrants, [51,100] in odd quadrants,
    /// about the grid center.
    Quadrant,
}

impl std::str::FromStr for DemandModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" => Ok(DemandModel::Uniform),
            "unitary" => Ok(DemandModel::Unitary),
            "quadrant" => Ok(DemandModel::Quadrant),
            other => Err(Error::Config(format!("unknown demand model '{other}'"))),
        }
    }
}

/// Parameters for the random instance generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub customers: RangeInclusive<usize>,
    pub depots: RangeInclusive<usize>,
    pub positioning: Positioning,
    pub demand: DemandModel,
    pub grid_size: u32,
    /// Vehicle capacity for generated fleets.
    pub vehicle_capacity: u32,
    /// Exponential decay length for clustered positioning.
    pub cluster_decay: f64,
    pub seed: u64,
}

impl Default for InstanceSpec {
    fn default() -> Self {
        InstanceSpec {
            customers: 100..=100,
            depots: 2..=2,
            positioning: Positioning::R,
            demand: DemandModel::Uniform,
            grid_size: 1000,
            vehicle_capacity: 300,
            cluster_decay: 40.0,
            seed: 0,
        }
    }
}

impl InstanceSpec {
    pub fn validate(&self) -> Result<()> {
        if self.customers.is_empty() || self.depots.is_empty() {
            return Err(Error::Config("size ranges must be nonempty".into()));
        }
        if self.grid_size == 0 {
            return Err(Error::Config("grid size must be positive".into()));
        }
        if self.vehicle_capacity < 100 && self.demand != DemandModel::Unitary {
            // Demands go up to 100; the capacity must admit every customer.
            return Err(Error::Config(
                "vehicle capacity must be at least the maximum demand (100)".into(),
            ));
        }
        if !(self.cluster_decay > 0.0) {
            return Err(Error::Config("cluster decay must be positive".into()));
        }
        Ok(())
    }
}

/// One per-depot routing subproblem produced by `decompose`.
#[derive(Debug, Clone)]
pub struct Subproblem {
    pub depot_index: usize,
    /// Indices into the parent instance's customer list, in gene order.
    pub customer_indices: Vec<usize>,
    pub instance: CvrpInstance,
}

/// Split a multi-depot instance into one single-depot subproblem per
/// depot that serves at least one customer. The subproblems partition
/// the customer set.
pub fn decompose(inst: &MdvrpInstance, assignment: &[usize]) -> Result<Vec<Subproblem>> {
    decompose_parts(
        &inst.depots,
        &inst.customers,
        inst.capacity,
        assignment,
        |d| Some(inst.vehicles_per_depot[d]),
    )
}

pub(crate) fn decompose_parts(
    depots: &[Point],
    customers: &[Customer],
    capacity: u32,
    assignment: &[usize],
    fleet_limit: impl Fn(usize) -> Option<u32>,
) -> Result<Vec<Subproblem>> {
    if assignment.len() != customers.len() {
        return Err(Error::Config(format!(
            "assignment length {} does not match {} customers",
            assignment.len(),
            customers.len()
        )));
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); depots.len()];
    for (i, &d) in assignment.iter().enumerate() {
        let slot = groups
            .get_mut(d)
            .ok_or_else(|| Error::Config(format!("gene {d} is not a valid depot index")))?;
        slot.push(i);
    }
    let mut subs = Vec::new();
    for (d, members) in groups.into_iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        let cust: Vec<Customer> = members.iter().map(|&i| customers[i]).collect();
        let instance = CvrpInstance::new(depots[d], cust, capacity, fleet_limit(d))?;
        subs.push(Subproblem {
            depot_index: d,
            customer_indices: members,
            instance,
        });
    }
    Ok(subs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn customer(x: f64, y: f64, q: u32) -> Customer {
        Customer {
            pos: Point::new(x, y),
            demand: q,
        }
    }

    fn little_mdvrp() -> MdvrpInstance {
        let customers = (0..8)
            .map(|i| customer(i as f64 * 10.0, 5.0, 10))
            .collect();
        MdvrpInstance::new(
            vec![Point::new(0.0, 0.0), Point::new(40.0, 0.0), Point::new(70.0, 0.0)],
            customers,
            vec![2, 2, 2],
            100,
        )
        .unwrap()
    }

    #[test]
    fn rejects_single_depot() {
        let err = MdvrpInstance::new(
            vec![Point::new(0.0, 0.0)],
            vec![customer(1.0, 1.0, 5)],
            vec![1],
            10,
        );
        assert!(err.is_err());
    }

    #[test]
    fn rejects_demand_above_capacity() {
        let err = CvrpInstance::new(Point::new(0.0, 0.0), vec![customer(1.0, 1.0, 11)], 10, None);
        assert!(err.is_err());
    }

    #[test]
    fn decompose_partition_sizes_match_gene_counts() {
        let inst = little_mdvrp();
        // Genes written with depots 1-indexed in the reference figure; ours
        // are 0-indexed, so [2,3,1,1,3,2,1,3] becomes the vector below.
        let assignment = vec![1, 2, 0, 0, 2, 1, 0, 2];
        let subs = decompose(&inst, &assignment).unwrap();
        let mut sizes: Vec<usize> = subs.iter().map(|s| s.customer_indices.len()).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![2, 3, 3]);
    }

    #[test]
    fn decompose_single_cluster() {
        let inst = little_mdvrp();
        let assignment = vec![0; 8];
        let subs = decompose(&inst, &assignment).unwrap();
        assert_eq!(subs.len(), 1);
        assert_eq!(subs[0].depot_index, 0);
        assert_eq!(subs[0].customer_indices.len(), 8);
    }

    #[test]
    fn decompose_rejects_bad_gene() {
        let inst = little_mdvrp();
        let assignment = vec![0, 0, 0, 0, 0, 0, 0, 3];
        assert!(decompose(&inst, &assignment).is_err());
    }

    #[test]
    fn validate_catches_duplicate_customer() {
        let inst = little_mdvrp();
        let mk = |c: Vec<usize>, d: usize| {
            let load = c.iter().map(|&i| inst.customers[i].demand as u64).sum();
            let mut cost = 0.0;
            let mut prev = inst.depots[d];
            for &i in &c {
                cost += prev.dist(&inst.customers[i].pos);
                prev = inst.customers[i].pos;
            }
            cost += prev.dist(&inst.depots[d]);
            Route {
                customers: c,
                load,
                cost,
            }
        };
        let r0 = mk(vec![0, 1, 2, 3], 0);
        let r1 = mk(vec![4, 5, 6, 7], 1);
        let routing = r0.cost + r1.cost;
        let ok = RoutingSolution {
            routes_per_depot: vec![vec![r0.clone()], vec![r1.clone()], vec![]],
            routing_cost: routing,
            opening_cost: 0.0,
            total_cost: routing,
        };
        ok.validate(&inst).unwrap();

        let dup = mk(vec![3, 4, 5, 6, 7], 1);
        let bad = RoutingSolution {
            routes_per_depot: vec![vec![r0.clone()], vec![dup.clone()], vec![]],
            routing_cost: r0.cost + dup.cost,
            opening_cost: 0.0,
            total_cost: r0.cost + dup.cost,
        };
        assert!(bad.validate(&inst).is_err());
    }
}

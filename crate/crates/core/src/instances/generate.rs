use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geom::Point;

use super::types::{
    Customer, CvrpInstance, DemandModel, InstanceSpec, MdvrpInstance, Positioning,
};

/// Quadrant of `p` about `center`, numbered 1..4 counterclockwise.
/// Points on an axis belong to the lower-numbered adjacent quadrant,
/// and the center itself to quadrant 1.
pub fn quadrant(p: Point, center: Point) -> u8 {
    let dx = p.x - center.x;
    let dy = p.y - center.y;
    if dx == 0.0 && dy == 0.0 {
        1
    } else if dy == 0.0 {
        if dx > 0.0 {
            1
        } else {
            2
        }
    } else if dx == 0.0 {
        if dy > 0.0 {
            1
        } else {
            3
        }
    } else if dx > 0.0 && dy > 0.0 {
        1
    } else if dx < 0.0 && dy > 0.0 {
        2
    } else if dx < 0.0 {
        3
    } else {
        4
    }
}

/// Quadrant-dependent demand: odd quadrants draw from [51,100], even
/// quadrants from [1,50].
pub fn quadrant_demand(p: Point, grid_size: u32, rng: &mut impl Rng) -> u32 {
    let center = Point::new(grid_size as f64 / 2.0, grid_size as f64 / 2.0);
    if quadrant(p, center) % 2 == 1 {
        rng.gen_range(51..=100)
    } else {
        rng.gen_range(1..=50)
    }
}

fn uniform_point(grid: u32, rng: &mut impl Rng) -> Point {
    Point::new(
        rng.gen_range(0..=grid) as f64,
        rng.gen_range(0..=grid) as f64,
    )
}

/// Clustered positions: `seeds` uniformly placed cluster seeds attract
/// the remaining points; a candidate at distance d from a seed weighs
/// exp(-d/decay), and candidates are accepted by rejection sampling
/// against the summed weight.
fn clustered_points(n: usize, grid: u32, decay: f64, rng: &mut impl Rng) -> Vec<Point> {
    let s = rng.gen_range(3..=8).min(n.max(1));
    let seeds: Vec<Point> = (0..s).map(|_| uniform_point(grid, rng)).collect();
    let mut out = seeds.clone();
    while out.len() < n {
        let cand = uniform_point(grid, rng);
        let weight: f64 = seeds
            .iter()
            .map(|sd| (-cand.dist(sd) / decay).exp())
            .sum::<f64>()
            / s as f64;
        if rng.gen::<f64>() < weight {
            out.push(cand);
        }
    }
    out.truncate(n);
    out
}

fn positions(n: usize, spec: &InstanceSpec, rng: &mut impl Rng) -> Vec<Point> {
    match spec.positioning {
        Positioning::R => (0..n).map(|_| uniform_point(spec.grid_size, rng)).collect(),
        Positioning::C => clustered_points(n, spec.grid_size, spec.cluster_decay, rng),
        Positioning::RC => {
            let half = n / 2;
            let mut pts: Vec<Point> = (0..half)
                .map(|_| uniform_point(spec.grid_size, rng))
                .collect();
            pts.extend(clustered_points(
                n - half,
                spec.grid_size,
                spec.cluster_decay,
                rng,
            ));
            pts
        }
    }
}

fn demands(points: &[Point], spec: &InstanceSpec, rng: &mut impl Rng) -> Vec<u32> {
    points
        .iter()
        .map(|&p| match spec.demand {
            DemandModel::Uniform => rng.gen_range(1..=100),
            DemandModel::Unitary => 1,
            DemandModel::Quadrant => quadrant_demand(p, spec.grid_size, rng),
        })
        .collect()
}

fn sample_range(range: &std::ops::RangeInclusive<usize>, rng: &mut impl Rng) -> usize {
    rng.gen_range(*range.start()..=*range.end())
}

/// Generate a single-depot instance. Deterministic in (spec, seed);
/// the fleet is unbounded.
pub fn generate_cvrp(spec: &InstanceSpec, rng_seed: u64) -> Result<CvrpInstance> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let n = sample_range(&spec.customers, &mut rng);
    if n == 0 {
        return Err(Error::Config("customer count must be positive".into()));
    }
    let depot = uniform_point(spec.grid_size, &mut rng);
    let pts = positions(n, spec, &mut rng);
    let qs = demands(&pts, spec, &mut rng);
    let customers = pts
        .into_iter()
        .zip(qs)
        .map(|(pos, demand)| Customer { pos, demand })
        .collect();
    CvrpInstance::new(depot, customers, spec.vehicle_capacity, None)
}

/// Generate a multi-depot instance. Depots are placed uniformly on the
/// grid; each depot fields ceil(1.2 * (total demand / depots) / Q)
/// vehicles, so nearest-depot style assignments are usually but not
/// always fleet-feasible.
pub fn generate_mdvrp(spec: &InstanceSpec, rng_seed: u64) -> Result<MdvrpInstance> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let d = sample_range(&spec.depots, &mut rng);
    if d < 2 {
        return Err(Error::Config(
            "multi-depot generation requires at least two depots".into(),
        ));
    }
    let n = sample_range(&spec.customers, &mut rng);
    if n == 0 {
        return Err(Error::Config("customer count must be positive".into()));
    }
    let depots: Vec<Point> = (0..d).map(|_| uniform_point(spec.grid_size, &mut rng)).collect();
    let pts = positions(n, spec, &mut rng);
    let qs = demands(&pts, spec, &mut rng);
    let customers: Vec<Customer> = pts
        .into_iter()
        .zip(qs)
        .map(|(pos, demand)| Customer { pos, demand })
        .collect();
    let total: u64 = customers.iter().map(|c| c.demand as u64).sum();
    let per_depot = total as f64 / d as f64;
    let m = ((1.2 * per_depot / spec.vehicle_capacity as f64).ceil() as u32).max(1);
    MdvrpInstance::new(depots, customers, vec![m; d], spec.vehicle_capacity)
}

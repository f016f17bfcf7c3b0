use crate::instances::types::CvrpInstance;

use super::linalg::Matrix;

/// Graph form of a single-depot instance as consumed by the predictor:
/// node 0 is the depot, nodes 1..=n the customers. Features per node
/// are normalized x, normalized y, and demand divided by capacity
/// (zero for the depot), all in [0,1].
#[derive(Debug, Clone)]
pub struct KnnGraph {
    pub features: Matrix,
    pub neighbors: Vec<Vec<usize>>,
    /// The coordinate divisor used in normalization; predictions in
    /// normalized space are rescaled by this factor.
    pub scale_factor: f64,
}

impl KnnGraph {
    pub fn num_nodes(&self) -> usize {
        self.features.rows
    }
}

/// Build the k-nearest-neighbor graph. Coordinates are translated so
/// the per-axis minimum sits at zero and divided by the largest
/// translated coordinate. Neighbor ties are broken by the candidate's
/// coordinates and demand before falling back to its index, so
/// neighbor sets do not depend on customer ordering.
pub fn build_knn_graph(inst: &CvrpInstance, k: usize) -> KnnGraph {
    let n = inst.n();
    let nodes = n + 1;
    let pos = |i: usize| {
        if i == 0 {
            inst.depot
        } else {
            inst.customers[i - 1].pos
        }
    };
    let demand = |i: usize| {
        if i == 0 {
            0.0
        } else {
            inst.customers[i - 1].demand as f64
        }
    };

    let min_x = (0..nodes).map(|i| pos(i).x).fold(f64::INFINITY, f64::min);
    let min_y = (0..nodes).map(|i| pos(i).y).fold(f64::INFINITY, f64::min);
    let mut scale = 0.0f64;
    for i in 0..nodes {
        scale = scale.max(pos(i).x - min_x).max(pos(i).y - min_y);
    }
    if scale == 0.0 {
        // All nodes coincide; keep features at zero instead of dividing.
        scale = 1.0;
    }

    let features = Matrix::from_fn(nodes, 3, |i, j| match j {
        0 => (pos(i).x - min_x) / scale,
        1 => (pos(i).y - min_y) / scale,
        _ => demand(i) / inst.capacity as f64,
    });

    let k = k.max(1).min(nodes - 1);
    let mut neighbors = Vec::with_capacity(nodes);
    for i in 0..nodes {
        let pi = pos(i);
        let mut cand: Vec<usize> = (0..nodes).filter(|&j| j != i).collect();
        cand.sort_by(|&a, &b| {
            let da = pi.dist_sq(&pos(a));
            let db = pi.dist_sq(&pos(b));
            da.partial_cmp(&db)
                .unwrap()
                .then(pos(a).x.partial_cmp(&pos(b).x).unwrap())
                .then(pos(a).y.partial_cmp(&pos(b).y).unwrap())
                .then(demand(a).partial_cmp(&demand(b)).unwrap())
                .then(a.cmp(&b))
        });
        cand.truncate(k);
        neighbors.push(cand);
    }

    KnnGraph {
        features,
        neighbors,
        scale_factor: scale,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Point;
    use crate::instances::types::Customer;

    fn cust(x: f64, y: f64, q: u32) -> Customer {
        Customer {
            pos: Point::new(x, y),
            demand: q,
        }
    }

    #[test]
    fn complete_lists_when_k_large() {
        let inst = CvrpInstance::new(
            Point::new(0.0, 0.0),
            vec![cust(1.0, 0.0, 1), cust(2.0, 0.0, 1), cust(3.0, 0.0, 1)],
            10,
            None,
        )
        .unwrap();
        let g = build_knn_graph(&inst, 50);
        for (i, ns) in g.neighbors.iter().enumerate() {
            assert_eq!(ns.len(), 3);
            assert!(!ns.contains(&i));
        }
    }

    #[test]
    fn grid_normalization_divides_by_max() {
        let inst = CvrpInstance::new(
            Point::new(0.0, 0.0),
            vec![cust(1000.0, 500.0, 50)],
            100,
            None,
        )
        .unwrap();
        let g = build_knn_graph(&inst, 1);
        assert_eq!(g.scale_factor, 1000.0);
        assert_eq!(g.features.row(0), &[0.0, 0.0, 0.0]);
        assert_eq!(g.features.row(1), &[1.0, 0.5, 0.5]);
    }

    #[test]
    fn collinear_points_pick_nearer_side() {
        // Depot at 0, customers at 1, 2, 4 on a line. With k=1 the
        // interior customer at 2 prefers its nearer adjacent point (1).
        let inst = CvrpInstance::new(
            Point::new(0.0, 0.0),
            vec![cust(1.0, 0.0, 1), cust(2.0, 0.0, 1), cust(4.0, 0.0, 1)],
            10,
            None,
        )
        .unwrap();
        let g = build_knn_graph(&inst, 1);
        assert_eq!(g.neighbors[0], vec![1]); // depot -> customer at x=1
        assert_eq!(g.neighbors[1], vec![0]); // x=1 -> depot (dist 1)
        assert_eq!(g.neighbors[2], vec![1]); // x=2 -> x=1 (dist 1 < 2)
        assert_eq!(g.neighbors[3], vec![2]); // x=4 -> x=2
    }

    #[test]
    fn features_stay_in_unit_range() {
        let inst = CvrpInstance::new(
            Point::new(-50.0, 30.0),
            vec![cust(-20.0, -40.0, 7), cust(10.0, 80.0, 9)],
            10,
            None,
        )
        .unwrap();
        let g = build_knn_graph(&inst, 2);
        for v in &g.features.data {
            assert!((0.0..=1.0).contains(v), "feature {v} outside [0,1]");
        }
    }
}

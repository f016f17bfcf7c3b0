use rayon::prelude::*;

use crate::estimators::CostEstimator;
use crate::instances::types::CvrpInstance;

use super::graph::build_knn_graph;
use super::model::PredictorModel;

/// Batch ceiling by subproblem size; larger problems go through in
/// smaller slices to keep memory bounded.
pub fn bucket_batch_limit(n: usize) -> usize {
    match n {
        0..=99 => 512,
        100..=199 => 256,
        200..=299 => 128,
        300..=399 => 64,
        _ => 32,
    }
}

/// Inference wrapper: builds each instance's graph and evaluates the
/// model, splitting oversize batches internally. Order-preserving.
#[derive(Debug, Clone)]
pub struct NnEstimator {
    pub model: PredictorModel,
}

impl NnEstimator {
    pub fn new(model: PredictorModel) -> Self {
        NnEstimator { model }
    }

    /// Split indices into chunks that honor every member's bucket limit.
    fn chunks(&self, instances: &[CvrpInstance]) -> Vec<std::ops::Range<usize>> {
        let mut out = Vec::new();
        let mut start = 0;
        while start < instances.len() {
            let mut limit = bucket_batch_limit(instances[start].n());
            let mut end = start;
            while end < instances.len() && end - start < limit {
                limit = limit.min(bucket_batch_limit(instances[end].n()));
                if end - start >= limit {
                    break;
                }
                end += 1;
            }
            out.push(start..end.max(start + 1));
            start = end.max(start + 1);
        }
        out
    }
}

impl CostEstimator for NnEstimator {
    fn estimate_batch(&self, instances: &[CvrpInstance]) -> Vec<f64> {
        let mut predictions = Vec::with_capacity(instances.len());
        for range in self.chunks(instances) {
            let chunk: Vec<f64> = instances[range]
                .par_iter()
                .map(|inst| {
                    let g = build_knn_graph(inst, self.model.knn_k);
                    self.model.forward(&g).expect("model dims match features")
                })
                .collect();
            predictions.extend(chunk);
        }
        predictions
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::generate::generate_cvrp;
    use crate::instances::types::InstanceSpec;
    use crate::nn::model::ModelConfig;

    #[test]
    fn bucket_limits_match_size_table() {
        assert_eq!(bucket_batch_limit(50), 512);
        assert_eq!(bucket_batch_limit(99), 512);
        assert_eq!(bucket_batch_limit(100), 256);
        assert_eq!(bucket_batch_limit(250), 128);
        assert_eq!(bucket_batch_limit(399), 64);
        assert_eq!(bucket_batch_limit(500), 32);
        assert_eq!(bucket_batch_limit(9999), 32);
    }

    #[test]
    fn batch_equals_elementwise_forward_and_concatenation() {
        let model = PredictorModel::new(
            &ModelConfig {
                hidden_dim: 8,
                heads: 2,
                layers: 1,
                knn_k: 4,
            },
            3,
        )
        .unwrap();
        let est = NnEstimator::new(model.clone());
        let spec = InstanceSpec {
            customers: 5..=20,
            ..InstanceSpec::default()
        };
        let insts: Vec<_> = (0..9).map(|s| generate_cvrp(&spec, s).unwrap()).collect();

        let batched = est.estimate_batch(&insts);
        assert_eq!(batched.len(), insts.len());
        for (inst, &b) in insts.iter().zip(&batched) {
            let single = est.estimate_batch(std::slice::from_ref(inst));
            assert_eq!(single[0], b);
            let direct = model.forward(&build_knn_graph(inst, 4)).unwrap();
            assert!((direct - b).abs() <= 1e-9 * direct.abs().max(1.0));
        }
        let first = est.estimate_batch(&insts[..4]);
        let second = est.estimate_batch(&insts[4..]);
        let joined: Vec<f64> = first.into_iter().chain(second).collect();
        for (a, b) in batched.iter().zip(&joined) {
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
    }

    #[test]
    fn oversize_batches_split_without_failing() {
        let model = PredictorModel::new(
            &ModelConfig {
                hidden_dim: 8,
                heads: 2,
                layers: 1,
                knn_k: 3,
            },
            3,
        )
        .unwrap();
        let est = NnEstimator::new(model);
        let spec = InstanceSpec {
            customers: 4..=4,
            ..InstanceSpec::default()
        };
        let inst = generate_cvrp(&spec, 0).unwrap();
        let insts = vec![inst; 600];
        let out = est.estimate_batch(&insts);
        assert_eq!(out.len(), 600);
        assert!(out.windows(2).all(|w| w[0] == w[1]));
    }
}

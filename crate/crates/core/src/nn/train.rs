use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::graph::KnnGraph;
use super::model::PredictorModel;

/// Training hyperparameters. Validation uses the last `validation_split`
/// fraction of a seeded shuffle (80:20 by default).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub validation_split: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            batch_size: 64,
            epochs: 30,
            validation_split: 0.2,
            seed: 0,
        }
    }
}

/// Per-epoch loss record; losses are means of per-sample squared error.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub best_epoch: usize,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    lr: f64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(dim: usize, lr: f64) -> Self {
        Adam {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
            lr,
        }
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - Self::BETA1.powi(self.t as i32);
        let bc2 = 1.0 - Self::BETA2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * grads[i];
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * grads[i] * grads[i];
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            params[i] -= self.lr * mhat / (vhat.sqrt() + Self::EPS);
        }
    }
}

/// Minibatch gradient descent with Adam on squared error. Records
/// train/validation loss per epoch and returns with the
/// best-validation parameters restored.
pub fn train(
    model: &mut PredictorModel,
    data: &[(KnnGraph, f64)],
    cfg: &TrainConfig,
) -> Result<TrainHistory> {
    if data.is_empty() {
        return Err(Error::Config("training dataset is empty".into()));
    }
    if !(cfg.learning_rate > 0.0) {
        return Err(Error::Config("learning rate must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rng);
    let val_len = ((data.len() as f64) * cfg.validation_split).round() as usize;
    let val_len = val_len.min(data.len().saturating_sub(1));
    let (train_idx, val_idx) = order.split_at(data.len() - val_len);
    let mut train_idx = train_idx.to_vec();
    let val_idx = val_idx.to_vec();

    let mut params = model.flatten();
    let mut adam = Adam::new(params.len(), cfg.learning_rate);
    let mut history = TrainHistory {
        train_loss: Vec::with_capacity(cfg.epochs),
        val_loss: Vec::with_capacity(cfg.epochs),
        best_epoch: 0,
    };
    let mut best_params = params.clone();
    let mut best_val = f64::INFINITY;

    for epoch in 0..cfg.epochs {
        train_idx.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in train_idx.chunks(cfg.batch_size.max(1)) {
            model.load_flat(&params);
            let per_sample: Vec<(f64, Vec<f64>)> = chunk
                .par_iter()
                .map(|&i| {
                    let (g, label) = &data[i];
                    let (loss, grads) = model.grad(g, *label).expect("dims fixed by dataset");
                    (loss, grads.flatten())
                })
                .collect();
            let inv = 1.0 / chunk.len() as f64;
            let mut grad_sum = vec![0.0; params.len()];
            for (loss, g) in &per_sample {
                epoch_loss += loss;
                for (acc, gi) in grad_sum.iter_mut().zip(g) {
                    *acc += gi * inv;
                }
            }
            adam.step(&mut params, &grad_sum);
        }
        model.load_flat(&params);
        let train_loss = epoch_loss / train_idx.len() as f64;
        let val_loss = if val_idx.is_empty() {
            train_loss
        } else {
            mean_loss(model, data, &val_idx)
        };
        history.train_loss.push(train_loss);
        history.val_loss.push(val_loss);
        if val_loss < best_val {
            best_val = val_loss;
            best_params = params.clone();
            history.best_epoch = epoch;
        }
    }
    model.load_flat(&best_params);
    Ok(history)
}

fn mean_loss(model: &PredictorModel, data: &[(KnnGraph, f64)], idx: &[usize]) -> f64 {
    let total: f64 = idx
        .par_iter()
        .map(|&i| {
            let (g, label) = &data[i];
            model.loss(g, *label).expect("dims fixed by dataset")
        })
        .sum();
    total / idx.len() as f64
}

/// Mean absolute percentage error of the model on labeled graphs.
pub fn model_mape(model: &PredictorModel, data: &[(KnnGraph, f64)]) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let total: f64 = data
        .par_iter()
        .map(|(g, label)| {
            let v = model.forward(g).expect("dims fixed by dataset");
            ((v - label) / label).abs()
        })
        .sum();
    total / data.len() as f64 * 100.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::generate::generate_cvrp;
    use crate::instances::types::InstanceSpec;
    use crate::nn::graph::build_knn_graph;
    use crate::nn::model::ModelConfig;

    #[test]
    fn memorizes_a_single_repeated_instance() {
        let spec = InstanceSpec {
            customers: 8..=8,
            ..InstanceSpec::default()
        };
        let inst = generate_cvrp(&spec, 4).unwrap();
        let g = build_knn_graph(&inst, 5);
        let label = 2500.0;
        let data: Vec<(KnnGraph, f64)> = (0..50).map(|_| (g.clone(), label)).collect();
        let mut model = PredictorModel::new(
            &ModelConfig {
                hidden_dim: 16,
                heads: 2,
                layers: 1,
                knn_k: 5,
            },
            7,
        )
        .unwrap();
        let cfg = TrainConfig {
            learning_rate: 3e-3,
            batch_size: 10,
            epochs: 60,
            validation_split: 0.2,
            seed: 1,
        };
        let history = train(&mut model, &data, &cfg).unwrap();
        let final_loss = model.loss(&g, label).unwrap();
        assert!(
            final_loss < 1e-4 * label * label,
            "loss {final_loss} after {} epochs (val {:?})",
            cfg.epochs,
            history.val_loss.last()
        );
        assert_eq!(history.val_loss.len(), cfg.epochs);
    }

    #[test]
    fn single_batch_descent_is_monotone_with_small_lr() {
        let spec = InstanceSpec {
            customers: 6..=6,
            ..InstanceSpec::default()
        };
        let inst = generate_cvrp(&spec, 9).unwrap();
        let g = build_knn_graph(&inst, 4);
        let data = vec![(g.clone(), 1200.0)];
        let mut model = PredictorModel::new(
            &ModelConfig {
                hidden_dim: 8,
                heads: 2,
                layers: 1,
                knn_k: 4,
            },
            3,
        )
        .unwrap();
        let cfg = TrainConfig {
            learning_rate: 1e-4,
            batch_size: 1,
            epochs: 25,
            validation_split: 0.0,
            seed: 2,
        };
        let history = train(&mut model, &data, &cfg).unwrap();
        for w in history.train_loss.windows(2) {
            assert!(
                w[1] <= w[0] * (1.0 + 1e-9),
                "loss increased: {} -> {}",
                w[0],
                w[1]
            );
        }
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let mut model = PredictorModel::new(&ModelConfig::desk(), 0).unwrap();
        assert!(train(&mut model, &[], &TrainConfig::default()).is_err());
    }

    #[test]
    fn training_is_deterministic() {
        let spec = InstanceSpec {
            customers: 5..=10,
            ..InstanceSpec::default()
        };
        let data: Vec<(KnnGraph, f64)> = (0..12)
            .map(|s| {
                let inst = generate_cvrp(&spec, s).unwrap();
                (build_knn_graph(&inst, 4), 1000.0 + s as f64)
            })
            .collect();
        let cfg = TrainConfig {
            learning_rate: 1e-3,
            batch_size: 4,
            epochs: 3,
            validation_split: 0.25,
            seed: 11,
        };
        let mk = || {
            let mut m = PredictorModel::new(
                &ModelConfig {
                    hidden_dim: 8,
                    heads: 2,
                    layers: 1,
                    knn_k: 4,
                },
                5,
            )
            .unwrap();
            let h = train(&mut m, &data, &cfg).unwrap();
            (m.flatten(), h.val_loss)
        };
        let (p1, v1) = mk();
        let (p2, v2) = mk();
        assert_eq!(p1, p2);
        assert_eq!(v1, v2);
    }
}

//! Learned subproblem cost predictor: k-nearest-neighbor graph
//! construction, a neighbor-masked multi-head-attention encoder with a
//! mean readout, squared-error training with hand-written reverse-mode
//! gradients, and batched inference behind the estimator interface.

pub mod checkpoint;
pub mod estimator;
pub mod graph;
pub mod linalg;
pub mod model;
pub mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use estimator::{bucket_batch_limit, NnEstimator};
pub use graph::{build_knn_graph, KnnGraph};
pub use model::{ModelConfig, PredictorModel};
pub use train::{model_mape, train, TrainConfig, TrainHistory};

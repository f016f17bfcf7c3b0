use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::linalg::Matrix;
use super::model::{LayerParams, ModelConfig, PredictorModel};

#[derive(Debug, Serialize, Deserialize)]
struct TensorDump {
    shape: Vec<usize>,
    data: Vec<f64>,
}

/// Versioned JSON checkpoint: hyperparameters plus named tensors with
/// shape headers.
#[derive(Debug, Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    hidden_dim: usize,
    heads: usize,
    layers: usize,
    knn_k: usize,
    tensors: BTreeMap<String, TensorDump>,
}

const VERSION: u32 = 1;

fn dump_matrix(m: &Matrix) -> TensorDump {
    TensorDump {
        shape: vec![m.rows, m.cols],
        data: m.data.clone(),
    }
}

fn dump_vec(v: &[f64]) -> TensorDump {
    TensorDump {
        shape: vec![v.len()],
        data: v.to_vec(),
    }
}

pub fn save_checkpoint(model: &PredictorModel, path: impl AsRef<Path>) -> Result<()> {
    let mut tensors = BTreeMap::new();
    tensors.insert("embed".to_string(), dump_matrix(&model.embed));
    for (i, l) in model.layers.iter().enumerate() {
        let mut put = |name: &str, t: TensorDump| {
            tensors.insert(format!("layers.{i}.{name}"), t);
        };
        put("wq", dump_matrix(&l.wq));
        put("wk", dump_matrix(&l.wk));
        put("wv", dump_matrix(&l.wv));
        put("wo", dump_matrix(&l.wo));
        put("ff1_w", dump_matrix(&l.ff1_w));
        put("ff1_b", dump_vec(&l.ff1_b));
        put("ff2_w", dump_matrix(&l.ff2_w));
        put("ff2_b", dump_vec(&l.ff2_b));
        put("ln1_gain", dump_vec(&l.ln1_gain));
        put("ln1_bias", dump_vec(&l.ln1_bias));
        put("ln2_gain", dump_vec(&l.ln2_gain));
        put("ln2_bias", dump_vec(&l.ln2_bias));
    }
    tensors.insert("readout_w".to_string(), dump_vec(&model.readout_w));
    tensors.insert(
        "readout_b".to_string(),
        TensorDump {
            shape: vec![],
            data: vec![model.readout_b],
        },
    );
    let ckpt = Checkpoint {
        version: VERSION,
        hidden_dim: model.hidden_dim,
        heads: model.heads,
        layers: model.layers.len(),
        knn_k: model.knn_k,
        tensors,
    };
    std::fs::write(path, serde_json::to_string(&ckpt)?)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<PredictorModel> {
    let text = std::fs::read_to_string(path.as_ref())?;
    let ckpt: Checkpoint = serde_json::from_str(&text)?;
    if ckpt.version != VERSION {
        return Err(Error::Config(format!(
            "unsupported checkpoint version {}",
            ckpt.version
        )));
    }
    let take = |tensors: &BTreeMap<String, TensorDump>, name: &str, shape: &[usize]| {
        let t = tensors
            .get(name)
            .ok_or_else(|| Error::Config(format!("checkpoint missing tensor '{name}'")))?;
        if t.shape != shape {
            return Err(Error::Dim(format!(
                "tensor '{name}' has shape {:?}, expected {shape:?}",
                t.shape
            )));
        }
        let expected: usize = shape.iter().product::<usize>().max(1);
        if t.data.len() != expected || t.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(format!("tensor '{name}' data invalid")));
        }
        Ok(t.data.clone())
    };
    let h = ckpt.hidden_dim;
    let f = 4 * h;
    let mut model = PredictorModel::new(
        &ModelConfig {
            hidden_dim: h,
            heads: ckpt.heads,
            layers: ckpt.layers,
            knn_k: ckpt.knn_k,
        },
        0,
    )?;
    model.embed = Matrix {
        rows: 3,
        cols: h,
        data: take(&ckpt.tensors, "embed", &[3, h])?,
    };
    let mat = |name: String, rows: usize, cols: usize| -> Result<Matrix> {
        Ok(Matrix {
            rows,
            cols,
            data: take(&ckpt.tensors, &name, &[rows, cols])?,
        })
    };
    let mut layers = Vec::with_capacity(ckpt.layers);
    for i in 0..ckpt.layers {
        let p = |name: &str| format!("layers.{i}.{name}");
        layers.push(LayerParams {
            wq: mat(p("wq"), h, h)?,
            wk: mat(p("wk"), h, h)?,
            wv: mat(p("wv"), h, h)?,
            wo: mat(p("wo"), h, h)?,
            ff1_w: mat(p("ff1_w"), h, f)?,
            ff1_b: take(&ckpt.tensors, &p("ff1_b"), &[f])?,
            ff2_w: mat(p("ff2_w"), f, h)?,
            ff2_b: take(&ckpt.tensors, &p("ff2_b"), &[h])?,
            ln1_gain: take(&ckpt.tensors, &p("ln1_gain"), &[h])?,
            ln1_bias: take(&ckpt.tensors, &p("ln1_bias"), &[h])?,
            ln2_gain: take(&ckpt.tensors, &p("ln2_gain"), &[h])?,
            ln2_bias: take(&ckpt.tensors, &p("ln2_bias"), &[h])?,
        });
    }
    model.layers = layers;
    model.readout_w = take(&ckpt.tensors, "readout_w", &[h])?;
    model.readout_b = take(&ckpt.tensors, "readout_b", &[])?[0];
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoint_round_trip() {
        let model = PredictorModel::new(
            &ModelConfig {
                hidden_dim: 8,
                heads: 2,
                layers: 2,
                knn_k: 5,
            },
            42,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt.json");
        save_checkpoint(&model, &path).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(model, back);
    }

    #[test]
    fn corrupt_checkpoint_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(&path, "{\"version\": 1}").unwrap();
        assert!(load_checkpoint(&path).is_err());
    }
}

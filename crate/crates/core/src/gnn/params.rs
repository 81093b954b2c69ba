//! Network parameters, initialization and checkpoint files.
//!
//! Checkpoints are JSON documents:
//!
//! ```text
//! {
//!   "format": "unfoldcp.model_params",
//!   "version": 1,
//!   "architecture": "gcn" | "gat",
//!   "init": { "seed": <u64>, "scheme": "glorot_uniform" },
//!   "tensors": [ { "name": "layers.0.weight", "shape": [rows, cols], "values": [row-major f64 ...] }, ... ]
//! }
//! ```
//!
//! Tensor names are `layers.<l>.weight` (`in × out`), `layers.<l>.bias`
//! (`out`) and, for attention layers, `layers.<l>.att_src` / `layers.<l>.att_dst`
//! (`out`). One-dimensional tensors carry a one-element shape.

use std::path::Path;

use ndarray::{Array1, Array2};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::config::Architecture;
use crate::error::{Error, Result};
use crate::rng::Rng;

pub const CHECKPOINT_FORMAT: &str = "unfoldcp.model_params";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub att_src: Option<Array1<f64>>,
    pub att_dst: Option<Array1<f64>>,
}

impl LayerParams {
    pub fn zeros_like(other: &LayerParams) -> Self {
        Self {
            weight: Array2::zeros(other.weight.raw_dim()),
            bias: Array1::zeros(other.bias.len()),
            att_src: other.att_src.as_ref().map(|a| Array1::zeros(a.len())),
            att_dst: other.att_dst.as_ref().map(|a| Array1::zeros(a.len())),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.ncols()
    }

    fn named(&self) -> Vec<(&'static str, &[f64], Vec<usize>)> {
        let mut out = vec![
            (
                "weight",
                self.weight.as_slice().expect("standard layout"),
                vec![self.weight.nrows(), self.weight.ncols()],
            ),
            ("bias", self.bias.as_slice().expect("contiguous"), vec![self.bias.len()]),
        ];
        if let Some(a) = &self.att_src {
            out.push(("att_src", a.as_slice().expect("contiguous"), vec![a.len()]));
        }
        if let Some(a) = &self.att_dst {
            out.push(("att_dst", a.as_slice().expect("contiguous"), vec![a.len()]));
        }
        out
    }

    pub fn slices(&self) -> Vec<&[f64]> {
        self.named().into_iter().map(|(_, s, _)| s).collect()
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = vec![
            self.weight.as_slice_mut().expect("standard layout"),
            self.bias.as_slice_mut().expect("contiguous"),
        ];
        if let Some(a) = self.att_src.as_mut() {
            out.push(a.as_slice_mut().expect("contiguous"));
        }
        if let Some(a) = self.att_dst.as_mut() {
            out.push(a.as_slice_mut().expect("contiguous"));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitRecord {
    pub seed: u64,
    pub scheme: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub architecture: Architecture,
    pub layers: Vec<LayerParams>,
    pub init: InitRecord,
}

fn glorot(rows: usize, cols: usize, rng: &mut Rng) -> Array2<f64> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-bound..bound))
}

impl ModelParams {
    /// Glorot-uniform weights (and attention vectors), zero biases.
    pub fn init(architecture: Architecture, dims: &[usize], seed: u64, rng: &mut Rng) -> Self {
        let layers = dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let weight = glorot(fan_in, fan_out, rng);
                let (att_src, att_dst) = match architecture {
                    Architecture::Gcn => (None, None),
                    Architecture::Gat => (
                        Some(glorot(1, fan_out, rng).into_shape_with_order(fan_out).expect("shape")),
                        Some(glorot(1, fan_out, rng).into_shape_with_order(fan_out).expect("shape")),
                    ),
                };
                LayerParams {
                    weight,
                    bias: Array1::zeros(fan_out),
                    att_src,
                    att_dst,
                }
            })
            .collect();
        Self {
            architecture,
            layers,
            init: InitRecord {
                seed,
                scheme: "glorot_uniform".into(),
            },
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            architecture: self.architecture,
            layers: self.layers.iter().map(LayerParams::zeros_like).collect(),
            init: self.init.clone(),
        }
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, LayerParams::out_dim)
    }

    pub fn num_values(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    pub fn slices(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(LayerParams::slices).collect()
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers.iter_mut().flat_map(LayerParams::slices_mut).collect()
    }

    pub fn squared_norm(&self) -> f64 {
        self.slices().iter().flat_map(|s| s.iter()).map(|v| v * v).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let tensors = self
            .layers
            .iter()
            .enumerate()
            .flat_map(|(l, layer)| {
                layer.named().into_iter().map(move |(name, values, shape)| TensorRecord {
                    name: format!("layers.{l}.{name}"),
                    shape,
                    values: values.to_vec(),
                })
            })
            .collect();
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            architecture: self.architecture,
            init: self.init.clone(),
            tensors,
        }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        if ckpt.format != CHECKPOINT_FORMAT || ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::DimensionMismatch(format!(
                "unsupported checkpoint {} v{}",
                ckpt.format, ckpt.version
            )));
        }
        let find = |name: String| ckpt.tensors.iter().find(|t| t.name == name);
        let vector = |t: &TensorRecord| -> Result<Array1<f64>> {
            if t.shape.len() != 1 || t.shape[0] != t.values.len() {
                return Err(Error::DimensionMismatch(format!("tensor {} has a bad shape", t.name)));
            }
            Ok(Array1::from(t.values.clone()))
        };
        let mut layers = Vec::new();
        for l in 0.. {
            let Some(w) = find(format!("layers.{l}.weight")) else { break };
            if w.shape.len() != 2 {
                return Err(Error::DimensionMismatch(format!("tensor {} is not a matrix", w.name)));
            }
            let weight = Array2::from_shape_vec((w.shape[0], w.shape[1]), w.values.clone())
                .map_err(|e| Error::DimensionMismatch(format!("tensor {}: {e}", w.name)))?;
            let bias = find(format!("layers.{l}.bias"))
                .ok_or_else(|| Error::DimensionMismatch(format!("missing layers.{l}.bias")))
                .and_then(vector)?;
            let att_src = find(format!("layers.{l}.att_src")).map(vector).transpose()?;
            let att_dst = find(format!("layers.{l}.att_dst")).map(vector).transpose()?;
            layers.push(LayerParams {
                weight,
                bias,
                att_src,
                att_dst,
            });
        }
        if layers.is_empty() {
            return Err(Error::DimensionMismatch("checkpoint holds no layers".into()));
        }
        Ok(Self {
            architecture: ckpt.architecture,
            layers,
            init: ckpt.init.clone(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(&self.to_checkpoint())?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_checkpoint(&serde_json::from_str(&text)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub architecture: Architecture,
    pub init: InitRecord,
    pub tensors: Vec<TensorRecord>,
}

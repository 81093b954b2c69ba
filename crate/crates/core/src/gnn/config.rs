use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    Gcn,
    Gat,
}

impl Architecture {
    pub fn label(self) -> &'static str {
        match self {
            Architecture::Gcn => "gcn",
            Architecture::Gat => "gat",
        }
    }
}

pub const GAT_PATIENCE: usize = 100;

/// Hyperparameters of one network and its optimizer.
///
/// Defaults follow the usual two-layer GCN reference setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub architecture: Architecture,
    pub hidden_dim: usize,
    pub layers: usize,
    pub dropout: f64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    /// Epochs without a validation improvement before stopping.
    pub patience: usize,
    /// Negative slope of the attention LeakyReLU (GAT only).
    pub attention_slope: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            architecture: Architecture::Gcn,
            hidden_dim: 16,
            layers: 2,
            dropout: 0.5,
            learning_rate: 0.01,
            weight_decay: 5e-4,
            max_epochs: 200,
            patience: 20,
            attention_slope: 0.2,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn gcn() -> Self {
        Self::default()
    }

    /// Attention starts from a flat plateau and needs a longer patience
    /// window before validation loss moves.
    pub fn gat() -> Self {
        Self {
            architecture: Architecture::Gat,
            patience: GAT_PATIENCE,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let field = |f: &str| format!("model.{f}");
        if self.hidden_dim == 0 {
            return Err(Error::config(field("hidden_dim"), "must be positive"));
        }
        if self.layers == 0 {
            return Err(Error::config(field("layers"), "must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config(field("dropout"), "must lie in [0, 1)"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::config(field("learning_rate"), "must be positive and finite"));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::config(field("weight_decay"), "must be non-negative and finite"));
        }
        if self.max_epochs == 0 {
            return Err(Error::config(field("max_epochs"), "must be positive"));
        }
        if !(self.attention_slope.is_finite() && self.attention_slope >= 0.0) {
            return Err(Error::config(field("attention_slope"), "must be non-negative and finite"));
        }
        Ok(())
    }
}

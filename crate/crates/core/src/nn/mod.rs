//! Differentiable numeric core.
//!
//! Both classifiers map one input (a step sequence or an inference graph) to
//! a single logit. Forward passes record a tape; `backward` replays it in
//! reverse and accumulates exact gradients into the model's
//! [`ParameterSet`].

mod dropout;
pub mod gcn;
pub mod gradcheck;
mod init;
pub mod loss;
pub mod lstm;
pub mod params;

pub use self::gcn::{GcnInput, GcnModel};
pub use self::gradcheck::{GradCheckReport, grad_check};
pub use self::loss::{bce_loss, sigmoid};
pub use self::lstm::LstmModel;
pub use self::params::{AdamConfig, Param, ParameterSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Lstm,
    Gcn,
}

impl core::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            ModelKind::Lstm => "LSTM",
            ModelKind::Gcn => "GCN",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub model: ModelKind,
    pub layers: usize,
    pub hidden_dim: usize,
    pub batch: usize,
    pub dropout: f64,
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 {
            return Err(Error::InvalidConfig("layers must be at least 1".into()));
        }
        if self.hidden_dim == 0 {
            return Err(Error::InvalidConfig("hidden_dim must be at least 1".into()));
        }
        if self.batch == 0 {
            return Err(Error::InvalidConfig("batch must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidConfig("dropout must be in [0, 1)".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

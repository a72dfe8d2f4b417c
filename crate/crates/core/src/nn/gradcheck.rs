//! Central finite-difference check of the hand-written reverse mode.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::RngExt;
use serde::{Deserialize, Serialize};

use super::gcn::{GcnInput, GcnModel};
use super::loss::bce_loss;
use super::lstm::LstmModel;
use super::params::ParameterSet;
use super::{Hyperparameters, ModelKind};
use crate::embedding::{Scheme, StepVector};
use crate::error::{Error, Result};
use crate::representation::{Edge, GraphNode, InferenceGraph, NodeKey, Sequence};
use crate::rng::{Purpose, Rng, stream};

pub const EPSILON: f64 = 1e-5;
/// Input width of the generated check problems.
pub const CHECK_WIDTH: usize = 3;
pub const CHECK_SEQUENCE_LEN: usize = 6;
pub const CHECK_NODES: usize = 5;
/// Gradients smaller than this are compared absolutely.
const RELATIVE_FLOOR: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub model: ModelKind,
    pub seed: u64,
    pub values_checked: usize,
    pub max_relative_error: f64,
    pub worst_parameter: String,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR);
    (analytic - numeric).abs() / scale
}

enum Problem {
    Lstm(LstmModel, Sequence),
    Gcn(GcnModel, GcnInput),
}

impl Problem {
    fn params_mut(&mut self) -> &mut ParameterSet {
        match self {
            Problem::Lstm(m, _) => m.params_mut(),
            Problem::Gcn(m, _) => m.params_mut(),
        }
    }

    fn logit(&self) -> Result<f64> {
        match self {
            Problem::Lstm(m, s) => m.logit(s),
            Problem::Gcn(m, g) => m.logit(g),
        }
    }

    fn forward_backward(&mut self, label: bool) -> Result<()> {
        let logit = match self {
            Problem::Lstm(m, s) => m.forward(s, None)?,
            Problem::Gcn(m, g) => m.forward(g, None)?,
        };
        let (_, dlogit) = bce_loss(logit, label);
        match self {
            Problem::Lstm(m, _) => m.backward(dlogit),
            Problem::Gcn(m, _) => m.backward(dlogit),
        }
    }
}

fn random_graph(rng: &mut Rng) -> InferenceGraph {
    let nodes = (0..CHECK_NODES)
        .map(|i| GraphNode {
            key: NodeKey::Call {
                function_type: 0,
                argument: Some(format!("n{i}")),
                resolved: true,
            },
            feature: StepVector {
                values: (0..CHECK_WIDTH).map(|_| rng.random_range(-1.0..1.0)).collect(),
                scheme: Scheme::FA,
            },
        })
        .collect();
    let mut edges = Vec::new();
    for src in 0..CHECK_NODES {
        for dst in 0..CHECK_NODES {
            if rng.random_bool(0.4) {
                edges.push(Edge {
                    src,
                    dst,
                    weight: rng.random_range(1..4),
                });
            }
        }
    }
    InferenceGraph {
        bug_id: "gradcheck".into(),
        label: false,
        width: CHECK_WIDTH,
        nodes,
        edges,
    }
}

/// Compares analytic gradients of the BCE loss against central differences
/// on a random small problem, for every parameter value. Dropout is off.
pub fn grad_check(kind: ModelKind, hp: &Hyperparameters, seed: u64) -> Result<GradCheckReport> {
    if hp.hidden_dim > 8 || hp.layers == 0 || hp.layers > 4 {
        return Err(Error::InvalidConfig(
            "gradient checks need hidden_dim <= 8 and 1..=4 layers".into(),
        ));
    }
    let mut rng = stream(seed, 0, Purpose::GradCheck);
    let mut problem = match kind {
        ModelKind::Lstm => {
            let model = LstmModel::new(CHECK_WIDTH, hp.hidden_dim, hp.layers, 0.0, &mut rng);
            let data = (0..CHECK_WIDTH * CHECK_SEQUENCE_LEN)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            Problem::Lstm(model, Sequence::new(CHECK_WIDTH, data))
        }
        ModelKind::Gcn => {
            let model = GcnModel::new(CHECK_WIDTH, hp.hidden_dim, hp.layers, 0.0, &mut rng);
            Problem::Gcn(model, GcnInput::from_graph(&random_graph(&mut rng))?)
        }
    };
    for p in problem.params_mut().iter_mut() {
        p.value.iter_mut().for_each(|v| *v = rng.random_range(-0.8..0.8));
    }
    let label = rng.random_bool(0.5);

    problem.params_mut().zero_grad();
    problem.forward_backward(label)?;

    let mut report = GradCheckReport {
        model: kind,
        seed,
        values_checked: 0,
        max_relative_error: 0.0,
        worst_parameter: String::new(),
    };
    let count = problem.params_mut().len();
    for handle in 0..count {
        for i in 0..problem.params_mut().get(handle).len() {
            let original = problem.params_mut().get(handle).value[i];
            problem.params_mut().get_mut(handle).value[i] = original + EPSILON;
            let plus = bce_loss(problem.logit()?, label).0;
            problem.params_mut().get_mut(handle).value[i] = original - EPSILON;
            let minus = bce_loss(problem.logit()?, label).0;
            problem.params_mut().get_mut(handle).value[i] = original;

            let numeric = (plus - minus) / (2.0 * EPSILON);
            let param = problem.params_mut().get(handle);
            let err = relative_error(param.grad[i], numeric);
            report.values_checked += 1;
            if err > report.max_relative_error {
                report.max_relative_error = err;
                report.worst_parameter = format!("{}[{i}]", param.name);
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hp(model: ModelKind, layers: usize, hidden: usize) -> Hyperparameters {
        Hyperparameters {
            model,
            layers,
            hidden_dim: hidden,
            batch: 1,
            dropout: 0.5,
            epochs: 1,
            learning_rate: 1e-3,
        }
    }

    #[test]
    fn lstm_gradients() {
        for (seed, layers) in [(1, 1), (2, 2)] {
            let r = grad_check(ModelKind::Lstm, &hp(ModelKind::Lstm, layers, 4), seed).unwrap();
            assert!(r.max_relative_error < 1e-4, "{r:?}");
        }
    }

    #[test]
    fn gcn_gradients() {
        for (seed, layers) in [(1, 1), (2, 3)] {
            let r = grad_check(ModelKind::Gcn, &hp(ModelKind::Gcn, layers, 4), seed).unwrap();
            assert!(r.max_relative_error < 1e-4, "{r:?}");
        }
    }

    #[test]
    fn repeatable_with_dropout_configured() {
        let h = hp(ModelKind::Gcn, 2, 4);
        assert_eq!(grad_check(ModelKind::Gcn, &h, 9), grad_check(ModelKind::Gcn, &h, 9));
    }

    #[test]
    fn refuses_large_configs() {
        assert!(grad_check(ModelKind::Lstm, &hp(ModelKind::Lstm, 1, 32), 0).is_err());
    }
}

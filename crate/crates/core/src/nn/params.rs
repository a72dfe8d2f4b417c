use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major array with its gradient and Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
}

impl Param {
    pub fn new(name: impl Into<String>, rows: usize, cols: usize, value: Vec<f64>) -> Self {
        let n = rows * cols;
        assert_eq!(value.len(), n, "parameter shape does not match its data");
        Self {
            name: name.into(),
            rows,
            cols,
            value,
            grad: vec![0.0; n],
            first_moment: vec![0.0; n],
            second_moment: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.value[row * self.cols + col]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Named array in a checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedArray {
    pub name: String,
    pub shape: [usize; 2],
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParameterSet {
    params: Vec<Param>,
}

impl ParameterSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a parameter and returns its handle.
    pub fn add(&mut self, param: Param) -> usize {
        self.params.push(param);
        self.params.len() - 1
    }

    pub fn get(&self, handle: usize) -> &Param {
        &self.params[handle]
    }

    pub fn get_mut(&mut self, handle: usize) -> &mut Param {
        &mut self.params[handle]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.params.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn value_count(&self) -> usize {
        self.params.iter().map(Param::len).sum()
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    pub fn scale_grad(&mut self, factor: f64) {
        for p in &mut self.params {
            p.grad.iter_mut().for_each(|g| *g *= factor);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.value.iter().all(|v| v.is_finite()))
    }

    /// One Adam update using the accumulated gradients. `step` counts from 1.
    /// Nothing is modified if any gradient is non-finite.
    pub fn adam_step(&mut self, adam: &AdamConfig, learning_rate: f64, step: u64) -> Result<()> {
        if step == 0 {
            return Err(Error::InvalidConfig("Adam step index starts at 1".into()));
        }
        if let Some(p) = self.params.iter().find(|p| p.grad.iter().any(|g| !g.is_finite())) {
            return Err(Error::NonFiniteGradient(p.name.clone()));
        }
        let t = step as i32;
        let correction1 = 1.0 - libm::pow(adam.beta1, f64::from(t));
        let correction2 = 1.0 - libm::pow(adam.beta2, f64::from(t));
        for p in &mut self.params {
            for i in 0..p.value.len() {
                let g = p.grad[i];
                let m = adam.beta1 * p.first_moment[i] + (1.0 - adam.beta1) * g;
                let v = adam.beta2 * p.second_moment[i] + (1.0 - adam.beta2) * g * g;
                p.first_moment[i] = m;
                p.second_moment[i] = v;
                let m_hat = m / correction1;
                let v_hat = v / correction2;
                p.value[i] -= learning_rate * m_hat / (libm::sqrt(v_hat) + adam.epsilon);
            }
        }
        Ok(())
    }

    pub fn export(&self) -> Vec<NamedArray> {
        self.params
            .iter()
            .map(|p| NamedArray {
                name: p.name.clone(),
                shape: [p.rows, p.cols],
                values: p.value.clone(),
            })
            .collect()
    }

    /// Overwrites values from `arrays`, which must match every parameter by
    /// name and shape.
    pub fn import(&mut self, arrays: &[NamedArray]) -> Result<()> {
        for p in &mut self.params {
            let a = arrays
                .iter()
                .find(|a| a.name == p.name)
                .ok_or_else(|| Error::MissingParameter(p.name.clone()))?;
            if a.shape != [p.rows, p.cols] || a.values.len() != p.len() {
                return Err(Error::ShapeMismatch {
                    name: p.name.clone(),
                    expected: p.len(),
                    found: a.values.len(),
                });
            }
            if a.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidConfig(alloc::format!(
                    "parameter `{}` has non-finite values",
                    p.name
                )));
            }
            p.value.copy_from_slice(&a.values);
        }
        if arrays.len() != self.params.len() {
            return Err(Error::InvalidConfig(alloc::format!(
                "checkpoint has {} arrays, model expects {}",
                arrays.len(),
                self.params.len()
            )));
        }
        Ok(())
    }
}

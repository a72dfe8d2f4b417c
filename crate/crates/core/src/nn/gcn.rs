//! Graph convolution stack with global mean pooling.
//!
//! Each round computes `H <- Â H W + b`; every round but the last is
//! followed by ReLU and dropout. `Â = D^-1/2 (A + I) D^-1/2` where
//! `A[dst][src]` is the weight of edge `src -> dst` and `D` holds the row
//! sums of `A + I`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::dropout;
use super::init::glorot;
use super::params::{Param, ParameterSet};
use crate::error::{Error, Result};
use crate::representation::InferenceGraph;
use crate::rng::Rng;

/// Graph prepared for the convolution: nodes in sorted-key order, features
/// as a dense `n x width` matrix and the normalized adjacency in sparse
/// row-major form.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnInput {
    pub bug_id: String,
    pub nodes: usize,
    pub width: usize,
    pub features: Vec<f64>,
    /// `(row, col, value)` sorted by `(row, col)`.
    pub adjacency: Vec<(usize, usize, f64)>,
}

impl GcnInput {
    pub fn from_graph(graph: &InferenceGraph) -> Result<Self> {
        let n = graph.nodes.len();
        if n == 0 {
            return Err(Error::EmptyGraph(graph.bug_id.clone()));
        }
        // Canonical node order makes every later summation order independent
        // of how the graph happened to be indexed.
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| graph.nodes[a].key.cmp(&graph.nodes[b].key));
        let mut position = vec![0; n];
        for (new, &old) in order.iter().enumerate() {
            position[old] = new;
        }

        let width = graph.width;
        let mut features = Vec::with_capacity(n * width);
        for &old in &order {
            let f = &graph.nodes[old].feature.values;
            if f.len() != width {
                return Err(Error::WidthMismatch {
                    expected: width,
                    found: f.len(),
                });
            }
            features.extend_from_slice(f);
        }

        let mut weighted: BTreeMap<(usize, usize), f64> = (0..n).map(|i| ((i, i), 1.0)).collect();
        for e in &graph.edges {
            *weighted.entry((position[e.dst], position[e.src])).or_insert(0.0) += f64::from(e.weight);
        }
        let mut degree = vec![0.0; n];
        for (&(row, _), &w) in &weighted {
            degree[row] += w;
        }
        let adjacency = weighted
            .into_iter()
            .map(|((row, col), w)| (row, col, w / libm::sqrt(degree[row] * degree[col])))
            .collect();

        Ok(Self {
            bug_id: graph.bug_id.clone(),
            nodes: n,
            width,
            features,
            adjacency,
        })
    }

    /// Dense copy of `Â`, for inspection.
    pub fn dense_adjacency(&self) -> Vec<f64> {
        let mut dense = vec![0.0; self.nodes * self.nodes];
        for &(r, c, v) in &self.adjacency {
            dense[r * self.nodes + c] = v;
        }
        dense
    }

    fn propagate(&self, h: &[f64], cols: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.nodes * cols];
        for &(r, c, v) in &self.adjacency {
            let src = &h[c * cols..(c + 1) * cols];
            let dst = &mut out[r * cols..(r + 1) * cols];
            dst.iter_mut().zip(src).for_each(|(d, s)| *d += v * s);
        }
        out
    }

    fn propagate_transposed(&self, d: &[f64], cols: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.nodes * cols];
        for &(r, c, v) in &self.adjacency {
            let src = &d[r * cols..(r + 1) * cols];
            let dst = &mut out[c * cols..(c + 1) * cols];
            dst.iter_mut().zip(src).for_each(|(o, s)| *o += v * s);
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
struct LayerHandles {
    weight: usize,
    bias: usize,
    in_width: usize,
    out_width: usize,
}

#[derive(Debug, Clone)]
struct LayerTape {
    /// `Â H_in`
    propagated: Vec<f64>,
    /// Pre-activation output.
    pre: Vec<f64>,
    mask: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
struct Tape {
    input: GcnInput,
    layers: Vec<LayerTape>,
    pooled: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GcnModel {
    params: ParameterSet,
    input_width: usize,
    hidden: usize,
    dropout: f64,
    layers: Vec<LayerHandles>,
    head_w: usize,
    head_b: usize,
    tape: Option<Tape>,
}

impl GcnModel {
    pub fn new(input_width: usize, hidden: usize, layers: usize, dropout: f64, rng: &mut Rng) -> Self {
        let mut params = ParameterSet::new();
        let mut handles = Vec::with_capacity(layers);
        for l in 0..layers {
            let in_width = if l == 0 { input_width } else { hidden };
            let weight = params.add(Param::new(
                format!("gcn.{l}.w"),
                in_width,
                hidden,
                glorot(rng, in_width, hidden, in_width * hidden),
            ));
            let bias = params.add(Param::new(format!("gcn.{l}.b"), 1, hidden, vec![0.0; hidden]));
            handles.push(LayerHandles {
                weight,
                bias,
                in_width,
                out_width: hidden,
            });
        }
        let head_w = params.add(Param::new("head.w", 1, hidden, glorot(rng, hidden, 1, hidden)));
        let head_b = params.add(Param::new("head.b", 1, 1, vec![0.0]));
        Self {
            params,
            input_width,
            hidden,
            dropout,
            layers: handles,
            head_w,
            head_b,
            tape: None,
        }
    }

    pub fn params(&self) -> &ParameterSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParameterSet {
        &mut self.params
    }

    pub fn input_width(&self) -> usize {
        self.input_width
    }

    fn run(&self, input: &GcnInput, mut rng: Option<&mut Rng>) -> Result<(f64, Vec<LayerTape>, Vec<f64>)> {
        if input.width != self.input_width {
            return Err(Error::WidthMismatch {
                expected: self.input_width,
                found: input.width,
            });
        }
        if input.nodes == 0 {
            return Err(Error::EmptyGraph(input.bug_id.clone()));
        }
        let n = input.nodes;
        let last = self.layers.len() - 1;
        let mut tapes = Vec::with_capacity(self.layers.len());
        let mut h = input.features.clone();

        for (l, layer) in self.layers.iter().enumerate() {
            let propagated = input.propagate(&h, layer.in_width);
            let w = &self.params.get(layer.weight).value;
            let b = &self.params.get(layer.bias).value;
            let out = layer.out_width;
            let mut pre = vec![0.0; n * out];
            for i in 0..n {
                let row = &mut pre[i * out..(i + 1) * out];
                row.copy_from_slice(b);
                for k in 0..layer.in_width {
                    let p = propagated[i * layer.in_width + k];
                    if p != 0.0 {
                        let wk = &w[k * out..(k + 1) * out];
                        row.iter_mut().zip(wk).for_each(|(z, wv)| *z += p * wv);
                    }
                }
            }
            let mask = if l < last {
                let mask = dropout::mask(rng.as_deref_mut(), self.dropout, n * out);
                h = pre.iter().map(|&z| z.max(0.0)).collect();
                if let Some(m) = &mask {
                    h.iter_mut().zip(m).for_each(|(x, k)| *x *= k);
                }
                mask
            } else {
                h = pre.clone();
                None
            };
            tapes.push(LayerTape { propagated, pre, mask });
        }

        let mut pooled = vec![0.0; self.hidden];
        for i in 0..n {
            pooled
                .iter_mut()
                .zip(&h[i * self.hidden..(i + 1) * self.hidden])
                .for_each(|(p, x)| *p += x);
        }
        pooled.iter_mut().for_each(|p| *p /= n as f64);
        let logit =
            self.params.get(self.head_b).value[0] + super::lstm::dot(&self.params.get(self.head_w).value, &pooled);
        Ok((logit, tapes, pooled))
    }

    /// Forward pass that records a tape; dropout is active iff `rng` is given.
    pub fn forward(&mut self, input: &GcnInput, rng: Option<&mut Rng>) -> Result<f64> {
        let (logit, layers, pooled) = self.run(input, rng)?;
        self.tape = Some(Tape {
            input: input.clone(),
            layers,
            pooled,
        });
        Ok(logit)
    }

    pub fn logit(&self, input: &GcnInput) -> Result<f64> {
        self.run(input, None).map(|(logit, _, _)| logit)
    }

    pub fn backward(&mut self, dlogit: f64) -> Result<()> {
        let tape = self.tape.take().ok_or(Error::NoForwardPass)?;
        let n = tape.input.nodes;
        self.params.get_mut(self.head_b).grad[0] += dlogit;
        let head_w = self.params.get(self.head_w).value.clone();
        {
            let g = &mut self.params.get_mut(self.head_w).grad;
            g.iter_mut().zip(&tape.pooled).for_each(|(g, p)| *g += dlogit * p);
        }
        let per_node: Vec<f64> = head_w.iter().map(|w| dlogit * w / n as f64).collect();
        let mut d_h: Vec<f64> = (0..n).flat_map(|_| per_node.iter().copied()).collect();

        for l in (0..self.layers.len()).rev() {
            let layer = self.layers[l];
            let lt = &tape.layers[l];
            let out = layer.out_width;
            let mut d_pre = d_h;
            if let Some(m) = &lt.mask {
                d_pre.iter_mut().zip(m).for_each(|(d, k)| *d *= k);
            }
            if l + 1 < self.layers.len() {
                d_pre.iter_mut().zip(&lt.pre).for_each(|(d, &z)| {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                });
            }

            let w = self.params.get(layer.weight).value.clone();
            let mut d_w = vec![0.0; layer.in_width * out];
            let mut d_b = vec![0.0; out];
            let mut d_prop = vec![0.0; n * layer.in_width];
            for i in 0..n {
                let dz = &d_pre[i * out..(i + 1) * out];
                d_b.iter_mut().zip(dz).for_each(|(b, d)| *b += d);
                for k in 0..layer.in_width {
                    let p = lt.propagated[i * layer.in_width + k];
                    let wk = &w[k * out..(k + 1) * out];
                    let dwk = &mut d_w[k * out..(k + 1) * out];
                    let mut acc = 0.0;
                    for o in 0..out {
                        dwk[o] += p * dz[o];
                        acc += dz[o] * wk[o];
                    }
                    d_prop[i * layer.in_width + k] = acc;
                }
            }
            self.params
                .get_mut(layer.weight)
                .grad
                .iter_mut()
                .zip(&d_w)
                .for_each(|(g, d)| *g += d);
            self.params
                .get_mut(layer.bias)
                .grad
                .iter_mut()
                .zip(&d_b)
                .for_each(|(g, d)| *g += d);
            d_h = tape.input.propagate_transposed(&d_prop, layer.in_width);
        }
        Ok(())
    }
}

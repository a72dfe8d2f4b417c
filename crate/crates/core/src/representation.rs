//! Inference matrix (LIM) and inference graph (LIG) builders.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::{self, Write as _};

use crate::embedding::{Representation, Scheme, StepVector, Vocabulary};
use crate::error::{Error, Result};
use crate::trace::{self, BugTrace};

/// `R x N` grid of step vectors, zero-padded after each run ends.
///
/// Stored run-major: the vector for run `r`, step `t` starts at
/// `(r * steps + t) * width`.
#[derive(Debug, Clone, PartialEq)]
pub struct InferenceMatrix {
    pub bug_id: String,
    pub label: bool,
    pub runs: usize,
    pub steps: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl InferenceMatrix {
    pub fn cell(&self, run: usize, step: usize) -> &[f64] {
        let start = (run * self.steps + step) * self.width;
        &self.data[start..start + self.width]
    }

    fn cell_mut(&mut self, run: usize, step: usize) -> &mut [f64] {
        let start = (run * self.steps + step) * self.width;
        &mut self.data[start..start + self.width]
    }

    pub fn nonzero_rows(&self) -> usize {
        self.data
            .chunks(self.width.max(1))
            .filter(|row| row.iter().any(|&x| x != 0.0))
            .count()
    }
}

/// Builds the inference matrix of `bug`. Under F+A+A the answer vector takes
/// the first padded row of its run, or overwrites the last row when the run
/// used all `max_steps` calls. Runs with no answer get no answer row.
pub fn build_lim(bug: &BugTrace, scheme: Scheme, vocab: &Vocabulary, max_steps: usize) -> Result<InferenceMatrix> {
    if scheme == Scheme::S {
        return Err(Error::SchemeNotAllowed {
            scheme,
            usage: "the inference matrix",
        });
    }
    let width = scheme.feature_width(vocab.width());
    let runs = bug.runs.len();
    let mut lim = InferenceMatrix {
        bug_id: bug.bug_id.clone(),
        label: trace::label(bug),
        runs,
        steps: max_steps,
        width,
        data: vec![0.0; runs * max_steps * width],
    };
    for (r, run) in bug.runs.iter().enumerate() {
        if run.steps.len() > max_steps {
            return Err(Error::record(
                &bug.bug_id,
                alloc::format!("runs[{r}].steps"),
                "longer than N",
            ));
        }
        for (t, call) in run.steps.iter().enumerate() {
            let v = vocab.embed_step(scheme, Representation::Matrix, &bug.bug_id, call)?;
            lim.cell_mut(r, t).copy_from_slice(&v.values);
        }
        if scheme.includes_answer() && !run.answer.is_empty() && max_steps > 0 {
            let v = vocab.embed_answer(scheme, &bug.bug_id, &run.answer)?;
            let row = run.steps.len().min(max_steps - 1);
            lim.cell_mut(r, row).copy_from_slice(&v.values);
        }
    }
    Ok(lim)
}

/// Input to the sequence model: `len` vectors of equal `width`, flattened.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub width: usize,
    pub data: Vec<f64>,
}

impl Sequence {
    pub fn new(width: usize, data: Vec<f64>) -> Self {
        Self { width, data }
    }

    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.width).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn step(&self, t: usize) -> &[f64] {
        &self.data[t * self.width..(t + 1) * self.width]
    }
}

/// Interleaves runs step by step: element `t * R + r` is run `r`'s step `t`.
pub fn lstm_sequence(lim: &InferenceMatrix) -> Sequence {
    let mut data = Vec::with_capacity(lim.data.len());
    for t in 0..lim.steps {
        for r in 0..lim.runs {
            data.extend_from_slice(lim.cell(r, t));
        }
    }
    Sequence::new(lim.width, data)
}

/// Content identity of a graph node. Position in the run is not part of it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeKey {
    Call {
        function_type: u8,
        argument: Option<String>,
        resolved: bool,
    },
    /// Sorted answer set.
    Answer(Vec<String>),
}

impl fmt::Display for NodeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeKey::Call {
                function_type,
                argument,
                resolved,
            } => {
                write!(f, "f{function_type}({})", argument.as_deref().unwrap_or(""))?;
                if !resolved {
                    f.write_char('!')?;
                }
                Ok(())
            }
            NodeKey::Answer(set) => {
                f.write_str("answer{")?;
                for (i, m) in set.iter().enumerate() {
                    if i > 0 {
                        f.write_char(',')?;
                    }
                    f.write_str(m)?;
                }
                f.write_char('}')
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphNode {
    pub key: NodeKey,
    pub feature: StepVector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub weight: u32,
}

/// Weighted digraph of distinct reasoning steps. Nodes are sorted by key and
/// edges by `(src, dst)`, so the build does not depend on run order.
#[derive(Debug, Clone, PartialEq)]
pub struct InferenceGraph {
    pub bug_id: String,
    pub label: bool,
    pub width: usize,
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<Edge>,
}

impl InferenceGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn total_weight(&self) -> u64 {
        self.edges.iter().map(|e| u64::from(e.weight)).sum()
    }

    /// One line per edge: `src_key -> dst_key [weight]`.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for e in &self.edges {
            let _ = writeln!(
                out,
                "{} -> {} [{}]",
                self.nodes[e.src].key, self.nodes[e.dst].key, e.weight
            );
        }
        out
    }

    /// Same graph with nodes listed in the order given by `order`
    /// (`order[i]` is the old index of new node `i`).
    pub fn permuted(&self, order: &[usize]) -> InferenceGraph {
        let mut new_index = vec![0; order.len()];
        for (new, &old) in order.iter().enumerate() {
            new_index[old] = new;
        }
        InferenceGraph {
            bug_id: self.bug_id.clone(),
            label: self.label,
            width: self.width,
            nodes: order.iter().map(|&i| self.nodes[i].clone()).collect(),
            edges: self
                .edges
                .iter()
                .map(|e| Edge {
                    src: new_index[e.src],
                    dst: new_index[e.dst],
                    weight: e.weight,
                })
                .collect(),
        }
    }
}

fn step_keys(bug: &BugTrace, scheme: Scheme) -> Vec<Vec<NodeKey>> {
    bug.runs
        .iter()
        .map(|run| {
            let mut keys: Vec<NodeKey> = run
                .steps
                .iter()
                .map(|c| NodeKey::Call {
                    function_type: c.function_type,
                    argument: c.canonical_argument().map(String::from),
                    resolved: c.resolved,
                })
                .collect();
            if scheme.includes_answer() && !run.answer.is_empty() {
                let mut set: Vec<String> = run.answer.iter().map(|a| String::from(a.trim())).collect();
                set.sort();
                set.dedup();
                keys.push(NodeKey::Answer(set));
            }
            keys
        })
        .collect()
}

pub fn build_lig(bug: &BugTrace, scheme: Scheme, vocab: &Vocabulary) -> Result<InferenceGraph> {
    let paths = step_keys(bug, scheme);

    let mut features: BTreeMap<NodeKey, StepVector> = BTreeMap::new();
    for (run, keys) in bug.runs.iter().zip(&paths) {
        for (t, key) in keys.iter().enumerate() {
            if features.contains_key(key) {
                continue;
            }
            let feature = match key {
                NodeKey::Call { .. } => vocab.embed_step(scheme, Representation::Graph, &bug.bug_id, &run.steps[t])?,
                NodeKey::Answer(_) => vocab.embed_answer(scheme, &bug.bug_id, &run.answer)?,
            };
            features.insert(key.clone(), feature);
        }
    }
    let index: BTreeMap<&NodeKey, usize> = features.keys().enumerate().map(|(i, k)| (k, i)).collect();

    let mut weights: BTreeMap<(usize, usize), u32> = BTreeMap::new();
    for keys in &paths {
        for pair in keys.windows(2) {
            *weights.entry((index[&pair[0]], index[&pair[1]])).or_insert(0) += 1;
        }
    }
    let edges = weights
        .into_iter()
        .map(|((src, dst), weight)| Edge { src, dst, weight })
        .collect();

    Ok(InferenceGraph {
        bug_id: bug.bug_id.clone(),
        label: trace::label(bug),
        width: scheme.feature_width(vocab.width()),
        nodes: features
            .into_iter()
            .map(|(key, feature)| GraphNode { key, feature })
            .collect(),
        edges,
    })
}

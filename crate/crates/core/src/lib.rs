//! Predicting whether self-consistency voting over LLM-agent reasoning traces
//! lands on the right answer, from the structure of the traces themselves.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is pure
//! computation over in-memory values: file formats, the command line and
//! thread orchestration live in the `lachesis` companion crate.
//!
//! Pipeline:
//!
//! 1. [`trace`]: the trace data model, vote tallies, labels and the
//!    voting-confidence baseline.
//! 2. [`embedding`]: per-bug vocabularies and step feature vectors under the
//!    S / F / F+A / F+A+A schemes.
//! 3. [`representation`]: the inference matrix (LIM) and inference graph (LIG).
//! 4. [`nn`]: LSTM and GCN classifiers with hand-written reverse mode, Adam
//!    and finite-difference gradient checking.
//! 5. [`experiment`] and [`metrics`]: k-fold cross-validation, epoch
//!    selection, accuracy / precision / recall / ROC-AUC and baselines.
//! 6. [`synth`]: a seeded generator of traces with a planted convergence
//!    signal.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod embedding;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod nn;
pub mod representation;
pub mod rng;
pub mod synth;
pub mod trace;

pub use crate::embedding::{Scheme, StepVector, Vocabulary};
pub use crate::error::{Error, Result};
pub use crate::representation::{InferenceGraph, InferenceMatrix};
pub use crate::trace::{Benchmark, BugTrace, FunctionCall, ReasoningRun, TraceFile, VoteTally};

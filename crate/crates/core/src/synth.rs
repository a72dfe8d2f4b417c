//! Seeded synthetic traces with a planted self-consistency signal.
//!
//! Every run starts by exploring (coverage-style tools 0 and 1, arguments
//! uniform over the bug's symbol pool) and then inspects candidates with
//! tools 2 to 4. In planted-correct bugs each inspection step targets the
//! ground-truth method with probability `convergence` and every run answers
//! it; in planted-incorrect bugs inspections stay uniform and answers are
//! one or two methods other than the ground truth. `noise` swaps an argument
//! for a symbol missing from the repository, or a planted answer for a random
//! one. Labels are never planted directly: they come from voting.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::RngExt;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{Purpose, Rng, stream};
use crate::trace::{Benchmark, BugTrace, FUNCTION_TYPES, FunctionCall, ReasoningRun, TraceFile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_bugs: usize,
    pub positive_fraction: f64,
    #[serde(rename = "R")]
    pub runs: usize,
    #[serde(rename = "N")]
    pub max_steps: usize,
    #[serde(default = "default_tools")]
    pub tools: usize,
    pub symbols_per_bug: usize,
    pub convergence: f64,
    pub noise: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_tools() -> usize {
    FUNCTION_TYPES
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_bugs: 300,
            positive_fraction: 0.67,
            runs: 10,
            max_steps: 10,
            tools: FUNCTION_TYPES,
            symbols_per_bug: 8,
            convergence: 0.9,
            noise: 0.1,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} must be in [0, 1]")))
            }
        };
        prob("positive_fraction", self.positive_fraction)?;
        prob("convergence", self.convergence)?;
        prob("noise", self.noise)?;
        if self.symbols_per_bug < 2 {
            return Err(Error::InvalidConfig("symbols_per_bug must be at least 2".into()));
        }
        if self.tools != FUNCTION_TYPES {
            return Err(Error::InvalidConfig(format!("tools must be {FUNCTION_TYPES}")));
        }
        if self.runs == 0 || self.max_steps < 2 {
            return Err(Error::InvalidConfig("need R >= 1 and N >= 2".into()));
        }
        Ok(())
    }
}

/// Tool names written into the header.
pub const TOOL_NAMES: [&str; FUNCTION_TYPES] = [
    "failing_tests_covered_classes",
    "failing_tests_covered_methods",
    "code_snippet",
    "comments",
    "test_source",
];

struct BugGen<'a> {
    config: &'a SynthConfig,
    rng: Rng,
    pool: Vec<String>,
    truth: usize,
    planted: bool,
}

impl BugGen<'_> {
    fn call(&mut self, tool: u8, target: Option<usize>) -> FunctionCall {
        if tool == 0 {
            return FunctionCall::new(0, None, true);
        }
        if self.rng.random_bool(self.config.noise) {
            let missing = format!("missing.Symbol{}", self.rng.random_range(0..1000u32));
            return FunctionCall::new(tool, Some(&missing), false);
        }
        let symbol = target.unwrap_or_else(|| self.rng.random_range(0..self.pool.len()));
        FunctionCall::new(tool, Some(&self.pool[symbol]), true)
    }

    fn other_symbol(&mut self) -> usize {
        let pick = self.rng.random_range(0..self.pool.len() - 1);
        if pick >= self.truth { pick + 1 } else { pick }
    }

    fn run(&mut self) -> ReasoningRun {
        let n = self.config.max_steps;
        let len = self.rng.random_range(n.div_ceil(2)..=n);
        let explore = len / 2;
        let mut steps = Vec::with_capacity(len);
        for t in 0..len {
            if t < explore {
                let tool = self.rng.random_range(0..2u8);
                steps.push(self.call(tool, None));
            } else {
                let tool = self.rng.random_range(2..FUNCTION_TYPES as u8);
                let target = (self.planted && self.rng.random_bool(self.config.convergence)).then_some(self.truth);
                steps.push(self.call(tool, target));
            }
        }
        let answer = if self.planted && !self.rng.random_bool(self.config.noise) {
            alloc::vec![self.pool[self.truth].clone()]
        } else if self.planted {
            let s = self.rng.random_range(0..self.pool.len());
            alloc::vec![self.pool[s].clone()]
        } else {
            let first = self.other_symbol();
            let mut answer = alloc::vec![self.pool[first].clone()];
            if self.pool.len() > 2 && self.rng.random_bool(0.5) {
                let mut second = self.other_symbol();
                while second == first {
                    second = self.other_symbol();
                }
                answer.push(self.pool[second].clone());
            }
            answer
        };
        ReasoningRun { steps, answer }
    }
}

/// Whether bug `index` was generated with the planted signal.
pub fn is_planted(config: &SynthConfig, index: usize) -> bool {
    stream(config.seed, index as u64, Purpose::Synth).random_bool(config.positive_fraction)
}

pub fn generate(config: &SynthConfig) -> Result<TraceFile> {
    config.validate()?;
    let mut bugs = Vec::with_capacity(config.n_bugs);
    for b in 0..config.n_bugs {
        let mut rng = stream(config.seed, b as u64, Purpose::Synth);
        let planted = rng.random_bool(config.positive_fraction);
        let dataset = if rng.random_bool(0.5) {
            Benchmark::BugsInPy
        } else {
            Benchmark::Defects4J
        };
        let pool: Vec<String> = (0..config.symbols_per_bug)
            .map(|j| format!("pkg{b}.Module{}.method{j}", j % 3))
            .collect();
        let truth = rng.random_range(0..pool.len());
        let mut bug = BugGen {
            config,
            rng,
            pool,
            truth,
            planted,
        };
        let runs = (0..config.runs).map(|_| bug.run()).collect();
        bugs.push(BugTrace {
            bug_id: format!("synth-{b}"),
            dataset,
            ground_truth: bug.pool[bug.truth].clone(),
            runs,
        });
    }
    let functions: BTreeMap<String, u8> = TOOL_NAMES
        .iter()
        .enumerate()
        .map(|(i, n)| (String::from(*n), i as u8))
        .collect();
    Ok(TraceFile {
        runs_per_bug: config.runs,
        max_steps: config.max_steps,
        functions,
        bugs,
    })
}

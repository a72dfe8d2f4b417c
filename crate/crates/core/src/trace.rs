//! Reasoning-trace data model and self-consistency voting.
//!
//! A [`BugTrace`] holds the `R` independent runs an agent made on one bug.
//! Each run is a sequence of at most `N` tool calls followed by a (possibly
//! empty) answer set. Voting spreads one unit of mass per run uniformly over
//! its answer set and averages over runs; the top vote share is the
//! confidence baseline.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of distinct tool families a call can belong to.
pub const FUNCTION_TYPES: usize = 5;

/// Exact vote share.
pub type Score = Ratio<u64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Benchmark {
    #[serde(rename = "bugsinpy")]
    BugsInPy,
    #[serde(rename = "defects4j")]
    Defects4J,
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Benchmark::BugsInPy => "bugsinpy",
            Benchmark::Defects4J => "defects4j",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionCall {
    #[serde(rename = "function")]
    pub function_type: u8,
    pub argument: Option<String>,
    pub resolved: bool,
}

impl FunctionCall {
    pub fn new(function_type: u8, argument: Option<&str>, resolved: bool) -> Self {
        Self {
            function_type,
            argument: argument.map(String::from),
            resolved,
        }
    }

    /// Argument as used for identity: surrounding whitespace trimmed.
    pub fn canonical_argument(&self) -> Option<&str> {
        self.argument.as_deref().map(str::trim)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ReasoningRun {
    pub steps: Vec<FunctionCall>,
    pub answer: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugTrace {
    pub bug_id: String,
    pub dataset: Benchmark,
    pub ground_truth: String,
    pub runs: Vec<ReasoningRun>,
}

/// A whole trace file: header plus bugs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceFile {
    #[serde(rename = "R")]
    pub runs_per_bug: usize,
    #[serde(rename = "N")]
    pub max_steps: usize,
    pub functions: BTreeMap<String, u8>,
    pub bugs: Vec<BugTrace>,
}

impl TraceFile {
    /// Checks the header and every bug against the trace invariants.
    pub fn validate(&self) -> Result<()> {
        if self.runs_per_bug == 0 {
            return Err(Error::InvalidHeader("R must be at least 1".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidHeader("N must be at least 1".into()));
        }
        let mut indices = BTreeSet::new();
        for (name, &index) in &self.functions {
            if usize::from(index) >= FUNCTION_TYPES {
                return Err(Error::InvalidHeader(alloc::format!(
                    "function `{name}` has index {index}, must be < {FUNCTION_TYPES}"
                )));
            }
            if !indices.insert(index) {
                return Err(Error::InvalidHeader(alloc::format!(
                    "function index {index} is assigned to more than one name"
                )));
            }
        }
        let mut seen = BTreeSet::new();
        for bug in &self.bugs {
            bug.validate(self.runs_per_bug, self.max_steps)?;
            if !seen.insert(bug.bug_id.as_str()) {
                return Err(Error::DuplicateBug(bug.bug_id.clone()));
            }
        }
        Ok(())
    }

    pub fn positive_count(&self) -> usize {
        self.bugs.iter().filter(|b| label(b)).count()
    }

    pub fn count_by_benchmark(&self, benchmark: Benchmark) -> usize {
        self.bugs.iter().filter(|b| b.dataset == benchmark).count()
    }
}

impl BugTrace {
    pub fn validate(&self, runs_per_bug: usize, max_steps: usize) -> Result<()> {
        let id = self.bug_id.as_str();
        if id.is_empty() {
            return Err(Error::record(id, "bug_id", "must not be empty"));
        }
        if self.ground_truth.trim().is_empty() {
            return Err(Error::record(id, "ground_truth", "must not be empty"));
        }
        if self.runs.len() != runs_per_bug {
            return Err(Error::record(
                id,
                "runs",
                alloc::format!("{} runs, header says R = {runs_per_bug}", self.runs.len()),
            ));
        }
        for (r, run) in self.runs.iter().enumerate() {
            if run.steps.len() > max_steps {
                return Err(Error::record(
                    id,
                    alloc::format!("runs[{r}].steps"),
                    alloc::format!("{} steps, header says N = {max_steps}", run.steps.len()),
                ));
            }
            for (s, call) in run.steps.iter().enumerate() {
                if usize::from(call.function_type) >= FUNCTION_TYPES {
                    return Err(Error::record(
                        id,
                        alloc::format!("runs[{r}].steps[{s}].function"),
                        alloc::format!("{} is not < {FUNCTION_TYPES}", call.function_type),
                    ));
                }
                if call.argument.is_none() && !call.resolved {
                    return Err(Error::record(
                        id,
                        alloc::format!("runs[{r}].steps[{s}].resolved"),
                        "a call without argument cannot be unresolved",
                    ));
                }
            }
            let mut answers = BTreeSet::new();
            for a in &run.answer {
                if !answers.insert(a.as_str()) {
                    return Err(Error::record(
                        id,
                        alloc::format!("runs[{r}].answer"),
                        alloc::format!("duplicate answer `{a}`"),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Vote share per candidate method. Only methods named by at least one run
/// appear, so every stored score is positive.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct VoteTally {
    pub scores: BTreeMap<String, Score>,
}

impl VoteTally {
    pub fn score(&self, method: &str) -> Score {
        self.scores
            .get(method)
            .copied()
            .unwrap_or_else(|| Ratio::from_integer(0))
    }

    pub fn total(&self) -> Score {
        self.scores.values().fold(Ratio::from_integer(0), |acc, s| acc + s)
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

pub fn vote_scores(bug: &BugTrace) -> VoteTally {
    let mut tally = VoteTally::default();
    let runs = bug.runs.len() as u64;
    if runs == 0 {
        return tally;
    }
    for run in &bug.runs {
        if run.answer.is_empty() {
            continue;
        }
        let share = Ratio::new(1, runs * run.answer.len() as u64);
        for method in &run.answer {
            *tally
                .scores
                .entry(method.clone())
                .or_insert_with(|| Ratio::from_integer(0)) += share;
        }
    }
    tally
}

pub fn confidence_exact(tally: &VoteTally) -> Score {
    tally
        .scores
        .values()
        .copied()
        .max()
        .unwrap_or_else(|| Ratio::from_integer(0))
}

/// Highest vote share, 0 for an empty tally.
pub fn confidence(tally: &VoteTally) -> f64 {
    to_f64(confidence_exact(tally))
}

pub fn to_f64(score: Score) -> f64 {
    *score.numer() as f64 / *score.denom() as f64
}

/// True iff the ground truth holds the strict, unique top vote share.
pub fn label(bug: &BugTrace) -> bool {
    let tally = vote_scores(bug);
    let Some(&truth) = tally.scores.get(&bug.ground_truth) else {
        return false;
    };
    tally.scores.iter().all(|(m, &s)| *m == bug.ground_truth || s < truth)
}

pub fn classify_by_confidence(tally: &VoteTally, threshold: f64) -> bool {
    confidence(tally) >= threshold
}

/// Keeps the first `prefix` steps of every run and drops all answers.
pub fn truncate(bug: &BugTrace, prefix: usize, max_steps: usize) -> Result<BugTrace> {
    if prefix > max_steps {
        return Err(Error::PrefixOutOfRange {
            requested: prefix,
            max_steps,
        });
    }
    Ok(BugTrace {
        bug_id: bug.bug_id.clone(),
        dataset: bug.dataset,
        ground_truth: bug.ground_truth.clone(),
        runs: bug
            .runs
            .iter()
            .map(|run| ReasoningRun {
                steps: run.steps.iter().take(prefix).cloned().collect(),
                answer: Vec::new(),
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn run(steps: usize, answer: &[&str]) -> ReasoningRun {
        ReasoningRun {
            steps: (0..steps)
                .map(|i| FunctionCall::new((i % 5) as u8, Some("m"), true))
                .collect(),
            answer: answer.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn bug(truth: &str, runs: Vec<ReasoningRun>) -> BugTrace {
        BugTrace {
            bug_id: "b".into(),
            dataset: Benchmark::Defects4J,
            ground_truth: truth.into(),
            runs,
        }
    }

    #[test]
    fn votes_split_over_answer_sets() {
        let b = bug("a", vec![run(1, &["a"]), run(1, &["a", "b"])]);
        let t = vote_scores(&b);
        assert_eq!(t.score("a"), Ratio::new(3, 4));
        assert_eq!(t.score("b"), Ratio::new(1, 4));
        assert_eq!(confidence(&t), 0.75);
        assert!(label(&b));
        assert!(classify_by_confidence(&t, 0.5));
    }

    #[test]
    fn empty_answers_carry_no_mass() {
        let b = bug("a", vec![run(0, &[]), run(2, &["b"])]);
        let t = vote_scores(&b);
        assert_eq!(t.scores.len(), 1);
        assert_eq!(t.score("b"), Ratio::new(1, 2));
        assert!(!label(&b));
    }

    #[test]
    fn unanimous_singleton_is_fully_confident() {
        let b = bug("a", (0..10).map(|_| run(3, &["a"])).collect());
        assert_eq!(confidence(&vote_scores(&b)), 1.0);
        assert!(label(&b));
    }

    #[test]
    fn ties_and_absent_truth_are_negative() {
        let tie = bug("a", vec![run(1, &["a"]), run(1, &["b"])]);
        assert!(!label(&tie));
        assert!(classify_by_confidence(&vote_scores(&tie), 0.5));
        let absent = bug("z", vec![run(1, &["a"]), run(1, &["b"])]);
        assert!(!label(&absent));
        let empty = bug("a", vec![run(1, &[]), run(1, &[])]);
        assert!(!label(&empty));
        assert_eq!(confidence(&vote_scores(&empty)), 0.0);
        assert!(!classify_by_confidence(&vote_scores(&empty), 0.5));
    }

    #[test]
    fn truncate_keeps_prefix_and_drops_answers() {
        let b = bug("a", vec![run(2, &["a"]), run(10, &["a"])]);
        let full = truncate(&b, 10, 10).unwrap();
        assert_eq!(full.runs[1].steps, b.runs[1].steps);
        assert!(full.runs.iter().all(|r| r.answer.is_empty()));
        let none = truncate(&b, 0, 10).unwrap();
        assert!(none.runs.iter().all(|r| r.steps.is_empty()));
        let three = truncate(&b, 3, 10).unwrap();
        assert_eq!(three.runs[0].steps.len(), 2);
        assert_eq!(three.runs[1].steps.len(), 3);
        assert_eq!(
            truncate(&b, 11, 10),
            Err(Error::PrefixOutOfRange {
                requested: 11,
                max_steps: 10
            })
        );
    }

    fn file(bugs: Vec<BugTrace>) -> TraceFile {
        TraceFile {
            runs_per_bug: 2,
            max_steps: 10,
            functions: BTreeMap::from([("get_code".to_string(), 0u8)]),
            bugs,
        }
    }

    #[test]
    fn validation_names_bug_and_field() {
        let mut b = bug("a", vec![run(1, &["a"]), run(11, &["a"])]);
        b.bug_id = "Lang-48".into();
        match file(vec![b.clone()]).validate() {
            Err(Error::InvalidRecord { bug_id, field, .. }) => {
                assert_eq!(bug_id, "Lang-48");
                assert_eq!(field, "runs[1].steps");
            }
            other => panic!("{other:?}"),
        }
        b.runs[1] = run(1, &["a"]);
        b.runs[0].steps[0].function_type = 5;
        assert!(matches!(
            file(vec![b.clone()]).validate(),
            Err(Error::InvalidRecord { field, .. }) if field == "runs[0].steps[0].function"
        ));
        b.runs[0].steps[0] = FunctionCall::new(1, None, false);
        assert!(file(vec![b.clone()]).validate().is_err());
        b.runs[0].steps[0] = FunctionCall::new(1, None, true);
        b.runs.pop();
        assert!(matches!(
            file(vec![b.clone()]).validate(),
            Err(Error::InvalidRecord { field, .. }) if field == "runs"
        ));
        b.runs.push(run(1, &["a", "a"]));
        assert!(file(vec![b.clone()]).validate().is_err());
        b.runs[1] = run(1, &["a"]);
        assert_eq!(file(vec![b.clone()]).validate(), Ok(()));
        assert_eq!(
            file(vec![b.clone(), b.clone()]).validate(),
            Err(Error::DuplicateBug("Lang-48".into()))
        );
    }

    #[test]
    fn header_rejects_out_of_range_function_index() {
        let mut f = file(vec![]);
        f.functions.insert("x".into(), 7);
        assert!(matches!(f.validate(), Err(Error::InvalidHeader(_))));
    }
}

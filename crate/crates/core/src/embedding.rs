//! Step feature vectors.
//!
//! Every vector starts with a 5-wide function-type block. The argument
//! schemes append a block of global width `W`: one slot per symbol in the
//! bug's own vocabulary (first-appearance order), zero padding up to
//! `W - 1`, and the last slot reserved for arguments that did not resolve
//! in the repository.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::{BugTrace, FUNCTION_TYPES, FunctionCall};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Shape only: every node is `ones(5)`.
    S,
    /// Function type one-hot.
    F,
    /// Function type plus argument identity.
    FA,
    /// F+A plus a final multi-hot answer step.
    FAA,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::S, Scheme::F, Scheme::FA, Scheme::FAA];

    pub fn feature_width(self, arg_width: usize) -> usize {
        match self {
            Scheme::S | Scheme::F => FUNCTION_TYPES,
            Scheme::FA | Scheme::FAA => FUNCTION_TYPES + arg_width,
        }
    }

    /// Whether the run's answer becomes a step of its own.
    pub fn includes_answer(self) -> bool {
        matches!(self, Scheme::S | Scheme::FAA)
    }

    pub fn uses_answers(self) -> bool {
        self == Scheme::FAA
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::S => "S",
            Scheme::F => "F",
            Scheme::FA => "F+A",
            Scheme::FAA => "F+A+A",
        })
    }
}

impl core::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "s" => Ok(Scheme::S),
            "f" => Ok(Scheme::F),
            "fa" | "f+a" => Ok(Scheme::FA),
            "faa" | "f+a+a" => Ok(Scheme::FAA),
            _ => Err(Error::InvalidConfig(alloc::format!("unknown scheme `{s}`"))),
        }
    }
}

/// What a step vector will be fed into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    Matrix,
    Graph,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepVector {
    pub values: Vec<f64>,
    pub scheme: Scheme,
}

impl StepVector {
    pub fn width(&self) -> usize {
        self.values.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    per_bug: BTreeMap<String, Vec<String>>,
    index: BTreeMap<String, BTreeMap<String, usize>>,
    width: usize,
}

impl Vocabulary {
    /// Collects, per bug, resolved argument symbols and answer symbols in
    /// first-appearance order (runs in order, a run's steps before its
    /// answer). The global width is the largest list plus the reserved slot.
    pub fn build(bugs: &[BugTrace]) -> Self {
        let mut per_bug = BTreeMap::new();
        let mut index = BTreeMap::new();
        let mut width = 1;
        for bug in bugs {
            let mut symbols: Vec<String> = Vec::new();
            let mut lookup: BTreeMap<String, usize> = BTreeMap::new();
            let mut push = |s: &str| {
                if !lookup.contains_key(s) {
                    lookup.insert(s.into(), symbols.len());
                    symbols.push(s.into());
                }
            };
            for run in &bug.runs {
                for call in run.steps.iter().filter(|c| c.resolved) {
                    if let Some(arg) = call.canonical_argument() {
                        push(arg);
                    }
                }
                for answer in &run.answer {
                    push(answer.trim());
                }
            }
            width = width.max(symbols.len() + 1);
            per_bug.insert(bug.bug_id.clone(), symbols);
            index.insert(bug.bug_id.clone(), lookup);
        }
        Self { per_bug, index, width }
    }

    /// Builds the vocabulary but pins the global width, e.g. to the width a
    /// stored model was trained with.
    pub fn build_with_width(bugs: &[BugTrace], width: usize) -> Result<Self> {
        let mut vocab = Self::build(bugs);
        for (bug_id, symbols) in &vocab.per_bug {
            if symbols.len() + 1 > width {
                return Err(Error::VocabularyOverflow {
                    bug_id: bug_id.clone(),
                    needed: symbols.len() + 1,
                    width,
                });
            }
        }
        vocab.width = width.max(1);
        Ok(vocab)
    }

    /// Global argument-block width `W`.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn symbols(&self, bug_id: &str) -> Option<&[String]> {
        self.per_bug.get(bug_id).map(Vec::as_slice)
    }

    pub fn per_bug(&self) -> &BTreeMap<String, Vec<String>> {
        &self.per_bug
    }

    fn lookup(&self, bug_id: &str) -> Result<&BTreeMap<String, usize>> {
        self.index.get(bug_id).ok_or_else(|| Error::UnknownBug(bug_id.into()))
    }

    fn reserved(&self) -> usize {
        self.width - 1
    }

    pub fn embed_step(
        &self,
        scheme: Scheme,
        target: Representation,
        bug_id: &str,
        call: &FunctionCall,
    ) -> Result<StepVector> {
        if scheme == Scheme::S && target == Representation::Matrix {
            return Err(Error::SchemeNotAllowed {
                scheme,
                usage: "the inference matrix",
            });
        }
        let mut values = vec![0.0; scheme.feature_width(self.width)];
        match scheme {
            Scheme::S => values.fill(1.0),
            Scheme::F => values[usize::from(call.function_type)] = 1.0,
            Scheme::FA | Scheme::FAA => {
                let lookup = self.lookup(bug_id)?;
                values[usize::from(call.function_type)] = 1.0;
                if let Some(arg) = call.canonical_argument() {
                    let slot = if call.resolved {
                        lookup.get(arg).copied().unwrap_or(self.reserved())
                    } else {
                        self.reserved()
                    };
                    values[FUNCTION_TYPES + slot] = 1.0;
                }
            }
        }
        Ok(StepVector { values, scheme })
    }

    pub fn embed_answer(&self, scheme: Scheme, bug_id: &str, answer: &[String]) -> Result<StepVector> {
        let values = match scheme {
            Scheme::S => vec![1.0; FUNCTION_TYPES],
            Scheme::FAA => {
                let lookup = self.lookup(bug_id)?;
                let mut values = vec![0.0; scheme.feature_width(self.width)];
                for symbol in answer {
                    let slot = lookup.get(symbol.trim()).copied().unwrap_or(self.reserved());
                    values[FUNCTION_TYPES + slot] = 1.0;
                }
                values
            }
            Scheme::F | Scheme::FA => {
                return Err(Error::SchemeNotAllowed {
                    scheme,
                    usage: "answer steps",
                });
            }
        };
        Ok(StepVector { values, scheme })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{Benchmark, ReasoningRun};
    use alloc::string::ToString;

    fn bug(id: &str, calls: Vec<FunctionCall>, answer: &[&str]) -> BugTrace {
        BugTrace {
            bug_id: id.into(),
            dataset: Benchmark::BugsInPy,
            ground_truth: "m1".into(),
            runs: alloc::vec![ReasoningRun {
                steps: calls,
                answer: answer.iter().map(|s| s.to_string()).collect(),
            }],
        }
    }

    fn sized(id: &str, n: usize) -> BugTrace {
        let calls = (0..n)
            .map(|i| FunctionCall::new(0, Some(&alloc::format!("s{i}")), true))
            .collect();
        bug(id, calls, &[])
    }

    #[test]
    fn first_appearance_order() {
        let b = bug(
            "b",
            alloc::vec![
                FunctionCall::new(0, Some("m1"), true),
                FunctionCall::new(1, Some("m2"), true),
                FunctionCall::new(2, Some("ghost"), false),
                FunctionCall::new(3, Some("m1"), true),
            ],
            &["m2", "m3"],
        );
        let v = Vocabulary::build(&[b]);
        assert_eq!(v.symbols("b").unwrap(), ["m1", "m2", "m3"]);
        assert_eq!(v.width(), 4);
    }

    #[test]
    fn width_is_largest_list_plus_one() {
        let v = Vocabulary::build(&[sized("a", 3), sized("b", 7)]);
        assert_eq!(v.width(), 8);
        let v = Vocabulary::build(&[bug("e", alloc::vec![FunctionCall::new(0, None, true)], &[])]);
        assert_eq!(v.symbols("e").unwrap().len(), 0);
        assert_eq!(v.width(), 1);
        assert!(Vocabulary::build_with_width(&[sized("a", 3)], 3).is_err());
        assert_eq!(Vocabulary::build_with_width(&[sized("a", 3)], 9).unwrap().width(), 9);
    }

    #[test]
    fn step_vectors() {
        let b = bug(
            "b",
            alloc::vec![
                FunctionCall::new(0, Some("m1"), true),
                FunctionCall::new(0, Some("m2"), true)
            ],
            &[],
        );
        let v = Vocabulary::build_with_width(&[b], 4).unwrap();
        let call = FunctionCall::new(1, Some("m2"), true);
        let fa = v.embed_step(Scheme::FA, Representation::Matrix, "b", &call).unwrap();
        assert_eq!(fa.values, [0., 1., 0., 0., 0., 0., 1., 0., 0.]);
        let f = v
            .embed_step(
                Scheme::F,
                Representation::Matrix,
                "b",
                &FunctionCall::new(2, None, true),
            )
            .unwrap();
        assert_eq!(f.values, [0., 0., 1., 0., 0.]);
        let s = v.embed_step(Scheme::S, Representation::Graph, "b", &call).unwrap();
        assert_eq!(s.values, [1.0; 5]);
        assert!(v.embed_step(Scheme::S, Representation::Matrix, "b", &call).is_err());

        let ghost = FunctionCall::new(4, Some("nowhere"), false);
        let g = v.embed_step(Scheme::FAA, Representation::Graph, "b", &ghost).unwrap();
        assert_eq!(g.values, [0., 0., 0., 0., 1., 0., 0., 0., 1.]);
        let bare = v
            .embed_step(
                Scheme::FA,
                Representation::Graph,
                "b",
                &FunctionCall::new(3, None, true),
            )
            .unwrap();
        assert_eq!(bare.values.iter().sum::<f64>(), 1.0);
        assert!(v.embed_step(Scheme::FA, Representation::Graph, "nope", &call).is_err());
    }

    #[test]
    fn answer_vectors() {
        let b = bug(
            "b",
            alloc::vec![
                FunctionCall::new(0, Some("m1"), true),
                FunctionCall::new(0, Some("m2"), true)
            ],
            &[],
        );
        let v = Vocabulary::build_with_width(&[b], 4).unwrap();
        let both = ["m1".to_string(), "m2".to_string()];
        assert_eq!(
            v.embed_answer(Scheme::FAA, "b", &both).unwrap().values,
            [0., 0., 0., 0., 0., 1., 1., 0., 0.]
        );
        assert_eq!(v.embed_answer(Scheme::FAA, "b", &[]).unwrap().values, [0.0; 9]);
        assert_eq!(v.embed_answer(Scheme::S, "b", &both[..1]).unwrap().values, [1.0; 5]);
        let outside = ["zz".to_string()];
        assert_eq!(v.embed_answer(Scheme::FAA, "b", &outside).unwrap().values[8], 1.0);
        assert!(v.embed_answer(Scheme::F, "b", &both).is_err());
        assert!(v.embed_answer(Scheme::FA, "b", &both).is_err());
    }
}

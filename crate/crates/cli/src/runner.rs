//! Fold-level parallelism on top of the sequential core.

use std::sync::Mutex;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::thread;

use lachesis_core::experiment::{self, ExperimentConfig, FoldReport, MetricsReport, Prepared};
use lachesis_core::{Result, TraceFile};

/// Trains every fold, `jobs` at a time. Fold reports are merged in fold
/// order, so the result does not depend on scheduling.
pub fn run_folds(
    config: &ExperimentConfig,
    prepared: &Prepared,
    folds: &[Vec<usize>],
    jobs: usize,
) -> Result<Vec<FoldReport>> {
    let jobs = jobs.clamp(1, folds.len().max(1));
    if jobs == 1 {
        return (0..folds.len())
            .map(|f| experiment::train_fold(config, prepared, folds, f))
            .collect();
    }
    let next = AtomicUsize::new(0);
    let results = Mutex::new(Vec::with_capacity(folds.len()));
    thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| {
                loop {
                    let f = next.fetch_add(1, Ordering::Relaxed);
                    if f >= folds.len() {
                        break;
                    }
                    let report = experiment::train_fold(config, prepared, folds, f);
                    results.lock().expect("worker panicked").push((f, report));
                }
            });
        }
    });
    let mut results = results.into_inner().expect("worker panicked");
    results.sort_by_key(|(f, _)| *f);
    results.into_iter().map(|(_, r)| r).collect()
}

pub fn run_experiment(config: &ExperimentConfig, file: &TraceFile, jobs: usize) -> Result<(Prepared, MetricsReport)> {
    let prepared = experiment::prepare(config, file)?;
    let folds = experiment::split(config, &prepared.labels)?;
    let reports = run_folds(config, &prepared, &folds, jobs)?;
    let report = experiment::assemble_report(config, &prepared, &folds, reports)?;
    Ok((prepared, report))
}

//! Cross-validated training and evaluation.
//!
//! Per fold the model trains on the other folds and is scored on the held-out
//! fold after every epoch. Under [`EpochSelection::PaperPeakTest`] the
//! reported metrics come from the epoch with the highest held-out accuracy
//! (earliest on ties), which peeks at test data; [`EpochSelection::FinalEpoch`]
//! reports the last epoch instead.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::embedding::{Representation, Scheme, Vocabulary};
use crate::error::{Error, Result};
use crate::metrics::{self, RocPoint};
use crate::nn::params::NamedArray;
use crate::nn::{
    AdamConfig, GcnInput, GcnModel, Hyperparameters, LstmModel, ModelKind, ParameterSet, bce_loss, sigmoid,
};
use crate::representation::{self, Sequence};
use crate::rng::{Purpose, Rng, stream};
use crate::trace::{self, BugTrace, TraceFile};

/// Grid size of the averaged ROC curve.
pub const MEAN_ROC_GRID: usize = 101;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpochSelection {
    #[serde(alias = "paper")]
    PaperPeakTest,
    #[serde(alias = "final")]
    FinalEpoch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scheme: Scheme,
    pub representation: Representation,
    pub hyperparameters: Hyperparameters,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_selection")]
    pub epoch_selection: EpochSelection,
    #[serde(default)]
    pub stratified: bool,
}

fn default_folds() -> usize {
    10
}

fn default_threshold() -> f64 {
    0.5
}

fn default_selection() -> EpochSelection {
    EpochSelection::PaperPeakTest
}

/// Tuned settings per model and scheme: layers, hidden width, batch size and
/// dropout, 50 epochs for the LSTM and 100 for the GCN, learning rate 0.001.
pub fn preset(model: ModelKind, scheme: Scheme) -> Result<Hyperparameters> {
    let (layers, hidden_dim, batch, dropout) = match (model, scheme) {
        (ModelKind::Lstm, Scheme::F) => (1, 32, 64, 0.0),
        (ModelKind::Lstm, Scheme::FA) => (2, 128, 16, 0.5),
        (ModelKind::Lstm, Scheme::FAA) => (1, 32, 32, 0.0),
        (ModelKind::Lstm, Scheme::S) => {
            return Err(Error::SchemeNotAllowed {
                scheme,
                usage: "the sequence model",
            });
        }
        (ModelKind::Gcn, Scheme::S) => (3, 128, 32, 0.3),
        (ModelKind::Gcn, Scheme::F | Scheme::FA | Scheme::FAA) => (3, 64, 16, 0.8),
    };
    Ok(Hyperparameters {
        model,
        layers,
        hidden_dim,
        batch,
        dropout,
        epochs: match model {
            ModelKind::Lstm => 50,
            ModelKind::Gcn => 100,
        },
        learning_rate: 0.001,
    })
}

impl ExperimentConfig {
    pub fn preset(model: ModelKind, scheme: Scheme) -> Result<Self> {
        Ok(Self {
            scheme,
            representation: match model {
                ModelKind::Lstm => Representation::Matrix,
                ModelKind::Gcn => Representation::Graph,
            },
            hyperparameters: preset(model, scheme)?,
            folds: default_folds(),
            seed: 0,
            threshold: default_threshold(),
            epoch_selection: default_selection(),
            stratified: false,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.hyperparameters.validate()?;
        if self.folds < 2 {
            return Err(Error::InvalidConfig("folds must be at least 2".into()));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::InvalidConfig("threshold must be in [0, 1]".into()));
        }
        let expected = match self.hyperparameters.model {
            ModelKind::Lstm => Representation::Matrix,
            ModelKind::Gcn => Representation::Graph,
        };
        if self.representation != expected {
            return Err(Error::InvalidConfig(format!(
                "{} models take the {:?} representation",
                self.hyperparameters.model, expected
            )));
        }
        if self.scheme == Scheme::S && self.representation == Representation::Matrix {
            return Err(Error::SchemeNotAllowed {
                scheme: Scheme::S,
                usage: "the inference matrix",
            });
        }
        Ok(())
    }

    pub fn method_name(&self) -> String {
        format!("{} {}", self.hyperparameters.model, self.scheme)
    }
}

/// One bug turned into model input.
#[derive(Debug, Clone, PartialEq)]
pub enum Sample {
    Sequence(Sequence),
    Graph(GcnInput),
    /// Nothing to feed the model (a graph with no nodes); always scored 0.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub bug_ids: Vec<String>,
    pub samples: Vec<Sample>,
    pub labels: Vec<bool>,
    /// Argument-block width `W` of the vocabulary.
    pub arg_width: usize,
    pub input_width: usize,
}

impl Prepared {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

pub fn build_sample(
    bug: &BugTrace,
    scheme: Scheme,
    representation: Representation,
    vocab: &Vocabulary,
    max_steps: usize,
) -> Result<Sample> {
    let sample = match representation {
        Representation::Matrix => Sample::Sequence(representation::lstm_sequence(&representation::build_lim(
            bug, scheme, vocab, max_steps,
        )?)),
        Representation::Graph => {
            let graph = representation::build_lig(bug, scheme, vocab)?;
            if graph.nodes.is_empty() {
                Sample::Degenerate
            } else {
                Sample::Graph(GcnInput::from_graph(&graph)?)
            }
        }
    };
    Ok(sample)
}

/// Builds every bug's input. `arg_width` pins the vocabulary width, e.g. to
/// the one a checkpoint was trained with.
pub fn prepare_bugs(
    bugs: &[BugTrace],
    max_steps: usize,
    scheme: Scheme,
    representation: Representation,
    arg_width: Option<usize>,
) -> Result<Prepared> {
    let vocab = match arg_width {
        Some(w) => Vocabulary::build_with_width(bugs, w)?,
        None => Vocabulary::build(bugs),
    };
    let samples = bugs
        .iter()
        .map(|b| build_sample(b, scheme, representation, &vocab, max_steps).map_err(|e| e.in_bug(&b.bug_id)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Prepared {
        bug_ids: bugs.iter().map(|b| b.bug_id.clone()).collect(),
        samples,
        labels: bugs.iter().map(trace::label).collect(),
        arg_width: vocab.width(),
        input_width: scheme.feature_width(vocab.width()),
    })
}

pub fn prepare(config: &ExperimentConfig, file: &TraceFile) -> Result<Prepared> {
    config.validate()?;
    prepare_bugs(&file.bugs, file.max_steps, config.scheme, config.representation, None)
}

#[derive(Debug, Clone)]
pub enum Classifier {
    Lstm(LstmModel),
    Gcn(GcnModel),
}

impl Classifier {
    pub fn new(hp: &Hyperparameters, input_width: usize, rng: &mut Rng) -> Self {
        match hp.model {
            ModelKind::Lstm => Classifier::Lstm(LstmModel::new(input_width, hp.hidden_dim, hp.layers, hp.dropout, rng)),
            ModelKind::Gcn => Classifier::Gcn(GcnModel::new(input_width, hp.hidden_dim, hp.layers, hp.dropout, rng)),
        }
    }

    pub fn params(&self) -> &ParameterSet {
        match self {
            Classifier::Lstm(m) => m.params(),
            Classifier::Gcn(m) => m.params(),
        }
    }

    pub fn params_mut(&mut self) -> &mut ParameterSet {
        match self {
            Classifier::Lstm(m) => m.params_mut(),
            Classifier::Gcn(m) => m.params_mut(),
        }
    }

    pub fn input_width(&self) -> usize {
        match self {
            Classifier::Lstm(m) => m.input_width(),
            Classifier::Gcn(m) => m.input_width(),
        }
    }

    /// Evaluation-mode logit; `None` for degenerate samples.
    pub fn logit(&self, sample: &Sample) -> Result<Option<f64>> {
        match (self, sample) {
            (_, Sample::Degenerate) => Ok(None),
            (Classifier::Lstm(m), Sample::Sequence(s)) => m.logit(s).map(Some),
            (Classifier::Gcn(m), Sample::Graph(g)) => m.logit(g).map(Some),
            _ => Err(Error::InvalidConfig("sample does not match the model type".into())),
        }
    }

    /// Predicted probability of a correct outcome; degenerate samples score 0.
    pub fn score(&self, sample: &Sample) -> Result<f64> {
        Ok(self.logit(sample)?.map_or(0.0, sigmoid))
    }

    /// Forward and backward on one sample with the loss scaled by `weight`.
    /// Returns the unscaled loss, or `None` for degenerate samples.
    pub fn accumulate(
        &mut self,
        sample: &Sample,
        label: bool,
        weight: f64,
        rng: Option<&mut Rng>,
    ) -> Result<Option<f64>> {
        let logit = match (&mut *self, sample) {
            (_, Sample::Degenerate) => return Ok(None),
            (Classifier::Lstm(m), Sample::Sequence(s)) => m.forward(s, rng)?,
            (Classifier::Gcn(m), Sample::Graph(g)) => m.forward(g, rng)?,
            _ => return Err(Error::InvalidConfig("sample does not match the model type".into())),
        };
        let (loss, dlogit) = bce_loss(logit, label);
        match self {
            Classifier::Lstm(m) => m.backward(weight * dlogit)?,
            Classifier::Gcn(m) => m.backward(weight * dlogit)?,
        }
        Ok(Some(loss))
    }
}

/// Seeded shuffle, then contiguous chunks; the first `n % k` folds get one
/// extra index.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k == 0 || n < k {
        return Err(Error::FoldCount { n, k });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(seed, 0, Purpose::Folds));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        folds.push(order[start..start + size].to_vec());
        start += size;
    }
    Ok(folds)
}

/// Like [`kfold_split`] but dealing each class round-robin so every fold
/// keeps roughly the overall positive rate.
pub fn stratified_kfold_split(labels: &[bool], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let n = labels.len();
    if k == 0 || n < k {
        return Err(Error::FoldCount { n, k });
    }
    let mut rng = stream(seed, 0, Purpose::Folds);
    let mut pos: Vec<usize> = (0..n).filter(|&i| labels[i]).collect();
    let mut neg: Vec<usize> = (0..n).filter(|&i| !labels[i]).collect();
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut folds = vec![Vec::new(); k];
    for (i, idx) in pos.into_iter().chain(neg).enumerate() {
        folds[i % k].push(idx);
    }
    Ok(folds)
}

pub fn split(config: &ExperimentConfig, labels: &[bool]) -> Result<Vec<Vec<usize>>> {
    if config.stratified {
        stratified_kfold_split(labels, config.folds, config.seed)
    } else {
        kfold_split(labels.len(), config.folds, config.seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub selected_epoch: usize,
    pub accuracy: f64,
    /// `None` when the held-out fold has a single class.
    pub roc_auc: Option<f64>,
    pub precision: f64,
    pub recall: f64,
    pub roc_points: Vec<RocPoint>,
    pub test_bug_ids: Vec<String>,
    pub test_scores: Vec<f64>,
    pub history: Vec<EpochRecord>,
}

/// Trains a fresh model on `train` for the configured number of epochs.
/// `observe` is called after every epoch with the 1-based epoch number.
pub fn train_model(
    config: &ExperimentConfig,
    prepared: &Prepared,
    train: &[usize],
    stream_index: u64,
    mut observe: impl FnMut(usize, f64, &Classifier) -> Result<()>,
) -> Result<Classifier> {
    let hp = &config.hyperparameters;
    let mut model = Classifier::new(
        hp,
        prepared.input_width,
        &mut stream(config.seed, stream_index, Purpose::Init),
    );
    let mut shuffle_rng = stream(config.seed, stream_index, Purpose::Shuffle);
    let mut dropout_rng = stream(config.seed, stream_index, Purpose::Dropout);
    let adam = AdamConfig::default();
    let mut order = train.to_vec();
    let mut step = 0u64;

    for epoch in 1..=hp.epochs {
        order.shuffle(&mut shuffle_rng);
        let (mut loss_sum, mut loss_count) = (0.0, 0usize);
        for batch in order.chunks(hp.batch) {
            let usable = batch
                .iter()
                .filter(|&&i| !matches!(prepared.samples[i], Sample::Degenerate))
                .count();
            if usable == 0 {
                continue;
            }
            model.params_mut().zero_grad();
            let weight = 1.0 / usable as f64;
            for &i in batch {
                let sample = &prepared.samples[i];
                let id = &prepared.bug_ids[i];
                if let Some(loss) = model
                    .accumulate(sample, prepared.labels[i], weight, Some(&mut dropout_rng))
                    .map_err(|e| e.in_bug(id))?
                {
                    loss_sum += loss;
                    loss_count += 1;
                }
            }
            step += 1;
            model.params_mut().adam_step(&adam, hp.learning_rate, step)?;
        }
        let mean_loss = if loss_count == 0 {
            0.0
        } else {
            loss_sum / loss_count as f64
        };
        observe(epoch, mean_loss, &model)?;
    }
    Ok(model)
}

pub fn score_indices(model: &Classifier, prepared: &Prepared, indices: &[usize]) -> Result<Vec<f64>> {
    indices
        .iter()
        .map(|&i| {
            model
                .score(&prepared.samples[i])
                .map_err(|e| e.in_bug(&prepared.bug_ids[i]))
        })
        .collect()
}

pub fn train_fold(
    config: &ExperimentConfig,
    prepared: &Prepared,
    folds: &[Vec<usize>],
    fold: usize,
) -> Result<FoldReport> {
    let test = &folds[fold];
    let train: Vec<usize> = folds
        .iter()
        .enumerate()
        .filter(|&(f, _)| f != fold)
        .flat_map(|(_, idx)| idx.iter().copied())
        .collect();
    let test_labels: Vec<bool> = test.iter().map(|&i| prepared.labels[i]).collect();

    let mut history = Vec::with_capacity(config.hyperparameters.epochs);
    let mut best: Option<(usize, f64, Vec<f64>)> = None;
    let mut last: Option<(usize, Vec<f64>)> = None;
    train_model(config, prepared, &train, fold as u64, |epoch, train_loss, model| {
        let scores = score_indices(model, prepared, test)?;
        let accuracy = metrics::evaluate(&scores, &test_labels, config.threshold)?.accuracy;
        history.push(EpochRecord {
            epoch,
            train_loss,
            test_accuracy: accuracy,
        });
        if best.as_ref().is_none_or(|(_, acc, _)| accuracy > *acc) {
            best = Some((epoch, accuracy, scores.clone()));
        }
        last = Some((epoch, scores));
        Ok(())
    })?;

    let (selected_epoch, scores) = match config.epoch_selection {
        EpochSelection::PaperPeakTest => best.map(|(e, _, s)| (e, s)),
        EpochSelection::FinalEpoch => last,
    }
    .unwrap_or_else(|| (0, vec![0.0; test.len()]));

    let cls = metrics::evaluate(&scores, &test_labels, config.threshold)?;
    let roc = metrics::roc_auc(&scores, &test_labels).ok();
    Ok(FoldReport {
        fold,
        train_size: train.len(),
        test_size: test.len(),
        selected_epoch,
        accuracy: cls.accuracy,
        roc_auc: roc.as_ref().map(|r| r.auc),
        precision: cls.precision,
        recall: cls.recall,
        roc_points: roc.map(|r| r.points).unwrap_or_default(),
        test_bug_ids: test.iter().map(|&i| prepared.bug_ids[i].clone()).collect(),
        test_scores: scores,
        history,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub accuracy: f64,
    pub roc_auc: Option<f64>,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub method: String,
    pub config: ExperimentConfig,
    pub bugs: usize,
    pub positives: usize,
    pub folds: Vec<FoldReport>,
    /// Unweighted mean over folds; AUC over the folds where it is defined.
    pub mean: Summary,
    /// Metrics over all held-out predictions pooled together.
    pub pooled: Summary,
    pub mean_roc: Vec<RocPoint>,
}

pub fn assemble_report(
    config: &ExperimentConfig,
    prepared: &Prepared,
    folds: &[Vec<usize>],
    mut reports: Vec<FoldReport>,
) -> Result<MetricsReport> {
    reports.sort_by_key(|r| r.fold);
    let k = reports.len().max(1) as f64;
    let aucs: Vec<f64> = reports.iter().filter_map(|r| r.roc_auc).collect();
    let mean = Summary {
        accuracy: reports.iter().map(|r| r.accuracy).sum::<f64>() / k,
        roc_auc: (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64),
        precision: reports.iter().map(|r| r.precision).sum::<f64>() / k,
        recall: reports.iter().map(|r| r.recall).sum::<f64>() / k,
    };

    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for r in &reports {
        scores.extend_from_slice(&r.test_scores);
        labels.extend(folds[r.fold].iter().map(|&i| prepared.labels[i]));
    }
    let cls = metrics::evaluate(&scores, &labels, config.threshold)?;
    let pooled = Summary {
        accuracy: cls.accuracy,
        roc_auc: metrics::roc_auc(&scores, &labels).ok().map(|r| r.auc),
        precision: cls.precision,
        recall: cls.recall,
    };
    let curves: Vec<&[RocPoint]> = reports
        .iter()
        .filter(|r| !r.roc_points.is_empty())
        .map(|r| r.roc_points.as_slice())
        .collect();

    Ok(MetricsReport {
        method: config.method_name(),
        config: config.clone(),
        bugs: prepared.len(),
        positives: prepared.labels.iter().filter(|&&y| y).count(),
        mean_roc: metrics::mean_roc(&curves, MEAN_ROC_GRID),
        folds: reports,
        mean,
        pooled,
    })
}

/// All folds in order, on the calling thread.
pub fn run_experiment(config: &ExperimentConfig, file: &TraceFile) -> Result<MetricsReport> {
    let prepared = prepare(config, file)?;
    let folds = split(config, &prepared.labels)?;
    let reports = (0..folds.len())
        .map(|f| train_fold(config, &prepared, &folds, f))
        .collect::<Result<Vec<_>>>()?;
    assemble_report(config, &prepared, &folds, reports)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodMetrics {
    pub method: String,
    pub accuracy: f64,
    pub roc_auc: Option<f64>,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub bugs: usize,
    pub positives: usize,
    pub threshold: f64,
    pub confidence: MethodMetrics,
    pub all_positive: MethodMetrics,
}

/// Voting-confidence baseline at `threshold`, and the predictor that calls
/// every bug correct.
pub fn baseline_report(file: &TraceFile, threshold: f64) -> Result<BaselineReport> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidConfig("threshold must be in [0, 1]".into()));
    }
    let labels: Vec<bool> = file.bugs.iter().map(trace::label).collect();
    let scores: Vec<f64> = file
        .bugs
        .iter()
        .map(|b| trace::confidence(&trace::vote_scores(b)))
        .collect();
    let conf = metrics::evaluate(&scores, &labels, threshold)?;
    let ones = vec![1.0; labels.len()];
    let all = metrics::evaluate(&ones, &labels, threshold)?;
    Ok(BaselineReport {
        bugs: labels.len(),
        positives: labels.iter().filter(|&&y| y).count(),
        threshold,
        confidence: MethodMetrics {
            method: "Confidence".into(),
            accuracy: conf.accuracy,
            roc_auc: metrics::roc_auc(&scores, &labels).ok().map(|r| r.auc),
            precision: conf.precision,
            recall: conf.recall,
        },
        all_positive: MethodMetrics {
            method: "All-positive".into(),
            accuracy: all.accuracy,
            roc_auc: None,
            precision: all.precision,
            recall: all.recall,
        },
    })
}

pub const CHECKPOINT_FORMAT: &str = "lachesis-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Trained parameters plus everything needed to rebuild inputs the same way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub scheme: Scheme,
    pub representation: Representation,
    pub hyperparameters: Hyperparameters,
    pub arg_width: usize,
    pub input_width: usize,
    pub seed: u64,
    pub params: Vec<NamedArray>,
}

impl Checkpoint {
    pub fn new(config: &ExperimentConfig, prepared: &Prepared, model: &Classifier) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            scheme: config.scheme,
            representation: config.representation,
            hyperparameters: config.hyperparameters.clone(),
            arg_width: prepared.arg_width,
            input_width: prepared.input_width,
            seed: config.seed,
            params: model.params().export(),
        }
    }

    /// Rebuilds the model, checking every array against the shapes the
    /// hyperparameters imply.
    pub fn classifier(&self) -> Result<Classifier> {
        if self.format != CHECKPOINT_FORMAT || self.version != CHECKPOINT_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported checkpoint {} v{}",
                self.format, self.version
            )));
        }
        self.hyperparameters.validate()?;
        if self.input_width != self.scheme.feature_width(self.arg_width) {
            return Err(Error::WidthMismatch {
                expected: self.scheme.feature_width(self.arg_width),
                found: self.input_width,
            });
        }
        let mut model = Classifier::new(
            &self.hyperparameters,
            self.input_width,
            &mut stream(0, 0, Purpose::Init),
        );
        model.params_mut().import(&self.params)?;
        Ok(model)
    }
}

/// Trains on every bug for the configured epochs, for a deployable model.
pub fn train_full(config: &ExperimentConfig, prepared: &Prepared) -> Result<Classifier> {
    let all: Vec<usize> = (0..prepared.len()).collect();
    train_model(config, prepared, &all, config.folds as u64, |_, _, _| Ok(()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BugScore {
    pub bug_id: String,
    pub score: f64,
    pub predicted: bool,
    pub label: bool,
}

/// Scores bugs with a stored model. With `prefix` set, every run is cut to
/// its first `prefix` steps and its answer is discarded before scoring.
pub fn score_with_checkpoint(
    checkpoint: &Checkpoint,
    file: &TraceFile,
    threshold: f64,
    prefix: Option<usize>,
) -> Result<Vec<BugScore>> {
    let model = checkpoint.classifier()?;
    let bugs: Vec<BugTrace> = match prefix {
        Some(t) => {
            if checkpoint.scheme.includes_answer() {
                return Err(Error::SchemeNotAllowed {
                    scheme: checkpoint.scheme,
                    usage: "prefix prediction",
                });
            }
            file.bugs
                .iter()
                .map(|b| trace::truncate(b, t, file.max_steps))
                .collect::<Result<_>>()?
        }
        None => file.bugs.clone(),
    };
    let prepared = prepare_bugs(
        &bugs,
        file.max_steps,
        checkpoint.scheme,
        checkpoint.representation,
        Some(checkpoint.arg_width),
    )?;
    // labels always come from the complete traces
    let labels: Vec<bool> = file.bugs.iter().map(trace::label).collect();
    prepared
        .samples
        .iter()
        .zip(&prepared.bug_ids)
        .zip(labels)
        .map(|((sample, id), label)| {
            let score = model.score(sample).map_err(|e| e.in_bug(id))?;
            Ok(BugScore {
                bug_id: id.clone(),
                score,
                predicted: score >= threshold,
                label,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fold_sizes() {
        let folds = kfold_split(456, 10, 3).unwrap();
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        assert_eq!(sizes, [46, 46, 46, 46, 46, 46, 45, 45, 45, 45]);
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..456).collect::<Vec<_>>());
        assert_eq!(folds, kfold_split(456, 10, 3).unwrap());
        assert_ne!(folds, kfold_split(456, 10, 4).unwrap());

        assert!(kfold_split(5, 5, 0).unwrap().iter().all(|f| f.len() == 1));
        assert_eq!(kfold_split(3, 5, 0), Err(Error::FoldCount { n: 3, k: 5 }));
    }

    #[test]
    fn stratified_folds_balance_classes() {
        let labels: Vec<bool> = (0..100).map(|i| i % 3 != 0).collect();
        let folds = stratified_kfold_split(&labels, 10, 1).unwrap();
        for f in &folds {
            let pos = f.iter().filter(|&&i| labels[i]).count();
            assert!((6..=7).contains(&pos), "{pos}");
        }
    }

    #[test]
    fn presets_follow_table() {
        let p = preset(ModelKind::Lstm, Scheme::FA).unwrap();
        assert_eq!(
            (p.layers, p.hidden_dim, p.batch, p.dropout, p.epochs),
            (2, 128, 16, 0.5, 50)
        );
        let p = preset(ModelKind::Gcn, Scheme::S).unwrap();
        assert_eq!(
            (p.layers, p.hidden_dim, p.batch, p.dropout, p.epochs),
            (3, 128, 32, 0.3, 100)
        );
        assert_eq!(p.learning_rate, 0.001);
        assert!(preset(ModelKind::Lstm, Scheme::S).is_err());
        assert!(
            ExperimentConfig::preset(ModelKind::Gcn, Scheme::FAA)
                .unwrap()
                .validate()
                .is_ok()
        );
    }

    #[test]
    fn config_validation() {
        let mut c = ExperimentConfig::preset(ModelKind::Gcn, Scheme::F).unwrap();
        c.folds = 1;
        assert!(c.validate().is_err());
        c.folds = 10;
        c.representation = Representation::Matrix;
        assert!(c.validate().is_err());
        c.representation = Representation::Graph;
        c.threshold = 1.5;
        assert!(c.validate().is_err());
    }
}

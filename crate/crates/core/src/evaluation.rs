//! Evaluation protocols: 1-NN accuracy of embeddings against Euclidean and
//! DTW baselines on raw series, and a small fully connected classifier run
//! on raw series or on embeddings.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Result, WartemError};
use crate::metrics::{one_nn_accuracy, DistanceKind};
use crate::nn::{adam_step, softmax_cross_entropy, AdamConfig, AdamState, Layer, Network, Tensor};
use crate::rng::{mix, rng_from_seed};
use crate::series::{holdout_indices, LabeledDataset};
use crate::training::{EarlyStopping, StopDecision};
use crate::twin::TwinAe;

/// How a reported accuracy was selected from repeated classifier trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    /// Single deterministic run or one value per trained model.
    Direct,
    /// Highest test accuracy over trials. Optimistic: it peeks at the test set.
    BestOfTrials,
    MeanOfTrials,
}

impl Selection {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Direct => "direct",
            Self::BestOfTrials => "best-of-trials",
            Self::MeanOfTrials => "mean-of-trials",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Self::Direct),
            "best-of-trials" => Ok(Self::BestOfTrials),
            "mean-of-trials" => Ok(Self::MeanOfTrials),
            _ => Err(WartemError::Argument(format!("unknown selection {s:?}"))),
        }
    }
}

/// One row of an evaluation report. Accuracies are percentages.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalEntry {
    pub dataset: String,
    pub method: String,
    pub selection: Selection,
    pub mean: f64,
    /// Population standard deviation across seeds; `None` for single runs.
    pub std: Option<f64>,
    /// Per-seed (or per-model) accuracies behind the mean.
    pub accuracies: Vec<f64>,
    pub config_hash: String,
    pub best: bool,
}

impl EvalEntry {
    fn single(dataset: &str, method: &str, selection: Selection, accuracy: f64, config_hash: &str) -> Self {
        Self {
            dataset: dataset.to_string(),
            method: method.to_string(),
            selection,
            mean: accuracy,
            std: None,
            accuracies: vec![accuracy],
            config_hash: config_hash.to_string(),
            best: false,
        }
    }

    fn multi(dataset: &str, method: &str, selection: Selection, accuracies: Vec<f64>, config_hash: &str) -> Self {
        let (mean, std) = mean_std(&accuracies);
        Self {
            dataset: dataset.to_string(),
            method: method.to_string(),
            selection,
            mean,
            std: Some(std),
            accuracies,
            config_hash: config_hash.to_string(),
            best: false,
        }
    }

    pub fn seeds(&self) -> usize {
        self.accuracies.len()
    }
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Short stable fingerprint of a resolved configuration.
pub fn config_hash(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn check_same_length(train: &LabeledDataset, test: &LabeledDataset) -> Result<()> {
    if train.m() != test.m() {
        return Err(WartemError::Shape(format!(
            "train series have length {} but test series have length {}",
            train.m(),
            test.m()
        )));
    }
    Ok(())
}

/// 1-NN accuracy (percent) of one model's embeddings under squared Euclidean distance.
pub fn wartem_nn_accuracy(model: &TwinAe, train: &LabeledDataset, test: &LabeledDataset) -> Result<f64> {
    check_same_length(train, test)?;
    let train_emb = model.embed_all(train.series())?;
    let test_emb = model.embed_all(test.series())?;
    let res = one_nn_accuracy(
        &train_emb,
        train.labels(),
        &test_emb,
        test.labels(),
        DistanceKind::SquaredEuclidean,
    )?;
    Ok(100.0 * res.accuracy)
}

/// Mean and spread of the embedding 1-NN accuracy across trained models.
pub fn eval_wartem_nn(
    models: &[TwinAe],
    train: &LabeledDataset,
    test: &LabeledDataset,
    dataset: &str,
    config_hash: &str,
) -> Result<EvalEntry> {
    if models.is_empty() {
        return Err(WartemError::Argument("wartem-nn needs at least one model".into()));
    }
    let accuracies = models
        .iter()
        .map(|m| wartem_nn_accuracy(m, train, test))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalEntry::multi(dataset, "wartem-nn", Selection::Direct, accuracies, config_hash))
}

/// Deterministic 1-NN baseline on the raw series.
pub fn eval_baseline_nn(
    train: &LabeledDataset,
    test: &LabeledDataset,
    kind: DistanceKind,
    dataset: &str,
    config_hash: &str,
) -> Result<EvalEntry> {
    check_same_length(train, test)?;
    let res = one_nn_accuracy(&train.vectors(), train.labels(), &test.vectors(), test.labels(), kind)?;
    let method = match kind {
        DistanceKind::Dtw { .. } => format!("{}-nn", kind.name()),
        _ => "eucl-nn".to_string(),
    };
    Ok(EvalEntry::single(dataset, &method, Selection::Direct, 100.0 * res.accuracy, config_hash))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierConfig {
    pub trials: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub holdout_fraction: f64,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            trials: 10,
            max_epochs: 300,
            patience: 20,
            holdout_fraction: 0.1,
            batch_size: 32,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

/// Layer widths for an input of dimension `input_dim`:
/// `max(10, floor(L / 10))`, 50, then one output per class.
pub fn classifier_widths(input_dim: usize, class_count: usize) -> [usize; 3] {
    [(input_dim / 10).max(10), 50, class_count]
}

#[derive(Debug, Clone, PartialEq)]
pub struct StaticClassifier {
    pub network: Network,
    pub class_count: usize,
}

impl StaticClassifier {
    pub fn new(input_dim: usize, class_count: usize, seed: u64) -> Result<Self> {
        if class_count < 1 || input_dim < 1 {
            return Err(WartemError::Argument("classifier needs inputs and classes".into()));
        }
        let [h1, h2, out] = classifier_widths(input_dim, class_count);
        let mut network = Network::new(vec![
            Layer::dense(input_dim, h1)?,
            Layer::Relu,
            Layer::dense(h1, h2)?,
            Layer::Relu,
            Layer::dense(h2, out)?,
        ]);
        network.initialize(&mut rng_from_seed(seed));
        Ok(Self { network, class_count })
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        let logits = self.network.predict(&Tensor::from_series(x))?;
        let d = logits.data();
        let mut best = 0;
        for (i, &v) in d.iter().enumerate() {
            if v > d[best] {
                best = i;
            }
        }
        Ok(best)
    }

    fn mean_loss(&self, features: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
        let mut total = 0.0;
        for (x, &y) in features.iter().zip(labels) {
            let logits = self.network.predict(&Tensor::from_series(x))?;
            total += softmax_cross_entropy(logits.data(), y)?.0;
        }
        Ok(total / features.len() as f64)
    }
}

fn check_labels(labels: &[usize], class_count: usize) -> Result<()> {
    if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
        return Err(WartemError::Argument(format!(
            "label {bad} outside [0, {class_count})"
        )));
    }
    Ok(())
}

/// Trains the classifier by mini-batch Adam on softmax cross-entropy,
/// early-stopping on a held-out slice of the training features.
pub fn train_static_classifier(
    features: &[Vec<f64>],
    labels: &[usize],
    class_count: usize,
    config: &ClassifierConfig,
) -> Result<StaticClassifier> {
    if features.len() != labels.len() || features.len() < 2 {
        return Err(WartemError::Argument(
            "classifier training needs at least 2 labeled feature vectors".into(),
        ));
    }
    check_labels(labels, class_count)?;
    let dim = features[0].len();
    let mut clf = StaticClassifier::new(dim, class_count, mix(config.seed, 1))?;
    let (fit_idx, held_idx) = holdout_indices(features.len(), config.holdout_fraction, mix(config.seed, 2))?;
    let held_x: Vec<Vec<f64>> = held_idx.iter().map(|&i| features[i].clone()).collect();
    let held_y: Vec<usize> = held_idx.iter().map(|&i| labels[i]).collect();

    let mut adam = AdamState::new(config.adam, clf.network.params().iter().map(|p| p.len()));
    let mut stopper = EarlyStopping::new(config.patience);
    let mut best = clf.clone();
    let mut order = fit_idx;
    let mut rng = rng_from_seed(mix(config.seed, 3));

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size.max(1)) {
            let mut grads = clf.network.zero_gradients();
            for &i in batch {
                let (logits, mut tape) = clf.network.forward(&Tensor::from_series(&features[i]))?;
                let (_, g) = softmax_cross_entropy(logits.data(), labels[i])?;
                clf.network
                    .backward_into(&mut tape, &Tensor::new(1, g.len(), g)?, &mut grads)?;
            }
            grads.scale(1.0 / batch.len() as f64);
            adam_step(&mut clf.network.params_mut(), &grads.0, &mut adam)?;
        }
        let held_loss = clf.mean_loss(&held_x, &held_y)?;
        if !held_loss.is_finite() {
            return Err(WartemError::Divergence {
                epoch,
                batch: 0,
                loss: held_loss,
            });
        }
        match stopper.observe(epoch, held_loss) {
            StopDecision::Improved => best = clf.clone(),
            StopDecision::Continue => {}
            StopDecision::Stop => break,
        }
    }
    Ok(best)
}

/// Accuracy in `[0, 1]`.
pub fn eval_static(classifier: &StaticClassifier, features: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    check_labels(labels, classifier.class_count)?;
    if features.is_empty() {
        return Ok(0.0);
    }
    let correct = features
        .iter()
        .zip(labels)
        .map(|(x, &y)| classifier.predict(x).map(|p| p == y))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|&c| c)
        .count();
    Ok(correct as f64 / features.len() as f64)
}

/// Test accuracies (percent) of `trials` independently seeded classifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSummary {
    pub per_trial: Vec<f64>,
    pub best: f64,
    pub mean: f64,
}

pub fn static_trials(
    train_x: &[Vec<f64>],
    train_y: &[usize],
    test_x: &[Vec<f64>],
    test_y: &[usize],
    class_count: usize,
    config: &ClassifierConfig,
) -> Result<TrialSummary> {
    if config.trials == 0 {
        return Err(WartemError::Config("classifier trials must be at least 1".into()));
    }
    let per_trial = (0..config.trials as u64)
        .into_par_iter()
        .map(|t| {
            let cfg = ClassifierConfig {
                seed: mix(config.seed, t),
                ..config.clone()
            };
            let clf = train_static_classifier(train_x, train_y, class_count, &cfg)?;
            eval_static(&clf, test_x, test_y).map(|a| 100.0 * a)
        })
        .collect::<Result<Vec<_>>>()?;
    let best = per_trial.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = per_trial.iter().sum::<f64>() / per_trial.len() as f64;
    Ok(TrialSummary { per_trial, best, mean })
}

/// Classifier on raw series: best-of-trials row plus a mean-of-trials row.
pub fn eval_dl(
    train: &LabeledDataset,
    test: &LabeledDataset,
    config: &ClassifierConfig,
    dataset: &str,
    config_hash: &str,
) -> Result<Vec<EvalEntry>> {
    check_same_length(train, test)?;
    let classes = train.class_count().max(test.class_count());
    let s = static_trials(&train.vectors(), train.labels(), &test.vectors(), test.labels(), classes, config)?;
    Ok(vec![
        EvalEntry::single(dataset, "dl", Selection::BestOfTrials, s.best, config_hash),
        EvalEntry {
            std: Some(mean_std(&s.per_trial).1),
            accuracies: s.per_trial.clone(),
            ..EvalEntry::single(dataset, "dl", Selection::MeanOfTrials, s.mean, config_hash)
        },
    ])
}

/// Classifier on each model's embeddings: per model the best-of-trials
/// accuracy, averaged over models; plus the average of per-model trial means.
pub fn eval_wartem_dl(
    models: &[TwinAe],
    train: &LabeledDataset,
    test: &LabeledDataset,
    config: &ClassifierConfig,
    dataset: &str,
    config_hash: &str,
) -> Result<Vec<EvalEntry>> {
    if models.is_empty() {
        return Err(WartemError::Argument("wartem-dl needs at least one model".into()));
    }
    check_same_length(train, test)?;
    let classes = train.class_count().max(test.class_count());
    let mut bests = Vec::with_capacity(models.len());
    let mut means = Vec::with_capacity(models.len());
    for model in models {
        let train_x = model.embed_all(train.series())?;
        let test_x = model.embed_all(test.series())?;
        let s = static_trials(&train_x, train.labels(), &test_x, test.labels(), classes, config)?;
        bests.push(s.best);
        means.push(s.mean);
    }
    Ok(vec![
        EvalEntry::multi(dataset, "wartem-dl", Selection::BestOfTrials, bests, config_hash),
        EvalEntry::multi(dataset, "wartem-dl", Selection::MeanOfTrials, means, config_hash),
    ])
}

/// Flags the highest mean per dataset; every tied entry is flagged.
pub fn mark_best(entries: &mut [EvalEntry]) {
    let datasets: Vec<String> = entries.iter().map(|e| e.dataset.clone()).collect();
    for name in &datasets {
        let top = entries
            .iter()
            .filter(|e| &e.dataset == name)
            .map(|e| e.mean)
            .fold(f64::NEG_INFINITY, f64::max);
        for e in entries.iter_mut().filter(|e| &e.dataset == name) {
            e.best = e.mean == top;
        }
    }
}

pub const REPORT_HEADER: &str = "dataset,method,selection,mean,std,seeds,best,accuracies,config_hash";

fn csv_field(s: &str) -> Result<&str> {
    if s.contains([',', '\n', '"']) {
        return Err(WartemError::Argument(format!("report field {s:?} contains a separator")));
    }
    Ok(s)
}

/// Comma-separated report: a header plus one row per entry. Per-seed
/// accuracies are `;`-joined.
pub fn report_csv(entries: &[EvalEntry]) -> Result<String> {
    if entries.is_empty() {
        return Err(WartemError::Argument("report needs at least one entry".into()));
    }
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for e in entries {
        let accs: Vec<String> = e.accuracies.iter().map(|a| a.to_string()).collect();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            csv_field(&e.dataset)?,
            csv_field(&e.method)?,
            e.selection.as_str(),
            e.mean,
            e.std.map(|s| s.to_string()).unwrap_or_default(),
            e.seeds(),
            u8::from(e.best),
            accs.join(";"),
            csv_field(&e.config_hash)?,
        );
    }
    Ok(out)
}

pub fn parse_report_csv(text: &str) -> Result<Vec<EvalEntry>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim_end() == REPORT_HEADER => {}
        _ => return Err(WartemError::Format { line: 1, message: "missing report header".into() }),
    }
    let num = |s: &str, line: usize| -> Result<f64> {
        s.parse().map_err(|_| WartemError::Format {
            line,
            message: format!("{s:?} is not a number"),
        })
    };
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let line = i + 2;
            let f: Vec<&str> = l.trim_end().split(',').collect();
            if f.len() != 9 {
                return Err(WartemError::Format {
                    line,
                    message: format!("expected 9 fields, found {}", f.len()),
                });
            }
            let accuracies = if f[7].is_empty() {
                Vec::new()
            } else {
                f[7].split(';').map(|a| num(a, line)).collect::<Result<Vec<_>>>()?
            };
            Ok(EvalEntry {
                dataset: f[0].to_string(),
                method: f[1].to_string(),
                selection: Selection::parse(f[2])?,
                mean: num(f[3], line)?,
                std: if f[4].is_empty() { None } else { Some(num(f[4], line)?) },
                accuracies,
                best: f[6] == "1",
                config_hash: f[8].to_string(),
            })
        })
        .collect()
}

/// Aligned plain-text table; `*` marks the best method per dataset.
pub fn report_text(entries: &[EvalEntry]) -> String {
    let rows: Vec<[String; 5]> = entries
        .iter()
        .map(|e| {
            let acc = match e.std {
                Some(s) => format!("{:.2} ± {:.2}", e.mean, s),
                None => format!("{:.2}", e.mean),
            };
            [
                e.dataset.clone(),
                format!("{}{}", e.method, if e.best { " *" } else { "" }),
                e.selection.as_str().to_string(),
                acc,
                e.seeds().to_string(),
            ]
        })
        .collect();
    let header = ["dataset", "method", "selection", "accuracy", "seeds"].map(String::from);
    let mut widths = header.clone().map(|h| h.chars().count());
    for r in &rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    for r in std::iter::once(&header).chain(&rows) {
        let cells: Vec<String> = r
            .iter()
            .zip(widths)
            .map(|(c, w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    if entries.iter().any(|e| e.selection == Selection::BestOfTrials) {
        out.push_str("note: best-of-trials rows select the highest test accuracy and are optimistic\n");
    }
    out
}

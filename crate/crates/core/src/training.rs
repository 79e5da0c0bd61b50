//! Unsupervised training of the twin auto-encoder with held-out early
//! stopping. Training only ever sees unlabeled series.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{Result, WartemError};
use crate::nn::{adam_step, AdamConfig, AdamState};
use crate::rng::{mix, mix3, rng_from_seed};
use crate::series::{holdout_indices, TimeSeries};
use crate::twin::{build_twin, twin_backward, AeConfig, TwinAe, TwinLosses};
use crate::warping::{make_training_pairs, TrainingPair, WarpFamily};

// Seed streams derived from the run seed.
const STREAM_HOLDOUT: u64 = 0x686f_6c64;
const STREAM_INIT: u64 = 0x696e_6974;
const STREAM_PAIRS: u64 = 0x7061_6972;
const STREAM_HELDOUT_PAIRS: u64 = 0x6865_6c64;
const STREAM_SHUFFLE: u64 = 0x7368_7566;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub family: WarpFamily,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub holdout_fraction: f64,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Draw fresh warped variants every epoch; when false the epoch-1 pairs
    /// are reused (reshuffled) throughout.
    pub regenerate_pairs_each_epoch: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            family: WarpFamily::Mixed,
            batch_size: 32,
            max_epochs: 500,
            patience: 20,
            holdout_fraction: 0.1,
            adam: AdamConfig::default(),
            seed: 0,
            regenerate_pairs_each_epoch: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(WartemError::Config("batch_size must be at least 1".into()));
        }
        if self.patience == 0 {
            return Err(WartemError::Config("patience must be at least 1".into()));
        }
        if self.max_epochs == 0 {
            return Err(WartemError::Config("max_epochs must be at least 1".into()));
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return Err(WartemError::Config(format!(
                "holdout_fraction {} must lie in (0, 1)",
                self.holdout_fraction
            )));
        }
        if !(self.adam.learning_rate > 0.0) {
            return Err(WartemError::Config("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_total: f64,
    pub holdout_total: f64,
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Last epoch run (1-based).
    pub stopped_epoch: usize,
    /// Epoch with the lowest held-out loss (1-based); its parameters are returned.
    pub best_epoch: usize,
    pub pairs_per_epoch: usize,
    pub heldout_pairs: usize,
}

impl TrainHistory {
    pub fn best_holdout_loss(&self) -> f64 {
        self.epochs[self.best_epoch - 1].holdout_total
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_total,holdout_total,l1,l2,l3\n");
        for e in &self.epochs {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                e.epoch, e.train_total, e.holdout_total, e.l1, e.l2, e.l3
            );
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Outcome of feeding one epoch's held-out loss to [`EarlyStopping`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

/// Stops once the monitored loss has failed to strictly improve for
/// `patience` consecutive epochs.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            stale: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, loss: f64) -> StopDecision {
        if loss < self.best {
            self.best = loss;
            self.best_epoch = epoch;
            self.stale = 0;
            StopDecision::Improved
        } else {
            self.stale += 1;
            if self.stale >= self.patience {
                StopDecision::Stop
            } else {
                StopDecision::Continue
            }
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}

fn sum_losses(losses: &[TwinLosses]) -> TwinLosses {
    losses.iter().fold(
        TwinLosses {
            l1: 0.0,
            l2: 0.0,
            l3: 0.0,
            total: 0.0,
        },
        |acc, l| TwinLosses {
            l1: acc.l1 + l.l1,
            l2: acc.l2 + l.l2,
            l3: acc.l3 + l.l3,
            total: acc.total + l.total,
        },
    )
}

/// Mean total loss over pairs, without gradients.
pub fn mean_total_loss(twin: &TwinAe, pairs: &[TrainingPair]) -> Result<f64> {
    let losses = pairs
        .par_iter()
        .map(|p| twin.forward(p.left_input.values(), p.right_input.values()).map(|(l, _)| l))
        .collect::<Result<Vec<_>>>()?;
    Ok(sum_losses(&losses).total / pairs.len() as f64)
}

/// One Adam step on the mean gradient of a batch. Per-pair gradients are
/// computed in parallel and summed in batch order.
fn train_batch(twin: &mut TwinAe, batch: &[TrainingPair], adam: &mut AdamState) -> Result<TwinLosses> {
    let results = batch
        .par_iter()
        .map(|p| {
            let (losses, mut tape) = twin.forward(p.left_input.values(), p.right_input.values())?;
            let grads = twin_backward(twin, &mut tape)?;
            Ok((losses, grads))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut iter = results.into_iter();
    let (first_loss, mut grads) = iter.next().expect("non-empty batch");
    let mut losses = vec![first_loss];
    for (l, g) in iter {
        grads.add(&g);
        losses.push(l);
    }
    let sum = sum_losses(&losses);
    if sum.total.is_finite() {
        grads.scale(1.0 / batch.len() as f64);
        let grad_tensors: Vec<Vec<f64>> = grads.tensors().cloned().collect();
        adam_step(&mut twin.param_tensors_mut(), &grad_tensors, adam)?;
    }
    Ok(sum)
}

/// Trains a twin auto-encoder on unlabeled series and returns the
/// parameters from the epoch with the lowest held-out loss.
pub fn train(series: &[TimeSeries], ae: &AeConfig, config: &TrainConfig) -> Result<(TwinAe, TrainHistory)> {
    config.validate()?;
    if series.len() < 3 {
        return Err(WartemError::DatasetTooSmall(format!(
            "{} series; training needs at least 3",
            series.len()
        )));
    }
    if let Some(bad) = series.iter().find(|s| s.len() != ae.input_length) {
        return Err(WartemError::Shape(format!(
            "series length {} does not match model input length {}",
            bad.len(),
            ae.input_length
        )));
    }
    let seed = config.seed;
    let (train_idx, held_idx) = holdout_indices(series.len(), config.holdout_fraction, mix(seed, STREAM_HOLDOUT))?;
    let train_series: Vec<TimeSeries> = train_idx.iter().map(|&i| series[i].clone()).collect();
    let held_series: Vec<TimeSeries> = held_idx.iter().map(|&i| series[i].clone()).collect();
    let heldout_pairs = make_training_pairs(&held_series, config.family, mix(seed, STREAM_HELDOUT_PAIRS))?;

    let mut twin = build_twin(ae, mix(seed, STREAM_INIT))?;
    let mut adam = AdamState::new(config.adam, twin.param_sizes());
    let mut stopper = EarlyStopping::new(config.patience);
    let mut best = twin.clone();
    let mut records = Vec::new();
    let mut frozen: Option<Vec<TrainingPair>> = None;
    let mut pairs_per_epoch = 0;

    for epoch in 1..=config.max_epochs {
        let mut pairs = match (&frozen, config.regenerate_pairs_each_epoch) {
            (Some(p), false) => {
                let mut p = p.clone();
                p.shuffle(&mut rng_from_seed(mix3(seed, STREAM_SHUFFLE, epoch as u64)));
                p
            }
            _ => make_training_pairs(&train_series, config.family, mix3(seed, STREAM_PAIRS, epoch as u64))?,
        };
        if !config.regenerate_pairs_each_epoch && frozen.is_none() {
            frozen = Some(pairs.clone());
        }
        pairs_per_epoch = pairs.len();

        let mut epoch_sum = sum_losses(&[]);
        for (b, batch) in pairs.chunks_mut(config.batch_size).enumerate() {
            let sum = train_batch(&mut twin, batch, &mut adam)?;
            if !sum.total.is_finite() {
                return Err(WartemError::Divergence {
                    epoch,
                    batch: b + 1,
                    loss: sum.total,
                });
            }
            epoch_sum = sum_losses(&[epoch_sum, sum]);
        }
        let n = pairs.len() as f64;
        let holdout_total = mean_total_loss(&twin, &heldout_pairs)?;
        if !holdout_total.is_finite() {
            return Err(WartemError::Divergence {
                epoch,
                batch: 0,
                loss: holdout_total,
            });
        }
        records.push(EpochRecord {
            epoch,
            train_total: epoch_sum.total / n,
            holdout_total,
            l1: epoch_sum.l1 / n,
            l2: epoch_sum.l2 / n,
            l3: epoch_sum.l3 / n,
        });

        match stopper.observe(epoch, holdout_total) {
            StopDecision::Improved => best = twin.clone(),
            StopDecision::Continue => {}
            StopDecision::Stop => break,
        }
    }

    let history = TrainHistory {
        stopped_epoch: records.len(),
        best_epoch: stopper.best_epoch(),
        epochs: records,
        pairs_per_epoch,
        heldout_pairs: heldout_pairs.len(),
    };
    Ok((best, history))
}

/// Independent runs that differ only in seed; results follow `seeds` order.
pub fn multi_seed_train(
    series: &[TimeSeries],
    ae: &AeConfig,
    config: &TrainConfig,
    seeds: &[u64],
) -> Result<Vec<(TwinAe, TrainHistory)>> {
    if seeds.is_empty() {
        return Err(WartemError::Argument("at least one seed is required".into()));
    }
    seeds
        .par_iter()
        .map(|&seed| {
            let cfg = TrainConfig {
                seed,
                ..config.clone()
            };
            train(series, ae, &cfg).map_err(|e| WartemError::Seeded {
                seed,
                source: Box::new(e),
            })
        })
        .collect()
}

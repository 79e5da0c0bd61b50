//! Univariate time series, labeled datasets, and the UCR tab-separated format.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{Result, WartemError};
use crate::rng::rng_from_seed;

/// Minimum series length; every warp acts on a 4-point window.
pub const MIN_SERIES_LENGTH: usize = 4;

/// A fixed-length sequence of finite reals.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries(Vec<f64>);

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < MIN_SERIES_LENGTH {
            return Err(WartemError::SeriesTooShort(values.len()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(WartemError::Argument(format!(
                "series value at index {i} is not finite"
            )));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    /// Crate-internal constructor for values already known to be valid
    /// (outputs of length-preserving operators on a valid series).
    pub(crate) fn from_valid(values: Vec<f64>) -> Self {
        debug_assert!(values.len() >= MIN_SERIES_LENGTH);
        Self(values)
    }
}

impl AsRef<[f64]> for TimeSeries {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// `n` series of common length `m` with contiguous integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    series: Vec<TimeSeries>,
    labels: Vec<usize>,
    /// Original label text for each remapped label, in first-occurrence order.
    label_names: Vec<String>,
}

impl LabeledDataset {
    pub fn new(series: Vec<TimeSeries>, labels: Vec<usize>, label_names: Vec<String>) -> Result<Self> {
        if series.len() != labels.len() {
            return Err(WartemError::Argument(format!(
                "{} series but {} labels",
                series.len(),
                labels.len()
            )));
        }
        if let Some(first) = series.first() {
            let m = first.len();
            if let Some(i) = series.iter().position(|s| s.len() != m) {
                return Err(WartemError::Shape(format!(
                    "series {i} has length {} but series 0 has length {m}",
                    series[i].len()
                )));
            }
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= label_names.len()) {
            return Err(WartemError::Argument(format!(
                "label {bad} outside [0, {})",
                label_names.len()
            )));
        }
        Ok(Self {
            series,
            labels,
            label_names,
        })
    }

    /// Builds a dataset whose label names are the decimal label values.
    pub fn from_parts(series: Vec<TimeSeries>, labels: Vec<usize>) -> Result<Self> {
        let class_count = labels.iter().map(|&l| l + 1).max().unwrap_or(0);
        let names = (0..class_count).map(|l| l.to_string()).collect();
        Self::new(series, labels, names)
    }

    pub fn series(&self) -> &[TimeSeries] {
        &self.series
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    pub fn n(&self) -> usize {
        self.series.len()
    }

    /// Common series length; zero for an empty dataset.
    pub fn m(&self) -> usize {
        self.series.first().map_or(0, TimeSeries::len)
    }

    pub fn class_count(&self) -> usize {
        self.label_names.len()
    }

    /// Raw value vectors, e.g. for the distance-based baselines.
    pub fn vectors(&self) -> Vec<Vec<f64>> {
        self.series.iter().map(|s| s.values().to_vec()).collect()
    }

    /// Keeps the rows at `indices`, in the given order, sharing the label map.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            series: indices.iter().map(|&i| self.series[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            label_names: self.label_names.clone(),
        }
    }

    /// Replaces every series with its z-normalized version.
    pub fn znormalized(&self) -> Self {
        Self {
            series: self.series.iter().map(znormalize).collect(),
            labels: self.labels.clone(),
            label_names: self.label_names.clone(),
        }
    }

    /// Applies `f` to every series, keeping labels.
    pub fn map_series<F>(&self, f: F) -> Result<Self>
    where
        F: FnMut(&TimeSeries) -> Result<TimeSeries>,
    {
        let series = self.series.iter().map(f).collect::<Result<Vec<_>>>()?;
        Self::new(series, self.labels.clone(), self.label_names.clone())
    }
}

fn parse_label(token: &str, line: usize) -> Result<i64> {
    let value: f64 = token.trim().parse().map_err(|_| WartemError::Parse {
        line,
        field: 1,
        token: token.to_string(),
    })?;
    if !value.is_finite() || value.fract() != 0.0 || value.abs() > 9.0e15 {
        return Err(WartemError::Format {
            line,
            message: format!("class label {token:?} is not an integer"),
        });
    }
    Ok(value as i64)
}

/// Parses UCR-format text: one series per line, label first, tab-separated.
pub fn parse_ucr_tsv(text: &str) -> Result<LabeledDataset> {
    let mut series = Vec::new();
    let mut labels = Vec::new();
    let mut label_index: HashMap<i64, usize> = HashMap::new();
    let mut label_names = Vec::new();
    let mut arity = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        match arity {
            None => arity = Some(fields.len()),
            Some(a) if a != fields.len() => {
                return Err(WartemError::Format {
                    line: line_no,
                    message: format!("expected {a} fields, found {}", fields.len()),
                })
            }
            Some(_) => {}
        }

        let label = parse_label(fields[0], line_no)?;
        let next = label_index.len();
        let mapped = *label_index.entry(label).or_insert_with(|| {
            label_names.push(label.to_string());
            next
        });

        let values = fields[1..]
            .iter()
            .enumerate()
            .map(|(j, tok)| {
                tok.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| WartemError::Parse {
                        line: line_no,
                        field: j + 2,
                        token: tok.to_string(),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        if values.len() < MIN_SERIES_LENGTH {
            return Err(WartemError::DatasetTooSmall(format!(
                "series length {} is below the minimum of {MIN_SERIES_LENGTH}",
                values.len()
            )));
        }
        series.push(TimeSeries::from_valid(values));
        labels.push(mapped);
    }

    if series.len() < 2 {
        return Err(WartemError::DatasetTooSmall(format!(
            "{} rows; at least 2 are required",
            series.len()
        )));
    }
    LabeledDataset::new(series, labels, label_names)
}

pub fn load_ucr_tsv(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    parse_ucr_tsv(&fs::read_to_string(path)?)
}

/// Renders a dataset in UCR format. Values use the shortest decimal form
/// that parses back to the identical `f64`.
pub fn format_ucr_tsv(dataset: &LabeledDataset) -> String {
    let mut out = String::new();
    for (s, &label) in dataset.series.iter().zip(&dataset.labels) {
        out.push_str(&dataset.label_names[label]);
        for v in s.values() {
            let _ = write!(out, "\t{v}");
        }
        out.push('\n');
    }
    out
}

pub fn write_ucr_tsv(dataset: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_ucr_tsv(dataset))?;
    Ok(())
}

/// Zero mean, unit population standard deviation. Near-constant input maps
/// to all zeros.
pub fn znormalize(t: &TimeSeries) -> TimeSeries {
    TimeSeries::from_valid(znormalize_values(t.values()))
}

pub fn znormalize_values(v: &[f64]) -> Vec<f64> {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if std < 1e-12 {
        return vec![0.0; v.len()];
    }
    v.iter().map(|x| (x - mean) / std).collect()
}

/// Splits `0..n` into (kept, held-out) index lists, each ascending.
/// The held-out part has `max(1, round(fraction * n))` elements.
pub fn holdout_indices(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(WartemError::Argument(format!(
            "holdout fraction {fraction} is outside (0, 1)"
        )));
    }
    if n < 2 {
        return Err(WartemError::DatasetTooSmall(format!(
            "{n} series; a holdout split needs at least 2"
        )));
    }
    let held = ((fraction * n as f64).round() as usize).max(1);
    if held >= n {
        return Err(WartemError::Argument(format!(
            "holdout fraction {fraction} leaves no training series out of {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from_seed(seed));
    let mut heldout = order[..held].to_vec();
    let mut kept = order[held..].to_vec();
    heldout.sort_unstable();
    kept.sort_unstable();
    Ok((kept, heldout))
}

/// Deterministic (train, held-out) partition of a dataset.
pub fn holdout_split(
    dataset: &LabeledDataset,
    fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let (kept, heldout) = holdout_indices(dataset.n(), fraction, seed)?;
    Ok((dataset.subset(&kept), dataset.subset(&heldout)))
}

//! Plain-text run configuration: `key = value` lines, `#` comments.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use wartem_core::nn::AdamConfig;
use wartem_core::twin::{default_code_length, Activation, ConvBlock};
use wartem_core::{AeConfig, ClassifierConfig, TrainConfig, WarpFamily};

/// Every recognised key with its default; `None` means the key is required
/// by the commands that use it.
const KEYS: &[(&str, Option<&str>)] = &[
    ("family", None),
    ("lambda", Some("1")),
    ("batch_size", Some("32")),
    ("max_epochs", Some("500")),
    ("patience", Some("20")),
    ("holdout_fraction", Some("0.1")),
    ("learning_rate", Some("0.001")),
    ("beta1", Some("0.9")),
    ("beta2", Some("0.999")),
    ("epsilon", Some("1e-8")),
    ("seeds", Some("0")),
    ("regenerate_pairs", Some("true")),
    ("code_length", Some("auto")),
    ("conv_blocks", Some("16:5,32:5")),
    ("pool_size", Some("2")),
    ("activation", Some("relu")),
    ("normalize", Some("false")),
    ("dtw_band", Some("none")),
    ("dl_trials", Some("10")),
    ("dl_max_epochs", Some("300")),
    ("dl_patience", Some("20")),
    ("dl_holdout_fraction", Some("0.1")),
    ("dl_batch_size", Some("32")),
    ("dl_seed", Some("0")),
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("config line {}: expected `key = value`", i + 1))?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.iter().any(|(k, _)| *k == key) {
                bail!("config line {}: unknown key `{key}`", i + 1);
            }
            if values.insert(key.to_string(), value.to_string()).is_some() {
                bail!("config line {}: duplicate key `{key}`", i + 1);
            }
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    fn raw(&self, key: &str) -> Result<&str> {
        if let Some(v) = self.values.get(key) {
            return Ok(v);
        }
        match KEYS.iter().find(|(k, _)| *k == key) {
            Some((_, Some(default))) => Ok(default),
            Some((_, None)) => bail!("missing required config key `{key}`"),
            None => unreachable!("unregistered key {key}"),
        }
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.raw(key)?;
        raw.parse()
            .map_err(|e| anyhow!("config key `{key}`: cannot parse {raw:?}: {e}"))
    }

    pub fn family(&self) -> Result<WarpFamily> {
        self.get("family")
    }

    pub fn normalize(&self) -> Result<bool> {
        self.get("normalize")
    }

    pub fn seeds(&self) -> Result<Vec<u64>> {
        let seeds = self
            .raw("seeds")?
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<u64>()
                    .map_err(|e| anyhow!("config key `seeds`: {s:?}: {e}"))
            })
            .collect::<Result<Vec<_>>>()?;
        if seeds.is_empty() {
            bail!("config key `seeds` is empty");
        }
        Ok(seeds)
    }

    pub fn dtw_band(&self) -> Result<Option<usize>> {
        match self.raw("dtw_band")? {
            "none" | "" => Ok(None),
            _ => Ok(Some(self.get("dtw_band")?)),
        }
    }

    pub fn ae_config(&self, m: usize) -> Result<AeConfig> {
        let code_length = match self.raw("code_length")? {
            "auto" => default_code_length(m),
            _ => self.get("code_length")?,
        };
        let conv_blocks = self
            .raw("conv_blocks")?
            .split(',')
            .map(|b| {
                let (f, k) = b
                    .trim()
                    .split_once(':')
                    .ok_or_else(|| anyhow!("conv block {b:?} must look like filters:kernel"))?;
                Ok(ConvBlock {
                    filters: f.trim().parse()?,
                    kernel: k.trim().parse()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let config = AeConfig {
            input_length: m,
            code_length,
            conv_blocks,
            pool_size: self.get("pool_size")?,
            activation: self.get::<Activation>("activation")?,
            lambda: self.get("lambda")?,
        };
        config.validate()?;
        Ok(config)
    }

    fn adam(&self) -> Result<AdamConfig> {
        Ok(AdamConfig {
            learning_rate: self.get("learning_rate")?,
            beta1: self.get("beta1")?,
            beta2: self.get("beta2")?,
            epsilon: self.get("epsilon")?,
        })
    }

    /// Training settings; the seed is filled in per run.
    pub fn train_config(&self) -> Result<TrainConfig> {
        let config = TrainConfig {
            family: self.family()?,
            batch_size: self.get("batch_size")?,
            max_epochs: self.get("max_epochs")?,
            patience: self.get("patience")?,
            holdout_fraction: self.get("holdout_fraction")?,
            adam: self.adam()?,
            seed: 0,
            regenerate_pairs_each_epoch: self.get("regenerate_pairs")?,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn classifier_config(&self) -> Result<ClassifierConfig> {
        Ok(ClassifierConfig {
            trials: self.get("dl_trials")?,
            max_epochs: self.get("dl_max_epochs")?,
            patience: self.get("dl_patience")?,
            holdout_fraction: self.get("dl_holdout_fraction")?,
            batch_size: self.get("dl_batch_size")?,
            adam: self.adam()?,
            seed: self.get("dl_seed")?,
        })
    }

    /// Every key with its effective value, one `key = value` per line.
    /// Required keys that are unset appear as `<unset>`.
    pub fn resolved_text(&self) -> String {
        KEYS.iter()
            .map(|(k, default)| {
                let v = self
                    .values
                    .get(*k)
                    .map(String::as_str)
                    .or(*default)
                    .unwrap_or("<unset>");
                format!("{k} = {v}\n")
            })
            .collect()
    }
}

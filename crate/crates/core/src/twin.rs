//! Twin convolutional auto-encoders coupled through their codes.
//!
//! Each side is an ordinary auto-encoder trained to reconstruct its own
//! input (losses `l1`, `l2`). The coupling loss `l3 = ||R1 - R2||^2` between
//! the two codes is back-propagated through the encoders only; decoders see
//! nothing but their reconstruction error.

use rayon::prelude::*;

use crate::error::{Result, WartemError};
use crate::nn::{mse_loss, Gradients, Layer, Network, Tape, Tensor};
use crate::rng::{mix, rng_from_seed};
use crate::series::{TimeSeries, MIN_SERIES_LENGTH};
use crate::warping::TrainingPair;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn layer(self) -> Layer {
        match self {
            Self::Relu => Layer::Relu,
            Self::Identity => Layer::Identity,
        }
    }

    pub(crate) fn code(self) -> u64 {
        match self {
            Self::Relu => 0,
            Self::Identity => 1,
        }
    }

    pub(crate) fn from_code(code: u64) -> Result<Self> {
        match code {
            0 => Ok(Self::Relu),
            1 => Ok(Self::Identity),
            _ => Err(WartemError::Checkpoint(format!("unknown activation code {code}"))),
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = WartemError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "relu" => Ok(Self::Relu),
            "identity" | "linear" | "none" => Ok(Self::Identity),
            _ => Err(WartemError::Config(format!("unknown activation {s:?}"))),
        }
    }
}

impl std::fmt::Display for Activation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Relu => "relu",
            Self::Identity => "identity",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvBlock {
    pub filters: usize,
    pub kernel: usize,
}

/// Architecture and loss weighting of the twin auto-encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct AeConfig {
    pub input_length: usize,
    pub code_length: usize,
    pub conv_blocks: Vec<ConvBlock>,
    pub pool_size: usize,
    pub activation: Activation,
    /// Weight of the coupling loss in `l1 + l2 + lambda * l3`.
    pub lambda: f64,
}

/// Default code length: 20% of the series length, at least 1.
pub fn default_code_length(m: usize) -> usize {
    ((0.2 * m as f64).round() as usize).max(1)
}

impl AeConfig {
    /// Two conv/pool blocks (16 and 32 filters, kernel 5), pool size 2,
    /// ReLU, lambda 1.
    pub fn for_length(m: usize) -> Self {
        Self {
            input_length: m,
            code_length: default_code_length(m),
            conv_blocks: vec![
                ConvBlock {
                    filters: 16,
                    kernel: 5,
                },
                ConvBlock {
                    filters: 32,
                    kernel: 5,
                },
            ],
            pool_size: 2,
            activation: Activation::Relu,
            lambda: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_length < MIN_SERIES_LENGTH {
            return Err(WartemError::Config(format!(
                "input length {} is below {MIN_SERIES_LENGTH}",
                self.input_length
            )));
        }
        if self.code_length == 0 {
            return Err(WartemError::Config("code length must be positive".into()));
        }
        if self.conv_blocks.is_empty() {
            return Err(WartemError::Config("at least one conv block is required".into()));
        }
        for b in &self.conv_blocks {
            if b.filters == 0 || b.kernel % 2 == 0 {
                return Err(WartemError::Config(format!(
                    "conv block {}:{} needs positive filters and an odd kernel",
                    b.filters, b.kernel
                )));
            }
        }
        if self.pool_size < 2 {
            return Err(WartemError::Config("pool size must be at least 2".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(WartemError::Config(format!("lambda {} must be finite and >= 0", self.lambda)));
        }
        Ok(())
    }

    /// Sequence length after each pooling stage, starting with `m`.
    pub fn stage_lengths(&self) -> Vec<usize> {
        let mut lengths = vec![self.input_length];
        for _ in &self.conv_blocks {
            let last = *lengths.last().unwrap();
            lengths.push(last.div_ceil(self.pool_size));
        }
        lengths
    }

    fn build_encoder(&self) -> Result<Network> {
        let mut layers = Vec::new();
        let mut channels = 1;
        for b in &self.conv_blocks {
            layers.push(Layer::conv1d(channels, b.filters, b.kernel)?);
            layers.push(self.activation.layer());
            layers.push(Layer::max_pool(self.pool_size)?);
            channels = b.filters;
        }
        let bottom = *self.stage_lengths().last().unwrap();
        layers.push(Layer::dense(channels * bottom, self.code_length)?);
        Ok(Network::new(layers))
    }

    fn build_decoder(&self) -> Result<Network> {
        let bottom = *self.stage_lengths().last().unwrap();
        let mut channels = self.conv_blocks.last().unwrap().filters;
        let mut layers = vec![
            Layer::dense(self.code_length, channels * bottom)?,
            self.activation.layer(),
            Layer::Reshape {
                channels,
                length: bottom,
            },
        ];
        let mut length = bottom;
        for b in self.conv_blocks.iter().rev() {
            layers.push(Layer::upsample(self.pool_size)?);
            length *= self.pool_size;
            layers.push(Layer::conv1d(channels, b.filters, b.kernel)?);
            layers.push(self.activation.layer());
            channels = b.filters;
        }
        if length > self.input_length {
            layers.push(Layer::Crop {
                length: self.input_length,
            });
        }
        layers.push(Layer::conv1d(channels, 1, self.conv_blocks[0].kernel)?);
        Ok(Network::new(layers))
    }
}

/// One side of the twin.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoEncoder {
    pub encoder: Network,
    pub decoder: Network,
}

impl AutoEncoder {
    pub fn build(config: &AeConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = rng_from_seed(seed);
        let mut encoder = config.build_encoder()?;
        let mut decoder = config.build_decoder()?;
        encoder.initialize(&mut rng);
        decoder.initialize(&mut rng);
        Ok(Self { encoder, decoder })
    }

    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.encoder.predict(&Tensor::from_series(x))?.into_data())
    }

    pub fn reconstruct(&self, x: &[f64]) -> Result<Vec<f64>> {
        let code = self.encoder.predict(&Tensor::from_series(x))?;
        Ok(self.decoder.predict(&code)?.into_data())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwinAe {
    pub left: AutoEncoder,
    pub right: AutoEncoder,
    pub config: AeConfig,
}

/// Builds both sides from independent sub-seeds of `seed`.
pub fn build_twin(config: &AeConfig, seed: u64) -> Result<TwinAe> {
    Ok(TwinAe {
        left: AutoEncoder::build(config, mix(seed, 1))?,
        right: AutoEncoder::build(config, mix(seed, 2))?,
        config: config.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwinLosses {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub total: f64,
}

/// Everything the twin backward pass needs from a forward pass.
#[derive(Debug)]
pub struct TwinTape {
    left_encoder: Tape,
    left_decoder: Tape,
    right_encoder: Tape,
    right_decoder: Tape,
    code_left: Tensor,
    code_right: Tensor,
    recon_grad_left: Tensor,
    recon_grad_right: Tensor,
    lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwinGradients {
    pub left_encoder: Gradients,
    pub left_decoder: Gradients,
    pub right_encoder: Gradients,
    pub right_decoder: Gradients,
}

impl TwinGradients {
    /// In the order of [`TwinAe::param_tensors_mut`].
    pub fn tensors(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.left_encoder
            .0
            .iter()
            .chain(&self.left_decoder.0)
            .chain(&self.right_encoder.0)
            .chain(&self.right_decoder.0)
    }

    pub fn add(&mut self, other: &Self) {
        self.left_encoder.add(&other.left_encoder);
        self.left_decoder.add(&other.left_decoder);
        self.right_encoder.add(&other.right_encoder);
        self.right_decoder.add(&other.right_decoder);
    }

    pub fn scale(&mut self, factor: f64) {
        self.left_encoder.scale(factor);
        self.left_decoder.scale(factor);
        self.right_encoder.scale(factor);
        self.right_decoder.scale(factor);
    }
}

impl TwinAe {
    pub fn side(&self, side: Side) -> &AutoEncoder {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    fn check_length(&self, len: usize) -> Result<()> {
        if len != self.config.input_length {
            return Err(WartemError::Shape(format!(
                "series length {len} does not match model input length {}",
                self.config.input_length
            )));
        }
        Ok(())
    }

    pub fn encode(&self, side: Side, t: &[f64]) -> Result<Vec<f64>> {
        self.check_length(t.len())?;
        self.side(side).encode(t)
    }

    /// The embedding: mean of the left and right codes.
    pub fn embed(&self, t: &[f64]) -> Result<Vec<f64>> {
        let left = self.encode(Side::Left, t)?;
        let right = self.encode(Side::Right, t)?;
        Ok(left.iter().zip(&right).map(|(a, b)| (a + b) / 2.0).collect())
    }

    /// Embeds many series in parallel, preserving order.
    pub fn embed_all(&self, series: &[TimeSeries]) -> Result<Vec<Vec<f64>>> {
        series.par_iter().map(|s| self.embed(s.values())).collect()
    }

    /// Parameter tensors: left encoder, left decoder, right encoder, right decoder.
    pub fn param_tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut all = self.left.encoder.params_mut();
        all.extend(self.left.decoder.params_mut());
        all.extend(self.right.encoder.params_mut());
        all.extend(self.right.decoder.params_mut());
        all
    }

    pub fn param_sizes(&self) -> Vec<usize> {
        [&self.left.encoder, &self.left.decoder, &self.right.encoder, &self.right.decoder]
            .iter()
            .flat_map(|n| n.params().into_iter().map(<[f64]>::len))
            .collect()
    }

    pub fn zero_gradients(&self) -> TwinGradients {
        TwinGradients {
            left_encoder: self.left.encoder.zero_gradients(),
            left_decoder: self.left.decoder.zero_gradients(),
            right_encoder: self.right.encoder.zero_gradients(),
            right_decoder: self.right.decoder.zero_gradients(),
        }
    }

    /// Losses for an input pair, with the tape for [`twin_backward`].
    pub fn forward(&self, left_input: &[f64], right_input: &[f64]) -> Result<(TwinLosses, TwinTape)> {
        self.check_length(left_input.len())?;
        self.check_length(right_input.len())?;
        let (code_left, left_encoder) = self.left.encoder.forward(&Tensor::from_series(left_input))?;
        let (code_right, right_encoder) = self.right.encoder.forward(&Tensor::from_series(right_input))?;
        let (recon_left, left_decoder) = self.left.decoder.forward(&code_left)?;
        let (recon_right, right_decoder) = self.right.decoder.forward(&code_right)?;

        let (l1, g1) = mse_loss(recon_left.data(), left_input)?;
        let (l2, g2) = mse_loss(recon_right.data(), right_input)?;
        let l3: f64 = code_left
            .data()
            .iter()
            .zip(code_right.data())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let lambda = self.config.lambda;
        let losses = TwinLosses {
            l1,
            l2,
            l3,
            total: l1 + l2 + lambda * l3,
        };
        let tape = TwinTape {
            left_encoder,
            left_decoder,
            right_encoder,
            right_decoder,
            recon_grad_left: Tensor::new(recon_left.rows(), recon_left.cols(), g1)?,
            recon_grad_right: Tensor::new(recon_right.rows(), recon_right.cols(), g2)?,
            code_left,
            code_right,
            lambda,
        };
        Ok((losses, tape))
    }
}

pub fn twin_forward(twin: &TwinAe, pair: &TrainingPair) -> Result<(TwinLosses, TwinTape)> {
    twin.forward(pair.left_input.values(), pair.right_input.values())
}

/// Gradients of the total loss, with the coupling term routed through the
/// encoders only.
pub fn twin_backward(twin: &TwinAe, tape: &mut TwinTape) -> Result<TwinGradients> {
    backward_with(twin, tape, true)
}

/// As [`twin_backward`] but with the reconstruction losses masked out, so
/// only `lambda * l3` contributes.
pub fn twin_backward_coupling_only(twin: &TwinAe, tape: &mut TwinTape) -> Result<TwinGradients> {
    backward_with(twin, tape, false)
}

fn backward_with(twin: &TwinAe, tape: &mut TwinTape, reconstruction: bool) -> Result<TwinGradients> {
    let mut grads = twin.zero_gradients();
    let (rows, cols) = tape.code_left.shape();

    let (mut code_grad_left, mut code_grad_right) = if reconstruction {
        let gl = twin
            .left
            .decoder
            .backward_into(&mut tape.left_decoder, &tape.recon_grad_left, &mut grads.left_decoder)?;
        let gr = twin
            .right
            .decoder
            .backward_into(&mut tape.right_decoder, &tape.recon_grad_right, &mut grads.right_decoder)?;
        (gl, gr)
    } else {
        tape.left_decoder = Tape::consumed();
        tape.right_decoder = Tape::consumed();
        (Tensor::zeros(rows, cols), Tensor::zeros(rows, cols))
    };

    // d(lambda * l3)/dR1 = 2 lambda (R1 - R2); the right code gets the negation.
    if tape.lambda != 0.0 {
        let scale = 2.0 * tape.lambda;
        let (gl, gr) = (code_grad_left.data_mut(), code_grad_right.data_mut());
        for (k, (a, b)) in tape.code_left.data().iter().zip(tape.code_right.data()).enumerate() {
            let d = scale * (a - b);
            gl[k] += d;
            gr[k] -= d;
        }
    }

    twin.left
        .encoder
        .backward_into(&mut tape.left_encoder, &code_grad_left, &mut grads.left_encoder)?;
    twin.right
        .encoder
        .backward_into(&mut tape.right_encoder, &code_grad_right, &mut grads.right_encoder)?;
    Ok(grads)
}

pub fn embed(twin: &TwinAe, t: &TimeSeries) -> Result<Vec<f64>> {
    twin.embed(t.values())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Dense;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    fn small_config(m: usize) -> AeConfig {
        AeConfig {
            input_length: m,
            code_length: 3,
            conv_blocks: vec![
                ConvBlock { filters: 2, kernel: 3 },
                ConvBlock { filters: 3, kernel: 3 },
            ],
            pool_size: 2,
            activation: Activation::Relu,
            lambda: 0.7,
        }
    }

    fn random_series(m: usize, seed: u64) -> Vec<f64> {
        let mut rng = rng_from_seed(seed);
        (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn default_code_length_is_a_fifth() {
        assert_eq!(default_code_length(64), 13);
        assert_eq!(default_code_length(4), 1);
        assert_eq!(default_code_length(100), 20);
        let twin = build_twin(&AeConfig::for_length(64), 1).unwrap();
        assert_eq!(twin.encode(Side::Left, &[0.0; 64]).unwrap().len(), 13);
    }

    #[test]
    fn odd_lengths_reconstruct_to_input_length() {
        for m in [4, 5, 7, 30, 61] {
            let twin = build_twin(&small_config(m), 3).unwrap();
            let x = random_series(m, m as u64);
            assert_eq!(twin.left.reconstruct(&x).unwrap().len(), m);
            assert_eq!(twin.embed(&x).unwrap().len(), 3);
        }
    }

    #[test]
    fn invalid_configs() {
        let mut c = small_config(16);
        c.code_length = 0;
        assert!(build_twin(&c, 0).is_err());
        let mut c = small_config(16);
        c.conv_blocks[0].kernel = 4;
        assert!(build_twin(&c, 0).is_err());
        let mut c = small_config(16);
        c.conv_blocks.clear();
        assert!(build_twin(&c, 0).is_err());
        let mut c = small_config(16);
        c.lambda = -1.0;
        assert!(build_twin(&c, 0).is_err());
    }

    #[test]
    fn build_is_deterministic_and_sides_differ() {
        let a = build_twin(&small_config(16), 9).unwrap();
        let b = build_twin(&small_config(16), 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.left, a.right);
        assert_ne!(a, build_twin(&small_config(16), 10).unwrap());
    }

    #[test]
    fn encode_shape_and_determinism() {
        let twin = build_twin(&small_config(12), 2).unwrap();
        let x = random_series(12, 1);
        let c = twin.encode(Side::Right, &x).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c, twin.encode(Side::Right, &x).unwrap());
        assert!(twin.encode(Side::Left, &[0.0; 12]).unwrap().iter().all(|v| v.is_finite()));
        assert!(twin.encode(Side::Left, &[0.0; 11]).is_err());
    }

    #[test]
    fn identical_sides_and_inputs_have_zero_coupling() {
        let mut twin = build_twin(&small_config(10), 4).unwrap();
        twin.right = twin.left.clone();
        let x = random_series(10, 5);
        let (losses, _) = twin.forward(&x, &x).unwrap();
        assert_eq!(losses.l3, 0.0);
        assert_eq!(twin.embed(&x).unwrap(), twin.encode(Side::Left, &x).unwrap());
    }

    #[test]
    fn identity_toy_net_reconstructs_perfectly() {
        let ae = AutoEncoder {
            encoder: Network::new(vec![Layer::Identity]),
            decoder: Network::new(vec![Layer::Identity]),
        };
        let mut config = small_config(5);
        config.code_length = 5;
        let twin = TwinAe {
            left: ae.clone(),
            right: ae,
            config,
        };
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [1.0, 2.0, 3.0, 4.0, 7.0];
        let (losses, _) = twin.forward(&a, &b).unwrap();
        assert_eq!((losses.l1, losses.l2), (0.0, 0.0));
        assert_eq!(losses.l3, 4.0);
        assert_eq!(losses.total, 0.7 * 4.0);
    }

    #[test]
    fn zero_lambda_total_is_reconstruction_sum() {
        let mut c = small_config(8);
        c.lambda = 0.0;
        let twin = build_twin(&c, 1).unwrap();
        let (l, _) = twin.forward(&random_series(8, 1), &random_series(8, 2)).unwrap();
        assert_eq!(l.total, l.l1 + l.l2);
    }

    #[test]
    fn swapping_pair_and_sides_swaps_losses() {
        let twin = build_twin(&small_config(9), 6).unwrap();
        let swapped = TwinAe {
            left: twin.right.clone(),
            right: twin.left.clone(),
            config: twin.config.clone(),
        };
        let (a, b) = (random_series(9, 7), random_series(9, 8));
        let (l, _) = twin.forward(&a, &b).unwrap();
        let (s, _) = swapped.forward(&b, &a).unwrap();
        assert_eq!((s.l1, s.l2, s.l3), (l.l2, l.l1, l.l3));
    }

    #[test]
    fn coupling_gradient_on_codes() {
        // Identity-weighted dense encoders: the encoder bias gradient equals
        // the code gradient, which must be +-2 lambda (R1 - R2).
        let mut dense = Dense::new(4, 4).unwrap();
        dense.weight = vec![1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0];
        let ae = AutoEncoder {
            encoder: Network::new(vec![Layer::Dense(dense)]),
            decoder: Network::new(vec![Layer::Identity]),
        };
        let mut config = small_config(4);
        config.code_length = 4;
        let twin = TwinAe {
            left: ae.clone(),
            right: ae,
            config,
        };
        let (_, mut tape) = twin.forward(&[1.0, 0.0, 0.0, 0.0], &[0.0, 0.0, 0.0, 2.0]).unwrap();
        let g = twin_backward_coupling_only(&twin, &mut tape).unwrap();
        assert_eq!(g.left_encoder.0[1], vec![1.4, 0.0, 0.0, -2.8]);
        assert_eq!(g.right_encoder.0[1], vec![-1.4, 0.0, 0.0, 2.8]);
    }

    #[test]
    fn tape_reuse_is_rejected() {
        let twin = build_twin(&small_config(8), 1).unwrap();
        let (_, mut tape) = twin.forward(&random_series(8, 1), &random_series(8, 2)).unwrap();
        twin_backward(&twin, &mut tape).unwrap();
        assert!(matches!(twin_backward(&twin, &mut tape), Err(WartemError::State(_))));
    }
}

use rand::Rng;

use super::Tensor;
use crate::error::{Result, WartemError};

/// 1-D convolution with zero "same" padding of `(kernel - 1) / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    /// `[out][in][k]`, row-major.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv1d {
    pub fn new(in_channels: usize, out_channels: usize, kernel: usize) -> Result<Self> {
        if kernel.is_multiple_of(2) {
            return Err(WartemError::Config(format!("conv kernel {kernel} must be odd")));
        }
        if in_channels == 0 || out_channels == 0 {
            return Err(WartemError::Config("conv channel counts must be positive".into()));
        }
        Ok(Self {
            in_channels,
            out_channels,
            kernel,
            weight: vec![0.0; out_channels * in_channels * kernel],
            bias: vec![0.0; out_channels],
        })
    }

    pub fn padding(&self) -> usize {
        (self.kernel - 1) / 2
    }

    fn w(&self, o: usize, c: usize, k: usize) -> f64 {
        self.weight[(o * self.in_channels + c) * self.kernel + k]
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (ch, len) = x.shape();
        if ch != self.in_channels {
            return Err(WartemError::Shape(format!(
                "conv expects {} input channels, got {ch}",
                self.in_channels
            )));
        }
        let pad = self.padding() as isize;
        let mut out = Tensor::zeros(self.out_channels, len);
        let data = out.data_mut();
        for o in 0..self.out_channels {
            let row = &mut data[o * len..(o + 1) * len];
            row.fill(self.bias[o]);
            for c in 0..ch {
                let xs = x.row(c);
                for k in 0..self.kernel {
                    let w = self.w(o, c, k);
                    let shift = k as isize - pad;
                    // out[t] += w * x[t + shift] for in-range source indices.
                    let t_lo = (-shift).max(0) as usize;
                    let t_hi = ((len as isize) - shift).min(len as isize).max(0) as usize;
                    for t in t_lo..t_hi {
                        row[t] += w * xs[(t as isize + shift) as usize];
                    }
                }
            }
        }
        Ok(out)
    }

    /// Accumulates weight and bias gradients; returns the input gradient.
    fn backward(&self, x: &Tensor, g: &Tensor, dw: &mut [f64], db: &mut [f64]) -> Tensor {
        let (ch, len) = x.shape();
        let pad = self.padding() as isize;
        let mut dx = Tensor::zeros(ch, len);
        for o in 0..self.out_channels {
            let go = g.row(o);
            db[o] += go.iter().sum::<f64>();
            for c in 0..ch {
                let xs = x.row(c);
                for k in 0..self.kernel {
                    let shift = k as isize - pad;
                    let t_lo = (-shift).max(0) as usize;
                    let t_hi = ((len as isize) - shift).min(len as isize).max(0) as usize;
                    let widx = (o * self.in_channels + c) * self.kernel + k;
                    let w = self.weight[widx];
                    let mut acc = 0.0;
                    let dxs = &mut dx.data_mut()[c * len..(c + 1) * len];
                    for t in t_lo..t_hi {
                        let s = (t as isize + shift) as usize;
                        acc += go[t] * xs[s];
                        dxs[s] += go[t] * w;
                    }
                    dw[widx] += acc;
                }
            }
        }
        dx
    }
}

/// Fully connected layer over the flattened input: `y = W x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// `[out][in]`, row-major.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn new(inputs: usize, outputs: usize) -> Result<Self> {
        if inputs == 0 || outputs == 0 {
            return Err(WartemError::Config("dense sizes must be positive".into()));
        }
        Ok(Self {
            inputs,
            outputs,
            weight: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        if x.len() != self.inputs {
            return Err(WartemError::Shape(format!(
                "dense expects {} inputs, got {}",
                self.inputs,
                x.len()
            )));
        }
        let xs = x.data();
        let out = (0..self.outputs)
            .map(|o| {
                let row = &self.weight[o * self.inputs..(o + 1) * self.inputs];
                self.bias[o] + row.iter().zip(xs).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect();
        Tensor::new(1, self.outputs, out)
    }

    fn backward(&self, x: &Tensor, g: &Tensor, dw: &mut [f64], db: &mut [f64]) -> Result<Tensor> {
        let xs = x.data();
        let mut dx = vec![0.0; self.inputs];
        for (o, &go) in g.data().iter().enumerate() {
            db[o] += go;
            let row = &self.weight[o * self.inputs..(o + 1) * self.inputs];
            let drow = &mut dw[o * self.inputs..(o + 1) * self.inputs];
            for i in 0..self.inputs {
                drow[i] += go * xs[i];
                dx[i] += row[i] * go;
            }
        }
        Tensor::new(x.rows(), x.cols(), dx)
    }
}

/// The layer vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv1d(Conv1d),
    /// Max over windows of `size`; the final window may be partial.
    MaxPool1d { size: usize },
    /// Nearest-neighbour repetition along the sequence axis.
    Upsample1d { factor: usize },
    Dense(Dense),
    Relu,
    Identity,
    /// Reinterprets the flat values as `(channels, length)`.
    Reshape { channels: usize, length: usize },
    /// Keeps the first `length` positions of every channel.
    Crop { length: usize },
}

/// Forward-pass state a layer needs for its backward pass.
#[derive(Debug, Clone)]
pub(crate) enum Cache {
    Input(Tensor),
    Argmax { shape: (usize, usize), index: Vec<usize> },
    Shape((usize, usize)),
    None,
}

impl Layer {
    pub fn conv1d(in_channels: usize, out_channels: usize, kernel: usize) -> Result<Self> {
        Conv1d::new(in_channels, out_channels, kernel).map(Self::Conv1d)
    }

    pub fn dense(inputs: usize, outputs: usize) -> Result<Self> {
        Dense::new(inputs, outputs).map(Self::Dense)
    }

    pub fn max_pool(size: usize) -> Result<Self> {
        if size < 2 {
            return Err(WartemError::Argument(format!("pool size {size} must be at least 2")));
        }
        Ok(Self::MaxPool1d { size })
    }

    pub fn upsample(factor: usize) -> Result<Self> {
        if factor < 2 {
            return Err(WartemError::Argument(format!(
                "upsample factor {factor} must be at least 2"
            )));
        }
        Ok(Self::Upsample1d { factor })
    }

    /// Parameter tensors in declaration order: weight, then bias.
    pub fn params(&self) -> Vec<&[f64]> {
        match self {
            Self::Conv1d(c) => vec![&c.weight, &c.bias],
            Self::Dense(d) => vec![&d.weight, &d.bias],
            _ => vec![],
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            Self::Conv1d(c) => vec![&mut c.weight, &mut c.bias],
            Self::Dense(d) => vec![&mut d.weight, &mut d.bias],
            _ => vec![],
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn initialize<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let (weight, bias, fan_in, fan_out) = match self {
            Self::Conv1d(c) => (
                &mut c.weight,
                &mut c.bias,
                c.in_channels * c.kernel,
                c.out_channels * c.kernel,
            ),
            Self::Dense(d) => (&mut d.weight, &mut d.bias, d.inputs, d.outputs),
            _ => return,
        };
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for w in weight.iter_mut() {
            *w = rng.gen_range(-limit..=limit);
        }
        bias.fill(0.0);
    }

    pub(crate) fn forward(&self, x: &Tensor) -> Result<(Tensor, Cache)> {
        match self {
            Self::Conv1d(c) => Ok((c.forward(x)?, Cache::Input(x.clone()))),
            Self::Dense(d) => Ok((d.forward(x)?, Cache::Input(x.clone()))),
            Self::MaxPool1d { size } => {
                let (out, index) = maxpool1d(x, *size)?;
                Ok((out, Cache::Argmax { shape: x.shape(), index }))
            }
            Self::Upsample1d { factor } => Ok((upsample1d(x, *factor)?, Cache::Shape(x.shape()))),
            Self::Relu => Ok((x.map(|v| v.max(0.0)), Cache::Input(x.clone()))),
            Self::Identity => Ok((x.clone(), Cache::None)),
            Self::Reshape { channels, length } => {
                Ok((x.clone().reshaped(*channels, *length)?, Cache::Shape(x.shape())))
            }
            Self::Crop { length } => {
                let (ch, len) = x.shape();
                if *length > len {
                    return Err(WartemError::Shape(format!("cannot crop length {len} to {length}")));
                }
                let mut data = Vec::with_capacity(ch * length);
                for c in 0..ch {
                    data.extend_from_slice(&x.row(c)[..*length]);
                }
                Ok((Tensor::new(ch, *length, data)?, Cache::Shape(x.shape())))
            }
        }
    }

    /// Input gradient, accumulating parameter gradients into `grads`
    /// (one slot per entry of [`Layer::params`]).
    pub(crate) fn backward(&self, cache: Cache, g: &Tensor, grads: &mut [Vec<f64>]) -> Result<Tensor> {
        match (self, cache) {
            (Self::Conv1d(c), Cache::Input(x)) => {
                let (dw, db) = grads.split_at_mut(1);
                Ok(c.backward(&x, g, &mut dw[0], &mut db[0]))
            }
            (Self::Dense(d), Cache::Input(x)) => {
                let (dw, db) = grads.split_at_mut(1);
                d.backward(&x, g, &mut dw[0], &mut db[0])
            }
            (Self::MaxPool1d { .. }, Cache::Argmax { shape, index }) => {
                let mut dx = Tensor::zeros(shape.0, shape.1);
                let data = dx.data_mut();
                for (&src, &gv) in index.iter().zip(g.data()) {
                    data[src] += gv;
                }
                Ok(dx)
            }
            (Self::Upsample1d { factor }, Cache::Shape((ch, len))) => {
                let mut dx = Tensor::zeros(ch, len);
                let out_len = len * factor;
                let data = dx.data_mut();
                for c in 0..ch {
                    for t in 0..out_len {
                        data[c * len + t / factor] += g.data()[c * out_len + t];
                    }
                }
                Ok(dx)
            }
            (Self::Relu, Cache::Input(x)) => {
                let data = x
                    .data()
                    .iter()
                    .zip(g.data())
                    .map(|(&v, &gv)| if v > 0.0 { gv } else { 0.0 })
                    .collect();
                Tensor::new(x.rows(), x.cols(), data)
            }
            (Self::Identity, Cache::None) => Ok(g.clone()),
            (Self::Reshape { .. }, Cache::Shape((r, c))) => g.clone().reshaped(r, c),
            (Self::Crop { length }, Cache::Shape((ch, len))) => {
                let mut dx = Tensor::zeros(ch, len);
                let data = dx.data_mut();
                for c in 0..ch {
                    data[c * len..c * len + length].copy_from_slice(g.row(c));
                }
                Ok(dx)
            }
            (layer, _) => Err(WartemError::State(format!(
                "cache does not belong to layer {layer:?}"
            ))),
        }
    }
}

/// Max pooling; returns outputs and the flat input index of each winner.
/// Ties take the earliest position.
pub fn maxpool1d(x: &Tensor, size: usize) -> Result<(Tensor, Vec<usize>)> {
    if size < 2 {
        return Err(WartemError::Argument(format!("pool size {size} must be at least 2")));
    }
    let (ch, len) = x.shape();
    if len == 0 {
        return Err(WartemError::Shape("cannot pool an empty sequence".into()));
    }
    let out_len = len.div_ceil(size);
    let mut out = Vec::with_capacity(ch * out_len);
    let mut index = Vec::with_capacity(ch * out_len);
    for c in 0..ch {
        let row = x.row(c);
        for j in 0..out_len {
            let lo = j * size;
            let hi = (lo + size).min(len);
            let mut best = lo;
            for t in lo + 1..hi {
                if row[t] > row[best] {
                    best = t;
                }
            }
            out.push(row[best]);
            index.push(c * len + best);
        }
    }
    Ok((Tensor::new(ch, out_len, out)?, index))
}

pub fn upsample1d(x: &Tensor, factor: usize) -> Result<Tensor> {
    if factor < 2 {
        return Err(WartemError::Argument(format!(
            "upsample factor {factor} must be at least 2"
        )));
    }
    let (ch, len) = x.shape();
    let mut out = Vec::with_capacity(ch * len * factor);
    for c in 0..ch {
        for &v in x.row(c) {
            out.extend(std::iter::repeat_n(v, factor));
        }
    }
    Tensor::new(ch, len * factor, out)
}

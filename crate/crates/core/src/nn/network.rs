use std::io::{Read, Write};

use rand::Rng;

use super::layers::{Cache, Layer};
use super::Tensor;
use crate::error::{Result, WartemError};

/// Per-parameter-tensor gradients, aligned with [`Network::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<Vec<f64>>);

impl Gradients {
    pub fn zeros_like(params: &[&[f64]]) -> Self {
        Self(params.iter().map(|p| vec![0.0; p.len()]).collect())
    }

    pub fn scale(&mut self, factor: f64) {
        for g in self.0.iter_mut().flatten() {
            *g *= factor;
        }
    }

    pub fn add(&mut self, other: &Gradients) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.0.iter().flatten().copied().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.0.iter().flatten()
    }
}

/// Activations recorded by one forward pass. Backward consumes it.
#[derive(Debug)]
pub struct Tape {
    caches: Option<Vec<Cache>>,
}

impl Tape {
    /// A tape with nothing left to consume.
    pub fn consumed() -> Self {
        Self { caches: None }
    }

    pub fn is_consumed(&self) -> bool {
        self.caches.is_none()
    }
}

/// A feed-forward stack of layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
}

impl Network {
    pub fn new(layers: Vec<Layer>) -> Self {
        Self { layers }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn initialize<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for layer in &mut self.layers {
            layer.initialize(rng);
        }
    }

    pub fn params(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(Layer::params).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers.iter_mut().flat_map(Layer::params_mut).collect()
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.params().concat()
    }

    pub fn set_flat_params(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(WartemError::Shape(format!(
                "{} values for {} parameters",
                values.len(),
                self.param_count()
            )));
        }
        let mut offset = 0;
        for p in self.params_mut() {
            p.copy_from_slice(&values[offset..offset + p.len()]);
            offset += p.len();
        }
        Ok(())
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients::zeros_like(&self.params())
    }

    /// Forward pass without recording.
    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        let mut cur = x.clone();
        for layer in &self.layers {
            cur = layer.forward(&cur)?.0;
        }
        Ok(cur)
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, Tape)> {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for layer in &self.layers {
            let (next, cache) = layer.forward(&cur)?;
            caches.push(cache);
            cur = next;
        }
        Ok((
            cur,
            Tape {
                caches: Some(caches),
            },
        ))
    }

    /// Reverse pass from `grad_output`, adding parameter gradients into
    /// `grads`. Returns the gradient with respect to the network input.
    pub fn backward_into(&self, tape: &mut Tape, grad_output: &Tensor, grads: &mut Gradients) -> Result<Tensor> {
        let caches = tape
            .caches
            .take()
            .ok_or_else(|| WartemError::State("tape already consumed by a backward pass".into()))?;
        if caches.len() != self.layers.len() {
            return Err(WartemError::State("tape was recorded by a different network".into()));
        }
        let mut slots = grads.0.as_mut_slice();
        let mut per_layer = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (head, rest) = slots.split_at_mut(layer.params().len());
            per_layer.push(head);
            slots = rest;
        }
        let mut g = grad_output.clone();
        for ((layer, cache), slot) in self.layers.iter().zip(caches).zip(per_layer).rev() {
            g = layer.backward(cache, &g, slot)?;
        }
        Ok(g)
    }

    /// Reverse pass returning fresh parameter and input gradients.
    pub fn backward(&self, tape: &mut Tape, grad_output: &Tensor) -> Result<(Gradients, Tensor)> {
        let mut grads = self.zero_gradients();
        let dx = self.backward_into(tape, grad_output, &mut grads)?;
        Ok((grads, dx))
    }

    /// Writes every parameter, in declaration order, as little-endian f64.
    pub fn write_params<W: Write>(&self, out: &mut W) -> Result<()> {
        for v in self.params().into_iter().flatten() {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_params<R: Read>(&mut self, input: &mut R) -> Result<()> {
        let mut buf = [0u8; 8];
        for p in self.params_mut() {
            for v in p.iter_mut() {
                input.read_exact(&mut buf)?;
                *v = f64::from_le_bytes(buf);
                if !v.is_finite() {
                    return Err(WartemError::Checkpoint("non-finite parameter value".into()));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::mse_loss;
    use crate::rng::rng_from_seed;

    fn small_net() -> Network {
        let mut net = Network::new(vec![
            Layer::conv1d(1, 3, 3).unwrap(),
            Layer::Relu,
            Layer::max_pool(2).unwrap(),
            Layer::dense(9, 2).unwrap(),
        ]);
        net.initialize(&mut rng_from_seed(3));
        net
    }

    #[test]
    fn scalar_quadratic_gradient() {
        let net = Network::new(vec![Layer::Identity]);
        let x = Tensor::from_series(&[3.0]);
        let (y, mut tape) = net.forward(&x).unwrap();
        let (_, g) = mse_loss(y.data(), &[0.0]).unwrap();
        let (_, dx) = net.backward(&mut tape, &Tensor::from_series(&g)).unwrap();
        assert_eq!(dx.data(), &[6.0]);
    }

    #[test]
    fn tape_cannot_be_reused() {
        let net = small_net();
        let x = Tensor::from_series(&[0.1, 0.5, -0.3, 0.2, 0.9, -1.0]);
        let (y, mut tape) = net.forward(&x).unwrap();
        let g = Tensor::from_series(&vec![1.0; y.len()]);
        net.backward(&mut tape, &g).unwrap();
        assert!(tape.is_consumed());
        assert!(matches!(net.backward(&mut tape, &g), Err(WartemError::State(_))));
    }

    #[test]
    fn forward_backward_deterministic() {
        let net = small_net();
        let x = Tensor::from_series(&[0.1, 0.5, -0.3, 0.2, 0.9, -1.0]);
        let run = || {
            let (y, mut tape) = net.forward(&x).unwrap();
            let (g, dx) = net.backward(&mut tape, &y).unwrap();
            (y, g, dx)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn flat_params_round_trip() {
        let mut net = small_net();
        let flat = net.flat_params();
        let mut bytes = Vec::new();
        net.write_params(&mut bytes).unwrap();
        assert_eq!(bytes.len(), flat.len() * 8);
        net.set_flat_params(&vec![0.0; flat.len()]).unwrap();
        net.read_params(&mut bytes.as_slice()).unwrap();
        assert_eq!(net.flat_params(), flat);
        assert!(net.set_flat_params(&[1.0]).is_err());
    }

    #[test]
    fn initialization_within_glorot_limit() {
        let net = small_net();
        let limit = (6.0f64 / (3.0 + 9.0)).sqrt();
        assert!(net.params()[0].iter().all(|w| w.abs() <= limit));
        assert!(net.params()[1].iter().all(|&b| b == 0.0));
    }
}

use super::{mse_loss, Network, Tensor};
use crate::error::{Result, WartemError};

/// Compares analytic gradients with central differences
/// `(L(p + eps) - L(p - eps)) / 2 eps`, one parameter at a time.
///
/// `loss_at(i, params)` evaluates the loss after parameter `i` was perturbed;
/// the index lets callers choose a different objective per parameter group.
/// Returns the maximum of `|a - n| / max(1e-12, |a| + |n|)`.
pub fn gradient_check<F>(params: &[f64], analytic: &[f64], epsilon: f64, mut loss_at: F) -> Result<f64>
where
    F: FnMut(usize, &[f64]) -> f64,
{
    if !(epsilon > 0.0) {
        return Err(WartemError::Argument(format!("epsilon {epsilon} must be positive")));
    }
    if params.len() != analytic.len() {
        return Err(WartemError::Shape(format!(
            "{} parameters but {} gradients",
            params.len(),
            analytic.len()
        )));
    }
    let mut work = params.to_vec();
    let mut worst = 0.0f64;
    for i in 0..params.len() {
        work[i] = params[i] + epsilon;
        let up = loss_at(i, &work);
        work[i] = params[i] - epsilon;
        let down = loss_at(i, &work);
        work[i] = params[i];
        let numeric = (up - down) / (2.0 * epsilon);
        let a = analytic[i];
        let err = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-12);
        worst = worst.max(err);
    }
    Ok(worst)
}

/// Gradient check of `mse(network(input), target)` over all parameters.
pub fn check_network(network: &Network, input: &Tensor, target: &[f64], epsilon: f64) -> Result<f64> {
    let (out, mut tape) = network.forward(input)?;
    let (_, g) = mse_loss(out.data(), target)?;
    let (grads, _) = network.backward(&mut tape, &Tensor::new(out.rows(), out.cols(), g)?)?;
    let mut probe = network.clone();
    gradient_check(&network.flat_params(), &grads.flatten(), epsilon, |_, p| {
        probe.set_flat_params(p).expect("same parameter count");
        let y = probe.predict(input).expect("forward on a checked shape");
        mse_loss(y.data(), target).expect("checked shape").0
    })
}

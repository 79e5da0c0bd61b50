//! Shared fixtures for the criterion benches.

use wartem_core::TimeSeries;

/// Deterministic smooth series of length `m`, varied by `k`.
pub fn smooth_series(m: usize, k: usize) -> TimeSeries {
    let phase = k as f64 * 0.37;
    TimeSeries::new(
        (0..m)
            .map(|t| {
                let x = t as f64 / m as f64;
                (std::f64::consts::TAU * x + phase).sin() + 0.3 * (5.0 * x + phase).cos()
            })
            .collect(),
    )
    .expect("finite values")
}

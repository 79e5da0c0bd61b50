//! Two-class warped-shape benchmark: WaRTEm-NN against Euclidean and DTW 1-NN.
//!
//! `cargo run --release -p wartem-core --example synthetic_benchmark -- [seeds] [max_epochs]`

use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use wartem_core::evaluation::{eval_baseline_nn, eval_wartem_nn};
use wartem_core::rng::rng_from_seed;
use wartem_core::warping::warp_n_times;
use wartem_core::{multi_seed_train, AeConfig, DistanceKind, LabeledDataset, TimeSeries, TrainConfig, WarpDirection, WarpFamily};

fn base_shape(class: usize, m: usize) -> Vec<f64> {
    (0..m)
        .map(|t| {
            let x = t as f64 / m as f64;
            match class {
                0 => (std::f64::consts::TAU * x).sin(),
                // Triangle wave with the same period and phase.
                _ => {
                    let p = (x + 0.25).fract();
                    1.0 - 4.0 * (p - 0.5).abs()
                }
            }
        })
        .collect()
}

fn dataset(n: usize, m: usize, seed: u64) -> LabeledDataset {
    let mut rng = rng_from_seed(seed);
    let mut series = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        let class = i % 2;
        let mut v = base_shape(class, m);
        for x in &mut v {
            *x += NOISE * rng.sample::<f64, _>(StandardNormal);
        }
        let t = TimeSeries::new(v).unwrap();
        let dir = if rng.gen_bool(0.5) { WarpDirection::Left } else { WarpDirection::Right };
        let r = rng.gen_range(0..=20);
        series.push(warp_n_times(&t, r, dir, WarpFamily::Mixed, &mut rng).unwrap());
        labels.push(class);
    }
    LabeledDataset::from_parts(series, labels).unwrap()
}

const NOISE: f64 = 0.25;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let seeds: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let epochs: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(100);
    let m = 64;
    let ds: u64 = std::env::var("DATA_SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(1);
    let train = dataset(100, m, ds);
    let test = dataset(100, m, ds + 1000);
    let eucl = eval_baseline_nn(&train, &test, DistanceKind::Euclidean, "synthetic", "-").unwrap();
    let dtw = eval_baseline_nn(&train, &test, DistanceKind::Dtw { band: None }, "synthetic", "-").unwrap();
    println!("eucl-nn {:.2}  dtw-nn {:.2}", eucl.mean, dtw.mean);
    let cfg = TrainConfig { max_epochs: epochs, ..TrainConfig::default() };
    let start = Instant::now();
    let seeds: Vec<u64> = (1..=seeds as u64).collect();
    let runs = multi_seed_train(train.series(), &AeConfig::for_length(m), &cfg, &seeds).unwrap();
    for (_, h) in &runs {
        println!("best epoch {} stopped {} best holdout {:.4} first train {:.4} last train {:.4}", h.best_epoch, h.stopped_epoch, h.best_holdout_loss(), h.epochs[0].train_total, h.epochs.last().unwrap().train_total);
    }
    let models: Vec<_> = runs.into_iter().map(|(m, _)| m).collect();
    let w = eval_wartem_nn(&models, &train, &test, "synthetic", "-").unwrap();
    println!("wartem-nn {:.2} ± {:.2} {:?} in {:.1?}", w.mean, w.std.unwrap(), w.accuracies, start.elapsed());
}

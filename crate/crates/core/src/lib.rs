//! WaRTEm: warping-resilient time-series embeddings.
//!
//! Series are paired with randomly warped variants of themselves and fed to
//! twin convolutional auto-encoders whose codes are pulled together by a
//! squared-distance coupling loss. The averaged codes serve as fixed-length
//! embeddings whose Euclidean neighbourhoods tolerate local warping.

pub mod checkpoint;
pub mod error;
pub mod evaluation;
pub mod metrics;
pub mod nn;
pub mod rng;
pub mod series;
pub mod training;
pub mod twin;
pub mod warping;

pub use checkpoint::{load_twin, save_twin};
pub use error::{Result, WartemError};
pub use evaluation::{ClassifierConfig, EvalEntry, Selection};
pub use metrics::{distance_matrix, dtw, one_nn_accuracy, squared_euclidean, DistanceKind, NnResult};
pub use series::{holdout_split, load_ucr_tsv, write_ucr_tsv, znormalize, LabeledDataset, TimeSeries};
pub use training::{multi_seed_train, train, TrainConfig, TrainHistory};
pub use twin::{build_twin, embed, twin_backward, twin_forward, AeConfig, TwinAe, TwinLosses};
pub use warping::{generate_warped_variant, make_training_pairs, TrainingPair, WarpDirection, WarpFamily};

//! Oversampling for imbalanced time-series datasets.
//!
//! Minority classes are topped up with synthetic samples built from a
//! selected class member (the center) and one of its nearest within-class
//! neighbors. The crate ships four generation methods that differ in how
//! neighbors are ranked and where the interpolation happens:
//!
//! * `dtwsse`: DTW neighbors, interpolation in the latent space of a siamese
//!   encoder trained to embed DTW as Euclidean distance, decoded back.
//! * `smote`: Euclidean neighbors, interpolation directly in input space.
//! * `smote-dtw`: DTW neighbors, interpolation in input space.
//! * `smote-ae`: DTW neighbors, interpolation in the latent space of a
//!   reconstruction-only autoencoder.
//!
//! Every pipeline is deterministic for a fixed seed: identical inputs give
//! byte-identical outputs.

pub mod augment;
pub mod autoencoder;
pub mod cli;
pub mod dataset;
pub mod dtw;
pub mod error;
pub mod io;
pub mod mlp;
pub mod neighbors;
pub mod rng;

pub use augment::{Augmented, SyntheticSample, augment, dtwsse_augment, smote_augment, smote_dtw_augment, smote_ae_augment};
pub use autoencoder::{AeConfig, PairSample, TrainedAutoencoder, generate_pairs, train_naive, train_siamese};
pub use dataset::{AugmentConfig, ClassQuota, Dataset, LabeledSample, Method, TimeSeries, plan_augmentation};
pub use dtw::{WarpingPath, brute_force_dtw, cost_matrix, dtw_distance, dtw_with_path, pairwise_dtw};
pub use error::{Error, Result};
pub use io::{EvalReport, eval_1nn, load_model, read_ucr, save_model, write_ucr};
pub use neighbors::{Metric, NeighborSet, k_nearest_within_class, select_centers};

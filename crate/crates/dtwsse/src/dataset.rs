//! Core data model: time series, labeled samples, validated datasets, and
//! oversampling quota arithmetic.
//!
//! A dataset is immutable once constructed; every invariant (uniform shape,
//! finite values, non-empty labels) is checked at the boundary so the rest of
//! the crate can assume well-formed input.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};

use crate::autoencoder::AeConfig;
use crate::error::{Error, Result};

/// A single multivariate time series, stored time-major: row `t` holds the
/// `M` variable values observed at step `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Array2<f64>,
}

impl TimeSeries {
    /// Wraps a `(len, vars)` array. Rejects empty axes and non-finite values.
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::EmptySeries);
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteSeries);
        }
        Ok(Self { values })
    }

    /// Builds a univariate series from a plain vector.
    pub fn univariate(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        let arr = Array2::from_shape_vec((n, 1), values).expect("vector length matches shape");
        Self::new(arr)
    }

    /// Builds a series from per-step rows of variable values.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptySeries);
        }
        let vars = rows[0].len();
        if rows.iter().any(|r| r.len() != vars) {
            return Err(Error::InvalidConfig {
                reason: "rows have unequal variable counts".into(),
            });
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let arr = Array2::from_shape_vec((rows.len(), vars), flat).expect("lengths checked above");
        Self::new(arr)
    }

    /// Number of time steps.
    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        false // a constructed series always has at least one step
    }

    /// Number of variables per step.
    pub fn vars(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    /// Time-major flattening: step 0's variables first, then step 1's, ...
    /// This is the layout fed to the encoder and written by the decoder.
    pub fn flatten(&self) -> Vec<f64> {
        self.values.iter().copied().collect()
    }

    /// Inverse of [`TimeSeries::flatten`] for a known shape.
    pub fn from_flat(flat: Vec<f64>, len: usize, vars: usize) -> Result<Self> {
        if flat.len() != len * vars {
            return Err(Error::DimensionMismatch {
                what: "flat series",
                expected: len * vars,
                found: flat.len(),
            });
        }
        let arr = Array2::from_shape_vec((len, vars), flat).expect("length checked above");
        Self::new(arr)
    }
}

/// A time series together with its class label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub series: TimeSeries,
    pub label: String,
}

impl LabeledSample {
    pub fn new(series: TimeSeries, label: impl Into<String>) -> Self {
        Self {
            series,
            label: label.into(),
        }
    }
}

/// A validated collection of labeled samples sharing one `(len, vars)` shape.
///
/// Class bookkeeping is kept in a sorted map so every per-class iteration in
/// the crate runs in lexicographic label order, independent of sample order.
#[derive(Debug, Clone)]
pub struct Dataset {
    samples: Vec<LabeledSample>,
    len: usize,
    vars: usize,
    classes: BTreeMap<String, Vec<usize>>,
}

impl Dataset {
    /// Validates and indexes the samples. Errors name the first offending
    /// sample: empty input, shape drift from sample 0, non-finite values, or
    /// an empty label.
    pub fn new(samples: Vec<LabeledSample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyInput);
        }
        let len = samples[0].series.len();
        let vars = samples[0].series.vars();
        let mut classes: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (index, sample) in samples.iter().enumerate() {
            if sample.series.len() != len || sample.series.vars() != vars {
                return Err(Error::ShapeMismatch {
                    index,
                    expected_len: len,
                    expected_vars: vars,
                    found_len: sample.series.len(),
                    found_vars: sample.series.vars(),
                });
            }
            if !sample.series.values().iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite { index });
            }
            if sample.label.is_empty() {
                return Err(Error::EmptyLabel { index });
            }
            classes.entry(sample.label.clone()).or_default().push(index);
        }
        Ok(Self {
            samples,
            len,
            vars,
            classes,
        })
    }

    /// Number of samples.
    pub fn size(&self) -> usize {
        self.samples.len()
    }

    /// Shared `(len, vars)` shape of every sample.
    pub fn shape(&self) -> (usize, usize) {
        (self.len, self.vars)
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    /// Class labels in lexicographic order.
    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.classes.keys().map(String::as_str)
    }

    /// Indices of the samples carrying `label`, in dataset order.
    pub fn class_indices(&self, label: &str) -> Result<&[usize]> {
        self.classes
            .get(label)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::ClassNotFound {
                label: label.to_string(),
            })
    }

    pub fn sample(&self, index: usize) -> Result<&LabeledSample> {
        self.samples.get(index).ok_or(Error::IndexOutOfBounds {
            index,
            size: self.samples.len(),
        })
    }

    pub fn samples(&self) -> &[LabeledSample] {
        &self.samples
    }

    pub fn iter(&self) -> std::slice::Iter<'_, LabeledSample> {
        self.samples.iter()
    }
}

/// Oversampling method selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// DTW neighbor search plus interpolation in the siamese latent space.
    Dtwsse,
    /// Classical SMOTE: Euclidean neighbors, interpolation in input space.
    Smote,
    /// SMOTE with DTW neighbor search, interpolation in input space.
    SmoteDtw,
    /// DTW neighbor search plus interpolation in a naive autoencoder's
    /// latent space (reconstruction-only training).
    SmoteAe,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Dtwsse,
        Method::Smote,
        Method::SmoteDtw,
        Method::SmoteAe,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Dtwsse => "dtwsse",
            Method::Smote => "smote",
            Method::SmoteDtw => "smote-dtw",
            Method::SmoteAe => "smote-ae",
        }
    }

    /// Whether the method interpolates in a learned latent space and thus
    /// needs a trained model.
    pub fn needs_model(&self) -> bool {
        matches!(self, Method::Dtwsse | Method::SmoteAe)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig {
                reason: format!(
                    "unknown method {s:?}, expected one of dtwsse, smote, smote-dtw, smote-ae"
                ),
            })
    }
}

/// Settings shared by every oversampling pipeline.
#[derive(Debug, Clone)]
pub struct AugmentConfig {
    /// Dataset growth multiplier `T`: each class is topped up to
    /// `floor(size * T / n_classes)` samples.
    pub multiplier: f64,
    /// Synthetic samples generated per selected center (one per neighbor).
    pub k: usize,
    pub method: Method,
    /// Master seed; every class derives an independent stream from it.
    pub seed: u64,
    /// Hyperparameters for the latent-space methods' model training.
    pub autoencoder: AeConfig,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            multiplier: 10.0,
            k: 1,
            method: Method::Dtwsse,
            seed: 0,
            autoencoder: AeConfig::default(),
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.multiplier.is_finite() && self.multiplier > 0.0) {
            return Err(Error::InvalidConfig {
                reason: format!("multiplier must be a positive real, got {}", self.multiplier),
            });
        }
        if self.k == 0 {
            return Err(Error::InvalidConfig {
                reason: "k must be at least 1".into(),
            });
        }
        Ok(())
    }
}

/// Per-class oversampling plan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassQuota {
    pub label: String,
    /// Existing member count `a`.
    pub members: usize,
    /// Synthetic samples to generate: `max(0, floor(N*T/c) - a)`.
    pub onum: usize,
    /// Centers to select: `ceil(onum / k)`.
    pub cnum: usize,
}

/// Computes each class's synthetic-sample quota and center count, in
/// lexicographic label order.
///
/// Every class is raised to the common target `floor(N*T/c)`; classes already
/// at or above it get a zero quota, so the output dataset is exactly balanced
/// at `max(a, floor(N*T/c))` per class.
pub fn plan_augmentation(dataset: &Dataset, config: &AugmentConfig) -> Result<Vec<ClassQuota>> {
    config.validate()?;
    let n = dataset.size() as f64;
    let c = dataset.n_classes() as f64;
    let target = (n * config.multiplier / c).floor() as usize;
    let quotas = dataset
        .labels()
        .map(|label| {
            let members = dataset
                .class_indices(label)
                .expect("label comes from the dataset")
                .len();
            let onum = target.saturating_sub(members);
            let cnum = onum.div_ceil(config.k);
            ClassQuota {
                label: label.to_string(),
                members,
                onum,
                cnum,
            }
        })
        .collect();
    Ok(quotas)
}

//! Synthetic sample generation.
//!
//! All four methods share one engine: plan per-class quotas, draw centers
//! from the class's seeded stream, rank within-class neighbors, and emit one
//! interpolated sample per (center, neighbor, lambda) triple until the quota
//! is met. They differ only in the neighbor metric and in whether the
//! interpolation runs on raw series or on encoder latents:
//!
//! | method    | neighbors | interpolation space      |
//! |-----------|-----------|--------------------------|
//! | smote     | euclidean | input                    |
//! | smote-dtw | dtw       | input                    |
//! | smote-ae  | dtw       | naive autoencoder latent |
//! | dtwsse    | dtw       | siamese encoder latent   |
//!
//! Each class consumes an independent RNG stream derived from the seed and
//! its label, so results for one class do not depend on which other classes
//! are present. Classes are processed in lexicographic label order.

use std::collections::BTreeMap;
use std::collections::btree_map::Entry;

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;

use crate::autoencoder::{TrainedAutoencoder, decode, encode};
use crate::dataset::{AugmentConfig, Dataset, LabeledSample, Method, TimeSeries, plan_augmentation};
use crate::error::{Error, Result};
use crate::neighbors::{Metric, select_centers};
use crate::rng::label_stream;

/// A generated sample plus its full provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSample {
    pub series: TimeSeries,
    pub label: String,
    pub method: Method,
    /// Dataset index of the interpolation center.
    pub center: usize,
    /// Dataset index of the neighbor interpolated towards.
    pub neighbor: usize,
    pub lambda: f64,
}

/// An augmented dataset: the originals, bit-identical and in their original
/// order, followed by the synthetics in generation order.
#[derive(Debug, Clone)]
pub struct Augmented {
    pub dataset: Dataset,
    pub synthetics: Vec<SyntheticSample>,
}

/// Convex combination `from + lambda * (to - from)` with `lambda` in [0, 1].
pub fn interpolate_latent(
    from: ArrayView1<'_, f64>,
    to: ArrayView1<'_, f64>,
    lambda: f64,
) -> Result<Array1<f64>> {
    if from.len() != to.len() {
        return Err(Error::DimensionMismatch {
            what: "interpolation endpoints",
            expected: from.len(),
            found: to.len(),
        });
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidConfig {
            reason: format!("lambda must lie in [0, 1], got {lambda}"),
        });
    }
    Ok(&from + lambda * &(&to - &from))
}

/// Where a method interpolates.
enum Space<'a> {
    Input,
    Latent(&'a TrainedAutoencoder),
}

/// DTW neighbors, interpolation between siamese-encoder latents, decoded
/// back to a series.
pub fn dtwsse_augment(
    dataset: &Dataset,
    config: &AugmentConfig,
    model: &TrainedAutoencoder,
) -> Result<Augmented> {
    synthesize(dataset, config, Metric::Dtw, Space::Latent(model), Method::Dtwsse)
}

/// Classical SMOTE: Euclidean neighbors, interpolation on raw series.
pub fn smote_augment(dataset: &Dataset, config: &AugmentConfig) -> Result<Augmented> {
    synthesize(dataset, config, Metric::Euclidean, Space::Input, Method::Smote)
}

/// SMOTE with DTW neighbor ranking, interpolation on raw series.
pub fn smote_dtw_augment(dataset: &Dataset, config: &AugmentConfig) -> Result<Augmented> {
    synthesize(dataset, config, Metric::Dtw, Space::Input, Method::SmoteDtw)
}

/// DTW neighbors, interpolation between naive-autoencoder latents.
pub fn smote_ae_augment(
    dataset: &Dataset,
    config: &AugmentConfig,
    model: &TrainedAutoencoder,
) -> Result<Augmented> {
    synthesize(dataset, config, Metric::Dtw, Space::Latent(model), Method::SmoteAe)
}

/// Dispatches on `config.method`; latent methods require `model`.
pub fn augment(
    dataset: &Dataset,
    config: &AugmentConfig,
    model: Option<&TrainedAutoencoder>,
) -> Result<Augmented> {
    if config.method.needs_model() && model.is_none() {
        return Err(Error::InvalidConfig {
            reason: format!("method {} needs a trained model", config.method),
        });
    }
    match config.method {
        Method::Dtwsse => dtwsse_augment(dataset, config, model.expect("checked above")),
        Method::Smote => smote_augment(dataset, config),
        Method::SmoteDtw => smote_dtw_augment(dataset, config),
        Method::SmoteAe => smote_ae_augment(dataset, config, model.expect("checked above")),
    }
}

fn synthesize(
    dataset: &Dataset,
    config: &AugmentConfig,
    metric: Metric,
    space: Space<'_>,
    method: Method,
) -> Result<Augmented> {
    config.validate()?;
    if let Space::Latent(model) = &space {
        if model.shape != dataset.shape() {
            return Err(Error::IncompatibleSeries {
                op: "augmentation with this model",
                left_len: dataset.shape().0,
                left_vars: dataset.shape().1,
                right_len: model.shape.0,
                right_vars: model.shape.1,
            });
        }
    }
    let quotas = plan_augmentation(dataset, config)?;
    let mut synthetics = Vec::new();
    for quota in &quotas {
        if quota.onum == 0 {
            continue;
        }
        let members = dataset.class_indices(&quota.label)?;
        if members.len() < 2 {
            log::warn!(
                "class {:?} has a single member, skipping its quota of {} synthetics",
                quota.label,
                quota.onum
            );
            continue;
        }
        let k = config.k.min(members.len() - 1);
        if k < config.k {
            log::warn!(
                "class {:?} has {} members, clamping k from {} to {}",
                quota.label,
                members.len(),
                config.k,
                k
            );
        }
        let mut rng = label_stream(config.seed, &quota.label);
        let centers = select_centers(dataset, quota, &mut rng)?;
        let ranker = NeighborRanker::new(dataset, members, metric, quota.cnum, k)?;
        let mut latents: BTreeMap<usize, Array1<f64>> = BTreeMap::new();

        let mut produced = 0;
        let mut next_center = 0;
        while produced < quota.onum {
            let center = if next_center < centers.len() {
                next_center += 1;
                centers[next_center - 1]
            } else {
                // Clamping k below the config value can exhaust the planned
                // centers early; top up with replacement draws.
                members[rng.random_range(0..members.len())]
            };
            for &neighbor in &ranker.nearest(center)? {
                if produced == quota.onum {
                    break;
                }
                let lambda = rng.random_range(0.0..=1.0);
                let series = match &space {
                    Space::Input => {
                        let c = dataset.sample(center)?.series.values();
                        let n = dataset.sample(neighbor)?.series.values();
                        let mixed: Array2<f64> = &c + lambda * &(&n - &c);
                        TimeSeries::new(mixed)?
                    }
                    Space::Latent(model) => {
                        for idx in [center, neighbor] {
                            if let Entry::Vacant(slot) = latents.entry(idx) {
                                slot.insert(encode(model, &dataset.sample(idx)?.series)?);
                            }
                        }
                        let h = interpolate_latent(
                            latents[&center].view(),
                            latents[&neighbor].view(),
                            lambda,
                        )?;
                        decode(model, h.view())?
                    }
                };
                synthetics.push(SyntheticSample {
                    series,
                    label: quota.label.clone(),
                    method,
                    center,
                    neighbor,
                    lambda,
                });
                produced += 1;
            }
        }
    }
    let mut samples = dataset.samples().to_vec();
    samples.extend(
        synthetics
            .iter()
            .map(|s| LabeledSample::new(s.series.clone(), s.label.clone())),
    );
    Ok(Augmented {
        dataset: Dataset::new(samples)?,
        synthetics,
    })
}

/// Within-class k-nearest lookup. When the workload is heavy (many centers,
/// several neighbors each) the full pairwise matrix is computed once;
/// otherwise distances are measured per center. Both paths rank identically:
/// ascending distance, ties by ascending dataset index.
struct NeighborRanker<'a> {
    dataset: &'a Dataset,
    members: &'a [usize],
    metric: Metric,
    k: usize,
    matrix: Option<Array2<f64>>,
}

impl<'a> NeighborRanker<'a> {
    fn new(
        dataset: &'a Dataset,
        members: &'a [usize],
        metric: Metric,
        cnum: usize,
        k: usize,
    ) -> Result<Self> {
        let matrix = if cnum * k > members.len() {
            let n = members.len();
            let mut m = Array2::zeros((n, n));
            for r in 0..n {
                for c in (r + 1)..n {
                    let d = metric.distance(
                        &dataset.sample(members[r])?.series,
                        &dataset.sample(members[c])?.series,
                    )?;
                    m[[r, c]] = d;
                    m[[c, r]] = d;
                }
            }
            Some(m)
        } else {
            None
        };
        Ok(Self {
            dataset,
            members,
            metric,
            k,
            matrix,
        })
    }

    fn nearest(&self, center: usize) -> Result<Vec<usize>> {
        let pos = self
            .members
            .iter()
            .position(|&m| m == center)
            .expect("center was drawn from members");
        let mut ranked: Vec<(f64, usize)> = match &self.matrix {
            Some(m) => self
                .members
                .iter()
                .enumerate()
                .filter(|&(q, _)| q != pos)
                .map(|(q, &idx)| (m[[pos, q]], idx))
                .collect(),
            None => {
                let center_series = &self.dataset.sample(center)?.series;
                self.members
                    .iter()
                    .filter(|&&idx| idx != center)
                    .map(|&idx| {
                        self.metric
                            .distance(center_series, &self.dataset.sample(idx)?.series)
                            .map(|d| (d, idx))
                    })
                    .collect::<Result<_>>()?
            }
        };
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        Ok(ranked.into_iter().take(self.k).map(|(_, idx)| idx).collect())
    }
}

//! Center selection and within-class nearest-neighbor search.
//!
//! Neighbor ranking is fully deterministic: distances sort ascending with
//! ties broken by ascending dataset index, so equal-distance candidates never
//! depend on sort internals.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{ClassQuota, Dataset, TimeSeries};
use crate::dtw;
use crate::error::{Error, Result};

/// Distance used for neighbor ranking and 1-NN classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    /// Warping-invariant alignment cost (squared units).
    Dtw,
    /// Euclidean distance between flattened series; requires equal shapes.
    Euclidean,
}

impl Metric {
    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::Dtw => "dtw",
            Metric::Euclidean => "euclidean",
        }
    }

    pub fn distance(&self, a: &TimeSeries, b: &TimeSeries) -> Result<f64> {
        match self {
            Metric::Dtw => dtw::dtw_distance(a, b),
            Metric::Euclidean => {
                if a.len() != b.len() || a.vars() != b.vars() {
                    return Err(Error::IncompatibleSeries {
                        op: "euclidean distance",
                        left_len: a.len(),
                        left_vars: a.vars(),
                        right_len: b.len(),
                        right_vars: b.vars(),
                    });
                }
                let sum: f64 = a
                    .values()
                    .iter()
                    .zip(b.values().iter())
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum();
                Ok(sum.sqrt())
            }
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dtw" => Ok(Metric::Dtw),
            "euclidean" => Ok(Metric::Euclidean),
            other => Err(Error::InvalidConfig {
                reason: format!("unknown metric {other:?}, expected dtw or euclidean"),
            }),
        }
    }
}

/// A center sample and its nearest within-class neighbors, both as dataset
/// indices. Neighbors are ordered by ascending distance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborSet {
    pub center: usize,
    pub neighbors: Vec<usize>,
}

/// Draws the quota's `cnum` interpolation centers from its class.
///
/// Draws are without replacement (a partial shuffle) while the class can
/// supply distinct centers, and uniform with replacement once `cnum` exceeds
/// the class size.
pub fn select_centers(
    dataset: &Dataset,
    quota: &ClassQuota,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<usize>> {
    let members = dataset.class_indices(&quota.label)?;
    if quota.cnum == 0 {
        return Ok(Vec::new());
    }
    if quota.cnum <= members.len() {
        let mut pool = members.to_vec();
        for i in 0..quota.cnum {
            let j = rng.random_range(i..pool.len());
            pool.swap(i, j);
        }
        pool.truncate(quota.cnum);
        Ok(pool)
    } else {
        Ok((0..quota.cnum)
            .map(|_| members[rng.random_range(0..members.len())])
            .collect())
    }
}

/// The `k` nearest same-class neighbors of `center`, excluding itself.
pub fn k_nearest_within_class(
    dataset: &Dataset,
    center: usize,
    k: usize,
    metric: Metric,
) -> Result<NeighborSet> {
    if k == 0 {
        return Err(Error::InvalidConfig {
            reason: "neighbor count k must be at least 1".into(),
        });
    }
    let label = &dataset.sample(center)?.label;
    let members = dataset.class_indices(label)?;
    if members.len() < k + 1 {
        return Err(Error::InsufficientClassMembers {
            label: label.clone(),
            members: members.len(),
            needed: k + 1,
        });
    }
    let center_series = &dataset.sample(center)?.series;
    let mut ranked: Vec<(f64, usize)> = members
        .iter()
        .filter(|&&idx| idx != center)
        .map(|&idx| {
            metric
                .distance(center_series, &dataset.sample(idx)?.series)
                .map(|d| (d, idx))
        })
        .collect::<Result<_>>()?;
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(NeighborSet {
        center,
        neighbors: ranked.into_iter().take(k).map(|(_, idx)| idx).collect(),
    })
}

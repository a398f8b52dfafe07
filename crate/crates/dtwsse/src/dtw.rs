//! Dynamic time warping over multivariate series.
//!
//! The local cost between two steps is the squared Euclidean distance across
//! variables, and the alignment value is the minimal sum of local costs along
//! a warping path, so every value in this module is in squared units. No
//! square root is applied anywhere.
//!
//! [`brute_force_dtw`] enumerates every admissible path and exists purely as
//! an oracle for the dynamic program; it shares no code with
//! [`dtw_distance`] beyond the local cost definition.

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use crate::dataset::{Dataset, TimeSeries};
use crate::error::{Error, Result};

/// Largest `len_a + len_b` accepted by [`brute_force_dtw`]; path counts grow
/// exponentially past this.
pub const ENUMERATION_BUDGET: usize = 14;

/// A monotone step-constrained alignment between two series, as 0-based
/// `(step_a, step_b)` index pairs from `(0, 0)` to `(len_a-1, len_b-1)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WarpingPath {
    pub steps: Vec<(usize, usize)>,
}

impl WarpingPath {
    /// Checks the three path constraints: boundary endpoints, monotone
    /// non-decreasing indices, and unit moves `(1,0)`, `(0,1)`, `(1,1)`.
    pub fn is_valid(&self, len_a: usize, len_b: usize) -> bool {
        let Some(&first) = self.steps.first() else {
            return false;
        };
        let Some(&last) = self.steps.last() else {
            return false;
        };
        if first != (0, 0) || last != (len_a - 1, len_b - 1) {
            return false;
        }
        self.steps.windows(2).all(|w| {
            let (i0, j0) = w[0];
            let (i1, j1) = w[1];
            let di = i1 as i64 - i0 as i64;
            let dj = j1 as i64 - j0 as i64;
            matches!((di, dj), (1, 0) | (0, 1) | (1, 1))
        })
    }

    /// Sums the local costs this path visits; equals the alignment value for
    /// a path returned by [`dtw_with_path`].
    pub fn score(&self, cost: &Array2<f64>) -> f64 {
        self.steps.iter().map(|&(i, j)| cost[[i, j]]).sum()
    }
}

fn check_vars(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Result<()> {
    if a.ncols() != b.ncols() {
        return Err(Error::VarCountMismatch {
            left: a.ncols(),
            right: b.ncols(),
        });
    }
    Ok(())
}

fn local_cost(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>, i: usize, j: usize) -> f64 {
    let mut acc = 0.0;
    for v in 0..a.ncols() {
        let d = a[[i, v]] - b[[j, v]];
        acc += d * d;
    }
    acc
}

/// The `len_a x len_b` table of squared Euclidean step costs.
pub fn cost_matrix(a: &TimeSeries, b: &TimeSeries) -> Result<Array2<f64>> {
    let (av, bv) = (a.values(), b.values());
    check_vars(av, bv)?;
    Ok(Array2::from_shape_fn((a.len(), b.len()), |(i, j)| {
        local_cost(av, bv, i, j)
    }))
}

/// Alignment value via the standard dynamic program, O(len_b) memory.
pub fn dtw_distance(a: &TimeSeries, b: &TimeSeries) -> Result<f64> {
    let (av, bv) = (a.values(), b.values());
    check_vars(av, bv)?;
    let (la, lb) = (a.len(), b.len());
    let mut prev = vec![0.0; lb];
    let mut cur = vec![0.0; lb];
    for i in 0..la {
        for j in 0..lb {
            let d = local_cost(av, bv, i, j);
            cur[j] = match (i, j) {
                (0, 0) => d,
                (0, _) => d + cur[j - 1],
                (_, 0) => d + prev[0],
                _ => d + prev[j].min(prev[j - 1]).min(cur[j - 1]),
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[lb - 1])
}

/// Alignment value plus one optimal path, recovered by backtracking the full
/// table. Ties prefer the diagonal predecessor, then the one above.
pub fn dtw_with_path(a: &TimeSeries, b: &TimeSeries) -> Result<(f64, WarpingPath)> {
    let (av, bv) = (a.values(), b.values());
    check_vars(av, bv)?;
    let (la, lb) = (a.len(), b.len());
    let mut dp = Array2::<f64>::zeros((la, lb));
    for i in 0..la {
        for j in 0..lb {
            let d = local_cost(av, bv, i, j);
            dp[[i, j]] = match (i, j) {
                (0, 0) => d,
                (0, _) => d + dp[[0, j - 1]],
                (_, 0) => d + dp[[i - 1, 0]],
                _ => d + dp[[i - 1, j - 1]].min(dp[[i - 1, j]]).min(dp[[i, j - 1]]),
            };
        }
    }
    let mut steps = vec![(la - 1, lb - 1)];
    let (mut i, mut j) = (la - 1, lb - 1);
    while (i, j) != (0, 0) {
        (i, j) = match (i, j) {
            (0, _) => (0, j - 1),
            (_, 0) => (i - 1, 0),
            _ => {
                let diag = dp[[i - 1, j - 1]];
                let up = dp[[i - 1, j]];
                let left = dp[[i, j - 1]];
                if diag <= up && diag <= left {
                    (i - 1, j - 1)
                } else if up <= left {
                    (i - 1, j)
                } else {
                    (i, j - 1)
                }
            }
        };
        steps.push((i, j));
    }
    steps.reverse();
    Ok((dp[[la - 1, lb - 1]], WarpingPath { steps }))
}

/// Oracle: exhaustively enumerates every warping path and returns the minimal
/// total cost. Rejects inputs with `len_a + len_b > ENUMERATION_BUDGET`.
pub fn brute_force_dtw(a: &TimeSeries, b: &TimeSeries) -> Result<f64> {
    let (av, bv) = (a.values(), b.values());
    check_vars(av, bv)?;
    let total = a.len() + b.len();
    if total > ENUMERATION_BUDGET {
        return Err(Error::EnumerationBudget {
            total,
            budget: ENUMERATION_BUDGET,
        });
    }

    fn explore(
        av: ArrayView2<'_, f64>,
        bv: ArrayView2<'_, f64>,
        i: usize,
        j: usize,
        cost_so_far: f64,
        best: &mut f64,
    ) {
        let cost = cost_so_far + local_cost(av, bv, i, j);
        if i == av.nrows() - 1 && j == bv.nrows() - 1 {
            *best = best.min(cost);
            return;
        }
        if i + 1 < av.nrows() {
            explore(av, bv, i + 1, j, cost, best);
        }
        if j + 1 < bv.nrows() {
            explore(av, bv, i, j + 1, cost, best);
        }
        if i + 1 < av.nrows() && j + 1 < bv.nrows() {
            explore(av, bv, i + 1, j + 1, cost, best);
        }
    }

    let mut best = f64::INFINITY;
    explore(av, bv, 0, 0, 0.0, &mut best);
    Ok(best)
}

/// Symmetric matrix of pairwise alignment values, over the whole dataset or
/// one class. Entries above the diagonal are computed in parallel; the result
/// does not depend on thread count.
pub fn pairwise_dtw(dataset: &Dataset, class: Option<&str>) -> Result<Array2<f64>> {
    let indices: Vec<usize> = match class {
        Some(label) => dataset.class_indices(label)?.to_vec(),
        None => (0..dataset.size()).collect(),
    };
    let n = indices.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|r| ((r + 1)..n).map(move |c| (r, c)))
        .collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(r, c)| {
            let a = &dataset.samples()[indices[r]].series;
            let b = &dataset.samples()[indices[c]].series;
            dtw_distance(a, b)
        })
        .collect::<Result<_>>()?;
    let mut out = Array2::zeros((n, n));
    for (&(r, c), &v) in pairs.iter().zip(&values) {
        out[[r, c]] = v;
        out[[c, r]] = v;
    }
    Ok(out)
}

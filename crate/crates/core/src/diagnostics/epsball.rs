use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Multipliers of the default radius used for the wider/narrower ball tests.
pub const EPSILON_MULTIPLIERS: [f64; 3] = [0.5, 1.0, 1.5];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsBallReport {
    pub epsilon: f64,
    /// Generated samples within `epsilon` of each reference point.
    pub counts: Vec<usize>,
    /// `histogram[c]` = number of reference points with exactly `c` neighbours.
    pub histogram: Vec<usize>,
    pub mean: f64,
    pub variance: f64,
    /// `variance / mean`; 1 for Poisson counts, larger when density varies.
    pub dispersion: f64,
}

/// Row indices sorted by the first coordinate, plus those coordinates.
fn sort_by_first(points: &DMatrix<f64>) -> (Vec<usize>, Vec<f64>) {
    let mut idx: Vec<usize> = (0..points.nrows()).collect();
    idx.sort_by(|&a, &b| points[(a, 0)].total_cmp(&points[(b, 0)]));
    let keys = idx.iter().map(|&i| points[(i, 0)]).collect();
    (idx, keys)
}

fn sq_dist(a: &DMatrix<f64>, i: usize, b: &DMatrix<f64>, j: usize) -> f64 {
    (0..a.ncols()).map(|c| (a[(i, c)] - b[(j, c)]).powi(2)).sum()
}

pub fn epsball_counts(
    reference: &DMatrix<f64>,
    samples: &DMatrix<f64>,
    epsilon: f64,
) -> Result<EpsBallReport> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid("epsilon must be positive"));
    }
    if reference.ncols() != samples.ncols() {
        return Err(Error::DimensionMismatch {
            context: "epsilon-ball point sets",
            expected: reference.ncols(),
            found: samples.ncols(),
        });
    }
    if reference.nrows() == 0 {
        return Err(Error::invalid("reference set is empty"));
    }
    let eps2 = epsilon * epsilon;
    let (order, keys) = sort_by_first(samples);
    let counts: Vec<usize> = (0..reference.nrows())
        .into_par_iter()
        .map(|m| {
            let x = reference[(m, 0)];
            let lo = keys.partition_point(|&k| k < x - epsilon);
            let hi = keys.partition_point(|&k| k <= x + epsilon);
            order[lo..hi]
                .iter()
                .filter(|&&k| sq_dist(reference, m, samples, k) <= eps2)
                .count()
        })
        .collect();

    let max = counts.iter().copied().max().unwrap_or(0);
    let mut histogram = vec![0; max + 1];
    for &c in &counts {
        histogram[c] += 1;
    }
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<usize>() as f64 / n;
    let variance = if counts.len() > 1 {
        counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(EpsBallReport {
        epsilon,
        counts,
        histogram,
        mean,
        variance,
        dispersion: if mean > 0.0 { variance / mean } else { f64::NAN },
    })
}

/// Mean distance from each point to its nearest distinct neighbour.
pub fn default_epsilon(reference: &DMatrix<f64>) -> Result<f64> {
    let m = reference.nrows();
    if m < 2 {
        return Err(Error::invalid("default epsilon needs at least two reference points"));
    }
    let (order, keys) = sort_by_first(reference);
    let nearest: Vec<Option<f64>> = (0..m)
        .into_par_iter()
        .map(|pos| {
            let i = order[pos];
            let mut best = f64::INFINITY;
            // walk outwards in sorted order until the first-coordinate gap exceeds the best
            for step in [-1isize, 1] {
                let mut p = pos as isize + step;
                while p >= 0 && (p as usize) < m {
                    let gap = keys[p as usize] - keys[pos];
                    if gap * gap > best {
                        break;
                    }
                    let d2 = sq_dist(reference, i, reference, order[p as usize]);
                    if d2 > 0.0 && d2 < best {
                        best = d2;
                    }
                    p += step;
                }
            }
            best.is_finite().then(|| best.sqrt())
        })
        .collect();
    let found: Vec<f64> = nearest.into_iter().flatten().collect();
    if found.is_empty() {
        return Err(Error::invalid("reference set contains only duplicate points"));
    }
    Ok(found.iter().sum::<f64>() / found.len() as f64)
}

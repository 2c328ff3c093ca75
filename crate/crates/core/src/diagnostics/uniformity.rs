//! Pearson chi-square test of samples against the uniform measure on the
//! generated manifold.
//!
//! Expected counts are proportional to image volume: `sigma * latent volume`
//! for region bins, length or area of the support inside the bin for interval
//! and grid bins.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::cpa_net::{ActivationPattern, CpaNetwork};
use crate::error::{Error, Result};
use crate::geometry::volume_scalar;
use crate::sampling::{draw_latents, LatentDomain, SampleBatch};

/// Bins with fewer expected counts than this are merged into a neighbour.
pub const MIN_EXPECTED: f64 = 5.0;

#[derive(Clone, Debug, PartialEq)]
pub struct RegionBin {
    pub pattern: ActivationPattern,
    /// Volume of the region inside the latent domain.
    pub latent_volume: f64,
    pub sigma: f64,
}

impl RegionBin {
    pub fn image_volume(&self) -> f64 {
        self.sigma * self.latent_volume
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Binning {
    /// One bin per activation region; samples are binned by their latent's
    /// pattern.
    Regions(Vec<RegionBin>),
    /// `1 -> 1` nets: output intervals with the image `[support.0, support.1]`.
    Intervals { edges: Vec<f64>, support: (f64, f64) },
    /// `2 -> 2` nets: a rectangular output grid and the convex image polygon
    /// (vertices in order).
    Grid2D {
        x_edges: Vec<f64>,
        y_edges: Vec<f64>,
        support: Vec<[f64; 2]>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformityReport {
    pub statistic: f64,
    pub p_value: f64,
    pub dof: usize,
    /// Per bin after merging.
    pub observed: Vec<usize>,
    pub expected: Vec<f64>,
    /// Original bins that were folded into a neighbour.
    pub merged_bins: usize,
}

fn check_edges(edges: &[f64], what: &str) -> Result<()> {
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) || edges.iter().any(|e| !e.is_finite()) {
        return Err(Error::invalid(format!("{what} must be at least two increasing finite values")));
    }
    Ok(())
}

/// Index of the bin holding `x`; the last bin is closed on the right.
fn locate(edges: &[f64], x: f64) -> Option<usize> {
    let n = edges.len() - 1;
    if !(x >= edges[0] && x <= edges[n]) {
        return None;
    }
    Some((edges.partition_point(|&e| e <= x) - 1).min(n - 1))
}

/// Clips a convex polygon to an axis-aligned rectangle and returns the area.
fn clipped_area(poly: &[[f64; 2]], x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    let mut pts = poly.to_vec();
    // (axis, bound, keep the side below the bound)
    for (axis, bound, below) in [(0, x0, false), (0, x1, true), (1, y0, false), (1, y1, true)] {
        if pts.is_empty() {
            break;
        }
        let inside = |p: &[f64; 2]| if below { p[axis] <= bound } else { p[axis] >= bound };
        let mut out = Vec::with_capacity(pts.len() + 2);
        for i in 0..pts.len() {
            let cur = pts[i];
            let prev = pts[(i + pts.len() - 1) % pts.len()];
            let (ci, pi) = (inside(&cur), inside(&prev));
            if ci != pi {
                let t = (bound - prev[axis]) / (cur[axis] - prev[axis]);
                out.push([prev[0] + t * (cur[0] - prev[0]), prev[1] + t * (cur[1] - prev[1])]);
            }
            if ci {
                out.push(cur);
            }
        }
        pts = out;
    }
    polygon_area(&pts)
}

fn polygon_area(pts: &[[f64; 2]]) -> f64 {
    let n = pts.len();
    if n < 3 {
        return 0.0;
    }
    let twice: f64 = (0..n)
        .map(|i| {
            let (a, b) = (pts[i], pts[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum();
    0.5 * twice.abs()
}

/// Observed counts and unnormalised expected masses, one entry per raw bin.
fn raw_bins(net: &CpaNetwork, batch: &SampleBatch, bins: &Binning) -> Result<(Vec<usize>, Vec<f64>)> {
    let k = batch.len();
    let outside = |n: usize| {
        Error::invalid(format!("{n} of {k} samples fall outside every bin"))
    };
    match bins {
        Binning::Regions(regions) => {
            if regions.is_empty() {
                return Err(Error::invalid("region binning has no bins"));
            }
            let index: HashMap<&ActivationPattern, usize> =
                regions.iter().enumerate().map(|(i, r)| (&r.pattern, i)).collect();
            if batch.latents.ncols() != net.latent_dim() {
                return Err(Error::DimensionMismatch {
                    context: "batch latent dimension",
                    expected: net.latent_dim(),
                    found: batch.latents.ncols(),
                });
            }
            let mut observed = vec![0; regions.len()];
            let mut missing = 0;
            for i in 0..k {
                let z = batch.latent(i);
                match index.get(&net.pattern_unchecked(&z)) {
                    Some(&b) => observed[b] += 1,
                    None => missing += 1,
                }
            }
            if missing > 0 {
                return Err(outside(missing));
            }
            Ok((observed, regions.iter().map(RegionBin::image_volume).collect()))
        }
        Binning::Intervals { edges, support } => {
            check_edges(edges, "interval edges")?;
            if batch.outputs.ncols() != 1 {
                return Err(Error::DimensionMismatch {
                    context: "interval binning output dimension",
                    expected: 1,
                    found: batch.outputs.ncols(),
                });
            }
            let mut observed = vec![0; edges.len() - 1];
            let mut missing = 0;
            for i in 0..k {
                match locate(edges, batch.outputs[(i, 0)]) {
                    Some(b) => observed[b] += 1,
                    None => missing += 1,
                }
            }
            if missing > 0 {
                return Err(outside(missing));
            }
            let expected = edges
                .windows(2)
                .map(|w| (w[1].min(support.1) - w[0].max(support.0)).max(0.0))
                .collect();
            Ok((observed, expected))
        }
        Binning::Grid2D {
            x_edges,
            y_edges,
            support,
        } => {
            check_edges(x_edges, "grid x edges")?;
            check_edges(y_edges, "grid y edges")?;
            if support.len() < 3 {
                return Err(Error::invalid("grid support polygon needs at least three vertices"));
            }
            if batch.outputs.ncols() != 2 {
                return Err(Error::DimensionMismatch {
                    context: "grid binning output dimension",
                    expected: 2,
                    found: batch.outputs.ncols(),
                });
            }
            let ny = y_edges.len() - 1;
            let mut observed = vec![0; (x_edges.len() - 1) * ny];
            let mut missing = 0;
            for i in 0..k {
                match (
                    locate(x_edges, batch.outputs[(i, 0)]),
                    locate(y_edges, batch.outputs[(i, 1)]),
                ) {
                    (Some(a), Some(b)) => observed[a * ny + b] += 1,
                    _ => missing += 1,
                }
            }
            if missing > 0 {
                return Err(outside(missing));
            }
            let mut expected = Vec::with_capacity(observed.len());
            for xw in x_edges.windows(2) {
                for yw in y_edges.windows(2) {
                    expected.push(clipped_area(support, xw[0], xw[1], yw[0], yw[1]));
                }
            }
            Ok((observed, expected))
        }
    }
}

/// Groups consecutive bins until each group expects at least
/// [`MIN_EXPECTED`] counts; a short tail joins the previous group.
fn merge(observed: &[usize], expected: &[f64]) -> (Vec<usize>, Vec<f64>) {
    let mut obs = Vec::new();
    let mut exp = Vec::new();
    let (mut o, mut e, mut open) = (0, 0.0, false);
    for (&bo, &be) in observed.iter().zip(expected) {
        o += bo;
        e += be;
        open = true;
        if e >= MIN_EXPECTED {
            obs.push(o);
            exp.push(e);
            (o, e, open) = (0, 0.0, false);
        }
    }
    if open {
        match (obs.last_mut(), exp.last_mut()) {
            (Some(lo), Some(le)) => {
                *lo += o;
                *le += e;
            }
            _ => {
                obs.push(o);
                exp.push(e);
            }
        }
    }
    (obs, exp)
}

pub fn uniformity_chi2(net: &CpaNetwork, batch: &SampleBatch, bins: &Binning) -> Result<UniformityReport> {
    let k = batch.len();
    if k == 0 {
        return Err(Error::invalid("uniformity test needs a non-empty batch"));
    }
    let (observed, mass) = raw_bins(net, batch, bins)?;
    let total: f64 = mass.iter().sum();
    if !(total > 0.0 && total.is_finite()) || mass.iter().any(|m| !(*m >= 0.0)) {
        return Err(Error::invalid("bin image volumes must be non-negative with a positive total"));
    }
    let expected: Vec<f64> = mass.iter().map(|m| m / total * k as f64).collect();
    let raw_len = observed.len();
    let (observed, expected) = merge(&observed, &expected);
    if observed.len() < 2 {
        return Err(Error::invalid(format!(
            "only one bin left after merging bins expecting fewer than {MIN_EXPECTED} counts"
        )));
    }
    let statistic: f64 = observed
        .iter()
        .zip(&expected)
        .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
        .sum();
    let dof = observed.len() - 1;
    let p_value = ChiSquared::new(dof as f64)
        .expect("positive degrees of freedom")
        .sf(statistic);
    Ok(UniformityReport {
        statistic,
        p_value,
        dof,
        observed,
        expected,
        merged_bins: raw_len - dof - 1,
    })
}

/// Region bins from `draws` uniform latents on a box: latent volume is the
/// box volume times the hit fraction. Regions are ordered by first visit.
pub fn estimate_region_bins(
    net: &CpaNetwork,
    domain: &LatentDomain,
    draws: usize,
    seed: u64,
) -> Result<Vec<RegionBin>> {
    let s = net.latent_dim();
    domain.validate(s)?;
    let LatentDomain::UniformBox { lo, hi } = domain else {
        return Err(Error::invalid("region bins are estimated on a uniform box"));
    };
    if draws == 0 {
        return Err(Error::invalid("region bin estimation needs draws > 0"));
    }
    let box_volume: f64 = lo.iter().zip(hi).map(|(l, h)| h - l).product();
    let latents = draw_latents(domain, s, draws, seed);
    let patterns: Vec<ActivationPattern> =
        latents.par_chunks(s).map(|z| net.pattern_unchecked(z)).collect();

    let mut order: Vec<ActivationPattern> = Vec::new();
    let mut hits: HashMap<ActivationPattern, usize> = HashMap::new();
    for p in patterns {
        let e = hits.entry(p.clone()).or_insert(0);
        if *e == 0 {
            order.push(p);
        }
        *e += 1;
    }
    order
        .into_iter()
        .map(|pattern| {
            let affine = net.affine_for_pattern(&pattern)?;
            let sigma = volume_scalar(&affine.a)?.sigma();
            let latent_volume = box_volume * hits[&pattern] as f64 / draws as f64;
            Ok(RegionBin {
                pattern,
                latent_volume,
                sigma,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_io::{make_toy, ToySpec};
    use crate::sampling::standard_sample;

    #[test]
    fn clipping_areas() {
        let tri = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        assert!((clipped_area(&tri, 0.0, 1.0, 0.0, 1.0) - 0.5).abs() < 1e-15);
        assert!((clipped_area(&tri, 0.0, 0.5, 0.0, 0.5) - 0.25).abs() < 1e-15);
        assert!((clipped_area(&tri, 0.5, 1.0, 0.5, 1.0)).abs() < 1e-15);
        let total: f64 = (0..4)
            .flat_map(|i| (0..4).map(move |j| (i, j)))
            .map(|(i, j)| clipped_area(&tri, i as f64 / 4.0, (i + 1) as f64 / 4.0, j as f64 / 4.0, (j + 1) as f64 / 4.0))
            .sum();
        assert!((total - 0.5).abs() < 1e-14);
    }

    #[test]
    fn merging_keeps_totals() {
        let (o, e) = merge(&[1, 2, 3, 4, 0], &[1.0, 2.0, 3.0, 10.0, 0.5]);
        assert_eq!(o, vec![6, 4]);
        assert_eq!(e, vec![6.0, 10.5]);
    }

    #[test]
    fn locate_closes_last_bin() {
        let e = [0.0, 0.5, 1.0];
        assert_eq!(locate(&e, 0.0), Some(0));
        assert_eq!(locate(&e, 0.5), Some(1));
        assert_eq!(locate(&e, 1.0), Some(1));
        assert_eq!(locate(&e, 1.5), None);
    }

    #[test]
    fn standard_sampling_on_biased_line_is_rejected() {
        let net = make_toy(&ToySpec::TwoRegion1D { slope_neg: 0.5, slope_pos: 1.0 }).unwrap();
        let batch = standard_sample(&net, &LatentDomain::symmetric_box(1, 1.0), 50_000, 3).unwrap();
        let bins = Binning::Intervals {
            edges: vec![-0.5, 0.0, 1.0],
            support: (-0.5, 1.0),
        };
        let rep = uniformity_chi2(&net, &batch, &bins).unwrap();
        assert!(rep.p_value < 1e-6, "{rep:?}");
        assert_eq!(rep.dof, 1);
    }

    #[test]
    fn samples_outside_bins_are_an_error() {
        let net = make_toy(&ToySpec::TwoRegion1D { slope_neg: 0.5, slope_pos: 1.0 }).unwrap();
        let batch = standard_sample(&net, &LatentDomain::symmetric_box(1, 1.0), 100, 3).unwrap();
        let bins = Binning::Intervals {
            edges: vec![0.0, 1.0],
            support: (0.0, 1.0),
        };
        assert!(uniformity_chi2(&net, &batch, &bins).is_err());
    }

    #[test]
    fn estimated_bins_on_two_regions() {
        let net = make_toy(&ToySpec::TwoRegion1D { slope_neg: 0.5, slope_pos: 1.0 }).unwrap();
        let bins = estimate_region_bins(&net, &LatentDomain::symmetric_box(1, 1.0), 20_000, 1).unwrap();
        assert_eq!(bins.len(), 2);
        let total: f64 = bins.iter().map(|b| b.latent_volume).sum();
        assert!((total - 2.0).abs() < 1e-12);
        for b in &bins {
            assert!((b.latent_volume - 1.0).abs() < 0.05);
        }
    }
}

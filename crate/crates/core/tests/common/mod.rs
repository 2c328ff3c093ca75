#![allow(dead_code)]

use magnet::diagnostics::RegionBin;
use magnet::{geometry::volume_scalar, CpaNetwork};
use nalgebra::DMatrix;
use rand::Rng;

/// Region bins from one representative latent per region and the exact latent
/// volume of each region.
pub fn exact_bins(net: &CpaNetwork, regions: &[(Vec<f64>, f64)]) -> Vec<RegionBin> {
    regions
        .iter()
        .map(|(z, vol)| {
            let r = net.region_affine(z).unwrap();
            RegionBin {
                sigma: volume_scalar(&r.a).unwrap().sigma(),
                pattern: r.pattern,
                latent_volume: *vol,
            }
        })
        .collect()
}

/// Two halves of `[-1, 1]`.
pub fn two_region_bins(net: &CpaNetwork) -> Vec<RegionBin> {
    exact_bins(net, &[(vec![-0.5], 1.0), (vec![0.5], 1.0)])
}

/// The halves `v <= u` and `v > u` of the unit square.
pub fn triangle_bins(net: &CpaNetwork) -> Vec<RegionBin> {
    exact_bins(net, &[(vec![0.7, 0.2], 0.5), (vec![0.2, 0.7], 0.5)])
}

/// `m` uniform points on the triangle `(0,0), (1,0), (0,1)` by rejection.
pub fn uniform_triangle(m: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let mut pts = Vec::with_capacity(2 * m);
    while pts.len() < 2 * m {
        let (x, y): (f64, f64) = (rng.random(), rng.random());
        if x + y <= 1.0 {
            pts.extend([x, y]);
        }
    }
    DMatrix::from_row_slice(m, 2, &pts)
}

/// Kolmogorov-Smirnov statistic of `xs` against U(0, 1) and its asymptotic
/// p-value.
pub fn ks_uniform(xs: &[f64]) -> (f64, f64) {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let d = v
        .iter()
        .enumerate()
        .map(|(i, &x)| ((i as f64 + 1.0) / n - x).max(x - i as f64 / n))
        .fold(0.0, f64::max);
    // Kolmogorov distribution with the Stephens small-sample correction
    let t = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    let p: f64 = (1..=100)
        .map(|k| {
            let k = k as f64;
            2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * t * t).exp()
        })
        .sum();
    (d, p.clamp(0.0, 1.0))
}

/// Fraction of rows with a negative first output coordinate.
pub fn left_fraction(outputs: &DMatrix<f64>) -> f64 {
    (0..outputs.nrows()).filter(|&i| outputs[(i, 0)] < 0.0).count() as f64 / outputs.nrows() as f64
}

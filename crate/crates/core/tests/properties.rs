use magnet::diagnostics::epsball_counts;
use magnet::geometry::{log_singular_product, volume_scalar};
use magnet::{make_toy, CpaNetwork, ToySpec};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn matrix(max_s: usize, max_d: usize) -> impl Strategy<Value = DMatrix<f64>> {
    (1..=max_s)
        .prop_flat_map(move |s| (Just(s), s..=max_d))
        .prop_flat_map(|(s, d)| {
            prop::collection::vec(-3.0..3.0f64, s * d).prop_map(move |v| DMatrix::from_vec(d, s, v))
        })
        .prop_filter("well conditioned", |a| {
            let sv = a.singular_values();
            sv[sv.len() - 1] > 1e-3 * sv[0]
        })
}

fn orthogonal(d: usize, entries: &[f64]) -> DMatrix<f64> {
    DMatrix::from_column_slice(d, d, &entries[..d * d]).qr().q()
}

fn random_net() -> impl Strategy<Value = CpaNetwork> {
    (1..=3usize, 0..1000u64).prop_map(|(s, seed)| {
        make_toy(&ToySpec::random_cpa(s, s + 1, vec![10, 10], seed)).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn orthogonal_invariance(a in matrix(4, 7), q in prop::collection::vec(-1.0..1.0f64, 49)) {
        prop_assume!(q.iter().any(|v| v.abs() > 0.1));
        let qm = orthogonal(a.nrows(), &q);
        let before = volume_scalar(&a).unwrap().log_sigma;
        let after = volume_scalar(&(qm * &a)).unwrap().log_sigma;
        prop_assert!((before - after).abs() < 1e-10);
    }

    #[test]
    fn scaling_law(a in matrix(4, 7), c in 0.05..20.0f64) {
        let s = a.ncols() as f64;
        let base = volume_scalar(&a).unwrap().log_sigma;
        let scaled = volume_scalar(&(&a * c)).unwrap().log_sigma;
        prop_assert!((scaled - base - s * c.ln()).abs() < 1e-10);
    }

    #[test]
    fn pseudo_inverse_reciprocity(a in matrix(4, 7)) {
        let pinv = a.clone().pseudo_inverse(1e-14).unwrap();
        let fwd = volume_scalar(&a).unwrap().log_sigma;
        let inv = log_singular_product(&pinv).unwrap().log_sigma;
        prop_assert!((fwd + inv).abs() < 1e-8);
    }

    #[test]
    fn square_case_is_abs_det(a in matrix(5, 5).prop_filter("square", |a| a.is_square())) {
        let det = a.determinant().abs();
        let sigma = volume_scalar(&a).unwrap().sigma();
        prop_assert!((sigma - det).abs() <= 1e-8 * det);
    }

    #[test]
    fn local_linearity(net in random_net(), z in prop::collection::vec(-2.0..2.0f64, 3), dz in prop::collection::vec(-1.0..1.0f64, 3)) {
        let s = net.latent_dim();
        let z = &z[..s];
        let region = net.region_affine(z).unwrap();
        // shrink the step until it stays in the region
        let mut t = 1e-2;
        let moved = loop {
            let w: Vec<f64> = z.iter().zip(&dz).map(|(a, b)| a + t * b).collect();
            if net.activation_pattern(&w).unwrap() == region.pattern || t < 1e-12 {
                break w;
            }
            t *= 0.5;
        };
        prop_assume!(net.activation_pattern(&moved).unwrap() == region.pattern);
        let f = net.forward(&moved).unwrap();
        prop_assert!((region.apply(&moved) - &f).norm() <= 1e-12 * f.norm().max(1.0));
    }

    #[test]
    fn continuity_across_boundaries(net in random_net(), a in prop::collection::vec(-2.0..2.0f64, 3), b in prop::collection::vec(-2.0..2.0f64, 3)) {
        let s = net.latent_dim();
        let (a, b) = (&a[..s], &b[..s]);
        let at = |t: f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect() };
        // bisect to a point where the pattern changes along the segment
        let (mut lo, mut hi) = (0.0, 1.0);
        let start = net.activation_pattern(&at(lo)).unwrap();
        prop_assume!(net.activation_pattern(&at(hi)).unwrap() != start);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if net.activation_pattern(&at(mid)).unwrap() == start {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let left = net.region_affine(&at(lo)).unwrap();
        let right = net.region_affine(&at(hi)).unwrap();
        // both affine pieces agree at the crossing point
        let x = at(0.5 * (lo + hi));
        let (fl, fr) = (left.apply(&x), right.apply(&x));
        prop_assert!((fl - &fr).norm() <= 1e-9 * fr.norm().max(1.0));
    }

    #[test]
    fn epsball_is_permutation_invariant_and_monotone(
        pts in prop::collection::vec(0.0..1.0f64, 40..80),
        refs in prop::collection::vec(0.0..1.0f64, 10..20),
        eps in 0.01..0.3f64,
    ) {
        let samples = DMatrix::from_row_slice(pts.len() / 2, 2, &pts[..pts.len() / 2 * 2]);
        let reference = DMatrix::from_row_slice(refs.len() / 2, 2, &refs[..refs.len() / 2 * 2]);
        let base = epsball_counts(&reference, &samples, eps).unwrap();
        let n = samples.nrows();
        let reversed = DMatrix::from_fn(n, 2, |i, j| samples[(n - 1 - i, j)]);
        prop_assert_eq!(&epsball_counts(&reference, &reversed, eps).unwrap().counts, &base.counts);
        let wider = epsball_counts(&reference, &samples, eps * 1.5).unwrap();
        prop_assert!(wider.counts.iter().zip(&base.counts).all(|(w, b)| w >= b));
        prop_assert_eq!(base.histogram.iter().sum::<usize>(), reference.nrows());
    }
}

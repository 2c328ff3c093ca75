use magnet::density::{
    density_at_latent, density_at_point, gaussian_closed_form_log_density,
    uniform_closed_form_density, ON_MANIFOLD_TOL,
};
use magnet::geometry::volume_scalar;
use magnet::{make_toy, pushforward_entropy, CpaNetwork, Error, LatentPrior, ToySpec};
use nalgebra::{DMatrix, DVector};

fn two_region() -> CpaNetwork {
    make_toy(&ToySpec::TwoRegion1D {
        slope_neg: 0.5,
        slope_pos: 1.0,
    })
    .unwrap()
}

#[test]
fn one_dimensional_density_integrates_to_one() {
    let net = two_region();
    let prior = LatentPrior::StandardGaussian { dim: 1 };
    let candidates = [vec![-1.0], vec![1.0]];
    let (lo, hi, n) = (-8.0, 8.0, 16_000);
    let h = (hi - lo) / n as f64;
    let integral: f64 = (0..n)
        .map(|i| {
            let x = lo + (i as f64 + 0.5) * h;
            density_at_point(&net, &prior, &[x], &candidates, ON_MANIFOLD_TOL)
                .unwrap()
                .density()
                * h
        })
        .sum();
    assert!((integral - 1.0).abs() < 1e-3, "{integral}");
}

#[test]
fn triangle_density_integrates_to_one() {
    let net = make_toy(&ToySpec::biased_triangle()).unwrap();
    let prior = LatentPrior::UniformBox {
        lo: vec![0.0; 2],
        hi: vec![1.0; 2],
    };
    let candidates = [vec![0.7, 0.2], vec![0.2, 0.7]];
    let n = 300;
    let h = 1.0 / n as f64;
    let mut integral = 0.0;
    for i in 0..n {
        for j in 0..n {
            let x = [(i as f64 + 0.5) * h, (j as f64 + 0.5) * h];
            match density_at_point(&net, &prior, &x, &candidates, ON_MANIFOLD_TOL) {
                Ok(v) => integral += v.density() * h * h,
                Err(Error::NotOnManifold { .. }) => {}
                Err(e) => panic!("{e}"),
            }
        }
    }
    // cells cut by the hypotenuse are counted whole or not at all
    assert!((integral - 1.0).abs() < 0.01, "{integral}");
}

#[test]
fn density_times_volume_is_the_latent_density() {
    let net = make_toy(&ToySpec::random_cpa(2, 5, vec![12, 12], 4)).unwrap();
    let prior = LatentPrior::StandardGaussian { dim: 2 };
    for k in 0..50 {
        let z = [((k * 37) % 17) as f64 / 8.0 - 1.0, ((k * 11) % 13) as f64 / 6.0 - 1.0];
        let v = density_at_latent(&net, &prior, &z).unwrap();
        let lv = volume_scalar(&net.region_affine(&z).unwrap().a).unwrap().log_sigma;
        assert!((v.log_p + lv - prior.log_density(&z)).abs() < 1e-12);
    }
}

#[test]
fn closed_forms_match_the_generic_path() {
    let net = make_toy(&ToySpec::random_cpa(3, 4, vec![10], 8)).unwrap();
    let gauss = LatentPrior::StandardGaussian { dim: 3 };
    let uniform = LatentPrior::UniformBox {
        lo: vec![-1.0; 3],
        hi: vec![1.0; 3],
    };
    let mut checked = 0;
    for k in 0..40 {
        let z = [0.9 * (k as f64 * 0.7).sin(), 0.8 * (k as f64 * 1.3).cos(), 0.025 * k as f64 - 0.5];
        let region = net.region_affine(&z).unwrap();
        let x: Vec<f64> = net.forward(&z).unwrap().iter().copied().collect();
        // narrow ReLU layers leave some regions with fewer than 3 live units
        let generic = match density_at_latent(&net, &gauss, &z) {
            Ok(v) => v.log_p,
            Err(Error::RankDeficient(_)) => continue,
            Err(e) => panic!("{e}"),
        };
        checked += 1;
        let closed = gaussian_closed_form_log_density(&region, &x).unwrap();
        assert!((generic - closed).abs() < 1e-9);
        let generic_u = density_at_latent(&net, &uniform, &z).unwrap().density();
        let closed_u = uniform_closed_form_density(&region, 8.0).unwrap();
        assert!((generic_u - closed_u).abs() <= 1e-9 * closed_u);
    }
    assert!(checked >= 10, "{checked}");
}

#[test]
fn sqrt3_linear_net_has_density_inverse_sqrt3() {
    let a = DMatrix::from_row_slice(2, 2, &[3f64.sqrt(), 0.0, 0.0, 1.0]);
    let net = CpaNetwork::linear(a, DVector::zeros(2)).unwrap();
    let prior = LatentPrior::UniformBox {
        lo: vec![0.0; 2],
        hi: vec![1.0; 2],
    };
    let v = density_at_point(&net, &prior, &[0.2, 0.3], &[vec![0.5, 0.5]], ON_MANIFOLD_TOL).unwrap();
    assert!((v.density() - 1.0 / 3f64.sqrt()).abs() < 1e-14);
}

#[test]
fn entropy_matches_closed_form_on_two_regions() {
    let est = pushforward_entropy(
        &two_region(),
        &LatentPrior::UniformBox {
            lo: vec![-1.0],
            hi: vec![1.0],
        },
        200_000,
        3,
    )
    .unwrap();
    let target = 0.5 * 2f64.ln();
    assert!((est.entropy - target).abs() <= 3.0 * est.std_error);
    assert!(est.warning.is_none());
}

#[test]
fn off_manifold_points_are_rejected() {
    let net = make_toy(&ToySpec::random_cpa(1, 3, vec![6], 2)).unwrap();
    let prior = LatentPrior::StandardGaussian { dim: 1 };
    let res = density_at_point(&net, &prior, &[10.0, -10.0, 10.0], &[vec![0.0], vec![1.0]], ON_MANIFOLD_TOL);
    assert!(matches!(res, Err(Error::NotOnManifold { .. })));
}

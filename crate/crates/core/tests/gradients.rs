use exemplar_core::gd::{gradient_check, GRADIENT_FLOOR};
use exemplar_core::{
    composite_gradient, finite_diff_gradient, rng_streams, BuiltinFixture, CentroidSoftmaxModel, GdConfig,
    IdentityGenerator, LatentVector,
};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn analytic_matches_central_differences_on_every_differentiable_fixture() {
    let u = GdConfig::default().u;
    for (f_index, fixture) in BuiltinFixture::DIFFERENTIABLE.into_iter().enumerate() {
        let p = fixture.build();
        for i in 0..25u64 {
            let mut rng = rng_streams(0x6AD, (f_index as u64) << 32 | i);
            let z: Vec<f64> = (0..fixture.latent_dim()).map(|_| rng.random_range(-u..=u)).collect();
            let z = LatentVector::new(z).unwrap();
            for target in 0..p.oracle.num_classes() {
                let check = gradient_check(&*p.generator, &*p.oracle, &z, target, 1e-5).unwrap();
                assert!(
                    check.relative_error <= 1e-5,
                    "{fixture} z={z:?} target={target}: {check:?}"
                );
            }
        }
    }
}

#[test]
fn fitness_matches_the_forward_pass() {
    for fixture in BuiltinFixture::DIFFERENTIABLE {
        let p = fixture.build();
        let z = LatentVector::new(vec![0.3; fixture.latent_dim()]).unwrap();
        let (fitness, _) = composite_gradient(&*p.generator, &*p.oracle, &z, 1).unwrap();
        let x = p.generator.decode_batch(std::slice::from_ref(&z)).unwrap();
        let direct = p.oracle.predict_batch(&x).unwrap()[0].as_slice()[1];
        assert!((fitness - direct).abs() <= 1e-12, "{fixture}");
    }
}

/// Centroid probability in closed form, evaluated without the model code.
fn naive_centroid_p(centroids: &[Vec<f64>], tau: f64, x: &[f64], t: usize) -> f64 {
    let logits: Vec<f64> = centroids
        .iter()
        .map(|c| -c.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / tau)
        .collect();
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let denom: f64 = logits.iter().map(|l| (l - m).exp()).sum();
    (logits[t] - m).exp() / denom
}

proptest! {
    #[test]
    fn centroid_gradient_matches_naive_differences(
        cs in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 3), 2..5),
        tau in 0.5f64..8.0,
        x in prop::collection::vec(-3.0f64..3.0, 3),
    ) {
        let model = CentroidSoftmaxModel::new(cs.clone(), tau).unwrap();
        let gen = IdentityGenerator::new(3);
        let z = LatentVector::new(x.clone()).unwrap();
        let (p, g) = composite_gradient(&gen, &model, &z, 0).unwrap();
        prop_assert!((p - naive_centroid_p(&cs, tau, &x, 0)).abs() < 1e-12);
        let numeric = finite_diff_gradient(|y| naive_centroid_p(&cs, tau, y, 0), &x, 1e-5);
        let diff: f64 = g.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale: f64 = g.iter().map(|a| a * a).sum::<f64>().sqrt().max(GRADIENT_FLOOR);
        prop_assert!(diff / scale < 1e-5, "p={p} g={g:?} numeric={numeric:?}");
    }
}

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vecreduce::random::{gaussian_mixture_function, random_measure};
use vecreduce::spaces::{Exponent, SpaceDescriptor, VectorFunction};
use vecreduce::tensor::{
    injective_norm, iterated_norm, n_projective_norm, projective_collapse_bound, InjectiveOptions, Order, ProjectiveOptions, TensorPair,
};

fn exponent(i: usize) -> Exponent {
    Exponent::new([1.0, 1.5, 2.0, 4.0, f64::INFINITY][i]).unwrap()
}

fn pair(p: Exponent, q: Exponent, n: usize, seed: u64) -> TensorPair {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs = SpaceDescriptor::lattice(p, random_measure(&mut rng, 5));
    let ys = SpaceDescriptor::lattice(q, random_measure(&mut rng, 6));
    TensorPair::new(
        gaussian_mixture_function(&mut rng, &xs, n),
        gaussian_mixture_function(&mut rng, &ys, n),
    )
    .unwrap()
}

fn row_norm(f: &VectorFunction, i: usize) -> f64 {
    let r: Vec<f64> = f.components().row(i).iter().copied().collect();
    f.space().norm(&r).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// A single elementary tensor has every reasonable norm equal to the
    /// product of the factor norms.
    #[test]
    fn rank_one_norms_agree(seed in any::<u64>(), pi in 0usize..5, qi in 0usize..5) {
        let t = pair(exponent(pi), exponent(qi), 1, seed);
        let expect = row_norm(t.x(), 0) * row_norm(t.y(), 0);
        let tol = 1e-9 * expect;
        prop_assert!((iterated_norm(&t, Order::XOuter) - expect).abs() <= tol);
        prop_assert!((iterated_norm(&t, Order::YOuter) - expect).abs() <= tol);
        let inj = injective_norm(&t, &InjectiveOptions::default()).unwrap().value;
        let proj = n_projective_norm(&t, &ProjectiveOptions::default()).unwrap().value;
        prop_assert!((inj - expect).abs() <= 1e-6 * expect, "injective {} vs {}", inj, expect);
        prop_assert!((proj - expect).abs() <= 1e-6 * expect, "projective {} vs {}", proj, expect);
    }

    #[test]
    fn injective_below_projective_below_identity_cost(seed in any::<u64>(), n in 2usize..4, pi in 0usize..5, qi in 0usize..5) {
        let t = pair(exponent(pi), exponent(qi), n, seed);
        let inj = injective_norm(&t, &InjectiveOptions::default()).unwrap().value;
        let proj = n_projective_norm(&t, &ProjectiveOptions::default()).unwrap();
        let identity: f64 = (0..n).map(|i| row_norm(t.x(), i) * row_norm(t.y(), i)).sum();
        prop_assert!(inj <= proj.value * (1.0 + 1e-9));
        prop_assert!(proj.value <= identity * (1.0 + 1e-12));
        prop_assert!((proj.identity_value - identity).abs() <= 1e-12 * identity);
    }

    #[test]
    fn collapse_bound_decreases(p in 0.05f64..0.95, mass in 0.01f64..10.0, k in 1u64..10_000) {
        let a = projective_collapse_bound(p, k, mass, 1.0).unwrap();
        let b = projective_collapse_bound(p, k + 1, mass, 1.0).unwrap();
        prop_assert!(b < a);
    }
}

#[test]
fn collapse_bound_rejects_convex_exponents() {
    assert!(projective_collapse_bound(1.0, 3, 1.0, 1.0).is_err());
    assert!(projective_collapse_bound(0.5, 0, 1.0, 1.0).is_err());
    assert_eq!(projective_collapse_bound(0.5, 1, 4.0, 2.0).unwrap(), 32.0);
}

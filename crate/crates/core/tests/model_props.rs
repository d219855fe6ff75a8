mod common;

use common::{dense_nll, dense_term_grad, random_dataset};
use proptest::prelude::*;
use zigzag_core::{compute_bound_constants, likelihood_grad_full, likelihood_grad_term, prior_grad, PriorSpec};

fn position(p: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, p)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn full_gradient_matches_central_differences(seed in 0u64..1000, xi in position(4)) {
        let (data, rows, y) = random_dataset(seed, 12, 4, 0.6);
        let h = 1e-5;
        for i in 0..4 {
            let (mut up, mut dn) = (xi.clone(), xi.clone());
            up[i] += h;
            dn[i] -= h;
            let fd = (dense_nll(&rows, &y, &up) - dense_nll(&rows, &y, &dn)) / (2.0 * h);
            let g = likelihood_grad_full(&data, i, &xi).unwrap();
            prop_assert!((g - fd).abs() <= 1e-5 * (1.0 + fd.abs()), "dim {i}: {g} vs {fd}");
        }
    }

    #[test]
    fn term_gradients_match_dense_oracle_and_sum(seed in 0u64..1000, xi in position(3)) {
        let (data, rows, y) = random_dataset(seed, 9, 3, 0.5);
        for i in 0..3 {
            let mut sum = 0.0;
            for (j, row) in rows.iter().enumerate() {
                let g = likelihood_grad_term(&data, j, i, &xi).unwrap();
                prop_assert!((g - dense_term_grad(row, y[j], &xi, i)).abs() < 1e-12);
                sum += g;
            }
            prop_assert!((sum - likelihood_grad_full(&data, i, &xi).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn term_gradients_respect_bounds_and_lipschitz(
        seed in 0u64..1000, a in position(3), b in position(3),
    ) {
        let (data, _, _) = random_dataset(seed, 10, 3, 0.7);
        let consts = compute_bound_constants(&data);
        let dist = a.iter().zip(&b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
        for i in 0..3 {
            for j in 0..10 {
                let ga = likelihood_grad_term(&data, j, i, &a).unwrap();
                let gb = likelihood_grad_term(&data, j, i, &b).unwrap();
                prop_assert!(ga.abs() <= consts.grad_bound_at(&data, i, j) + 1e-15);
                prop_assert!((ga - gb).abs() <= consts.lipschitz_at(&data, i, j) * dist + 1e-12);
            }
        }
    }

    #[test]
    fn prior_gradients_match_differences(x in -4.0f64..4.0) {
        prop_assume!(x.abs() > 1e-3);
        for prior in [
            PriorSpec::gaussian(2.0).unwrap(),
            PriorSpec::cauchy(1.5).unwrap(),
            PriorSpec::laplace(0.7).unwrap(),
            PriorSpec::gdp(3.0, 1.0).unwrap(),
        ] {
            let h = 1e-6;
            let fd = (prior.potential_1d(x + h) - prior.potential_1d(x - h)) / (2.0 * h);
            let g = prior_grad(&prior, 0, &[x]);
            prop_assert!((g - fd).abs() < 1e-6 * (1.0 + fd.abs()), "{prior:?} at {x}: {g} vs {fd}");
        }
    }
}

#[test]
fn potential_adds_prior_to_likelihood() {
    let (data, rows, y) = random_dataset(3, 15, 3, 0.8);
    let prior = PriorSpec::gaussian(4.0).unwrap();
    let xi = [0.3, -1.2, 0.8];
    let want = dense_nll(&rows, &y, &xi) + xi.iter().map(|x| x * x / 8.0).sum::<f64>();
    let got = data.potential(&prior, &xi);
    // Potentials are defined up to an additive constant.
    let got0 = data.potential(&prior, &[0.0; 3]);
    let want0 = dense_nll(&rows, &y, &[0.0; 3]);
    assert!(((got - got0) - (want - want0)).abs() < 1e-10);
}

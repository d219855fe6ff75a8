mod common;

use common::ks_distance;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use zigzag_core::{first_arrival, min_clock, ArrivalDraw, ClockId, ClockKind, Error, RateBound};

proptest! {
    #[test]
    fn arrival_integrates_to_the_draw(a in -5.0f64..5.0, b in 0.0f64..5.0, e in 1e-6f64..20.0) {
        prop_assume!(b > 0.0 || a > 0.0);
        let bound = if b == 0.0 { RateBound::constant(a) } else { RateBound::linear(a, b) };
        let tau = first_arrival(bound, e).unwrap();
        prop_assert!(tau.is_finite() && tau >= 0.0);
        prop_assert!((bound.integrated(tau) - e).abs() <= 1e-9 * (1.0 + e));
    }

    #[test]
    fn later_draws_arrive_later(a in 0.0f64..3.0, b in 0.0f64..3.0, e1 in 0.01f64..5.0, de in 0.0f64..5.0) {
        prop_assume!(a > 0.0 || b > 0.0);
        let bound = RateBound::linear(a, b);
        prop_assert!(first_arrival(bound, e1).unwrap() <= first_arrival(bound, e1 + de).unwrap());
    }
}

#[test]
fn zero_rate_never_arrives() {
    assert_eq!(first_arrival(RateBound::constant(0.0), 1.0).unwrap(), f64::INFINITY);
    assert_eq!(first_arrival(RateBound::constant(-2.0), 1.0).unwrap(), f64::INFINITY);
    assert!(first_arrival(RateBound::linear(1.0, -1.0), 1.0).is_err());
    assert!(first_arrival(RateBound::constant(1.0), 0.0).is_err());
}

/// The earliest of independent constant-rate clocks is exponential with the
/// summed rate, and clock `k` wins with probability `a_k / Σa`.
#[test]
fn competing_clocks_superpose() {
    let rates = [0.5, 1.0, 2.5, 0.0];
    let total: f64 = rates.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let draws = 100_000;
    let mut wins = [0usize; 4];
    let mut taus = Vec::with_capacity(draws);
    for _ in 0..draws {
        let clocks: Vec<ArrivalDraw> = rates
            .iter()
            .enumerate()
            .map(|(dim, &a)| {
                let bound = RateBound::constant(a);
                let tau = first_arrival(bound, rng.sample(Exp1)).unwrap();
                ArrivalDraw::new(tau, ClockId { dim, kind: ClockKind::Likelihood }, bound)
            })
            .collect();
        let best = min_clock(&clocks).unwrap();
        wins[best.clock.dim] += 1;
        taus.push(best.tau);
    }
    assert!(ks_distance(taus, |t| 1.0 - (-total * t).exp()) < 0.01);
    assert_eq!(wins[3], 0);
    for k in 0..3 {
        let p = rates[k] / total;
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        assert!((wins[k] as f64 / draws as f64 - p).abs() < 4.5 * se, "clock {k}");
    }
}

#[test]
fn ties_prefer_prior_then_lower_dimension() {
    let bound = RateBound::constant(1.0);
    let d = |dim, kind| ArrivalDraw::new(1.0, ClockId { dim, kind }, bound);
    let best = min_clock(&[d(2, ClockKind::Likelihood), d(3, ClockKind::Prior), d(1, ClockKind::Prior)]).unwrap();
    assert_eq!(best.clock, ClockId { dim: 1, kind: ClockKind::Prior });
    let never = ArrivalDraw::new(f64::INFINITY, ClockId { dim: 0, kind: ClockKind::Prior }, bound);
    assert!(matches!(min_clock(&[never]), Err(Error::ProcessFrozen)));
}

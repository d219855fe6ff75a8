mod common;

use common::random_dataset;
use zigzag_core::diagnostics::{batch_means, integrate_moments, window_moments, TrajectoryMoments};
use zigzag_core::mode::{posterior_mode, ModeOptions};
use zigzag_core::{
    run, Dataset, Precondition, PriorSpec, RecordMode, RunConfig, SchemeSpec, Skeleton, SubsamplingScheme,
    ZigZagState,
};

/// Posterior mean and variance of a one-dimensional target by midpoint quadrature.
fn quadrature_1d(data: &Dataset, prior: &PriorSpec, lo: f64, hi: f64, cells: usize) -> (f64, f64) {
    let h = (hi - lo) / cells as f64;
    let pts: Vec<f64> = (0..cells).map(|k| lo + (k as f64 + 0.5) * h).collect();
    let u: Vec<f64> = pts.iter().map(|&x| data.potential(prior, &[x])).collect();
    let floor = u.iter().copied().fold(f64::INFINITY, f64::min);
    let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for (x, u) in pts.iter().zip(&u) {
        let w = (floor - u).exp();
        z += w;
        m1 += w * x;
        m2 += w * x * x;
    }
    (m1 / z, m2 / z - (m1 / z) * (m1 / z))
}

fn sample_1d(spec: &str, prior: &PriorSpec, seed: u64) -> (Skeleton, f64, f64) {
    let (data, _, _) = random_dataset(5, 30, 1, 1.0);
    let mode = posterior_mode(&data, prior, ModeOptions::default()).unwrap();
    let scheme = SubsamplingScheme::build(&data, spec.parse::<SchemeSpec>().unwrap(), Some(&mode)).unwrap();
    let sk = run(&data, prior, &scheme, &RunConfig::new(300_000, seed), ZigZagState::at(mode)).unwrap();
    let (mean, var) = quadrature_1d(&data, prior, -15.0, 15.0, 20_000);
    (sk, mean, var)
}

#[test]
fn one_dimensional_runs_match_quadrature() {
    let cases = [
        ("uniform", PriorSpec::gaussian(1.0).unwrap(), 1),
        ("importance,cv", PriorSpec::gaussian(1.0).unwrap(), 2),
        ("stratified,m=3", PriorSpec::laplace(1.0).unwrap(), 3),
        ("importance,m=2", PriorSpec::cauchy(1.0).unwrap(), 4),
    ];
    for (spec, prior, seed) in cases {
        let (sk, mean, var) = sample_1d(spec, &prior, seed);
        let bm = batch_means(&sk, 40).unwrap();
        let zm = (bm.mean[0] - mean) / bm.mean_se[0];
        let zv = (bm.variance[0] - var) / bm.variance_se[0];
        assert!(zm.abs() < 4.5 && zv.abs() < 4.5, "{spec}: mean z {zm:.2}, var z {zv:.2}");
    }
}

#[test]
fn window_moments_add_up_to_the_whole() {
    let (sk, _, _) = sample_1d("importance", &PriorSpec::gaussian(1.0).unwrap(), 11);
    let whole = integrate_moments(&sk);
    let merged = window_moments(&sk, 7).unwrap().iter().fold(TrajectoryMoments::new(1), |mut acc, w| {
        acc.merge(w);
        acc
    });
    assert!((whole.time - merged.time).abs() < 1e-9 * whole.time);
    assert!((whole.m1[0] - merged.m1[0]).abs() < 1e-9 * (1.0 + whole.m1[0].abs()));
    assert!((whole.m2[0] - merged.m2[0]).abs() < 1e-9 * whole.m2[0]);
}

#[test]
fn trajectory_is_continuous_and_replays() {
    let (data, _, _) = random_dataset(8, 50, 3, 0.5);
    let prior = PriorSpec::gaussian(1.0).unwrap();
    let spec: SchemeSpec = "uniform,cv,m=2".parse().unwrap();
    let mode = posterior_mode(&data, &prior, ModeOptions::default()).unwrap();
    let scheme = SubsamplingScheme::build(&data, spec, Some(&mode)).unwrap();
    let cfg = RunConfig::new(20_000, 4)
        .with_record_mode(RecordMode::FullState)
        .with_precondition(Precondition::Adaptive { update_every: 50, freeze_after: 10_000 });
    let a = run(&data, &prior, &scheme, &cfg, ZigZagState::at(mode.clone())).unwrap();
    let b = run(&data, &prior, &scheme, &cfg, ZigZagState::at(mode)).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert!(a.stats.frozen_at.is_some());
    assert!(!a.speed_updates.is_empty());
    // Positions at event times agree from both sides of the event.
    for e in a.events.iter().filter(|e| e.accepted).take(200) {
        let before = a.state_at(e.t - 1e-9).unwrap();
        let after = a.state_at(e.t + 1e-9).unwrap();
        for d in 0..3 {
            assert!((before.xi[d] - after.xi[d]).abs() < 1e-6);
        }
    }
    let end = a.state_at(a.end_time()).unwrap();
    for d in 0..3 {
        assert!((end.xi[d] - a.final_state.xi[d]).abs() < 1e-9);
    }
}

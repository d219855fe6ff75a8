//! Exhaustive enumeration of every batch a scheme can draw. Exponential in the
//! batch size; meant for small instances and tests.

use crate::error::{Error, Result};
use crate::model::{grad_full_unchecked, Dataset};

use super::{Batch, BatchEntry, Family, SchemeSpec, SubsamplingScheme};

/// Enumeration refuses to produce more batches than this.
pub const MAX_ENUMERATED_BATCHES: usize = 1 << 20;

/// Every batch for dimension `i` together with its probability.
pub fn enumerate_batches(
    scheme: &SubsamplingScheme,
    data: &Dataset,
    i: usize,
) -> Result<Vec<(Batch, f64)>> {
    if i >= data.p() {
        return Err(Error::usage(format!("dimension {i} out of range")));
    }
    if !scheme.is_active(i) {
        return Err(Error::usage(format!("dimension {i} is inactive")));
    }
    let m = scheme.minibatch();
    // Per slot: the (entry, probability) choices.
    let slots: Vec<Vec<(BatchEntry, f64)>> = match scheme.family() {
        Family::Uniform => {
            let n = data.n();
            let choices: Vec<_> = (0..n)
                .map(|j| {
                    let e = BatchEntry {
                        obs: j,
                        x: data.entry(j, i),
                        scale: n as f64 / m as f64,
                    };
                    (e, 1.0 / n as f64)
                })
                .collect();
            vec![choices; m]
        }
        Family::Importance => {
            let w = scheme.importance_weights(i).expect("active dimension has weights");
            let col = data.column(i);
            let choices: Vec<_> = w
                .support()
                .iter()
                .map(|&k| {
                    let e = BatchEntry {
                        obs: col.index[k],
                        x: col.value[k],
                        scale: 1.0 / (m as f64 * w.weight(k)),
                    };
                    (e, w.weight(k))
                })
                .collect();
            vec![choices; m]
        }
        Family::Stratified => scheme
            .strata(i)
            .expect("stratified scheme has strata")
            .into_iter()
            .map(|s| {
                let size = s.len() as f64;
                s.into_iter()
                    .map(|j| {
                        let e = BatchEntry {
                            obs: j,
                            x: data.entry(j, i),
                            scale: size,
                        };
                        (e, 1.0 / size)
                    })
                    .collect()
            })
            .collect(),
    };

    let total = slots
        .iter()
        .try_fold(1usize, |acc, s| acc.checked_mul(s.len()))
        .filter(|&t| t <= MAX_ENUMERATED_BATCHES)
        .ok_or_else(|| Error::usage("batch enumeration too large"))?;

    let mut out = Vec::with_capacity(total);
    let mut cursor = vec![0usize; slots.len()];
    loop {
        let mut prob = 1.0;
        let entries = cursor
            .iter()
            .zip(&slots)
            .map(|(&c, s)| {
                prob *= s[c].1;
                s[c].0
            })
            .collect();
        out.push((Batch { dim: i, entries }, prob));

        let mut k = slots.len();
        loop {
            if k == 0 {
                return Ok(out);
            }
            k -= 1;
            cursor[k] += 1;
            if cursor[k] < slots[k].len() {
                break;
            }
            cursor[k] = 0;
        }
    }
}

/// `E_B[∂̂_i U^•(ξ, B)]` computed exactly.
pub fn exhaustive_expectation(
    scheme: &SubsamplingScheme,
    data: &Dataset,
    i: usize,
    xi: &[f64],
) -> Result<f64> {
    Ok(enumerate_batches(scheme, data, i)?
        .iter()
        .map(|(b, prob)| prob * scheme.estimate_unchecked(data, xi, b))
        .sum())
}

/// Refreshment rate `γ_i = E[(θ_i ∂̂_i U^•)⁺] − (θ_i ∂_i U^•)⁺`: the excess flip
/// rate caused by estimator noise.
pub fn refreshment_rate(
    scheme: &SubsamplingScheme,
    data: &Dataset,
    i: usize,
    xi: &[f64],
    theta_i: f64,
) -> Result<f64> {
    let effective: f64 = enumerate_batches(scheme, data, i)?
        .iter()
        .map(|(b, prob)| prob * (theta_i * scheme.estimate_unchecked(data, xi, b)).max(0.0))
        .sum();
    let exact = (theta_i * grad_full_unchecked(data, i, xi)).max(0.0);
    Ok(effective - exact)
}

/// [`refreshment_rate`] for a scheme without control variates; stratified
/// schemes place their strata using gradients at `xi` itself.
pub fn refreshment_rate_oracle(
    data: &Dataset,
    i: usize,
    xi: &[f64],
    theta_i: f64,
    family: Family,
    m: usize,
) -> Result<f64> {
    let scheme = SubsamplingScheme::build(data, SchemeSpec::new(family).with_minibatch(m), Some(xi))?;
    refreshment_rate(&scheme, data, i, xi, theta_i)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opposite_pair() -> (Dataset, Vec<f64>) {
        // y = (0, 1), x = (2, 2) at ξ = 0: ∂U¹ = 2·0.5 = 1, ∂U² = 2·(0.5−1) = −1.
        let d = Dataset::from_dense(&[vec![2.0], vec![2.0]], vec![0, 1]).unwrap();
        (d, vec![0.0])
    }

    #[test]
    fn two_point_uniform_refreshment() {
        let (d, xi) = opposite_pair();
        let g1 = refreshment_rate_oracle(&d, 0, &xi, 1.0, Family::Uniform, 1).unwrap();
        let g2 = refreshment_rate_oracle(&d, 0, &xi, 1.0, Family::Uniform, 2).unwrap();
        assert!((g1 - 1.0).abs() < 1e-12, "{g1}");
        assert!((g2 - 0.5).abs() < 1e-12, "{g2}");
    }

    #[test]
    fn single_observation_has_no_refreshment() {
        let d = Dataset::from_dense(&[vec![1.5]], vec![1]).unwrap();
        for m in 1..=3 {
            for f in [Family::Uniform, Family::Importance] {
                assert_eq!(refreshment_rate_oracle(&d, 0, &[0.3], -1.0, f, m).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn identical_terms_have_no_refreshment() {
        let d = Dataset::from_dense(&[vec![1.0], vec![1.0], vec![1.0]], vec![1, 1, 1]).unwrap();
        for m in 1..=3 {
            let g = refreshment_rate_oracle(&d, 0, &[0.2], 1.0, Family::Uniform, m).unwrap();
            assert!(g.abs() < 1e-12);
        }
    }

    #[test]
    fn probabilities_sum_to_one() {
        let d = Dataset::from_dense(&[vec![1.0], vec![0.0], vec![3.0]], vec![1, 0, 1]).unwrap();
        for spec in ["uniform,m=3", "importance,m=2", "stratified,m=2"] {
            let s = SubsamplingScheme::build(&d, spec.parse().unwrap(), Some(&[0.1])).unwrap();
            let total: f64 = enumerate_batches(&s, &d, 0).unwrap().iter().map(|b| b.1).sum();
            assert!((total - 1.0).abs() < 1e-12, "{spec}");
        }
    }

    #[test]
    fn enumeration_cap() {
        let rows: Vec<Vec<f64>> = (0..100).map(|_| vec![1.0]).collect();
        let d = Dataset::from_dense(&rows, vec![0; 100]).unwrap();
        let s = SubsamplingScheme::build(&d, "uniform,m=4".parse().unwrap(), None).unwrap();
        assert!(matches!(enumerate_batches(&s, &d, 0), Err(Error::Usage(_))));
    }
}

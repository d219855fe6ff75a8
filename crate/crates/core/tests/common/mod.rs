//! Test helpers shared by the integration suites. Oracles here deliberately
//! avoid the library's own potential and gradient code.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use zigzag_core::Dataset;

/// Small random dataset with roughly `density` nonzero covariates; every column
/// keeps at least one nonzero so all dimensions are active.
pub fn random_instance(rng: &mut ChaCha8Rng, n: usize, p: usize, density: f64) -> (Vec<Vec<f64>>, Vec<u8>) {
    let mut rows = vec![vec![0.0; p]; n];
    for i in 0..p {
        for row in rows.iter_mut() {
            if rng.random::<f64>() < density {
                row[i] = rng.sample::<f64, _>(StandardNormal) * 1.5;
            }
        }
        let j = rng.random_range(0..n);
        if rows[j][i] == 0.0 {
            rows[j][i] = 0.5 + rng.random::<f64>();
        }
    }
    let y = (0..n).map(|_| u8::from(rng.random::<bool>())).collect();
    (rows, y)
}

pub fn random_dataset(seed: u64, n: usize, p: usize, density: f64) -> (Dataset, Vec<Vec<f64>>, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (rows, y) = random_instance(&mut rng, n, p, density);
    (Dataset::from_dense(&rows, y.clone()).unwrap(), rows, y)
}

/// `Σ_j log(1 + e^{x_jᵀξ}) − y_j x_jᵀξ`, computed directly from dense rows.
pub fn dense_nll(rows: &[Vec<f64>], y: &[u8], xi: &[f64]) -> f64 {
    rows.iter()
        .zip(y)
        .map(|(r, &yj)| {
            let z: f64 = r.iter().zip(xi).map(|(a, b)| a * b).sum();
            let sp = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
            sp - f64::from(yj) * z
        })
        .sum()
}

/// Dense per-term gradient `x_i^j (σ(x_jᵀξ) − y_j)`.
pub fn dense_term_grad(row: &[f64], yj: u8, xi: &[f64], i: usize) -> f64 {
    let z: f64 = row.iter().zip(xi).map(|(a, b)| a * b).sum();
    row[i] * (1.0 / (1.0 + (-z).exp()) - f64::from(yj))
}

/// Posterior mean and variance of a 2-D target by midpoint quadrature on a
/// `cells × cells` grid over `[lo, hi]²`.
pub fn grid_moments_2d(
    neg_log_density: impl Fn(&[f64]) -> f64,
    lo: [f64; 2],
    hi: [f64; 2],
    cells: usize,
) -> ([f64; 2], [f64; 2]) {
    let h = [(hi[0] - lo[0]) / cells as f64, (hi[1] - lo[1]) / cells as f64];
    let mut vals = Vec::with_capacity(cells * cells);
    let mut floor = f64::INFINITY;
    for a in 0..cells {
        for b in 0..cells {
            let pt = [lo[0] + (a as f64 + 0.5) * h[0], lo[1] + (b as f64 + 0.5) * h[1]];
            let u = neg_log_density(&pt);
            floor = floor.min(u);
            vals.push((pt, u));
        }
    }
    let (mut z, mut m1, mut m2) = (0.0, [0.0; 2], [0.0; 2]);
    for (pt, u) in vals {
        let w = (floor - u).exp();
        z += w;
        for d in 0..2 {
            m1[d] += w * pt[d];
            m2[d] += w * pt[d] * pt[d];
        }
    }
    let mean = [m1[0] / z, m1[1] / z];
    let var = [m2[0] / z - mean[0] * mean[0], m2[1] / z - mean[1] * mean[1]];
    (mean, var)
}

/// Kolmogorov–Smirnov distance between a sample and a continuous CDF.
pub fn ks_distance(mut samples: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            let f = cdf(x);
            (f - k as f64 / n).abs().max(((k + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Best 2-way contiguous split of sorted values by brute force, minimizing
/// `Σ |S| · (max S − min S)`.
pub fn enumerate_two_split(sorted: &[f64]) -> usize {
    let cost = |s: &[f64]| s.len() as f64 * (s[s.len() - 1] - s[0]);
    (1..sorted.len())
        .min_by(|&a, &b| {
            let ca = cost(&sorted[..a]) + cost(&sorted[a..]);
            let cb = cost(&sorted[..b]) + cost(&sorted[b..]);
            ca.total_cmp(&cb)
        })
        .unwrap()
}

//! Exact path integrals over a skeleton, fixed-step discretization and
//! autocorrelation-based mixing summaries.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::zigzag::Skeleton;

/// Minimum series length accepted by [`iact`].
pub const MIN_IACT_SAMPLES: usize = 100;

/// Default number of discretized samples used for mixing summaries.
pub const DEFAULT_SAMPLES: usize = 10_000;

/// `∫ξ ds` and `∫ξ² ds` per dimension over a total time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMoments {
    pub time: f64,
    pub m1: Vec<f64>,
    pub m2: Vec<f64>,
}

impl TrajectoryMoments {
    pub fn new(p: usize) -> Self {
        TrajectoryMoments {
            time: 0.0,
            m1: vec![0.0; p],
            m2: vec![0.0; p],
        }
    }

    /// Adds the linear piece `ξ + v s`, `s ∈ [0, τ]`.
    #[inline]
    pub fn add_segment(&mut self, xi: &[f64], v: &[f64], tau: f64) {
        let tau2 = tau * tau;
        let tau3 = tau2 * tau;
        for k in 0..xi.len() {
            let (x, w) = (xi[k], v[k]);
            self.m1[k] += x * tau + 0.5 * w * tau2;
            self.m2[k] += x * x * tau + x * w * tau2 + w * w * tau3 / 3.0;
        }
        self.time += tau;
    }

    pub fn merge(&mut self, other: &TrajectoryMoments) {
        self.time += other.time;
        for k in 0..self.m1.len() {
            self.m1[k] += other.m1[k];
            self.m2[k] += other.m2[k];
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        self.m1.iter().map(|m| m / self.time).collect()
    }

    /// `m2/T − (m1/T)²`, clamped at zero.
    pub fn variance(&self) -> Vec<f64> {
        self.m1
            .iter()
            .zip(&self.m2)
            .map(|(a, b)| {
                let mu = a / self.time;
                (b / self.time - mu * mu).max(0.0)
            })
            .collect()
    }
}

/// Exact first and second moments of the whole trajectory.
pub fn integrate_moments(skeleton: &Skeleton) -> TrajectoryMoments {
    let mut m = TrajectoryMoments::new(skeleton.p());
    skeleton.for_each_segment(|_, tau, xi, v| m.add_segment(xi, v, tau));
    m
}

/// Moments over `count` consecutive equal-length time windows covering the trajectory.
pub fn window_moments(skeleton: &Skeleton, count: usize) -> Result<Vec<TrajectoryMoments>> {
    if count == 0 {
        return Err(Error::usage("window count must be positive"));
    }
    let t0 = skeleton.start_time();
    let len = (skeleton.end_time() - t0) / count as f64;
    if !(len > 0.0) {
        return Err(Error::usage("trajectory has zero duration"));
    }
    let p = skeleton.p();
    let mut out = vec![TrajectoryMoments::new(p); count];
    let mut shifted = vec![0.0; p];
    skeleton.for_each_segment(|start, tau, xi, v| {
        let end = start + tau;
        let mut s = start;
        let mut w = (((s - t0) / len) as usize).min(count - 1);
        loop {
            let w_end = if w + 1 >= count { f64::INFINITY } else { t0 + (w + 1) as f64 * len };
            let piece_end = end.min(w_end);
            if piece_end > s {
                let off = s - start;
                for k in 0..p {
                    shifted[k] = xi[k] + v[k] * off;
                }
                out[w].add_segment(&shifted, v, piece_end - s);
                s = piece_end;
            }
            if s >= end {
                break;
            }
            w += 1;
        }
    });
    Ok(out)
}

/// Mean, variance and batch-means standard errors from time windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchMeans {
    pub mean: Vec<f64>,
    pub mean_se: Vec<f64>,
    pub variance: Vec<f64>,
    pub variance_se: Vec<f64>,
    pub batches: usize,
}

/// Posterior mean and variance estimates with batch-means standard errors.
/// The variance error uses the linearization `ξ² − 2μξ`.
pub fn batch_means(skeleton: &Skeleton, batches: usize) -> Result<BatchMeans> {
    if batches < 2 {
        return Err(Error::usage("batch means need at least two batches"));
    }
    let windows = window_moments(skeleton, batches)?;
    let p = skeleton.p();
    let total = windows.iter().fold(TrajectoryMoments::new(p), |mut acc, w| {
        acc.merge(w);
        acc
    });
    let mean = total.mean();
    let variance = total.variance();
    let b = batches as f64;
    let mut mean_se = Vec::with_capacity(p);
    let mut variance_se = Vec::with_capacity(p);
    for k in 0..p {
        let mus: Vec<f64> = windows.iter().map(|w| w.m1[k] / w.time).collect();
        let zs: Vec<f64> = windows
            .iter()
            .map(|w| w.m2[k] / w.time - 2.0 * mean[k] * w.m1[k] / w.time)
            .collect();
        mean_se.push((sample_variance(&mus) / b).sqrt());
        variance_se.push((sample_variance(&zs) / b).sqrt());
    }
    Ok(BatchMeans {
        mean,
        mean_se,
        variance,
        variance_se,
        batches,
    })
}

fn sample_variance(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0)
}

/// `ξ(kΔt)` for `k = 0..=⌊T/Δt⌋`, measured from the skeleton's start time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discretized {
    pub delta_t: f64,
    /// One series per dimension.
    pub series: Vec<Vec<f64>>,
}

impl Discretized {
    pub fn len(&self) -> usize {
        self.series.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `ξ(kΔt)`.
    pub fn point(&self, k: usize) -> Vec<f64> {
        self.series.iter().map(|s| s[k]).collect()
    }
}

pub fn discretize(skeleton: &Skeleton, delta_t: f64) -> Result<Discretized> {
    if !(delta_t > 0.0 && delta_t.is_finite()) {
        return Err(Error::usage("delta_t must be positive and finite"));
    }
    let t0 = skeleton.start_time();
    let duration = skeleton.end_time() - t0;
    let count = (duration / delta_t).floor() as usize + 1;
    let p = skeleton.p();
    let mut series: Vec<Vec<f64>> = (0..p).map(|_| Vec::with_capacity(count)).collect();
    let mut k = 0usize;
    skeleton.for_each_segment(|start, tau, xi, v| {
        let end = start + tau;
        while k < count {
            let t = t0 + k as f64 * delta_t;
            if t >= end {
                break;
            }
            let off = t - start;
            for d in 0..p {
                series[d].push(xi[d] + v[d] * off);
            }
            k += 1;
        }
    });
    // Remaining grid points sit at (or within rounding of) the end time.
    while k < count {
        for d in 0..p {
            series[d].push(skeleton.final_state.xi[d]);
        }
        k += 1;
    }
    Ok(Discretized { delta_t, series })
}

/// Integrated autocorrelation time `1 + 2 Σ_{k=1}^{K} ρ_k`, where `K` is the first lag
/// with `ρ_K + ρ_{K+1} ≤ 0`. Autocovariances use the biased (divide by `N`)
/// estimator, computed by FFT. A constant series yields `+∞`.
pub fn iact(samples: &[f64]) -> Result<f64> {
    let n = samples.len();
    if n < MIN_IACT_SAMPLES {
        return Err(Error::usage(format!(
            "iact needs at least {MIN_IACT_SAMPLES} samples, got {n}"
        )));
    }
    let rho = autocorrelation(samples);
    if rho.is_empty() {
        return Ok(f64::INFINITY);
    }
    let mut sum = 0.0;
    let mut k = 1;
    while k + 1 < n {
        sum += rho[k];
        if rho[k] + rho[k + 1] <= 0.0 {
            break;
        }
        k += 1;
    }
    Ok(1.0 + 2.0 * sum)
}

/// Normalized autocorrelations `ρ_0..ρ_{N−1}`; empty for a constant series.
pub fn autocorrelation(samples: &[f64]) -> Vec<f64> {
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = samples
        .iter()
        .map(|&x| Complex::new(x - mean, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(size)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    let c0 = buf[0].re;
    if !(c0 > 1e-300 * n as f64) {
        return Vec::new();
    }
    buf[..n].iter().map(|c| c.re / c0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingReport {
    /// Per dimension, in discretized samples; `None` when undefined (constant series).
    pub iact: Vec<Option<f64>>,
    /// Largest per-dimension IACT; `None` if any dimension is undefined.
    pub mixing_time: Option<f64>,
    pub ess: Vec<Option<f64>>,
    /// `iact · sample variance`: asymptotic variance of the discretized mean.
    pub asymptotic_variance: Vec<Option<f64>>,
    pub delta_t: f64,
    pub samples: usize,
}

/// Mixing summary with `Δt = T / samples`. Dimensions that never flip move
/// ballistically and have no meaningful IACT; they are reported as undefined.
pub fn mixing_report(skeleton: &Skeleton, samples: usize) -> Result<MixingReport> {
    let duration = skeleton.end_time() - skeleton.start_time();
    let mut flipped = vec![false; skeleton.p()];
    for e in skeleton.events.iter().filter(|e| e.accepted) {
        flipped[e.dim] = true;
    }
    if !(duration > 0.0) || !flipped.iter().any(|&f| f) {
        return Ok(MixingReport {
            iact: vec![None; skeleton.p()],
            mixing_time: None,
            ess: vec![None; skeleton.p()],
            asymptotic_variance: vec![None; skeleton.p()],
            delta_t: 0.0,
            samples: 0,
        });
    }
    let delta_t = duration / samples as f64;
    let disc = discretize(skeleton, delta_t)?;
    let mut report = mixing_report_from(&disc)?;
    for (d, &f) in flipped.iter().enumerate() {
        if !f {
            report.iact[d] = None;
            report.ess[d] = None;
            report.asymptotic_variance[d] = None;
            report.mixing_time = None;
        }
    }
    Ok(report)
}

pub fn mixing_report_from(disc: &Discretized) -> Result<MixingReport> {
    let n = disc.len();
    let mut iacts = Vec::with_capacity(disc.series.len());
    let mut ess = Vec::with_capacity(disc.series.len());
    let mut avar = Vec::with_capacity(disc.series.len());
    for s in &disc.series {
        let tau = iact(s)?;
        if tau.is_finite() {
            let mean = s.iter().sum::<f64>() / n as f64;
            let var = s.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
            iacts.push(Some(tau));
            ess.push(Some(n as f64 / tau));
            avar.push(Some(tau * var));
        } else {
            iacts.push(None);
            ess.push(None);
            avar.push(None);
        }
    }
    let mixing_time = iacts
        .iter()
        .try_fold(f64::NEG_INFINITY, |acc, v| v.map(|v| acc.max(v)))
        .filter(|v| v.is_finite());
    Ok(MixingReport {
        iact: iacts,
        mixing_time,
        ess,
        asymptotic_variance: avar,
        delta_t: disc.delta_t,
        samples: n,
    })
}

/// Mean of the per-pair ratios `variant / baseline`.
pub fn efficiency_gain(baseline: &[f64], variant: &[f64]) -> Result<f64> {
    let ratios = gain_ratios(baseline, variant)?;
    Ok(ratios.iter().sum::<f64>() / ratios.len() as f64)
}

/// Per-pair ratios `variant / baseline`.
pub fn gain_ratios(baseline: &[f64], variant: &[f64]) -> Result<Vec<f64>> {
    if baseline.len() != variant.len() || baseline.is_empty() {
        return Err(Error::usage("efficiency gain needs equal-length, nonempty lists"));
    }
    baseline
        .iter()
        .zip(variant)
        .map(|(&b, &v)| {
            if b == 0.0 {
                Err(Error::usage("zero baseline time"))
            } else {
                Ok(v / b)
            }
        })
        .collect()
}

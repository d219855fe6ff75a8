//! Unbiased sub-sampled estimators of `∂_i U^•` and the envelopes that dominate
//! their rates.
//!
//! Supported estimator families:
//!
//! | family     | batch draw                          | estimate                                       |
//! |------------|-------------------------------------|------------------------------------------------|
//! | uniform    | `m` i.i.d. uniform indices          | `m⁻¹ Σ n ∂_i U^{J_k}`                          |
//! | importance | `m` i.i.d. draws from `ω_i`         | `m⁻¹ Σ (ω_i^{J_k})⁻¹ ∂_i U^{J_k}`              |
//! | stratified | one uniform draw per stratum        | `Σ |S_i^k| ∂_i U^{J_k}`                        |
//!
//! Uniform and importance optionally add a control variate around a reference
//! point `ξ*`, in which case each term is replaced by its difference from the
//! same term at `ξ*` and `∂_i U^•(ξ*)` is added back.

mod oracle;
mod strata;
mod weights;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::RateBound;
use crate::model::{compute_bound_constants, BoundConstants, Dataset};
use crate::zigzag::ZigZagState;

pub use oracle::{
    enumerate_batches, exhaustive_expectation, refreshment_rate, refreshment_rate_oracle,
    MAX_ENUMERATED_BATCHES,
};
pub use strata::{f_score, f_split_score, greedy_clustering, Strata};
pub use weights::{build_importance_weights, ImportanceWeights};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Uniform,
    Importance,
    Stratified,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Uniform => "uniform",
            Family::Importance => "importance",
            Family::Stratified => "stratified",
        })
    }
}

/// Scheme selection before it is built against a dataset. Serializes as its
/// string form, e.g. `"importance,cv,m=5"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SchemeSpec {
    pub family: Family,
    /// Mini-batch size; for stratified schemes, the number of strata.
    pub minibatch: usize,
    pub control_variate: bool,
}

impl SchemeSpec {
    pub fn new(family: Family) -> Self {
        SchemeSpec {
            family,
            minibatch: 1,
            control_variate: false,
        }
    }

    pub fn with_minibatch(mut self, m: usize) -> Self {
        self.minibatch = m;
        self
    }

    pub fn with_control_variate(mut self, cv: bool) -> Self {
        self.control_variate = cv;
        self
    }

    /// Whether building this scheme needs a reference point.
    pub fn needs_reference(&self) -> bool {
        self.control_variate || self.family == Family::Stratified
    }

    pub fn validate(&self) -> Result<()> {
        if self.minibatch == 0 {
            return Err(Error::config("mini-batch size must be at least 1"));
        }
        if self.family == Family::Stratified && self.control_variate {
            return Err(Error::config(
                "stratified sub-sampling is not combined with control variates",
            ));
        }
        Ok(())
    }
}

impl fmt::Display for SchemeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.family)?;
        if self.control_variate {
            write!(f, ",cv")?;
        }
        if self.minibatch != 1 {
            write!(f, ",m={}", self.minibatch)?;
        }
        Ok(())
    }
}

/// Parses `{uniform|importance|stratified}[,cv][,m=<int>]`.
impl FromStr for SchemeSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split(',').map(str::trim);
        let family = match parts.next().unwrap_or("").to_ascii_lowercase().as_str() {
            "uniform" => Family::Uniform,
            "importance" => Family::Importance,
            "stratified" => Family::Stratified,
            other => return Err(Error::config(format!("unknown scheme family '{other}'"))),
        };
        let mut spec = SchemeSpec::new(family);
        for part in parts {
            if part.eq_ignore_ascii_case("cv") {
                spec.control_variate = true;
            } else if let Some(m) = part.strip_prefix("m=") {
                spec.minibatch = m
                    .parse()
                    .map_err(|_| Error::config(format!("bad mini-batch size '{m}'")))?;
            } else {
                return Err(Error::config(format!("unknown scheme option '{part}' in '{s}'")));
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

impl TryFrom<String> for SchemeSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SchemeSpec> for String {
    fn from(s: SchemeSpec) -> String {
        s.to_string()
    }
}

/// Control-variate reference: `ξ*`, `∂_i U^•(ξ*)` and the per-term gradients there.
#[derive(Debug, Clone, PartialEq)]
pub struct CvReference {
    pub xi_star: Vec<f64>,
    pub grad_star: Vec<f64>,
    /// `∂_i U^j(ξ*)`, aligned with the stored entries of column `i`.
    pub term_grads_star: Vec<Vec<f64>>,
    residual_star: Vec<f64>,
}

impl CvReference {
    /// Norm index of the Lipschitz bound; only the Euclidean norm is supported.
    pub const NORM_INDEX: u32 = 2;

    pub fn new(data: &Dataset, xi_star: Vec<f64>) -> Result<Self> {
        if xi_star.len() != data.p() || xi_star.iter().any(|v| !v.is_finite()) {
            return Err(Error::usage("reference point must be finite with length p"));
        }
        let residual_star: Vec<f64> = (0..data.n()).map(|j| data.residual(j, &xi_star)).collect();
        let term_grads_star: Vec<Vec<f64>> = (0..data.p())
            .map(|i| data.column(i).iter().map(|(j, x)| x * residual_star[j]).collect())
            .collect();
        let grad_star = term_grads_star.iter().map(|t| t.iter().sum()).collect();
        Ok(CvReference {
            xi_star,
            grad_star,
            term_grads_star,
            residual_star,
        })
    }

    /// `∂_i U^j(ξ*)` given `x_i^j`.
    #[inline]
    fn term_at_reference(&self, j: usize, x: f64) -> f64 {
        x * self.residual_star[j]
    }

    /// Per-observation `∂_i U^j(ξ*)` over all `j` (zeros off the support).
    pub fn dense_term_grads(&self, data: &Dataset, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; data.n()];
        for ((j, _), g) in data.column(i).iter().zip(&self.term_grads_star[i]) {
            out[j] = *g;
        }
        out
    }

    pub fn distance(&self, xi: &[f64]) -> f64 {
        xi.iter()
            .zip(&self.xi_star)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// One drawn observation: its index, `x_i^J` and the estimator weight applied to `∂_i U^J`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchEntry {
    pub obs: usize,
    pub x: f64,
    pub scale: f64,
}

/// Mini-batch `B = (J_1, …, J_m)` for one dimension.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Batch {
    pub dim: usize,
    pub entries: Vec<BatchEntry>,
}

impl Batch {
    pub fn indices(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.obs).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// A sub-sampling scheme built against one dataset. Immutable once built.
#[derive(Debug, Clone)]
pub struct SubsamplingScheme {
    spec: SchemeSpec,
    n: usize,
    constants: BoundConstants,
    cv: Option<CvReference>,
    weights: Vec<Option<ImportanceWeights>>,
    /// Per dimension: strata as `(obs, x_i^obs)` pairs.
    strata: Vec<Vec<Vec<(usize, f64)>>>,
    /// Stratified only: `Σ_k |S_k| max_{j ∈ S_k} c^j` per dimension.
    strata_bound: Vec<f64>,
}

fn strata_bounds(strata: &[Vec<Vec<(usize, f64)>>]) -> Vec<f64> {
    strata
        .iter()
        .map(|dim| {
            dim.iter()
                .map(|s| s.len() as f64 * s.iter().fold(0.0f64, |m, e| m.max(e.1.abs())))
                .sum()
        })
        .collect()
}

impl SubsamplingScheme {
    /// Builds the scheme; `reference` is required for control variates and for stratification.
    pub fn build(data: &Dataset, spec: SchemeSpec, reference: Option<&[f64]>) -> Result<Self> {
        spec.validate()?;
        let constants = compute_bound_constants(data);
        let cv = match (spec.needs_reference(), reference) {
            (true, Some(r)) => Some(CvReference::new(data, r.to_vec())?),
            (true, None) => {
                return Err(Error::config(format!("scheme '{spec}' needs a reference point")))
            }
            (false, _) => None,
        };

        let weights = if spec.family == Family::Importance {
            (0..data.p())
                .map(|i| {
                    let c = if spec.control_variate {
                        &constants.lipschitz[i]
                    } else {
                        &constants.grad_bound[i]
                    };
                    if c.iter().any(|&v| v > 0.0) {
                        ImportanceWeights::new(c).map(Some)
                    } else {
                        Ok(None)
                    }
                })
                .collect::<Result<_>>()?
        } else {
            Vec::new()
        };

        let strata = if spec.family == Family::Stratified {
            if spec.minibatch > data.n() {
                return Err(Error::config(format!(
                    "{} strata requested for {} observations",
                    spec.minibatch,
                    data.n()
                )));
            }
            let reference = cv.as_ref().expect("stratified schemes carry a reference");
            (0..data.p())
                .map(|i| {
                    let values = reference.dense_term_grads(data, i);
                    let strata = Strata::from_values(&values, spec.minibatch)?;
                    Ok(strata
                        .iter()
                        .map(|s| s.iter().map(|&j| (j, data.entry(j, i))).collect())
                        .collect())
                })
                .collect::<Result<_>>()?
        } else {
            Vec::new()
        };

        // Stratified schemes use the reference only to place strata.
        let cv = if spec.control_variate { cv } else { None };

        Ok(SubsamplingScheme {
            spec,
            n: data.n(),
            constants,
            cv,
            weights,
            strata_bound: strata_bounds(&strata),
            strata,
        })
    }

    /// Stratified scheme with caller-supplied partitions, one per dimension.
    pub fn stratified_with(data: &Dataset, partitions: Vec<Strata>) -> Result<Self> {
        if partitions.len() != data.p() {
            return Err(Error::usage("one partition per dimension is required"));
        }
        let m = partitions.first().map_or(1, Strata::count);
        if partitions.iter().any(|s| s.count() != m) {
            return Err(Error::usage("every dimension needs the same number of strata"));
        }
        let strata: Vec<Vec<Vec<(usize, f64)>>> = partitions
            .iter()
            .enumerate()
            .map(|(i, s)| {
                s.iter()
                    .map(|g| g.iter().map(|&j| (j, data.entry(j, i))).collect())
                    .collect()
            })
            .collect();
        Ok(SubsamplingScheme {
            spec: SchemeSpec::new(Family::Stratified).with_minibatch(m),
            n: data.n(),
            constants: compute_bound_constants(data),
            cv: None,
            weights: Vec::new(),
            strata_bound: strata_bounds(&strata),
            strata,
        })
    }

    pub fn spec(&self) -> SchemeSpec {
        self.spec
    }

    pub fn family(&self) -> Family {
        self.spec.family
    }

    pub fn minibatch(&self) -> usize {
        self.spec.minibatch
    }

    pub fn constants(&self) -> &BoundConstants {
        &self.constants
    }

    pub fn control_variate(&self) -> Option<&CvReference> {
        self.cv.as_ref()
    }

    pub fn importance_weights(&self, i: usize) -> Option<&ImportanceWeights> {
        self.weights.get(i).and_then(Option::as_ref)
    }

    /// Stratum members (observation indices) for dimension `i`.
    pub fn strata(&self, i: usize) -> Option<Vec<Vec<usize>>> {
        self.strata
            .get(i)
            .map(|s| s.iter().map(|g| g.iter().map(|e| e.0).collect()).collect())
    }

    /// False when every `x_i^j` is zero; the likelihood clock of `i` then never fires.
    pub fn is_active(&self, i: usize) -> bool {
        self.constants.is_active(i)
    }

    pub(crate) fn fill_batch<R: Rng + ?Sized>(
        &self,
        data: &Dataset,
        i: usize,
        rng: &mut R,
        batch: &mut Batch,
    ) {
        batch.dim = i;
        batch.entries.clear();
        let m = self.spec.minibatch;
        match self.spec.family {
            Family::Uniform => {
                let scale = self.n as f64 / m as f64;
                for _ in 0..m {
                    let j = rng.random_range(0..self.n);
                    batch.entries.push(BatchEntry {
                        obs: j,
                        x: data.entry(j, i),
                        scale,
                    });
                }
            }
            Family::Importance => {
                let w = self.weights[i]
                    .as_ref()
                    .expect("batches are only drawn for active dimensions");
                let col = data.column(i);
                for _ in 0..m {
                    let k = w.sample(rng);
                    batch.entries.push(BatchEntry {
                        obs: col.index[k],
                        x: col.value[k],
                        scale: 1.0 / (m as f64 * w.weight(k)),
                    });
                }
            }
            Family::Stratified => {
                for stratum in &self.strata[i] {
                    let (j, x) = stratum[rng.random_range(0..stratum.len())];
                    batch.entries.push(BatchEntry {
                        obs: j,
                        x,
                        scale: stratum.len() as f64,
                    });
                }
            }
        }
    }

    /// Estimator value without validation; `batch` must come from this scheme.
    #[inline]
    pub(crate) fn estimate_unchecked(&self, data: &Dataset, xi: &[f64], batch: &Batch) -> f64 {
        match &self.cv {
            None => batch
                .entries
                .iter()
                .filter(|e| e.x != 0.0)
                .map(|e| e.scale * e.x * data.residual(e.obs, xi))
                .sum(),
            Some(cv) => {
                let diff: f64 = batch
                    .entries
                    .iter()
                    .filter(|e| e.x != 0.0)
                    .map(|e| e.scale * (e.x * data.residual(e.obs, xi) - cv.term_at_reference(e.obs, e.x)))
                    .sum();
                diff + cv.grad_star[batch.dim]
            }
        }
    }

    /// Envelope for the likelihood clock given the current `‖ξ − ξ*‖₂` and `‖α‖₂`.
    #[inline]
    pub(crate) fn bound_with(
        &self,
        i: usize,
        theta_i: f64,
        alpha_i: f64,
        distance: f64,
        alpha_norm: f64,
    ) -> RateBound {
        let c = &self.constants;
        match (&self.cv, self.spec.family) {
            (None, Family::Importance) => RateBound::constant(alpha_i * c.grad_bound_sum[i]),
            // Each stratum contributes at most |S_k| max_{S_k} c; never above n·c_max.
            (None, Family::Stratified) => RateBound::constant(alpha_i * self.strata_bound[i]),
            (None, _) => RateBound::constant(alpha_i * self.n as f64 * c.grad_bound_max[i]),
            (Some(cv), family) => {
                let lip = if family == Family::Importance {
                    c.lipschitz_sum[i]
                } else {
                    self.n as f64 * c.lipschitz_max[i]
                };
                RateBound::linear(
                    alpha_i * (theta_i * cv.grad_star[i]).max(0.0) + alpha_i * lip * distance,
                    alpha_i * lip * alpha_norm,
                )
            }
        }
    }
}

/// Draws the mini-batch for dimension `i`.
pub fn draw_batch<R: Rng + ?Sized>(
    scheme: &SubsamplingScheme,
    data: &Dataset,
    i: usize,
    rng: &mut R,
) -> Result<Batch> {
    if i >= data.p() {
        return Err(Error::usage(format!("dimension {i} out of range")));
    }
    if !scheme.is_active(i) {
        return Err(Error::usage(format!("dimension {i} is inactive (all covariates zero)")));
    }
    let mut batch = Batch::default();
    scheme.fill_batch(data, i, rng, &mut batch);
    Ok(batch)
}

/// Evaluates `∂̂_i U^•(ξ, B)` for a batch drawn by the same scheme and dimension.
pub fn estimate_grad(
    scheme: &SubsamplingScheme,
    data: &Dataset,
    xi: &[f64],
    batch: &Batch,
) -> Result<f64> {
    if batch.len() != scheme.minibatch() {
        return Err(Error::usage(format!(
            "batch has {} entries but the scheme uses {}",
            batch.len(),
            scheme.minibatch()
        )));
    }
    if batch.dim >= data.p() || xi.len() != data.p() {
        return Err(Error::usage("batch dimension or position length does not match the data"));
    }
    Ok(scheme.estimate_unchecked(data, xi, batch))
}

/// Likelihood-clock envelope `M_i(t)` for the current state.
pub fn bound_for(scheme: &SubsamplingScheme, i: usize, state: &ZigZagState) -> RateBound {
    let distance = scheme.cv.as_ref().map_or(0.0, |cv| cv.distance(&state.xi));
    let alpha_norm = state.alpha.iter().map(|a| a * a).sum::<f64>().sqrt();
    scheme.bound_with(i, state.theta[i], state.alpha[i], distance, alpha_norm)
}

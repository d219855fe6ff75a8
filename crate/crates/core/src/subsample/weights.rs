use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;

use crate::error::{Error, Result};

/// Importance weights `ω^j = c^j / Σ c` with an alias table over the strictly
/// positive entries for O(1) draws.
#[derive(Debug, Clone)]
pub struct ImportanceWeights {
    weights: Vec<f64>,
    total: f64,
    support: Vec<usize>,
    alias: WeightedAliasIndex<f64>,
}

impl ImportanceWeights {
    /// Fails with a usage error when every constant is zero (the dimension is inactive).
    pub fn new(constants: &[f64]) -> Result<Self> {
        if let Some(c) = constants.iter().find(|c| !c.is_finite() || **c < 0.0) {
            return Err(Error::usage(format!("importance constants must be finite and nonnegative, got {c}")));
        }
        let total: f64 = constants.iter().sum();
        if total <= 0.0 {
            return Err(Error::usage("all importance constants are zero: dimension is inactive"));
        }
        let weights: Vec<f64> = constants.iter().map(|c| c / total).collect();
        let support: Vec<usize> = (0..constants.len()).filter(|&k| constants[k] > 0.0).collect();
        let alias = WeightedAliasIndex::new(support.iter().map(|&k| constants[k]).collect())
            .map_err(|e| Error::usage(format!("alias table construction failed: {e}")))?;
        Ok(ImportanceWeights {
            weights,
            total,
            support,
            alias,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn weight(&self, k: usize) -> f64 {
        self.weights[k]
    }

    /// `Σ c`, which is also the optimal value of `max_j c^j / ω^j`.
    pub fn total(&self) -> f64 {
        self.total
    }

    /// Indices with nonzero weight.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.support[self.alias.sample(rng)]
    }
}

/// Weight table for per-observation constants; see [`ImportanceWeights::new`].
pub fn build_importance_weights(constants: &[f64]) -> Result<ImportanceWeights> {
    ImportanceWeights::new(constants)
}

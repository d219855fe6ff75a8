//! Logistic-regression potential `U = U⁰ + Σ_j U^j`: the sparse dataset, prior
//! variants, partial derivatives and the per-term bound constants every
//! sub-sampling scheme builds on.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::RateBound;
use crate::zigzag::ZigZagState;

/// Binary responses plus covariates stored column-major (per dimension) with a
/// row-major mirror for the `(x^j)ᵀξ` products on the sampling hot path.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    p: usize,
    y: Vec<u8>,
    col_ptr: Vec<usize>,
    col_obs: Vec<usize>,
    col_val: Vec<f64>,
    row_ptr: Vec<usize>,
    row_dim: Vec<usize>,
    row_val: Vec<f64>,
    row_norms: Vec<f64>,
}

/// Borrowed view of one sparse column or row.
#[derive(Debug, Clone, Copy)]
pub struct SparseSlice<'a> {
    pub index: &'a [usize],
    pub value: &'a [f64],
}

impl<'a> SparseSlice<'a> {
    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + 'a {
        self.index.iter().copied().zip(self.value.iter().copied())
    }

    /// Value at `k`, zero when not stored.
    pub fn get(&self, k: usize) -> f64 {
        match self.index.binary_search(&k) {
            Ok(pos) => self.value[pos],
            Err(_) => 0.0,
        }
    }

    pub fn position(&self, k: usize) -> Option<usize> {
        self.index.binary_search(&k).ok()
    }
}

impl Dataset {
    /// Builds a dataset from per-dimension lists of `(observation, value)`.
    ///
    /// Entries equal to exactly `0.0` are dropped; observation indices must be
    /// strictly increasing within each column.
    pub fn from_columns(n: usize, y: Vec<u8>, columns: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        if y.len() != n {
            return Err(Error::InvalidData(format!(
                "response length {} does not match n = {n}",
                y.len()
            )));
        }
        if let Some(j) = y.iter().position(|&v| v > 1) {
            return Err(Error::InvalidData(format!(
                "response {} at observation {j} is not binary",
                y[j]
            )));
        }
        let p = columns.len();
        let mut col_ptr = Vec::with_capacity(p + 1);
        let mut col_obs = Vec::new();
        let mut col_val = Vec::new();
        col_ptr.push(0);
        for (i, column) in columns.iter().enumerate() {
            let mut last: Option<usize> = None;
            for &(j, v) in column {
                if j >= n {
                    return Err(Error::InvalidData(format!(
                        "column {i}: observation index {j} out of range (n = {n})"
                    )));
                }
                if last.is_some_and(|l| j <= l) {
                    return Err(Error::InvalidData(format!(
                        "column {i}: observation indices not strictly increasing at {j}"
                    )));
                }
                if !v.is_finite() {
                    return Err(Error::InvalidData(format!(
                        "column {i}, observation {j}: non-finite covariate {v}"
                    )));
                }
                last = Some(j);
                if v != 0.0 {
                    col_obs.push(j);
                    col_val.push(v);
                }
            }
            col_ptr.push(col_obs.len());
        }

        // Transpose to rows. Iterating columns in order keeps each row sorted by dimension.
        let mut counts = vec![0usize; n + 1];
        for &j in &col_obs {
            counts[j + 1] += 1;
        }
        for j in 0..n {
            counts[j + 1] += counts[j];
        }
        let row_ptr = counts.clone();
        let mut fill = counts;
        let mut row_dim = vec![0usize; col_obs.len()];
        let mut row_val = vec![0.0; col_obs.len()];
        for i in 0..p {
            for k in col_ptr[i]..col_ptr[i + 1] {
                let j = col_obs[k];
                row_dim[fill[j]] = i;
                row_val[fill[j]] = col_val[k];
                fill[j] += 1;
            }
        }
        let row_norms = (0..n)
            .map(|j| {
                row_val[row_ptr[j]..row_ptr[j + 1]]
                    .iter()
                    .map(|v| v * v)
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();

        Ok(Dataset {
            n,
            p,
            y,
            col_ptr,
            col_obs,
            col_val,
            row_ptr,
            row_dim,
            row_val,
            row_norms,
        })
    }

    /// Converts dense row-major covariates; exact zeros become structural zeros.
    pub fn from_dense(rows: &[Vec<f64>], y: Vec<u8>) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if let Some(j) = rows.iter().position(|r| r.len() != p) {
            return Err(Error::InvalidData(format!(
                "row {j} has {} entries, expected {p}",
                rows[j].len()
            )));
        }
        let mut columns = vec![Vec::new(); p];
        for (j, row) in rows.iter().enumerate() {
            for (i, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    columns[i].push((j, v));
                }
            }
        }
        Dataset::from_columns(rows.len(), y, columns)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn nnz(&self) -> usize {
        self.col_obs.len()
    }

    pub fn responses(&self) -> &[u8] {
        &self.y
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        f64::from(self.y[j])
    }

    pub fn positives(&self) -> usize {
        self.y.iter().filter(|&&v| v == 1).count()
    }

    #[inline]
    pub fn column(&self, i: usize) -> SparseSlice<'_> {
        let r = self.col_ptr[i]..self.col_ptr[i + 1];
        SparseSlice {
            index: &self.col_obs[r.clone()],
            value: &self.col_val[r],
        }
    }

    #[inline]
    pub fn row(&self, j: usize) -> SparseSlice<'_> {
        let r = self.row_ptr[j]..self.row_ptr[j + 1];
        SparseSlice {
            index: &self.row_dim[r.clone()],
            value: &self.row_val[r],
        }
    }

    pub fn row_norm(&self, j: usize) -> f64 {
        self.row_norms[j]
    }

    pub fn row_norms(&self) -> &[f64] {
        &self.row_norms
    }

    /// `x_i^j`, zero when not stored.
    #[inline]
    pub fn entry(&self, j: usize, i: usize) -> f64 {
        self.row(j).get(i)
    }

    /// `(x^j)ᵀ ξ`.
    #[inline]
    pub fn linear_predictor(&self, j: usize, xi: &[f64]) -> f64 {
        let r = self.row_ptr[j]..self.row_ptr[j + 1];
        self.row_dim[r.clone()]
            .iter()
            .zip(&self.row_val[r])
            .map(|(&i, &v)| v * xi[i])
            .sum()
    }

    /// `σ((x^j)ᵀξ) − y^j`; multiplying by `x_i^j` gives `∂_i U^j(ξ)`.
    #[inline]
    pub(crate) fn residual(&self, j: usize, xi: &[f64]) -> f64 {
        sigmoid(self.linear_predictor(j, xi)) - self.y(j)
    }

    /// Negative log-likelihood `U^•(ξ) = Σ_j [log(1 + e^{z_j}) − y_j z_j]`.
    pub fn neg_log_likelihood(&self, xi: &[f64]) -> f64 {
        (0..self.n)
            .map(|j| {
                let z = self.linear_predictor(j, xi);
                softplus(z) - self.y(j) * z
            })
            .sum()
    }

    /// Full potential `U = U⁰ + U^•` up to the prior's normalizing constant.
    pub fn potential(&self, prior: &PriorSpec, xi: &[f64]) -> f64 {
        self.neg_log_likelihood(xi) + xi.iter().map(|&x| prior.potential_1d(x)).sum::<f64>()
    }

    /// Appends a dense all-ones column as the last dimension.
    pub fn with_intercept(&self) -> Dataset {
        let mut columns: Vec<Vec<(usize, f64)>> = (0..self.p)
            .map(|i| self.column(i).iter().collect())
            .collect();
        columns.push((0..self.n).map(|j| (j, 1.0)).collect());
        Dataset::from_columns(self.n, self.y.clone(), columns).expect("valid by construction")
    }

    fn check_indices(&self, j: usize, i: usize, xi: &[f64]) -> Result<()> {
        if j >= self.n {
            return Err(Error::usage(format!("observation index {j} out of range (n = {})", self.n)));
        }
        self.check_dim(i, xi)
    }

    fn check_dim(&self, i: usize, xi: &[f64]) -> Result<()> {
        if i >= self.p {
            return Err(Error::usage(format!("dimension index {i} out of range (p = {})", self.p)));
        }
        if xi.len() != self.p {
            return Err(Error::usage(format!(
                "position has length {}, expected {}",
                xi.len(),
                self.p
            )));
        }
        if xi.iter().any(|v| !v.is_finite()) {
            return Err(Error::usage("position has non-finite entries"));
        }
        Ok(())
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
#[inline]
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// `∂_i U^j(ξ) = x_i^j (σ((x^j)ᵀξ) − y^j)`.
pub fn likelihood_grad_term(data: &Dataset, j: usize, i: usize, xi: &[f64]) -> Result<f64> {
    data.check_indices(j, i, xi)?;
    let x = data.entry(j, i);
    if x == 0.0 {
        return Ok(0.0);
    }
    Ok(x * data.residual(j, xi))
}

/// `∂_i U^•(ξ)`, summing only the stored entries of column `i`.
pub fn likelihood_grad_full(data: &Dataset, i: usize, xi: &[f64]) -> Result<f64> {
    data.check_dim(i, xi)?;
    Ok(grad_full_unchecked(data, i, xi))
}

pub(crate) fn grad_full_unchecked(data: &Dataset, i: usize, xi: &[f64]) -> f64 {
    data.column(i)
        .iter()
        .map(|(j, x)| x * data.residual(j, xi))
        .sum()
}

/// Independent prior on each coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorSpec {
    Gaussian { variance: f64 },
    Cauchy { scale: f64 },
    /// Generalized double Pareto with shape `alpha` and scale `theta`.
    Gdp { shape: f64, scale: f64 },
    Laplace { scale: f64 },
}

pub const DEFAULT_CAUCHY_SCALE: f64 = 2.5;

impl PriorSpec {
    pub fn gaussian(variance: f64) -> Result<Self> {
        PriorSpec::Gaussian { variance }.validated()
    }

    pub fn cauchy(scale: f64) -> Result<Self> {
        PriorSpec::Cauchy { scale }.validated()
    }

    pub fn gdp(shape: f64, scale: f64) -> Result<Self> {
        PriorSpec::Gdp { shape, scale }.validated()
    }

    pub fn laplace(scale: f64) -> Result<Self> {
        PriorSpec::Laplace { scale }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        let valid = match self {
            PriorSpec::Gaussian { variance } => ok(variance),
            PriorSpec::Cauchy { scale } | PriorSpec::Laplace { scale } => ok(scale),
            PriorSpec::Gdp { shape, scale } => ok(shape) && ok(scale),
        };
        if valid {
            Ok(self)
        } else {
            Err(Error::config(format!("prior parameters must be positive and finite: {self}")))
        }
    }

    /// One-dimensional potential `-log p_0(x)` without the normalizing constant.
    pub fn potential_1d(&self, x: f64) -> f64 {
        match *self {
            PriorSpec::Gaussian { variance } => 0.5 * x * x / variance,
            PriorSpec::Cauchy { scale } => (x / scale).powi(2).ln_1p(),
            PriorSpec::Gdp { shape, scale } => (1.0 + shape) * (x.abs() / (shape * scale)).ln_1p(),
            PriorSpec::Laplace { scale } => x.abs() / scale,
        }
    }

    /// Derivative of [`potential_1d`](Self::potential_1d). GDP and Laplace are not
    /// differentiable at zero; the value there is 0 by convention.
    #[inline]
    pub fn grad_1d(&self, x: f64) -> f64 {
        match *self {
            PriorSpec::Gaussian { variance } => x / variance,
            PriorSpec::Cauchy { scale } => {
                let u = x / scale;
                (2.0 * x / (scale * scale)) / (1.0 + u * u)
            }
            PriorSpec::Gdp { shape, scale } => {
                if x == 0.0 {
                    0.0
                } else {
                    x.signum() * (1.0 + shape) / (shape * scale + x.abs())
                }
            }
            PriorSpec::Laplace { scale } => {
                if x == 0.0 {
                    0.0
                } else {
                    x.signum() / scale
                }
            }
        }
    }

    /// Second derivative where it exists; zero for the kinked priors.
    pub fn curvature_1d(&self, x: f64) -> f64 {
        match *self {
            PriorSpec::Gaussian { variance } => 1.0 / variance,
            PriorSpec::Cauchy { scale } => {
                let s2 = scale * scale;
                2.0 * (s2 - x * x) / (s2 + x * x).powi(2)
            }
            PriorSpec::Gdp { shape, scale } => {
                let d = shape * scale + x.abs();
                -(1.0 + shape) / (d * d)
            }
            PriorSpec::Laplace { .. } => 0.0,
        }
    }

    /// Whether the point is a kink where the gradient convention applies.
    pub fn is_nondifferentiable_at(&self, x: f64) -> bool {
        x == 0.0 && matches!(self, PriorSpec::Gdp { .. } | PriorSpec::Laplace { .. })
    }

    /// Uniform bound on `|∂U⁰|` for the priors sampled by thinning.
    pub fn gradient_bound(&self) -> Option<f64> {
        match *self {
            PriorSpec::Gaussian { .. } => None,
            // |2u/(1+u²)| ≤ 1 with u = x/s
            PriorSpec::Cauchy { scale } => Some(1.0 / scale),
            PriorSpec::Gdp { shape, scale } => Some((1.0 + shape) / (shape * scale)),
            PriorSpec::Laplace { scale } => Some(1.0 / scale),
        }
    }

    /// Prior clock along `ξ_i + θ_i α_i t`. The Gaussian rate is returned exactly;
    /// the other variants return a constant envelope to be thinned.
    #[inline]
    pub fn rate(&self, xi_i: f64, theta_i: f64, alpha_i: f64) -> PriorRate {
        match (*self, self.gradient_bound()) {
            (PriorSpec::Gaussian { variance }, _) => PriorRate {
                bound: RateBound::linear(alpha_i * theta_i * xi_i / variance, alpha_i * alpha_i / variance),
                exact: true,
            },
            (_, Some(k)) => PriorRate {
                bound: RateBound::constant(alpha_i * k),
                exact: false,
            },
            (_, None) => unreachable!("only the Gaussian prior lacks a constant bound"),
        }
    }

    /// Bound kind recorded in run metadata.
    pub fn bound_description(&self) -> &'static str {
        match self {
            PriorSpec::Gaussian { .. } => "exact linear rate",
            PriorSpec::Cauchy { .. } => "constant 1/scale (|2u/(1+u^2)| <= 1)",
            PriorSpec::Gdp { .. } => "constant (1+shape)/(shape*scale)",
            PriorSpec::Laplace { .. } => "constant 1/scale",
        }
    }
}

impl fmt::Display for PriorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PriorSpec::Gaussian { variance } => write!(f, "gaussian:{variance}"),
            PriorSpec::Cauchy { scale } => write!(f, "cauchy:{scale}"),
            PriorSpec::Gdp { shape, scale } => write!(f, "gdp:{shape},{scale}"),
            PriorSpec::Laplace { scale } => write!(f, "laplace:{scale}"),
        }
    }
}

/// Parses `gaussian:<var>`, `cauchy[:<s>]`, `gdp:<a>,<t>` or `laplace:<b>`.
impl FromStr for PriorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = s.split_once(':').unwrap_or((s, ""));
        let nums: Vec<f64> = if args.is_empty() {
            Vec::new()
        } else {
            args.split(',')
                .map(|a| {
                    a.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::config(format!("bad prior parameter '{a}' in '{s}'")))
                })
                .collect::<Result<_>>()?
        };
        let prior = match (name.trim().to_ascii_lowercase().as_str(), nums.as_slice()) {
            ("gaussian" | "normal", [v]) => PriorSpec::Gaussian { variance: *v },
            ("cauchy", []) => PriorSpec::Cauchy { scale: DEFAULT_CAUCHY_SCALE },
            ("cauchy", [sc]) => PriorSpec::Cauchy { scale: *sc },
            ("gdp", [a, t]) => PriorSpec::Gdp { shape: *a, scale: *t },
            ("laplace", [b]) => PriorSpec::Laplace { scale: *b },
            _ => return Err(Error::config(format!("unrecognized prior '{s}'"))),
        };
        prior.validated()
    }
}

/// Prior clock envelope; `exact` means the envelope is the rate itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorRate {
    pub bound: RateBound,
    pub exact: bool,
}

/// `∂_i U⁰(ξ)`.
pub fn prior_grad(prior: &PriorSpec, i: usize, xi: &[f64]) -> f64 {
    prior.grad_1d(xi[i])
}

/// Prior clock parameters for dimension `i` in the given state.
pub fn prior_rate_params(prior: &PriorSpec, i: usize, state: &ZigZagState) -> PriorRate {
    prior.rate(state.xi[i], state.theta[i], state.alpha[i])
}

/// Per-term constants: `c_i^j = |x_i^j|` bounds `|∂_i U^j|` and
/// `C_i^j = |x_i^j| ‖x^j‖₂ / 4` is its Lipschitz constant in the 2-norm.
///
/// Per-dimension vectors are aligned with the stored entries of the matching column.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundConstants {
    pub grad_bound: Vec<Vec<f64>>,
    pub lipschitz: Vec<Vec<f64>>,
    pub grad_bound_sum: Vec<f64>,
    pub grad_bound_max: Vec<f64>,
    pub lipschitz_sum: Vec<f64>,
    pub lipschitz_max: Vec<f64>,
}

impl BoundConstants {
    /// `c_i^j`, zero off the sparse support.
    pub fn grad_bound_at(&self, data: &Dataset, i: usize, j: usize) -> f64 {
        data.column(i).position(j).map_or(0.0, |k| self.grad_bound[i][k])
    }

    pub fn lipschitz_at(&self, data: &Dataset, i: usize, j: usize) -> f64 {
        data.column(i).position(j).map_or(0.0, |k| self.lipschitz[i][k])
    }

    pub fn is_active(&self, i: usize) -> bool {
        self.grad_bound_sum[i] > 0.0
    }
}

pub fn compute_bound_constants(data: &Dataset) -> BoundConstants {
    let p = data.p();
    let mut out = BoundConstants {
        grad_bound: Vec::with_capacity(p),
        lipschitz: Vec::with_capacity(p),
        grad_bound_sum: Vec::with_capacity(p),
        grad_bound_max: Vec::with_capacity(p),
        lipschitz_sum: Vec::with_capacity(p),
        lipschitz_max: Vec::with_capacity(p),
    };
    for i in 0..p {
        let col = data.column(i);
        let c: Vec<f64> = col.value.iter().map(|x| x.abs()).collect();
        let lip: Vec<f64> = col
            .iter()
            .map(|(j, x)| 0.25 * x.abs() * data.row_norm(j))
            .collect();
        out.grad_bound_sum.push(c.iter().sum());
        out.grad_bound_max.push(c.iter().copied().fold(0.0, f64::max));
        out.lipschitz_sum.push(lip.iter().sum());
        out.lipschitz_max.push(lip.iter().copied().fold(0.0, f64::max));
        out.grad_bound.push(c);
        out.lipschitz.push(lip);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_obs(x: &[f64], y: u8) -> Dataset {
        Dataset::from_dense(&[x.to_vec()], vec![y]).unwrap()
    }

    #[test]
    fn grad_term_at_origin() {
        let d = one_obs(&[1.0], 1);
        assert_eq!(likelihood_grad_term(&d, 0, 0, &[0.0]).unwrap(), -0.5);
    }

    #[test]
    fn grad_term_zero_covariate() {
        let d = one_obs(&[0.0, 2.0], 0);
        assert_eq!(likelihood_grad_term(&d, 0, 0, &[3.0, -7.0]).unwrap(), 0.0);
    }

    #[test]
    fn grad_term_index_errors() {
        let d = one_obs(&[1.0], 1);
        assert!(matches!(likelihood_grad_term(&d, 1, 0, &[0.0]), Err(Error::Usage(_))));
        assert!(matches!(likelihood_grad_term(&d, 0, 1, &[0.0]), Err(Error::Usage(_))));
        assert!(matches!(likelihood_grad_full(&d, 0, &[0.0, 1.0]), Err(Error::Usage(_))));
        assert!(likelihood_grad_full(&d, 0, &[f64::NAN]).is_err());
    }

    #[test]
    fn full_grad_single_observation_is_term() {
        let d = one_obs(&[0.3, -1.2], 1);
        let xi = [0.7, 0.1];
        for i in 0..2 {
            assert_eq!(
                likelihood_grad_full(&d, i, &xi).unwrap(),
                likelihood_grad_term(&d, 0, i, &xi).unwrap()
            );
        }
    }

    #[test]
    fn full_grad_antisymmetric_pair_cancels() {
        let d = Dataset::from_dense(&[vec![1.5], vec![-1.5]], vec![1, 1]).unwrap();
        assert_eq!(likelihood_grad_full(&d, 0, &[0.0]).unwrap(), 0.0);
    }

    #[test]
    fn prior_gradients() {
        let g = PriorSpec::gaussian(1.0).unwrap();
        assert_eq!(prior_grad(&g, 0, &[2.0]), 2.0);
        let l = PriorSpec::laplace(2.0).unwrap();
        assert_eq!(prior_grad(&l, 0, &[-3.0]), -0.5);
        assert_eq!(prior_grad(&l, 0, &[0.0]), 0.0);
        assert!(l.is_nondifferentiable_at(0.0));
        let c = PriorSpec::cauchy(2.5).unwrap();
        assert!((prior_grad(&c, 0, &[2.5]) - 0.4).abs() < 1e-15);
        let gdp = PriorSpec::gdp(3.0, 1.0).unwrap();
        assert!((prior_grad(&gdp, 0, &[-1.0]) + 4.0 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn prior_gradients_match_finite_differences() {
        let priors = [
            PriorSpec::gaussian(0.7).unwrap(),
            PriorSpec::cauchy(2.5).unwrap(),
            PriorSpec::gdp(1.5, 0.8).unwrap(),
            PriorSpec::laplace(1.3).unwrap(),
        ];
        let h = 1e-6;
        for prior in priors {
            for &x in &[-3.1, -0.4, 0.25, 1.0, 6.0] {
                let fd = (prior.potential_1d(x + h) - prior.potential_1d(x - h)) / (2.0 * h);
                let g = prior.grad_1d(x);
                assert!((fd - g).abs() <= 1e-5 * g.abs().max(1e-3), "{prior} at {x}: {g} vs {fd}");
            }
        }
    }

    #[test]
    fn prior_rates() {
        let g = PriorSpec::gaussian(1.0).unwrap();
        let r = g.rate(0.0, 1.0, 1.0);
        assert_eq!(r.bound, RateBound::linear(0.0, 1.0));
        assert!(r.exact);
        let l = PriorSpec::laplace(4.0).unwrap();
        let r = l.rate(1.0, -1.0, 2.0);
        assert_eq!(r.bound, RateBound::constant(0.5));
        assert!(!r.exact);
    }

    #[test]
    fn invalid_priors_rejected() {
        assert!(PriorSpec::gaussian(0.0).is_err());
        assert!(PriorSpec::gdp(1.0, -1.0).is_err());
        assert!("laplace:-2".parse::<PriorSpec>().is_err());
        assert!("beta:1".parse::<PriorSpec>().is_err());
    }

    #[test]
    fn prior_parsing() {
        assert_eq!("gaussian:1e10".parse::<PriorSpec>().unwrap(), PriorSpec::Gaussian { variance: 1e10 });
        assert_eq!("cauchy".parse::<PriorSpec>().unwrap(), PriorSpec::Cauchy { scale: 2.5 });
        assert_eq!("gdp:3,1".parse::<PriorSpec>().unwrap(), PriorSpec::Gdp { shape: 3.0, scale: 1.0 });
        let p = PriorSpec::laplace(0.5).unwrap();
        assert_eq!(p.to_string().parse::<PriorSpec>().unwrap(), p);
    }

    #[test]
    fn bound_constants_example() {
        let d = one_obs(&[3.0, 4.0], 0);
        let bc = compute_bound_constants(&d);
        assert_eq!(bc.grad_bound[0], vec![3.0]);
        assert_eq!(bc.lipschitz[0], vec![3.75]);
    }

    #[test]
    fn all_zero_column_is_inactive() {
        let d = Dataset::from_dense(&[vec![0.0, 1.0], vec![0.0, 2.0]], vec![0, 1]).unwrap();
        let bc = compute_bound_constants(&d);
        assert_eq!(bc.grad_bound_sum[0], 0.0);
        assert!(bc.grad_bound[0].is_empty());
        assert!(!bc.is_active(0));
        assert!(bc.is_active(1));
    }

    #[test]
    fn sparse_column_aggregates() {
        let rows: Vec<Vec<f64>> = [1.0, 0.0, 0.0, 3.0].iter().map(|&v| vec![v]).collect();
        let d = Dataset::from_dense(&rows, vec![0, 1, 0, 1]).unwrap();
        let bc = compute_bound_constants(&d);
        assert_eq!(d.n() as f64 * bc.grad_bound_max[0], 12.0);
        assert_eq!(bc.grad_bound_sum[0], 4.0);
    }

    #[test]
    fn storage_invariants() {
        let rows = vec![vec![0.0, 1.0, -2.0], vec![3.0, 0.0, 0.0], vec![0.0, 0.0, 0.0]];
        let d = Dataset::from_dense(&rows, vec![1, 0, 1]).unwrap();
        assert_eq!(d.nnz(), 3);
        for i in 0..3 {
            let col = d.column(i);
            assert!(col.index.windows(2).all(|w| w[0] < w[1]));
            assert!(col.value.iter().all(|&v| v != 0.0));
        }
        assert!((d.row_norm(0) - 5f64.sqrt()).abs() < 1e-15);
        assert_eq!(d.row_norm(2), 0.0);
        assert_eq!(d.entry(0, 2), -2.0);
        assert_eq!(d.entry(1, 2), 0.0);
    }

    #[test]
    fn rejects_malformed_columns() {
        assert!(Dataset::from_columns(2, vec![0, 1], vec![vec![(1, 1.0), (0, 1.0)]]).is_err());
        assert!(Dataset::from_columns(2, vec![0, 1], vec![vec![(2, 1.0)]]).is_err());
        assert!(Dataset::from_columns(2, vec![0, 2], vec![vec![(0, 1.0)]]).is_err());
        assert!(Dataset::from_columns(1, vec![0, 1], vec![]).is_err());
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(sigmoid(-800.0), 0.0);
        assert_eq!(sigmoid(800.0), 1.0);
        assert!((softplus(800.0) - 800.0).abs() < 1e-12);
        assert!(softplus(-800.0) >= 0.0);
    }
}

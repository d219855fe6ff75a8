//! Posterior mode by damped Newton iteration, used as the control-variate and
//! stratification reference point.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{sigmoid, Dataset, PriorSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeOptions {
    pub max_iter: usize,
    /// Stop when the largest gradient component falls below this.
    pub grad_tol: f64,
}

impl Default for ModeOptions {
    fn default() -> Self {
        ModeOptions {
            max_iter: 200,
            grad_tol: 1e-9,
        }
    }
}

/// Full gradient of `U = U⁰ + Σ U^j`.
pub fn potential_gradient(data: &Dataset, prior: &PriorSpec, xi: &[f64]) -> Vec<f64> {
    let mut g: Vec<f64> = xi.iter().map(|&x| prior.grad_1d(x)).collect();
    for j in 0..data.n() {
        let r = data.residual(j, xi);
        for (i, x) in data.row(j).iter() {
            g[i] += x * r;
        }
    }
    g
}

fn hessian(data: &Dataset, prior: &PriorSpec, xi: &[f64]) -> DMatrix<f64> {
    let p = data.p();
    let mut h = DMatrix::zeros(p, p);
    for (i, &x) in xi.iter().enumerate() {
        h[(i, i)] = prior.curvature_1d(x);
    }
    for j in 0..data.n() {
        let s = sigmoid(data.linear_predictor(j, xi));
        let w = s * (1.0 - s);
        let row = data.row(j);
        for (a, xa) in row.iter() {
            for (b, xb) in row.iter() {
                h[(a, b)] += w * xa * xb;
            }
        }
    }
    h
}

/// Minimizer of the potential starting from zero. Non-smooth priors use their
/// curvature away from the kink; the result is then an approximate mode.
pub fn posterior_mode(data: &Dataset, prior: &PriorSpec, opts: ModeOptions) -> Result<Vec<f64>> {
    let p = data.p();
    let mut xi = vec![0.0; p];
    let mut u = data.potential(prior, &xi);
    for _ in 0..opts.max_iter {
        let g = potential_gradient(data, prior, &xi);
        let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if gmax < opts.grad_tol {
            break;
        }
        let mut h = hessian(data, prior, &xi);
        let grad = DVector::from_vec(g.clone());
        let mut ridge = 0.0;
        let step = loop {
            if let Some(chol) = h.clone().cholesky() {
                break chol.solve(&grad);
            }
            ridge = if ridge == 0.0 { 1e-8 } else { ridge * 10.0 };
            if ridge > 1e8 {
                return Err(Error::InvalidData("mode search: Hessian is not positive definite".into()));
            }
            for i in 0..p {
                h[(i, i)] += ridge;
            }
        };
        let mut scale = 1.0;
        let mut improved = false;
        for _ in 0..60 {
            let cand: Vec<f64> = xi.iter().zip(step.iter()).map(|(x, s)| x - scale * s).collect();
            let uc = data.potential(prior, &cand);
            if uc.is_finite() && uc <= u {
                xi = cand;
                u = uc;
                improved = true;
                break;
            }
            scale *= 0.5;
        }
        if !improved {
            break;
        }
    }
    if xi.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData("mode search diverged".into()));
    }
    Ok(xi)
}

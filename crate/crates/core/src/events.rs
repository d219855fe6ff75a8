//! First-arrival sampling for Poisson clocks with (clamped) linear intensity,
//! and selection of the earliest clock among the 2p prior/likelihood clocks.
//!
//! Everything here is RNG-free: callers supply the unit-exponential variate.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rate envelope `M(t) = (a + b t)^+` for `t >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateBound {
    pub a: f64,
    pub b: f64,
}

impl RateBound {
    pub const ZERO: RateBound = RateBound { a: 0.0, b: 0.0 };

    pub fn constant(a: f64) -> Self {
        RateBound { a, b: 0.0 }
    }

    pub fn linear(a: f64, b: f64) -> Self {
        RateBound { a, b }
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        (self.a + self.b * t).max(0.0)
    }

    /// `∫_0^t M(s) ds`.
    pub fn integrated(&self, t: f64) -> f64 {
        let RateBound { a, b } = *self;
        if b == 0.0 {
            return a.max(0.0) * t;
        }
        if a >= 0.0 {
            a * t + 0.5 * b * t * t
        } else {
            let t0 = -a / b;
            if t <= t0 {
                0.0
            } else {
                0.5 * b * (t - t0) * (t - t0)
            }
        }
    }

    /// True when the envelope is zero for every `t >= 0`.
    pub fn is_identically_zero(&self) -> bool {
        self.b == 0.0 && self.a <= 0.0
    }
}

/// Solves `∫_0^τ (a + b s)^+ ds = e` for τ. Returns `+∞` when the rate is identically zero.
pub fn first_arrival(bound: RateBound, e: f64) -> Result<f64> {
    let RateBound { a, b } = bound;
    if !(a.is_finite() && b.is_finite() && e.is_finite()) {
        return Err(Error::usage(format!(
            "first_arrival: non-finite input (a={a}, b={b}, e={e})"
        )));
    }
    if e <= 0.0 {
        return Err(Error::usage(format!("first_arrival: exponential draw must be positive, got {e}")));
    }
    if b < 0.0 {
        return Err(Error::usage(format!("first_arrival: slope must be nonnegative, got {b}")));
    }
    Ok(first_arrival_unchecked(a, b, e))
}

#[inline]
pub(crate) fn first_arrival_unchecked(a: f64, b: f64, e: f64) -> f64 {
    if b == 0.0 {
        if a > 0.0 {
            e / a
        } else {
            f64::INFINITY
        }
    } else if a >= 0.0 {
        // (-a + sqrt(a^2 + 2be)) / b, rationalized to avoid cancellation when b is small
        2.0 * e / (a + (a * a + 2.0 * b * e).sqrt())
    } else {
        -a / b + (2.0 * e / b).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockKind {
    Prior,
    Likelihood,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClockId {
    pub dim: usize,
    pub kind: ClockKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrivalDraw {
    pub tau: f64,
    pub clock: ClockId,
    /// Envelope value `M(τ)`, the denominator of the thinning ratio.
    pub envelope_at_tau: f64,
}

impl ArrivalDraw {
    pub fn new(tau: f64, clock: ClockId, bound: RateBound) -> Self {
        let envelope_at_tau = if tau.is_finite() { bound.eval(tau) } else { 0.0 };
        ArrivalDraw {
            tau,
            clock,
            envelope_at_tau,
        }
    }

    /// Total order used to pick the winning clock: earliest τ, then prior before
    /// likelihood, then smallest dimension.
    pub fn precedence(&self, other: &ArrivalDraw) -> Ordering {
        self.tau
            .total_cmp(&other.tau)
            .then_with(|| kind_rank(self.clock.kind).cmp(&kind_rank(other.clock.kind)))
            .then_with(|| self.clock.dim.cmp(&other.clock.dim))
    }
}

#[inline]
pub(crate) fn kind_rank(kind: ClockKind) -> u8 {
    match kind {
        ClockKind::Prior => 0,
        ClockKind::Likelihood => 1,
    }
}

/// The earliest of a set of clock draws.
pub fn min_clock(draws: &[ArrivalDraw]) -> Result<ArrivalDraw> {
    let best = draws
        .iter()
        .min_by(|x, y| x.precedence(y))
        .ok_or_else(|| Error::usage("min_clock: no clocks supplied"))?;
    if best.tau.is_finite() {
        Ok(*best)
    } else {
        Err(Error::ProcessFrozen)
    }
}

//! The zig-zag process with sub-sampled likelihood clocks, Poisson thinning and
//! optional adaptive speeds.
//!
//! Each attempt draws a first arrival for the prior clock and the likelihood
//! clock of every dimension, moves to the earliest one and flips that
//! direction component with the thinning acceptance probability. The Gaussian
//! prior clock is sampled exactly and always flips.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::diagnostics::TrajectoryMoments;
use crate::error::{Error, Result};
use crate::events::{first_arrival_unchecked, ClockKind, RateBound};
use crate::model::{Dataset, PriorSpec};
use crate::subsample::{Batch, SubsamplingScheme};

/// Accept ratios above `1 + BOUND_TOLERANCE` abort the run.
pub const BOUND_TOLERANCE: f64 = 1e-9;

/// Floor applied to estimated standard deviations before speeds are normalized.
pub const SD_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZigZagState {
    pub xi: Vec<f64>,
    pub theta: Vec<f64>,
    pub alpha: Vec<f64>,
    pub t: f64,
}

impl ZigZagState {
    /// Unit speeds at time zero.
    pub fn new(xi: Vec<f64>, theta: Vec<f64>) -> Result<Self> {
        let alpha = vec![1.0; xi.len()];
        Self::with_alpha(xi, theta, alpha)
    }

    pub fn with_alpha(xi: Vec<f64>, theta: Vec<f64>, alpha: Vec<f64>) -> Result<Self> {
        let s = ZigZagState { xi, theta, alpha, t: 0.0 };
        s.validate()?;
        Ok(s)
    }

    /// Position `xi` with all directions `+1`.
    pub fn at(xi: Vec<f64>) -> Self {
        let p = xi.len();
        ZigZagState {
            xi,
            theta: vec![1.0; p],
            alpha: vec![1.0; p],
            t: 0.0,
        }
    }

    pub fn p(&self) -> usize {
        self.xi.len()
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.xi.len();
        if self.theta.len() != p || self.alpha.len() != p {
            return Err(Error::usage("state vectors must share one length"));
        }
        if self.xi.iter().any(|v| !v.is_finite()) {
            return Err(Error::usage("position must be finite"));
        }
        if self.theta.iter().any(|&d| d != 1.0 && d != -1.0) {
            return Err(Error::usage("directions must be +1 or -1"));
        }
        if self.alpha.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return Err(Error::usage("speeds must be positive and finite"));
        }
        if !(self.t >= 0.0 && self.t.is_finite()) {
            return Err(Error::usage("clock must be finite and nonnegative"));
        }
        Ok(())
    }

    /// `ξ + θ∘α·τ`, moving the clock forward.
    #[inline]
    pub fn advance(&mut self, tau: f64) {
        for ((x, d), a) in self.xi.iter_mut().zip(&self.theta).zip(&self.alpha) {
            *x += d * a * tau;
        }
        self.t += tau;
    }

    pub fn velocity(&self) -> Vec<f64> {
        self.theta.iter().zip(&self.alpha).map(|(d, a)| d * a).collect()
    }
}

/// `F_i(θ)`: negates component `i`.
pub fn flip(theta: &[f64], i: usize) -> Vec<f64> {
    let mut out = theta.to_vec();
    out[i] = -out[i];
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordMode {
    /// Every attempt plus the position after it.
    FullState,
    /// Accepted flips only.
    #[default]
    FlipsOnly,
}

impl FromStr for RecordMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full_state" | "full" => Ok(RecordMode::FullState),
            "flips_only" | "flips" => Ok(RecordMode::FlipsOnly),
            _ => Err(Error::config(format!("unknown record mode '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum Precondition {
    #[default]
    Off,
    /// Speeds are recomputed after every `update_every` accepted flips until
    /// `freeze_after` attempts, then held fixed.
    Adaptive { update_every: u64, freeze_after: u64 },
}

impl std::fmt::Display for Precondition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Precondition::Off => write!(f, "off"),
            Precondition::Adaptive {
                update_every,
                freeze_after,
            } => write!(f, "adaptive:{update_every},{freeze_after}"),
        }
    }
}

/// Parses `off` or `adaptive:<every>,<freeze>`.
impl FromStr for Precondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "off" {
            return Ok(Precondition::Off);
        }
        let bad = || Error::config(format!("bad preconditioning spec '{s}'"));
        let args = s.strip_prefix("adaptive:").ok_or_else(bad)?;
        let (every, freeze) = args.split_once(',').ok_or_else(bad)?;
        let p = Precondition::Adaptive {
            update_every: every.trim().parse().map_err(|_| bad())?,
            freeze_after: freeze.trim().parse().map_err(|_| bad())?,
        };
        if let Precondition::Adaptive { update_every: 0, .. } = p {
            return Err(Error::config("update_every must be at least 1"));
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub n_attempts: u64,
    pub seed: u64,
    #[serde(default)]
    pub precondition: Precondition,
    #[serde(default)]
    pub record_mode: RecordMode,
}

impl RunConfig {
    pub fn new(n_attempts: u64, seed: u64) -> Self {
        RunConfig {
            n_attempts,
            seed,
            precondition: Precondition::Off,
            record_mode: RecordMode::FlipsOnly,
        }
    }

    pub fn with_precondition(mut self, p: Precondition) -> Self {
        self.precondition = p;
        self
    }

    pub fn with_record_mode(mut self, r: RecordMode) -> Self {
        self.record_mode = r;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let Precondition::Adaptive {
            update_every,
            freeze_after,
        } = self.precondition
        {
            if update_every == 0 {
                return Err(Error::config("update_every must be at least 1"));
            }
            if freeze_after > self.n_attempts {
                return Err(Error::config(format!(
                    "freeze_after ({freeze_after}) exceeds the attempt budget ({})",
                    self.n_attempts
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub dim: usize,
    pub kind: ClockKind,
    pub accepted: bool,
}

/// New speeds taking effect right after the `after_event`-th recorded event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedUpdate {
    pub after_event: usize,
    pub t: f64,
    pub alpha: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RunStats {
    pub attempts: u64,
    pub flips: u64,
    pub prior_proposals: u64,
    pub likelihood_proposals: u64,
    pub max_accept_ratio: f64,
    /// Process time at which adaptive speeds were frozen.
    pub frozen_at: Option<f64>,
}

/// Event record of a piecewise-linear trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skeleton {
    pub record_mode: RecordMode,
    pub initial: ZigZagState,
    pub events: Vec<Event>,
    /// Full-state mode: `ξ` after each event, flattened row-wise.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub positions: Vec<f64>,
    pub speed_updates: Vec<SpeedUpdate>,
    pub final_state: ZigZagState,
    pub stats: RunStats,
}

impl Skeleton {
    pub fn p(&self) -> usize {
        self.initial.p()
    }

    pub fn start_time(&self) -> f64 {
        self.initial.t
    }

    pub fn end_time(&self) -> f64 {
        self.final_state.t
    }

    /// Number of accepted flips on record.
    pub fn flip_count(&self) -> usize {
        self.events.iter().filter(|e| e.accepted).count()
    }

    /// Calls `f(t0, duration, ξ(t0), velocity)` for each maximal linear piece, in order.
    pub fn for_each_segment(&self, mut f: impl FnMut(f64, f64, &[f64], &[f64])) {
        let p = self.p();
        let mut xi = self.initial.xi.clone();
        let mut theta = self.initial.theta.clone();
        let mut alpha = self.initial.alpha.clone();
        let mut v: Vec<f64> = theta.iter().zip(&alpha).map(|(d, a)| d * a).collect();
        let mut t = self.initial.t;
        let mut next_update = 0;
        for (k, ev) in self.events.iter().enumerate() {
            if !ev.accepted {
                continue;
            }
            let tau = ev.t - t;
            f(t, tau, &xi, &v);
            if self.positions.is_empty() {
                for (x, vi) in xi.iter_mut().zip(&v) {
                    *x += vi * tau;
                }
            } else {
                xi.copy_from_slice(&self.positions[k * p..(k + 1) * p]);
            }
            t = ev.t;
            theta[ev.dim] = -theta[ev.dim];
            while let Some(u) = self.speed_updates.get(next_update) {
                if u.after_event != k + 1 {
                    break;
                }
                alpha.clone_from(&u.alpha);
                next_update += 1;
            }
            for ((vi, d), a) in v.iter_mut().zip(&theta).zip(&alpha) {
                *vi = d * a;
            }
        }
        let tau = self.final_state.t - t;
        if tau > 0.0 {
            f(t, tau, &xi, &v);
        }
    }

    /// State of the trajectory at time `t` (the post-flip state at event times).
    pub fn state_at(&self, t: f64) -> Result<ZigZagState> {
        if !(t >= self.start_time() && t <= self.end_time()) {
            return Err(Error::usage(format!(
                "time {t} outside [{}, {}]",
                self.start_time(),
                self.end_time()
            )));
        }
        if t == self.end_time() {
            return Ok(self.final_state.clone());
        }
        let mut state = self.initial.clone();
        let mut theta = self.initial.theta.clone();
        let mut alpha = self.initial.alpha.clone();
        let mut next_update = 0;
        let mut seg_start = self.initial.t;
        let mut xi = self.initial.xi.clone();
        let p = self.p();
        for (k, ev) in self.events.iter().enumerate() {
            if !ev.accepted {
                continue;
            }
            if ev.t > t {
                break;
            }
            for ((x, d), a) in xi.iter_mut().zip(&theta).zip(&alpha) {
                *x += d * a * (ev.t - seg_start);
            }
            if !self.positions.is_empty() {
                xi.copy_from_slice(&self.positions[k * p..(k + 1) * p]);
            }
            seg_start = ev.t;
            theta[ev.dim] = -theta[ev.dim];
            while let Some(u) = self.speed_updates.get(next_update) {
                if u.after_event != k + 1 {
                    break;
                }
                alpha.clone_from(&u.alpha);
                next_update += 1;
            }
        }
        for ((x, d), a) in xi.iter_mut().zip(&theta).zip(&alpha) {
            *x += d * a * (t - seg_start);
        }
        state.xi = xi;
        state.theta = theta;
        state.alpha = alpha;
        state.t = t;
        Ok(state)
    }

    /// The part of the trajectory after time `t0`, starting from the state at `t0`.
    pub fn tail_from(&self, t0: f64) -> Result<Skeleton> {
        let initial = self.state_at(t0)?;
        let first = self.events.partition_point(|e| e.t <= t0);
        let p = self.p();
        let events = self.events[first..].to_vec();
        let positions = if self.positions.is_empty() {
            Vec::new()
        } else {
            self.positions[first * p..].to_vec()
        };
        let speed_updates = self
            .speed_updates
            .iter()
            .filter(|u| u.after_event > first)
            .map(|u| SpeedUpdate {
                after_event: u.after_event - first,
                ..u.clone()
            })
            .collect();
        Ok(Skeleton {
            record_mode: self.record_mode,
            initial,
            events,
            positions,
            speed_updates,
            final_state: self.final_state.clone(),
            stats: self.stats,
        })
    }

    /// The part of the trajectory after adaptation stopped (the whole run if it never adapted).
    pub fn frozen_tail(&self) -> Result<Skeleton> {
        match self.stats.frozen_at {
            Some(t) => self.tail_from(t),
            None => Ok(self.clone()),
        }
    }
}

/// `α_i = p·sd_i / Σ sd` from trajectory moments, with `sd` floored at [`SD_FLOOR`].
/// Returns `None` when no time has elapsed.
pub fn update_preconditioner(moments: &TrajectoryMoments) -> Option<Vec<f64>> {
    if moments.time <= 0.0 {
        return None;
    }
    let sd: Vec<f64> = moments
        .variance()
        .iter()
        .map(|v| v.max(0.0).sqrt().max(SD_FLOOR))
        .collect();
    Some(speeds_from_sd(&sd))
}

/// Normalizes standard deviations into speeds summing to `p`.
pub fn speeds_from_sd(sd: &[f64]) -> Vec<f64> {
    let sd: Vec<f64> = sd.iter().map(|s| s.max(SD_FLOOR)).collect();
    let total: f64 = sd.iter().sum();
    let p = sd.len() as f64;
    sd.iter().map(|s| p * s / total).collect()
}

/// Simulates the process for `config.n_attempts` proposals.
pub fn run(
    data: &Dataset,
    prior: &PriorSpec,
    scheme: &SubsamplingScheme,
    config: &RunConfig,
    init: ZigZagState,
) -> Result<Skeleton> {
    config.validate()?;
    init.validate()?;
    let p = data.p();
    if init.p() != p {
        return Err(Error::usage(format!("state has length {} but data has p = {p}", init.p())));
    }
    if scheme.constants().grad_bound.len() != p {
        return Err(Error::usage("scheme was built against different data"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = init.clone();
    let mut events = Vec::new();
    let mut positions = Vec::new();
    let mut speed_updates = Vec::new();
    let mut stats = RunStats::default();
    let full = config.record_mode == RecordMode::FullState;

    let (update_every, freeze_after) = match config.precondition {
        Precondition::Off => (0, 0),
        Precondition::Adaptive {
            update_every,
            freeze_after,
        } => (update_every, freeze_after),
    };
    let mut adapting = freeze_after > 0;
    let mut moments = TrajectoryMoments::new(p);
    let mut velocity = state.velocity();

    let cv = scheme.control_variate();
    let active: Vec<bool> = (0..p).map(|i| scheme.is_active(i)).collect();
    let mut alpha_norm = norm(&state.alpha);
    let mut batch = Batch::default();

    // Pending proposal per clock: priors in 0..p, likelihoods in p..2p. A clock's
    // envelope only depends on its own coordinate (and, through the CV distance,
    // on ‖ξ − ξ*‖, which grows at most at rate ‖α‖), so a proposal stays valid
    // until its dimension flips or the speeds change.
    let mut clocks = vec![Clock::IDLE; 2 * p];
    let draw = |k: usize, state: &ZigZagState, alpha_norm: f64, rng: &mut ChaCha8Rng| -> Clock {
        let e: f64 = rng.sample(Exp1);
        if k < p {
            let r = prior.rate(state.xi[k], state.theta[k], state.alpha[k]);
            Clock::new(state.t, r.bound, r.exact, e)
        } else {
            let i = k - p;
            if !active[i] {
                return Clock::IDLE;
            }
            let distance = cv.map_or(0.0, |c| c.distance(&state.xi));
            let bound = scheme.bound_with(i, state.theta[i], state.alpha[i], distance, alpha_norm);
            Clock::new(state.t, bound, false, e)
        }
    };
    for (k, c) in clocks.iter_mut().enumerate() {
        *c = draw(k, &state, alpha_norm, &mut rng);
    }

    while stats.attempts < config.n_attempts {
        // Earliest clock; strict comparison in (all priors, then all likelihoods)
        // dimension order realizes the tie-break.
        let mut k = 0;
        for (c, clock) in clocks.iter().enumerate().skip(1) {
            if clock.time < clocks[k].time {
                k = c;
            }
        }
        let clock = clocks[k];
        if !clock.time.is_finite() {
            return Err(Error::ProcessFrozen);
        }
        let (i, kind) = if k < p { (k, ClockKind::Prior) } else { (k - p, ClockKind::Likelihood) };
        let tau = (clock.time - state.t).max(0.0);

        if adapting {
            moments.add_segment(&state.xi, &velocity, tau);
        }
        state.advance(tau);
        state.t = clock.time.max(state.t);
        stats.attempts += 1;

        let exact = clock.exact;
        let ratio = if exact {
            1.0
        } else {
            let envelope = clock.bound.eval(clock.time - clock.origin);
            let rate = match kind {
                ClockKind::Prior => {
                    stats.prior_proposals += 1;
                    (state.theta[i] * state.alpha[i] * prior.grad_1d(state.xi[i])).max(0.0)
                }
                ClockKind::Likelihood => {
                    stats.likelihood_proposals += 1;
                    scheme.fill_batch(data, i, &mut rng, &mut batch);
                    let g = scheme.estimate_unchecked(data, &state.xi, &batch);
                    (state.theta[i] * state.alpha[i] * g).max(0.0)
                }
            };
            let ratio = if rate == 0.0 { 0.0 } else { rate / envelope };
            if !(ratio <= 1.0 + BOUND_TOLERANCE) {
                return Err(Error::BoundViolation {
                    dim: i,
                    time: state.t,
                    ratio,
                });
            }
            ratio
        };
        if exact {
            stats.prior_proposals += 1;
        }
        stats.max_accept_ratio = stats.max_accept_ratio.max(ratio);

        let accepted = exact || (ratio > 0.0 && rng.random::<f64>() < ratio);
        if accepted {
            state.theta[i] = -state.theta[i];
            velocity[i] = -velocity[i];
            stats.flips += 1;
        }
        if accepted || full {
            events.push(Event {
                t: state.t,
                dim: i,
                kind,
                accepted,
            });
            if full {
                positions.extend_from_slice(&state.xi);
            }
        }

        let mut speeds_changed = false;
        if adapting {
            if accepted && stats.flips % update_every == 0 {
                if let Some(alpha) = update_preconditioner(&moments) {
                    state.alpha = alpha;
                    velocity = state.velocity();
                    alpha_norm = norm(&state.alpha);
                    speeds_changed = true;
                    speed_updates.push(SpeedUpdate {
                        after_event: events.len(),
                        t: state.t,
                        alpha: state.alpha.clone(),
                    });
                }
            }
            if stats.attempts >= freeze_after {
                adapting = false;
                stats.frozen_at = Some(state.t);
            }
        }

        if speeds_changed {
            for (c, slot) in clocks.iter_mut().enumerate() {
                *slot = draw(c, &state, alpha_norm, &mut rng);
            }
        } else if accepted {
            clocks[i] = draw(i, &state, alpha_norm, &mut rng);
            clocks[p + i] = draw(p + i, &state, alpha_norm, &mut rng);
        } else {
            clocks[k] = draw(k, &state, alpha_norm, &mut rng);
        }
    }

    Ok(Skeleton {
        record_mode: config.record_mode,
        initial: init,
        events,
        positions,
        speed_updates,
        final_state: state,
        stats,
    })
}

/// A pending proposal: absolute arrival time and the envelope it was drawn from.
#[derive(Debug, Clone, Copy)]
struct Clock {
    time: f64,
    origin: f64,
    bound: RateBound,
    exact: bool,
}

impl Clock {
    const IDLE: Clock = Clock {
        time: f64::INFINITY,
        origin: 0.0,
        bound: RateBound::ZERO,
        exact: false,
    };

    fn new(origin: f64, bound: RateBound, exact: bool, e: f64) -> Self {
        Clock {
            time: origin + first_arrival_unchecked(bound.a, bound.b, e),
            origin,
            bound,
            exact,
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

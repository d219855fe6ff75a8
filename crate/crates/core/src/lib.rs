//! Zig-zag sampling for Bayesian logistic regression with sub-sampled,
//! bias-free gradient estimates.
//!
//! The crate is organized around one process loop ([`zigzag::run`]) and the
//! pieces it combines: the potential and its per-observation bounds
//! ([`model`]), gradient estimators with matching rate envelopes
//! ([`subsample`]), exact first-arrival sampling ([`events`]) and trajectory
//! diagnostics ([`diagnostics`]).

pub mod data;
pub mod diagnostics;
pub mod error;
pub mod events;
pub mod experiment;
pub mod mode;
pub mod model;
pub mod subsample;
pub mod zigzag;

pub use error::{Error, Result};
pub use events::{first_arrival, min_clock, ArrivalDraw, ClockId, ClockKind, RateBound};
pub use model::{
    compute_bound_constants, likelihood_grad_full, likelihood_grad_term, prior_grad, prior_rate_params,
    BoundConstants, Dataset, PriorSpec,
};
pub use subsample::{
    bound_for, draw_batch, estimate_grad, Batch, CvReference, Family, SchemeSpec, SubsamplingScheme,
};
pub use zigzag::{run, Precondition, RecordMode, RunConfig, Skeleton, ZigZagState};

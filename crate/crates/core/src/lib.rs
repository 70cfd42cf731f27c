//! Inference for a parametric signal observed in Gaussian white noise,
//! `dY(t) = S(t, θ) dt + ε dw(t)` on `(0, 1)`, together with a rare-event
//! Monte Carlo engine that measures moderate-deviation probabilities of
//! tests, estimators and confidence sets against their sharp Gaussian
//! lower bounds.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the
//! aliases at the crate root fix the scalar to `f64`, and the `*32`
//! variants to `f32`.

// Negated comparisons such as `!(x > 0)` are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod error;
pub mod geometry;
pub mod infer;
pub mod linalg;
pub mod mdp;
pub mod model;
pub mod scalar;
pub mod schedule;
pub mod simulate;

pub use error::{Error, Result};
pub use scalar::Real;

pub use bounds::Theorem;
pub use infer::{EstimatorKind, Standardize, TestKind};
pub use simulate::{NoiseStream, StreamKey};

pub type Grid = model::Grid<f64>;
pub type ParamBox = model::ParamBox<f64>;
pub type SignalModel = model::SignalModel<f64>;
pub type FisherMatrix = model::FisherMatrix<f64>;
pub type RegularityReport = model::RegularityReport<f64>;
pub type Matrix = linalg::Matrix<f64>;
pub type Observation<'g> = simulate::Observation<'g, f64>;
pub type OmegaSet = geometry::OmegaSet<f64>;
pub type A4Report = geometry::A4Report<f64>;
pub type TestSpec = infer::TestSpec<f64>;
pub type EstimatorSpec = infer::EstimatorSpec<f64>;
pub type ConfidenceSpec = infer::ConfidenceSpec<f64>;
pub type MCConfig = mdp::MCConfig<f64>;
pub type Tilt = mdp::Tilt<f64>;
pub type RareEventEstimate = mdp::RareEventEstimate<f64>;
pub type RunSettings = mdp::RunSettings<f64>;
pub type BoundReport = bounds::BoundReport<f64>;
pub type Schedule = schedule::Schedule<f64>;

pub type Grid32 = model::Grid<f32>;
pub type SignalModel32 = model::SignalModel<f32>;
pub type FisherMatrix32 = model::FisherMatrix<f32>;
pub type Observation32<'g> = simulate::Observation<'g, f32>;
pub type OmegaSet32 = geometry::OmegaSet<f32>;
pub type MCConfig32 = mdp::MCConfig<f32>;
pub type RareEventEstimate32 = mdp::RareEventEstimate<f32>;
pub type BoundReport32 = bounds::BoundReport<f32>;

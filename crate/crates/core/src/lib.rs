//! Finite-size scaling of the exit probability of density-dependent Markov
//! chains, instantiated for the 2-core of irregular random hypergraphs.
//!
//! The pipeline is: [`ensemble`] (degree distribution, threshold) feeds
//! [`fluid`] (ODE trajectory, critical times), which feeds [`fss`] (the
//! scaling objects and predictions) together with the constant from [`omega`].
//! [`peeling`] provides the exact graph-level simulation used for validation,
//! and [`kernel`] the transition kernel shared by all of them.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ensemble;
pub mod error;
pub mod exact;
pub mod fluid;
pub mod fss;
pub mod kernel;
pub mod normal;
pub mod omega;
pub mod peeling;
pub mod rng;
pub mod stats;

pub use error::{Error, ErrorClass, Result};
